//! Numerical laboratory for least-energy spike solutions of the singularly
//! perturbed m-Laplacian Neumann problem
//! `ε^m Δ_m u − u^{m−1} + f(u) = 0` in `Ω`, `∂u/∂ν = 0` on `∂Ω`.

pub mod config;
pub mod fem;
pub mod geometry;
pub mod harness;
pub mod nehari;
pub mod nonlinearity;
pub mod numerics;
pub mod radial;
pub mod verify;
