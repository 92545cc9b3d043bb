//! P1 discretization of
//! `J_ε(v) = ∫ (ε^m/m)|∇v|^m + (1/m)|v|^m − F(v₊)` and its first variation.
//! The Neumann condition is natural, so there are no boundary terms.
//!
//! Assembly runs over fixed chunks of cells in parallel. Energies are
//! reduced chunk by chunk in chunk order with compensated sums; nodal
//! gradients are gathered per vertex from its incident cells in increasing
//! cell order. Both are therefore independent of the worker count.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::Mesh;
use crate::nonlinearity::NonlinearitySpec;
use crate::numerics::CompensatedSum;

/// Regularization of the degenerate factor `|∇v|^{m−2}` in the gradient.
pub const GRADIENT_ETA: f64 = 1e-8;
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `(ε^m/m) ∫ |∇v|^m`.
    pub grad_term: f64,
    /// `(1/m) ∫ |v|^m`.
    pub mass_term: f64,
    /// `∫ F(v₊)`.
    pub potential_term: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn from_sums(grad: f64, mass: f64, potential: f64) -> Self {
        Self {
            grad_term: grad,
            mass_term: mass,
            potential_term: potential,
            total: grad + mass - potential,
        }
    }
}

/// Nodal values on a shared mesh.
#[derive(Debug, Clone)]
pub struct DiscreteField {
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
}

impl DiscreteField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self, String> {
        if values.len() != mesh.n_vertices() {
            return Err(format!("{} values for {} vertices", values.len(), mesh.n_vertices()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(format!("non-finite value at vertex {i}"));
        }
        Ok(Self { mesh, values })
    }
}

/// Per-cell geometric data for P1 elements on a mesh.
#[derive(Debug, Clone)]
pub struct FemSpace {
    mesh: Arc<Mesh>,
    /// Gradients of the barycentric basis functions, `(dim+1)·dim` per cell.
    basis_grads: Vec<f64>,
    volumes: Vec<f64>,
    lumped: Vec<f64>,
}

impl FemSpace {
    pub fn new(mesh: Arc<Mesh>) -> Self {
        let d = mesh.dim;
        let k = d + 1;
        let nc = mesh.n_cells();
        let mut basis_grads = vec![0.0; nc * k * d];
        let mut volumes = vec![0.0; nc];
        for c in 0..nc {
            let cell = mesh.cell(c);
            let p0 = mesh.vertex(cell[0]);
            // Rows of the inverse Jacobian are the gradients of λ_1..λ_d.
            let mut jac = [[0.0; 3]; 3];
            for j in 0..d {
                let p = mesh.vertex(cell[j + 1]);
                for i in 0..d {
                    jac[i][j] = p[i] - p0[i];
                }
            }
            let inv = invert(d, &jac);
            let g = &mut basis_grads[c * k * d..(c + 1) * k * d];
            for a in 1..k {
                for i in 0..d {
                    g[a * d + i] = inv[a - 1][i];
                    g[i] -= inv[a - 1][i];
                }
            }
            volumes[c] = mesh.cell_volume(c);
        }
        let mut lumped = vec![0.0; mesh.n_vertices()];
        for (i, l) in lumped.iter_mut().enumerate() {
            let mut acc = CompensatedSum::default();
            for &c in mesh.vertex_cells(i) {
                acc.add(volumes[c] / k as f64);
            }
            *l = acc.value();
        }
        Self {
            mesh,
            basis_grads,
            volumes,
            lumped,
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// Row-sum lumped mass per vertex.
    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }

    pub fn volume(&self) -> f64 {
        let mut acc = CompensatedSum::default();
        for &v in &self.volumes {
            acc.add(v);
        }
        acc.value()
    }

    /// Constant gradient of `v` on cell `c`.
    pub fn cell_gradient(&self, c: usize, v: &[f64]) -> [f64; 3] {
        let d = self.mesh.dim;
        let k = d + 1;
        let g = &self.basis_grads[c * k * d..(c + 1) * k * d];
        let mut out = [0.0; 3];
        for (a, &node) in self.mesh.cell(c).iter().enumerate() {
            let vi = v[node];
            for i in 0..d {
                out[i] += vi * g[a * d + i];
            }
        }
        out
    }

    /// Average of `|∇v|` over the cells around each vertex.
    pub fn vertex_gradient_norms(&self, v: &[f64]) -> Vec<f64> {
        (0..self.mesh.n_vertices())
            .into_par_iter()
            .map(|i| {
                let cells = self.mesh.vertex_cells(i);
                let s: f64 = cells
                    .iter()
                    .map(|&c| {
                        let g = self.cell_gradient(c, v);
                        (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt()
                    })
                    .sum();
                s / cells.len() as f64
            })
            .collect()
    }

    /// Quadrature rule for the zero-order terms on cell `c`: weights and
    /// pairs of local nodes whose average is the sample value. Edge
    /// midpoints on triangles, vertices on tetrahedra.
    #[inline]
    fn quadrature(&self, c: usize) -> (f64, &'static [(usize, usize)]) {
        const TRI: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];
        const TET: [(usize, usize); 4] = [(0, 0), (1, 1), (2, 2), (3, 3)];
        if self.mesh.dim == 2 {
            (self.volumes[c] / 3.0, &TRI)
        } else {
            (self.volumes[c] / 4.0, &TET)
        }
    }

    /// Quadrature weights and sample values of `v` for the zero-order terms,
    /// in cell order.
    pub fn quadrature_samples(&self, v: &[f64]) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.volumes.len() * (self.mesh.dim + 1));
        for c in 0..self.volumes.len() {
            let cell = self.mesh.cell(c);
            let (w, pts) = self.quadrature(c);
            for &(a, b) in pts {
                out.push((w, 0.5 * (v[cell[a]] + v[cell[b]])));
            }
        }
        out
    }

    fn check(&self, v: &[f64]) {
        assert_eq!(v.len(), self.mesh.n_vertices(), "field length does not match the mesh");
    }

    pub fn energy(&self, spec: &NonlinearitySpec, eps: f64, v: &[f64]) -> EnergyBreakdown {
        self.check(v);
        let m = spec.m;
        let nc = self.volumes.len();
        let partial: Vec<[CompensatedSum; 3]> = (0..nc.div_ceil(CHUNK))
            .into_par_iter()
            .map(|chunk| {
                let mut acc = [CompensatedSum::default(); 3];
                for c in chunk * CHUNK..((chunk + 1) * CHUNK).min(nc) {
                    let g = self.cell_gradient(c, v);
                    let g2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
                    acc[0].add(self.volumes[c] * g2.powf(0.5 * m));
                    let cell = self.mesh.cell(c);
                    let (w, pts) = self.quadrature(c);
                    for &(a, b) in pts {
                        let x = 0.5 * (v[cell[a]] + v[cell[b]]);
                        acc[1].add(w * x.abs().powf(m));
                        acc[2].add(w * spec.eval_big_f(x));
                    }
                }
                acc
            })
            .collect();
        let mut tot = [CompensatedSum::default(); 3];
        for p in &partial {
            for k in 0..3 {
                tot[k].merge(&p[k]);
            }
        }
        EnergyBreakdown::from_sums(eps.powf(m) / m * tot[0].value(), tot[1].value() / m, tot[2].value())
    }

    /// Relative gap between `⟨∇J_ε(v), dir⟩` and the central difference of
    /// `J_ε` along `dir` with step `t`.
    pub fn directional_derivative_error(&self, spec: &NonlinearitySpec, eps: f64, v: &[f64], dir: &[f64], t: f64) -> f64 {
        let shift = |sign: f64| -> Vec<f64> { v.iter().zip(dir).map(|(a, b)| a + sign * t * b).collect() };
        let fd = (self.energy(spec, eps, &shift(1.0)).total - self.energy(spec, eps, &shift(-1.0)).total) / (2.0 * t);
        let g = self.gradient(spec, eps, v);
        let exact = crate::numerics::compensated_sum(g.iter().zip(dir).map(|(a, b)| a * b));
        ((fd - exact) / exact).abs()
    }

    /// Nodal vector `∂J_ε/∂v_i`.
    pub fn gradient(&self, spec: &NonlinearitySpec, eps: f64, v: &[f64]) -> Vec<f64> {
        self.energy_and_gradient(spec, eps, v).1
    }

    pub fn energy_and_gradient(&self, spec: &NonlinearitySpec, eps: f64, v: &[f64]) -> (EnergyBreakdown, Vec<f64>) {
        self.check(v);
        let m = spec.m;
        let d = self.mesh.dim;
        let k = d + 1;
        let nc = self.volumes.len();
        let em = eps.powf(m);
        let mut local = vec![0.0; nc * k];
        let partial: Vec<[CompensatedSum; 3]> = local
            .par_chunks_mut(CHUNK * k)
            .enumerate()
            .map(|(chunk, out)| {
                let mut acc = [CompensatedSum::default(); 3];
                for (lc, c) in (chunk * CHUNK..((chunk + 1) * CHUNK).min(nc)).enumerate() {
                    let cell = self.mesh.cell(c);
                    let vol = self.volumes[c];
                    let g = self.cell_gradient(c, v);
                    let g2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
                    acc[0].add(vol * g2.powf(0.5 * m));
                    let factor = if m == 2.0 {
                        1.0
                    } else {
                        (g2 + GRADIENT_ETA * GRADIENT_ETA).powf(0.5 * (m - 2.0))
                    };
                    let bg = &self.basis_grads[c * k * d..(c + 1) * k * d];
                    let o = &mut out[lc * k..(lc + 1) * k];
                    for a in 0..k {
                        let mut dot = 0.0;
                        for i in 0..d {
                            dot += g[i] * bg[a * d + i];
                        }
                        o[a] = em * factor * dot * vol;
                    }
                    let (w, pts) = self.quadrature(c);
                    for &(a, b) in pts {
                        let x = 0.5 * (v[cell[a]] + v[cell[b]]);
                        let ax = x.abs();
                        acc[1].add(w * ax.powf(m));
                        acc[2].add(w * spec.eval_big_f(x));
                        let dens = w * (ax.powf(m - 2.0) * x - spec.eval_f(x));
                        if a == b {
                            o[a] += dens;
                        } else {
                            o[a] += 0.5 * dens;
                            o[b] += 0.5 * dens;
                        }
                    }
                }
                acc
            })
            .collect();
        let mut tot = [CompensatedSum::default(); 3];
        for p in &partial {
            for j in 0..3 {
                tot[j].merge(&p[j]);
            }
        }
        let mesh = &self.mesh;
        let grad: Vec<f64> = (0..mesh.n_vertices())
            .into_par_iter()
            .map(|i| {
                let mut acc = CompensatedSum::default();
                for &c in mesh.vertex_cells(i) {
                    let a = mesh.cell(c).iter().position(|&x| x == i).unwrap();
                    acc.add(local[c * k + a]);
                }
                acc.value()
            })
            .collect();
        let e = EnergyBreakdown::from_sums(em / m * tot[0].value(), tot[1].value() / m, tot[2].value());
        (e, grad)
    }
}

fn invert(d: usize, a: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut inv = [[0.0; 3]; 3];
    if d == 2 {
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        inv[0][0] = a[1][1] / det;
        inv[0][1] = -a[0][1] / det;
        inv[1][0] = -a[1][0] / det;
        inv[1][1] = a[0][0] / det;
    } else {
        let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
        for i in 0..3 {
            for j in 0..3 {
                // Cofactor transpose.
                let (r1, r2) = ((j + 1) % 3, (j + 2) % 3);
                let (c1, c2) = ((i + 1) % 3, (i + 2) % 3);
                inv[i][j] = (a[r1][c1] * a[r2][c2] - a[r1][c2] * a[r2][c1]) / det;
            }
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_mesh, DomainSpec};

    fn space(domain: DomainSpec, h: f64) -> FemSpace {
        FemSpace::new(Arc::new(generate_mesh(&domain, h).unwrap()))
    }

    #[test]
    fn linear_field_has_exact_gradient() {
        for (d, h) in [(DomainSpec::ellipse(2.0, 1.0).unwrap(), 0.2), (DomainSpec::ball(1.0, 3).unwrap(), 0.25)] {
            let s = space(d, h);
            let mesh = s.mesh().clone();
            let v: Vec<f64> = (0..mesh.n_vertices())
                .map(|i| {
                    let p = mesh.vertex(i);
                    2.0 * p[0] - 3.0 * p[1] + if mesh.dim == 3 { 0.5 * p[2] } else { 0.0 }
                })
                .collect();
            for c in (0..mesh.n_cells()).step_by(97) {
                let g = s.cell_gradient(c, &v);
                assert!((g[0] - 2.0).abs() < 1e-10 && (g[1] + 3.0).abs() < 1e-10);
                if mesh.dim == 3 {
                    assert!((g[2] - 0.5).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn zero_and_constant_fields() {
        let spec = NonlinearitySpec::pure_power(3.0, 2.0, 2).unwrap();
        let s = space(DomainSpec::ball(1.0, 2).unwrap(), 0.2);
        let n = s.mesh().n_vertices();
        let (e, g) = s.energy_and_gradient(&spec, 0.3, &vec![0.0; n]);
        assert_eq!((e.grad_term, e.mass_term, e.potential_term, e.total), (0.0, 0.0, 0.0, 0.0));
        assert!(g.iter().all(|&x| x == 0.0));
        let c = 0.7;
        let e = s.energy(&spec, 0.3, &vec![c; n]);
        assert!(e.grad_term.abs() < 1e-28);
        assert!((e.mass_term - s.volume() * c * c / 2.0).abs() < 1e-13);
        assert_eq!(e.total, e.grad_term + e.mass_term - e.potential_term);
    }

    #[test]
    fn lumped_mass_sums_to_volume() {
        let s = space(DomainSpec::ellipsoid(1.6, 1.0, 1.0).unwrap(), 0.2);
        let total: f64 = s.lumped_mass().iter().sum();
        assert!((total - s.volume()).abs() < 1e-12 * total);
    }
}
