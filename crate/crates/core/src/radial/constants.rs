//! Constants extracted from a radial ground state: decay diagnostics, the
//! whole-space energy `c*`, the curvature coefficient `γ`, and the two
//! numerical checks that tie the alternative expressions of `γ` together.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{RadialError, RadialProfile};
use crate::nonlinearity::NonlinearitySpec;
use crate::numerics::{fit_line, simpson_uniform, unit_ball_volume, unit_sphere_area};

/// Fraction of `r_max` where the decay fit window starts and ends.
pub const FIT_WINDOW: (f64, f64) = (0.5, 0.8);
const MIN_FIT_RADIUS: f64 = 20.0;
const MC_CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayDiagnostics {
    /// Analytic rate `(1/(m−1))^{1/m}`.
    pub mu: f64,
    /// Rate fitted from `log(w r^α)` on the window.
    pub mu_fit: f64,
    /// Mean of `q(r) = w r^α e^{μr}` on the window.
    pub c0_fit: f64,
    /// Max relative deviation of `q` from `c0_fit` on the window.
    pub plateau_error: f64,
    /// `|slope + μ|` for the fitted slope of `log(w r^α)`.
    pub slope_error: f64,
    /// Slope of `log w` itself, without removing the algebraic prefactor.
    pub raw_log_slope: f64,
    pub window: (f64, f64),
}

pub fn decay_diagnostics(profile: &RadialProfile) -> Result<DecayDiagnostics, RadialError> {
    let r_max = profile.r_max();
    if r_max < MIN_FIT_RADIUS {
        return Err(RadialError::ProfileTooShort {
            r_max,
            required: MIN_FIT_RADIUS,
        });
    }
    let mu = profile.mu();
    let alpha = profile.alpha();
    let (a, b) = (FIT_WINDOW.0 * r_max, FIT_WINDOW.1 * r_max);
    let idx: Vec<usize> = (0..profile.r.len())
        .filter(|&i| profile.r[i] >= a && profile.r[i] <= b)
        .collect();
    for &i in &idx {
        if !(profile.w[i] > 1e-290) {
            return Err(RadialError::WindowTooNoisy { radius: profile.r[i] });
        }
    }
    let q: Vec<f64> = idx
        .iter()
        .map(|&i| {
            let r = profile.r[i];
            profile.w[i] * r.powf(alpha) * (mu * r).exp()
        })
        .collect();
    let c0_fit = q.iter().sum::<f64>() / q.len() as f64;
    let plateau_error = q.iter().map(|&v| ((v - c0_fit) / c0_fit).abs()).fold(0.0, f64::max);

    let rs: Vec<f64> = idx.iter().map(|&i| profile.r[i]).collect();
    let compensated: Vec<f64> = idx
        .iter()
        .map(|&i| profile.w[i].ln() + alpha * profile.r[i].ln())
        .collect();
    let raw: Vec<f64> = idx.iter().map(|&i| profile.w[i].ln()).collect();
    let slope = fit_line(&rs, &compensated).map_or(f64::NAN, |f| f.slope);
    let raw_log_slope = fit_line(&rs, &raw).map_or(f64::NAN, |f| f.slope);

    Ok(DecayDiagnostics {
        mu,
        mu_fit: -slope,
        c0_fit,
        plateau_error,
        slope_error: (slope + mu).abs(),
        raw_log_slope,
        window: (a, b),
    })
}

/// Radial moments `∫ g(r) r^{N−1} dr` (order 0) and `∫ g(r) r^N dr`
/// (order 1) of the three energy densities, tails included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialMoments {
    pub grad0: f64,
    pub mass0: f64,
    pub potential0: f64,
    pub grad1: f64,
    pub mass1: f64,
    pub potential1: f64,
    /// Largest relative contribution of the analytic tail beyond `r_max`.
    pub max_tail_fraction: f64,
}

impl RadialMoments {
    /// `∫ E(w, r) r^N dr` with `E = (|w'|^m + w^m)/m − F(w)`.
    pub fn energy_density_moment(&self, m: f64) -> f64 {
        (self.grad1 + self.mass1) / m - self.potential1
    }
}

pub fn radial_moments(profile: &RadialProfile, spec: &NonlinearitySpec) -> RadialMoments {
    let m = profile.m;
    let n = profile.dim as i32;
    let h = profile.h_r;
    let grad: Vec<f64> = profile.dw.iter().map(|d| d.abs().powf(m)).collect();
    let mass: Vec<f64> = profile.w.iter().map(|w| w.abs().powf(m)).collect();
    let pot: Vec<f64> = profile.w.iter().map(|&w| spec.eval_big_f(w)).collect();
    let weighted = |g: &[f64], k: i32| -> f64 {
        let v: Vec<f64> = g.iter().zip(&profile.r).map(|(g, r)| g * r.powi(k)).collect();
        simpson_uniform(&v, h)
    };

    // Leading-order tails with w ≈ C r^{-α} e^{-μr} and |w'| ≈ μ w.
    let big_r = profile.r_max();
    let mu = profile.mu();
    let w_end = *profile.w.last().unwrap();
    let tail = |density_end: f64, k: i32| density_end * big_r.powi(k) / (m * mu);
    let mass_end = w_end.powf(m);
    let grad_end = mu.powf(m) * mass_end;
    let pot_end = spec.eval_big_f(w_end);

    let mut frac: f64 = 0.0;
    let mut with_tail = |g: &[f64], end: f64, k: i32| {
        let body = weighted(g, k);
        let t = tail(end, k);
        if body.abs() > 0.0 {
            frac = frac.max((t / body).abs());
        }
        body + t
    };
    let grad0 = with_tail(&grad, grad_end, n - 1);
    let mass0 = with_tail(&mass, mass_end, n - 1);
    let potential0 = with_tail(&pot, pot_end, n - 1);
    let grad1 = with_tail(&grad, grad_end, n);
    let mass1 = with_tail(&mass, mass_end, n);
    let potential1 = with_tail(&pot, pot_end, n);
    RadialMoments {
        grad0,
        mass0,
        potential0,
        grad1,
        mass1,
        potential1,
        max_tail_fraction: frac,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateConstants {
    pub mu: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    pub c_star: f64,
    pub gamma: f64,
    /// Half-space level `C* = c*/2`.
    pub c_star_half: f64,
    pub warnings: Vec<String>,
}

/// `c* = |S^{N−1}| ∫ E r^{N−1} dr`; `γ = |B^{N−1}|/(N+1) ∫ |w'|^m r^N dr`,
/// the half-space weighted integral reduced to one radial quadrature.
/// `|B^{N−1}| = ∫_{S^{N−1}_+} z_N dσ` is the angular factor that
/// [`gamma_crosscheck`] confirms by Monte Carlo.
pub fn ground_state_constants(
    profile: &RadialProfile,
    spec: &NonlinearitySpec,
) -> Result<GroundStateConstants, RadialError> {
    let n = profile.dim;
    let m = profile.m;
    let mom = radial_moments(profile, spec);
    let decay = decay_diagnostics(profile)?;
    let c_star = unit_sphere_area(n) * ((mom.grad0 + mom.mass0) / m - mom.potential0);
    let gamma = AngularConstant::HalfSphereMoment.value(n) / (n as f64 + 1.0) * mom.grad1;
    let mut warnings = Vec::new();
    if mom.max_tail_fraction > 0.01 {
        warnings.push(format!(
            "quadrature tail beyond r_max contributes {:.3}% of a radial integral",
            100.0 * mom.max_tail_fraction
        ));
    }
    Ok(GroundStateConstants {
        mu: decay.mu,
        c0: decay.c0_fit,
        c_star,
        gamma,
        c_star_half: c_star / 2.0,
        warnings,
    })
}

/// Closed-form candidates for the angular constant in the radial reduction
/// of half-space integrals weighted by `z_N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngularConstant {
    /// `|B^{N−1}|`, the volume of the unit ball in `R^{N−1}`.
    HalfSphereMoment,
    /// `|B^{N−2}|`, the volume of the unit ball in `R^{N−2}`.
    BallVolumeNMinus2,
    /// `|S^{N−2}|`, the area of the unit sphere in `R^{N−1}`.
    SphereAreaNMinus2,
}

impl AngularConstant {
    pub const ALL: [AngularConstant; 3] = [
        AngularConstant::HalfSphereMoment,
        AngularConstant::BallVolumeNMinus2,
        AngularConstant::SphereAreaNMinus2,
    ];

    pub fn value(self, dim: usize) -> f64 {
        match self {
            AngularConstant::HalfSphereMoment => unit_ball_volume(dim - 1),
            AngularConstant::BallVolumeNMinus2 => unit_ball_volume(dim.saturating_sub(2)),
            AngularConstant::SphereAreaNMinus2 => unit_sphere_area(dim - 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaCrosscheck {
    /// `(1/(N+1)) ∫_{R^N_+} |w'|^m z_N dz`.
    pub gamma_direct: f64,
    /// `(1/2) ∫_{R^N_+} E(w) z_N dz`.
    pub gamma_radial: f64,
    pub relative_gap: f64,
    /// Monte Carlo estimate of `∫_{S^{N−1}_+} z_N dσ`.
    pub angular_estimate: f64,
    pub angular_std_error: f64,
    /// Standard error of `gamma_direct` inherited from the angular estimate.
    pub gamma_std_error: f64,
    /// Candidate closed form closest to the Monte Carlo estimate.
    pub matched_constant: AngularConstant,
    pub candidates: Vec<(AngularConstant, f64)>,
    pub sample_count: usize,
}

/// Evaluates both half-space expressions for `γ`, with the angular factor
/// estimated by Monte Carlo over directions. Samples are drawn in fixed
/// chunks, each from its own ChaCha stream, and reduced in chunk order, so
/// the result does not depend on the rayon pool size.
pub fn gamma_crosscheck(
    profile: &RadialProfile,
    spec: &NonlinearitySpec,
    sample_count: usize,
    seed: u64,
) -> GammaCrosscheck {
    let n = profile.dim;
    let m = profile.m;
    let mom = radial_moments(profile, spec);
    let (mean, var) = half_sphere_moment_mc(n, sample_count, seed);
    let area = unit_sphere_area(n);
    let angular_estimate = area * mean;
    let angular_std_error = area * (var / sample_count as f64).sqrt();

    let gamma_direct = angular_estimate * mom.grad1 / (n as f64 + 1.0);
    let gamma_radial = 0.5 * angular_estimate * mom.energy_density_moment(m);
    let candidates: Vec<(AngularConstant, f64)> = AngularConstant::ALL.iter().map(|&c| (c, c.value(n))).collect();
    let matched_constant = candidates
        .iter()
        .min_by(|a, b| {
            (a.1 - angular_estimate)
                .abs()
                .partial_cmp(&(b.1 - angular_estimate).abs())
                .unwrap()
        })
        .unwrap()
        .0;

    GammaCrosscheck {
        gamma_direct,
        gamma_radial,
        relative_gap: ((gamma_direct - gamma_radial) / gamma_direct).abs(),
        angular_estimate,
        angular_std_error,
        gamma_std_error: angular_std_error * mom.grad1 / (n as f64 + 1.0),
        matched_constant,
        candidates,
        sample_count,
    }
}

/// Mean and variance of `max(z_N, 0)` for `z` uniform on `S^{N−1}`.
fn half_sphere_moment_mc(dim: usize, samples: usize, seed: u64) -> (f64, f64) {
    let chunks = samples.div_ceil(MC_CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut z = vec![0.0f64; dim];
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                for zi in z.iter_mut() {
                    *zi = StandardNormal.sample(&mut rng);
                }
                let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                let x = (z[dim - 1] / norm).max(0.0);
                s1 += x;
                s2 += x * x;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = partial.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let nf = samples as f64;
    let mean = s1 / nf;
    (mean, (s2 / nf - mean * mean).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentIdentity {
    pub lhs: f64,
    pub rhs: f64,
    /// `|LHS − RHS|/|RHS|`, or `|LHS|` when the hessian is trace-free.
    pub residual: f64,
    pub gamma: f64,
}

/// `Σ G_ij ∫_{R^{N−1}} y_i y_j E(w, y') dy'` against `2 tr(G) γ`.
///
/// The second moments of the radial density on `R^{N−1}` are diagonal,
/// `∫ y_i² E = |S^{N−2}|/(N−1) ∫ E r^N dr`, so the left side is evaluated
/// from one radial quadrature; `γ` on the right comes from the `|w'|^m`
/// expression, which makes the check a genuine test of the identity.
pub fn moment_identity_check(
    profile: &RadialProfile,
    spec: &NonlinearitySpec,
    hessian: &[Vec<f64>],
) -> Result<MomentIdentity, RadialError> {
    let n = profile.dim;
    let k = n - 1;
    let symmetric = hessian.len() == k
        && hessian.iter().all(|row| row.len() == k)
        && (0..k).all(|i| (0..k).all(|j| (hessian[i][j] - hessian[j][i]).abs() <= 1e-12 * (1.0 + hessian[i][j].abs())));
    if k == 0 || !symmetric {
        return Err(RadialError::HessianShape { expected: k });
    }
    let mom = radial_moments(profile, spec);
    let second_moment = unit_sphere_area(k) / k as f64 * mom.energy_density_moment(profile.m);
    let trace: f64 = (0..k).map(|i| hessian[i][i]).sum();
    let lhs = trace * second_moment;
    let gamma = AngularConstant::HalfSphereMoment.value(n) / (n as f64 + 1.0) * mom.grad1;
    let rhs = 2.0 * trace * gamma;
    let residual = if trace.abs() > 1e-14 {
        ((lhs - rhs) / rhs).abs()
    } else {
        lhs.abs()
    };
    Ok(MomentIdentity {
        lhs,
        rhs,
        residual,
        gamma,
    })
}
