//! Radial ground state `w` of `Δ_m w − w^{m−1} + f(w) = 0` on `R^N`, found by
//! shooting on `w(0)`, and the constants derived from it.
//!
//! Bisection on the shooting height only resolves the profile up to the
//! radius where the bracketing trajectories separate (the decaying branch is
//! unstable when integrated outward). Beyond that radius the profile is
//! continued by integrating the same ODE inward from `r_max`, seeded with
//! the asymptotic tail and amplitude-matched to the shot. Inward, the
//! decaying branch is the dominant one, so the continuation is stable.

mod constants;
mod shoot;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nonlinearity::NonlinearitySpec;

pub use constants::{
    decay_diagnostics, gamma_crosscheck, ground_state_constants, moment_identity_check, radial_moments,
    AngularConstant, DecayDiagnostics, GammaCrosscheck, GroundStateConstants, MomentIdentity, RadialMoments,
};
pub use shoot::{shoot, ShotKind, ShotOutcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadialError {
    #[error("shooting height must be positive and finite, got {0}")]
    InvalidHeight(f64),
    #[error("invalid radial grid: h_r = {h_r}, r_max = {r_max}")]
    InvalidGrid { h_r: f64, r_max: f64 },
    #[error("integration produced a non-finite state at r = {radius}")]
    IntegrationError { radius: f64 },
    #[error("no crossing trajectory found for shooting heights up to {max_height}")]
    BracketNotFound { max_height: f64 },
    #[error("nonlinearity has no positive constant level u_c")]
    NoCriticalLevel,
    #[error("profile is too short for the decay fit (r_max = {r_max}, need >= {required})")]
    ProfileTooShort { r_max: f64, required: f64 },
    #[error("profile underflows inside the fit window at r = {radius}")]
    WindowTooNoisy { radius: f64 },
    #[error("tail continuation failed to match the shot at r = {radius}")]
    SpliceFailed { radius: f64 },
    #[error("hessian must be a symmetric {expected}x{expected} matrix")]
    HessianShape { expected: usize },
}

/// Decay rate `μ = (1/(m−1))^{1/m}` of the ground-state tail.
pub fn decay_rate(m: f64) -> f64 {
    (1.0 / (m - 1.0)).powf(1.0 / m)
}

/// Algebraic tail exponent `(N−1)/(m(m−1))`.
pub fn algebraic_exponent(m: f64, dim: usize) -> f64 {
    (dim as f64 - 1.0) / (m * (m - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialSettings {
    pub h_r: f64,
    pub r_max: f64,
    /// Relative bracket width at which bisection on `w(0)` stops.
    pub bisect_tol: f64,
    /// `Decay` threshold relative to the shooting height.
    pub tail_tol_rel: f64,
}

impl Default for RadialSettings {
    fn default() -> Self {
        Self {
            h_r: 1e-3,
            r_max: 30.0,
            bisect_tol: 1e-12,
            tail_tol_rel: 1e-8,
        }
    }
}

/// Sampled ground state on `r_i = i·h_r`, `0 ≤ r_i ≤ r_max`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialProfile {
    pub m: f64,
    pub dim: usize,
    pub h_r: f64,
    pub shoot_height: f64,
    pub r: Vec<f64>,
    pub w: Vec<f64>,
    pub dw: Vec<f64>,
    /// Flux `|w'|^{m−2} w'`.
    pub s: Vec<f64>,
    /// Radius up to which the bracketing shots agree to `1e-6` relative.
    pub reliable_radius: f64,
    /// Radius where the inward continuation takes over.
    pub splice_radius: f64,
    /// Relative flux mismatch between shot and continuation at the splice.
    pub splice_mismatch: f64,
    /// Number of bisection steps performed.
    pub bisections: usize,
}

impl RadialProfile {
    pub fn r_max(&self) -> f64 {
        *self.r.last().unwrap()
    }

    pub fn mu(&self) -> f64 {
        decay_rate(self.m)
    }

    pub fn alpha(&self) -> f64 {
        algebraic_exponent(self.m, self.dim)
    }

    /// `w(R) R^α e^{μR}` at the end of the grid.
    pub fn tail_amplitude(&self) -> f64 {
        let big_r = self.r_max();
        *self.w.last().unwrap() * big_r.powf(self.alpha()) * (self.mu() * big_r).exp()
    }

    /// `w(ρ)` by cubic Hermite interpolation on the grid, asymptotic tail
    /// beyond `r_max`.
    pub fn value_at(&self, rho: f64) -> f64 {
        let rho = rho.abs();
        let big_r = self.r_max();
        if rho >= big_r {
            return self.tail_amplitude() * rho.powf(-self.alpha()) * (-self.mu() * rho).exp();
        }
        let h = self.h_r;
        let i = ((rho / h) as usize).min(self.r.len() - 2);
        let t = (rho - self.r[i]) / h;
        let (y0, y1) = (self.w[i], self.w[i + 1]);
        let (d0, d1) = (self.dw[i] * h, self.dw[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * d1
    }

    /// Weak-form residual of `(r^{N−1}s)' = r^{N−1}(w^{m−1} − f(w))` per
    /// interior node: the flux balance over `[r_{i−1}, r_{i+1}]` against the
    /// Simpson integral of the source, divided by the cell-pair length `2h`.
    pub fn ode_residual(&self, spec: &NonlinearitySpec) -> Vec<f64> {
        let n1 = self.dim as i32 - 1;
        let g = |i: usize| {
            let w = self.w[i];
            let mass = w.abs().powf(self.m - 2.0) * w;
            self.r[i].powi(n1) * (mass - spec.eval_f(w))
        };
        let flux = |i: usize| self.r[i].powi(n1) * self.s[i];
        (1..self.r.len() - 1)
            .map(|i| {
                let lhs = flux(i + 1) - flux(i - 1);
                let rhs = self.h_r / 3.0 * (g(i - 1) + 4.0 * g(i) + g(i + 1));
                (lhs - rhs).abs() / (2.0 * self.h_r)
            })
            .collect()
    }
}

/// Finds the ground state by bisection on `d = w(0)` between a `Rebound`
/// and a `Crossing` shot, then continues the tail inward from `r_max`.
pub fn find_ground_state(spec: &NonlinearitySpec, settings: &RadialSettings) -> Result<RadialProfile, RadialError> {
    let u_c = spec.critical_level().ok_or(RadialError::NoCriticalLevel)?;
    let RadialSettings {
        h_r,
        r_max,
        bisect_tol,
        tail_tol_rel,
    } = *settings;
    let fire = |d: f64| shoot(spec, d, h_r, r_max, tail_tol_rel * d);

    let max_height = 1e6 * u_c;
    let mut d_lo = u_c;
    let mut lo = fire(d_lo)?;
    let mut d_hi = u_c;
    let mut hi = loop {
        d_hi *= 2.0;
        if d_hi > max_height {
            return Err(RadialError::BracketNotFound { max_height });
        }
        let shot = fire(d_hi)?;
        match shot.kind {
            ShotKind::Crossing { .. } => break shot,
            ShotKind::Decay => return Ok(finish_decay(spec, shot)),
            ShotKind::Rebound { .. } => {
                d_lo = d_hi;
                lo = shot;
            }
        }
    };

    let mut bisections = 0;
    while d_hi - d_lo > bisect_tol * d_hi {
        let mid = 0.5 * (d_lo + d_hi);
        if mid <= d_lo || mid >= d_hi {
            break;
        }
        let shot = fire(mid)?;
        bisections += 1;
        match shot.kind {
            ShotKind::Crossing { .. } => {
                d_hi = mid;
                hi = shot;
            }
            ShotKind::Rebound { .. } => {
                d_lo = mid;
                lo = shot;
            }
            ShotKind::Decay => {
                let mut p = finish_decay(spec, shot);
                p.bisections = bisections;
                return Ok(p);
            }
        }
    }

    let mu = decay_rate(spec.m);
    let common = lo.w.len().min(hi.w.len());
    let split = (1..common)
        .find(|&i| {
            let (a, b) = (lo.w[i], hi.w[i]);
            (a - b).abs() > 1e-6 * a.min(b)
        })
        .unwrap_or(common - 1);
    let reliable_radius = split as f64 * h_r;
    let splice_radius = (reliable_radius - 3.5 / mu).max(0.5 * reliable_radius);
    let splice = (splice_radius / h_r).round() as usize;

    let steps = (r_max / h_r).round() as usize;
    let target = lo.w[splice];
    // The tail ODE is (m−1)-homogeneous up to f(w), so the amplitude map is
    // nearly linear and a few rescalings converge.
    let mut amplitude = 1.0;
    let mut tail = shoot::integrate_inward(spec, h_r, steps, splice, amplitude)?;
    for _ in 0..30 {
        let ratio = target / tail.0[0];
        if !ratio.is_finite() || ratio <= 0.0 {
            return Err(RadialError::SpliceFailed { radius: splice_radius });
        }
        if (ratio - 1.0).abs() < 1e-14 {
            break;
        }
        amplitude *= ratio;
        tail = shoot::integrate_inward(spec, h_r, steps, splice, amplitude)?;
    }
    if ((tail.0[0] - target) / target).abs() > 1e-10 {
        return Err(RadialError::SpliceFailed { radius: splice_radius });
    }
    let splice_mismatch = ((tail.1[0] - lo.s[splice]) / lo.s[splice]).abs();

    let mut w = lo.w[..splice].to_vec();
    let mut s = lo.s[..splice].to_vec();
    w.extend_from_slice(&tail.0);
    s.extend_from_slice(&tail.1);
    let r: Vec<f64> = (0..=steps).map(|i| i as f64 * h_r).collect();
    let dw = s.iter().map(|&x| shoot::inverse_flux(x, spec.m)).collect();

    Ok(RadialProfile {
        m: spec.m,
        dim: spec.dim,
        h_r,
        shoot_height: 0.5 * (d_lo + d_hi),
        r,
        w,
        dw,
        s,
        reliable_radius,
        splice_radius: splice as f64 * h_r,
        splice_mismatch,
        bisections,
    })
}

fn finish_decay(spec: &NonlinearitySpec, shot: ShotOutcome) -> RadialProfile {
    let dw = shot.dw(spec.m);
    let r_max = *shot.r.last().unwrap();
    RadialProfile {
        m: spec.m,
        dim: spec.dim,
        h_r: shot.h_r,
        shoot_height: shot.shoot_height,
        reliable_radius: r_max,
        splice_radius: r_max,
        splice_mismatch: 0.0,
        bisections: 0,
        r: shot.r,
        w: shot.w,
        dw,
        s: shot.s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic_3d() -> NonlinearitySpec {
        NonlinearitySpec::pure_power(3.0, 2.0, 3).unwrap()
    }

    #[test]
    fn low_height_rebounds_and_high_height_crosses() {
        let s = cubic_3d();
        let low = shoot(&s, 1.0, 1e-3, 30.0, 1e-8).unwrap();
        assert!(matches!(low.kind, ShotKind::Rebound { .. }));
        let high = shoot(&s, 100.0, 1e-3, 30.0, 1e-6).unwrap();
        assert!(matches!(high.kind, ShotKind::Crossing { .. }));
        for shot in [&low, &high] {
            assert_eq!(shot.s[0], 0.0);
            assert_eq!(shot.r[0], 0.0);
        }
    }

    #[test]
    fn decay_rates() {
        assert_eq!(decay_rate(2.0), 1.0);
        assert!((decay_rate(3.0) - 0.5f64.powf(1.0 / 3.0)).abs() < 1e-15);
        assert!((decay_rate(3.0) - 0.793_701).abs() < 1e-6);
    }

    #[test]
    fn invalid_height_rejected() {
        assert!(matches!(
            shoot(&cubic_3d(), 0.0, 1e-3, 30.0, 1e-8),
            Err(RadialError::InvalidHeight(_))
        ));
    }

    #[test]
    fn ground_state_is_monotone_and_positive() {
        let s = NonlinearitySpec::pure_power(2.0, 2.0, 3).unwrap();
        let p = find_ground_state(&s, &RadialSettings::default()).unwrap();
        assert_eq!(p.dw[0], 0.0);
        assert!(p.w.iter().all(|&w| w > 0.0));
        assert!(p.dw[1..].iter().all(|&d| d < 0.0));
        assert_eq!(p.w[0], p.w.iter().cloned().fold(f64::MIN, f64::max));
    }

    #[test]
    fn ode_residual_is_small() {
        let s = cubic_3d();
        let p = find_ground_state(&s, &RadialSettings::default()).unwrap();
        let res = p.ode_residual(&s);
        let worst = res.iter().cloned().fold(0.0, f64::max);
        assert!(worst < 1e-6, "worst residual {worst}");
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let s = cubic_3d();
        let p = find_ground_state(&s, &RadialSettings::default()).unwrap();
        for i in [0usize, 17, 1000, 5000] {
            assert!((p.value_at(p.r[i]) - p.w[i]).abs() < 1e-14);
        }
        let big = p.r_max();
        assert!((p.value_at(big) - p.w.last().unwrap()).abs() < 1e-20);
    }
}
