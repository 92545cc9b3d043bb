//! RK4 integration of the radial m-Laplacian ODE written for `(w, s)` with
//! the flux `s = |w'|^{m-2} w'`:
//!
//! ```text
//! w' = sign(s) |s|^{1/(m-1)}
//! s' = -(N-1)/r · s + |w|^{m-2} w - f(w)
//! ```

use serde::{Deserialize, Serialize};

use super::RadialError;
use crate::nonlinearity::NonlinearitySpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShotKind {
    /// `w` reaches zero while still decreasing.
    Crossing { radius: f64 },
    /// `w'` reaches zero while `w > 0`.
    Rebound { radius: f64 },
    /// Reached `r_max` with `0 < w < tail_tol`.
    Decay,
}

/// A trajectory sampled on the uniform grid `r_i = i·h_r` up to the
/// classification event.
#[derive(Debug, Clone)]
pub struct ShotOutcome {
    pub kind: ShotKind,
    pub shoot_height: f64,
    pub h_r: f64,
    pub r: Vec<f64>,
    pub w: Vec<f64>,
    pub s: Vec<f64>,
}

impl ShotOutcome {
    pub fn dw(&self, m: f64) -> Vec<f64> {
        self.s.iter().map(|&s| inverse_flux(s, m)).collect()
    }
}

#[inline]
pub(crate) fn inverse_flux(s: f64, m: f64) -> f64 {
    if m == 2.0 {
        s
    } else {
        s.signum() * s.abs().powf(1.0 / (m - 1.0))
    }
}

#[inline]
pub(crate) fn flux(dw: f64, m: f64) -> f64 {
    if m == 2.0 {
        dw
    } else {
        dw.signum() * dw.abs().powf(m - 1.0)
    }
}

pub(crate) struct RadialOde<'a> {
    pub spec: &'a NonlinearitySpec,
}

impl RadialOde<'_> {
    #[inline]
    fn source(&self, w: f64) -> f64 {
        let m = self.spec.m;
        let mass = if m == 2.0 { w } else { w.abs().powf(m - 2.0) * w };
        mass - self.spec.eval_f(w)
    }

    #[inline]
    fn rhs(&self, r: f64, w: f64, s: f64) -> (f64, f64) {
        let n = self.spec.dim as f64;
        (inverse_flux(s, self.spec.m), -(n - 1.0) / r * s + self.source(w))
    }

    /// One classical RK4 step of signed size `h`.
    #[inline]
    pub fn step(&self, r: f64, w: f64, s: f64, h: f64) -> (f64, f64) {
        let (k1w, k1s) = self.rhs(r, w, s);
        let (k2w, k2s) = self.rhs(r + 0.5 * h, w + 0.5 * h * k1w, s + 0.5 * h * k1s);
        let (k3w, k3s) = self.rhs(r + 0.5 * h, w + 0.5 * h * k2w, s + 0.5 * h * k2s);
        let (k4w, k4s) = self.rhs(r + h, w + h * k3w, s + h * k3s);
        (
            w + h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w),
            s + h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s),
        )
    }

    /// Two-term series start on `[0, r0]`. With `β = m/(m−1)`,
    /// `g₀ = d^{m−1} − f(d)` and `g₁ = g'(d)`:
    ///
    /// ```text
    /// w ≈ d + c r^β + c k r^{2β} / (2(m−1)),   c = sign(g₀) (m−1)/m (|g₀|/N)^{1/(m−1)}
    /// s ≈ g₀ r/N + g₁ c r^{β+1} / (N+β),       k = g₁ c N / (g₀ (N+β))
    /// ```
    pub fn series_start(&self, d: f64, r0: f64) -> (f64, f64) {
        let m = self.spec.m;
        let n = self.spec.dim as f64;
        let beta = m / (m - 1.0);
        let g0 = self.source(d);
        if g0 == 0.0 {
            return (d, 0.0);
        }
        let g1 = (m - 1.0) * d.powf(m - 2.0) - self.spec.eval_df(d);
        let c = g0.signum() * (m - 1.0) / m * (g0.abs() / n).powf(1.0 / (m - 1.0));
        let k = g1 * c * n / (g0 * (n + beta));
        let rb = r0.powf(beta);
        let s = g0 * r0 / n + g1 * c * rb * r0 / (n + beta);
        let w = d + c * rb + c * k * rb * rb / (2.0 * (m - 1.0));
        (w, s)
    }

    /// Advances one grid cell `[r, r + h]`, subdividing near the origin
    /// where the `(N−1)/r` coefficient is stiff relative to the step.
    #[inline]
    pub fn advance_cell(&self, index: usize, h: f64, w: f64, s: f64) -> (f64, f64) {
        let sub = if index < 64 { 64usize.div_ceil(index.max(1)) } else { 1 };
        let dh = h / sub as f64;
        let r0 = index as f64 * h;
        let (mut w, mut s) = (w, s);
        for j in 0..sub {
            (w, s) = self.step(r0 + j as f64 * dh, w, s, dh);
        }
        (w, s)
    }
}

/// Shoots from `w(0) = d`, `w'(0) = 0` and classifies the trajectory.
pub fn shoot(
    spec: &NonlinearitySpec,
    d: f64,
    h_r: f64,
    r_max: f64,
    tail_tol: f64,
) -> Result<ShotOutcome, RadialError> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(RadialError::InvalidHeight(d));
    }
    if !(h_r > 0.0 && r_max > h_r) {
        return Err(RadialError::InvalidGrid { h_r, r_max });
    }
    let ode = RadialOde { spec };
    let steps = (r_max / h_r).round() as usize;
    let mut r = Vec::with_capacity(steps + 1);
    let mut w = Vec::with_capacity(steps + 1);
    let mut s = Vec::with_capacity(steps + 1);
    r.push(0.0);
    w.push(d);
    s.push(0.0);

    let (mut wi, mut si) = ode.series_start(d, h_r);
    let mut ri = h_r;
    let mut i = 1usize;
    let kind = loop {
        if !(wi.is_finite() && si.is_finite()) {
            return Err(RadialError::IntegrationError { radius: ri });
        }
        if wi <= 0.0 {
            let (wp, rp) = (w[i - 1], r[i - 1]);
            let radius = rp + (ri - rp) * wp / (wp - wi);
            break ShotKind::Crossing { radius };
        }
        if si >= 0.0 {
            break ShotKind::Rebound { radius: ri };
        }
        r.push(ri);
        w.push(wi);
        s.push(si);
        if i == steps {
            break if wi < tail_tol {
                ShotKind::Decay
            } else {
                ShotKind::Rebound { radius: ri }
            };
        }
        let (wn, sn) = ode.advance_cell(i, h_r, wi, si);
        i += 1;
        ri = i as f64 * h_r;
        wi = wn;
        si = sn;
    };
    Ok(ShotOutcome {
        kind,
        shoot_height: d,
        h_r,
        r,
        w,
        s,
    })
}

/// Integrates inward from `r = to_index·h_r … from_index·h_r` starting at the
/// asymptotic tail `w = C r^{-α} e^{-μr}` with unit amplitude scaled by
/// `amplitude`. Returns `(w, s)` for grid indices `to_index..=from_index`.
pub(crate) fn integrate_inward(
    spec: &NonlinearitySpec,
    h_r: f64,
    from_index: usize,
    to_index: usize,
    amplitude: f64,
) -> Result<(Vec<f64>, Vec<f64>), RadialError> {
    let m = spec.m;
    let mu = super::decay_rate(m);
    let alpha = super::algebraic_exponent(m, spec.dim);
    let ode = RadialOde { spec };
    let len = from_index - to_index + 1;
    let mut w = vec![0.0; len];
    let mut s = vec![0.0; len];
    let big_r = from_index as f64 * h_r;
    let w_end = amplitude * big_r.powf(-alpha) * (-mu * big_r).exp();
    let dw_end = -w_end * (mu + alpha / big_r);
    w[len - 1] = w_end;
    s[len - 1] = flux(dw_end, m);
    for k in (0..len - 1).rev() {
        let r_here = (to_index + k + 1) as f64 * h_r;
        let (wn, sn) = ode.step(r_here, w[k + 1], s[k + 1], -h_r);
        if !(wn.is_finite() && sn.is_finite()) {
            return Err(RadialError::IntegrationError { radius: r_here - h_r });
        }
        w[k] = wn;
        s[k] = sn;
    }
    Ok((w, s))
}
