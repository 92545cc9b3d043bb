//! Least-energy solutions by descent on the ray-maximized energy
//! `Ψ(u) = sup_{t≥0} J_ε(tu)` over nonnegative nonzero fields.
//!
//! Every iterate is kept on the Nehari manifold: a descent step is taken on
//! `v = t*(u)u`, negative nodal values are clipped and the result is rescaled
//! by its own `t*`.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::fem::{DiscreteField, EnergyBreakdown, FemSpace};
use crate::nonlinearity::NonlinearitySpec;
use crate::radial::RadialProfile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NehariError {
    #[error("field is identically zero")]
    ZeroField,
    #[error("no positive Nehari scaling: the field has no positive part")]
    NoRoot,
    #[error("iterate collapsed to zero")]
    CollapseToZero,
    #[error("mesh too coarse for ε: h = {h} > ε/3 = {limit}")]
    MeshTooCoarse { h: f64, limit: f64 },
    #[error("nonlinearity fails its hypotheses: {0}")]
    Hypotheses(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

/// Starting field for a solve.
#[derive(Debug, Clone)]
pub enum InitialGuess {
    /// Nodal interpolant of `w(|x − P|/(scale·ε))`. The centre is normally a
    /// boundary point; interior centres are allowed.
    BoundaryBump {
        point: Vec<f64>,
        scale: f64,
        profile: Arc<RadialProfile>,
    },
    FromField(Vec<f64>),
    /// Previous minimizer, contracted about its peak by `ε/ε_prev` and
    /// interpolated onto the new mesh.
    Continuation(Arc<SolveReport>),
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub eps: f64,
    pub max_iters: usize,
    /// Bound on the projected, mass-scaled gradient max-norm.
    pub grad_tol: f64,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Stored correction pairs of the quasi-Newton direction; 0 falls back
    /// to Barzilai-Borwein steepest descent.
    pub memory: usize,
    pub init: InitialGuess,
}

impl SolveConfig {
    pub fn new(eps: f64, init: InitialGuess) -> Self {
        Self {
            eps,
            max_iters: 5000,
            grad_tol: 1e-6,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 40,
            memory: 8,
            init,
        }
    }

    pub fn validate(&self) -> Result<(), NehariError> {
        let bad = |s: &str| Err(NehariError::InvalidConfig(s.into()));
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return bad("ε must lie in (0, 1]");
        }
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol must be positive");
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) || !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("line-search constants must lie in (0, 1)");
        }
        if let InitialGuess::BoundaryBump { scale, .. } = &self.init {
            if !(*scale > 0.0) {
                return bad("bump scale must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Peak {
    pub vertex: usize,
    pub position: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub eps: f64,
    #[serde(skip)]
    pub u: DiscreteField,
    pub c_eps: f64,
    pub energy: EnergyBreakdown,
    pub peak: Peak,
    /// `t*` of each accepted trial field before rescaling.
    pub t_history: Vec<f64>,
    /// Ray-maximized energy after each accepted iteration.
    pub energy_history: Vec<f64>,
    /// Projected, mass-scaled gradient max-norm at `u`.
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `t*(u)` recomputed on the returned field.
    pub t_star: f64,
    pub status: String,
}

fn ray_coefficients(spec: &NonlinearitySpec, e: &EnergyBreakdown) -> f64 {
    spec.m * (e.grad_term + e.mass_term)
}

/// `Σ w f(t·u_q) u_q` over the zero-order quadrature samples.
fn potential_flux(spec: &NonlinearitySpec, samples: &[(f64, f64)], t: f64) -> f64 {
    crate::numerics::compensated_sum(samples.iter().map(|&(w, x)| {
        let x = x.max(0.0);
        w * spec.eval_f(t * x) * x
    }))
}

fn scale_from_energy(space: &FemSpace, spec: &NonlinearitySpec, e: &EnergyBreakdown, u: &[f64]) -> Result<f64, NehariError> {
    let a = ray_coefficients(spec, e);
    if let Some(p) = spec.exponent() {
        let b = (p + 1.0) * e.potential_term;
        if !(b > 0.0) {
            return Err(NehariError::NoRoot);
        }
        return Ok((a / b).powf(1.0 / (p + 1.0 - spec.m)));
    }
    let samples = space.quadrature_samples(u);
    if !samples.iter().any(|&(_, x)| x > 0.0) {
        return Err(NehariError::NoRoot);
    }
    // φ(t) = Σ w f(t u) u / t^{m−1} increases, so h'(t) = t^{m−1}(A − φ(t))
    // has a single sign change.
    let phi = |t: f64| potential_flux(spec, &samples, t) / t.powf(spec.m - 1.0);
    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    let mut k = 0;
    while phi(hi) < a {
        hi *= 2.0;
        k += 1;
        if k > 200 {
            return Err(NehariError::NoRoot);
        }
    }
    k = 0;
    while phi(lo) > a {
        lo *= 0.5;
        k += 1;
        if k > 200 {
            return Err(NehariError::NoRoot);
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) < a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Unique maximizer `t*` of `t ↦ J_ε(tu)`.
pub fn nehari_scale(space: &FemSpace, spec: &NonlinearitySpec, eps: f64, u: &[f64]) -> Result<f64, NehariError> {
    if u.iter().all(|&x| x == 0.0) {
        return Err(NehariError::ZeroField);
    }
    let e = space.energy(spec, eps, u);
    scale_from_energy(space, spec, &e, u)
}

/// `J_ε(tu)` for the field whose breakdown at `t = 1` is `e`.
fn ray_energy(spec: &NonlinearitySpec, e: &EnergyBreakdown, samples: Option<&[(f64, f64)]>, t: f64) -> f64 {
    let quad = t.powf(spec.m) * (e.grad_term + e.mass_term);
    let pot = match (spec.exponent(), samples) {
        (Some(p), _) => t.powf(p + 1.0) * e.potential_term,
        (None, Some(s)) => crate::numerics::compensated_sum(s.iter().map(|&(w, x)| w * spec.eval_big_f(t * x))),
        (None, None) => unreachable!("custom nonlinearities need samples"),
    };
    quad - pot
}

/// Projected gradient scaled by the lumped mass: a nodal strong residual.
fn projected_residual(g: &[f64], v: &[f64], lumped: &[f64]) -> f64 {
    g.iter()
        .zip(v)
        .zip(lumped)
        .map(|((&gi, &vi), &mi)| if vi > 0.0 { gi.abs() } else { gi.min(0.0).abs() } / mi)
        .fold(0.0, f64::max)
}

fn initial_field(space: &FemSpace, config: &SolveConfig) -> Result<Vec<f64>, NehariError> {
    let mesh = space.mesh();
    let n = mesh.n_vertices();
    let d = mesh.dim;
    let dist = |x: &[f64], c: &[f64]| x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let mut u: Vec<f64> = match &config.init {
        InitialGuess::BoundaryBump { point, scale, profile } => {
            if point.len() != d {
                return Err(NehariError::InvalidConfig(format!("bump centre has {} coordinates", point.len())));
            }
            (0..n)
                .map(|i| profile.value_at(dist(mesh.vertex(i), point) / (scale * config.eps)))
                .collect()
        }
        InitialGuess::FromField(values) => {
            if values.len() != n {
                return Err(NehariError::InvalidConfig(format!("{} values for {n} vertices", values.len())));
            }
            values.clone()
        }
        InitialGuess::Continuation(prev) => {
            let ratio = config.eps / prev.eps;
            let c = &prev.peak.position;
            let old = &prev.u;
            (0..n)
                .map(|i| {
                    let x = mesh.vertex(i);
                    let y: Vec<f64> = (0..d).map(|k| c[k] + (x[k] - c[k]) / ratio).collect();
                    old.mesh.interpolate(&old.values, &y)
                })
                .collect()
        }
    };
    for x in &mut u {
        if !x.is_finite() {
            return Err(NehariError::InvalidConfig("non-finite initial value".into()));
        }
        *x = x.max(0.0);
    }
    if u.iter().all(|&x| x == 0.0) {
        return Err(NehariError::CollapseToZero);
    }
    Ok(u)
}

fn peak_of(space: &FemSpace, u: &[f64]) -> Peak {
    let mut best = 0;
    for (i, &x) in u.iter().enumerate() {
        if x > u[best] {
            best = i;
        }
    }
    Peak {
        vertex: best,
        position: space.mesh().vertex(best).to_vec(),
        value: u[best],
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    crate::numerics::compensated_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

/// Two-loop recursion in the lumped-mass inner product, where the Riesz
/// representative of a nodal covector `y` is `M⁻¹y`. Bound-active nodes are
/// frozen.
fn lbfgs_direction(
    steepest: &[f64],
    pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    lumped: &[f64],
    inv_mass: &[f64],
    free: &[bool],
) -> Vec<f64> {
    let mut q: Vec<f64> = steepest.iter().map(|x| -x).collect();
    let mut coef = Vec::with_capacity(pairs.len());
    for (s, y, sy) in pairs.iter().rev() {
        let a = dot_weighted(s, &q, lumped) / sy;
        for ((qi, yi), im) in q.iter_mut().zip(y).zip(inv_mass) {
            *qi -= a * yi * im;
        }
        coef.push(a);
    }
    let (_, y, sy) = pairs.back().unwrap();
    let gamma = sy / dot_weighted(y, y, inv_mass);
    for qi in &mut q {
        *qi *= gamma;
    }
    for ((s, y, sy), a) in pairs.iter().zip(coef.iter().rev()) {
        let b = dot(y, &q) / sy;
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().zip(free).map(|(x, &f)| if f { -x } else { 0.0 }).collect()
}

fn dot_weighted(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    crate::numerics::compensated_sum(a.iter().zip(b).zip(w).map(|((x, y), z)| x * y * z))
}

fn on_manifold(space: &FemSpace, spec: &NonlinearitySpec, eps: f64, w: Vec<f64>) -> Result<(Vec<f64>, f64), NehariError> {
    if w.iter().all(|&x| x == 0.0) {
        return Err(NehariError::CollapseToZero);
    }
    let e = space.energy(spec, eps, &w);
    let t = scale_from_energy(space, spec, &e, &w).map_err(|_| NehariError::CollapseToZero)?;
    Ok((w.into_iter().map(|x| t * x).collect(), t))
}

/// Projected descent on `Ψ(u) = J_ε(t*(u)u)` with a backtracking Armijo test.
/// Directions are limited-memory quasi-Newton in the lumped-mass metric,
/// falling back to preconditioned steepest descent with Barzilai-Borwein
/// steps whenever the memory is empty or the direction fails to descend.
pub fn least_energy_solve(
    space: &FemSpace,
    spec: &NonlinearitySpec,
    config: &SolveConfig,
) -> Result<SolveReport, NehariError> {
    config.validate()?;
    let eps = config.eps;
    let mesh = space.mesh().clone();
    let limit = eps / 3.0;
    if mesh.h > limit * (1.0 + 1e-12) {
        return Err(NehariError::MeshTooCoarse { h: mesh.h, limit });
    }
    let hyp = spec
        .check_hypotheses()
        .map_err(|e| NehariError::Hypotheses(e.to_string()))?;
    if !hyp.all_pass() && !hyp.extrapolation {
        return Err(NehariError::Hypotheses(format!("{:?}", hyp.failures())));
    }

    let lumped = space.lumped_mass().to_vec();
    let inv_mass: Vec<f64> = lumped.iter().map(|m| 1.0 / m).collect();
    let (mut v, t0) = on_manifold(space, spec, eps, initial_field(space, config)?)?;
    let mut t_history = vec![t0];
    let (mut e, mut g) = space.energy_and_gradient(spec, eps, &v);
    let mut energy_history = vec![e.total];
    let mut residual = projected_residual(&g, &v, &lumped);

    // Secant estimate of the local Lipschitz constant from a short probe step.
    let step_probe = |v: &[f64], g: &[f64]| -> f64 {
        let dmax = g.iter().zip(&inv_mass).map(|(a, b)| (a * b).abs()).fold(0.0, f64::max);
        let vmax = v.iter().cloned().fold(0.0, f64::max);
        let a = 1e-3 * vmax / dmax;
        let vp: Vec<f64> = v.iter().zip(g).zip(&inv_mass).map(|((x, gi), im)| (x - a * gi * im).max(0.0)).collect();
        let gp = space.gradient(spec, eps, &vp);
        let dv: Vec<f64> = vp.iter().zip(v).map(|(a, b)| a - b).collect();
        let dg: Vec<f64> = gp.iter().zip(g).map(|(a, b)| a - b).collect();
        let num = dot_weighted(&dg, &dg, &inv_mass).sqrt();
        let den = dot_weighted(&dv, &dv, &lumped).sqrt();
        if num > 0.0 && den > 0.0 {
            den / num
        } else {
            a
        }
    };

    let mut alpha = step_probe(&v, &g);
    let mut iterations = 0;
    let mut status = "max_iters".to_string();
    let mut converged = residual < config.grad_tol;
    if converged {
        status = "converged".into();
    }
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    while !converged && iterations < config.max_iters {
        let psi = e.total;
        let free: Vec<bool> = v.iter().zip(&g).map(|(&x, &gi)| x > 0.0 || gi < 0.0).collect();
        let steepest: Vec<f64> = g
            .iter()
            .zip(&inv_mass)
            .zip(&free)
            .map(|((gi, im), &f)| if f { -gi * im } else { 0.0 })
            .collect();
        let (mut d, mut a) = if pairs.is_empty() {
            (steepest.clone(), alpha)
        } else {
            (lbfgs_direction(&steepest, &pairs, &lumped, &inv_mass, &free), 1.0)
        };
        if dot(&g, &d) >= 0.0 {
            pairs.clear();
            d = steepest;
            a = alpha;
        }
        let mut accepted = None;
        for _ in 0..=config.max_backtracks {
            let w: Vec<f64> = v.iter().zip(&d).map(|(x, di)| (x + a * di).max(0.0)).collect();
            if w.iter().all(|&x| x == 0.0) {
                a *= config.backtrack;
                continue;
            }
            let slope = crate::numerics::compensated_sum(w.iter().zip(&v).zip(&g).map(|((wi, vi), gi)| gi * (wi - vi)));
            let ew = space.energy(spec, eps, &w);
            let t = match scale_from_energy(space, spec, &ew, &w) {
                Ok(t) => t,
                Err(_) => {
                    a *= config.backtrack;
                    continue;
                }
            };
            let samples = spec.exponent().is_none().then(|| space.quadrature_samples(&w));
            let psi_w = ray_energy(spec, &ew, samples.as_deref(), t);
            if psi_w <= psi + config.armijo * slope && slope < 0.0 {
                accepted = Some((w, t, a));
                break;
            }
            a *= config.backtrack;
        }
        let Some((w, t, a_used)) = accepted else {
            status = "line search stalled".into();
            break;
        };
        let v_new: Vec<f64> = w.iter().map(|x| t * x).collect();
        let (e_new, g_new) = space.energy_and_gradient(spec, eps, &v_new);
        iterations += 1;
        t_history.push(t);

        let s: Vec<f64> = v_new.iter().zip(&v).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        // Alternating Barzilai-Borwein steps in the lumped-mass metric for
        // steepest-descent iterations.
        alpha = if sy > 0.0 {
            if iterations % 2 == 1 {
                dot_weighted(&s, &s, &lumped) / sy
            } else {
                sy / dot_weighted(&y, &y, &inv_mass)
            }
        } else {
            2.0 * a_used
        };
        if config.memory > 0 && sy > 0.0 {
            if pairs.len() == config.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, sy));
        }

        v = v_new;
        g = g_new;
        e = e_new;
        energy_history.push(e.total);
        residual = projected_residual(&g, &v, &lumped);
        if residual < config.grad_tol {
            converged = true;
            status = "converged".into();
        }
    }

    if v.iter().all(|&x| x == 0.0) {
        return Err(NehariError::CollapseToZero);
    }
    let t_star = scale_from_energy(space, spec, &e, &v).map_err(|_| NehariError::CollapseToZero)?;
    let peak = peak_of(space, &v);
    Ok(SolveReport {
        eps,
        u: DiscreteField { mesh, values: v },
        c_eps: e.total,
        energy: e,
        peak,
        t_history,
        energy_history,
        residual,
        converged,
        iterations,
        t_star,
        status,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MountainPassCheck {
    pub c_from_sup: f64,
    pub c_from_energy: f64,
    /// `|c_from_sup − c_from_energy| / |c_from_energy|`.
    pub gap: f64,
    pub t_at_max: f64,
    pub grid_spacing: f64,
    /// `|∫(ε^m|∇u|^m + u^m) − ∫f(u)u| / ∫f(u)u`.
    pub nehari_residual: f64,
}

const RAY_GRID: usize = 3000;
const RAY_T_MAX: f64 = 3.0;

/// Compares `sup_t J_ε(tu)` on a fine grid over `[0, 3]` with `J_ε(u)`.
pub fn mountain_pass_value_check(space: &FemSpace, spec: &NonlinearitySpec, eps: f64, u: &[f64]) -> MountainPassCheck {
    let e = space.energy(spec, eps, u);
    let samples = space.quadrature_samples(u);
    let custom = spec.exponent().is_none().then_some(samples.as_slice());
    let j = |t: f64| ray_energy(spec, &e, custom, t);
    let dt = RAY_T_MAX / RAY_GRID as f64;
    let (mut k_best, mut j_best) = (0, f64::NEG_INFINITY);
    for k in 0..=RAY_GRID {
        let val = j(k as f64 * dt);
        if val > j_best {
            (k_best, j_best) = (k, val);
        }
    }
    // Golden-section refinement inside the bracketing grid cells.
    let (mut lo, mut hi) = ((k_best.max(1) - 1) as f64 * dt, ((k_best + 1).min(RAY_GRID)) as f64 * dt);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (hi - r * (hi - lo), lo + r * (hi - lo));
    let (mut f1, mut f2) = (j(x1), j(x2));
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            (x1, f1) = (x2, f2);
            x2 = lo + r * (hi - lo);
            f2 = j(x2);
        } else {
            hi = x2;
            (x2, f2) = (x1, f1);
            x1 = hi - r * (hi - lo);
            f1 = j(x1);
        }
    }
    let (t_ref, j_ref) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
    let (t_at_max, c_from_sup) = if j_ref > j_best { (t_ref, j_ref) } else { (k_best as f64 * dt, j_best) };
    let flux = potential_flux(spec, &samples, 1.0);
    let a = ray_coefficients(spec, &e);
    MountainPassCheck {
        c_from_sup,
        c_from_energy: e.total,
        gap: (c_from_sup - e.total).abs() / e.total.abs(),
        t_at_max,
        grid_spacing: dt,
        nehari_residual: (a - flux).abs() / flux,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_mesh, DomainSpec};

    fn space() -> FemSpace {
        FemSpace::new(Arc::new(generate_mesh(&DomainSpec::ball(1.0, 2).unwrap(), 0.1).unwrap()))
    }

    #[test]
    fn unit_scale_when_balanced() {
        let sp = space();
        let spec = NonlinearitySpec::pure_power(3.0, 2.0, 2).unwrap();
        let u: Vec<f64> = (0..sp.mesh().n_vertices()).map(|i| 1.0 + 0.5 * sp.mesh().vertex(i)[0]).collect();
        let t = nehari_scale(&sp, &spec, 0.3, &u).unwrap();
        let v: Vec<f64> = u.iter().map(|x| t * x).collect();
        assert!((nehari_scale(&sp, &spec, 0.3, &v).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn scale_errors() {
        let sp = space();
        let spec = NonlinearitySpec::pure_power(3.0, 2.0, 2).unwrap();
        let n = sp.mesh().n_vertices();
        assert_eq!(nehari_scale(&sp, &spec, 0.3, &vec![0.0; n]), Err(NehariError::ZeroField));
        assert_eq!(nehari_scale(&sp, &spec, 0.3, &vec![-1.0; n]), Err(NehariError::NoRoot));
    }

    #[test]
    fn mesh_too_coarse_rejected() {
        let sp = space();
        let spec = NonlinearitySpec::pure_power(3.0, 2.0, 2).unwrap();
        let n = sp.mesh().n_vertices();
        let cfg = SolveConfig::new(0.2, InitialGuess::FromField(vec![1.0; n]));
        assert!(matches!(least_energy_solve(&sp, &spec, &cfg), Err(NehariError::MeshTooCoarse { .. })));
    }
}
