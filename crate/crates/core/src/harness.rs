//! ε-sweeps with restart panels and continuation, peak tracking, decay
//! bounds and the affine fit of the scaled energy `c_ε ε^{−N}` in `ε`.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::fem::FemSpace;
use crate::geometry::{
    boundary_distance, generate_mesh, max_mean_curvature, nearest_boundary_point, CurvatureMaximum, DomainSpec, Mesh,
};
use crate::nehari::{least_energy_solve, mountain_pass_value_check, InitialGuess, MountainPassCheck, SolveConfig, SolveReport};
use crate::nonlinearity::NonlinearitySpec;
use crate::numerics::fit_line;
use crate::radial::RadialProfile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("fit needs at least 3 converged cases, got {0}")]
    InsufficientCases(usize),
    #[error("decay window holds {samples} samples")]
    WindowEmpty { samples: usize },
    #[error("dimension mismatch: domain is {domain}D, nonlinearity is {spec}D")]
    DimensionMismatch { domain: usize, spec: usize },
}

/// Solver knobs shared by every case of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverDefaults {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub memory: usize,
}

impl Default for SolverDefaults {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            grad_tol: 1e-6,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 40,
            memory: 8,
        }
    }
}

impl SolverDefaults {
    pub fn config(&self, eps: f64, init: InitialGuess) -> SolveConfig {
        SolveConfig {
            eps,
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            armijo: self.armijo,
            backtrack: self.backtrack,
            max_backtracks: self.max_backtracks,
            memory: self.memory,
            init,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSettings {
    pub schedule: Vec<f64>,
    /// Mesh size as a fraction of ε.
    pub h_ratio: f64,
    /// Number of restart slots, at most 5: argmax H, two intermediate
    /// curvature levels, argmin H, interior centre.
    pub panel_size: usize,
    pub continuation: bool,
    pub decay_window: (f64, f64),
    pub solver: SolverDefaults,
}

impl SweepSettings {
    pub fn new(schedule: Vec<f64>) -> Self {
        Self {
            schedule,
            h_ratio: 1.0 / 3.0,
            panel_size: 5,
            continuation: true,
            decay_window: (2.0, 8.0),
            solver: SolverDefaults::default(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |s: String| Err(HarnessError::InvalidSchedule(s));
        if self.schedule.is_empty() {
            return bad("empty schedule".into());
        }
        for &e in &self.schedule {
            if !(e > 0.0 && e <= 1.0) {
                return bad(format!("ε = {e} outside (0, 1]"));
            }
        }
        if self.schedule.windows(2).any(|w| w[1] >= w[0]) {
            return bad("ε values must be strictly decreasing".into());
        }
        if !(self.h_ratio > 0.0 && self.h_ratio <= 1.0 / 3.0) {
            return bad(format!("h_ratio = {} must lie in (0, 1/3]", self.h_ratio));
        }
        if self.panel_size == 0 || self.panel_size > 5 {
            return bad(format!("panel size {} must lie in 1..=5", self.panel_size));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartSlot {
    pub label: String,
    pub center: Vec<f64>,
    /// Mean curvature at the centre; `None` for the interior slot.
    pub curvature: Option<f64>,
}

/// Boundary points at curvature levels `H_max`, 2/3, 1/3 of the way down and
/// `H_min`, followed by the centre of the domain.
pub fn restart_panel(domain: &DomainSpec, curvature: &CurvatureMaximum, size: usize) -> Vec<RestartSlot> {
    let grid = curvature_table(domain, 360);
    let pick = |target: f64| -> (Vec<f64>, f64) {
        let mut best = &grid[0];
        for row in &grid {
            if (row.1 - target).abs() < (best.1 - target).abs() {
                best = row;
            }
        }
        (domain.boundary_point(&best.0), best.1)
    };
    let mut slots = Vec::new();
    let (hmax, hmin) = (curvature.h_max, curvature.h_min);
    if curvature.degenerate || curvature.points.is_empty() {
        // Constant curvature: spread the boundary slots evenly in angle.
        for k in 0..4 {
            let mut param = vec![0.0; domain.dim() - 1];
            param[0] = if domain.dim() == 2 { k as f64 * PI / 2.0 } else { PI / 2.0 };
            if domain.dim() == 3 {
                param[1] = k as f64 * PI / 2.0;
            }
            slots.push(RestartSlot {
                label: format!("boundary_{k}"),
                center: domain.boundary_point(&param),
                curvature: Some(hmax),
            });
        }
    } else {
        slots.push(RestartSlot {
            label: "argmax_h".into(),
            center: curvature.points[0].clone(),
            curvature: Some(hmax),
        });
        for (label, frac) in [("upper_h", 2.0 / 3.0), ("lower_h", 1.0 / 3.0)] {
            let (p, h) = pick(hmin + frac * (hmax - hmin));
            slots.push(RestartSlot {
                label: label.into(),
                center: p,
                curvature: Some(h),
            });
        }
        let (p, h) = pick(hmin);
        slots.push(RestartSlot {
            label: "argmin_h".into(),
            center: p,
            curvature: Some(h),
        });
    }
    slots.push(RestartSlot {
        label: "interior".into(),
        center: vec![0.0; domain.dim()],
        curvature: None,
    });
    slots.truncate(size);
    slots
}

/// Boundary parameter against mean curvature: `n` angles in 2D, an
/// `n/2 × n` (polar × azimuth) grid in 3D.
pub fn curvature_table(domain: &DomainSpec, n: usize) -> Vec<(Vec<f64>, f64)> {
    if domain.dim() == 2 {
        (0..n)
            .map(|i| {
                let p = vec![TAU * i as f64 / n as f64];
                let h = domain.curvature_at_param(&p);
                (p, h)
            })
            .collect()
    } else {
        let nt = (n / 2).max(2);
        let mut out = Vec::with_capacity(nt * n);
        for i in 0..nt {
            let th = PI * (i as f64 + 0.5) / nt as f64;
            for j in 0..n {
                let p = vec![th, TAU * j as f64 / n as f64];
                let h = domain.curvature_at_param(&p);
                out.push((p, h));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelEntry {
    pub slot: String,
    pub converged: bool,
    pub c_eps: Option<f64>,
    pub iterations: usize,
    pub residual: Option<f64>,
    pub peak: Option<Vec<f64>>,
    pub t_star: Option<f64>,
    pub mountain_pass: Option<MountainPassCheck>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub c3_fit: f64,
    pub c4_fit: f64,
    pub grad_c3_fit: f64,
    pub grad_c4_fit: f64,
    pub window: (f64, f64),
    /// Largest excess of `log u` over the regression line before the
    /// intercept shift; `c3_fit` includes the shift.
    pub residual: f64,
    pub grad_residual: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepCase {
    pub index: usize,
    pub eps: f64,
    pub h: f64,
    pub vertices: usize,
    pub converged: bool,
    /// Winning panel slot.
    pub slot: Option<String>,
    pub report: Option<SolveReport>,
    pub panel: Vec<PanelEntry>,
    /// Refined peak location `P_ε`.
    pub peak: Option<Vec<f64>>,
    /// Nearest boundary point `P̃_ε`.
    pub boundary_point: Option<Vec<f64>>,
    /// `dist(P_ε, ∂Ω)/ε`.
    pub distance_ratio: Option<f64>,
    pub scaled_energy: Option<f64>,
    pub decay: Option<DecayFit>,
    pub decay_error: Option<String>,
    pub mountain_pass: Option<MountainPassCheck>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionFit {
    pub intercept: f64,
    pub slope: f64,
    /// Largest relative deviation of `c_ε ε^{−N}` from the fitted line.
    pub residual: f64,
    pub cases: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub dim: usize,
    pub cases: Vec<SweepCase>,
    pub expansion_fit: Option<ExpansionFit>,
    pub expansion_error: Option<String>,
    pub curvature_target: CurvatureMaximum,
    pub panel: Vec<RestartSlot>,
}

impl SweepReport {
    pub fn all_converged(&self) -> bool {
        self.cases.iter().all(|c| c.converged)
    }

    pub fn converged_cases(&self) -> impl Iterator<Item = &SweepCase> {
        self.cases.iter().filter(|c| c.converged)
    }
}

/// Runs every ε of the schedule with the restart panel. Each panel slot is a
/// continuation chain across the schedule; chains run in parallel.
pub fn epsilon_sweep(
    domain: &DomainSpec,
    spec: &NonlinearitySpec,
    profile: Arc<RadialProfile>,
    settings: &SweepSettings,
) -> Result<SweepReport, HarnessError> {
    settings.validate()?;
    if domain.dim() != spec.dim {
        return Err(HarnessError::DimensionMismatch {
            domain: domain.dim(),
            spec: spec.dim,
        });
    }
    let curvature = max_mean_curvature(domain);
    let slots = restart_panel(domain, &curvature, settings.panel_size);
    let spaces: Vec<Result<Arc<FemSpace>, String>> = settings
        .schedule
        .par_iter()
        .map(|&eps| {
            generate_mesh(domain, eps * settings.h_ratio)
                .map(|m| Arc::new(FemSpace::new(Arc::new(m))))
                .map_err(|e| e.to_string())
        })
        .collect();

    // chains[slot][case]
    let chains: Vec<Vec<Result<SolveReport, String>>> = slots
        .par_iter()
        .map(|slot| {
            let mut out: Vec<Result<SolveReport, String>> = Vec::new();
            let mut prev: Option<Arc<SolveReport>> = None;
            for (k, &eps) in settings.schedule.iter().enumerate() {
                let res = match &spaces[k] {
                    Err(e) => Err(e.clone()),
                    Ok(space) => {
                        let init = match (&prev, settings.continuation) {
                            (Some(p), true) => InitialGuess::Continuation(p.clone()),
                            _ => InitialGuess::BoundaryBump {
                                point: slot.center.clone(),
                                scale: 1.0,
                                profile: profile.clone(),
                            },
                        };
                        least_energy_solve(space, spec, &settings.solver.config(eps, init)).map_err(|e| e.to_string())
                    }
                };
                prev = match &res {
                    Ok(r) if r.converged => Some(Arc::new(r.clone())),
                    _ => None,
                };
                out.push(res);
            }
            out
        })
        .collect();

    let mut cases = Vec::with_capacity(settings.schedule.len());
    for (k, &eps) in settings.schedule.iter().enumerate() {
        let panel: Vec<PanelEntry> = slots
            .iter()
            .zip(&chains)
            .map(|(slot, chain)| match &chain[k] {
                Ok(r) => PanelEntry {
                    slot: slot.label.clone(),
                    converged: r.converged,
                    c_eps: Some(r.c_eps),
                    iterations: r.iterations,
                    residual: Some(r.residual),
                    peak: Some(r.peak.position.clone()),
                    t_star: Some(r.t_star),
                    mountain_pass: r
                        .converged
                        .then(|| mountain_pass_value_check(spaces[k].as_ref().unwrap(), spec, eps, &r.u.values)),
                    error: None,
                },
                Err(e) => PanelEntry {
                    slot: slot.label.clone(),
                    converged: false,
                    c_eps: None,
                    iterations: 0,
                    residual: None,
                    peak: None,
                    t_star: None,
                    mountain_pass: None,
                    error: Some(e.clone()),
                },
            })
            .collect();
        let mut case = SweepCase {
            index: k,
            eps,
            h: eps * settings.h_ratio,
            vertices: spaces[k].as_ref().map_or(0, |s| s.mesh().n_vertices()),
            converged: false,
            slot: None,
            report: None,
            panel,
            peak: None,
            boundary_point: None,
            distance_ratio: None,
            scaled_energy: None,
            decay: None,
            decay_error: None,
            mountain_pass: None,
            error: None,
        };
        let space = match &spaces[k] {
            Ok(s) => s.clone(),
            Err(e) => {
                case.error = Some(e.clone());
                cases.push(case);
                continue;
            }
        };
        // Lowest energy among converged slots, else among all returned.
        let pick = |need: bool| {
            let mut best: Option<usize> = None;
            for (i, chain) in chains.iter().enumerate() {
                if let Ok(r) = &chain[k] {
                    if (!need || r.converged) && best.is_none_or(|b| r.c_eps < chains[b][k].as_ref().unwrap().c_eps) {
                        best = Some(i);
                    }
                }
            }
            best
        };
        let Some(win) = pick(true).or_else(|| pick(false)) else {
            case.error = Some("no panel slot returned a field".into());
            cases.push(case);
            continue;
        };
        let report = chains[win][k].as_ref().unwrap().clone();
        case.converged = report.converged;
        case.slot = Some(slots[win].label.clone());
        let peak = refine_peak(domain, space.mesh(), &report.u.values, report.peak.vertex);
        let near = nearest_boundary_point(domain, &peak);
        let dist = if domain.contains(&peak) { near.distance } else { 0.0 };
        case.distance_ratio = Some(dist / eps);
        case.boundary_point = Some(near.point);
        case.scaled_energy = Some(report.c_eps * eps.powi(-(spec.dim as i32)));
        match fit_decay(&space, &report, &peak, settings.decay_window) {
            Ok(f) => case.decay = Some(f),
            Err(e) => case.decay_error = Some(e.to_string()),
        }
        case.mountain_pass = Some(mountain_pass_value_check(&space, spec, eps, &report.u.values));
        case.peak = Some(peak);
        case.report = Some(report);
        cases.push(case);
    }

    let fit_input: Vec<(f64, f64)> = cases
        .iter()
        .filter(|c| c.converged)
        .map(|c| (c.eps, c.report.as_ref().unwrap().c_eps))
        .collect();
    let (expansion_fit, expansion_error) = match fit_energy_expansion(&fit_input, spec.dim) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(SweepReport {
        dim: spec.dim,
        cases,
        expansion_fit,
        expansion_error,
        curvature_target: curvature,
        panel: slots,
    })
}

/// Affine least-squares fit of `c_ε ε^{−N}` against `ε` over `(ε, c_ε)`
/// pairs. Input order does not matter.
pub fn fit_energy_expansion(cases: &[(f64, f64)], dim: usize) -> Result<ExpansionFit, HarnessError> {
    if cases.len() < 3 {
        return Err(HarnessError::InsufficientCases(cases.len()));
    }
    let mut pts: Vec<(f64, f64)> = cases.iter().map(|&(e, c)| (e, c * e.powi(-(dim as i32)))).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().cloned().unzip();
    let fit = fit_line(&x, &y).ok_or(HarnessError::InsufficientCases(cases.len()))?;
    let residual = pts
        .iter()
        .map(|&(e, v)| ((v - fit.intercept - fit.slope * e) / v).abs())
        .fold(0.0, f64::max);
    Ok(ExpansionFit {
        intercept: fit.intercept,
        slope: fit.slope,
        residual,
        cases: cases.len(),
    })
}

/// Sub-mesh peak location: stationary point of a least-squares quadratic over
/// the vertex star (two rings when the star is too small). Falls back to the
/// vertex when the fit is not concave or leaves the star; points that leave
/// the domain are projected back onto the boundary.
pub fn refine_peak(domain: &DomainSpec, mesh: &Mesh, u: &[f64], vertex: usize) -> Vec<f64> {
    let d = mesh.dim;
    let n_coef = 1 + d + d * (d + 1) / 2;
    let x0 = mesh.vertex(vertex).to_vec();
    let mut nodes: Vec<usize> = std::iter::once(vertex).chain(mesh.neighbors(vertex).iter().copied()).collect();
    if nodes.len() < n_coef + 2 {
        let mut ring: Vec<usize> = nodes.iter().flat_map(|&i| mesh.neighbors(i).iter().copied()).collect();
        ring.extend(&nodes);
        ring.sort_unstable();
        ring.dedup();
        nodes = ring;
    }
    let scale = mesh.h;
    let mut a = DMatrix::<f64>::zeros(nodes.len(), n_coef);
    let mut b = DVector::<f64>::zeros(nodes.len());
    let mut reach: f64 = 0.0;
    for (row, &i) in nodes.iter().enumerate() {
        let z: Vec<f64> = mesh.vertex(i).iter().zip(&x0).map(|(p, q)| (p - q) / scale).collect();
        reach = reach.max(z.iter().map(|v| v * v).sum::<f64>().sqrt());
        let mut col = 0;
        a[(row, col)] = 1.0;
        col += 1;
        for zi in &z {
            a[(row, col)] = *zi;
            col += 1;
        }
        for p in 0..d {
            for q in p..d {
                a[(row, col)] = z[p] * z[q];
                col += 1;
            }
        }
        b[row] = u[i];
    }
    let fallback = x0.clone();
    let Ok(coef) = a.svd(true, true).solve(&b, 1e-12) else {
        return fallback;
    };
    // q(z) = c + gᵀz + ½ zᵀHz.
    let g = DVector::from_iterator(d, (0..d).map(|i| coef[1 + i]));
    let mut hess = DMatrix::<f64>::zeros(d, d);
    let mut col = 1 + d;
    for p in 0..d {
        for q in p..d {
            if p == q {
                hess[(p, p)] = 2.0 * coef[col];
            } else {
                hess[(p, q)] = coef[col];
                hess[(q, p)] = coef[col];
            }
            col += 1;
        }
    }
    if hess.symmetric_eigenvalues().iter().any(|&l| l >= 0.0) {
        return fallback;
    }
    let Some(z) = hess.lu().solve(&(-g)) else {
        return fallback;
    };
    if z.norm() > reach {
        return fallback;
    }
    let x: Vec<f64> = (0..d).map(|i| x0[i] + scale * z[i]).collect();
    if domain.contains(&x) {
        x
    } else {
        nearest_boundary_point(domain, &x).point
    }
}

fn domination_fit(rho: &[f64], logs: &[f64]) -> Option<(f64, f64, f64)> {
    let fit = fit_line(rho, logs)?;
    let excess = rho
        .iter()
        .zip(logs)
        .map(|(r, l)| l - fit.intercept - fit.slope * r)
        .fold(f64::NEG_INFINITY, f64::max);
    Some(((fit.intercept + excess.max(0.0)).exp(), -fit.slope, excess.max(0.0)))
}

const MIN_WINDOW_SAMPLES: usize = 8;

/// Domination fit of `u ≤ c3 exp(−c4 |x − P|/ε)` and the same for `ε|∇u|`
/// over vertices with `|x − P|/ε` inside `window`.
pub fn fit_decay(space: &FemSpace, report: &SolveReport, peak: &[f64], window: (f64, f64)) -> Result<DecayFit, HarnessError> {
    let mesh = space.mesh();
    let eps = report.eps;
    let u = &report.u.values;
    let grads = space.vertex_gradient_norms(u);
    let (mut rho, mut lu, mut rho_g, mut lg) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for i in 0..mesh.n_vertices() {
        let r = crate::geometry::dist(mesh.vertex(i), peak) / eps;
        if r < window.0 || r > window.1 {
            continue;
        }
        if u[i] > 1e-250 {
            rho.push(r);
            lu.push(u[i].ln());
        }
        let g = eps * grads[i];
        if g > 1e-250 {
            rho_g.push(r);
            lg.push(g.ln());
        }
    }
    let samples = rho.len().min(rho_g.len());
    let spread = |r: &[f64]| r.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - r.iter().cloned().fold(f64::INFINITY, f64::min);
    if samples < MIN_WINDOW_SAMPLES || spread(&rho) < 1.0 || spread(&rho_g) < 1.0 {
        return Err(HarnessError::WindowEmpty { samples });
    }
    let (c3, c4, res) = domination_fit(&rho, &lu).ok_or(HarnessError::WindowEmpty { samples })?;
    let (gc3, gc4, gres) = domination_fit(&rho_g, &lg).ok_or(HarnessError::WindowEmpty { samples })?;
    Ok(DecayFit {
        c3_fit: c3,
        c4_fit: c4,
        grad_c3_fit: gc3,
        grad_c4_fit: gc4,
        window,
        residual: res,
        grad_residual: gres,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Shrinking,
    Stagnant,
    Diverging,
}

/// Compares the means of the first and last thirds of a sequence; changes
/// within 10% count as stagnant. Values are clamped to at least `floor`, the
/// resolution below which differences carry no meaning.
pub fn trend(values: &[f64], floor: f64) -> Option<Trend> {
    if values.len() < 2 {
        return None;
    }
    let values: Vec<f64> = values.iter().map(|v| v.max(floor)).collect();
    let k = (values.len() / 3).max(1);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let (first, last) = (mean(&values[..k]), mean(&values[values.len() - k..]));
    let scale = first.abs().max(last.abs());
    Some(if scale == 0.0 || (last - first).abs() <= 0.1 * scale {
        Trend::Stagnant
    } else if last < first {
        Trend::Shrinking
    } else {
        Trend::Diverging
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakRow {
    pub eps: f64,
    pub h: f64,
    /// Discrete local maxima above half the global maximum.
    pub local_maxima: usize,
    /// Boundary distance from `P̃_ε` to the nearest curvature maximizer.
    pub target_distance: Option<f64>,
    pub target_distance_in_h: Option<f64>,
    pub distance_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakConvergence {
    pub rows: Vec<PeakRow>,
    pub target_trend: Option<Trend>,
    pub distance_ratio_trend: Option<Trend>,
    pub note: Option<String>,
}

/// Vertices whose value is at least `threshold · max u` and not below any
/// neighbour; plateaus are counted once, at their lowest index.
pub fn local_maxima(mesh: &Mesh, u: &[f64], threshold: f64) -> Vec<usize> {
    let top = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (0..mesh.n_vertices())
        .filter(|&i| {
            u[i] >= threshold * top
                && mesh
                    .neighbors(i)
                    .iter()
                    .all(|&j| if j < i { u[i] > u[j] } else { u[i] >= u[j] })
        })
        .collect()
}

pub fn peak_convergence_report(domain: &DomainSpec, sweep: &SweepReport) -> PeakConvergence {
    let target = &sweep.curvature_target;
    let skip = target.degenerate || target.points.is_empty();
    let rows: Vec<PeakRow> = sweep
        .converged_cases()
        .map(|c| {
            let r = c.report.as_ref().unwrap();
            let p = c.boundary_point.as_ref().unwrap();
            let td = (!skip).then(|| {
                target
                    .points
                    .iter()
                    .map(|q| boundary_distance(domain, p, q))
                    .fold(f64::INFINITY, f64::min)
            });
            PeakRow {
                eps: c.eps,
                h: c.h,
                local_maxima: local_maxima(&r.u.mesh, &r.u.values, 0.5).len(),
                target_distance: td,
                target_distance_in_h: td.map(|t| t / c.h),
                distance_ratio: c.distance_ratio.unwrap(),
            }
        })
        .collect();
    let enough = rows.len() >= 2;
    // Both trends are judged in mesh units: target distance over h, and the
    // distance ratio against its resolution h/ε.
    let td: Vec<f64> = rows.iter().filter_map(|r| r.target_distance_in_h).collect();
    let dr: Vec<f64> = rows.iter().map(|r| r.distance_ratio).collect();
    let ratio_floor = sweep.cases.first().map_or(0.0, |c| c.h / c.eps);
    PeakConvergence {
        target_trend: if enough && !skip { trend(&td, 1.0) } else { None },
        distance_ratio_trend: if enough { trend(&dr, ratio_floor) } else { None },
        note: skip.then(|| "degenerate: constant curvature".to_string()),
        rows,
    }
}
