//! Parametric smooth domains: closed-form boundary curvature, nearest
//! boundary points and boundary-fitted simplicial meshes.

mod mesh;

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mesh::{generate_mesh, Mesh, MeshStats};

/// Points farther than this from the analytic boundary are rejected by
/// [`mean_curvature`].
pub const ON_BOUNDARY_TOL: f64 = 1e-8;
const SCAN_POINTS: usize = 4096;
const REFINE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("point is {distance:e} away from the boundary")]
    PointNotOnBoundary { distance: f64 },
    #[error("mesh size h = {h} must be positive and at most min_feature/4 = {limit}")]
    MeshTooCoarse { h: f64, limit: f64 },
    #[error("cell {cell} has aspect ratio {ratio:.2} > {limit}")]
    MeshQualityFailure { cell: usize, ratio: f64, limit: f64 },
    #[error("cell {cell} has non-positive volume {volume:e}")]
    InvertedCell { cell: usize, volume: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Ball { radius: f64, dim: usize },
    Ellipse { a: f64, b: f64 },
    Ellipsoid { a: f64, b: f64, c: f64 },
    /// Star-shaped disk with boundary `r(θ) = R(1 + amp·cos kθ)`.
    PerturbedDisk { radius: f64, amp: f64, k: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Shape", into = "Shape")]
pub struct DomainSpec {
    shape: Shape,
}

impl TryFrom<Shape> for DomainSpec {
    type Error = GeometryError;
    fn try_from(shape: Shape) -> Result<Self, Self::Error> {
        DomainSpec::new(shape)
    }
}

impl From<DomainSpec> for Shape {
    fn from(d: DomainSpec) -> Shape {
        d.shape
    }
}

fn positive(name: &str, v: f64) -> Result<(), GeometryError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(GeometryError::InvalidDomain(format!("{name} must be positive, got {v}")))
    }
}

impl DomainSpec {
    pub fn new(shape: Shape) -> Result<Self, GeometryError> {
        match shape {
            Shape::Ball { radius, dim } => {
                positive("radius", radius)?;
                if !(dim == 2 || dim == 3) {
                    return Err(GeometryError::InvalidDomain(format!("ball dimension must be 2 or 3, got {dim}")));
                }
            }
            Shape::Ellipse { a, b } => {
                positive("a", a)?;
                positive("b", b)?;
            }
            Shape::Ellipsoid { a, b, c } => {
                positive("a", a)?;
                positive("b", b)?;
                positive("c", c)?;
            }
            Shape::PerturbedDisk { radius, amp, k } => {
                positive("radius", radius)?;
                if k == 0 {
                    return Err(GeometryError::InvalidDomain("k must be at least 1".into()));
                }
                // At |amp| = 1/(1+k²) the curvature touches zero but stays
                // bounded and the curve stays star-shaped, so the limit is
                // admitted.
                let limit = 1.0 / (1.0 + (k as f64).powi(2));
                if !(amp.abs() <= limit * (1.0 + 1e-12)) {
                    return Err(GeometryError::InvalidDomain(format!("|amp| = {} exceeds 1/(1+k²) = {limit}", amp.abs())));
                }
            }
        }
        Ok(Self { shape })
    }

    pub fn ball(radius: f64, dim: usize) -> Result<Self, GeometryError> {
        Self::new(Shape::Ball { radius, dim })
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self, GeometryError> {
        Self::new(Shape::Ellipse { a, b })
    }

    pub fn ellipsoid(a: f64, b: f64, c: f64) -> Result<Self, GeometryError> {
        Self::new(Shape::Ellipsoid { a, b, c })
    }

    pub fn perturbed_disk(radius: f64, amp: f64, k: u32) -> Result<Self, GeometryError> {
        Self::new(Shape::PerturbedDisk { radius, amp, k })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        match self.shape {
            Shape::Ball { dim, .. } => dim,
            Shape::Ellipse { .. } | Shape::PerturbedDisk { .. } => 2,
            Shape::Ellipsoid { .. } => 3,
        }
    }

    /// Semi-axes for the quadric shapes, `None` for the perturbed disk.
    fn axes(&self) -> Option<Vec<f64>> {
        match self.shape {
            Shape::Ball { radius, dim } => Some(vec![radius; dim]),
            Shape::Ellipse { a, b } => Some(vec![a, b]),
            Shape::Ellipsoid { a, b, c } => Some(vec![a, b, c]),
            Shape::PerturbedDisk { .. } => None,
        }
    }

    /// Smallest semi-axis, or the minimum polar radius of the perturbed disk.
    pub fn min_feature(&self) -> f64 {
        match self.shape {
            Shape::PerturbedDisk { radius, amp, .. } => radius * (1.0 - amp.abs()),
            _ => self.axes().unwrap().into_iter().fold(f64::INFINITY, f64::min),
        }
    }

    /// Largest distance from the origin to the boundary.
    pub fn max_extent(&self) -> f64 {
        match self.shape {
            Shape::PerturbedDisk { radius, amp, .. } => radius * (1.0 + amp.abs()),
            _ => self.axes().unwrap().into_iter().fold(0.0, f64::max),
        }
    }

    pub fn volume(&self) -> f64 {
        match self.shape {
            Shape::Ball { radius, dim } => crate::numerics::unit_ball_volume(dim) * radius.powi(dim as i32),
            Shape::Ellipse { a, b } => PI * a * b,
            Shape::Ellipsoid { a, b, c } => 4.0 / 3.0 * PI * a * b * c,
            Shape::PerturbedDisk { radius, amp, .. } => PI * radius * radius * (1.0 + 0.5 * amp * amp),
        }
    }

    fn polar_radius(&self, theta: f64) -> (f64, f64, f64) {
        let Shape::PerturbedDisk { radius, amp, k } = self.shape else {
            unreachable!()
        };
        let k = k as f64;
        let (s, c) = (k * theta).sin_cos();
        (radius * (1.0 + amp * c), -radius * amp * k * s, -radius * amp * k * k * c)
    }

    /// Boundary point for angular parameters: `[θ]` in 2D, `[θ, φ]` (polar,
    /// azimuth) in 3D.
    pub fn boundary_point(&self, param: &[f64]) -> Vec<f64> {
        match self.shape {
            Shape::PerturbedDisk { .. } => {
                let (r, _, _) = self.polar_radius(param[0]);
                vec![r * param[0].cos(), r * param[0].sin()]
            }
            _ => {
                let ax = self.axes().unwrap();
                if ax.len() == 2 {
                    vec![ax[0] * param[0].cos(), ax[1] * param[0].sin()]
                } else {
                    let (st, ct) = param[0].sin_cos();
                    let (sp, cp) = param[1].sin_cos();
                    vec![ax[0] * st * cp, ax[1] * st * sp, ax[2] * ct]
                }
            }
        }
    }

    /// Angular parameters of a boundary point; inverse of [`Self::boundary_point`].
    pub fn boundary_param(&self, p: &[f64]) -> Vec<f64> {
        match self.shape {
            Shape::PerturbedDisk { .. } => vec![p[1].atan2(p[0])],
            _ => {
                let ax = self.axes().unwrap();
                if ax.len() == 2 {
                    vec![(p[1] / ax[1]).atan2(p[0] / ax[0])]
                } else {
                    let z = (p[2] / ax[2]).clamp(-1.0, 1.0);
                    vec![z.acos(), (p[1] / ax[1]).atan2(p[0] / ax[0])]
                }
            }
        }
    }

    /// Maps a point of the closed unit ball onto the domain. Boundary goes to
    /// boundary.
    pub(crate) fn map_from_unit_ball(&self, y: &[f64]) -> Vec<f64> {
        match self.shape {
            Shape::PerturbedDisk { radius, .. } => {
                let rho = (y[0] * y[0] + y[1] * y[1]).sqrt();
                if rho == 0.0 {
                    return vec![0.0, 0.0];
                }
                let (r, _, _) = self.polar_radius(y[1].atan2(y[0]));
                let scale = if rho >= 1.0 { r } else { radius + (r - radius) * rho };
                vec![y[0] * scale, y[1] * scale]
            }
            _ => y.iter().zip(self.axes().unwrap()).map(|(v, a)| v * a).collect(),
        }
    }

    /// Outward unit normal at a boundary point.
    pub fn outward_normal(&self, p: &[f64]) -> Vec<f64> {
        let n: Vec<f64> = match self.shape {
            Shape::PerturbedDisk { .. } => {
                let theta = p[1].atan2(p[0]);
                let (r, dr, _) = self.polar_radius(theta);
                let (s, c) = theta.sin_cos();
                let (tx, ty) = (dr * c - r * s, dr * s + r * c);
                vec![ty, -tx]
            }
            _ => p.iter().zip(self.axes().unwrap()).map(|(x, a)| x / (a * a)).collect(),
        };
        let norm = n.iter().map(|v| v * v).sum::<f64>().sqrt();
        n.into_iter().map(|v| v / norm).collect()
    }

    /// Signed boundary offset, negative inside: the distance for balls, the
    /// radial offset `|x| − r(θ)` for the perturbed disk, and the gauge
    /// offset scaled by the smallest semi-axis for ellipses and ellipsoids
    /// (a lower bound on the true distance).
    pub fn level(&self, x: &[f64]) -> f64 {
        match self.shape {
            Shape::PerturbedDisk { .. } => {
                let (r, _, _) = self.polar_radius(x[1].atan2(x[0]));
                (x[0] * x[0] + x[1] * x[1]).sqrt() - r
            }
            _ => {
                let ax = self.axes().unwrap();
                let g = x.iter().zip(&ax).map(|(v, a)| (v / a).powi(2)).sum::<f64>().sqrt();
                (g - 1.0) * ax.iter().cloned().fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.level(x) <= 0.0
    }

    /// Mean curvature at the boundary point with angular parameters `param`.
    pub fn curvature_at_param(&self, param: &[f64]) -> f64 {
        match self.shape {
            Shape::Ball { radius, .. } => 1.0 / radius,
            Shape::Ellipse { a, b } => {
                let (s, c) = param[0].sin_cos();
                a * b / (a * a * s * s + b * b * c * c).powf(1.5)
            }
            Shape::PerturbedDisk { .. } => {
                let (r, dr, ddr) = self.polar_radius(param[0]);
                (r * r + 2.0 * dr * dr - r * ddr) / (r * r + dr * dr).powf(1.5)
            }
            Shape::Ellipsoid { .. } => ellipsoid_mean_curvature(&self.axes().unwrap(), &self.boundary_point(param)),
        }
    }

    fn parameter_box(&self) -> Vec<(f64, f64, bool)> {
        // (lo, hi, periodic)
        if self.dim() == 2 {
            vec![(0.0, TAU, true)]
        } else {
            vec![(0.0, PI, false), (0.0, TAU, true)]
        }
    }
}

/// `H = (|∇g|² tr A⁻¹ − ∇gᵀA⁻¹∇g) / (2|∇g|³)` for `g = Σ x_i²/a_i²`, with
/// `∇g/2 = x_i/a_i²` and `A = diag(a²)`.
fn ellipsoid_mean_curvature(ax: &[f64], x: &[f64]) -> f64 {
    let p: Vec<f64> = x.iter().zip(ax).map(|(v, a)| v / (a * a)).collect();
    let p2: f64 = p.iter().map(|v| v * v).sum();
    let tr: f64 = ax.iter().map(|a| 1.0 / (a * a)).sum();
    let quad: f64 = p.iter().zip(ax).map(|(v, a)| v * v / (a * a)).sum();
    (p2 * tr - quad) / (ax.len() as f64 - 1.0) / p2.powf(1.5)
}

/// Mean curvature of `∂Ω` at `p`, positive for convex domains.
pub fn mean_curvature(domain: &DomainSpec, p: &[f64]) -> Result<f64, GeometryError> {
    if p.len() != domain.dim() {
        return Err(GeometryError::PointNotOnBoundary { distance: f64::INFINITY });
    }
    let nearest = nearest_boundary_point(domain, p);
    if !(nearest.distance <= ON_BOUNDARY_TOL) {
        return Err(GeometryError::PointNotOnBoundary {
            distance: nearest.distance,
        });
    }
    Ok(match domain.shape {
        Shape::Ellipsoid { .. } => ellipsoid_mean_curvature(&domain.axes().unwrap(), p),
        _ => domain.curvature_at_param(&domain.boundary_param(p)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureMaximum {
    pub h_max: f64,
    pub h_min: f64,
    /// All maximizers found; empty when the curvature is constant.
    pub points: Vec<Vec<f64>>,
    pub params: Vec<Vec<f64>>,
    pub degenerate: bool,
    pub note: Option<String>,
}

/// Scans the boundary parametrization on a 4096-point grid per angular
/// direction, refines every discrete local maximum and returns the whole
/// maximizer set.
pub fn max_mean_curvature(domain: &DomainSpec) -> CurvatureMaximum {
    if let Shape::Ball { radius, .. } = domain.shape {
        return CurvatureMaximum {
            h_max: 1.0 / radius,
            h_min: 1.0 / radius,
            points: Vec::new(),
            params: Vec::new(),
            degenerate: true,
            note: Some("degenerate: constant curvature".into()),
        };
    }
    let boxes = domain.parameter_box();
    let h = |q: &[f64]| domain.curvature_at_param(q);
    let candidates = if boxes.len() == 1 {
        scan_1d(&h)
    } else {
        scan_2d(&h)
    };
    let mut h_min = f64::INFINITY;
    if boxes.len() == 1 {
        for i in 0..SCAN_POINTS {
            h_min = h_min.min(h(&[TAU * i as f64 / SCAN_POINTS as f64]));
        }
    } else {
        for i in 0..256 {
            for j in 0..256 {
                h_min = h_min.min(h(&[PI * (i as f64 + 0.5) / 256.0, TAU * j as f64 / 256.0]));
            }
        }
    }
    let h_max = candidates.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut params: Vec<Vec<f64>> = Vec::new();
    for (q, v) in candidates {
        if v < h_max - 1e-9 * h_max.abs() {
            continue;
        }
        let p = domain.boundary_point(&q);
        if points.iter().any(|o| dist(o, &p) < 1e-6 * domain.max_extent()) {
            continue;
        }
        points.push(p);
        params.push(q);
    }
    h_min = h_min.min(h_max);
    CurvatureMaximum {
        h_max,
        h_min,
        points,
        params,
        degenerate: false,
        note: None,
    }
}

fn scan_1d(h: &impl Fn(&[f64]) -> f64) -> Vec<(Vec<f64>, f64)> {
    let n = SCAN_POINTS;
    let step = TAU / n as f64;
    let vals: Vec<f64> = (0..n).map(|i| h(&[i as f64 * step])).collect();
    let mut out = Vec::new();
    for i in 0..n {
        let (l, r) = (vals[(i + n - 1) % n], vals[(i + 1) % n]);
        if vals[i] >= l && vals[i] > r {
            let t = golden_max(|t| h(&[t]), (i as f64 - 1.0) * step, (i as f64 + 1.0) * step);
            out.push((vec![t.rem_euclid(TAU)], h(&[t])));
        }
    }
    out
}

/// Maximizer of a smooth `f` on `[a, b]` around an interior local maximum,
/// by bisection on the sign of a central-difference derivative. A plain
/// value comparison stalls at `sqrt(ε_mach)` in the flat top.
fn golden_max(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let step = 1e-5;
    let slope = |t: f64| f(t + step) - f(t - step);
    let (mut lo, mut hi) = (a, b);
    if !(slope(lo) >= 0.0 && slope(hi) <= 0.0) {
        return value_golden(&f, a, b);
    }
    while hi - lo > 1e-3 * REFINE_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn value_golden(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > REFINE_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

fn scan_2d(h: &(impl Fn(&[f64]) -> f64 + Sync)) -> Vec<(Vec<f64>, f64)> {
    use rayon::prelude::*;
    let n = SCAN_POINTS;
    let (dt, dp) = (PI / n as f64, TAU / n as f64);
    let vals: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|k| h(&[(((k / n) as f64) + 0.5) * dt, (k % n) as f64 * dp]))
        .collect();
    let at = |i: usize, j: usize| vals[i * n + j % n];
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = at(i, j);
            let mut is_max = true;
            'nb: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let ii = i as i64 + di;
                    if ii < 0 || ii >= n as i64 {
                        continue;
                    }
                    let jj = (j as i64 + dj).rem_euclid(n as i64) as usize;
                    let w = at(ii as usize, jj);
                    // Strict against half of the neighbours so plateaus yield
                    // one representative.
                    if w > v || (w == v && (di, dj) > (0, 0)) {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                let q = pattern_refine(h, [(i as f64 + 0.5) * dt, j as f64 * dp], dt.max(dp));
                out.push((q.to_vec(), h(&q)));
            }
        }
    }
    out
}

/// Compass search on the two angular parameters.
fn pattern_refine(h: &impl Fn(&[f64]) -> f64, start: [f64; 2], step: f64) -> [f64; 2] {
    let mut x = start;
    let mut fx = h(&x);
    let mut s = step;
    while s > REFINE_TOL {
        let mut moved = false;
        for (a, b) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)] {
            let y = [(x[0] + a * s).clamp(0.0, PI), x[1] + b * s];
            let fy = h(&y);
            if fy > fx {
                x = y;
                fx = fy;
                moved = true;
                break;
            }
        }
        if !moved {
            s *= 0.5;
        }
    }
    [x[0], x[1].rem_euclid(TAU)]
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearestPoint {
    pub point: Vec<f64>,
    pub distance: f64,
    /// Several boundary points are equally near; `point` is one of them.
    pub tie: bool,
}

/// Closest boundary point to `x`. Exact for quadrics via the Lagrange
/// multiplier of `Σ P_i²/a_i² = 1`, parameter scan plus golden refinement
/// for the perturbed disk.
pub fn nearest_boundary_point(domain: &DomainSpec, x: &[f64]) -> NearestPoint {
    match domain.axes() {
        Some(ax) => nearest_on_quadric(&ax, x),
        None => nearest_on_polar(domain, x),
    }
}

fn nearest_on_quadric(ax: &[f64], x: &[f64]) -> NearestPoint {
    let a_min = ax.iter().cloned().fold(f64::INFINITY, f64::min);
    let a_max = ax.iter().cloned().fold(0.0, f64::max);
    let is_min: Vec<bool> = ax.iter().map(|&a| a - a_min <= 1e-14 * a_min).collect();
    let g = |lambda: f64| -> f64 {
        x.iter()
            .zip(ax)
            .map(|(v, a)| (a * v / (a * a + lambda)).powi(2))
            .sum::<f64>()
            - 1.0
    };
    let degenerate_axis = x.iter().zip(&is_min).all(|(v, &m)| !m || *v == 0.0);
    let lo_limit = -a_min * a_min;
    let g_limit = x
        .iter()
        .zip(ax)
        .zip(&is_min)
        .filter(|(_, &m)| !m)
        .map(|((v, a), _)| (a * v / (a * a + lo_limit)).powi(2))
        .sum::<f64>()
        - 1.0;
    if degenerate_axis && g_limit <= 0.0 {
        // Nearest points form a whole sphere in the min-axis subspace.
        let rest: f64 = x
            .iter()
            .zip(ax)
            .zip(&is_min)
            .filter(|(_, &m)| !m)
            .map(|((v, a), _)| (a * v / (a * a - a_min * a_min)).powi(2))
            .sum();
        let mut p: Vec<f64> = x
            .iter()
            .zip(ax)
            .zip(&is_min)
            .map(|((v, a), &m)| if m { 0.0 } else { a * a * v / (a * a - a_min * a_min) })
            .collect();
        let first = is_min.iter().position(|&m| m).unwrap();
        p[first] = a_min * (1.0 - rest).max(0.0).sqrt();
        let distance = dist(&p, x);
        let tie = p[first] > 0.0 || is_min.iter().filter(|&&m| m).count() > 1;
        return NearestPoint { point: p, distance, tie };
    }
    let (mut lo, mut hi) = if g(0.0) >= 0.0 {
        let mut hi = a_max * a_max;
        while g(hi) > 0.0 {
            hi *= 2.0;
        }
        (0.0, hi)
    } else {
        (lo_limit, 0.0)
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let mut p: Vec<f64> = x.iter().zip(ax).map(|(v, a)| a * a * v / (a * a + lambda)).collect();
    // Remove the residual gauge error so the result lies on the surface.
    let gauge = p.iter().zip(ax).map(|(v, a)| (v / a).powi(2)).sum::<f64>().sqrt();
    for v in p.iter_mut() {
        *v /= gauge;
    }
    let distance = dist(&p, x);
    if distance < 1e-13 * a_max {
        return NearestPoint {
            point: x.to_vec(),
            distance: 0.0,
            tie: false,
        };
    }
    NearestPoint {
        distance,
        point: p,
        tie: false,
    }
}

fn nearest_on_polar(domain: &DomainSpec, x: &[f64]) -> NearestPoint {
    let n = SCAN_POINTS;
    let step = TAU / n as f64;
    let d2 = |t: f64| {
        let p = domain.boundary_point(&[t]);
        (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2)
    };
    let vals: Vec<f64> = (0..n).map(|i| d2(i as f64 * step)).collect();
    let mut minima: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        let (l, r) = (vals[(i + n - 1) % n], vals[(i + 1) % n]);
        if vals[i] <= l && vals[i] < r {
            let t = golden_max(|t| -d2(t), (i as f64 - 1.0) * step, (i as f64 + 1.0) * step);
            minima.push((t.rem_euclid(TAU), d2(t)));
        }
    }
    let best = minima.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    let scale = domain.max_extent();
    let near: Vec<&(f64, f64)> = minima
        .iter()
        .filter(|m| m.1.sqrt() - best.sqrt() <= 1e-9 * scale)
        .collect();
    let pick = near[0];
    let mut point = domain.boundary_point(&[pick.0]);
    let mut distance = pick.1.sqrt();
    if distance < 1e-12 * scale {
        point = x.to_vec();
        distance = 0.0;
    }
    NearestPoint {
        point,
        distance,
        tie: near.len() > 1,
    }
}

/// Distance along the boundary: arc length on the shorter arc in 2D, chord
/// length in 3D.
pub fn boundary_distance(domain: &DomainSpec, p: &[f64], q: &[f64]) -> f64 {
    if domain.dim() == 3 {
        return dist(p, q);
    }
    let (t0, t1) = (domain.boundary_param(p)[0], domain.boundary_param(q)[0]);
    let mut d = (t1 - t0).rem_euclid(TAU);
    let mut start = t0;
    if d > PI {
        d = TAU - d;
        start = t1;
    }
    let speed = |t: f64| -> f64 {
        match domain.shape {
            Shape::PerturbedDisk { .. } => {
                let (r, dr, _) = domain.polar_radius(t);
                (r * r + dr * dr).sqrt()
            }
            _ => {
                let ax = domain.axes().unwrap();
                (ax[0] * ax[0] * t.sin().powi(2) + ax[1] * ax[1] * t.cos().powi(2)).sqrt()
            }
        }
    };
    // Composite 8-point Gauss–Legendre on 64 panels.
    let panels = 64;
    let hp = d / panels as f64;
    let mut acc = crate::numerics::CompensatedSum::default();
    for k in 0..panels {
        let mid = start + (k as f64 + 0.5) * hp;
        for (x, w) in crate::numerics::GAUSS_LEGENDRE_8 {
            acc.add(0.5 * hp * w * speed(mid + 0.5 * hp * x));
        }
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_curvature_is_inverse_radius() {
        let d = DomainSpec::ball(2.0, 3).unwrap();
        assert_eq!(mean_curvature(&d, &[0.0, 2.0, 0.0]).unwrap(), 0.5);
        let d2 = DomainSpec::ball(2.0, 2).unwrap();
        let p = [2.0 * 0.3f64.cos(), 2.0 * 0.3f64.sin()];
        assert_eq!(mean_curvature(&d2, &p).unwrap(), 0.5);
    }

    #[test]
    fn ellipse_vertex_curvatures() {
        let d = DomainSpec::ellipse(2.0, 1.0).unwrap();
        assert!((mean_curvature(&d, &[2.0, 0.0]).unwrap() - 2.0).abs() < 1e-14);
        assert!((mean_curvature(&d, &[0.0, 1.0]).unwrap() - 0.25).abs() < 1e-14);
        assert!(matches!(
            mean_curvature(&d, &[1.0, 0.0]),
            Err(GeometryError::PointNotOnBoundary { .. })
        ));
    }

    #[test]
    fn ellipsoid_reduces_to_sphere_and_vertex_values() {
        let s = [1.5, 1.5, 1.5];
        assert!((ellipsoid_mean_curvature(&s, &[0.0, 1.5, 0.0]) - 1.0 / 1.5).abs() < 1e-14);
        // At (a,0,0) both principal curvatures are a/b² and a/c².
        let ax = [1.6, 1.0, 1.2];
        let h = ellipsoid_mean_curvature(&ax, &[1.6, 0.0, 0.0]);
        assert!((h - 0.5 * (1.6 / 1.0 + 1.6 / 1.44)).abs() < 1e-13);
    }

    #[test]
    fn invalid_domains_rejected() {
        assert!(DomainSpec::ellipse(-1.0, 1.0).is_err());
        assert!(DomainSpec::ball(1.0, 4).is_err());
        assert!(DomainSpec::perturbed_disk(1.0, 0.2, 3).is_err());
        assert!(DomainSpec::perturbed_disk(1.0, 0.1, 3).is_ok());
    }

    #[test]
    fn polar_curvature_reduces_to_circle() {
        let d = DomainSpec::perturbed_disk(2.0, 0.0, 3).unwrap();
        assert!((d.curvature_at_param(&[0.7]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn normals_are_outward_and_unit() {
        for d in [
            DomainSpec::ellipse(2.0, 1.0).unwrap(),
            DomainSpec::perturbed_disk(1.0, 0.1, 3).unwrap(),
        ] {
            for t in [0.0, 0.4, 2.0, 4.0] {
                let p = d.boundary_point(&[t]);
                let n = d.outward_normal(&p);
                assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-14);
                let out = [p[0] + 1e-6 * n[0], p[1] + 1e-6 * n[1]];
                assert!(!d.contains(&out));
            }
        }
    }

    #[test]
    fn param_round_trip() {
        let d = DomainSpec::ellipsoid(1.6, 1.0, 1.3).unwrap();
        let q = [1.1, 2.5];
        let p = d.boundary_point(&q);
        let back = d.boundary_param(&p);
        assert!((back[0] - q[0]).abs() < 1e-14 && (back[1] - q[1]).abs() < 1e-14);
    }
}
