//! Reaction term `f`, its primitive `F`, and the structural hypotheses
//! (H1)–(H5) a nonlinearity has to satisfy for the concentration theory.
//!
//! Pure powers `f(t) = t₊^p` are decided analytically. User supplied
//! nonlinearities are only ever checked by sampling, and the report says so.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::GAUSS_LEGENDRE_8;

/// Number of log-spaced sample points used by every sampled check.
pub const SAMPLE_COUNT: usize = 2048;

/// Relative half-width of the neighbourhood of `u_c` excluded from the H5 scan.
const UC_EXCLUSION: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NonlinearityError {
    #[error("exponent p = {p} is not superlinear relative to the m-homogeneous part (need p > m - 1 = {})", .m - 1.0)]
    NotSuperlinear { p: f64, m: f64 },
    #[error("quasilinear exponent m = {0} is not supported (need m >= 2)")]
    UnsupportedM(f64),
    #[error("dimension N = {0} is not supported (need N >= 1)")]
    UnsupportedDimension(usize),
    #[error("non-finite parameter: {0}")]
    NonFinite(&'static str),
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user supplied reaction term with its derivative.
#[derive(Clone)]
pub struct CustomNonlinearity {
    pub name: String,
    f: ScalarFn,
    df: ScalarFn,
}

impl CustomNonlinearity {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
            df: Arc::new(df),
        }
    }
}

impl fmt::Debug for CustomNonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomNonlinearity")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum NonlinearityKind {
    PurePower { p: f64 },
    Custom(CustomNonlinearity),
}

/// The reaction term together with the quasilinear exponent `m` and the
/// ambient dimension `N`.
#[derive(Debug, Clone)]
pub struct NonlinearitySpec {
    pub kind: NonlinearityKind,
    pub m: f64,
    pub dim: usize,
}

impl NonlinearitySpec {
    pub fn pure_power(p: f64, m: f64, dim: usize) -> Result<Self, NonlinearityError> {
        if !p.is_finite() {
            return Err(NonlinearityError::NonFinite("p"));
        }
        let spec = Self::custom_unchecked(NonlinearityKind::PurePower { p }, m, dim)?;
        if p <= m - 1.0 {
            return Err(NonlinearityError::NotSuperlinear { p, m });
        }
        Ok(spec)
    }

    pub fn custom(custom: CustomNonlinearity, m: f64, dim: usize) -> Result<Self, NonlinearityError> {
        Self::custom_unchecked(NonlinearityKind::Custom(custom), m, dim)
    }

    fn custom_unchecked(kind: NonlinearityKind, m: f64, dim: usize) -> Result<Self, NonlinearityError> {
        if !m.is_finite() {
            return Err(NonlinearityError::NonFinite("m"));
        }
        if m < 2.0 {
            return Err(NonlinearityError::UnsupportedM(m));
        }
        if dim == 0 {
            return Err(NonlinearityError::UnsupportedDimension(dim));
        }
        Ok(Self { kind, m, dim })
    }

    pub fn exponent(&self) -> Option<f64> {
        match self.kind {
            NonlinearityKind::PurePower { p } => Some(p),
            NonlinearityKind::Custom(_) => None,
        }
    }

    /// `f(t)`, identically zero for `t <= 0`.
    #[inline]
    pub fn eval_f(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            NonlinearityKind::PurePower { p } => t.powf(*p),
            NonlinearityKind::Custom(c) => (c.f)(t),
        }
    }

    #[inline]
    pub fn eval_df(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            NonlinearityKind::PurePower { p } => p * t.powf(p - 1.0),
            NonlinearityKind::Custom(c) => (c.df)(t),
        }
    }

    /// Primitive `F(t) = ∫₀ᵗ f`, zero for `t <= 0`.
    #[inline]
    pub fn eval_big_f(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            NonlinearityKind::PurePower { p } => t.powf(p + 1.0) / (p + 1.0),
            NonlinearityKind::Custom(c) => integrate_primitive(&*c.f, t),
        }
    }

    /// The constant solution level `u_c > 0` with `f(u_c) = u_c^{m-1}`.
    pub fn critical_level(&self) -> Option<f64> {
        match self.kind {
            NonlinearityKind::PurePower { .. } => Some(1.0),
            NonlinearityKind::Custom(_) => self.find_critical_level(),
        }
    }

    fn find_critical_level(&self) -> Option<f64> {
        // f(t)/t^{m-1} - 1 changes sign exactly once under H4.
        let phi = |t: f64| self.eval_f(t) / t.powf(self.m - 1.0) - 1.0;
        let grid = log_grid(1e-8, 1e8, SAMPLE_COUNT);
        let mut prev = (grid[0], phi(grid[0]));
        for &t in &grid[1..] {
            let cur = phi(t);
            if prev.1 < 0.0 && cur >= 0.0 {
                return Some(bisect(phi, prev.0, t, 200));
            }
            prev = (t, cur);
        }
        None
    }

    /// The (H5) quotient `g(u) = ((m-1)u^{m-1} - u f'(u)) / (u^{m-1} - f(u))`.
    pub fn g_quotient(&self, u: f64) -> f64 {
        let um = u.powf(self.m - 1.0);
        ((self.m - 1.0) * um - u * self.eval_df(u)) / (um - self.eval_f(u))
    }

    /// Upper end of the (H2) window; `None` when `N <= m`, where the
    /// subcritical bound is read as `+∞`.
    pub fn subcritical_bound(&self) -> Option<f64> {
        let (n, m) = (self.dim as f64, self.m);
        (n > m).then(|| (n * (m - 1.0) + m) / (n - m))
    }

    pub fn check_hypotheses(&self) -> Result<HypothesisReport, NonlinearityError> {
        match self.kind {
            NonlinearityKind::PurePower { p } => self.check_pure_power(p),
            NonlinearityKind::Custom(_) => Ok(self.check_sampled()),
        }
    }

    fn check_pure_power(&self, p: f64) -> Result<HypothesisReport, NonlinearityError> {
        let m = self.m;
        if p <= m - 1.0 {
            return Err(NonlinearityError::NotSuperlinear { p, m });
        }
        let bound = self.subcritical_bound();
        let extrapolation = bound.is_none();
        let theta = 1.0 / (p + 1.0);
        let delta = p - (m - 1.0);
        let u_c = 1.0;

        let mut entries = Vec::with_capacity(5);
        entries.push(HypothesisEntry::analytic(
            Hypothesis::H1,
            p > 1.0,
            format!("t_+^p is C^1 iff p > 1 (p = {p})"),
        ));
        let h2 = match bound {
            Some(b) => HypothesisEntry::analytic(
                Hypothesis::H2,
                p < b,
                format!("need {} < p < {b} (p = {p})", m - 1.0),
            ),
            None => HypothesisEntry::analytic(
                Hypothesis::H2,
                true,
                format!("N = {} <= m = {m}: upper bound read as +inf (extrapolation)", self.dim),
            ),
        };
        entries.push(h2);
        entries.push(HypothesisEntry::analytic(
            Hypothesis::H3,
            theta < 1.0 / m,
            format!("tightest theta = 1/(p+1) = {theta}, need theta < 1/m = {}", 1.0 / m),
        ));
        entries.push(HypothesisEntry::analytic(
            Hypothesis::H4,
            delta > 0.0,
            format!("f(t)/t^(m-1) = t^delta with delta = {delta}"),
        ));
        let h5 = self.sample_h5(u_c);
        entries.push(HypothesisEntry {
            hypothesis: Hypothesis::H5,
            status: if h5.is_ok() { Status::Pass } else { Status::Fail },
            evidence: Evidence::Analytic,
            detail: match h5 {
                Ok(()) => format!("u_c = {u_c}; g non-increasing on {SAMPLE_COUNT} log-spaced samples of (u_c, 1e3 u_c]"),
                Err(at) => format!("u_c = {u_c}; g increases near u = {at}"),
            },
        });

        Ok(HypothesisReport {
            entries,
            theta: Some(theta),
            delta: Some(delta),
            u_c: Some(u_c),
            subcritical_bound: bound,
            extrapolation,
        })
    }

    fn check_sampled(&self) -> HypothesisReport {
        let m = self.m;
        let bound = self.subcritical_bound();
        let extrapolation = bound.is_none();
        let grid = log_grid(1e-6, 1e6, SAMPLE_COUNT);

        let mut entries = Vec::with_capacity(5);

        let negatives_vanish = grid.iter().all(|&t| self.eval_f(-t) == 0.0);
        let continuous_at_zero = self.eval_f(1e-12).abs() < 1e-9 && self.eval_df(1e-12).abs() < 1e-6;
        entries.push(HypothesisEntry::sampled(
            Hypothesis::H1,
            Some(negatives_vanish && continuous_at_zero),
            "f vanishes on sampled t <= 0 and f, f' -> 0 at 0+".to_string(),
        ));

        // Growth exponent from the log-log slope at the top of the grid.
        let (t1, t2) = (1e5, 1e6);
        let f1 = self.eval_f(t1);
        let f2 = self.eval_f(t2);
        let p_est = if f1 > 0.0 && f2 > 0.0 {
            Some((f2.ln() - f1.ln()) / (t2.ln() - t1.ln()))
        } else {
            None
        };
        let h2 = p_est.map(|p| p > m - 1.0 + 1e-6 && bound.is_none_or(|b| p < b));
        entries.push(HypothesisEntry::sampled(
            Hypothesis::H2,
            h2,
            match p_est {
                Some(p) => format!("estimated growth exponent {p:.4} at t ~ 1e6"),
                None => "f not positive at large t".to_string(),
            },
        ));

        let theta = grid
            .iter()
            .filter_map(|&t| {
                let tf = t * self.eval_f(t);
                (tf > 0.0).then(|| self.eval_big_f(t) / tf)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let theta = theta.is_finite().then_some(theta);
        entries.push(HypothesisEntry::sampled(
            Hypothesis::H3,
            theta.map(|th| th > 0.0 && th < 1.0 / m),
            format!("sup F/(t f) over samples = {theta:?}, need < 1/m"),
        ));

        let ratio: Vec<f64> = grid.iter().map(|&t| self.eval_f(t) / t.powf(m - 1.0)).collect();
        let increasing = ratio.windows(2).all(|w| w[1] > w[0]);
        let (s1, s2) = (1e-6, 1e-5);
        let delta = {
            let a = self.eval_f(s1);
            let b = self.eval_f(s2);
            (a > 0.0 && b > 0.0).then(|| (b.ln() - a.ln()) / (s2.ln() - s1.ln()) - (m - 1.0))
        };
        entries.push(HypothesisEntry::sampled(
            Hypothesis::H4,
            Some(increasing && delta.is_some_and(|d| d > 0.0)),
            format!("f/t^(m-1) increasing on samples: {increasing}; delta estimate {delta:?}"),
        ));

        let u_c = self.find_critical_level();
        let h5 = u_c.map(|uc| self.sample_h5(uc));
        entries.push(HypothesisEntry::sampled(
            Hypothesis::H5,
            h5.as_ref().map(|r| r.is_ok()),
            match (u_c, &h5) {
                (None, _) => "no positive root of f(t) = t^(m-1) found".into(),
                (Some(uc), Some(Err(at))) => format!("u_c = {uc}; g increases near u = {at}"),
                (Some(uc), _) => format!("u_c = {uc}; g non-increasing on samples"),
            },
        ));

        HypothesisReport {
            entries,
            theta,
            delta,
            u_c,
            subcritical_bound: bound,
            extrapolation,
        }
    }

    /// Samples `g` on `(u_c, 1e3 u_c]`, skipping a relative `1e-6`
    /// neighbourhood of `u_c` where the denominator vanishes.
    fn sample_h5(&self, u_c: f64) -> Result<(), f64> {
        let grid = log_grid(u_c * (1.0 + UC_EXCLUSION), u_c * 1e3, SAMPLE_COUNT);
        let mut prev = self.g_quotient(grid[0]);
        for &u in &grid[1..] {
            let g = self.g_quotient(u);
            // tolerate rounding in the quotient
            if g > prev + 1e-9 * prev.abs().max(1.0) {
                return Err(u);
            }
            prev = g;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    H1,
    H2,
    H3,
    H4,
    H5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NotVerifiable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    Analytic,
    /// Sampled, not proven.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisEntry {
    pub hypothesis: Hypothesis,
    pub status: Status,
    pub evidence: Evidence,
    pub detail: String,
}

impl HypothesisEntry {
    fn analytic(hypothesis: Hypothesis, pass: bool, detail: String) -> Self {
        Self {
            hypothesis,
            status: if pass { Status::Pass } else { Status::Fail },
            evidence: Evidence::Analytic,
            detail,
        }
    }

    fn sampled(hypothesis: Hypothesis, pass: Option<bool>, detail: String) -> Self {
        Self {
            hypothesis,
            status: match pass {
                Some(true) => Status::Pass,
                Some(false) => Status::Fail,
                None => Status::NotVerifiable,
            },
            evidence: Evidence::Sampled,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub entries: Vec<HypothesisEntry>,
    pub theta: Option<f64>,
    pub delta: Option<f64>,
    pub u_c: Option<f64>,
    pub subcritical_bound: Option<f64>,
    /// Set when `N <= m`, outside the range the concentration theory covers.
    pub extrapolation: bool,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.status == Status::Pass)
    }

    pub fn status(&self, h: Hypothesis) -> Status {
        self.entries
            .iter()
            .find(|e| e.hypothesis == h)
            .map_or(Status::NotVerifiable, |e| e.status)
    }

    pub fn failures(&self) -> Vec<Hypothesis> {
        self.entries
            .iter()
            .filter(|e| e.status != Status::Pass)
            .map(|e| e.hypothesis)
            .collect()
    }
}

pub(crate) fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn bisect(phi: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let f_lo = phi(lo);
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (phi(mid) < 0.0) == (f_lo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn integrate_primitive(f: &(dyn Fn(f64) -> f64 + Send + Sync), t: f64) -> f64 {
    let panels = 32;
    let h = t / panels as f64;
    let mut acc = 0.0;
    for k in 0..panels {
        let mid = (k as f64 + 0.5) * h;
        for &(x, w) in &GAUSS_LEGENDRE_8 {
            acc += w * f(mid + 0.5 * h * x);
        }
    }
    0.5 * h * acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cubic_3d() -> NonlinearitySpec {
        NonlinearitySpec::pure_power(3.0, 2.0, 3).unwrap()
    }

    #[test]
    fn pure_power_values() {
        let s = cubic_3d();
        assert_eq!(s.eval_f(2.0), 8.0);
        assert_eq!(s.eval_f(-1.0), 0.0);
        assert_eq!(s.eval_f(0.0), 0.0);
        assert_eq!(s.eval_big_f(1.0), 0.25);
        assert_eq!(s.eval_big_f(0.0), 0.0);
        assert_eq!(s.eval_big_f(2.0), 4.0);
    }

    #[test]
    fn cubic_in_three_dimensions_passes() {
        let s = cubic_3d();
        assert_eq!(s.subcritical_bound(), Some(5.0));
        let r = s.check_hypotheses().unwrap();
        assert!(r.all_pass(), "{r:?}");
        assert_eq!(r.u_c, Some(1.0));
        assert_eq!(r.theta, Some(0.25));
        assert_eq!(r.delta, Some(2.0));
        assert!(!r.extrapolation);
    }

    #[test]
    fn supercritical_power_fails_h2() {
        let s = NonlinearitySpec::pure_power(6.0, 2.0, 3).unwrap();
        let r = s.check_hypotheses().unwrap();
        assert_eq!(r.status(Hypothesis::H2), Status::Fail);
        assert_eq!(r.failures(), vec![Hypothesis::H2]);
    }

    #[test]
    fn sublinear_power_is_rejected() {
        assert!(matches!(
            NonlinearitySpec::pure_power(1.0, 2.0, 3),
            Err(NonlinearityError::NotSuperlinear { .. })
        ));
        assert!(NonlinearitySpec::pure_power(1.5, 2.5, 3).is_err());
    }

    #[test]
    fn equal_dimension_is_extrapolation() {
        let s = NonlinearitySpec::pure_power(3.0, 2.0, 2).unwrap();
        let r = s.check_hypotheses().unwrap();
        assert!(r.extrapolation);
        assert!(r.all_pass());
        assert_eq!(r.subcritical_bound, None);
    }

    #[test]
    fn quasilinear_power_window() {
        let s = NonlinearitySpec::pure_power(2.5, 2.5, 3).unwrap();
        assert_eq!(s.subcritical_bound(), Some(14.0));
        assert!(s.check_hypotheses().unwrap().all_pass());
    }

    #[test]
    fn custom_power_is_sampled_and_matches() {
        let c = CustomNonlinearity::new("cube", |t: f64| t * t * t, |t: f64| 3.0 * t * t);
        let s = NonlinearitySpec::custom(c, 2.0, 3).unwrap();
        assert!((s.eval_big_f(2.0) - 4.0).abs() < 1e-12);
        let r = s.check_hypotheses().unwrap();
        assert!(r.entries.iter().all(|e| e.evidence == Evidence::Sampled));
        assert!(r.all_pass(), "{r:?}");
        assert!((r.u_c.unwrap() - 1.0).abs() < 1e-10);
        assert!((r.theta.unwrap() - 0.25).abs() < 1e-9);
    }

    #[test]
    fn custom_saturating_fails_growth() {
        // f(t) = t^3 / (1 + t^2) grows linearly: not superlinear for m = 2.
        let c = CustomNonlinearity::new(
            "sat",
            |t: f64| t.powi(3) / (1.0 + t * t),
            |t: f64| (t.powi(4) + 3.0 * t * t) / (1.0 + t * t).powi(2),
        );
        let s = NonlinearitySpec::custom(c, 2.0, 3).unwrap();
        let r = s.check_hypotheses().unwrap();
        assert_eq!(r.status(Hypothesis::H2), Status::Fail);
    }

    proptest! {
        #[test]
        fn nonpositive_arguments_vanish(t in -100.0f64..=0.0, p in 1.1f64..4.9) {
            let s = NonlinearitySpec::pure_power(p, 2.0, 3).unwrap();
            prop_assert_eq!(s.eval_f(t), 0.0);
            prop_assert_eq!(s.eval_big_f(t), 0.0);
        }

        #[test]
        fn primitive_derivative_matches(t in 0.1f64..10.0, p in 1.2f64..4.8) {
            let s = NonlinearitySpec::pure_power(p, 2.0, 3).unwrap();
            let h = 1e-5 * t;
            let fd = (s.eval_big_f(t + h) - s.eval_big_f(t - h)) / (2.0 * h);
            let f = s.eval_f(t);
            prop_assert!(((fd - f) / f).abs() < 1e-6);
        }

        #[test]
        fn window_implies_full_pass(m in 2.0f64..3.0, n in 4usize..6, frac in 0.02f64..0.98) {
            let lo = m - 1.0;
            let hi = (n as f64 * (m - 1.0) + m) / (n as f64 - m);
            let p = lo + frac * (hi - lo);
            let s = NonlinearitySpec::pure_power(p, m, n).unwrap();
            prop_assert!(s.check_hypotheses().unwrap().all_pass());
        }
    }
}
