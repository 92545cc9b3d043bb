//! Experiment configuration: a TOML file (or JSON, chosen by extension)
//! whose every field has a default. `resolve` fills the dimension- and
//! schedule-dependent defaults and validates the result.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{DomainSpec, Shape};
use crate::harness::{SolverDefaults, SweepSettings};
use crate::nonlinearity::NonlinearitySpec;
use crate::radial::RadialSettings;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("invalid field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityKindConfig {
    PurePower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub kind: NonlinearityKindConfig,
    pub p: f64,
    pub m: f64,
    /// Taken from the domain when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

impl Default for NonlinearityConfig {
    fn default() -> Self {
        Self {
            kind: NonlinearityKindConfig::PurePower,
            p: 3.0,
            m: 2.0,
            dim: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadialConfig {
    pub h_r: f64,
    pub r_max: f64,
    pub bisect_tol: f64,
    pub tail_tol_rel: f64,
    /// Exit-code threshold on the compensated decay plateau.
    pub plateau_tol: f64,
    /// Exit-code threshold on the Monte Carlo γ cross-check gap.
    pub crosscheck_tol: f64,
    pub crosscheck_samples: usize,
}

impl Default for RadialConfig {
    fn default() -> Self {
        let r = RadialSettings::default();
        Self {
            h_r: r.h_r,
            r_max: r.r_max,
            bisect_tol: r.bisect_tol,
            tail_tol_rel: r.tail_tol_rel,
            plateau_tol: 0.02,
            crosscheck_tol: 0.02,
            crosscheck_samples: 1_000_000,
        }
    }
}

impl RadialConfig {
    pub fn settings(&self) -> RadialSettings {
        RadialSettings {
            h_r: self.h_r,
            r_max: self.r_max,
            bisect_tol: self.bisect_tol,
            tail_tol_rel: self.tail_tol_rel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub grad_tol: f64,
    pub max_iters: usize,
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub memory: usize,
    pub panel_size: usize,
    pub continuation: bool,
    pub h_ratio: f64,
    pub decay_window: [f64; 2],
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolverDefaults::default();
        Self {
            grad_tol: s.grad_tol,
            max_iters: s.max_iters,
            armijo: s.armijo,
            backtrack: s.backtrack,
            max_backtracks: s.max_backtracks,
            memory: s.memory,
            panel_size: 5,
            continuation: true,
            h_ratio: 1.0 / 3.0,
            decay_window: [2.0, 8.0],
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Strictly decreasing ε values in (0, 1]; defaults by dimension.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    #[default]
    Quick,
    Full,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub budget: Budget,
    /// Criterion names to run; all when empty.
    pub criteria: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub nonlinearity: NonlinearityConfig,
    pub domain: DomainSpec,
    pub radial: RadialConfig,
    pub solver: SolverConfig,
    pub schedule: ScheduleConfig,
    pub verify: VerifyConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            nonlinearity: NonlinearityConfig::default(),
            domain: DomainSpec::ball(1.0, 3).unwrap(),
            radial: RadialConfig::default(),
            solver: SolverConfig::default(),
            schedule: ScheduleConfig::default(),
            verify: VerifyConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

pub const DEFAULT_SCHEDULE_2D: [f64; 5] = [0.5, 0.35, 0.25, 0.18, 0.12];
pub const DEFAULT_SCHEDULE_3D: [f64; 3] = [0.6, 0.45, 0.35];

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Self::parse(&text, json)
    }

    pub fn parse(text: &str, json: bool) -> Result<Self, ConfigError> {
        let cfg: Self = if json {
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(format!("JSON: {e}")))?
        } else {
            toml::from_str(text).map_err(|e| ConfigError::Parse(format!("TOML: {e}")))?
        };
        cfg.resolve()
    }

    /// Fills defaults that depend on other fields and validates everything.
    pub fn resolve(mut self) -> Result<Self, ConfigError> {
        let dim = self.domain.dim();
        match self.nonlinearity.dim {
            None => self.nonlinearity.dim = Some(dim),
            Some(d) if d != dim => {
                return Err(invalid("nonlinearity.dim", format!("{d} does not match the {dim}D domain")));
            }
            Some(_) => {}
        }
        if self.schedule.eps.is_none() {
            self.schedule.eps = Some(if dim == 2 { DEFAULT_SCHEDULE_2D.to_vec() } else { DEFAULT_SCHEDULE_3D.to_vec() });
        }
        let eps = self.schedule.eps.as_ref().unwrap();
        if eps.is_empty() {
            return Err(invalid("schedule.eps", "empty schedule"));
        }
        for (i, &e) in eps.iter().enumerate() {
            if !(e > 0.0 && e <= 1.0) {
                return Err(invalid(&format!("schedule.eps[{i}]"), format!("ε = {e} must lie in (0, 1]")));
            }
        }
        if eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("schedule.eps", "values must be strictly decreasing"));
        }
        self.nonlinearity_spec().map_err(|e| invalid("nonlinearity", e.to_string()))?;
        let r = &self.radial;
        if !(r.h_r > 0.0 && r.r_max > 10.0 * r.h_r) {
            return Err(invalid("radial", "need h_r > 0 and r_max ≫ h_r"));
        }
        if !(r.plateau_tol > 0.0 && r.crosscheck_tol > 0.0) || r.crosscheck_samples == 0 {
            return Err(invalid("radial", "tolerances and sample count must be positive"));
        }
        let s = &self.solver;
        if !(s.grad_tol > 0.0) {
            return Err(invalid("solver.grad_tol", "must be positive"));
        }
        if s.max_iters == 0 {
            return Err(invalid("solver.max_iters", "must be positive"));
        }
        if !(s.decay_window[0] >= 0.0 && s.decay_window[1] > s.decay_window[0]) {
            return Err(invalid("solver.decay_window", "need 0 <= lo < hi"));
        }
        self.sweep_settings()
            .validate()
            .map_err(|e| invalid("solver", e.to_string()))?;
        if self.output.dir.is_empty() {
            return Err(invalid("output.dir", "must not be empty"));
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn schedule(&self) -> Vec<f64> {
        self.schedule.eps.clone().unwrap_or_default()
    }

    pub fn nonlinearity_spec(&self) -> Result<NonlinearitySpec, crate::nonlinearity::NonlinearityError> {
        let n = &self.nonlinearity;
        match n.kind {
            NonlinearityKindConfig::PurePower => NonlinearitySpec::pure_power(n.p, n.m, n.dim.unwrap_or(self.dim())),
        }
    }

    pub fn sweep_settings(&self) -> SweepSettings {
        let s = &self.solver;
        SweepSettings {
            schedule: self.schedule(),
            h_ratio: s.h_ratio,
            panel_size: s.panel_size,
            continuation: s.continuation,
            decay_window: (s.decay_window[0], s.decay_window[1]),
            solver: SolverDefaults {
                max_iters: s.max_iters,
                grad_tol: s.grad_tol,
                armijo: s.armijo,
                backtrack: s.backtrack,
                max_backtracks: s.max_backtracks,
                memory: s.memory,
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn shape(&self) -> Shape {
        self.domain.shape()
    }
}
