//! Scenario files: the on-disk description of one closed-loop experiment.
//!
//! A scenario is a TOML document with four sections. Optional keys fall back
//! to the library defaults, so the library remains the single source of
//! truth for default values; unknown keys are rejected.
//!
//! ```toml
//! [[chain]]                 # one table per stage, input side first
//! axis = "S1"               # "S1" | "S2" | "S3" or a raw [x, y, z] axis
//! gain = 3.141592653589793  # rad of rotation per unit control signal
//! # range = [-1.0, 1.0]     # optional working range of the control signal
//!
//! [scrambler]
//! base_sop = [1.0, 0.0, 0.0]
//! drift_rate_rad_s = 1e5    # rotation rate of the input about S3
//! perturb_sigma = 1e-3      # per-sample random-walk step (rad)
//! seed = 0
//!
//! [loop]
//! sample_rate_hz = 5e7
//! delay_s = 1e-6            # actuation latency
//! activation_time_s = 2e-3  # controller off before this time
//! duration_s = 4e-3
//! target_sop = [0.0, 0.6, 0.8]
//! task_rows = [1, 2, 3]     # Stokes components the solver acts on
//! lock_tolerance = 0.02     # error norm below which the loop counts as locked
//! control_decimation = 1    # evaluate the controller every N-th sample
//!
//! [solver]
//! method = "gradient_projection"
//! mu = 0.1
//! ```

use crate::error::CliError;
use dpc_core::simulator::{LoopConfig, ScramblerConfig};
use dpc_core::solvers::{SolverConfig, SolverMethod};
use dpc_core::stokes::{AxisVector, DpcChain, StokesAxis, StokesVector, WaveplateStage};
use dpc_core::TaskProjection;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One parsed scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub chain: Vec<StageSpec>,
    #[serde(default)]
    pub scrambler: ScramblerSection,
    #[serde(rename = "loop")]
    pub control_loop: LoopSection,
    #[serde(default)]
    pub solver: SolverSection,
}

/// One waveplate stage: rotation axis, gain, optional signal range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub axis: AxisSpec,
    pub gain: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
}

/// A rotation axis, either one of the Stokes basis axes by name or a raw
/// vector (normalized on load).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisSpec {
    Named(NamedAxis),
    Vector([f64; 3]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NamedAxis {
    S1,
    S2,
    S3,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScramblerSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_sop: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_rate_rad_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturb_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_rate_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation_time_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    pub target_sop: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_rows: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lock_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_decimation: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nullspace_threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSpec {
    DirectInverse,
    Transpose,
    Damped,
    RegularizedLs,
    PseudoInverse,
    GradientProjection,
    ExtendedJacobian,
}

impl From<MethodSpec> for SolverMethod {
    fn from(m: MethodSpec) -> Self {
        match m {
            MethodSpec::DirectInverse => SolverMethod::DirectInverse,
            MethodSpec::Transpose => SolverMethod::Transpose,
            MethodSpec::Damped => SolverMethod::Damped,
            MethodSpec::RegularizedLs => SolverMethod::RegularizedLs,
            MethodSpec::PseudoInverse => SolverMethod::PseudoInverse,
            MethodSpec::GradientProjection => SolverMethod::GradientProjection,
            MethodSpec::ExtendedJacobian => SolverMethod::ExtendedJacobian,
        }
    }
}

impl AxisSpec {
    fn to_axis(&self) -> Result<AxisVector, dpc_core::Error> {
        match self {
            AxisSpec::Named(NamedAxis::S1) => Ok(StokesAxis::S1.axis()),
            AxisSpec::Named(NamedAxis::S2) => Ok(StokesAxis::S2.axis()),
            AxisSpec::Named(NamedAxis::S3) => Ok(StokesAxis::S3.axis()),
            AxisSpec::Vector([x, y, z]) => AxisVector::new(*x, *y, *z),
        }
    }
}

impl StageSpec {
    fn to_stage(&self) -> Result<WaveplateStage, dpc_core::Error> {
        let range = self
            .range
            .map(|[lo, hi]| (lo, hi))
            .unwrap_or(WaveplateStage::DEFAULT_SIGNAL_RANGE);
        WaveplateStage::new(self.to_axis()?, self.gain, range)
    }

    fn to_axis(&self) -> Result<AxisVector, dpc_core::Error> {
        self.axis.to_axis()
    }
}

impl ScenarioFile {
    /// Builds the waveplate chain this scenario describes.
    pub fn to_chain(&self) -> Result<DpcChain, dpc_core::Error> {
        let stages = self
            .chain
            .iter()
            .map(StageSpec::to_stage)
            .collect::<Result<Vec<_>, _>>()?;
        DpcChain::new(stages)
    }

    /// Builds and validates the library configurations for this scenario.
    pub fn to_configs(&self) -> Result<(LoopConfig, ScramblerConfig), dpc_core::Error> {
        let chain = self.to_chain()?;
        let t = self.control_loop.target_sop;
        let target = StokesVector::new(t[0], t[1], t[2])?;
        let mut cfg = LoopConfig::new(chain, target);

        let l = &self.control_loop;
        if let Some(v) = l.sample_rate_hz {
            cfg.sample_rate = v;
        }
        if let Some(v) = l.delay_s {
            cfg.delay = v;
        }
        if let Some(v) = l.activation_time_s {
            cfg.activation_time = v;
        }
        if let Some(v) = l.duration_s {
            cfg.duration = v;
        }
        if let Some(rows) = &l.task_rows {
            cfg.task = TaskProjection::new(rows)?;
        }
        if let Some(v) = l.lock_tolerance {
            cfg.lock_tolerance = v;
        }
        if let Some(v) = l.control_decimation {
            cfg.control_decimation = v;
        }

        let s = &self.solver;
        if let Some(m) = s.method {
            cfg.solver = SolverConfig::new(m.into());
        }
        if let Some(v) = s.lambda {
            cfg.solver.lambda = v;
        }
        if let Some(v) = s.mu {
            cfg.solver.mu = v;
        }
        if let Some(v) = s.rank_tolerance {
            cfg.solver.rank_tolerance = v;
        }
        if let Some(v) = s.nullspace_threshold {
            cfg.solver.nullspace_threshold = Some(v);
        }

        let sc = &self.scrambler;
        let mut scrambler = ScramblerConfig::default();
        if let Some(b) = sc.base_sop {
            scrambler.base_sop = StokesVector::new(b[0], b[1], b[2])?;
        }
        if let Some(v) = sc.drift_rate_rad_s {
            scrambler.drift_rate = v;
        }
        if let Some(v) = sc.perturb_sigma {
            scrambler.perturb_sigma = v;
        }
        if let Some(v) = sc.seed {
            scrambler.seed = v;
        }

        cfg.validate()?;
        scrambler.validate()?;
        Ok((cfg, scrambler))
    }

    /// Serializes back to TOML. Round-trips: loading the output yields an
    /// identical `ScenarioFile`.
    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Parses a scenario document, reporting line-level diagnostics on failure.
pub fn parse_scenario(text: &str) -> Result<ScenarioFile, CliError> {
    let scenario: ScenarioFile =
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    // Surface semantic errors (degenerate vectors, bad ranges, …) at load
    // time so every caller sees them before any output file is touched.
    scenario.to_configs()?;
    Ok(scenario)
}

/// Reads and parses a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
