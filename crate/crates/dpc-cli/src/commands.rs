//! The three subcommands behind the `dpc` binary.
//!
//! Every command takes a scenario path; configuration problems surface
//! before any output file is created, so a failed run never leaves a
//! partial CSV behind.

use crate::csvout::write_trace;
use crate::error::CliError;
use crate::scenario::{load_scenario, ScenarioFile};
use dpc_core::jacobian::{
    analytic_jacobian, diagnostics, fd_jacobian, minor_null_vector, JacobianMatrix,
    DEFAULT_RANK_TOLERANCE,
};
use dpc_core::simulator::{run, RunSummary};
use dpc_core::stokes::{ControlVector, DpcChain, StokesVector};
use nalgebra::Vector3;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Central-difference step for the Jacobian cross-check.
const FD_STEP: f64 = 1e-6;
/// Largest tolerated column deviation between the analytic and the
/// finite-difference Jacobian, relative to the matrix norm.
const FD_TOLERANCE: f64 = 1e-5;
/// Largest tolerated `|column · S_out|`.
const ORTHOGONALITY_TOLERANCE: f64 = 1e-9;
/// Largest tolerated `σ₃/σ₁`.
const SIGMA3_TOLERANCE: f64 = 1e-9;
/// Largest tolerated manipulability `σ₁σ₂σ₃`.
const MANIPULABILITY_TOLERANCE: f64 = 1e-12;
/// Largest tolerated norm of the signed-minor null vector (4-stage chains).
const MINOR_TOLERANCE: f64 = 1e-9;

/// `simulate`: run one scenario and write the decimated trace as CSV.
pub fn cmd_simulate(scenario_path: &Path, out: &Path, decimation: usize) -> Result<(), CliError> {
    if decimation == 0 {
        return Err(CliError::Usage("--decimation must be at least 1".into()));
    }
    let scenario = load_scenario(scenario_path)?;
    let (cfg, scrambler) = scenario.to_configs()?;
    let m = cfg.chain.len();
    let sim = run(&cfg, &scrambler)?;

    // All configuration work is done; only now touch the filesystem.
    let file = File::create(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let mut w = BufWriter::new(file);
    write_trace(&mut w, &sim.trace, m, decimation)?;
    w.flush().map_err(|e| CliError::Io(e.to_string()))?;

    print!("{}", summary_block(&sim.summary));
    Ok(())
}

/// The stable `key = value` block `simulate` prints.
fn summary_block(s: &RunSummary) -> String {
    let mut out = String::new();
    match s.convergence_time {
        Some(t) => writeln!(out, "convergence_time_s = {t:.9e}").unwrap(),
        None => writeln!(out, "convergence_time_s = none").unwrap(),
    }
    match s.steady_state_error {
        Some(e) => writeln!(out, "steady_state_error = {e:.9e}").unwrap(),
        None => writeln!(out, "steady_state_error = none").unwrap(),
    }
    writeln!(out, "max_abs_phi = {:.9e}", s.max_abs_phi).unwrap();
    writeln!(out, "nullspace_duty = {:.9e}", s.nullspace_duty).unwrap();
    writeln!(
        out,
        "bounded_fraction_1_5 = {:.9e}",
        s.bounded_fraction(1.5)
    )
    .unwrap();
    writeln!(out, "control_steps = {}", s.control_steps).unwrap();
    writeln!(out, "solver_failures = {}", s.solver_failures).unwrap();
    out
}

/// Worst-case deviations observed over a `check-jacobian` run.
#[derive(Debug, Clone, Default)]
pub struct CheckReport {
    pub trials: usize,
    pub max_fd_error: f64,
    pub max_output_dot: f64,
    pub max_sigma3_relative: f64,
    pub max_manipulability: f64,
    /// Only populated for 4-stage chains.
    pub max_minor_norm: f64,
}

/// `check-jacobian`: randomized verification of the analytic Jacobian on the
/// scenario's chain.
///
/// Each trial draws a fresh operating point `φ ∈ [−2, 2]^m` and a fresh unit
/// input state, then checks the analytic columns against central finite
/// differences, the orthogonality of every column to the output, and the
/// rank-deficiency invariants (`σ₃ ≈ 0`, zero manipulability, vanishing
/// signed-minor vector on 4-stage chains). The first violation aborts with
/// the offending operating point on stderr, ready to paste into a replay.
pub fn cmd_check_jacobian(scenario_path: &Path, trials: usize) -> Result<CheckReport, CliError> {
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let scenario = load_scenario(scenario_path)?;
    let chain = scenario.to_chain()?;
    let seed = scenario.scrambler.seed.unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = chain.len();

    let mut report = CheckReport {
        trials,
        ..CheckReport::default()
    };
    for _ in 0..trials {
        let phi = ControlVector::from_vec((0..m).map(|_| rng.random_range(-2.0..2.0)).collect());
        let s_in = random_unit(&mut rng);
        let violation = check_one(&chain, &phi, &s_in, &mut report)?;
        if let Some(message) = violation {
            eprintln!("{}", replay_block(&chain, &phi, &s_in));
            return Err(CliError::Property(message));
        }
    }

    print!("{}", report_block(&report, m));
    Ok(report)
}

fn random_unit(rng: &mut ChaCha8Rng) -> StokesVector {
    loop {
        let v = Vector3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        if let Ok(s) = StokesVector::normalize(v) {
            return s;
        }
    }
}

/// Runs all checks at one operating point, folding the observed deviations
/// into `report`. Returns a violation message if any bound is exceeded.
fn check_one(
    chain: &DpcChain,
    phi: &ControlVector,
    s_in: &StokesVector,
    report: &mut CheckReport,
) -> Result<Option<String>, CliError> {
    let j = analytic_jacobian(chain, phi, s_in)?;
    let j_fd = fd_jacobian(chain, phi, s_in, FD_STEP)?;
    let s_out = chain.forward(phi, s_in)?.output();

    let fd_error = max_relative_column_error(&j, &j_fd);
    report.max_fd_error = report.max_fd_error.max(fd_error);
    if fd_error > FD_TOLERANCE {
        return Ok(Some(format!(
            "analytic and finite-difference Jacobians disagree: relative column error {fd_error:.3e} exceeds {FD_TOLERANCE:.1e}"
        )));
    }

    let output_dot = (0..chain.len())
        .map(|i| j.column(i).dot(&s_out.vector()).abs())
        .fold(0.0, f64::max);
    report.max_output_dot = report.max_output_dot.max(output_dot);
    if output_dot > ORTHOGONALITY_TOLERANCE {
        return Ok(Some(format!(
            "a Jacobian column has a component along the output: |column · s_out| = {output_dot:.3e} exceeds {ORTHOGONALITY_TOLERANCE:.1e}"
        )));
    }

    let diag = diagnostics(&j, DEFAULT_RANK_TOLERANCE)?;
    let sigma1 = diag.singular_values.first().copied().unwrap_or(0.0);
    let sigma3 = diag.singular_values.get(2).copied().unwrap_or(0.0);
    let sigma3_relative = if sigma1 > 0.0 { sigma3 / sigma1 } else { 0.0 };
    report.max_sigma3_relative = report.max_sigma3_relative.max(sigma3_relative);
    if sigma3_relative > SIGMA3_TOLERANCE {
        return Ok(Some(format!(
            "third singular value is not negligible: σ₃/σ₁ = {sigma3_relative:.3e} exceeds {SIGMA3_TOLERANCE:.1e}"
        )));
    }
    report.max_manipulability = report.max_manipulability.max(diag.manipulability);
    if diag.manipulability > MANIPULABILITY_TOLERANCE {
        return Ok(Some(format!(
            "manipulability is not negligible: {:.3e} exceeds {MANIPULABILITY_TOLERANCE:.1e}",
            diag.manipulability
        )));
    }

    if chain.len() == 4 {
        let minor_norm = minor_null_vector(&j)?.norm();
        report.max_minor_norm = report.max_minor_norm.max(minor_norm);
        if minor_norm > MINOR_TOLERANCE {
            return Ok(Some(format!(
                "signed-minor null vector is not negligible: norm {minor_norm:.3e} exceeds {MINOR_TOLERANCE:.1e}"
            )));
        }
    }

    Ok(None)
}

fn max_relative_column_error(a: &JacobianMatrix, b: &JacobianMatrix) -> f64 {
    let scale = a.matrix().norm().max(1e-300);
    (0..a.stage_count())
        .map(|i| (a.column(i) - b.column(i)).norm() / scale)
        .fold(0.0, f64::max)
}

/// The offending operating point, serialized so it can be pasted back into
/// a scenario or a debugging harness verbatim.
fn replay_block(chain: &DpcChain, phi: &ControlVector, s_in: &StokesVector) -> String {
    let mut out = String::from("# offending configuration\n");
    for stage in chain.stages() {
        let a = stage.axis().vector();
        writeln!(out, "[[chain]]").unwrap();
        writeln!(out, "axis = [{:.17e}, {:.17e}, {:.17e}]", a.x, a.y, a.z).unwrap();
        writeln!(out, "gain = {:.17e}", stage.gain()).unwrap();
    }
    let phis: Vec<String> = phi.as_slice().iter().map(|v| format!("{v:.17e}")).collect();
    writeln!(out, "phi = [{}]", phis.join(", ")).unwrap();
    writeln!(
        out,
        "s_in = [{:.17e}, {:.17e}, {:.17e}]",
        s_in.s1(),
        s_in.s2(),
        s_in.s3()
    )
    .unwrap();
    out
}

fn report_block(report: &CheckReport, m: usize) -> String {
    let mut out = String::new();
    writeln!(out, "trials = {}", report.trials).unwrap();
    writeln!(out, "stages = {m}").unwrap();
    writeln!(out, "max_fd_relative_error = {:.3e}", report.max_fd_error).unwrap();
    writeln!(out, "max_output_dot = {:.3e}", report.max_output_dot).unwrap();
    writeln!(
        out,
        "max_sigma3_relative = {:.3e}",
        report.max_sigma3_relative
    )
    .unwrap();
    writeln!(
        out,
        "max_manipulability = {:.3e}",
        report.max_manipulability
    )
    .unwrap();
    if m == 4 {
        writeln!(out, "max_minor_norm = {:.3e}", report.max_minor_norm).unwrap();
    }
    writeln!(out, "status = ok").unwrap();
    out
}

/// The scenario keys `sweep` can vary, with the section each lives in.
const SWEEPABLE_KEYS: [&str; 13] = [
    "lambda",
    "mu",
    "rank_tolerance",
    "nullspace_threshold",
    "drift_rate_rad_s",
    "perturb_sigma",
    "seed",
    "sample_rate_hz",
    "delay_s",
    "activation_time_s",
    "duration_s",
    "lock_tolerance",
    "control_decimation",
];

/// `sweep`: rerun the scenario once per value of one scalar key.
///
/// Writes one decimated trace per value (`<key>_<value>.csv`) plus a
/// `summary.csv` table, and prints the same table to stdout. Runs are
/// independent, so they execute in parallel; rows keep the input order.
pub fn cmd_sweep(scenario_path: &Path, param: &str, out_dir: &Path) -> Result<(), CliError> {
    let (key, value_list) = param.split_once('=').ok_or_else(|| {
        CliError::Usage(format!("--param must look like key=v1,v2,… got {param:?}"))
    })?;
    if !SWEEPABLE_KEYS.contains(&key) {
        return Err(CliError::Usage(format!(
            "unknown sweep key {key:?}; choose one of {}",
            SWEEPABLE_KEYS.join(", ")
        )));
    }
    let raw_values: Vec<&str> = value_list
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .collect();
    if raw_values.is_empty() {
        return Err(CliError::Usage(format!(
            "sweep over {key:?} needs at least one value"
        )));
    }

    let scenario = load_scenario(scenario_path)?;
    // Build and validate every variant up front: a bad value means no file
    // is ever created.
    let variants = raw_values
        .iter()
        .map(|raw| {
            let variant = apply_sweep_value(&scenario, key, raw)?;
            variant
                .to_configs()
                .map_err(|e| CliError::Config(format!("{key} = {raw}: {e}")))?;
            Ok((raw.to_string(), variant))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;

    let summaries = variants
        .par_iter()
        .map(|(raw, variant)| {
            let (cfg, scrambler) = variant.to_configs()?;
            let sim = run(&cfg, &scrambler)?;
            let path = out_dir.join(format!("{key}_{raw}.csv"));
            let file = File::create(&path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            write_trace(&mut w, &sim.trace, cfg.chain.len(), DEFAULT_CSV_DECIMATION)?;
            w.flush().map_err(|e| CliError::Io(e.to_string()))?;
            Ok(sim.summary)
        })
        .collect::<Result<Vec<RunSummary>, CliError>>()?;

    let table = summary_table(key, &raw_values, &summaries);
    let path = out_dir.join("summary.csv");
    let mut file =
        File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    file.write_all(table.as_bytes())
        .map_err(|e| CliError::Io(e.to_string()))?;
    print!("{table}");
    Ok(())
}

/// Default trace decimation for CSV output.
pub const DEFAULT_CSV_DECIMATION: usize = 100;

fn summary_table(key: &str, raw_values: &[&str], summaries: &[RunSummary]) -> String {
    let mut out = String::from(
        "key,value,convergence_time_s,steady_state_error,max_abs_phi,nullspace_duty,bounded_fraction_1_5,solver_failures\n",
    );
    for (raw, s) in raw_values.iter().zip(summaries) {
        let conv = s
            .convergence_time
            .map_or_else(|| "nan".to_string(), |t| format!("{t:.9e}"));
        let steady = s
            .steady_state_error
            .map_or_else(|| "nan".to_string(), |e| format!("{e:.9e}"));
        writeln!(
            out,
            "{key},{raw},{conv},{steady},{:.9e},{:.9e},{:.9e},{}",
            s.max_abs_phi,
            s.nullspace_duty,
            s.bounded_fraction(1.5),
            s.solver_failures
        )
        .unwrap();
    }
    out
}

/// Returns a copy of `scenario` with `key` set to `raw`, parsing `raw` as
/// the key's type.
fn apply_sweep_value(
    scenario: &ScenarioFile,
    key: &str,
    raw: &str,
) -> Result<ScenarioFile, CliError> {
    let mut sc = scenario.clone();
    let bad_value =
        |kind: &str| CliError::Usage(format!("sweep value {raw:?} for {key:?} is not {kind}"));
    let as_f64 = || raw.parse::<f64>().map_err(|_| bad_value("a number"));
    match key {
        "lambda" => sc.solver.lambda = Some(as_f64()?),
        "mu" => sc.solver.mu = Some(as_f64()?),
        "rank_tolerance" => sc.solver.rank_tolerance = Some(as_f64()?),
        "nullspace_threshold" => sc.solver.nullspace_threshold = Some(as_f64()?),
        "drift_rate_rad_s" => sc.scrambler.drift_rate_rad_s = Some(as_f64()?),
        "perturb_sigma" => sc.scrambler.perturb_sigma = Some(as_f64()?),
        "seed" => {
            sc.scrambler.seed = Some(raw.parse().map_err(|_| bad_value("an integer"))?);
        }
        "sample_rate_hz" => sc.control_loop.sample_rate_hz = Some(as_f64()?),
        "delay_s" => sc.control_loop.delay_s = Some(as_f64()?),
        "activation_time_s" => sc.control_loop.activation_time_s = Some(as_f64()?),
        "duration_s" => sc.control_loop.duration_s = Some(as_f64()?),
        "lock_tolerance" => sc.control_loop.lock_tolerance = Some(as_f64()?),
        "control_decimation" => {
            sc.control_loop.control_decimation =
                Some(raw.parse().map_err(|_| bad_value("an integer"))?);
        }
        other => {
            return Err(CliError::Usage(format!("unknown sweep key {other:?}")));
        }
    }
    Ok(sc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_values_apply_to_the_right_section() {
        let scenario = crate::scenario::parse_scenario(
            "[[chain]]\naxis = \"S1\"\ngain = 1.0\n\n[loop]\ntarget_sop = [1.0, 0.0, 0.0]",
        )
        .unwrap();
        let v = apply_sweep_value(&scenario, "mu", "0.25").unwrap();
        assert_eq!(v.solver.mu, Some(0.25));
        let v = apply_sweep_value(&scenario, "seed", "42").unwrap();
        assert_eq!(v.scrambler.seed, Some(42));
        let v = apply_sweep_value(&scenario, "duration_s", "1e-3").unwrap();
        assert_eq!(v.control_loop.duration_s, Some(1e-3));
        let err = apply_sweep_value(&scenario, "seed", "4.5").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn summary_lines_are_stable() {
        use dpc_core::simulator::{run, LoopConfig, ScramblerConfig};
        use dpc_core::stokes::{DpcChain, StokesAxis, StokesVector};

        let chain =
            DpcChain::elemental(&[StokesAxis::S1, StokesAxis::S3, StokesAxis::S1], 1.0).unwrap();
        let mut cfg = LoopConfig::new(chain, StokesVector::new(0.0, 0.6, 0.8).unwrap());
        cfg.duration = 20.0 / cfg.sample_rate;
        let sim = run(&cfg, &ScramblerConfig::default()).unwrap();
        let text = summary_block(&sim.summary);
        for key in [
            "convergence_time_s = ",
            "steady_state_error = ",
            "max_abs_phi = ",
            "nullspace_duty = ",
            "bounded_fraction_1_5 = ",
            "control_steps = 20",
            "solver_failures = 0",
        ] {
            assert!(text.contains(key), "missing {key:?} in {text:?}");
        }
    }
}
