//! Closed-loop simulation: a polarization scrambler at the input, an
//! acquisition clock, Jacobian rate control with actuation latency, and
//! full-rate trace capture.
//!
//! One simulation steps `duration × sample_rate` times. Every sample draws a
//! fresh input state, propagates it through the chain, and records the
//! output; once the controller is active, every `control_decimation`-th
//! sample also evaluates the Jacobian, runs the configured solver on the
//! task-projected error, and enqueues the update into a delay line so that
//! an update computed at sample `k` lands on the control vector at sample
//! `k + delay_samples + 1`.

use std::collections::VecDeque;

use nalgebra::Vector3;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Error;
use crate::jacobian::{analytic_jacobian, project_task, TaskProjection};
use crate::solvers::{SolverConfig, SolverMethod};
use crate::stokes::{rodrigues, AxisVector, ControlVector, DpcChain, StokesVector};
use crate::Result;

/// Default lock threshold on the output error norm.
pub const DEFAULT_LOCK_TOLERANCE: f64 = 0.02;

/// The input-side disturbance: a constant-rate rotation about S₃ plus a
/// seeded Gaussian random walk about a perturbation axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ScramblerConfig {
    /// The undisturbed input state.
    pub base_sop: StokesVector,
    /// Drift rate about S₃ in rad/s.
    pub drift_rate: f64,
    /// Axis of the random-walk perturbation.
    pub perturb_axis: AxisVector,
    /// Standard deviation of the per-sample random-walk increment, in rad.
    pub perturb_sigma: f64,
    /// Seed of the random-walk stream; equal seeds give identical inputs.
    pub seed: u64,
}

impl Default for ScramblerConfig {
    fn default() -> Self {
        Self {
            base_sop: StokesVector::new(1.0, 0.0, 0.0).expect("unit basis vector"),
            drift_rate: 0.0,
            perturb_axis: AxisVector::s2(),
            perturb_sigma: 0.01,
            seed: 0,
        }
    }
}

impl ScramblerConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.drift_rate.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "drift rate must be finite, got {}",
                self.drift_rate
            )));
        }
        if !self.perturb_sigma.is_finite() || self.perturb_sigma < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "perturbation sigma must be finite and nonnegative, got {}",
                self.perturb_sigma
            )));
        }
        Ok(())
    }
}

/// The running scrambler: owns the random-walk state.
///
/// `sample(t)` returns
/// `R(perturb_axis, ε) · R(S₃, drift_rate · t) · base_sop`, where `ε` is the
/// random walk *before* this sample's increment — so the first sample at
/// `t = 0` is exactly `base_sop` (up to drift), and the sequence is fully
/// determined by the seed.
#[derive(Debug, Clone)]
pub struct Scrambler {
    cfg: ScramblerConfig,
    rng: ChaCha8Rng,
    walk: f64,
}

impl Scrambler {
    pub fn new(cfg: ScramblerConfig) -> Result<Self> {
        cfg.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(Self {
            cfg,
            rng,
            walk: 0.0,
        })
    }

    pub fn config(&self) -> &ScramblerConfig {
        &self.cfg
    }

    /// Current random-walk angle ε in rad.
    pub fn walk_angle(&self) -> f64 {
        self.walk
    }

    /// The input state for the sample at time `t`, advancing the walk by one
    /// increment afterwards.
    pub fn sample(&mut self, t: f64) -> StokesVector {
        let drifted =
            rodrigues(&AxisVector::s3(), self.cfg.drift_rate * t).apply(&self.cfg.base_sop);
        let sop = rodrigues(&self.cfg.perturb_axis, self.walk).apply(&drifted);
        let step: f64 = self.rng.sample(StandardNormal);
        self.walk += self.cfg.perturb_sigma * step;
        sop
    }
}

/// Everything that defines one closed-loop run except the input disturbance.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    /// Acquisition rate in Hz; the controller also runs on this clock,
    /// thinned by `control_decimation`.
    pub sample_rate: f64,
    /// Actuation latency in seconds, rounded to whole samples internally.
    pub delay: f64,
    /// Time at which the controller switches on.
    pub activation_time: f64,
    /// Total simulated time in seconds.
    pub duration: f64,
    /// The output state the loop steers toward.
    pub target: StokesVector,
    pub chain: DpcChain,
    /// Control vector before activation (and the starting point after).
    pub phi_initial: ControlVector,
    pub solver: SolverConfig,
    /// Output rows the controller acts on; rows outside the task are free.
    pub task: TaskProjection,
    /// Error norm below which the loop counts as locked (summary metric
    /// only; does not influence control).
    pub lock_tolerance: f64,
    /// Evaluate the control law every this many samples (≥ 1).
    pub control_decimation: usize,
}

impl LoopConfig {
    /// A full-task configuration with controller active from `t = 0`:
    /// 50 MHz clock, no latency, 1 ms horizon, zero initial signals, and the
    /// default (pseudo-inverse) solver.
    pub fn new(chain: DpcChain, target: StokesVector) -> Self {
        let m = chain.len();
        Self {
            sample_rate: 5e7,
            delay: 0.0,
            activation_time: 0.0,
            duration: 1e-3,
            target,
            chain,
            phi_initial: ControlVector::zeros(m),
            solver: SolverConfig::default(),
            task: TaskProjection::full(),
            lock_tolerance: DEFAULT_LOCK_TOLERANCE,
            control_decimation: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sample_rate.is_finite() || self.sample_rate <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "sample rate must be positive, got {}",
                self.sample_rate
            )));
        }
        if !self.delay.is_finite() || self.delay < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "delay must be finite and nonnegative, got {}",
                self.delay
            )));
        }
        if !self.duration.is_finite() || self.duration <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if !self.activation_time.is_finite()
            || self.activation_time < 0.0
            || self.activation_time >= self.duration
        {
            return Err(Error::InvalidConfig(format!(
                "activation time must lie in [0, duration), got {}",
                self.activation_time
            )));
        }
        if self.total_samples() == 0 {
            return Err(Error::InvalidConfig(
                "duration × sample rate rounds to zero samples".into(),
            ));
        }
        if self.phi_initial.len() != self.chain.len() {
            return Err(Error::LengthMismatch {
                expected: self.chain.len(),
                got: self.phi_initial.len(),
            });
        }
        self.solver.validate()?;
        if !self.lock_tolerance.is_finite() || self.lock_tolerance <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "lock tolerance must be positive, got {}",
                self.lock_tolerance
            )));
        }
        if self.control_decimation == 0 {
            return Err(Error::InvalidConfig(
                "control decimation must be at least 1".into(),
            ));
        }

        // Structural fit between solver and task shape.
        let k = self.task.dimension();
        let m = self.chain.len();
        match self.solver.method {
            SolverMethod::DirectInverse | SolverMethod::Damped if k != m => Err(Error::NotSquare {
                context: "loop solver",
                rows: k,
                cols: m,
            }),
            SolverMethod::ExtendedJacobian if k >= m => Err(Error::InvalidConfig(format!(
                "extended Jacobian needs fewer task rows than stages, got {k} rows on {m} stages"
            ))),
            _ => Ok(()),
        }
    }

    /// The latency in whole samples: `round(delay × sample_rate)`.
    pub fn delay_samples(&self) -> usize {
        (self.delay * self.sample_rate).round() as usize
    }

    /// Number of simulation steps: `round(duration × sample_rate)`.
    pub fn total_samples(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }

    /// First sample index at which the controller is active.
    pub fn activation_sample(&self) -> usize {
        (self.activation_time * self.sample_rate).round() as usize
    }
}

/// One sample of the simulation trace.
///
/// `nullspace_active` and `sigma2` describe the most recent control
/// evaluation (they hold their value between control samples; before the
/// first control step, `sigma2` is evaluated once at `t = 0` for reference
/// and `nullspace_active` is false).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub s_in: StokesVector,
    pub s_out: StokesVector,
    pub phi: ControlVector,
    /// `‖target − s_out‖` over all three components, whatever the task.
    pub error_norm: f64,
    pub nullspace_active: bool,
    /// Second singular value of the Jacobian — the quantity that governs
    /// two-axis steering authority, since σ₃ = 0 identically.
    pub sigma2: f64,
    pub max_abs_phi: f64,
    /// True when this sample ran the solver and it failed (the update was
    /// held at zero).
    pub solver_failed: bool,
}

/// Aggregate metrics of one run.
///
/// "Locked" means the final stretch of the trace where `error_norm` stays
/// below `lock_tolerance`, starting no earlier than the activation sample;
/// post-lock statistics are empty when the run never locks.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Seconds from activation until the lock stretch begins; `None` if the
    /// error never stays below tolerance.
    pub convergence_time: Option<f64>,
    /// Mean error norm over the locked stretch.
    pub steady_state_error: Option<f64>,
    /// Largest `|φᵢ|` seen anywhere in the run.
    pub max_abs_phi: f64,
    /// Fraction of post-activation samples with the null-space term engaged.
    pub nullspace_duty: f64,
    /// Number of control-law evaluations (including failed ones).
    pub control_steps: usize,
    /// Control evaluations whose solve failed (update held at zero).
    pub solver_failures: usize,
    /// `max|φᵢ|` per post-lock sample, sorted ascending.
    post_lock_max_abs_phi: Vec<f64>,
}

impl RunSummary {
    /// Computes the summary of a full-rate trace under `cfg`'s activation
    /// sample and lock tolerance.
    pub fn from_trace(trace: &[TraceRecord], cfg: &LoopConfig) -> Self {
        let activation = cfg.activation_sample().min(trace.len());

        // Longest suffix with error below tolerance, clamped to start no
        // earlier than activation.
        let mut lock_start = trace.len();
        for (k, rec) in trace.iter().enumerate().rev() {
            if rec.error_norm < cfg.lock_tolerance {
                lock_start = k;
            } else {
                break;
            }
        }
        lock_start = lock_start.max(activation);
        let locked = lock_start < trace.len();

        let (convergence_time, steady_state_error) = if locked {
            let errs = &trace[lock_start..];
            let mean = errs.iter().map(|r| r.error_norm).sum::<f64>() / errs.len() as f64;
            let t_lock = trace[lock_start].t - cfg.activation_time;
            (Some(t_lock.max(0.0)), Some(mean))
        } else {
            (None, None)
        };

        let mut post_lock_max_abs_phi: Vec<f64> = if locked {
            trace[lock_start..].iter().map(|r| r.max_abs_phi).collect()
        } else {
            Vec::new()
        };
        post_lock_max_abs_phi.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite |φ|"));

        let post_activation = trace.len() - activation;
        let nullspace_duty = if post_activation > 0 {
            trace[activation..]
                .iter()
                .filter(|r| r.nullspace_active)
                .count() as f64
                / post_activation as f64
        } else {
            0.0
        };

        let max_abs_phi = trace.iter().map(|r| r.max_abs_phi).fold(0.0_f64, f64::max);
        let solver_failures = trace.iter().filter(|r| r.solver_failed).count();

        let control_steps = if post_activation > 0 {
            post_activation.div_ceil(cfg.control_decimation)
        } else {
            0
        };

        Self {
            convergence_time,
            steady_state_error,
            max_abs_phi,
            nullspace_duty,
            control_steps,
            solver_failures,
            post_lock_max_abs_phi,
        }
    }

    /// Fraction of post-lock samples with `max|φᵢ| ≤ bound`; 0 when the run
    /// never locked.
    pub fn bounded_fraction(&self, bound: f64) -> f64 {
        if self.post_lock_max_abs_phi.is_empty() {
            return 0.0;
        }
        let below = self.post_lock_max_abs_phi.partition_point(|&v| v <= bound);
        below as f64 / self.post_lock_max_abs_phi.len() as f64
    }

    /// Number of samples in the locked stretch.
    pub fn post_lock_samples(&self) -> usize {
        self.post_lock_max_abs_phi.len()
    }
}

/// A completed simulation: the full-rate trace plus its summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub trace: Vec<TraceRecord>,
    pub summary: RunSummary,
}

fn sigma2_of(j: &crate::jacobian::JacobianMatrix) -> f64 {
    // Singular values arrive sorted in descending order.
    crate::svd::jacobi_svd(j.matrix())
        .sigma
        .get(1)
        .copied()
        .unwrap_or(0.0)
}

/// Runs one closed-loop simulation to completion.
///
/// Per sample: apply any delayed updates due now, draw the input, propagate,
/// and record; on the control grid (`k ≥ activation`, every
/// `control_decimation`-th sample) evaluate the Jacobian at the current
/// `(φ, S_in)`, solve for `Δφ` on the task rows, and enqueue it to land
/// `delay_samples + 1` samples later. A failed solve holds the signal (the
/// update is dropped) and is flagged in the trace.
pub fn run(cfg: &LoopConfig, scrambler_cfg: &ScramblerConfig) -> Result<SimulationRun> {
    cfg.validate()?;
    let mut scrambler = Scrambler::new(scrambler_cfg.clone())?;

    let n = cfg.total_samples();
    let activation = cfg.activation_sample();
    let delay = cfg.delay_samples();
    let target = cfg.target.vector();

    let mut phi = cfg.phi_initial.clone();
    let mut pending: VecDeque<(usize, nalgebra::DVector<f64>)> = VecDeque::new();
    let mut trace = Vec::with_capacity(n);
    let mut nullspace_active = false;
    let mut sigma2 = 0.0;

    for k in 0..n {
        while pending.front().is_some_and(|(due, _)| *due <= k) {
            let (_, delta) = pending.pop_front().expect("front exists");
            phi.add(&delta).expect("delay line preserves length");
        }

        let t = k as f64 / cfg.sample_rate;
        let s_in = scrambler.sample(t);
        let pass = cfg.chain.forward(&phi, &s_in)?;
        let s_out = pass.output();
        let error: Vector3<f64> = target - s_out.vector();
        let error_norm = error.norm();

        let mut solver_failed = false;
        let on_grid = k >= activation && (k - activation).is_multiple_of(cfg.control_decimation);
        if on_grid || k == 0 {
            let j = analytic_jacobian(&cfg.chain, &phi, &s_in)?;
            sigma2 = sigma2_of(&j);
            if on_grid {
                let (j_task, ds_task) = project_task(&j, &error, &cfg.task);
                match cfg.solver.solve(&j_task, &ds_task, &phi) {
                    Ok(result) => {
                        nullspace_active = result.nullspace_active;
                        pending.push_back((k + delay + 1, result.delta_phi.as_dvector().clone()));
                    }
                    Err(_) => {
                        solver_failed = true;
                    }
                }
            }
        }

        trace.push(TraceRecord {
            t,
            s_in,
            s_out,
            phi: phi.clone(),
            error_norm,
            nullspace_active,
            sigma2,
            max_abs_phi: phi.max_abs(),
            solver_failed,
        });
    }

    let summary = RunSummary::from_trace(&trace, cfg);
    Ok(SimulationRun { trace, summary })
}
