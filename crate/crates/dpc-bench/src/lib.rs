//! Shared fixtures for the benchmark suite: a deterministic chain, operating
//! point, and loop configuration so timings are comparable across runs.

use dpc_core::simulator::{LoopConfig, ScramblerConfig};
use dpc_core::solvers::{SolverConfig, SolverMethod};
use dpc_core::stokes::{ControlVector, DpcChain, StokesAxis, StokesVector};
use std::f64::consts::PI;

/// Alternating S1/S3 chain with gain π per stage.
pub fn pi_chain(m: usize) -> DpcChain {
    let axes: Vec<StokesAxis> = (0..m)
        .map(|i| {
            if i % 2 == 0 {
                StokesAxis::S1
            } else {
                StokesAxis::S3
            }
        })
        .collect();
    DpcChain::elemental(&axes, PI).expect("valid chain")
}

/// A fixed, generic operating point (no special symmetry).
pub fn operating_point(m: usize) -> ControlVector {
    ControlVector::from_vec((0..m).map(|i| 0.3 + 0.17 * i as f64).collect())
}

/// A fixed off-axis input state.
pub fn input_state() -> StokesVector {
    StokesVector::new(0.5, 0.1, 0.86).expect("unit state")
}

/// A 1000-sample slice of the delayed tracking regime (decimated control).
pub fn loop_slice_config(m: usize) -> (LoopConfig, ScramblerConfig) {
    let target = StokesVector::new(0.0, 0.6, 0.8).expect("unit target");
    let mut cfg = LoopConfig::new(pi_chain(m), target);
    cfg.sample_rate = 5e7;
    cfg.delay = 1e-6;
    cfg.activation_time = 0.0;
    cfg.duration = 1000.0 / cfg.sample_rate;
    cfg.lock_tolerance = 0.35;
    cfg.control_decimation = 60;
    cfg.solver = SolverConfig::new(SolverMethod::GradientProjection);

    let sc = ScramblerConfig {
        base_sop: StokesVector::new(0.5, 0.0, 0.866_025_403_784_438_6).expect("unit state"),
        drift_rate: 1e5,
        perturb_sigma: 1e-3,
        ..ScramblerConfig::default()
    };
    (cfg, sc)
}
