//! Stokes-space dynamic polarization control.
//!
//! This crate models polarization controllers as cascades of rotations of the
//! Poincaré sphere and provides what is needed to steer them in closed loop:
//!
//! - [`stokes`]: unit Stokes vectors, rotation axes, elemental and Rodrigues
//!   rotations, and multi-stage waveplate chains ([`DpcChain`]).
//! - [`jacobian`]: analytic and finite-difference Jacobians of the chain
//!   output with respect to the control signals, rank and manipulability
//!   diagnostics, null-space bases, and task row projections.
//! - [`solvers`]: rate-control solvers mapping a desired output correction to
//!   a control update — direct inverse, transpose, damped and regularized
//!   least squares, SVD pseudo-inverse, null-space gradient projection, and
//!   an extended square system for redundant chains.
//! - [`simulator`]: a sample-accurate closed-loop simulator with a seeded
//!   polarization scrambler, actuation latency, and per-run summaries.
//!
//! The output of an `m`-stage chain is `S_out = M_m ⋯ M_1 S_in`, with stage 1
//! nearest the input. Every column of the output Jacobian is orthogonal to
//! `S_out`, so pointing the output is an intrinsically rank-2 task no matter
//! how many stages the chain has; the extra degrees of freedom of longer
//! chains are reachable only through null-space motion, which is what the
//! gradient-projection and extended solvers exploit to keep control signals
//! inside their working range.

pub mod error;
pub mod jacobian;
pub mod simulator;
pub mod solvers;
pub mod stokes;
mod svd;

pub use error::Error;
pub use jacobian::{JacobianDiagnostics, JacobianMatrix, TaskProjection};
pub use simulator::{
    LoopConfig, RunSummary, Scrambler, ScramblerConfig, SimulationRun, TraceRecord,
};
pub use solvers::{SolveResult, SolverConfig, SolverFlags, SolverMethod};
pub use stokes::{
    AxisVector, ControlVector, DpcChain, ForwardPass, RotationMatrix, StokesAxis, StokesVector,
    WaveplateStage,
};

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;
