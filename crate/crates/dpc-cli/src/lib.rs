//! Command-line front end for the `dpc-core` polarization-control simulator.
//!
//! The binary exposes three subcommands:
//!
//! * `dpc simulate <scenario> --out <csv>` — run one closed-loop scenario and
//!   write the decimated trace as CSV, printing a summary to stdout.
//! * `dpc check-jacobian <scenario> --trials <n>` — verify the analytic
//!   Jacobian against finite differences (plus its structural invariants) on
//!   randomized configurations of the scenario's chain.
//! * `dpc sweep <scenario> --param <key=v1,v2,…> --out-dir <dir>` — re-run the
//!   scenario once per parameter value, in parallel, and tabulate summaries.
//!
//! Exit codes: 0 success, 1 property violation, 2 invalid configuration or
//! usage, 3 I/O error.

pub mod commands;
pub mod csvout;
pub mod error;
pub mod scenario;
