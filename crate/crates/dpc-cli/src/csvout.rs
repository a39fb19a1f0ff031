//! CSV serialization of simulation traces.
//!
//! One row per kept sample: `t,s1,s2,s3,err,phi_1,…,phi_m,ns_active,sigma2`.
//! Floating-point columns carry ten significant digits so a written trace
//! reloads without visible loss; `ns_active` is `0`/`1`.

use crate::error::CliError;
use dpc_core::simulator::TraceRecord;
use std::io::Write;

/// The header row for an `m`-stage chain.
pub fn csv_header(m: usize) -> String {
    let mut header = String::from("t,s1,s2,s3,err");
    for i in 1..=m {
        header.push_str(&format!(",phi_{i}"));
    }
    header.push_str(",ns_active,sigma2");
    header
}

/// Writes the trace, keeping every `decimation`-th record (the first record
/// always, so the row count is `ceil(len / decimation)`).
pub fn write_trace<W: Write>(
    w: &mut W,
    trace: &[TraceRecord],
    m: usize,
    decimation: usize,
) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    writeln!(w, "{}", csv_header(m)).map_err(io)?;
    for record in trace.iter().step_by(decimation.max(1)) {
        let mut row = format!(
            "{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
            record.t,
            record.s_out.s1(),
            record.s_out.s2(),
            record.s_out.s3(),
            record.error_norm,
        );
        for phi in record.phi.as_slice() {
            row.push_str(&format!(",{phi:.9e}"));
        }
        row.push_str(&format!(
            ",{},{:.9e}",
            u8::from(record.nullspace_active),
            record.sigma2,
        ));
        writeln!(w, "{row}").map_err(io)?;
    }
    Ok(())
}
