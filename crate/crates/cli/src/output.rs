//! Output plumbing shared by the subcommands: the CSV series format, JSON
//! report files, and the tolerances the verdicts gate on.
//!
//! All floating-point values are printed with the shortest decimal that
//! round-trips to the same bits, both in CSV (`Display`) and in JSON
//! (serde_json), so byte-identical artifacts mean bit-identical numbers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Context;
use dampwave::diagnostics::DiagnosticsRecord;
use serde::Serialize;

/// Relative tolerance on the discrete energy identity. The identity
/// residuals scale as dt²; the gates assume a step no coarser than
/// resolution 16 at cfl_safety 0.25. Coarser runs fail the conservation
/// verdict rather than certify anything at a drifted tolerance.
pub const ENERGY_IDENTITY_TOL: f64 = 1e-3;
/// Relative tolerance on the auxiliary-field energy identity.
pub const V_IDENTITY_TOL: f64 = 1e-2;
/// Relative tolerance on the weighted-functional identity `de/dt = -F`.
pub const MULTIPLIER_TOL: f64 = 1e-2;
/// Relative Poisson residual the potential quadrature must reach.
pub const POISSON_TOL: f64 = 0.02;
/// Slack factor on the closed-form potential bounds.
pub const BOUND_SLACK: f64 = 0.05;
/// Slack on the duality splitting inequality.
pub const DUALITY_TOL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub status: Status,
    pub detail: String,
}

impl Verdict {
    pub fn gate(ok: bool, detail: impl Into<String>) -> Self {
        Verdict { status: if ok { Status::Pass } else { Status::Fail }, detail: detail.into() }
    }

    pub fn skipped(detail: impl Into<String>) -> Self {
        Verdict { status: Status::Skipped, detail: detail.into() }
    }
}

/// Fixed series.csv header; the row layout is part of the artifact format.
pub const SERIES_COLUMNS: &str =
    "t,E_u,l2_sq,dissipation,energy_identity_residual,support_radius,v_identity_residual,e_t,F_t";

pub fn write_series_csv(path: &Path, records: &[DiagnosticsRecord]) -> anyhow::Result<()> {
    let mut text = String::with_capacity(records.len() * 160 + 128);
    text.push_str(SERIES_COLUMNS);
    text.push('\n');
    for r in records {
        writeln!(
            text,
            "{},{},{},{},{},{},{},{},{}",
            r.t,
            r.e_u,
            r.l2_sq,
            r.dissipation,
            r.energy_identity_residual,
            r.support_radius,
            r.v_identity_residual,
            r.e_t,
            r.f_t
        )
        .expect("write to String");
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .with_context(|| format!("serializing {}", path.display()))?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Quote a CSV field that contains a delimiter, quote, or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Shortest round-trip decimal; empty for absent values.
pub fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
