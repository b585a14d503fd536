//! `sweep` subcommand: cartesian grid over damping ratio `V0/b`, exponent
//! offset `delta`, and lattice resolution. Each cell is a full run in its
//! own subdirectory; summary.csv aggregates the fitted exponents and
//! verdicts. A failing cell is recorded and the sweep continues.

use std::fs;
use std::path::Path;

use anyhow::Context;
use dampwave::model::{Case, DampingProfile, SimConfig};
use rayon::prelude::*;
use serde::Deserialize;

use crate::output::{csv_field, opt_f64};
use crate::runcmd;
use crate::CommonArgs;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSpec {
    /// Complete run config; each cell replaces its damping profile, case,
    /// delta, and resolution.
    base: SimConfig,
    /// Damping strength as a multiple of the wave speed `b`; 0 disables
    /// damping. The decay case is inferred from the ratio.
    v0_over_b: Vec<f64>,
    delta: Vec<f64>,
    resolution: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Cell {
    ratio: f64,
    delta: f64,
    resolution: f64,
}

const SUMMARY_COLUMNS: &str =
    "dir,v0_over_b,delta,resolution,case,status,envelope_exponent,fitted_exponent,verdict";

fn cell_config(base: &SimConfig, cell: &Cell) -> dampwave::Result<SimConfig> {
    let mut cfg = base.clone();
    cfg.resolution = cell.resolution;
    cfg.delta = Some(cell.delta);
    let b = cfg.lame.b;
    if cell.ratio == 0.0 {
        cfg.case = Case::Undamped;
        cfg.damping = DampingProfile::Zero;
    } else {
        cfg.damping = DampingProfile::Critical { v0: cell.ratio * b };
        cfg.case = if cell.ratio > 2.0 {
            Case::StrongDamping
        } else if cell.ratio > 1.0 {
            Case::IntermediateDamping
        } else {
            Case::WeakDamping
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Row {
    dir: String,
    cell: Cell,
    case_name: String,
    status: String,
    envelope_exponent: Option<f64>,
    fitted_exponent: Option<f64>,
    verdict: String,
}

fn run_cell(base: &SimConfig, cell: Cell, out_root: &Path) -> Row {
    let dir =
        format!("v0b-{}_delta-{}_res-{}", cell.ratio, cell.delta, cell.resolution);
    let mut row = Row {
        dir: dir.clone(),
        cell,
        case_name: String::new(),
        status: "ok".to_string(),
        envelope_exponent: None,
        fitted_exponent: None,
        verdict: String::new(),
    };
    let cfg = match cell_config(base, &cell) {
        Ok(cfg) => cfg,
        Err(e) => {
            row.status = format!("error: {e}");
            return row;
        }
    };
    row.case_name = format!("{:?}", cfg.case);
    row.envelope_exponent = match cfg.case {
        Case::StrongDamping => Some(2.0),
        Case::IntermediateDamping => Some(cell.ratio - cell.delta),
        Case::WeakDamping | Case::Undamped => None,
    };
    match runcmd::execute_run(&cfg, &out_root.join(&dir)) {
        Ok(summary) => {
            row.verdict = if summary.all_pass { "pass" } else { "fail" }.to_string();
            row.fitted_exponent = summary.rate.and_then(|r| r.fitted_exponent);
        }
        Err(e) => row.status = format!("error: {e:#}"),
    }
    row
}

pub fn cmd_sweep(args: &CommonArgs) -> anyhow::Result<bool> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut spec: SweepSpec =
        serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("sweep spec JSON: {e}"))?;
    if let Some(cap) = args.memory_cap_mb {
        spec.base.memory_cap_mb = cap;
    }
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;

    let mut cells = Vec::new();
    for &ratio in &spec.v0_over_b {
        for &delta in &spec.delta {
            for &resolution in &spec.resolution {
                cells.push(Cell { ratio, delta, resolution });
            }
        }
    }

    let rows: Vec<Row> =
        cells.par_iter().map(|&cell| run_cell(&spec.base, cell, &args.out)).collect();

    let mut text = String::from(SUMMARY_COLUMNS);
    text.push('\n');
    for row in &rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            csv_field(&row.dir),
            row.cell.ratio,
            row.cell.delta,
            row.cell.resolution,
            row.case_name,
            csv_field(&row.status),
            opt_f64(row.envelope_exponent),
            opt_f64(row.fitted_exponent),
            row.verdict,
        ));
    }
    let summary_path = args.out.join("summary.csv");
    fs::write(&summary_path, text)
        .with_context(|| format!("writing {}", summary_path.display()))?;

    for row in &rows {
        let outcome = if row.status == "ok" { row.verdict.as_str() } else { row.status.as_str() };
        println!("cell {}: {outcome}", row.dir);
    }
    println!("sweep: {} cells, summary at {}", rows.len(), summary_path.display());
    Ok(rows.iter().all(|r| r.status == "ok" && r.verdict == "pass"))
}
