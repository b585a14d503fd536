//! Newton-potential verification suite on a small lattice holding just the
//! data support. Shares nothing with time stepping except the initial data,
//! so it runs standalone (`verify-potential`) or alongside a run.

use std::fs;

use anyhow::Context;
use dampwave::model::{sample_damping, sample_initial_data, Grid2D, SimConfig};
use dampwave::multiplier::geometric_times;
use dampwave::potential::{
    disk_growth_suite, far_field_bound, newton_potential, poisson_residual, PoissonResidual,
    SourceDensity,
};

use crate::output::{self, BOUND_SLACK, POISSON_TOL};
use crate::CommonArgs;

/// Minimum refinement order of the Poisson residual under dx-halving.
const ORDER_FLOOR: f64 = 1.7;

pub struct PotentialArtifacts {
    /// Source density on the suite lattice, kept for the duality check.
    pub src: SourceDensity,
    pub report: serde_json::Value,
    pub pass: bool,
    pub detail: String,
}

/// Lattice sized to the data support plus margin at the config resolution.
/// The margin keeps the support plus a stencil ring interior, which the
/// residual check requires.
fn support_grid(cfg: &SimConfig, resolution: f64) -> dampwave::Result<Grid2D> {
    let dx = 1.0 / resolution;
    let want = cfg.init.l + cfg.grid_margin.max(8.0 * dx).max(0.5);
    let n = ((2.0 * want / dx).ceil() as usize).max(16);
    Grid2D::new(n, dx)
}

fn residual_at(cfg: &SimConfig, resolution: f64) -> anyhow::Result<(SourceDensity, PoissonResidual)> {
    let grid = support_grid(cfg, resolution)?;
    let init = sample_initial_data(&cfg.init, grid)?;
    let v_damp = sample_damping(&cfg.damping, grid)?;
    let src = SourceDensity::from_initial_data(&init.u0, &init.u1, &v_damp)?;
    let field = newton_potential(&src, grid)?;
    let poisson = poisson_residual(&field, &src)?;
    Ok((src, poisson))
}

/// Run the full suite: Poisson residual of the lattice potential, the
/// far-field gradient bound, and the expanding-disk growth envelope. With
/// `refine` a second residual at doubled resolution yields the convergence
/// order.
pub fn run_suite(cfg: &SimConfig, refine: bool) -> anyhow::Result<PotentialArtifacts> {
    let (src, poisson) = residual_at(cfg, cfg.resolution)?;
    let far = far_field_bound(&src, 16.0 * cfg.init.l, BOUND_SLACK)?;
    let growth = disk_growth_suite(&src, cfg.lame.b, &geometric_times(cfg.t_end, 9), BOUND_SLACK)?;

    let poisson_ok = poisson.zero_source || poisson.relative.unwrap_or(f64::INFINITY) <= POISSON_TOL;
    let mut pass = poisson_ok && far.pass && growth.all_pass;

    let mut refined: Option<PoissonResidual> = None;
    let mut order: Option<f64> = None;
    if refine && !src.is_zero() {
        let (_, fine) = residual_at(cfg, 2.0 * cfg.resolution)?;
        let o = (poisson.relative.unwrap_or(0.0) / fine.relative.unwrap_or(f64::MIN_POSITIVE))
            .log2();
        pass = pass && o >= ORDER_FLOOR;
        refined = Some(fine);
        order = Some(o);
    }

    let detail = if poisson.zero_source {
        "zero source: potential vanishes identically, bounds hold trivially".to_string()
    } else {
        format!(
            "poisson residual {:.3e} (tol {POISSON_TOL}), far-field {}, growth {}{}",
            poisson.relative.unwrap_or(0.0),
            if far.pass { "pass" } else { "fail" },
            if growth.all_pass { "pass" } else { "fail" },
            order.map(|o| format!(", refinement order {o:.2}")).unwrap_or_default(),
        )
    };
    let report = serde_json::json!({
        "resolution": cfg.resolution,
        "poisson": poisson,
        "poisson_refined": refined,
        "refinement_order": order,
        "far_field": far,
        "growth": growth,
        "pass": pass,
    });
    Ok(PotentialArtifacts { src, report, pass, detail })
}

pub fn cmd_verify_potential(args: &CommonArgs) -> anyhow::Result<bool> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let cfg = SimConfig::from_json(&text)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let art = run_suite(&cfg, true)?;
    output::write_json(&args.out.join("potential.json"), &art.report)?;
    println!("potential: {}: {}", if art.pass { "pass" } else { "fail" }, art.detail);
    Ok(art.pass)
}
