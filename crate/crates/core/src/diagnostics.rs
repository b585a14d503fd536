//! Scalar functionals of the state: energy, norms, support radius, and the
//! identity residuals the verification suites gate on.
//!
//! All quadratures are plain midpoint sums (`Δx² Σ`) over cell-centered
//! nodes, accumulated sequentially in row-major order so reruns are
//! bit-identical. Elastic quadratic forms are evaluated through the
//! operator pairing `−∫u·Lu`, which sums by parts exactly on the lattice;
//! the boundary ring carries exact zeros by construction.

use crate::model::{LameParams, ScalarField, VectorField2};
use crate::operator::{self, StencilSet};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Relative magnitude below which a node does not count as support.
pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 1e-12;

/// One output-time row of the run series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// Total energy `½∫(|u_t|² + a²|∇u|² + (b²−a²)(div u)²)`.
    #[serde(rename = "E_u")]
    pub e_u: f64,
    /// `∫|u|²`
    pub l2_sq: f64,
    /// `∫₀ᵗ∫V|u_s|²`, endpoint-corrected (see integrator).
    pub dissipation: f64,
    /// `|E_u(t) + dissipation(t) − E_u(0)| / E_u(0)` (absolute when
    /// `E_u(0) = 0`).
    pub energy_identity_residual: f64,
    /// Largest node distance with `|u|` above threshold.
    pub support_radius: f64,
    /// Left side of the time-integral energy balance.
    pub v_energy_lhs: f64,
    /// Balance mismatch relative to the larger side.
    pub v_identity_residual: f64,
    /// Weighted multiplier energy `e(t)`.
    pub e_t: f64,
    /// Weighted multiplier flux `F(t)`.
    #[serde(rename = "F_t")]
    pub f_t: f64,
    /// Per-record `|de/dt + F|`, normalized like the series residual.
    pub multiplier_residual: f64,
}

/// `∫ |u|²` (both components).
pub fn l2_norm_sq(u: &VectorField2) -> f64 {
    let mut s = 0.0;
    for k in 0..u.grid.len() {
        s += u.c1[k] * u.c1[k] + u.c2[k] * u.c2[k];
    }
    s * u.grid.cell_area()
}

/// `∫ u · w`.
pub fn dot(u: &VectorField2, w: &VectorField2) -> Result<f64> {
    u.same_grid(w)?;
    let mut s = 0.0;
    for k in 0..u.grid.len() {
        s += u.c1[k] * w.c1[k] + u.c2[k] * w.c2[k];
    }
    Ok(s * u.grid.cell_area())
}

/// `½(∫|u_t|² − ∫ u · Lu)` where `L` is the discrete elastic operator. The
/// pairing form sums by parts exactly on the lattice, so energy balances
/// close to time-discretization error alone; for smooth fields it matches
/// the continuum elastic energy to O(Δx²). The pairing is nonnegative
/// (symbol argument: each mixed stencil's symbol is dominated by the
/// centered ones it combines).
pub fn total_energy(
    u_t: &VectorField2,
    u: &VectorField2,
    p: &LameParams,
    st: &StencilSet,
) -> Result<f64> {
    u_t.same_grid(u)?;
    p.validate()?;
    let lu = operator::apply_elastic(u, p, st)?;
    let g = u.grid;
    let n = g.n;
    let (mut kin, mut elastic) = (0.0, 0.0);
    for j in 1..n - 1 {
        let row = j * n;
        for i in 1..n - 1 {
            let k = row + i;
            kin += u_t.c1[k] * u_t.c1[k] + u_t.c2[k] * u_t.c2[k];
            elastic -= u.c1[k] * lu.c1[k] + u.c2[k] * lu.c2[k];
        }
    }
    Ok(0.5 * g.cell_area() * (kin + elastic))
}

/// Largest node distance from the origin carrying more than
/// `threshold × max|u|`; 0 for an identically zero field.
pub fn support_radius(u: &VectorField2, threshold: f64) -> f64 {
    let g = u.grid;
    let n = g.n;
    let mut max_sq = 0.0f64;
    for k in 0..g.len() {
        max_sq = max_sq.max(u.c1[k] * u.c1[k] + u.c2[k] * u.c2[k]);
    }
    if max_sq == 0.0 {
        return 0.0;
    }
    let thr_sq = (threshold * threshold) * max_sq;
    let mut rmax = 0.0f64;
    for j in 0..n {
        let row = j * n;
        for i in 0..n {
            let k = row + i;
            if u.c1[k] * u.c1[k] + u.c2[k] * u.c2[k] > thr_sq {
                rmax = rmax.max(g.node_radius(i, j));
            }
        }
    }
    rmax
}

/// Series-level energy balance: max over records of the per-record
/// residual. `relative` is false when the run started from zero energy and
/// the residual had to fall back to an absolute figure.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyIdentityCheck {
    pub max_residual: f64,
    pub relative: bool,
}

pub fn energy_identity_residual(records: &[DiagnosticsRecord]) -> Result<EnergyIdentityCheck> {
    let first = records
        .first()
        .ok_or_else(|| Error::InsufficientSamples("empty series".into()))?;
    let e0 = first.e_u;
    let mut max_res = 0.0f64;
    for r in records {
        let raw = (r.e_u + r.dissipation - e0).abs();
        max_res = max_res.max(if e0 > 0.0 { raw / e0 } else { raw });
    }
    Ok(EnergyIdentityCheck { max_residual: max_res, relative: e0 > 0.0 })
}

/// Both sides of the time-integral energy balance
/// `½∫|u|² + ½(−∫v·Lv) + ∫₀ᵗ∫V|u|² = ½∫|u₀|² + ∫ρ·v`
/// where `v` is the running time integral of `u` and `ρ` the fixed source
/// density of the data. Elastic term through the operator pairing, same as
/// [`total_energy`]. Residual is relative to the larger side.
pub fn v_energy_check(
    u: &VectorField2,
    v: &VectorField2,
    v_dissipation: f64,
    u0_l2_sq: f64,
    rho_dot_v: f64,
    p: &LameParams,
    st: &StencilSet,
) -> Result<(f64, f64, f64)> {
    u.same_grid(v)?;
    let lv = operator::apply_elastic(v, p, st)?;
    let g = v.grid;
    let n = g.n;
    let mut elastic = 0.0;
    for j in 1..n - 1 {
        let row = j * n;
        for i in 1..n - 1 {
            let k = row + i;
            elastic -= v.c1[k] * lv.c1[k] + v.c2[k] * lv.c2[k];
        }
    }
    let lhs = 0.5 * l2_norm_sq(u) + 0.5 * g.cell_area() * elastic + v_dissipation;
    let rhs = 0.5 * u0_l2_sq + rho_dot_v;
    let denom = lhs.abs().max(rhs.abs());
    let residual = if denom > 0.0 { (lhs - rhs).abs() / denom } else { 0.0 };
    Ok((lhs, rhs, residual))
}

/// `∫ V |u|²` for a scalar damping lattice.
pub fn weighted_l2_sq(v_damp: &ScalarField, u: &VectorField2) -> Result<f64> {
    if v_damp.grid != u.grid {
        return Err(Error::GridMismatch("damping lattice does not match the field".into()));
    }
    let mut s = 0.0;
    for k in 0..u.grid.len() {
        s += v_damp.data[k] * (u.c1[k] * u.c1[k] + u.c2[k] * u.c2[k]);
    }
    Ok(s * u.grid.cell_area())
}

/// Fills a field with a single radial bump `A (1 − |x−c|²/r²)⁴` (used by
/// tests and the closed-form oracles below).
#[cfg(test)]
pub(crate) fn bump_field(
    grid: crate::model::Grid2D,
    center: [f64; 2],
    radius: f64,
    amp: [f64; 2],
) -> VectorField2 {
    let mut f = VectorField2::zeros(grid);
    for j in 0..grid.n {
        for i in 0..grid.n {
            let dx = grid.coord(i) - center[0];
            let dy = grid.coord(j) - center[1];
            let s = (dx * dx + dy * dy) / (radius * radius);
            if s < 1.0 {
                let w = (1.0 - s).powi(4);
                let k = grid.idx(i, j);
                f.c1[k] = amp[0] * w;
                f.c2[k] = amp[1] * w;
            }
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Grid2D;
    use std::f64::consts::PI;

    // ∫ (1 − s²/r²)⁸ dx over the disk = π r²/9; the bump's squared L² mass.
    fn bump_l2_sq(radius: f64, amp: [f64; 2]) -> f64 {
        (amp[0] * amp[0] + amp[1] * amp[1]) * PI * radius * radius / 9.0
    }

    #[test]
    fn l2_of_bump_matches_closed_form() {
        let grid = Grid2D::new(256, 1.0 / 64.0).unwrap();
        let u = bump_field(grid, [0.3, -0.2], 0.8, [1.0, 0.5]);
        let want = bump_l2_sq(0.8, [1.0, 0.5]);
        let got = l2_norm_sq(&u);
        assert!(
            (got - want).abs() / want < 1e-3,
            "quadrature {got} vs closed form {want}"
        );
    }

    #[test]
    fn kinetic_energy_of_bump_matches_closed_form() {
        // u = 0, u_t = bump: only the kinetic term contributes.
        let grid = Grid2D::new(256, 1.0 / 64.0).unwrap();
        let p = LameParams { a: 0.6, b: 1.0 };
        let st = StencilSet::new(grid);
        let u = VectorField2::zeros(grid);
        let ut = bump_field(grid, [0.0, 0.0], 0.7, [2.0, -1.0]);
        let want = 0.5 * bump_l2_sq(0.7, [2.0, -1.0]);
        let got = total_energy(&ut, &u, &p, &st).unwrap();
        assert!((got - want).abs() / want < 1e-3);
    }

    #[test]
    fn energy_scales_quadratically() {
        let grid = Grid2D::new(64, 1.0 / 16.0).unwrap();
        let p = LameParams { a: 0.6, b: 1.0 };
        let st = StencilSet::new(grid);
        let u = bump_field(grid, [0.1, 0.0], 0.5, [1.0, 0.3]);
        let ut = bump_field(grid, [0.0, 0.2], 0.4, [0.2, 1.0]);
        let mut u3 = u.clone();
        let mut ut3 = ut.clone();
        for k in 0..grid.len() {
            u3.c1[k] *= 3.0;
            u3.c2[k] *= 3.0;
            ut3.c1[k] *= 3.0;
            ut3.c2[k] *= 3.0;
        }
        let e1 = total_energy(&ut, &u, &p, &st).unwrap();
        let e9 = total_energy(&ut3, &u3, &p, &st).unwrap();
        assert!((e9 - 9.0 * e1).abs() <= 1e-12 * e9.abs().max(1.0));
    }

    #[test]
    fn zero_fields_give_zero_functionals() {
        let grid = Grid2D::new(32, 0.1).unwrap();
        let p = LameParams { a: 0.6, b: 1.0 };
        let st = StencilSet::new(grid);
        let z = VectorField2::zeros(grid);
        assert_eq!(l2_norm_sq(&z), 0.0);
        assert_eq!(total_energy(&z, &z, &p, &st).unwrap(), 0.0);
        assert_eq!(support_radius(&z, DEFAULT_SUPPORT_THRESHOLD), 0.0);
    }

    #[test]
    fn support_radius_sees_the_bump_edge() {
        let grid = Grid2D::new(128, 1.0 / 16.0).unwrap();
        let u = bump_field(grid, [0.0, 0.0], 0.5, [1.0, 0.0]);
        let r = support_radius(&u, DEFAULT_SUPPORT_THRESHOLD);
        assert!(
            (r - 0.5).abs() <= 2.0 * grid.dx,
            "support {r} vs bump radius 0.5 (dx = {})",
            grid.dx
        );
    }

    #[test]
    fn support_radius_threshold_excludes_faint_nodes() {
        let grid = Grid2D::new(64, 0.1).unwrap();
        let mut u = bump_field(grid, [0.0, 0.0], 0.5, [1.0, 0.0]);
        // Plant a node far out, well below the relative threshold.
        let k = grid.idx(60, 60);
        u.c1[k] = 1e-14;
        let r = support_radius(&u, DEFAULT_SUPPORT_THRESHOLD);
        assert!(r < 1.0, "faint node must not count as support, got {r}");
        // Raising it above threshold extends the support.
        u.c1[k] = 1e-6;
        let r2 = support_radius(&u, DEFAULT_SUPPORT_THRESHOLD);
        assert!(r2 > 3.0, "loud node must count, got {r2}");
    }

    #[test]
    fn identity_residual_flags_absolute_mode_for_zero_start() {
        let rec = |t: f64, e: f64, d: f64| DiagnosticsRecord {
            t,
            e_u: e,
            l2_sq: 0.0,
            dissipation: d,
            energy_identity_residual: 0.0,
            support_radius: 0.0,
            v_energy_lhs: 0.0,
            v_identity_residual: 0.0,
            e_t: 0.0,
            f_t: 0.0,
            multiplier_residual: 0.0,
        };
        let zero = vec![rec(0.0, 0.0, 0.0), rec(1.0, 0.0, 0.0)];
        let chk = energy_identity_residual(&zero).unwrap();
        assert!(!chk.relative);
        assert_eq!(chk.max_residual, 0.0);

        let live = vec![rec(0.0, 2.0, 0.0), rec(1.0, 1.5, 0.49)];
        let chk2 = energy_identity_residual(&live).unwrap();
        assert!(chk2.relative);
        assert!((chk2.max_residual - 0.01 / 2.0).abs() < 1e-12);

        assert!(energy_identity_residual(&[]).is_err());
    }

    #[test]
    fn v_energy_check_is_exact_at_start() {
        // v = 0, u = u0: lhs = ½‖u0‖² = rhs exactly.
        let grid = Grid2D::new(64, 0.05).unwrap();
        let p = LameParams { a: 0.6, b: 1.0 };
        let st = StencilSet::new(grid);
        let u0 = bump_field(grid, [0.0, 0.0], 0.6, [1.0, 0.4]);
        let v = VectorField2::zeros(grid);
        let u0_sq = l2_norm_sq(&u0);
        let (lhs, rhs, res) = v_energy_check(&u0, &v, 0.0, u0_sq, 0.0, &p, &st).unwrap();
        assert_eq!(lhs, rhs);
        assert_eq!(res, 0.0);
        assert!((lhs - 0.5 * u0_sq).abs() <= 1e-15 * lhs.abs());
    }
}
