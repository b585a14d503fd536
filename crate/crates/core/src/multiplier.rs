//! Time-weighted energy functionals.
//!
//! Testing the system against `f(t) u_t + g(t) u` yields a weighted energy
//!
//! ```text
//!   e(t) = ∫ f/2 (|u_t|² + a²|∇u|² + (b²−a²)(div u)²)
//!        + g u·u_t + (V g − g_t) |u|²/2 dx
//! ```
//!
//! and a flux
//!
//! ```text
//!   F(t) = ½∫ (2Vf − f_t − 2g)|u_t|²
//!        + (2g − f_t)(a²|∇u|² + (b²−a²)(div u)²) dx
//!        + ½∫ (g_tt − V g_t)|u|² dx
//! ```
//!
//! with `de/dt + F = 0` along solutions. When the bracket weights are
//! nonnegative on the expanding region `Ω(t) = {|x| ≤ L + bt}` that carries
//! the solution, `F ≥ (sign-controlled terms)` and `e` decays; the two
//! weight families below realize that for strong (`V0 > 2b`) and
//! intermediate (`b < V0 ≤ 2b`) damping strength. The report machinery
//! locates the threshold time `t0` from which the sign conditions hold on
//! sampled nodes and extracts the sharp empirical constants.

use crate::diagnostics::DiagnosticsRecord;
use crate::integrator::LevelSums;
use crate::model::{Case, LameParams, ScalarField, VectorField2};
use crate::operator::{self, StencilSet};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Number of geometric condition-sample times used by default.
pub const DEFAULT_CONDITION_SAMPLES: usize = 32;

/// The two closed-form weight families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum WeightFamily {
    /// `f = (1+t)²`, `g = 1+t`. The working pair for strong damping; also
    /// the display default for cases without a proven pair.
    Quadratic,
    /// `f = (1+t)^p`, `g = (p/2)(1+t)^{p−1}` with `p = ratio − delta`,
    /// `ratio = V0/b`. Requires `ratio > 1` and `delta ∈ (0, ratio − 1)`.
    Fractional { ratio: f64, delta: f64 },
}

/// A chosen weight family with the run parameters it was built from.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WeightPair {
    pub case: Case,
    pub v0: f64,
    pub b: f64,
    pub delta: Option<f64>,
    /// Configured threshold-time hint (reports locate their own).
    pub t0: f64,
    pub family: WeightFamily,
}

/// Pointwise weight values at a fixed time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub f: f64,
    pub f_t: f64,
    pub g: f64,
    pub g_t: f64,
    pub g_tt: f64,
}

impl WeightPair {
    pub fn for_case(case: Case, v0: f64, b: f64, delta: Option<f64>, t0: f64) -> Result<Self> {
        if !(b > 0.0) {
            return Err(Error::NonPositive(format!("wave speed b must be positive, got {b}")));
        }
        let family = match case {
            Case::IntermediateDamping => {
                let ratio = v0 / b;
                let d = delta.ok_or_else(|| {
                    Error::config("intermediate damping requires delta")
                })?;
                if !(d > 0.0 && d < ratio - 1.0) {
                    return Err(Error::config(format!(
                        "delta must lie in (0, V0/b - 1) = (0, {}), got {d}",
                        ratio - 1.0
                    )));
                }
                WeightFamily::Fractional { ratio, delta: d }
            }
            _ => WeightFamily::Quadratic,
        };
        Ok(WeightPair { case, v0, b, delta, t0, family })
    }

    /// Closed-form weight values; `t ≥ 0`.
    pub fn eval_weights(&self, t: f64) -> Weights {
        match self.family {
            WeightFamily::Quadratic => Weights {
                f: (1.0 + t) * (1.0 + t),
                f_t: 2.0 * (1.0 + t),
                g: 1.0 + t,
                g_t: 1.0,
                g_tt: 0.0,
            },
            WeightFamily::Fractional { ratio, delta } => {
                let p = ratio - delta;
                let s = 1.0 + t;
                Weights {
                    f: s.powf(p),
                    f_t: p * s.powf(p - 1.0),
                    g: 0.5 * p * s.powf(p - 1.0),
                    g_t: 0.5 * p * (p - 1.0) * s.powf(p - 2.0),
                    g_tt: 0.5 * p * (p - 1.0) * (p - 2.0) * s.powf(p - 3.0),
                }
            }
        }
    }

    /// The nodewise lower bound on `V` that condition (the first bracket
    /// being nonnegative) demands at time `t`: `V ≥ p/(1+t)` where `p` is
    /// the leading exponent of `f`.
    pub fn damping_demand(&self, t: f64) -> f64 {
        let p = match self.family {
            WeightFamily::Quadratic => 2.0,
            WeightFamily::Fractional { ratio, delta } => ratio - delta,
        };
        p / (1.0 + t)
    }
}

/// `e(t)` from the fused level sums (weights applied to precomputed
/// quadratures; exact same value as [`e_functional`]).
pub fn e_from_sums(w: &Weights, s: &LevelSums) -> f64 {
    0.5 * w.f * (s.kin + s.elastic) + w.g * s.u_dot_ut
        + 0.5 * (w.g * s.v_l2 - w.g_t * s.l2_sq)
}

/// `F(t)` from the fused level sums.
pub fn f_from_sums(w: &Weights, s: &LevelSums) -> f64 {
    w.f * s.v_kin - 0.5 * (w.f_t + 2.0 * w.g) * s.kin
        + 0.5 * (2.0 * w.g - w.f_t) * s.elastic
        + 0.5 * (w.g_tt * s.l2_sq - w.g_t * s.v_l2)
}

fn quadrature_sums(
    u: &VectorField2,
    u_t: &VectorField2,
    v_damp: &ScalarField,
    p: &LameParams,
    st: &StencilSet,
) -> Result<LevelSums> {
    u.same_grid(u_t)?;
    if v_damp.grid != u.grid {
        return Err(Error::GridMismatch("damping lattice does not match the fields".into()));
    }
    let lu = operator::apply_elastic(u, p, st)?;
    let g = u.grid;
    let n = g.n;
    let mut s = LevelSums::default();
    for j in 1..n - 1 {
        let row = j * n;
        for i in 1..n - 1 {
            let k = row + i;
            let kin = u_t.c1[k] * u_t.c1[k] + u_t.c2[k] * u_t.c2[k];
            let m2 = u.c1[k] * u.c1[k] + u.c2[k] * u.c2[k];
            let udot = u.c1[k] * u_t.c1[k] + u.c2[k] * u_t.c2[k];
            s.kin += kin;
            s.elastic -= u.c1[k] * lu.c1[k] + u.c2[k] * lu.c2[k];
            s.u_dot_ut += udot;
            s.abs_u_dot_ut += udot.abs();
            s.l2_sq += m2;
            s.v_kin += v_damp.data[k] * kin;
            s.v_l2 += v_damp.data[k] * m2;
        }
    }
    let area = g.cell_area();
    s.kin *= area;
    s.elastic *= area;
    s.u_dot_ut *= area;
    s.abs_u_dot_ut *= area;
    s.l2_sq *= area;
    s.v_kin *= area;
    s.v_l2 *= area;
    Ok(s)
}

/// Direct quadrature of the weighted energy `e(t)` for explicit fields.
pub fn e_functional(
    u: &VectorField2,
    u_t: &VectorField2,
    v_damp: &ScalarField,
    w: &Weights,
    p: &LameParams,
    st: &StencilSet,
) -> Result<f64> {
    Ok(e_from_sums(w, &quadrature_sums(u, u_t, v_damp, p, st)?))
}

/// Direct quadrature of the weighted flux `F(t)` for explicit fields.
pub fn f_functional(
    u: &VectorField2,
    u_t: &VectorField2,
    v_damp: &ScalarField,
    w: &Weights,
    p: &LameParams,
    st: &StencilSet,
) -> Result<f64> {
    Ok(f_from_sums(w, &quadrature_sums(u, u_t, v_damp, p, st)?))
}

/// Max over interior records of `|de/dt + F|` with centered differencing,
/// normalized by `max|F| + max|e|/T`. Zero series give 0; fewer than three
/// records cannot be differenced.
pub fn identity_residual(records: &[DiagnosticsRecord]) -> Result<f64> {
    if records.len() < 3 {
        return Err(Error::InsufficientSamples(format!(
            "centered differencing needs at least 3 records, got {}",
            records.len()
        )));
    }
    let tspan = records.last().unwrap().t - records[0].t;
    let mut max_e = 0.0f64;
    let mut max_f = 0.0f64;
    for r in records {
        max_e = max_e.max(r.e_t.abs());
        max_f = max_f.max(r.f_t.abs());
    }
    let denom = max_f + if tspan > 0.0 { max_e / tspan } else { 0.0 };
    if denom == 0.0 {
        return Ok(0.0);
    }
    let mut worst = 0.0f64;
    for m in 1..records.len() - 1 {
        let dt2 = records[m + 1].t - records[m - 1].t;
        if dt2 <= 0.0 {
            return Err(Error::InsufficientSamples("record times must increase".into()));
        }
        let de = (records[m + 1].e_t - records[m - 1].e_t) / dt2;
        worst = worst.max((de + records[m].f_t).abs());
    }
    Ok(worst / denom)
}

/// Empirical sharp constants extracted from the condition scan.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MultiplierConstants {
    /// `sup (1+t)(−g_tt)⁺`
    pub c1: f64,
    /// `sup g_t`
    pub c2: f64,
    /// `sup over sampled region nodes of (g_t − V g)⁺`
    pub c3: f64,
    /// Threshold functional at the located `t0` (0 until evaluated against
    /// a snapshot; see [`c_of_t0`]).
    pub c_t0: f64,
    /// `1/max{1+L, b}` exactly.
    pub c_star: f64,
    /// Located threshold time.
    pub t0: f64,
}

/// One sampled time of the condition scan.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConditionSample {
    pub t: f64,
    /// `min V` over nodes with `|x| ≤ L + bt`.
    pub min_v_on_region: f64,
    /// Demanded lower bound `p/(1+t)`.
    pub demand: f64,
    /// First sign bracket `2fV − f_t − 2g ≥ 0` on the region.
    pub holds_i: bool,
    /// Second sign bracket `2g − f_t ≥ 0`.
    pub holds_ii: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionReport {
    pub family: WeightFamily,
    pub samples: Vec<ConditionSample>,
    /// First sample time from which both sign brackets hold at every later
    /// sample; `found` is false when no such time exists in the scan.
    pub t0: f64,
    pub found: bool,
    pub constants: MultiplierConstants,
}

/// Geometric sample times: `t_j = (1+T)^{j/(m−1)} − 1`, so `t_0 = 0` and
/// `t_{m−1} = T`, equally spaced in `log(1+t)`.
pub fn geometric_times(t_end: f64, m: usize) -> Vec<f64> {
    assert!(m >= 2 && t_end > 0.0);
    (0..m)
        .map(|j| (1.0 + t_end).powf(j as f64 / (m - 1) as f64) - 1.0)
        .collect()
}

/// Scan the sign conditions over sampled times and region nodes, locate the
/// threshold time, and extract the empirical constants. `l` is the data
/// support radius defining the region `|x| ≤ l + b t`.
pub fn check_conditions(
    pair: &WeightPair,
    v_damp: &ScalarField,
    l: f64,
    t_samples: &[f64],
) -> Result<ConditionReport> {
    if t_samples.len() < 2 {
        return Err(Error::InsufficientSamples("condition scan needs at least 2 times".into()));
    }
    if !(l > 0.0) {
        return Err(Error::NonPositive(format!("support radius must be positive, got {l}")));
    }
    let grid = v_damp.grid;
    let n = grid.n;
    let mut samples = Vec::with_capacity(t_samples.len());
    let (mut c1, mut c2, mut c3) = (0.0f64, f64::NEG_INFINITY, 0.0f64);
    for &t in t_samples {
        let w = pair.eval_weights(t);
        let reach = l + pair.b * t;
        let mut min_v = f64::INFINITY;
        for j in 0..n {
            let row = j * n;
            for i in 0..n {
                if grid.node_radius(i, j) <= reach {
                    min_v = min_v.min(v_damp.data[row + i]);
                }
            }
        }
        if !min_v.is_finite() {
            // Region smaller than one cell: fall back to the center node.
            let mid = n / 2;
            min_v = v_damp.data[grid.idx(mid, mid)];
        }
        let bracket = 2.0 * w.f * min_v - w.f_t - 2.0 * w.g;
        let scale_i = 2.0 * w.f * min_v + w.f_t.abs() + 2.0 * w.g.abs();
        let holds_i = bracket >= -1e-12 * scale_i;
        let bracket_ii = 2.0 * w.g - w.f_t;
        let holds_ii = bracket_ii >= -1e-12 * (2.0 * w.g.abs() + w.f_t.abs());
        c1 = c1.max((1.0 + t) * (-w.g_tt).max(0.0));
        c2 = c2.max(w.g_t);
        c3 = c3.max((w.g_t - min_v * w.g).max(0.0));
        samples.push(ConditionSample {
            t,
            min_v_on_region: min_v,
            demand: pair.damping_demand(t),
            holds_i,
            holds_ii,
        });
    }
    // First sample from which every later sample holds.
    let mut t0_idx = None;
    for start in 0..samples.len() {
        if samples[start..].iter().all(|s| s.holds_i && s.holds_ii) {
            t0_idx = Some(start);
            break;
        }
    }
    let (t0, found) = match t0_idx {
        Some(i) => (samples[i].t, true),
        None => (f64::NAN, false),
    };
    let c_star = 1.0 / (1.0 + l).max(pair.b);
    Ok(ConditionReport {
        family: pair.family,
        samples,
        t0,
        found,
        constants: MultiplierConstants { c1, c2, c3, c_t0: 0.0, c_star, t0 },
    })
}

/// Threshold functional at a snapshot time:
/// `f E_u + g ∫|u·u_t| + ½∫|g_t − V g| |u|²`.
pub fn c_of_t0(
    w: &Weights,
    u: &VectorField2,
    u_t: &VectorField2,
    v_damp: &ScalarField,
    p: &LameParams,
    st: &StencilSet,
) -> Result<f64> {
    let e_u = crate::diagnostics::total_energy(u_t, u, p, st)?;
    if v_damp.grid != u.grid {
        return Err(Error::GridMismatch("damping lattice does not match the fields".into()));
    }
    let mut abs_udot = 0.0;
    let mut weighted_m2 = 0.0;
    for k in 0..u.grid.len() {
        abs_udot += (u.c1[k] * u_t.c1[k] + u.c2[k] * u_t.c2[k]).abs();
        weighted_m2 += (w.g_t - v_damp.data[k] * w.g).abs()
            * (u.c1[k] * u.c1[k] + u.c2[k] * u.c2[k]);
    }
    let area = u.grid.cell_area();
    Ok(w.f * e_u + w.g * abs_udot * area + 0.5 * weighted_m2 * area)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics;
    use crate::model::{DampingProfile, Grid2D, sample_damping};

    fn quadratic() -> WeightPair {
        WeightPair::for_case(Case::StrongDamping, 4.0, 1.0, None, 0.0).unwrap()
    }

    fn fractional() -> WeightPair {
        WeightPair::for_case(Case::IntermediateDamping, 1.5, 1.0, Some(0.1), 0.0).unwrap()
    }

    #[test]
    fn weight_values_at_known_times() {
        let q = quadratic().eval_weights(0.0);
        assert_eq!((q.f, q.g, q.f_t, q.g_t, q.g_tt), (1.0, 1.0, 2.0, 1.0, 0.0));
        let q3 = quadratic().eval_weights(3.0);
        assert_eq!((q3.f, q3.g), (16.0, 4.0));
        let fr = fractional().eval_weights(0.0);
        assert_eq!(fr.f, 1.0);
        assert!((fr.g - 0.7).abs() < 1e-15);
    }

    #[test]
    fn second_bracket_vanishes_identically_for_both_families() {
        for pair in [quadratic(), fractional()] {
            for &t in &[0.0, 0.5, 3.0, 17.0, 200.0] {
                let w = pair.eval_weights(t);
                assert!(
                    (2.0 * w.g - w.f_t).abs() <= 1e-14 * w.f_t.abs().max(1.0),
                    "2g - f_t = {} at t = {t}",
                    2.0 * w.g - w.f_t
                );
            }
        }
    }

    #[test]
    fn derivative_evaluators_match_finite_differences() {
        let h = 1e-5;
        for pair in [quadratic(), fractional()] {
            for &t in &[0.2, 1.0, 7.0, 50.0] {
                let w = pair.eval_weights(t);
                let wp = pair.eval_weights(t + h);
                let wm = pair.eval_weights(t - h);
                let fd_f = (wp.f - wm.f) / (2.0 * h);
                let fd_g = (wp.g - wm.g) / (2.0 * h);
                let fd_gt = (wp.g_t - wm.g_t) / (2.0 * h);
                assert!((fd_f - w.f_t).abs() <= 1e-6 * w.f_t.abs().max(1.0));
                assert!((fd_g - w.g_t).abs() <= 1e-6 * w.g_t.abs().max(1.0));
                assert!((fd_gt - w.g_tt).abs() <= 1e-6 * w.g_tt.abs().max(1e-3));
            }
        }
    }

    #[test]
    fn delta_outside_open_interval_rejected() {
        for bad in [0.0, -0.1, 0.5, 0.7] {
            assert!(
                WeightPair::for_case(Case::IntermediateDamping, 1.5, 1.0, Some(bad), 0.0).is_err(),
                "delta {bad} must be rejected for ratio 1.5"
            );
        }
        assert!(WeightPair::for_case(Case::IntermediateDamping, 1.5, 1.0, None, 0.0).is_err());
        assert!(WeightPair::for_case(Case::IntermediateDamping, 1.5, 1.0, Some(0.49), 0.0).is_ok());
    }

    #[test]
    fn functionals_vanish_on_zero_state_and_scale_quadratically() {
        let grid = Grid2D::new(48, 0.1).unwrap();
        let p = LameParams { a: 0.6, b: 1.0 };
        let st = StencilSet::new(grid);
        let v = sample_damping(&DampingProfile::Critical { v0: 4.0 }, grid).unwrap();
        let w = quadratic().eval_weights(0.7);
        let z = VectorField2::zeros(grid);
        assert_eq!(e_functional(&z, &z, &v, &w, &p, &st).unwrap(), 0.0);
        assert_eq!(f_functional(&z, &z, &v, &w, &p, &st).unwrap(), 0.0);

        let u = diagnostics::bump_field(grid, [0.2, 0.0], 0.9, [1.0, -0.4]);
        let ut = diagnostics::bump_field(grid, [0.0, 0.1], 0.7, [0.5, 1.0]);
        let mut u2 = u.clone();
        let mut ut2 = ut.clone();
        for k in 0..grid.len() {
            u2.c1[k] *= -2.0;
            u2.c2[k] *= -2.0;
            ut2.c1[k] *= -2.0;
            ut2.c2[k] *= -2.0;
        }
        let e1 = e_functional(&u, &ut, &v, &w, &p, &st).unwrap();
        let e4 = e_functional(&u2, &ut2, &v, &w, &p, &st).unwrap();
        assert!((e4 - 4.0 * e1).abs() <= 1e-12 * e4.abs().max(1.0));
        let f1 = f_functional(&u, &ut, &v, &w, &p, &st).unwrap();
        let f4 = f_functional(&u2, &ut2, &v, &w, &p, &st).unwrap();
        assert!((f4 - 4.0 * f1).abs() <= 1e-12 * f4.abs().max(1.0));
    }

    #[test]
    fn constant_unit_weights_reduce_e_to_plain_energy() {
        // f = 1, g = 0, g_t = 0 turns e(t) into E_u.
        let grid = Grid2D::new(48, 0.1).unwrap();
        let p = LameParams { a: 0.6, b: 1.0 };
        let st = StencilSet::new(grid);
        let v = sample_damping(&DampingProfile::Zero, grid).unwrap();
        let w = Weights { f: 1.0, f_t: 0.0, g: 0.0, g_t: 0.0, g_tt: 0.0 };
        let u = diagnostics::bump_field(grid, [0.0, 0.0], 0.8, [1.0, 0.3]);
        let ut = diagnostics::bump_field(grid, [0.1, 0.0], 0.6, [0.2, -1.0]);
        let e = e_functional(&u, &ut, &v, &w, &p, &st).unwrap();
        let e_u = diagnostics::total_energy(&ut, &u, &p, &st).unwrap();
        assert!((e - e_u).abs() <= 1e-13 * e_u);
        // And F vanishes identically for these weights when V = 0.
        let f = f_functional(&u, &ut, &v, &w, &p, &st).unwrap();
        assert_eq!(f, 0.0);
    }

    fn synthetic_series(n: usize, t_end: f64, corrupt: f64) -> Vec<DiagnosticsRecord> {
        // e(t) = sin t, F(t) = -cos t satisfies de/dt + F = 0 exactly.
        (0..n)
            .map(|m| {
                let t = t_end * m as f64 / (n - 1) as f64;
                DiagnosticsRecord {
                    t,
                    e_u: 0.0,
                    l2_sq: 0.0,
                    dissipation: 0.0,
                    energy_identity_residual: 0.0,
                    support_radius: 0.0,
                    v_energy_lhs: 0.0,
                    v_identity_residual: 0.0,
                    e_t: t.sin(),
                    f_t: -t.cos() * corrupt,
                    multiplier_residual: 0.0,
                }
            })
            .collect()
    }

    #[test]
    fn identity_residual_detects_a_one_percent_fault() {
        let clean = identity_residual(&synthetic_series(2001, 10.0, 1.0)).unwrap();
        let faulty = identity_residual(&synthetic_series(2001, 10.0, 1.01)).unwrap();
        assert!(clean < 1e-4, "clean residual {clean}");
        assert!(faulty > 1e-3, "fault must surface, got {faulty}");
        assert!(faulty > 20.0 * clean);
    }

    #[test]
    fn identity_residual_edge_cases() {
        assert!(identity_residual(&synthetic_series(2, 1.0, 1.0)).is_err());
        let zeros = synthetic_series(5, 1.0, 0.0)
            .into_iter()
            .map(|mut r| {
                r.e_t = 0.0;
                r.f_t = 0.0;
                r
            })
            .collect::<Vec<_>>();
        assert_eq!(identity_residual(&zeros).unwrap(), 0.0);
    }

    #[test]
    fn geometric_times_span_the_interval() {
        let ts = geometric_times(40.0, 32);
        assert_eq!(ts.len(), 32);
        assert_eq!(ts[0], 0.0);
        assert!((ts[31] - 40.0).abs() < 1e-9);
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn strong_damping_conditions_hold_from_time_zero() {
        // V0 = 4, b = 1, support 1: the demand 2/(1+t) is met on the whole
        // region already at t = 0, with margin.
        let grid = Grid2D::new(192, 1.0 / 16.0).unwrap();
        let v = sample_damping(&DampingProfile::Critical { v0: 4.0 }, grid).unwrap();
        let pair = quadratic();
        let report =
            check_conditions(&pair, &v, 1.0, &geometric_times(10.0, 32)).unwrap();
        assert!(report.found);
        assert_eq!(report.t0, 0.0);
        assert!(report.samples.iter().all(|s| s.holds_i && s.holds_ii));
        assert_eq!(report.constants.c1, 0.0);
        assert_eq!(report.constants.c2, 1.0);
        assert_eq!(report.constants.c_star, 0.5);
    }

    #[test]
    fn intermediate_damping_threshold_matches_hand_bound() {
        // V0 = 1.5, b = 1, delta = 0.1: the continuum demand
        // 1.5/sqrt(1+(1+t)^2) >= 1.4/(1+t) first holds at 1+t = sqrt(1.96/0.29),
        // i.e. t ~ 1.60. The located sample must bracket that.
        let grid = Grid2D::new(448, 1.0 / 32.0).unwrap();
        let v = sample_damping(&DampingProfile::Critical { v0: 1.5 }, grid).unwrap();
        let pair = fractional();
        let report =
            check_conditions(&pair, &v, 1.0, &geometric_times(10.0, 32)).unwrap();
        assert!(report.found);
        assert!(
            report.t0 > 1.0 && report.t0 < 1.8,
            "located t0 = {} should bracket the hand value 1.60",
            report.t0
        );
        // Early samples must genuinely fail: the scan has teeth.
        assert!(report.samples.iter().any(|s| !s.holds_i));
        assert!(report.samples.iter().all(|s| s.holds_ii));
        // Sharp constants: g_t and (1+t)|g_tt| are both decreasing, so the
        // suprema sit at t = 0 with closed forms 0.28 and 0.168; the
        // positive part of g_t - Vg never activates for these parameters.
        assert!((report.constants.c2 - 0.28).abs() < 1e-12);
        assert!((report.constants.c1 - 0.168).abs() < 1e-12);
        assert_eq!(report.constants.c3, 0.0);
    }

    #[test]
    fn c_of_t0_scales_quadratically_and_vanishes_on_zero() {
        let grid = Grid2D::new(48, 0.1).unwrap();
        let p = LameParams { a: 0.6, b: 1.0 };
        let st = StencilSet::new(grid);
        let v = sample_damping(&DampingProfile::Critical { v0: 4.0 }, grid).unwrap();
        let w = quadratic().eval_weights(1.3);
        let z = VectorField2::zeros(grid);
        assert_eq!(c_of_t0(&w, &z, &z, &v, &p, &st).unwrap(), 0.0);
        let u = diagnostics::bump_field(grid, [0.0, 0.0], 0.8, [1.0, 0.3]);
        let ut = diagnostics::bump_field(grid, [0.1, 0.0], 0.6, [0.2, -1.0]);
        let mut u3 = u.clone();
        let mut ut3 = ut.clone();
        for k in 0..grid.len() {
            u3.c1[k] *= 3.0;
            u3.c2[k] *= 3.0;
            ut3.c1[k] *= 3.0;
            ut3.c2[k] *= 3.0;
        }
        let c1 = c_of_t0(&w, &u, &ut, &v, &p, &st).unwrap();
        let c9 = c_of_t0(&w, &u3, &ut3, &v, &p, &st).unwrap();
        assert!(c1 > 0.0);
        assert!((c9 - 9.0 * c1).abs() <= 1e-12 * c9);
    }
}
