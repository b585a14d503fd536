//! Late-time rate extraction and envelope verdicts.
//!
//! The decay statements under test are upper bounds, `E_u(t) = O(t^-2 log t)`
//! and friends, so exponent equality would be the wrong acceptance gate: the
//! true decay may be faster. `O(.)` is operationalized as a bounded-ratio
//! check over at least one octave of late-time data: form `r(t) = q(t) /
//! envelope(t)` and require that the ratio at the window end does not exceed
//! `tol_factor` times its maximum over the first half of the window. A
//! least-squares exponent (with optional `log t` correction) is fitted and
//! reported alongside, for information only.

use serde::Serialize;

use crate::diagnostics::DiagnosticsRecord;
use crate::integrator::{InitNorms, SideSample};
use crate::model::Case;
use crate::{Error, Result};

/// Default growth tolerance of the bounded-ratio verdict.
pub const DEFAULT_TOL_FACTOR: f64 = 1.5;

fn check_window(window: (f64, f64)) -> Result<()> {
    let (lo, hi) = window;
    if !lo.is_finite() || !hi.is_finite() || lo <= 0.0 {
        return Err(Error::config(format!("fit window ({lo}, {hi}) must be positive and finite")));
    }
    if hi < 2.0 * lo {
        return Err(Error::config(format!(
            "fit window ({lo}, {hi}) spans less than one octave"
        )));
    }
    Ok(())
}

/// Least-squares decay exponent over `window`: the negated slope of
/// `log(E / (log t))` (corrected) or `log E` (uncorrected) against `log t`.
///
/// Errors on nonpositive values inside the window; that signals the series
/// decayed to roundoff and the window should shrink.
pub fn fit_decay(
    ts: &[f64],
    es: &[f64],
    window: (f64, f64),
    log_correction: bool,
) -> Result<f64> {
    check_window(window)?;
    if ts.len() != es.len() {
        return Err(Error::config("time and value series differ in length"));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &e) in ts.iter().zip(es) {
        if t < window.0 || t > window.1 {
            continue;
        }
        if !(e > 0.0) {
            return Err(Error::NonPositive(format!(
                "series value {e} at t = {t}; shrink the fit window"
            )));
        }
        let corr = if log_correction {
            let lt = t.ln();
            if !(lt > 0.0) {
                return Err(Error::config(format!(
                    "log-corrected fit needs t > 1 throughout the window, got t = {t}"
                )));
            }
            lt
        } else {
            1.0
        };
        xs.push(t.ln());
        ys.push((e / corr).ln());
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientSamples(format!(
            "{} samples inside the fit window ({}, {})",
            xs.len(),
            window.0,
            window.1
        )));
    }
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - xm) * (y - ym);
        sxx += (x - xm) * (x - xm);
    }
    if sxx == 0.0 {
        return Err(Error::InsufficientSamples(
            "all window samples share one time; no slope".into(),
        ));
    }
    Ok(-(sxy / sxx))
}

/// One bounded-ratio envelope verdict.
#[derive(Debug, Clone, Serialize)]
pub struct RatioCheck {
    /// `(t, q(t)/envelope(t))` at every sample inside the window.
    pub ratios: Vec<(f64, f64)>,
    /// Largest ratio over the first half of the window.
    pub early_max: f64,
    /// Ratio at the last window sample.
    pub end_ratio: f64,
    pub tol_factor: f64,
    pub pass: bool,
}

/// Verdict that `q = O(envelope)` over `window`: the ratio at the window
/// end must not exceed `tol_factor` times its maximum over the first half.
/// The envelope must be strictly positive on the window.
pub fn bounded_ratio(
    ts: &[f64],
    qs: &[f64],
    envelope: impl Fn(f64) -> f64,
    window: (f64, f64),
    tol_factor: f64,
) -> Result<RatioCheck> {
    check_window(window)?;
    if ts.len() != qs.len() {
        return Err(Error::config("time and value series differ in length"));
    }
    if !(tol_factor >= 1.0) {
        return Err(Error::config(format!("tol_factor must be >= 1, got {tol_factor}")));
    }
    let mid = 0.5 * (window.0 + window.1);
    let mut ratios = Vec::new();
    let mut early_max = f64::NEG_INFINITY;
    let mut early_seen = false;
    for (&t, &q) in ts.iter().zip(qs) {
        if t < window.0 || t > window.1 {
            continue;
        }
        let e = envelope(t);
        if !(e > 0.0) || !e.is_finite() {
            return Err(Error::NonPositive(format!("envelope value {e} at t = {t}")));
        }
        let r = q / e;
        if t <= mid {
            early_max = early_max.max(r);
            early_seen = true;
        }
        ratios.push((t, r));
    }
    if ratios.len() < 2 || !early_seen {
        return Err(Error::InsufficientSamples(format!(
            "window ({}, {}) needs samples in both halves, got {}",
            window.0,
            window.1,
            ratios.len()
        )));
    }
    let end_ratio = ratios.last().unwrap().1;
    Ok(RatioCheck {
        pass: end_ratio <= tol_factor * early_max,
        ratios,
        early_max,
        end_ratio,
        tol_factor,
    })
}

/// Splitting check for the data-against-antiderivative pairing: with
/// `2AB <= (1/ε)A² + εB²` applied under the integral,
///
/// ```text
///   ∫ |ρ · v(t)| dx  <=  (1/ε) ∫_{|x|<=2L+bt} |∇h|² dx + ε ∫ |∇v(t)|² dx.
/// ```
#[derive(Debug, Clone, Serialize)]
pub struct DualityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub eps: f64,
    /// `1/ε`.
    pub c_eps: f64,
    pub disk_gradient_energy: f64,
    pub grad_v_sq: f64,
    pub tol: f64,
    pub pass: bool,
}

pub fn duality_check(
    abs_rho_dot_v: f64,
    grad_v_sq: f64,
    disk_gradient_energy: f64,
    eps: f64,
    tol: f64,
) -> Result<DualityCheck> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::NonPositive(format!("splitting parameter eps = {eps}")));
    }
    let c_eps = 1.0 / eps;
    let rhs = c_eps * disk_gradient_energy + eps * grad_v_sq;
    Ok(DualityCheck {
        lhs: abs_rho_dot_v,
        rhs,
        eps,
        c_eps,
        disk_gradient_energy,
        grad_v_sq,
        tol,
        pass: abs_rho_dot_v <= rhs * (1.0 + tol),
    })
}

/// Aggregates appearing in the decay/growth envelopes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ObservedConstants {
    /// `‖u₀‖²_{L²} + ‖ρ‖²_{L∞}`: the t-independent part of the mass envelope.
    pub data_aggregate: f64,
    /// `‖ρ‖²_{L¹}`: coefficient of `log(2L + bt)`.
    pub log_coefficient: f64,
    /// `1/max(1 + L, b)`: absorption constant of the damping lower bound
    /// `V(x) >= V0/(1 + |x|) >= C* V0/(1 + s)` on `|x| <= L + bs`.
    pub c_star: f64,
}

/// Everything the verdict builder needs from a completed run.
#[derive(Debug, Clone, Copy)]
pub struct RateInputs<'a> {
    pub case: Case,
    pub v0: f64,
    pub b: f64,
    /// Exponent shave for the intermediate-damping claim.
    pub delta: f64,
    /// Declared data support radius `L`.
    pub support_l: f64,
    pub norms: InitNorms,
    pub records: &'a [DiagnosticsRecord],
    pub side: &'a [SideSample],
    pub tol_factor: f64,
    /// Fit/ratio window; default `[T/4, T]`.
    pub window: Option<(f64, f64)>,
}

/// Per-run rate verdicts.
#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub case: Case,
    pub window: (f64, f64),
    /// Log-corrected least-squares exponent of `E_u`; `None` when the fit
    /// has no valid samples (zero data, window at t <= 1).
    pub fitted_exponent: Option<f64>,
    /// Exponent of the claimed envelope: 2 (strong), `V0/b - δ`
    /// (intermediate), absent otherwise.
    pub claimed_exponent: Option<f64>,
    /// `E_u(t)` against `t^-p log t` (damped claims only).
    pub energy_envelope: Option<RatioCheck>,
    /// `∫|u|² (+ ∫∫V|u|²)` against `A + B log(2L + bt)`.
    pub mass_envelope: Option<RatioCheck>,
    pub constants: ObservedConstants,
    pub all_pass: bool,
}

/// Build the decay/growth verdicts for one completed run.
///
/// Strong damping checks `E_u` against `t^-2 log t`; intermediate damping
/// against `t^(-V0/b + δ) log t`; both damped regimes also check the mass
/// aggregate `∫|u(t)|² + ∫₀ᵗ∫V|u|²` against `A + B log(2L + bt)` with
/// `A = ‖u₀‖² + ‖ρ‖²_∞`, `B = ‖ρ‖²₁`. The undamped case checks `∫|u(t)|²`
/// against the same envelope (`ρ = u₁` there). Weak damping carries no
/// claim; its report holds the fitted exponent and constants only.
pub fn theorem_verdicts(inp: &RateInputs) -> Result<RateReport> {
    let records = inp.records;
    if records.len() < 2 {
        return Err(Error::InsufficientSamples("run produced fewer than two records".into()));
    }
    if inp.side.len() != records.len() {
        return Err(Error::config("side-channel series does not match the record series"));
    }
    let t_end = records.last().unwrap().t;
    let window = inp.window.unwrap_or((0.25 * t_end, t_end));
    check_window(window)?;

    let ts: Vec<f64> = records.iter().map(|r| r.t).collect();
    let es: Vec<f64> = records.iter().map(|r| r.e_u).collect();
    let constants = ObservedConstants {
        data_aggregate: inp.norms.u0_l2_sq + inp.norms.rho_linf * inp.norms.rho_linf,
        log_coefficient: inp.norms.rho_l1 * inp.norms.rho_l1,
        c_star: 1.0 / (1.0 + inp.support_l).max(inp.b),
    };

    let fitted_exponent = fit_decay(&ts, &es, window, true).ok();

    let claimed_exponent = match inp.case {
        Case::StrongDamping => Some(2.0),
        Case::IntermediateDamping => Some(inp.v0 / inp.b - inp.delta),
        Case::WeakDamping | Case::Undamped => None,
    };

    let energy_envelope = match claimed_exponent {
        Some(p) => Some(bounded_ratio(
            &ts,
            &es,
            |t| t.powf(-p) * t.ln(),
            window,
            inp.tol_factor,
        )?),
        None => None,
    };

    let mass_envelope = match inp.case {
        Case::WeakDamping => None,
        _ => {
            let qs: Vec<f64> = match inp.case {
                Case::Undamped => records.iter().map(|r| r.l2_sq).collect(),
                _ => records
                    .iter()
                    .zip(inp.side)
                    .map(|(r, s)| r.l2_sq + s.v_dissipation)
                    .collect(),
            };
            let (a, b_coef) = (constants.data_aggregate, constants.log_coefficient);
            let two_l = 2.0 * inp.support_l;
            let speed = inp.b;
            if a == 0.0 && b_coef == 0.0 {
                // Zero data: the envelope is identically zero and so is the
                // solution; record a vacuous pass instead of dividing.
                let max_q = qs
                    .iter()
                    .zip(&ts)
                    .filter(|(_, t)| **t >= window.0 && **t <= window.1)
                    .fold(0.0f64, |m, (q, _)| m.max(q.abs()));
                if max_q > 0.0 {
                    return Err(Error::NonPositive(
                        "zero-data envelope with a nonzero solution series".into(),
                    ));
                }
                Some(RatioCheck {
                    ratios: ts
                        .iter()
                        .filter(|t| **t >= window.0 && **t <= window.1)
                        .map(|&t| (t, 0.0))
                        .collect(),
                    early_max: 0.0,
                    end_ratio: 0.0,
                    tol_factor: inp.tol_factor,
                    pass: true,
                })
            } else {
                Some(bounded_ratio(
                    &ts,
                    &qs,
                    |t| a + b_coef * (two_l + speed * t).ln(),
                    window,
                    inp.tol_factor,
                )?)
            }
        }
    };

    let all_pass = energy_envelope.as_ref().map_or(true, |c| c.pass)
        && mass_envelope.as_ref().map_or(true, |c| c.pass);

    Ok(RateReport {
        case: inp.case,
        window,
        fitted_exponent,
        claimed_exponent,
        energy_envelope,
        mass_envelope,
        constants,
        all_pass,
    })
}
