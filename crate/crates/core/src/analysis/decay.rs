//! Geometric decay of curvature super-level sets:
//! `|{Θ̲ > Mt}| ≤ (1 − σ)|{Θ̲ > t}|`.

use serde::Serialize;

use crate::contact::CurvatureField;
use crate::error::{ensure, Error, Result};

/// Values of `M` scanned for the empirical `(M, σ)` frontier.
pub const FRONTIER_M: [f64; 6] = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0];

#[derive(Clone, Debug, Serialize)]
pub struct DecayRow {
    pub t: f64,
    /// Nodes with value `> t`.
    pub above_t: usize,
    /// Nodes with value `> M·t`.
    pub above_mt: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FrontierPoint {
    pub m: f64,
    /// Largest `σ` for which every `t` passes; 1 when no level set is occupied.
    pub sigma: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub m: f64,
    pub sigma: f64,
    pub nodes: usize,
    pub rows: Vec<DecayRow>,
    pub all_pass: bool,
    pub frontier: Vec<FrontierPoint>,
}

fn count_above(values: &[f64], t: f64) -> usize {
    values.iter().filter(|&&v| v > t).count()
}

fn best_sigma(values: &[f64], m: f64, ts: &[f64]) -> f64 {
    ts.iter()
        .filter_map(|&t| {
            let a = count_above(values, t);
            (a > 0).then(|| 1.0 - count_above(values, m * t) as f64 / a as f64)
        })
        .fold(1.0, f64::min)
}

/// The check on raw node values (`+∞` counts as above every level).
pub fn measure_decay(values: &[f64], m: f64, sigma: f64, ts: &[f64]) -> Result<DecayReport> {
    ensure(!values.is_empty(), || "empty region".into())?;
    ensure(m > 1.0 && m.is_finite(), || format!("M must exceed 1, got {m}"))?;
    ensure(sigma > 0.0 && sigma < 1.0, || format!("sigma must lie in (0, 1), got {sigma}"))?;
    ensure(!ts.is_empty(), || "empty t list".into())?;
    ensure(ts.iter().all(|t| t.is_finite() && *t >= 0.0), || "t values must be finite and ≥ 0".into())?;
    ensure(ts.windows(2).all(|w| w[0] < w[1]), || "t list must be strictly increasing".into())?;
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("NaN in the curvature field".into()));
    }
    let rows: Vec<DecayRow> = ts
        .iter()
        .map(|&t| {
            let above_t = count_above(values, t);
            let above_mt = count_above(values, m * t);
            DecayRow { t, above_t, above_mt, pass: above_mt as f64 <= (1.0 - sigma) * above_t as f64 }
        })
        .collect();
    let frontier = FRONTIER_M.iter().map(|&m| FrontierPoint { m, sigma: best_sigma(values, m, ts) }).collect();
    Ok(DecayReport { m, sigma, nodes: values.len(), all_pass: rows.iter().all(|r| r.pass), rows, frontier })
}

/// The check on the lower curvature of a computed field.
pub fn measure_decay_check(field: &CurvatureField, m: f64, sigma: f64, ts: &[f64]) -> Result<DecayReport> {
    measure_decay(&field.theta_lower, m, sigma, ts)
}
