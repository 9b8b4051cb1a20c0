//! Power-law fits to the empirical survival function `S(t) = #{v > t}/N`.

use serde::Serialize;

use crate::error::{ensure, Error, Result};

/// Thresholds per decade on the log-spaced `t` grid.
pub const POINTS_PER_DECADE: usize = 20;
/// Minimum number of thresholds inside the fitting window.
pub const MIN_POINTS: usize = 5;

#[derive(Clone, Debug, Serialize)]
pub struct TailFit {
    /// `−slope` of `log S` against `log t`; `+∞` for a bounded field.
    pub epsilon_hat: f64,
    /// `Ĉ` in `S(t) ≈ Ĉ t^{−ε̂}` (NaN for the bounded sentinel).
    pub constant_hat: f64,
    pub t_range: (f64, f64),
    /// `max |log S − fit|` over the window.
    pub residual: f64,
    pub points: usize,
    pub samples: usize,
    pub bounded: bool,
    pub thresholds: Vec<f64>,
    pub survival: Vec<f64>,
}

impl TailFit {
    /// Survival curve as CSV `t,survival`.
    pub fn survival_csv(&self) -> String {
        let mut s = String::from("t,survival\n");
        for (t, v) in self.thresholds.iter().zip(&self.survival) {
            s.push_str(&format!("{t:?},{v:?}\n"));
        }
        s
    }
}

/// Fraction of `values` strictly above each threshold. `+∞` entries count as
/// above every threshold.
pub fn survival(values: &[f64], thresholds: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    thresholds
        .iter()
        .map(|&t| {
            let at_or_below = sorted.partition_point(|&v| v <= t);
            (sorted.len() - at_or_below) as f64 / n
        })
        .collect()
}

/// Log-spaced thresholds from `lo` to `hi` inclusive.
pub fn log_thresholds(lo: f64, hi: f64) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let steps = (decades * POINTS_PER_DECADE as f64).ceil().max(1.0) as usize;
    (0..=steps).map(|i| lo * (hi / lo).powf(i as f64 / steps as f64)).collect()
}

/// Weighted least-squares fit of `S(t) ≈ C t^{−ε}` on the window
/// `S ∈ [20/N, 0.5]` over thresholds in `[t0·sup_u, cap]`.
///
/// If the survival function reaches zero inside the threshold range and the
/// window does not hold a fit (≥ 5 points over ≥ 1 decade), the field is
/// bounded and `ε̂ = +∞` is returned. If the window is too thin but the
/// survival never vanishes, the tail is unresolved and an
/// [`Error::InsufficientTail`] carrying the curve is returned.
pub fn tail_fit(values: &[f64], sup_u: f64, t0: f64, cap: f64) -> Result<TailFit> {
    ensure(!values.is_empty(), || "no values to fit".into())?;
    ensure(values.iter().all(|v| !v.is_nan()), || "values contain NaN".into())?;
    let lo = t0 * sup_u;
    ensure(lo > 0.0 && lo.is_finite(), || format!("t0·sup_u must be positive, got {lo}"))?;
    ensure(lo < cap, || format!("t0·sup_u = {lo} must be below the cap {cap}"))?;

    let thresholds = log_thresholds(lo, cap);
    let surv = survival(values, &thresholds);
    let n = values.len() as f64;
    let floor = 20.0 / n;
    // (log t, log S, weight); the weight is the inverse binomial variance of
    // log S, N·S/(1 − S).
    let window: Vec<(f64, f64, f64)> = thresholds
        .iter()
        .zip(&surv)
        .filter(|(_, &s)| s >= floor && s <= 0.5 && s > 0.0)
        .map(|(&t, &s)| (t.ln(), s.ln(), n * s / (1.0 - s)))
        .collect();
    let spans_decade = match (window.first(), window.last()) {
        (Some(a), Some(b)) => b.0 - a.0 >= std::f64::consts::LN_10 * (1.0 - 1e-9),
        _ => false,
    };
    let vanishes = surv.last().is_some_and(|&s| s == 0.0);

    if window.len() < MIN_POINTS || !spans_decade {
        if vanishes {
            return Ok(TailFit {
                epsilon_hat: f64::INFINITY,
                constant_hat: f64::NAN,
                t_range: (lo, cap),
                residual: 0.0,
                points: window.len(),
                samples: values.len(),
                bounded: true,
                thresholds,
                survival: surv,
            });
        }
        return Err(Error::InsufficientTail {
            reason: format!(
                "{} usable thresholds (need {MIN_POINTS} spanning one decade) in S ∈ [{floor:.3e}, 0.5]",
                window.len()
            ),
            thresholds,
            survival: surv,
        });
    }

    let wsum: f64 = window.iter().map(|p| p.2).sum();
    let mx = window.iter().map(|p| p.2 * p.0).sum::<f64>() / wsum;
    let my = window.iter().map(|p| p.2 * p.1).sum::<f64>() / wsum;
    let sxy: f64 = window.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = window.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = window.iter().map(|p| (p.1 - intercept - slope * p.0).abs()).fold(0.0, f64::max);
    Ok(TailFit {
        epsilon_hat: (-slope).max(0.0),
        constant_hat: intercept.exp(),
        t_range: (window[0].0.exp(), window[window.len() - 1].0.exp()),
        residual,
        points: window.len(),
        samples: values.len(),
        bounded: false,
        thresholds,
        survival: surv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng as _;

    fn power_law(eps: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, 0);
        (0..n).map(|_| (1.0 - r.random::<f64>()).powf(-1.0 / eps)).collect()
    }

    #[test]
    fn recovers_synthetic_exponent() {
        for (eps, seed) in [(0.5, 1), (1.0, 2), (0.3, 3)] {
            let v = power_law(eps, 100_000, seed);
            let fit = tail_fit(&v, 1.0, 1.0, 1e30).unwrap();
            assert!((fit.epsilon_hat - eps).abs() <= 0.02 * eps, "eps {eps}: {}", fit.epsilon_hat);
            assert!(!fit.bounded);
        }
    }

    #[test]
    fn zero_field_is_bounded() {
        let fit = tail_fit(&[0.0; 100], 1.0, 1.0, 1e6).unwrap();
        assert!(fit.bounded && fit.epsilon_hat.is_infinite());
    }

    #[test]
    fn capped_field_is_insufficient() {
        let err = tail_fit(&[f64::INFINITY; 100], 1.0, 1.0, 1e6).unwrap_err();
        match err {
            Error::InsufficientTail { survival, .. } => assert!(survival.iter().all(|&s| s == 1.0)),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn survival_counts_strictly_above() {
        let s = survival(&[1.0, 2.0, 3.0, f64::INFINITY], &[0.5, 2.0, 1e9]);
        assert_eq!(s, vec![1.0, 0.5, 0.25]);
    }

    #[test]
    fn rejects_bad_window() {
        assert!(tail_fit(&[1.0], 1.0, 2.0, 1.0).is_err());
        assert!(tail_fit(&[1.0], 0.0, 1.0, 10.0).is_err());
        assert!(tail_fit(&[], 1.0, 1.0, 10.0).is_err());
    }
}
