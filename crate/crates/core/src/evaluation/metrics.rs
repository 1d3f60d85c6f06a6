use serde::{Deserialize, Serialize};

use crate::stats::{self, quantile_sorted};

use super::EvalError;

/// Mean absolute percentage error `mean |b − b̂| / b`.
pub fn mape(true_bids: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    if true_bids.is_empty() || true_bids.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            truth: true_bids.len(),
            predicted: predicted.len(),
        });
    }
    let mut sum = 0.0;
    for (i, (t, p)) in true_bids.iter().zip(predicted).enumerate() {
        if !(*t > 0.0) {
            return Err(EvalError::ZeroTrueBid(i));
        }
        sum += (t - p).abs() / t;
    }
    Ok(sum / true_bids.len() as f64)
}

/// Box-plot statistics with Tukey outliers, and the mean, standard error
/// and normal 95% interval of the non-outlying scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistStats {
    pub n: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    /// Most extreme scores inside the 1.5·IQR fences.
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub n_outliers: usize,
    pub mean_excl: f64,
    pub stderr: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

pub const MIN_SCORES: usize = 4;

pub fn dist_stats(scores: &[f64]) -> Result<DistStats, EvalError> {
    if scores.len() < MIN_SCORES {
        return Err(EvalError::TooFewScores(scores.len()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = sorted.iter().copied().filter(|s| *s >= lo_fence && *s <= hi_fence).collect();
    let mean_excl = stats::mean(&inside);
    // Sample standard deviation; a single surviving score has no spread.
    let stderr = stats::std_dev(&inside) / (inside.len() as f64).sqrt();
    Ok(DistStats {
        n: scores.len(),
        q1,
        median,
        q3,
        whisker_lo: inside[0],
        whisker_hi: inside[inside.len() - 1],
        n_outliers: scores.len() - inside.len(),
        mean_excl,
        stderr,
        ci_lo: mean_excl - 1.96 * stderr,
        ci_hi: mean_excl + 1.96 * stderr,
    })
}

/// Average day shape: each 24-hour bid vector is divided by its own mean,
/// then hours are averaged across days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyProfile {
    pub mean: Vec<f64>,
    pub p25: Vec<f64>,
    pub p75: Vec<f64>,
    pub n: usize,
}

pub fn hourly_profile<'a>(days: impl IntoIterator<Item = &'a [f64]>) -> HourlyProfile {
    let normalized: Vec<Vec<f64>> = days
        .into_iter()
        .map(|d| {
            let m = stats::mean(d);
            d.iter().map(|b| b / m).collect()
        })
        .collect();
    let column = |h: usize| -> Vec<f64> { normalized.iter().map(|d| d[h]).collect() };
    let n = normalized.len();
    let (mut mean, mut p25, mut p75) = (Vec::new(), Vec::new(), Vec::new());
    if n > 0 {
        for h in 0..24 {
            let c = column(h);
            mean.push(stats::mean(&c));
            p25.push(stats::quantile(&c, 0.25));
            p75.push(stats::quantile(&c, 0.75));
        }
    }
    HourlyProfile { mean, p25, p75, n }
}
