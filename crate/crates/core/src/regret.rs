//! Value-per-click estimation from the no-regret condition.
//!
//! The average regret of the realised bids against the best fixed bid in
//! hindsight is computed for every candidate value; the min-regret estimate
//! takes the arg-min, the quantal-regret estimate a Boltzmann-weighted mean.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{BidderSeries, HourRecord};
use crate::stats;
use crate::utility::{grad_ql, util_ql, QuasiLinearParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("empty series")]
    EmptySeries,
    #[error("bids must be positive on average")]
    NonPositiveBids,
    #[error("need at least {needed} days with enough activity, found {found}")]
    InsufficientDays { needed: usize, found: usize },
    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error("series too short: {0}")]
    TooShort(usize),
}

/// How the quantal-regret temperature is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    /// `λ = scale / median |R(v)|` over the candidate grid.
    MedianRegret { scale: f64 },
    Fixed(f64),
}

impl Default for LambdaRule {
    fn default() -> Self {
        // With scale 1 the weights are nearly flat over the candidate grid
        // and the estimate drifts towards the grid mean; 10 keeps the soft
        // minimum close to the regret valley.
        LambdaRule::MedianRegret { scale: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorOptions {
    pub n_candidates: usize,
    pub candidate_lo: f64,
    pub candidate_hi: f64,
    pub extra_grid_points: usize,
    pub grid_span: f64,
    pub lambda: LambdaRule,
    pub min_day_hours: usize,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            n_candidates: 120,
            candidate_lo: 0.01,
            candidate_hi: 6.0,
            extra_grid_points: 60,
            grid_span: 2.0,
            lambda: LambdaRule::default(),
            min_day_hours: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretProfile {
    /// `(value, regret)` pairs sorted by value.
    pub candidates: Vec<(f64, f64)>,
    pub bid_grid: Vec<f64>,
}

/// Average regret against the best fixed bid of `bid_grid`:
/// `max_g (1/T) Σ_t [u_t(g; v) − u_t(b_t; v)]`.
pub fn regret(hours: &[HourRecord], value: f64, bid_grid: &[f64]) -> Result<f64, EstimationError> {
    if hours.is_empty() || bid_grid.is_empty() {
        return Err(EstimationError::EmptySeries);
    }
    let sums = GridSums::new(hours, bid_grid);
    Ok(sums.regret(value))
}

/// Regret for arbitrary per-hour utilities `utility(t, bid)`.
pub fn regret_with<F>(bids: &[f64], bid_grid: &[f64], utility: F) -> Result<f64, EstimationError>
where
    F: Fn(usize, f64) -> f64,
{
    if bids.is_empty() || bid_grid.is_empty() {
        return Err(EstimationError::EmptySeries);
    }
    let realized: f64 = bids.iter().enumerate().map(|(t, &b)| utility(t, b)).sum();
    let best = bid_grid
        .iter()
        .map(|&g| (0..bids.len()).map(|t| utility(t, g)).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((best - realized) / bids.len() as f64)
}

/// Sufficient sums for the regret sweep. Utilities are linear in `v`:
/// `Σ_t u_t(g; v) = v·X(g) − C(g)` with `X(g) = Σ x_t(g)` and
/// `C(g) = Σ s_t·g·x_t(g)`.
struct GridSums {
    clicks: Vec<f64>,
    costs: Vec<f64>,
    realized_clicks: f64,
    realized_cost: f64,
    t: f64,
}

impl GridSums {
    fn new(hours: &[HourRecord], grid: &[f64]) -> Self {
        let mut clicks = vec![0.0; grid.len()];
        let mut costs = vec![0.0; grid.len()];
        let (mut rc, mut rp) = (0.0, 0.0);
        for h in hours {
            let c = &h.curves;
            for (i, &g) in grid.iter().enumerate() {
                let x = c.click.eval(g);
                clicks[i] += x;
                costs[i] += c.cost.eval(g) * x;
            }
            let x = c.click.eval(h.bid);
            rc += x;
            rp += c.cost.eval(h.bid) * x;
        }
        GridSums {
            clicks,
            costs,
            realized_clicks: rc,
            realized_cost: rp,
            t: hours.len() as f64,
        }
    }

    fn regret(&self, v: f64) -> f64 {
        let base = v * self.realized_clicks - self.realized_cost;
        let best = self
            .clicks
            .iter()
            .zip(&self.costs)
            .map(|(x, c)| v * x - c)
            .fold(f64::NEG_INFINITY, f64::max);
        (best - base) / self.t
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

fn mean_bid(hours: &[HourRecord]) -> Result<f64, EstimationError> {
    if hours.is_empty() {
        return Err(EstimationError::EmptySeries);
    }
    let m = hours.iter().map(|h| h.bid).sum::<f64>() / hours.len() as f64;
    if m > 0.0 && m.is_finite() {
        Ok(m)
    } else {
        Err(EstimationError::NonPositiveBids)
    }
}

/// Candidate values: evenly spaced between 1% and 6× the average bid.
pub fn candidate_values(hours: &[HourRecord]) -> Result<Vec<f64>, EstimationError> {
    candidate_values_with(hours, &EstimatorOptions::default())
}

pub fn candidate_values_with(hours: &[HourRecord], opts: &EstimatorOptions) -> Result<Vec<f64>, EstimationError> {
    let m = mean_bid(hours)?;
    Ok(linspace(opts.candidate_lo * m, opts.candidate_hi * m, opts.n_candidates))
}

/// Deviation bids for the supremum: the realised bids plus an even grid over
/// `[0, span·max bid]`, sorted and deduplicated.
pub fn deviation_grid(hours: &[HourRecord], opts: &EstimatorOptions) -> Vec<f64> {
    let max_bid = hours.iter().map(|h| h.bid).fold(0.0, f64::max);
    let mut grid: Vec<f64> = hours.iter().map(|h| h.bid).collect();
    grid.extend(linspace(0.0, opts.grid_span * max_bid, opts.extra_grid_points));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

pub fn regret_profile(hours: &[HourRecord], candidates: &[f64], bid_grid: &[f64]) -> Result<RegretProfile, EstimationError> {
    if hours.is_empty() || bid_grid.is_empty() || candidates.is_empty() {
        return Err(EstimationError::EmptySeries);
    }
    let sums = GridSums::new(hours, bid_grid);
    let mut cands: Vec<(f64, f64)> = candidates.iter().map(|&v| (v, sums.regret(v))).collect();
    cands.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(RegretProfile {
        candidates: cands,
        bid_grid: bid_grid.to_vec(),
    })
}

/// Arg-min of the regret; ties go to the smaller value.
pub fn min_regret_value(profile: &RegretProfile) -> f64 {
    let mut best = profile.candidates[0];
    for &c in &profile.candidates[1..] {
        if c.1 < best.1 {
            best = c;
        }
    }
    best.0
}

/// Soft-min estimate `Σ v·e^{−λR(v)} / Σ e^{−λR(v)}`.
pub fn quantal_regret_value(profile: &RegretProfile, lambda: f64) -> f64 {
    let r_min = profile
        .candidates
        .iter()
        .map(|c| c.1)
        .fold(f64::INFINITY, f64::min);
    let (mut num, mut den) = (0.0, 0.0);
    for &(v, r) in &profile.candidates {
        let w = (-lambda * (r - r_min)).exp();
        num += v * w;
        den += w;
    }
    num / den
}

pub fn resolve_lambda(profile: &RegretProfile, rule: LambdaRule) -> f64 {
    match rule {
        LambdaRule::Fixed(l) => l,
        LambdaRule::MedianRegret { scale } => {
            let abs: Vec<f64> = profile.candidates.iter().map(|c| c.1.abs()).collect();
            let med = stats::quantile(&abs, 0.5);
            if med > 0.0 {
                scale / med
            } else {
                f64::INFINITY
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate {
    pub quantal: f64,
    pub min_regret: f64,
    pub lambda: f64,
}

/// Both value estimates for a window of hours.
pub fn estimate_value(hours: &[HourRecord], opts: &EstimatorOptions) -> Result<ValueEstimate, EstimationError> {
    let candidates = candidate_values_with(hours, opts)?;
    let grid = deviation_grid(hours, opts);
    let profile = regret_profile(hours, &candidates, &grid)?;
    let lambda = resolve_lambda(&profile, opts.lambda);
    let min_regret = min_regret_value(&profile);
    let quantal = if lambda.is_finite() {
        quantal_regret_value(&profile, lambda)
    } else {
        min_regret
    };
    Ok(ValueEstimate {
        quantal,
        min_regret,
        lambda,
    })
}

/// Estimated value over the mean training bid.
pub fn shade_ratio(series: &BidderSeries, value: f64) -> f64 {
    value / series.mean_train_bid()
}

/// Coefficient of variation of quantal values estimated day by day on the
/// training window.
pub fn daily_value_cv(series: &BidderSeries, opts: &EstimatorOptions) -> Result<f64, EstimationError> {
    let values = daily_values(series.train(), opts)?;
    Ok(stats::coefficient_of_variation(&values))
}

pub fn daily_values(hours: &[HourRecord], opts: &EstimatorOptions) -> Result<Vec<f64>, EstimationError> {
    let mut days: Vec<(i64, Vec<HourRecord>)> = Vec::new();
    for h in hours {
        let d = h.hour.div_euclid(24);
        match days.last_mut() {
            Some((day, rows)) if *day == d => rows.push(*h),
            _ => days.push((d, vec![*h])),
        }
    }
    let eligible: Vec<&Vec<HourRecord>> = days
        .iter()
        .map(|(_, r)| r)
        .filter(|r| r.len() >= opts.min_day_hours)
        .collect();
    if eligible.len() < 2 {
        return Err(EstimationError::InsufficientDays {
            needed: 2,
            found: eligible.len(),
        });
    }
    eligible
        .into_iter()
        .map(|rows| estimate_value(rows, opts).map(|e| e.quantal))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plausibility {
    /// `sign(r)·(−log₁₀ p)`.
    pub signed_neg_log_p: f64,
    pub correlation: f64,
    pub n: usize,
    /// Mean absolute bid change of at least one cent.
    pub eligible: bool,
}

/// Correlation test between bid changes and the utility gradient at the
/// previous bid, on the training window.
pub fn ogd_plausibility(series: &BidderSeries, value: f64) -> Result<Plausibility, EstimationError> {
    let end = series.train_end;
    if end < 3 {
        return Err(EstimationError::TooShort(end));
    }
    let p = QuasiLinearParams { value };
    let mut deltas = Vec::new();
    let mut grads = Vec::new();
    for k in series.steps(end) {
        let prev = &series.hours[k - 1];
        deltas.push(series.hours[k].bid - prev.bid);
        grads.push(grad_ql(&p, &prev.curves, prev.bid));
    }
    if deltas.len() < 3 {
        return Err(EstimationError::TooShort(deltas.len()));
    }
    let r = stats::pearson(&deltas, &grads).ok_or(EstimationError::ZeroVariance("bid changes or gradients"))?;
    let pval = stats::correlation_p_value(r, deltas.len()).max(1e-300);
    let mean_abs = deltas.iter().map(|d| d.abs()).sum::<f64>() / deltas.len() as f64;
    Ok(Plausibility {
        signed_neg_log_p: r.signum() * -pval.log10(),
        correlation: r,
        n: deltas.len(),
        eligible: mean_abs >= 1.0,
    })
}

/// Utility of a fixed bid summed over hours; used by diagnostics.
pub fn total_utility(hours: &[HourRecord], value: f64, bid: f64) -> f64 {
    let p = QuasiLinearParams { value };
    hours.iter().map(|h| util_ql(&p, &h.curves, bid)).sum()
}
