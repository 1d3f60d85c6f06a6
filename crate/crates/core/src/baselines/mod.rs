//! Machine-learning baselines on lagged bids, optionally augmented with
//! curve features, plus an hour-of-day seasonal mean.

mod features;
mod forest;
mod linear;
mod mlp;
mod seasonal;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::BidderSeries;
use crate::forecast::{Mode, PredictionRun};

pub use features::{training_rows, FeatureRow};
pub use forest::{fit_forest, Forest, ForestOptions, Tree};
pub use linear::{fit_ar2, LinearModel, RIDGE_FALLBACK};
pub use mlp::{fit_mlp, MlpModel, MlpOptions};
pub use seasonal::{seasonal_mean, seasonal_profile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("too few training rows: need {needed}, found {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("normal equations are singular")]
    Singular,
    #[error("hour of day {hour} has {found} training observations, need 2")]
    InsufficientCoverage { hour: u32, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BaselineKind {
    #[serde(rename = "AR2")]
    Ar2,
    #[serde(rename = "RF2")]
    Rf2,
    #[serde(rename = "MLP2")]
    Mlp2,
    #[serde(rename = "Seasonal")]
    Seasonal,
}

/// A baseline together with its feature set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BaselineMethod {
    pub kind: BaselineKind,
    pub econ: bool,
}

impl BaselineMethod {
    pub const ALL: [BaselineMethod; 7] = [
        BaselineMethod::plain(BaselineKind::Ar2),
        BaselineMethod::plain(BaselineKind::Rf2),
        BaselineMethod::plain(BaselineKind::Mlp2),
        BaselineMethod::econ(BaselineKind::Ar2),
        BaselineMethod::econ(BaselineKind::Rf2),
        BaselineMethod::econ(BaselineKind::Mlp2),
        BaselineMethod::plain(BaselineKind::Seasonal),
    ];

    pub const fn plain(kind: BaselineKind) -> Self {
        BaselineMethod { kind, econ: false }
    }

    pub const fn econ(kind: BaselineKind) -> Self {
        BaselineMethod { kind, econ: true }
    }

    pub fn name(self) -> &'static str {
        match (self.kind, self.econ) {
            (BaselineKind::Ar2, false) => "AR2",
            (BaselineKind::Rf2, false) => "RF2",
            (BaselineKind::Mlp2, false) => "MLP2",
            (BaselineKind::Ar2, true) => "AR2Econ",
            (BaselineKind::Rf2, true) => "RF2Econ",
            (BaselineKind::Mlp2, true) => "MLP2Econ",
            (BaselineKind::Seasonal, _) => "Seasonal",
        }
    }
}

impl fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BaselineMethod::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown baseline `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineOptions {
    pub forest: ForestOptions,
    pub mlp: MlpOptions,
    /// Retrain the network before every step-ahead prediction. When off, the
    /// network trained on the training window is reused with true lags.
    pub mlp_stepahead_retrain: bool,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        BaselineOptions {
            forest: ForestOptions::default(),
            mlp: MlpOptions::default(),
            mlp_stepahead_retrain: true,
        }
    }
}

/// Deterministic seed for one model fit, independent of scheduling.
pub fn model_seed(seed: u64, bidder_id: &str, method: BaselineMethod, step: usize) -> u64 {
    // FNV-1a over the identifying fields, then a splitmix64 finaliser.
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    eat(&seed.to_le_bytes());
    eat(bidder_id.as_bytes());
    eat(method.name().as_bytes());
    eat(&(step as u64).to_le_bytes());
    let mut z = h.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// A fitted lag model.
#[derive(Debug, Clone, PartialEq)]
pub enum LagModel {
    Linear(LinearModel),
    Forest(Forest),
    Mlp(MlpModel),
}

impl LagModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            LagModel::Linear(m) => m.predict(x),
            LagModel::Forest(m) => m.predict(x),
            LagModel::Mlp(m) => m.predict(x),
        }
    }
}

/// Fits a lag model on rows from the first `end` hours.
pub fn fit_lag_model(
    method: BaselineMethod,
    series: &BidderSeries,
    end: usize,
    opts: &BaselineOptions,
    seed: u64,
) -> Result<LagModel, BaselineError> {
    let (xs, ys) = training_rows(series, end, method.econ);
    match method.kind {
        BaselineKind::Ar2 => fit_ar2(&xs, &ys).map(LagModel::Linear),
        BaselineKind::Rf2 => fit_forest(&xs, &ys, &opts.forest, seed).map(LagModel::Forest),
        BaselineKind::Mlp2 => fit_mlp(&xs, &ys, &opts.mlp, seed).map(LagModel::Mlp),
        BaselineKind::Seasonal => unreachable!("seasonal mean is not a lag model"),
    }
}

/// Series mode: the model's own predictions become the lags of later steps,
/// and the econ features are evaluated at those predicted bids.
pub fn predict_series(model: &LagModel, series: &BidderSeries, econ: bool) -> Vec<f64> {
    let h = &series.hours;
    let (mut lag1, mut lag2) = (h[series.train_end - 1].bid, h[series.train_end - 2].bid);
    let mut out = Vec::with_capacity(series.test_len());
    for k in series.train_end..series.len() {
        let row = FeatureRow::new(lag1, lag2, econ.then_some(&h[k - 1].curves));
        let pred = model.predict(&row.to_vec());
        out.push(pred);
        (lag2, lag1) = (lag1, pred);
    }
    out
}

/// Trains on the training window (and, step-ahead, on all data before each
/// step) and predicts the test window.
pub fn predict_baseline(
    method: BaselineMethod,
    mode: Mode,
    series: &BidderSeries,
    opts: &BaselineOptions,
    seed: u64,
) -> Result<PredictionRun, BaselineError> {
    predict_baseline_modes(method, &[mode], series, opts, seed).remove(0)
}

/// Like [`predict_baseline`] for several modes at once. A model trained on
/// the training window is fitted once and shared between series mode and a
/// non-retraining step-ahead run.
pub fn predict_baseline_modes(
    method: BaselineMethod,
    modes: &[Mode],
    series: &BidderSeries,
    opts: &BaselineOptions,
    seed: u64,
) -> Vec<Result<PredictionRun, BaselineError>> {
    if method.kind == BaselineKind::Seasonal {
        return modes.iter().map(|&m| seasonal_mean(series, m)).collect();
    }
    let id = &series.bidder_id;
    let retrain = method.kind != BaselineKind::Mlp2 || opts.mlp_stepahead_retrain;
    let needs_base = modes.iter().any(|&m| m == Mode::Series || !retrain);
    let base = needs_base.then(|| fit_lag_model(method, series, series.train_end, opts, model_seed(seed, id, method, 0)));
    modes
        .iter()
        .map(|&mode| {
            let predictions = match mode {
                Mode::Series => {
                    let model = base.as_ref().expect("fitted").as_ref().map_err(Clone::clone)?;
                    predict_series(model, series, method.econ)
                }
                Mode::Stepahead => {
                    let h = &series.hours;
                    let mut out = Vec::with_capacity(series.test_len());
                    for k in series.train_end..series.len() {
                        let fresh;
                        let model = if retrain {
                            let step = k - series.train_end;
                            fresh = fit_lag_model(method, series, k, opts, model_seed(seed, id, method, step))?;
                            &fresh
                        } else {
                            base.as_ref().expect("fitted").as_ref().map_err(Clone::clone)?
                        };
                        let row = FeatureRow::new(h[k - 1].bid, h[k - 2].bid, method.econ.then_some(&h[k - 1].curves));
                        out.push(model.predict(&row.to_vec()));
                    }
                    out
                }
            };
            Ok(PredictionRun { mode, predictions })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{ClickCurve, CostCurve, HourlyCurveSet};
    use crate::dataset::HourRecord;

    fn series(bids: &[f64], train_end: usize) -> BidderSeries {
        let hours = bids
            .iter()
            .enumerate()
            .map(|(t, &bid)| HourRecord {
                hour: t as i64,
                bid,
                curves: HourlyCurveSet::new(t as i64, ClickCurve::new(0.2, 10.0 + (t % 5) as f64), CostCurve::new(0.5), 1),
            })
            .collect();
        let mut s = BidderSeries::new("x", hours);
        s.train_end = train_end;
        s
    }

    #[test]
    fn persistence_model_holds_last_bid() {
        let s = series(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 4);
        let m = LagModel::Linear(LinearModel {
            intercept: 0.0,
            weights: vec![1.0, 0.0],
        });
        assert_eq!(predict_series(&m, &s, false), vec![4.0, 4.0]);
    }

    #[test]
    fn ar2_series_on_its_own_process_is_exact() {
        let mut b = vec![10.0, 12.0];
        for t in 2..60 {
            b.push(2.0 + 0.6 * b[t - 1] + 0.3 * b[t - 2]);
        }
        let s = series(&b, 50);
        let run = predict_baseline(BaselineMethod::plain(BaselineKind::Ar2), Mode::Series, &s, &Default::default(), 1).unwrap();
        for (p, t) in run.predictions.iter().zip(&b[50..]) {
            assert!((p - t).abs() < 1e-6 * t, "{p} vs {t}");
        }
    }

    #[test]
    fn stepahead_uses_true_lags() {
        let b: Vec<f64> = (0..40).map(|t| 5.0 + (t as f64 * 0.7).sin()).collect();
        let s = series(&b, 30);
        let opts = BaselineOptions::default();
        let method = BaselineMethod::plain(BaselineKind::Ar2);
        let run = predict_baseline(method, Mode::Stepahead, &s, &opts, 1).unwrap();
        for (i, k) in (30..40).enumerate() {
            let m = fit_lag_model(method, &s, k, &opts, 0).unwrap();
            assert_eq!(run.predictions[i], m.predict(&[b[k - 1], b[k - 2]]));
        }
    }

    #[test]
    fn forest_cannot_extrapolate_above_training_bids() {
        let mut b: Vec<f64> = (0..60).map(|t| 1.0 + 0.1 * ((t * 7) % 5) as f64).collect();
        b.extend((0..10).map(|t| 3.0 + 0.1 * t as f64));
        let s = series(&b, 60);
        let run = predict_baseline(BaselineMethod::plain(BaselineKind::Rf2), Mode::Series, &s, &Default::default(), 5).unwrap();
        assert!(run.predictions.iter().all(|p| *p <= 1.4 + 1e-12));
    }

    #[test]
    fn seeds_are_stable_and_distinct() {
        let m = BaselineMethod::plain(BaselineKind::Mlp2);
        assert_eq!(model_seed(1, "a", m, 0), model_seed(1, "a", m, 0));
        assert_ne!(model_seed(1, "a", m, 0), model_seed(1, "b", m, 0));
        assert_ne!(model_seed(1, "a", m, 0), model_seed(1, "a", m, 1));
        assert_ne!(model_seed(1, "a", m, 0), model_seed(1, "a", BaselineMethod::econ(BaselineKind::Mlp2), 0));
    }

    #[test]
    fn names_round_trip() {
        for m in BaselineMethod::ALL {
            assert_eq!(m.name().parse::<BaselineMethod>().unwrap(), m);
        }
    }
}
