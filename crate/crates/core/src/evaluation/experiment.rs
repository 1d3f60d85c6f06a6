use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{predict_baseline_modes, BaselineMethod, BaselineOptions};
use crate::dataset::BidderSeries;
use crate::forecast::{
    fit_rule, run_series, run_stepahead, train_one_step_mape, Cadence, Mode, PredictionRun, RuleKind, RuleOptions,
    StepaheadPlan,
};
use crate::par::par_map;
use crate::regret::{daily_value_cv, estimate_value, ogd_plausibility, shade_ratio, EstimatorOptions, ValueEstimate};

use super::metrics::{dist_stats, mape, DistStats};

/// Any forecasting method: a learning rule driven by an estimated value, or
/// a machine-learning baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Rule(RuleKind),
    Baseline(BaselineMethod),
}

impl Method {
    pub fn all() -> Vec<Method> {
        RuleKind::ALL
            .into_iter()
            .map(Method::Rule)
            .chain(BaselineMethod::ALL.into_iter().map(Method::Baseline))
            .collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Rule(k) => k.name(),
            Method::Baseline(b) => b.name(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<RuleKind>()
            .map(Method::Rule)
            .or_else(|_| s.parse::<BaselineMethod>().map(Method::Baseline))
            .map_err(|_| format!("unknown method `{s}`"))
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentOptions {
    pub estimator: EstimatorOptions,
    pub rules: RuleOptions,
    pub baselines: BaselineOptions,
    pub cadence: Cadence,
    /// Skip the per-day value and plausibility diagnostics.
    pub skip_diagnostics: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapeScore {
    pub bidder_id: String,
    pub method: Method,
    pub mode: Mode,
    pub mape: f64,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub bidder_id: String,
    pub hour: i64,
    pub mode: Mode,
    pub rule: Method,
    pub predicted_bid: f64,
    pub true_bid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub bidder_id: String,
    /// Empty for failures that are not tied to one method.
    pub method: Option<Method>,
    pub mode: Option<Mode>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub bidder_id: String,
    pub v_qr: f64,
    pub v_mr: f64,
    pub shade_ratio: f64,
    pub daily_cv: Option<f64>,
    pub ogd_plausibility: Option<f64>,
    pub eligible_flag: bool,
}

/// Fitted parameters of a learning rule on one bidder's training window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub bidder_id: String,
    pub method: Method,
    pub value: f64,
    pub eta: Option<f64>,
    pub alpha: Option<f64>,
    pub vis0: Option<f64>,
    pub train_mape: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub scores: Vec<MapeScore>,
    pub predictions: Vec<PredictionRecord>,
    pub failures: Vec<Failure>,
    pub estimates: Vec<EstimateRecord>,
    pub fits: Vec<FitRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub mode: Mode,
    pub n_scored: usize,
    pub n_failed: usize,
    pub stats: Option<DistStats>,
    /// Position by outlier-excluded mean within the mode, best first.
    pub rank: Option<usize>,
}

impl EvalReport {
    pub fn scores_for(&self, method: Method, mode: Mode) -> Vec<f64> {
        self.scores
            .iter()
            .filter(|s| s.method == method && s.mode == mode)
            .map(|s| s.mape)
            .collect()
    }

    /// One row per (method, mode) pair that was attempted, in first-seen
    /// order, ranked within each mode.
    pub fn summary(&self, methods: &[Method], modes: &[Mode]) -> Vec<SummaryRow> {
        let mut rows: Vec<SummaryRow> = Vec::new();
        for &mode in modes {
            for &method in methods {
                let scores = self.scores_for(method, mode);
                let n_failed = self
                    .failures
                    .iter()
                    .filter(|f| f.method == Some(method) && (f.mode.is_none() || f.mode == Some(mode)))
                    .count();
                rows.push(SummaryRow {
                    method,
                    mode,
                    n_scored: scores.len(),
                    n_failed,
                    stats: dist_stats(&scores).ok(),
                    rank: None,
                });
            }
            let mut ranked: Vec<usize> = (0..rows.len())
                .filter(|&i| rows[i].mode == mode && rows[i].stats.is_some())
                .collect();
            ranked.sort_by(|&a, &b| {
                let (x, y) = (rows[a].stats.unwrap().mean_excl, rows[b].stats.unwrap().mean_excl);
                x.total_cmp(&y).then_with(|| rows[a].method.name().cmp(rows[b].method.name()))
            });
            for (r, i) in ranked.into_iter().enumerate() {
                rows[i].rank = Some(r + 1);
            }
        }
        rows
    }
}

struct TaskOutput {
    scores: Vec<MapeScore>,
    predictions: Vec<PredictionRecord>,
    failures: Vec<Failure>,
    estimate: Option<EstimateRecord>,
    fits: Vec<FitRecord>,
}

/// Fits, predicts and scores every (bidder, method, mode) combination.
/// Bidders run in parallel; output is ordered by bidder id, then method and
/// mode in the order given, so it does not depend on scheduling.
pub fn run_experiment(tasks: &[BidderSeries], methods: &[Method], modes: &[Mode], opts: &ExperimentOptions) -> EvalReport {
    let mut order: Vec<&BidderSeries> = tasks.iter().collect();
    order.sort_by(|a, b| a.bidder_id.cmp(&b.bidder_id));
    let outputs = par_map(&order, |s| evaluate_task(s, methods, modes, opts));
    let mut report = EvalReport::default();
    for out in outputs {
        report.scores.extend(out.scores);
        report.predictions.extend(out.predictions);
        report.failures.extend(out.failures);
        report.estimates.extend(out.estimate);
        report.fits.extend(out.fits);
    }
    for f in &report.failures {
        log::info!(
            "{}: {} {} excluded: {}",
            f.bidder_id,
            f.method.map(|m| m.name()).unwrap_or("-"),
            f.mode.map(|m| m.name()).unwrap_or("-"),
            f.reason
        );
    }
    report
}

fn evaluate_task(series: &BidderSeries, methods: &[Method], modes: &[Mode], opts: &ExperimentOptions) -> TaskOutput {
    let id = series.bidder_id.clone();
    let mut out = TaskOutput {
        scores: Vec::new(),
        predictions: Vec::new(),
        failures: Vec::new(),
        estimate: None,
        fits: Vec::new(),
    };
    let fail = |method: Option<Method>, mode: Option<Mode>, reason: String| Failure {
        bidder_id: id.clone(),
        method,
        mode,
        reason,
    };
    if series.test_len() == 0 || series.train_end < 3 {
        out.failures.push(fail(None, None, format!("series too short ({} hours)", series.len())));
        return out;
    }

    let needs_value = methods.iter().any(|m| matches!(m, Method::Rule(_)));
    let value: Result<ValueEstimate, String> = if needs_value || !opts.skip_diagnostics {
        estimate_value(series.train(), &opts.estimator).map_err(|e| e.to_string())
    } else {
        Err("not requested".into())
    };
    if let Ok(v) = &value {
        out.estimate = Some(diagnostics(series, v, opts));
    }
    let mut plan: Option<Result<StepaheadPlan, String>> = None;
    let truth: Vec<f64> = series.test().iter().map(|h| h.bid).collect();

    for &method in methods {
        let runs: Vec<Result<PredictionRun, String>> = match method {
            Method::Baseline(b) => predict_baseline_modes(b, modes, series, &opts.baselines, opts.seed)
                .into_iter()
                .map(|r| r.map_err(|e| e.to_string()))
                .collect(),
            Method::Rule(kind) => {
                let v = match &value {
                    Ok(v) => v.quantal,
                    Err(e) => {
                        for &mode in modes {
                            out.failures.push(fail(Some(method), Some(mode), format!("value estimation: {e}")));
                        }
                        continue;
                    }
                };
                modes
                    .iter()
                    .map(|&mode| match mode {
                        Mode::Series => fit_rule(kind, series, v, &opts.rules)
                            .map(|rule| {
                                out.fits.push(fit_record(&id, method, &rule, series));
                                run_series(&rule, series)
                            })
                            .map_err(|e| e.to_string()),
                        Mode::Stepahead => {
                            let plan = plan.get_or_insert_with(|| {
                                StepaheadPlan::build(series, opts.cadence, &opts.estimator).map_err(|e| e.to_string())
                            });
                            match plan {
                                Ok(p) => run_stepahead(kind, series, p, &opts.rules).map_err(|e| e.to_string()),
                                Err(e) => Err(format!("value estimation: {e}")),
                            }
                        }
                    })
                    .collect()
            }
        };
        for (&mode, run) in modes.iter().zip(runs) {
            let run = match run {
                Ok(r) => r,
                Err(reason) => {
                    out.failures.push(fail(Some(method), Some(mode), reason));
                    continue;
                }
            };
            if run.predictions.iter().any(|p| !p.is_finite()) {
                out.failures.push(fail(Some(method), Some(mode), "non-finite prediction".into()));
                continue;
            }
            match mape(&truth, &run.predictions) {
                Ok(score) => out.scores.push(MapeScore {
                    bidder_id: id.clone(),
                    method,
                    mode,
                    mape: score,
                    n_test: truth.len(),
                }),
                Err(e) => {
                    out.failures.push(fail(Some(method), Some(mode), e.to_string()));
                    continue;
                }
            }
            for (h, p) in series.test().iter().zip(&run.predictions) {
                out.predictions.push(PredictionRecord {
                    bidder_id: id.clone(),
                    hour: h.hour,
                    mode,
                    rule: method,
                    predicted_bid: *p,
                    true_bid: h.bid,
                });
            }
        }
    }
    out
}

fn fit_record(id: &str, method: Method, rule: &crate::forecast::FittedRule, series: &BidderSeries) -> FitRecord {
    FitRecord {
        bidder_id: id.to_string(),
        method,
        value: rule.value,
        eta: rule.eta,
        alpha: rule.bias.map(|b| b.alpha),
        vis0: rule.bias.map(|b| b.vis0),
        train_mape: train_one_step_mape(rule, series),
    }
}

fn diagnostics(series: &BidderSeries, v: &ValueEstimate, opts: &ExperimentOptions) -> EstimateRecord {
    let (daily_cv, plaus) = if opts.skip_diagnostics {
        (None, None)
    } else {
        (
            daily_value_cv(series, &opts.estimator).ok(),
            ogd_plausibility(series, v.quantal).ok(),
        )
    };
    EstimateRecord {
        bidder_id: series.bidder_id.clone(),
        v_qr: v.quantal,
        v_mr: v.min_regret,
        shade_ratio: shade_ratio(series, v.quantal),
        daily_cv,
        ogd_plausibility: plaus.map(|p| p.signed_neg_log_p),
        eligible_flag: plaus.is_some_and(|p| p.eligible),
    }
}

/// Summary statistics of one method and mode, if enough bidders scored.
pub fn method_stats(report: &EvalReport, method: Method, mode: Mode) -> Option<DistStats> {
    dist_stats(&report.scores_for(method, mode)).ok()
}
