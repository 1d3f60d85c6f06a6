use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::BidderSeries;
use crate::regret::{estimate_value, EstimationError, EstimatorOptions};

use super::fit::fit_rule;
use super::{FitError, FittedRule, RuleKind, RuleOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Series,
    Stepahead,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::Series, Mode::Stepahead];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Series => "series",
            Mode::Stepahead => "stepahead",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRun {
    pub mode: Mode,
    /// One prediction per test hour.
    pub predictions: Vec<f64>,
}

/// What is refit before each step-ahead prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cadence {
    /// Value and step size refit on all data before the step.
    #[default]
    Full,
    /// Value frozen at its training estimate; step size refit.
    FreezeValue,
}

/// Per-step value estimates for a step-ahead run, shared by all rules of a
/// bidder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepaheadPlan {
    pub values: Vec<f64>,
}

impl StepaheadPlan {
    pub fn build(series: &BidderSeries, cadence: Cadence, opts: &EstimatorOptions) -> Result<Self, EstimationError> {
        let values = match cadence {
            Cadence::FreezeValue => {
                let v = estimate_value(series.train(), opts)?.quantal;
                vec![v; series.test_len()]
            }
            Cadence::Full => (series.train_end..series.len())
                .map(|k| estimate_value(&series.hours[..k], opts).map(|e| e.quantal))
                .collect::<Result<_, _>>()?,
        };
        Ok(StepaheadPlan { values })
    }
}

/// Iterates the rule over the test window from the last training bid,
/// feeding back its own predictions. Curves up to the previous hour are the
/// observed ones.
pub fn run_series(rule: &FittedRule, series: &BidderSeries) -> PredictionRun {
    let curves = series.curves();
    let mut prev = series.hours[series.train_end - 1].bid;
    let mut predictions = Vec::with_capacity(series.test_len());
    for k in series.train_end..series.len() {
        prev = rule.next_bid(prev, &curves[..k]);
        predictions.push(prev);
    }
    PredictionRun {
        mode: Mode::Series,
        predictions,
    }
}

/// One-step-ahead predictions, refitting the rule on all true data before
/// every step. Best reply has no state besides the value, so it is run from
/// the training fit and coincides with its series run.
pub fn run_stepahead(
    kind: RuleKind,
    series: &BidderSeries,
    plan: &StepaheadPlan,
    opts: &RuleOptions,
) -> Result<PredictionRun, FitError> {
    let curves = series.curves();
    if kind == RuleKind::Br {
        let value = plan.values.first().copied().unwrap_or(f64::NAN);
        let rule = fit_rule(kind, series, value, opts)?;
        return Ok(PredictionRun {
            mode: Mode::Stepahead,
            predictions: run_series(&rule, series).predictions,
        });
    }
    let mut predictions = Vec::with_capacity(series.test_len());
    for (i, k) in (series.train_end..series.len()).enumerate() {
        let prefix = series.prefix(k);
        let rule = fit_rule(kind, &prefix, plan.values[i], opts)?;
        predictions.push(rule.next_bid(series.hours[k - 1].bid, &curves[..k]));
    }
    Ok(PredictionRun {
        mode: Mode::Stepahead,
        predictions,
    })
}
