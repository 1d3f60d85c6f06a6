//! Scoring, distribution statistics and the experiment driver.

mod experiment;
mod metrics;
pub mod report;

use thiserror::Error;

pub use experiment::{
    method_stats, run_experiment, EstimateRecord, EvalReport, ExperimentOptions, Failure, FitRecord, MapeScore, Method,
    PredictionRecord, SummaryRow,
};
pub use metrics::{dist_stats, hourly_profile, mape, DistStats, HourlyProfile, MIN_SCORES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("true bid at position {0} is not positive")]
    ZeroTrueBid(usize),
    #[error("need equal nonempty lengths, got {truth} true and {predicted} predicted bids")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("need at least 4 scores, got {0}")]
    TooFewScores(usize),
}
