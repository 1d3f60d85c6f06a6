//! No-regret econometrics for repeated sponsored-search auctions.
//!
//! The crate fits per-hour click and cost curves from counterfactual bid
//! samples, estimates each bidder's value per click from the no-regret
//! condition, forecasts bids with learning-rule models and machine-learning
//! baselines, and evaluates them on simulated markets, including a day/night
//! covariate-shift construction.

pub mod baselines;
pub mod curves;
pub mod dataset;
pub mod evaluation;
pub mod forecast;
pub mod par;
pub mod pipeline;
pub mod regret;
pub mod simulator;
pub mod stats;
pub mod utility;

pub use curves::{ClickCurve, CostCurve, CurvePoint, HourlyCurveSet};
pub use dataset::{BidderSeries, HourRecord};
pub use utility::{BiasSign, QuasiLinearParams, VisibilityParams};
