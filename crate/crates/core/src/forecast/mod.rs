//! Learning-rule bid forecasters.
//!
//! A [`FittedRule`] maps the previous bid and the curves observed so far to
//! the next bid. Rules are fitted on a training window (value from quantal
//! regret, step size by regression or grid search) and run either as a
//! self-fed series or one step at a time with refitting.

mod fit;
mod optim;
mod rules;
mod run;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::regret::EstimationError;
use crate::utility::BiasSign;

pub use fit::{
    eta_grid, fit_eta_grid, fit_eta_ogd, fit_ogdbias, fit_rule, one_step_predictions, train_one_step_mape, BiasFit,
    FtrlGridSolver,
};
pub use optim::{decreasing_root, golden_section_max};
pub use rules::{br_bid, brreg_step, ftl_step, ftrl_step, momentum_br_step, ogd_step, BrRegSolve};
pub use run::{run_series, run_stepahead, Cadence, Mode, PredictionRun, StepaheadPlan};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("gradient sequence is identically zero")]
    ZeroGradient,
    #[error("training window too short ({0} usable transitions)")]
    TooShort(usize),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleKind {
    #[serde(rename = "BR")]
    Br,
    #[serde(rename = "MomentumBR")]
    MomentumBr,
    #[serde(rename = "OGD")]
    Ogd,
    #[serde(rename = "BRReg")]
    BrReg,
    #[serde(rename = "FTRL")]
    Ftrl,
    #[serde(rename = "FTL")]
    Ftl,
    #[serde(rename = "OGDBias")]
    OgdBias,
}

impl RuleKind {
    pub const ALL: [RuleKind; 7] = [
        RuleKind::Br,
        RuleKind::MomentumBr,
        RuleKind::Ogd,
        RuleKind::BrReg,
        RuleKind::Ftrl,
        RuleKind::Ftl,
        RuleKind::OgdBias,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Br => "BR",
            RuleKind::MomentumBr => "MomentumBR",
            RuleKind::Ogd => "OGD",
            RuleKind::BrReg => "BRReg",
            RuleKind::Ftrl => "FTRL",
            RuleKind::Ftl => "FTL",
            RuleKind::OgdBias => "OGDBias",
        }
    }

    /// Whether the rule carries a step size.
    pub fn has_eta(self) -> bool {
        matches!(self, RuleKind::Ogd | RuleKind::BrReg | RuleKind::Ftrl | RuleKind::OgdBias)
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RuleKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown rule `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn new(hi: f64) -> Self {
        Bounds { lo: 0.0, hi }
    }

    #[inline]
    pub fn clamp(&self, b: f64) -> f64 {
        b.clamp(self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasParams {
    pub alpha: f64,
    pub vis0: f64,
    pub sign: BiasSign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedRule {
    pub kind: RuleKind,
    pub value: f64,
    pub eta: Option<f64>,
    pub beta: f64,
    pub bias: Option<BiasParams>,
    pub bounds: Bounds,
}

impl FittedRule {
    /// Next bid after `prev_bid`, given the curves of every hour so far
    /// (the last entry is the most recent hour).
    pub fn next_bid(&self, prev_bid: f64, history: &[crate::curves::HourlyCurveSet]) -> f64 {
        let last = history.last().expect("at least one observed hour");
        match self.kind {
            RuleKind::Br => br_bid(self.value, last, self.bounds),
            RuleKind::MomentumBr => momentum_br_step(self, prev_bid, last),
            RuleKind::Ogd | RuleKind::OgdBias => ogd_step(self, prev_bid, last),
            RuleKind::BrReg => brreg_step(self, prev_bid, last).bid,
            RuleKind::Ftrl => ftrl_step(self, history),
            RuleKind::Ftl => ftl_step(self, history),
        }
    }

    pub fn eta_or_zero(&self) -> f64 {
        self.eta.unwrap_or(0.0)
    }
}

/// Options shared by all rule fitters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleOptions {
    /// Recency discount of FTRL.
    pub beta: f64,
    /// Upper bid bound as a multiple of the mean training bid.
    pub bound_multiple: f64,
    pub eta_grid_points: usize,
    pub eta_grid_lo: f64,
    pub eta_grid_hi: f64,
    /// Use this FTRL step size instead of fitting one (`inf` gives a
    /// discounted follow-the-leader).
    pub ftrl_fixed_eta: Option<f64>,
    pub bias_sign: BiasSign,
    pub alpha_grid: Vec<f64>,
    pub vis0_grid: Vec<f64>,
    /// Grid points of the tabulated FTRL objective used while fitting.
    pub ftrl_solver_points: usize,
}

impl Default for RuleOptions {
    fn default() -> Self {
        RuleOptions {
            beta: 0.9,
            bound_multiple: 6.0,
            eta_grid_points: 40,
            eta_grid_lo: 1e-4,
            eta_grid_hi: 1e4,
            ftrl_fixed_eta: None,
            bias_sign: BiasSign::Repel,
            alpha_grid: vec![0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 150.0, 200.0, 300.0],
            vis0_grid: (0..=10).map(|i| i as f64 / 10.0).collect(),
            ftrl_solver_points: 128,
        }
    }
}
