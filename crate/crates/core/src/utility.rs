//! Per-hour bidder utilities and their bid gradients.

use serde::{Deserialize, Serialize};

use crate::curves::HourlyCurveSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiLinearParams {
    /// Value per click.
    pub value: f64,
}

/// Direction of the visibility term.
///
/// `Repel` adds `+½α(vis − vis₀)²` to the utility, the literal form of the
/// model; `Attract` subtracts it, turning the term into a penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasSign {
    Attract,
    #[default]
    Repel,
}

impl BiasSign {
    #[inline]
    pub fn factor(self) -> f64 {
        match self {
            BiasSign::Attract => -1.0,
            BiasSign::Repel => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityParams {
    pub value: f64,
    pub alpha: f64,
    pub vis0: f64,
    #[serde(default)]
    pub sign: BiasSign,
}

impl VisibilityParams {
    pub fn quasi_linear(&self) -> QuasiLinearParams {
        QuasiLinearParams { value: self.value }
    }
}

/// `(v − p(b))·x(b)`.
#[inline]
pub fn util_ql(params: &QuasiLinearParams, curves: &HourlyCurveSet, bid: f64) -> f64 {
    (params.value - curves.cost.eval(bid)) * curves.click.eval(bid)
}

/// `v·x′(b) − s·x(b) − s·b·x′(b)`.
#[inline]
pub fn grad_ql(params: &QuasiLinearParams, curves: &HourlyCurveSet, bid: f64) -> f64 {
    let x = curves.click.eval(bid);
    let dx = curves.click.grad(bid);
    let s = curves.cost.slope;
    params.value * dx - s * x - s * bid * dx
}

/// Second derivative of the quasi-linear utility; negative for fitted curves.
#[inline]
pub fn curvature_ql(params: &QuasiLinearParams, curves: &HourlyCurveSet, bid: f64) -> f64 {
    let c = curves.click;
    let d = c.half + bid;
    -2.0 * c.a * c.half * (params.value + curves.cost.slope * c.half) / (d * d * d)
}

/// Share of the maximal attainable clicks, `x(b)/xmax`.
#[inline]
pub fn visibility(curves: &HourlyCurveSet, bid: f64) -> f64 {
    bid / (curves.click.half + bid)
}

pub fn util_vis(params: &VisibilityParams, curves: &HourlyCurveSet, bid: f64) -> f64 {
    let base = util_ql(&params.quasi_linear(), curves, bid);
    if params.alpha == 0.0 {
        return base;
    }
    let gap = visibility(curves, bid) - params.vis0;
    base + params.sign.factor() * 0.5 * params.alpha * gap * gap
}

pub fn grad_vis(params: &VisibilityParams, curves: &HourlyCurveSet, bid: f64) -> f64 {
    let base = grad_ql(&params.quasi_linear(), curves, bid);
    if params.alpha == 0.0 {
        return base;
    }
    let gap = visibility(curves, bid) - params.vis0;
    // d vis / d b = x′(b) / a
    let dvis = curves.click.grad(bid) / curves.click.a;
    base + params.sign.factor() * params.alpha * gap * dvis
}
