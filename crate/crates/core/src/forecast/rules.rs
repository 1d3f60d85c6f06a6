use crate::curves::HourlyCurveSet;
use crate::utility::{curvature_ql, grad_ql, grad_vis, util_ql, QuasiLinearParams, VisibilityParams};

use super::optim::{decreasing_root, golden_section_max};
use super::{Bounds, FittedRule, RuleKind};

/// Best reply to one hour: `argmax_b u(b; v)` on the bid bounds.
pub fn br_bid(value: f64, curves: &HourlyCurveSet, bounds: Bounds) -> f64 {
    let p = QuasiLinearParams { value };
    let tol = 1e-7 * bounds.hi.max(f64::MIN_POSITIVE);
    golden_section_max(|b| util_ql(&p, curves, b), bounds.lo, bounds.hi, tol)
}

/// Projected gradient step; rules with bias parameters step along the
/// visibility-biased gradient.
pub fn ogd_step(rule: &FittedRule, prev_bid: f64, curves: &HourlyCurveSet) -> f64 {
    let eta = rule.eta_or_zero();
    let g = match (&rule.bias, rule.kind) {
        (Some(bias), RuleKind::OgdBias) => {
            let vp = VisibilityParams {
                value: rule.value,
                alpha: bias.alpha,
                vis0: bias.vis0,
                sign: bias.sign,
            };
            grad_vis(&vp, curves, prev_bid)
        }
        _ => grad_ql(&QuasiLinearParams { value: rule.value }, curves, prev_bid),
    };
    rule.bounds.clamp(prev_bid + eta * g)
}

pub fn momentum_br_step(rule: &FittedRule, prev_bid: f64, curves: &HourlyCurveSet) -> f64 {
    0.5 * (prev_bid + br_bid(rule.value, curves, rule.bounds))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrRegSolve {
    pub bid: f64,
    /// `b − prev − η·∇u(b)` at the returned bid.
    pub residual: f64,
    /// False when the fixed-point map had no sign change inside the bounds
    /// and the better boundary was returned instead.
    pub bracketed: bool,
}

/// Implicit gradient step: solves `b − prev − η·∇u(b) = 0` on the bounds.
///
/// The map is strictly increasing because `u` is concave, so the root is
/// unique whenever it is bracketed.
pub fn brreg_step(rule: &FittedRule, prev_bid: f64, curves: &HourlyCurveSet) -> BrRegSolve {
    brreg_solve(rule.value, rule.eta_or_zero(), prev_bid, curves, rule.bounds)
}

pub(crate) fn brreg_solve(value: f64, eta: f64, prev: f64, curves: &HourlyCurveSet, bounds: Bounds) -> BrRegSolve {
    if eta == 0.0 {
        return BrRegSolve {
            bid: bounds.clamp(prev),
            residual: bounds.clamp(prev) - prev,
            bracketed: (bounds.lo..=bounds.hi).contains(&prev),
        };
    }
    let p = QuasiLinearParams { value };
    let g = |b: f64| b - prev - eta * grad_ql(&p, curves, b);
    let (g_lo, g_hi) = (g(bounds.lo), g(bounds.hi));
    if g_lo >= 0.0 || g_hi <= 0.0 {
        let bid = if g_lo.abs() <= g_hi.abs() { bounds.lo } else { bounds.hi };
        let residual = if bid == bounds.lo { g_lo } else { g_hi };
        return BrRegSolve {
            bid,
            residual,
            bracketed: g_lo == 0.0 || g_hi == 0.0,
        };
    }
    let xtol = f64::EPSILON * bounds.hi;
    let bid = decreasing_root(
        |b| (-g(b), eta * curvature_ql(&p, curves, b) - 1.0),
        bounds.lo,
        bounds.hi,
        xtol,
    );
    BrRegSolve {
        bid,
        residual: g(bid),
        bracketed: true,
    }
}

/// Regularised leader: `argmax_b Σ_τ β^{t−τ} u_τ(b) − b²/(2η)` over the whole
/// history.
pub fn ftrl_step(rule: &FittedRule, history: &[HourlyCurveSet]) -> f64 {
    let eta = rule.eta.unwrap_or(f64::INFINITY);
    leader_bid(rule.value, history, rule.beta, 1.0 / eta, rule.bounds)
}

/// Follow-the-leader: maximiser of the undiscounted utility sum.
pub fn ftl_step(rule: &FittedRule, history: &[HourlyCurveSet]) -> f64 {
    leader_bid(rule.value, history, 1.0, 0.0, rule.bounds)
}

/// Weights below this fraction of the newest term are dropped from the sum.
const DISCOUNT_CUTOFF: f64 = 1e-18;

/// Maximiser of a concave discounted sum minus `inv_eta·b²/2`, found as the
/// root of its derivative.
pub(crate) fn leader_bid(value: f64, history: &[HourlyCurveSet], beta: f64, inv_eta: f64, bounds: Bounds) -> f64 {
    let p = QuasiLinearParams { value };
    let deriv = |b: f64| {
        let (mut d1, mut d2, mut w) = (0.0, 0.0, 1.0);
        for c in history.iter().rev() {
            d1 += w * grad_ql(&p, c, b);
            d2 += w * curvature_ql(&p, c, b);
            w *= beta;
            if w < DISCOUNT_CUTOFF {
                break;
            }
        }
        (d1 - inv_eta * b, d2 - inv_eta)
    };
    if deriv(bounds.lo).0 <= 0.0 {
        return bounds.lo;
    }
    if deriv(bounds.hi).0 >= 0.0 {
        return bounds.hi;
    }
    decreasing_root(deriv, bounds.lo, bounds.hi, 1e-13 * bounds.hi)
}
