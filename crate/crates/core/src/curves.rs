//! Counterfactual click and cost curves.
//!
//! Every bidder-hour is summarised by two curves fitted to the multiplier
//! samples of the auctions in that hour: a saturating click curve
//! `x(b) = a·b / (b_half + b)` and a linear cost-per-click curve `p(b) = s·b`.
//! Together they are the sufficient statistic of the competition.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("degenerate fit: {0}")]
    DegenerateFit(&'static str),
    #[error("invalid curve point (bid={bid}, click_prob={click_prob}, cpc={cpc})")]
    InvalidPoint { bid: f64, click_prob: f64, cpc: f64 },
}

/// One counterfactual sample: what the bidder would have received at `bid`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub bid: f64,
    pub click_prob: f64,
    pub cpc: f64,
}

impl CurvePoint {
    pub fn new(bid: f64, click_prob: f64, cpc: f64) -> Result<Self, CurveError> {
        let p = CurvePoint { bid, click_prob, cpc };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), CurveError> {
        let ok = self.bid.is_finite()
            && self.bid > 0.0
            && self.click_prob.is_finite()
            && self.click_prob >= 0.0
            && self.cpc.is_finite()
            && self.cpc >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(CurveError::InvalidPoint {
                bid: self.bid,
                click_prob: self.click_prob,
                cpc: self.cpc,
            })
        }
    }
}

/// Saturating click curve `x(b) = a·b / (half + b)`.
///
/// `a` is the saturation level (the supremum click rate) and `half` the bid
/// at which half of it is reached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickCurve {
    pub a: f64,
    #[serde(rename = "b")]
    pub half: f64,
}

impl ClickCurve {
    pub fn new(a: f64, half: f64) -> Self {
        ClickCurve { a, half }
    }

    #[inline]
    pub fn eval(&self, bid: f64) -> f64 {
        self.a * bid / (self.half + bid)
    }

    #[inline]
    pub fn grad(&self, bid: f64) -> f64 {
        let d = self.half + bid;
        self.a * self.half / (d * d)
    }

    /// Supremum of the curve as the bid grows without bound.
    #[inline]
    pub fn xmax(&self) -> f64 {
        self.a
    }
}

/// Linear cost-per-click curve through the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostCurve {
    pub slope: f64,
}

impl CostCurve {
    pub fn new(slope: f64) -> Self {
        CostCurve { slope }
    }

    #[inline]
    pub fn eval(&self, bid: f64) -> f64 {
        self.slope * bid
    }

    #[inline]
    pub fn grad(&self, _bid: f64) -> f64 {
        self.slope
    }
}

/// Fitted `(x_t, p_t)` for one bidder-hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourlyCurveSet {
    pub hour: i64,
    pub click: ClickCurve,
    pub cost: CostCurve,
    pub n_auctions: u32,
}

impl HourlyCurveSet {
    pub fn new(hour: i64, click: ClickCurve, cost: CostCurve, n_auctions: u32) -> Self {
        HourlyCurveSet {
            hour,
            click,
            cost,
            n_auctions: n_auctions.max(1),
        }
    }
}

pub fn eval_click(curve: &ClickCurve, bid: f64) -> f64 {
    curve.eval(bid)
}

pub fn grad_click(curve: &ClickCurve, bid: f64) -> f64 {
    curve.grad(bid)
}

const MAX_ITER: usize = 500;
const STEP_TOL: f64 = 1e-8;

/// Least-squares fit of the saturating click curve.
///
/// Levenberg-damped Gauss-Newton from four starts; parameters are kept
/// strictly positive by halving any step that would cross zero.
pub fn fit_click_curve(points: &[CurvePoint]) -> Result<ClickCurve, CurveError> {
    for p in points {
        p.validate()?;
    }
    if points.len() < 2 {
        return Err(CurveError::DegenerateFit("fewer than two points"));
    }
    let first = points[0].bid;
    if points.iter().all(|p| p.bid == first) {
        return Err(CurveError::DegenerateFit("all bids identical"));
    }
    let y_max = points.iter().map(|p| p.click_prob).fold(0.0, f64::max);
    if y_max <= 0.0 {
        return Err(CurveError::DegenerateFit("all click probabilities are zero"));
    }
    let mut bids: Vec<f64> = points.iter().map(|p| p.bid).collect();
    bids.sort_by(f64::total_cmp);
    let median = crate::stats::quantile_sorted(&bids, 0.5);

    let mut best: Option<(f64, ClickCurve)> = None;
    for &a0 in &[y_max, 2.0 * y_max] {
        for &b0 in &[median, 5.0 * median] {
            let fit = gauss_newton(points, a0, b0);
            let sse = sse(points, &fit);
            if !sse.is_finite() {
                continue;
            }
            match best {
                Some((s, _)) if s <= sse => {}
                _ => best = Some((sse, fit)),
            }
        }
    }
    best.map(|(_, c)| c)
        .ok_or(CurveError::DegenerateFit("no start converged to a finite fit"))
}

fn sse(points: &[CurvePoint], c: &ClickCurve) -> f64 {
    points
        .iter()
        .map(|p| {
            let r = p.click_prob - c.eval(p.bid);
            r * r
        })
        .sum()
}

fn gauss_newton(points: &[CurvePoint], a0: f64, b0: f64) -> ClickCurve {
    let mut a = a0;
    let mut b = b0;
    let mut cur = sse(points, &ClickCurve::new(a, b));
    let mut mu = 1e-3;
    for _ in 0..MAX_ITER {
        // Normal equations of the linearised problem.
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for p in points {
            let d = b + p.bid;
            let fa = p.bid / d;
            let fb = -a * p.bid / (d * d);
            let r = p.click_prob - a * fa;
            jaa += fa * fa;
            jab += fa * fb;
            jbb += fb * fb;
            ga += fa * r;
            gb += fb * r;
        }
        let mut accepted = false;
        let mut step_rel = 0.0;
        for _ in 0..60 {
            let m00 = jaa * (1.0 + mu);
            let m11 = jbb * (1.0 + mu);
            let det = m00 * m11 - jab * jab;
            if !(det.is_finite() && det > 0.0) {
                mu *= 10.0;
                continue;
            }
            let mut da = (m11 * ga - jab * gb) / det;
            let mut db = (m00 * gb - jab * ga) / det;
            while a + da <= 0.0 || b + db <= 0.0 {
                da *= 0.5;
                db *= 0.5;
            }
            let (na, nb) = (a + da, b + db);
            let next = sse(points, &ClickCurve::new(na, nb));
            if next <= cur {
                step_rel = (da / a).abs() + (db / b).abs();
                a = na;
                b = nb;
                cur = next;
                mu = (mu * 0.3).max(1e-12);
                accepted = true;
                break;
            }
            mu *= 10.0;
        }
        if !accepted || step_rel < STEP_TOL {
            break;
        }
    }
    ClickCurve::new(a, b)
}

/// Least-squares slope through the origin, clamped at zero.
pub fn fit_cost_curve(points: &[CurvePoint]) -> Result<CostCurve, CurveError> {
    Ok(CostCurve::new(cost_slope_unclamped(points)?.max(0.0)))
}

/// `Σ bid·cpc / Σ bid²` without the nonnegativity clamp.
pub fn cost_slope_unclamped(points: &[CurvePoint]) -> Result<f64, CurveError> {
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for p in points {
        if !(p.bid.is_finite() && p.cpc.is_finite()) {
            return Err(CurveError::InvalidPoint {
                bid: p.bid,
                click_prob: p.click_prob,
                cpc: p.cpc,
            });
        }
        sxy += p.bid * p.cpc;
        sxx += p.bid * p.bid;
    }
    if sxx <= 0.0 {
        return Err(CurveError::DegenerateFit("sum of squared bids is zero"));
    }
    Ok(sxy / sxx)
}

/// Fits both curves for a pooled set of hourly samples.
pub fn fit_hour(hour: i64, points: &[CurvePoint], n_auctions: u32) -> Result<HourlyCurveSet, CurveError> {
    let click = fit_click_curve(points)?;
    let cost = fit_cost_curve(points)?;
    Ok(HourlyCurveSet::new(hour, click, cost, n_auctions))
}
