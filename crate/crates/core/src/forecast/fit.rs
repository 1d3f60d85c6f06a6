use serde::{Deserialize, Serialize};

use crate::curves::HourlyCurveSet;
use crate::dataset::BidderSeries;
use crate::utility::{curvature_ql, grad_ql, grad_vis, QuasiLinearParams, VisibilityParams};

use super::optim::decreasing_root;
use super::rules::brreg_solve;
use super::{BiasParams, Bounds, FitError, FittedRule, RuleKind, RuleOptions};

/// Least-squares slope of bid changes on gradients, made nonnegative:
/// `|Σ Δb·g / Σ g²|`. `None` when all gradients vanish.
fn regress_eta(deltas: &[f64], grads: &[f64]) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (d, g) in deltas.iter().zip(grads) {
        num += d * g;
        den += g * g;
    }
    (den > 0.0).then(|| (num / den).abs())
}

fn transitions(series: &BidderSeries) -> Vec<usize> {
    series.steps(series.train_end).collect()
}

/// OGD step size from the regression of bid changes on the utility gradient
/// at the previous bid, over the training window.
pub fn fit_eta_ogd(series: &BidderSeries, value: f64) -> Result<f64, FitError> {
    let steps = transitions(series);
    if steps.is_empty() {
        return Err(FitError::TooShort(0));
    }
    let p = QuasiLinearParams { value };
    let (deltas, grads): (Vec<f64>, Vec<f64>) = steps
        .iter()
        .map(|&k| {
            let prev = &series.hours[k - 1];
            (series.hours[k].bid - prev.bid, grad_ql(&p, &prev.curves, prev.bid))
        })
        .unzip();
    regress_eta(&deltas, &grads).ok_or(FitError::ZeroGradient)
}

/// Log-spaced step sizes scaled by mean bid over mean absolute gradient.
pub fn eta_grid(series: &BidderSeries, value: f64, opts: &RuleOptions) -> Vec<f64> {
    let p = QuasiLinearParams { value };
    let train = series.train();
    let mean_grad = train.iter().map(|h| grad_ql(&p, &h.curves, h.bid).abs()).sum::<f64>() / train.len() as f64;
    let scale = if mean_grad > 0.0 {
        series.mean_train_bid() / mean_grad
    } else {
        1.0
    };
    let n = opts.eta_grid_points.max(1);
    let (l0, l1) = (opts.eta_grid_lo.ln(), opts.eta_grid_hi.ln());
    (0..n)
        .map(|i| {
            let f = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
            scale * (l0 + (l1 - l0) * f).exp()
        })
        .collect()
}

fn bounds_for(series: &BidderSeries, opts: &RuleOptions) -> Bounds {
    Bounds::new(opts.bound_multiple * series.mean_train_bid())
}

/// Grid search of the step size of BR-Reg or FTRL by one-step squared error
/// on the training window. Ties go to the smaller step size.
pub fn fit_eta_grid(series: &BidderSeries, value: f64, kind: RuleKind, opts: &RuleOptions) -> Result<f64, FitError> {
    let steps = transitions(series);
    if steps.is_empty() {
        return Err(FitError::TooShort(0));
    }
    let grid = eta_grid(series, value, opts);
    let bounds = bounds_for(series, opts);
    let mut sse = vec![0.0; grid.len()];
    match kind {
        RuleKind::BrReg => {
            for &k in &steps {
                let prev = &series.hours[k - 1];
                let target = series.hours[k].bid;
                for (s, &eta) in sse.iter_mut().zip(&grid) {
                    let pred = brreg_solve(value, eta, prev.bid, &prev.curves, bounds).bid;
                    *s += (target - pred) * (target - pred);
                }
            }
        }
        RuleKind::Ftrl => {
            let mut solver = FtrlGridSolver::new(value, opts.beta, bounds, opts.ftrl_solver_points);
            let mut next = 0;
            for &k in &steps {
                while next < k {
                    solver.push(&series.hours[next].curves);
                    next += 1;
                }
                let target = series.hours[k].bid;
                for (s, &eta) in sse.iter_mut().zip(&grid) {
                    let pred = solver.solve(1.0 / eta);
                    *s += (target - pred) * (target - pred);
                }
            }
        }
        other => panic!("no step-size grid search for {other}"),
    }
    let mut best = 0;
    for i in 1..grid.len() {
        if sse[i] < sse[best] {
            best = i;
        }
    }
    Ok(grid[best])
}

/// Tabulated discounted gradient sum of the FTRL objective.
///
/// The first and second derivatives of `Σ β^{t−τ} u_τ` are kept on a fixed
/// bid grid and updated in O(grid) per hour; the maximiser for any step size
/// is then found on a cubic Hermite interpolant. This makes the step-size
/// grid search linear rather than quadratic in the window length.
#[derive(Debug, Clone)]
pub struct FtrlGridSolver {
    params: QuasiLinearParams,
    beta: f64,
    bounds: Bounds,
    xs: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl FtrlGridSolver {
    pub fn new(value: f64, beta: f64, bounds: Bounds, points: usize) -> Self {
        let n = points.max(2);
        let xs = (0..n)
            .map(|i| bounds.lo + (bounds.hi - bounds.lo) * i as f64 / (n - 1) as f64)
            .collect();
        FtrlGridSolver {
            params: QuasiLinearParams { value },
            beta,
            bounds,
            xs,
            d1: vec![0.0; n],
            d2: vec![0.0; n],
        }
    }

    /// Adds the newest hour to the discounted sum.
    pub fn push(&mut self, curves: &HourlyCurveSet) {
        for ((x, d1), d2) in self.xs.iter().zip(self.d1.iter_mut()).zip(self.d2.iter_mut()) {
            *d1 = self.beta * *d1 + grad_ql(&self.params, curves, *x);
            *d2 = self.beta * *d2 + curvature_ql(&self.params, curves, *x);
        }
    }

    /// Maximiser of the tabulated objective minus `inv_eta·b²/2`.
    pub fn solve(&self, inv_eta: f64) -> f64 {
        let n = self.xs.len();
        let h = |i: usize| self.d1[i] - inv_eta * self.xs[i];
        if h(0) <= 0.0 {
            return self.bounds.lo;
        }
        if h(n - 1) >= 0.0 {
            return self.bounds.hi;
        }
        // h is decreasing: last index with h > 0.
        let (mut lo, mut hi) = (0, n - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if h(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (x0, x1) = (self.xs[lo], self.xs[hi]);
        let w = x1 - x0;
        let (f0, f1) = (self.d1[lo], self.d1[hi]);
        let (m0, m1) = (self.d2[lo] * w, self.d2[hi] * w);
        let eval = |x: f64| {
            let t = (x - x0) / w;
            let (t2, t3) = (t * t, t * t * t);
            let p = (2.0 * t3 - 3.0 * t2 + 1.0) * f0
                + (t3 - 2.0 * t2 + t) * m0
                + (-2.0 * t3 + 3.0 * t2) * f1
                + (t3 - t2) * m1;
            let dp = ((6.0 * t2 - 6.0 * t) * f0
                + (3.0 * t2 - 4.0 * t + 1.0) * m0
                + (-6.0 * t2 + 6.0 * t) * f1
                + (3.0 * t2 - 2.0 * t) * m1)
                / w;
            (p - inv_eta * x, dp - inv_eta)
        };
        decreasing_root(eval, x0, x1, 1e-13 * self.bounds.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasFit {
    pub alpha: f64,
    pub vis0: f64,
    pub eta: f64,
    pub train_mape: f64,
}

/// Grid fit of the visibility bias. The step size is refit for every
/// candidate by regressing bid changes on the biased gradient, and the
/// candidate with the lowest one-step training MAPE wins; ties go to the
/// smaller `α`, then the smaller `vis₀`.
pub fn fit_ogdbias(series: &BidderSeries, value: f64, opts: &RuleOptions) -> Result<BiasFit, FitError> {
    let steps = transitions(series);
    if steps.is_empty() {
        return Err(FitError::TooShort(0));
    }
    let bounds = bounds_for(series, opts);
    let prevs: Vec<(f64, &HourlyCurveSet)> = steps
        .iter()
        .map(|&k| (series.hours[k - 1].bid, &series.hours[k - 1].curves))
        .collect();
    let targets: Vec<f64> = steps.iter().map(|&k| series.hours[k].bid).collect();
    let deltas: Vec<f64> = prevs.iter().zip(&targets).map(|((b, _), t)| t - b).collect();

    let mut alphas = opts.alpha_grid.clone();
    alphas.sort_by(f64::total_cmp);
    let mut vis0s = opts.vis0_grid.clone();
    vis0s.sort_by(f64::total_cmp);

    let mut best: Option<BiasFit> = None;
    let mut grads = vec![0.0; prevs.len()];
    for &alpha in &alphas {
        for &vis0 in &vis0s {
            let vp = VisibilityParams {
                value,
                alpha,
                vis0,
                sign: opts.bias_sign,
            };
            for (g, (b, c)) in grads.iter_mut().zip(&prevs) {
                *g = grad_vis(&vp, c, *b);
            }
            let eta = regress_eta(&deltas, &grads).unwrap_or(0.0);
            let mut err = 0.0;
            for ((g, (b, _)), t) in grads.iter().zip(&prevs).zip(&targets) {
                let pred = bounds.clamp(b + eta * g);
                err += (t - pred).abs() / t;
            }
            let mape = err / targets.len() as f64;
            if best.is_none_or(|b| mape < b.train_mape) {
                best = Some(BiasFit {
                    alpha,
                    vis0,
                    eta,
                    train_mape: mape,
                });
            }
        }
    }
    Ok(best.expect("nonempty parameter grid"))
}

/// Fits the rule of the given kind on the training window of `series`.
pub fn fit_rule(kind: RuleKind, series: &BidderSeries, value: f64, opts: &RuleOptions) -> Result<FittedRule, FitError> {
    let bounds = bounds_for(series, opts);
    let mut rule = FittedRule {
        kind,
        value,
        eta: None,
        beta: opts.beta,
        bias: None,
        bounds,
    };
    match kind {
        RuleKind::Br | RuleKind::MomentumBr | RuleKind::Ftl => {}
        RuleKind::Ogd => rule.eta = Some(fit_eta_ogd(series, value)?),
        RuleKind::BrReg => rule.eta = Some(fit_eta_grid(series, value, kind, opts)?),
        RuleKind::Ftrl => {
            rule.eta = Some(match opts.ftrl_fixed_eta {
                Some(eta) => eta,
                None => fit_eta_grid(series, value, kind, opts)?,
            })
        }
        RuleKind::OgdBias => {
            let fit = fit_ogdbias(series, value, opts)?;
            rule.eta = Some(fit.eta);
            rule.bias = Some(BiasParams {
                alpha: fit.alpha,
                vis0: fit.vis0,
                sign: opts.bias_sign,
            });
        }
    }
    Ok(rule)
}

/// `(row, prediction)` for every training transition, each predicted from
/// the true previous bid.
pub fn one_step_predictions(rule: &FittedRule, series: &BidderSeries) -> Vec<(usize, f64)> {
    let curves = series.curves();
    transitions(series)
        .into_iter()
        .map(|k| (k, rule.next_bid(series.hours[k - 1].bid, &curves[..k])))
        .collect()
}

pub fn train_one_step_mape(rule: &FittedRule, series: &BidderSeries) -> f64 {
    let preds = one_step_predictions(rule, series);
    let n = preds.len() as f64;
    preds
        .iter()
        .map(|&(k, p)| {
            let t = series.hours[k].bid;
            (t - p).abs() / t
        })
        .sum::<f64>()
        / n
}
