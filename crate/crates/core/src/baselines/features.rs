use serde::{Deserialize, Serialize};

use crate::curves::HourlyCurveSet;
use crate::dataset::BidderSeries;

/// Model inputs for one prediction: the two previous bids and, for the
/// econ variants, the most recent curves evaluated at those bids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub lag1: f64,
    pub lag2: f64,
    /// `x(lag1), x(lag2), p(lag1), p(lag2), x′(lag1), p′(lag1)`.
    pub econ: Option<[f64; 6]>,
}

impl FeatureRow {
    pub fn new(lag1: f64, lag2: f64, curves: Option<&HourlyCurveSet>) -> Self {
        let econ = curves.map(|c| {
            [
                c.click.eval(lag1),
                c.click.eval(lag2),
                c.cost.eval(lag1),
                c.cost.eval(lag2),
                c.click.grad(lag1),
                c.cost.grad(lag1),
            ]
        });
        FeatureRow { lag1, lag2, econ }
    }

    pub fn len(&self) -> usize {
        if self.econ.is_some() {
            8
        } else {
            2
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.lag1, self.lag2];
        if let Some(e) = self.econ {
            v.extend_from_slice(&e);
        }
        v
    }
}

/// Supervised rows from the first `end` hours: target `b_k` with lags
/// `b_{k−1}, b_{k−2}` and the curves of hour `k − 1`. Rows whose lags span a
/// break are skipped.
pub fn training_rows(series: &BidderSeries, end: usize, econ: bool) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 2..end {
        if !series.is_step(k) || !series.is_step(k - 1) {
            continue;
        }
        let h = &series.hours;
        let row = FeatureRow::new(h[k - 1].bid, h[k - 2].bid, econ.then_some(&h[k - 1].curves));
        xs.push(row.to_vec());
        ys.push(h[k].bid);
    }
    (xs, ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{ClickCurve, CostCurve};

    #[test]
    fn econ_vector_layout() {
        let c = HourlyCurveSet::new(0, ClickCurve::new(1.0, 1.0), CostCurve::new(0.5), 1);
        let r = FeatureRow::new(1.0, 3.0, Some(&c));
        assert_eq!(r.to_vec(), vec![1.0, 3.0, 0.5, 0.75, 0.5, 1.5, 0.25, 0.5]);
        assert_eq!(FeatureRow::new(1.0, 3.0, None).len(), 2);
    }
}
