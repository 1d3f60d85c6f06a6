use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::BaselineError;

/// Ridge added to the normal equations when they are singular.
pub const RIDGE_FALLBACK: f64 = 1e-8;

/// Linear model `intercept + Σ wᵢ·xᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub weights: Vec<f64>,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

/// Ordinary least squares with intercept via the normal equations.
///
/// Feature columns that are constant over the rows carry no information
/// beyond the intercept and get weight zero. If the remaining system is
/// singular a small ridge is added.
pub fn fit_ar2(xs: &[Vec<f64>], ys: &[f64]) -> Result<LinearModel, BaselineError> {
    if xs.len() < 3 {
        return Err(BaselineError::TooFewRows { needed: 3, found: xs.len() });
    }
    let p = xs[0].len();
    let active: Vec<usize> = (0..p).filter(|&j| xs.iter().any(|r| r[j] != xs[0][j])).collect();
    let n = xs.len();
    let design = DMatrix::from_fn(n, active.len() + 1, |i, j| if j == 0 { 1.0 } else { xs[i][active[j - 1]] });
    let y = DVector::from_column_slice(ys);
    let xtx = design.transpose() * &design;
    let xty = design.transpose() * &y;
    let beta = match xtx.clone().cholesky() {
        Some(ch) if ch.l().diagonal().iter().all(|d| *d > 1e-12 * xtx.max().abs().sqrt()) => ch.solve(&xty),
        _ => {
            let ridge = xtx + DMatrix::identity(active.len() + 1, active.len() + 1) * RIDGE_FALLBACK;
            match ridge.clone().cholesky() {
                Some(ch) => ch.solve(&xty),
                None => ridge.lu().solve(&xty).ok_or(BaselineError::Singular)?,
            }
        }
    };
    let mut weights = vec![0.0; p];
    for (k, &j) in active.iter().enumerate() {
        weights[j] = beta[k + 1];
    }
    Ok(LinearModel {
        intercept: beta[0],
        weights,
    })
}
