use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::RegionObservation;

/// An online quality scorer. Implementations are immutable once built.
pub trait StudentModel: Send + Sync {
    fn predict(&self, observation: &RegionObservation) -> Result<f64>;
}

/// Returns the teacher score already stored on the observation.
#[derive(Debug, Clone, Copy, Default)]
pub struct PassthroughStudent;

impl StudentModel for PassthroughStudent {
    fn predict(&self, observation: &RegionObservation) -> Result<f64> {
        observation
            .teacher_score
            .ok_or_else(|| Error::contract("passthrough student needs a stored teacher score"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub ridge_lambda: f64,
    pub samples: usize,
}

/// Linear regressor from the observation embedding to a quality score.
/// `Default` gives an unfitted model, which refuses to predict.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RidgeStudent {
    pub fit: Option<RidgeFit>,
}

impl RidgeStudent {
    pub fn predict_vector(&self, x: &[f64]) -> Result<f64> {
        let fit = self
            .fit
            .as_ref()
            .ok_or_else(|| Error::contract("student model has not been fitted"))?;
        if x.len() != fit.weights.len() {
            return Err(Error::contract(format!(
                "student expects {} inputs, got {}",
                fit.weights.len(),
                x.len()
            )));
        }
        Ok(fit.intercept + fit.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
    }
}

impl StudentModel for RidgeStudent {
    fn predict(&self, observation: &RegionObservation) -> Result<f64> {
        self.predict_vector(&observation.embedding)
    }
}

/// Minimizes `mean((w·x + b - y)^2) + ridge_lambda * |w|^2`; the intercept is
/// not penalized. Rank-deficient systems take the minimum-norm solution.
pub fn fit_student(training: &[(Vec<f64>, f64)], ridge_lambda: f64) -> Result<RidgeStudent> {
    if !(ridge_lambda >= 0.0) || !ridge_lambda.is_finite() {
        return Err(Error::contract(format!("ridge_lambda must be >= 0, got {ridge_lambda}")));
    }
    let n = training.len();
    if n == 0 {
        return Err(Error::contract("student training set is empty"));
    }
    let dim = training[0].0.len();
    if training.iter().any(|(x, y)| x.len() != dim || !y.is_finite() || x.iter().any(|v| !v.is_finite())) {
        return Err(Error::contract("student training samples must be finite with one dimension"));
    }
    let nf = n as f64;
    let mut mean_x = vec![0.0; dim];
    let mut mean_y = 0.0;
    for (x, y) in training {
        for (m, v) in mean_x.iter_mut().zip(x) {
            *m += v / nf;
        }
        mean_y += y / nf;
    }
    let xc = DMatrix::from_fn(n, dim, |i, j| training[i].0[j] - mean_x[j]);
    let yc = DVector::from_fn(n, |i, _| training[i].1 - mean_y);
    let mut a = xc.transpose() * &xc / nf;
    for j in 0..dim {
        a[(j, j)] += ridge_lambda;
    }
    let b = xc.transpose() * yc / nf;
    let w = if dim == 0 {
        DVector::zeros(0)
    } else {
        let svd = a.svd(true, true);
        let tol = 1e-12 * svd.singular_values.max().max(1e-300);
        svd.solve(&b, tol).map_err(|e| Error::contract(format!("ridge solve failed: {e}")))?
    };
    let weights: Vec<f64> = w.iter().copied().collect();
    let intercept = mean_y - weights.iter().zip(&mean_x).map(|(w, m)| w * m).sum::<f64>();
    Ok(RidgeStudent {
        fit: Some(RidgeFit {
            weights,
            intercept,
            ridge_lambda,
            samples: n,
        }),
    })
}
