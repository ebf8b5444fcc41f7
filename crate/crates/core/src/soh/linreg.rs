use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::train::{Normalizer, SequenceSample};
use crate::error::{Error, Result};

/// Ordinary least squares from one checkup's DRT vector to SOH, pooled over
/// every time step of every training sample. Inputs are standardized with
/// training statistics and the weights are the minimum-norm solution, so the
/// fit is defined even when features outnumber observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearBaseline {
    pub normalizer: Normalizer,
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearBaseline {
    pub fn fit(train: &[SequenceSample]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::arg("training split is empty"));
        }
        for s in train {
            s.validate()?;
        }
        let normalizer = Normalizer::fit(train)?;
        let d = normalizer.dim();
        let rows: Vec<Vec<f64>> = train.iter().flat_map(|s| normalizer.apply(&s.inputs)).collect();
        let y: Vec<f64> = train.iter().flat_map(|s| s.targets.iter().copied()).collect();
        let n = rows.len();
        let y_mean = y.iter().sum::<f64>() / n as f64;
        // Standardized columns already have zero mean, so centering y makes
        // the intercept exactly the target mean.
        let x = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let svd = x.svd(true, true);
        let eps = 1e-10 * svd.singular_values.max().max(f64::MIN_POSITIVE);
        let w = svd
            .solve(&yc, eps)
            .map_err(|e| Error::Data(format!("least-squares solve failed: {e}")))?;
        Ok(LinearBaseline {
            normalizer,
            weights: w.iter().copied().collect(),
            intercept: y_mean,
        })
    }

    pub fn predict(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        if let Some(r) = inputs.iter().find(|r| r.len() != self.weights.len()) {
            return Err(Error::arg(format!(
                "input width {} does not match baseline width {}",
                r.len(),
                self.weights.len()
            )));
        }
        Ok(self
            .normalizer
            .apply(inputs)
            .iter()
            .map(|r| self.intercept + r.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>())
            .collect())
    }
}
