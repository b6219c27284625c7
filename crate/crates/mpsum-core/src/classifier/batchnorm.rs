//! Per-feature batch normalization with biased batch variance and
//! momentum-0.1 running statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNormState {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

/// What the backward pass needs from a train-mode forward.
#[derive(Debug, Clone)]
pub struct BatchNormCache {
    x_hat: Vec<Vec<f64>>,
    inv_std: Vec<f64>,
}

impl BatchNormState {
    pub fn new(n_features: usize) -> Self {
        Self {
            gamma: vec![1.0; n_features],
            beta: vec![0.0; n_features],
            running_mean: vec![0.0; n_features],
            running_var: vec![1.0; n_features],
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    pub fn n_features(&self) -> usize {
        self.gamma.len()
    }

    /// Train-mode forward: normalize by batch statistics (biased variance)
    /// and fold them into the running statistics.
    pub fn forward_train(
        &mut self,
        batch: &[Vec<f64>],
    ) -> Result<(Vec<Vec<f64>>, BatchNormCache)> {
        let b = batch.len();
        if b < 2 {
            return Err(Error::BatchTooSmall(b));
        }
        let n = self.n_features();
        if batch.iter().any(|x| x.len() != n) {
            return Err(Error::Shape("batch rows disagree with feature count".into()));
        }

        let mut mean = vec![0.0; n];
        for row in batch {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= b as f64;
        }
        let mut var = vec![0.0; n];
        for row in batch {
            for f in 0..n {
                let d = row[f] - mean[f];
                var[f] += d * d;
            }
        }
        for v in &mut var {
            *v /= b as f64;
        }

        let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + self.eps).sqrt()).collect();
        let x_hat: Vec<Vec<f64>> = batch
            .iter()
            .map(|row| {
                (0..n)
                    .map(|f| (row[f] - mean[f]) * inv_std[f])
                    .collect()
            })
            .collect();
        let out: Vec<Vec<f64>> = x_hat
            .iter()
            .map(|row| {
                (0..n)
                    .map(|f| row[f] * self.gamma[f] + self.beta[f])
                    .collect()
            })
            .collect();

        for f in 0..n {
            self.running_mean[f] =
                (1.0 - self.momentum) * self.running_mean[f] + self.momentum * mean[f];
            self.running_var[f] =
                (1.0 - self.momentum) * self.running_var[f] + self.momentum * var[f];
        }

        Ok((out, BatchNormCache { x_hat, inv_std }))
    }

    /// Eval-mode forward for one sample, using running statistics only.
    pub fn forward_eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.n_features();
        if x.len() != n {
            return Err(Error::Shape(format!(
                "expected {n} features, got {}",
                x.len()
            )));
        }
        Ok((0..n)
            .map(|f| {
                (x[f] - self.running_mean[f]) / (self.running_var[f] + self.eps).sqrt()
                    * self.gamma[f]
                    + self.beta[f]
            })
            .collect())
    }

    /// Gradients for a train-mode forward: returns (g_input, g_gamma, g_beta).
    pub fn backward(
        &self,
        cache: &BatchNormCache,
        g_out: &[Vec<f64>],
    ) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let b = g_out.len();
        let n = self.n_features();
        let mut g_gamma = vec![0.0; n];
        let mut g_beta = vec![0.0; n];
        let mut sum_gxhat = vec![0.0; n];
        let mut sum_gxhat_xhat = vec![0.0; n];
        for i in 0..b {
            for f in 0..n {
                let gx_hat = g_out[i][f] * self.gamma[f];
                g_gamma[f] += g_out[i][f] * cache.x_hat[i][f];
                g_beta[f] += g_out[i][f];
                sum_gxhat[f] += gx_hat;
                sum_gxhat_xhat[f] += gx_hat * cache.x_hat[i][f];
            }
        }
        let g_x: Vec<Vec<f64>> = (0..b)
            .map(|i| {
                (0..n)
                    .map(|f| {
                        let gx_hat = g_out[i][f] * self.gamma[f];
                        cache.inv_std[f]
                            * (gx_hat
                                - sum_gxhat[f] / b as f64
                                - cache.x_hat[i][f] * sum_gxhat_xhat[f] / b as f64)
                    })
                    .collect()
            })
            .collect();
        (g_x, g_gamma, g_beta)
    }
}
