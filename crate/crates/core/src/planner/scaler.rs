use log::warn;
use serde::{Deserialize, Serialize};

use super::N_FEATURES;
use crate::error::{Error, Result};

/// Smallest standard deviation used for scaling; constant features get this.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-feature standardisation `(x - mean) / std` with population std.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: [f64; N_FEATURES],
    pub std: [f64; N_FEATURES],
}

impl FeatureScaler {
    pub fn identity() -> Self {
        Self { mean: [0.0; N_FEATURES], std: [1.0; N_FEATURES] }
    }

    /// Fits on `rows`; returns the scaler and the indices of features whose
    /// std had to be floored.
    pub fn fit(rows: &[[f64; N_FEATURES]]) -> Result<(Self, Vec<usize>)> {
        if rows.is_empty() {
            return Err(Error::Empty("cannot fit a scaler on zero rows"));
        }
        let n = rows.len() as f64;
        let mut mean = [0.0; N_FEATURES];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = [0.0; N_FEATURES];
        for r in rows {
            for j in 0..N_FEATURES {
                var[j] += (r[j] - mean[j]).powi(2);
            }
        }
        let mut floored = Vec::new();
        let std = std::array::from_fn(|j| {
            let s = (var[j] / n).sqrt();
            if s < STD_FLOOR {
                warn!("feature {j} is constant ({}); std floored at {STD_FLOOR}", mean[j]);
                floored.push(j);
                STD_FLOOR
            } else {
                s
            }
        });
        Ok((Self { mean, std }, floored))
    }

    pub fn apply(&self, x: &[f64; N_FEATURES]) -> [f64; N_FEATURES] {
        std::array::from_fn(|j| (x[j] - self.mean[j]) / self.std[j])
    }

    pub fn unapply(&self, z: &[f64; N_FEATURES]) -> [f64; N_FEATURES] {
        std::array::from_fn(|j| z[j] * self.std[j] + self.mean[j])
    }
}
