use serde::{Deserialize, Serialize};
use xtal_nn::Tensor;

use crate::basis::BasisSet;
use crate::error::{Error, Result};

/// Per-time-step min-max bounds (MPa) taken from a single-crystal basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerPerStep {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalerPerStep {
    pub fn from_basis(basis: &BasisSet) -> Result<Self> {
        let t = basis.n_steps();
        if basis.stresses.is_empty() || basis.stresses.iter().any(|s| s.len() != t) {
            return Err(Error::Dimension("basis curves must share one time grid".into()));
        }
        let mut min = vec![f64::INFINITY; t];
        let mut max = vec![f64::NEG_INFINITY; t];
        for s in &basis.stresses {
            for (k, &v) in s.iter().enumerate() {
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
        }
        Self::from_bounds(min, max)
    }

    pub fn from_bounds(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() {
            return Err(Error::Dimension(format!("{} minima for {} maxima", min.len(), max.len())));
        }
        if let Some(k) = (0..min.len()).find(|&k| !(max[k] >= min[k])) {
            return Err(Error::Contract(format!("step {k}: max {} below min {}", max[k], min[k])));
        }
        Ok(Self { min, max })
    }

    pub fn len(&self) -> usize {
        self.min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.min.is_empty()
    }

    fn check(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(Error::Dimension(format!("{n} steps for a {}-step scaler", self.len())));
        }
        Ok(())
    }

    /// Degenerate steps (max == min) map to 0.5.
    pub fn scale(&self, stresses: &[f64]) -> Result<Vec<f64>> {
        self.check(stresses.len())?;
        Ok(stresses
            .iter()
            .enumerate()
            .map(|(k, &s)| {
                let span = self.max[k] - self.min[k];
                if span > 0.0 {
                    (s - self.min[k]) / span
                } else {
                    0.5
                }
            })
            .collect())
    }

    /// Degenerate steps return the step minimum.
    pub fn unscale(&self, scaled: &[f64]) -> Result<Vec<f64>> {
        self.check(scaled.len())?;
        Ok(scaled
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let span = self.max[k] - self.min[k];
                if span > 0.0 {
                    self.min[k] + v * span
                } else {
                    self.min[k]
                }
            })
            .collect())
    }

    /// Scaled basis as the `[T, 36]` branch input.
    pub fn scale_basis(&self, basis: &BasisSet) -> Result<Tensor> {
        let t = basis.n_steps();
        self.check(t)?;
        let scaled = basis.stresses.iter().map(|s| self.scale(s)).collect::<Result<Vec<_>>>()?;
        let m = scaled.len();
        let mut data = Vec::with_capacity(t * m);
        for k in 0..t {
            data.extend(scaled.iter().map(|s| s[k]));
        }
        Ok(Tensor::new(vec![t, m], data)?)
    }
}

/// Min-max scaling of the nine MP inputs over the training set. A feature
/// that is constant in training maps its training value to 0.5 and moves by
/// its relative change elsewhere, so unseen materials stay distinguishable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl InputScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::Contract("cannot fit an input scaler on no rows".into()));
        };
        let n = first.len();
        let mut min = vec![f64::INFINITY; n];
        let mut max = vec![f64::NEG_INFINITY; n];
        for r in rows {
            if r.len() != n {
                return Err(Error::Dimension(format!("input rows of length {} and {n}", r.len())));
            }
            for (k, &v) in r.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Argument(format!("non-finite input {v}")));
                }
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
        }
        Ok(Self { min, max })
    }

    pub fn scale(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.min.len() {
            return Err(Error::Dimension(format!("{} inputs, scaler expects {}", x.len(), self.min.len())));
        }
        Ok(x.iter()
            .enumerate()
            .map(|(k, &v)| {
                let (lo, hi) = (self.min[k], self.max[k]);
                if hi > lo {
                    (v - lo) / (hi - lo)
                } else if lo != 0.0 {
                    0.5 + (v - lo) / lo.abs()
                } else {
                    0.5 + v
                }
            })
            .collect())
    }
}
