//! Training loss and evaluation measure.
//!
//! Both operate on a [`ScoredPair`]: a prediction sequence and a gold-standard
//! sequence of equal length. All moments are population moments (divide by `m`).

use crate::error::{Error, Result};

/// Predictions and gold-standard values of equal, nonzero length, all finite.
#[derive(Debug, Clone, Copy)]
pub struct ScoredPair<'a> {
    predictions: &'a [f64],
    gold: &'a [f64],
}

impl<'a> ScoredPair<'a> {
    pub fn new(predictions: &'a [f64], gold: &'a [f64]) -> Result<Self> {
        if predictions.len() != gold.len() {
            return Err(Error::input(format!(
                "length mismatch: {} predictions vs {} gold values",
                predictions.len(),
                gold.len()
            )));
        }
        if predictions.is_empty() {
            return Err(Error::input("cannot score an empty sequence"));
        }
        if let Some(i) = predictions.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite prediction at index {i}")));
        }
        if let Some(i) = gold.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite gold value at index {i}")));
        }
        Ok(ScoredPair { predictions, gold })
    }

    pub fn predictions(&self) -> &'a [f64] {
        self.predictions
    }

    pub fn gold(&self) -> &'a [f64] {
        self.gold
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }

    /// Mean squared error `(1/m) Σ (ŷᵢ − yᵢ)²`.
    pub fn mse(&self) -> f64 {
        let sum: f64 = self
            .predictions
            .iter()
            .zip(self.gold)
            .map(|(p, g)| (p - g) * (p - g))
            .sum();
        sum / self.len() as f64
    }

    /// Concordance correlation coefficient
    /// `2 s_pg / (s²_p + s²_g + (p̄ − ḡ)²)`.
    ///
    /// When the denominator is exactly zero (both sequences constant with the
    /// same value) the result is `1.0`. Two constant sequences with different
    /// values score `0.0`.
    pub fn ccc(&self) -> f64 {
        let m = self.len() as f64;
        let mean_p = self.predictions.iter().sum::<f64>() / m;
        let mean_g = self.gold.iter().sum::<f64>() / m;

        let (var_p, var_g, cov) = self.predictions.iter().zip(self.gold).fold(
            (0.0, 0.0, 0.0),
            |(vp, vg, c), (p, g)| {
                let dp = p - mean_p;
                let dg = g - mean_g;
                (vp + dp * dp, vg + dg * dg, c + dp * dg)
            },
        );
        let (var_p, var_g, cov) = (var_p / m, var_g / m, cov / m);

        let gap = mean_p - mean_g;
        let denom = var_p + var_g + gap * gap;
        if denom == 0.0 {
            return 1.0;
        }
        (2.0 * cov / denom).clamp(-1.0, 1.0)
    }
}

/// Mean squared error between `predictions` and `gold`.
pub fn mse(predictions: &[f64], gold: &[f64]) -> Result<f64> {
    Ok(ScoredPair::new(predictions, gold)?.mse())
}

/// Concordance correlation coefficient between `predictions` and `gold`.
pub fn ccc(predictions: &[f64], gold: &[f64]) -> Result<f64> {
    Ok(ScoredPair::new(predictions, gold)?.ccc())
}

/// Population mean and standard deviation.
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
    (mean, var.sqrt())
}
