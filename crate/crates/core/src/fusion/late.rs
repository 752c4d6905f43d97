use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::Modality;
use crate::error::{Error, Result};

/// Affine combination of unimodal predictions fitted by least squares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LateFusionModel {
    pub modalities: Vec<Modality>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// The design matrix was rank deficient; the minimum-norm solution was used.
    pub rank_deficient: bool,
}

fn check_columns(columns: &[(Modality, &[f64])], n: usize, min_len: usize) -> Result<()> {
    if columns.is_empty() {
        return Err(Error::input("late fusion needs at least one modality"));
    }
    for (m, c) in columns {
        if c.len() != n {
            return Err(Error::input(format!(
                "{m} predictions have {} values, expected {n}",
                c.len()
            )));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite {m} prediction")));
        }
    }
    if n < min_len {
        return Err(Error::input(format!(
            "late fusion needs at least {min_len} samples, got {n}"
        )));
    }
    Ok(())
}

/// Least-squares fit (with intercept) of `gold` on the per-modality
/// prediction series.
pub fn fit_late_fusion(predictions: &[(Modality, &[f64])], gold: &[f64]) -> Result<LateFusionModel> {
    let n = gold.len();
    check_columns(predictions, n, 4)?;
    if gold.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("non-finite gold value"));
    }
    let k = predictions.len();
    let design = DMatrix::from_fn(n, k + 1, |r, c| if c == 0 { 1.0 } else { predictions[c - 1].1[r] });
    let target = DVector::from_column_slice(gold);

    let svd = design.svd(true, true);
    let max_sv = svd.singular_values.max();
    let tol = max_sv * (n.max(k + 1) as f64) * f64::EPSILON;
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    let solution = svd
        .solve(&target, tol)
        .map_err(|e| Error::degenerate(format!("least-squares solve failed: {e}")))?;

    Ok(LateFusionModel {
        modalities: predictions.iter().map(|(m, _)| *m).collect(),
        coefficients: solution.iter().skip(1).copied().collect(),
        intercept: solution[0],
        rank_deficient: rank < k + 1,
    })
}

impl LateFusionModel {
    /// Fused prediction from per-modality series given in the fitted order.
    pub fn predict(&self, predictions: &[&[f64]]) -> Result<Vec<f64>> {
        if predictions.len() != self.coefficients.len() {
            return Err(Error::input(format!(
                "model fuses {} modalities, got {}",
                self.coefficients.len(),
                predictions.len()
            )));
        }
        let n = predictions.first().map_or(0, |p| p.len());
        let cols: Vec<(Modality, &[f64])> = self.modalities.iter().copied().zip(predictions.iter().copied()).collect();
        check_columns(&cols, n, 1)?;
        Ok((0..n)
            .map(|i| {
                self.intercept
                    + self
                        .coefficients
                        .iter()
                        .zip(predictions)
                        .map(|(w, p)| w * p[i])
                        .sum::<f64>()
            })
            .collect())
    }

    /// Sum of squared residuals on the given data.
    pub fn residual_sum_of_squares(&self, predictions: &[&[f64]], gold: &[f64]) -> Result<f64> {
        let fused = self.predict(predictions)?;
        if fused.len() != gold.len() {
            return Err(Error::input("gold length differs from predictions"));
        }
        Ok(fused.iter().zip(gold).map(|(f, g)| (f - g) * (f - g)).sum())
    }
}

/// Signed share of each coefficient in the coefficient sum, in percent.
/// The intercept is excluded. Shares sum to 100 and may be negative.
pub fn modality_importance(model: &LateFusionModel) -> Result<Vec<f64>> {
    let total: f64 = model.coefficients.iter().sum();
    if total == 0.0 || !total.is_finite() {
        return Err(Error::degenerate("late-fusion coefficients sum to zero"));
    }
    Ok(model.coefficients.iter().map(|w| w / total * 100.0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn model(w: Vec<f64>) -> LateFusionModel {
        LateFusionModel {
            modalities: Modality::ALL.to_vec(),
            coefficients: w,
            intercept: 0.3,
            rank_deficient: false,
        }
    }

    #[test]
    fn exact_recovery_of_single_modality() {
        let (a, v, t) = (noise(50, 1), noise(50, 2), noise(50, 3));
        let fit = fit_late_fusion(
            &[(Modality::Audio, &a), (Modality::Video, &v), (Modality::Text, &t)],
            &a,
        )
        .unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-10);
        assert!(fit.coefficients[1].abs() < 1e-10);
        assert!(fit.coefficients[2].abs() < 1e-10);
        assert!(fit.intercept.abs() < 1e-10);
        assert!(!fit.rank_deficient);
    }

    #[test]
    fn recovers_constructed_mixture() {
        let (a, v, t) = (noise(200, 4), noise(200, 5), noise(200, 6));
        let gold: Vec<f64> = a.iter().zip(&v).map(|(x, y)| 0.5 * x + 0.5 * y).collect();
        let fit = fit_late_fusion(
            &[(Modality::Audio, &a), (Modality::Video, &v), (Modality::Text, &t)],
            &gold,
        )
        .unwrap();
        for (w, e) in fit.coefficients.iter().zip([0.5, 0.5, 0.0]) {
            assert!((w - e).abs() < 1e-10);
        }
    }

    #[test]
    fn pure_noise_modality_gets_small_weight() {
        let n = 1000;
        let signal = noise(n, 7);
        let m1: Vec<f64> = signal.iter().zip(noise(n, 8)).map(|(s, e)| s + 0.3 * e).collect();
        let m2: Vec<f64> = signal.iter().zip(noise(n, 9)).map(|(s, e)| s + 0.5 * e).collect();
        let m3 = noise(n, 10);
        let fit = fit_late_fusion(
            &[(Modality::Audio, &m1), (Modality::Video, &m2), (Modality::Text, &m3)],
            &signal,
        )
        .unwrap();
        assert!(fit.coefficients[2].abs() < 0.05, "{:?}", fit.coefficients);
    }

    #[test]
    fn duplicate_modality_is_flagged_and_min_norm() {
        let a = noise(40, 11);
        let t = noise(40, 12);
        let fit = fit_late_fusion(
            &[(Modality::Audio, &a), (Modality::Video, &a), (Modality::Text, &t)],
            &a,
        )
        .unwrap();
        assert!(fit.rank_deficient);
        // minimum norm splits the weight evenly between the identical columns
        assert!((fit.coefficients[0] - 0.5).abs() < 1e-9);
        assert!((fit.coefficients[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn fit_beats_single_modality_fits() {
        let n = 120;
        let (a, v, t) = (noise(n, 13), noise(n, 14), noise(n, 15));
        let gold: Vec<f64> = (0..n).map(|i| 0.4 * a[i] - 0.2 * v[i] + 0.1 * t[i] + 0.01 * i as f64).collect();
        let full = fit_late_fusion(
            &[(Modality::Audio, &a), (Modality::Video, &v), (Modality::Text, &t)],
            &gold,
        )
        .unwrap();
        let rss = full.residual_sum_of_squares(&[&a, &v, &t], &gold).unwrap();
        for (m, c) in [(Modality::Audio, &a), (Modality::Video, &v), (Modality::Text, &t)] {
            let single = fit_late_fusion(&[(m, c)], &gold).unwrap();
            assert!(rss <= single.residual_sum_of_squares(&[c], &gold).unwrap());
        }
    }

    #[test]
    fn rejects_short_or_mismatched_inputs() {
        let a = [1.0, 2.0, 3.0];
        assert!(fit_late_fusion(&[(Modality::Audio, &a)], &a).is_err());
        let b = [1.0, 2.0, 3.0, 4.0];
        assert!(fit_late_fusion(&[(Modality::Audio, &b)], &a).is_err());
        assert!(fit_late_fusion(&[], &b).is_err());
    }

    #[test]
    fn importance_examples() {
        let pct = modality_importance(&model(vec![0.5, 0.25, 0.25])).unwrap();
        assert_eq!(pct, vec![50.0, 25.0, 25.0]);
        let pct = modality_importance(&model(vec![-0.1, 0.2, 0.9])).unwrap();
        for (p, e) in pct.iter().zip([-10.0, 20.0, 90.0]) {
            assert!((p - e).abs() < 1e-9);
        }
        assert!((pct.iter().sum::<f64>() - 100.0).abs() < 1e-9);
        assert!(matches!(
            modality_importance(&model(vec![1.0, -1.0, 0.0])),
            Err(Error::Degenerate(_))
        ));
    }
}
