//! Output scalers that close the gap between the attenuated magnitude of
//! regression outputs and the spread of the gold-standard labels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::mean_std;

/// Range and spread of the training-partition labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelStats {
    pub min: f64,
    pub max: f64,
    /// Population standard deviation.
    pub sigma: f64,
}

impl LabelStats {
    pub fn new(min: f64, max: f64, sigma: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && sigma.is_finite()) {
            return Err(Error::input("label statistics must be finite"));
        }
        if min > max {
            return Err(Error::input(format!("label min {min} exceeds max {max}")));
        }
        if sigma < 0.0 {
            return Err(Error::input("label sigma must be nonnegative"));
        }
        Ok(LabelStats { min, max, sigma })
    }

    /// Statistics of a (training) label sequence.
    pub fn from_labels(labels: &[f64]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::input("no labels to summarize"));
        }
        if labels.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("non-finite label"));
        }
        let min = labels.iter().copied().fold(f64::INFINITY, f64::min);
        let max = labels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (_, sigma) = mean_std(labels);
        LabelStats::new(min, max, sigma)
    }
}

/// Which scaler to apply to raw predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalerKind {
    None,
    MinMax,
    StdRatio,
    Decimal,
}

impl ScalerKind {
    pub const ALL: [ScalerKind; 4] = [
        ScalerKind::None,
        ScalerKind::MinMax,
        ScalerKind::StdRatio,
        ScalerKind::Decimal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScalerKind::None => "none",
            ScalerKind::MinMax => "minmax",
            ScalerKind::StdRatio => "stdratio",
            ScalerKind::Decimal => "decimal",
        }
    }
}

impl fmt::Display for ScalerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScalerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "none" => Ok(ScalerKind::None),
            "minmax" => Ok(ScalerKind::MinMax),
            "stdratio" => Ok(ScalerKind::StdRatio),
            "decimal" => Ok(ScalerKind::Decimal),
            other => Err(Error::input(format!(
                "unknown scaler '{other}' (expected none, minmax, stdratio or decimal)"
            ))),
        }
    }
}

/// Which way round the standard-deviation ratio is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdRatioForm {
    /// `σ_l / σ_p`: output spread matches the labels.
    #[default]
    LabelOverPrediction,
    /// `σ_p / σ_l`, the printed form. Kept for comparison runs.
    Literal,
}

fn check_finite(y: &[f64]) -> Result<()> {
    match y.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::input(format!("non-finite prediction at index {i}"))),
        None => Ok(()),
    }
}

fn check_nonempty(y: &[f64]) -> Result<()> {
    if y.is_empty() {
        Err(Error::input("empty prediction series"))
    } else {
        Ok(())
    }
}

/// Affine map of the prediction range `[min_p, max_p]` onto `[min_l, max_l]`.
pub fn min_max_scale(y: &[f64], stats: &LabelStats) -> Result<Vec<f64>> {
    check_nonempty(y)?;
    check_finite(y)?;
    let min_p = y.iter().copied().fold(f64::INFINITY, f64::min);
    let max_p = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span_p = max_p - min_p;
    if span_p <= 0.0 {
        return Err(Error::degenerate(
            "min-max scaling of a constant prediction series",
        ));
    }
    let span_l = stats.max - stats.min;
    Ok(y
        .iter()
        .map(|&v| {
            if v == min_p {
                stats.min
            } else if v == max_p {
                stats.max
            } else {
                (span_l * ((v - min_p) / span_p) + stats.min).clamp(stats.min, stats.max)
            }
        })
        .collect())
}

/// Element-wise multiplication by `σ_l / σ_p`.
pub fn std_ratio_scale(y: &[f64], stats: &LabelStats) -> Result<Vec<f64>> {
    std_ratio_scale_with(y, stats, StdRatioForm::LabelOverPrediction)
}

pub fn std_ratio_scale_with(y: &[f64], stats: &LabelStats, form: StdRatioForm) -> Result<Vec<f64>> {
    check_nonempty(y)?;
    check_finite(y)?;
    let (_, sigma_p) = mean_std(y);
    let factor = match form {
        StdRatioForm::LabelOverPrediction => {
            if sigma_p == 0.0 {
                return Err(Error::degenerate("prediction standard deviation is zero"));
            }
            stats.sigma / sigma_p
        }
        StdRatioForm::Literal => {
            if stats.sigma == 0.0 {
                return Err(Error::degenerate("label standard deviation is zero"));
            }
            sigma_p / stats.sigma
        }
    };
    Ok(y.iter().map(|v| factor * v).collect())
}

/// `x / 10^k`, split into steps so extreme exponents neither overflow nor
/// lose the exactness of small powers of ten.
fn shift_decimal(x: f64, k: i32) -> f64 {
    let mut x = x;
    let mut k = k;
    while k > 300 {
        x /= 1e300;
        k -= 300;
    }
    while k < -300 {
        x *= 1e300;
        k += 300;
    }
    if k >= 0 {
        x / 10f64.powi(k)
    } else {
        x * 10f64.powi(-k)
    }
}

/// Divides every value by `10^k` for the smallest integer `k` (possibly
/// negative) such that the largest magnitude drops below one.
///
/// Returns the scaled series and `k`. An all-zero series is returned as is
/// with `k = 0`.
pub fn decimal_scale(y: &[f64]) -> Result<(Vec<f64>, i32)> {
    check_finite(y)?;
    let max_abs = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs == 0.0 {
        return Ok((y.to_vec(), 0));
    }
    let mut k = max_abs.log10().floor() as i32 + 1;
    // log10 can be off by one near exact powers of ten; settle on the computed values.
    for _ in 0..8 {
        let scaled = shift_decimal(max_abs, k);
        if scaled >= 1.0 {
            k += 1;
        } else if 10.0 * scaled < 1.0 {
            k -= 1;
        } else {
            break;
        }
    }
    Ok((y.iter().map(|&v| shift_decimal(v, k)).collect(), k))
}

/// Applies the scaler selected by `kind`; `None` returns the input unchanged.
pub fn apply_scaler(kind: ScalerKind, y: &[f64], stats: &LabelStats) -> Result<Vec<f64>> {
    apply_scaler_with(kind, y, stats, StdRatioForm::default())
}

pub fn apply_scaler_with(
    kind: ScalerKind,
    y: &[f64],
    stats: &LabelStats,
    form: StdRatioForm,
) -> Result<Vec<f64>> {
    match kind {
        ScalerKind::None => {
            check_finite(y)?;
            Ok(y.to_vec())
        }
        ScalerKind::MinMax => min_max_scale(y, stats),
        ScalerKind::StdRatio => std_ratio_scale_with(y, stats, form),
        ScalerKind::Decimal => decimal_scale(y).map(|(out, _)| out),
    }
}
