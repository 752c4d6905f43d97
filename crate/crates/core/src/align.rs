//! Delay compensation between predictions and the gold standard.
//!
//! Annotators react to what they see with a lag, so the gold standard trails
//! the signal. Predictions are shifted later in time by a whole number of
//! frames; the leading positions are padded with the first prediction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics;

/// Frame period used when a corpus does not say otherwise (seconds).
pub const DEFAULT_FRAME_PERIOD: f64 = 0.1;

/// A delay expressed in seconds together with the frame period it applies to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySpec {
    pub delay_seconds: f64,
    pub frame_period_seconds: f64,
}

impl DelaySpec {
    pub fn new(delay_seconds: f64, frame_period_seconds: f64) -> Result<Self> {
        if !delay_seconds.is_finite() || delay_seconds < 0.0 {
            return Err(Error::input(format!(
                "delay must be a nonnegative number of seconds, got {delay_seconds}"
            )));
        }
        if !frame_period_seconds.is_finite() || frame_period_seconds <= 0.0 {
            return Err(Error::input(format!(
                "frame period must be positive, got {frame_period_seconds}"
            )));
        }
        Ok(DelaySpec {
            delay_seconds,
            frame_period_seconds,
        })
    }

    /// Delay rounded to the nearest whole frame.
    pub fn frames(&self) -> usize {
        (self.delay_seconds / self.frame_period_seconds).round() as usize
    }
}

/// Shifts `y` later by `frames` positions, padding the front with `y[0]`.
pub fn shift_frames(y: &[f64], frames: usize) -> Result<Vec<f64>> {
    if frames == 0 {
        return Ok(y.to_vec());
    }
    if frames >= y.len() {
        return Err(Error::input(format!(
            "delay of {frames} frames does not fit a series of length {}",
            y.len()
        )));
    }
    let mut out = Vec::with_capacity(y.len());
    out.resize(frames, y[0]);
    out.extend_from_slice(&y[..y.len() - frames]);
    Ok(out)
}

/// Shifts `y` later by the delay in `spec`, rounded to whole frames.
pub fn shift_series(y: &[f64], spec: &DelaySpec) -> Result<Vec<f64>> {
    shift_frames(y, spec.frames())
}

/// Shifts each segment independently and concatenates the results. Segments
/// are typically one subject each, so padding never crosses a boundary.
pub fn shift_segments(y: &[f64], lengths: &[usize], frames: usize) -> Result<Vec<f64>> {
    let total: usize = lengths.iter().sum();
    if total != y.len() {
        return Err(Error::input(format!(
            "segment lengths sum to {total} but the series has {} values",
            y.len()
        )));
    }
    let mut out = Vec::with_capacity(y.len());
    let mut start = 0;
    for &len in lengths {
        out.extend(shift_frames(&y[start..start + len], frames)?);
        start += len;
    }
    Ok(out)
}

/// CCC as a function of the compensation delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayCurve {
    /// `(delay_seconds, ccc)` in increasing delay order.
    pub points: Vec<(f64, f64)>,
    /// Delay with the highest CCC; the smallest such delay on ties.
    pub best_delay: f64,
    pub best_ccc: f64,
}

impl DelayCurve {
    /// Builds a curve from `(delay_seconds, ccc)` points in increasing delay
    /// order, locating the best delay.
    pub fn from_points(points: Vec<(f64, f64)>) -> Result<Self> {
        let Some(&first) = points.first() else {
            return Err(Error::input("delay curve has no points"));
        };
        let mut best = first;
        for &(d, c) in &points[1..] {
            if c > best.1 {
                best = (d, c);
            }
        }
        Ok(DelayCurve {
            points,
            best_delay: best.0,
            best_ccc: best.1,
        })
    }

    /// Index of the best point within `points`.
    pub fn best_index(&self) -> usize {
        self.points
            .iter()
            .position(|&(d, _)| d == self.best_delay)
            .unwrap_or(0)
    }
}

fn candidate_delays(d_max: f64, step: f64) -> Result<Vec<f64>> {
    if !d_max.is_finite() || d_max < 0.0 {
        return Err(Error::input(format!("maximum delay must be nonnegative, got {d_max}")));
    }
    if !step.is_finite() || step < 0.0 || step > d_max {
        return Err(Error::input(format!(
            "delay step must lie in [0, {d_max}], got {step}"
        )));
    }
    if step == 0.0 {
        if d_max == 0.0 {
            return Ok(vec![0.0]);
        }
        return Err(Error::input("delay step of zero with a positive maximum"));
    }
    let count = (d_max / step + 1e-9).floor() as usize;
    // snapped to a 1e-9 s grid so 3 × 0.1 reads back as 0.3
    Ok((0..=count)
        .map(|i| (i as f64 * step * 1e9).round() / 1e9)
        .collect())
}

/// Scores `predictions` against `gold` at every delay in `{0, step, …, d_max}`.
pub fn delay_scan(
    predictions: &[f64],
    gold: &[f64],
    d_max: f64,
    step: f64,
    frame_period: f64,
) -> Result<DelayCurve> {
    delay_scan_segments(predictions, gold, &[predictions.len()], d_max, step, frame_period)
}

/// Like [`delay_scan`], but shifting each segment separately before scoring
/// the concatenation.
pub fn delay_scan_segments(
    predictions: &[f64],
    gold: &[f64],
    lengths: &[usize],
    d_max: f64,
    step: f64,
    frame_period: f64,
) -> Result<DelayCurve> {
    if predictions.len() != gold.len() {
        return Err(Error::input(format!(
            "length mismatch: {} predictions vs {} gold values",
            predictions.len(),
            gold.len()
        )));
    }
    let delays = candidate_delays(d_max, step)?;
    let mut points = Vec::with_capacity(delays.len());
    for d in delays {
        let frames = DelaySpec::new(d, frame_period)?.frames();
        let shifted = shift_segments(predictions, lengths, frames)?;
        points.push((d, metrics::ccc(&shifted, gold)?));
    }
    DelayCurve::from_points(points)
}
