//! Seeded synthetic corpus.
//!
//! Each subject gets `latent_dim` smooth traces (AR(1) innovations followed
//! by a moving average). The first three are the arousal, valence and liking
//! gold standards; the rest are nuisance factors. Every modality observes
//! `snr · latent + noise_sigma · ε` through its own fixed random linear
//! embedding, plus `noise_sigma` white noise per feature. Because the
//! latent-space noise is independent across modalities, combining modalities
//! raises the attainable CCC over any single one.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Corpus, SubjectRecord};
use crate::align::{shift_frames, DEFAULT_FRAME_PERIOD};
use crate::domain::{Dimension, FeatureDims, Modality};
use crate::error::{Error, Result};
use crate::nn::matrix::gemm_a_bt;
use crate::nn::Matrix;

const AR_COEFF: f64 = 0.97;
const SMOOTH_WINDOW: usize = 9;
/// Standard deviation of every latent trace.
pub const LATENT_SCALE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_subjects: usize,
    /// How many of the subjects are development subjects (named `Devel_NN`).
    pub n_dev_subjects: usize,
    pub frames_per_subject: usize,
    /// Number of latent traces; at least 3 (one per emotional dimension).
    pub latent_dim: usize,
    pub noise_sigma: f64,
    /// Signal gain per modality (audio, video, text). Zero means the modality
    /// carries no information about the labels.
    pub modality_snr: [f64; 3],
    pub rng_seed: u64,
    /// Annotation lag per dimension (arousal, valence, liking), in seconds.
    pub delay_seconds: Option<[f64; 3]>,
    pub frame_period: f64,
    pub dims: FeatureDims,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_subjects: 20,
            n_dev_subjects: 8,
            frames_per_subject: 500,
            latent_dim: 6,
            noise_sigma: 0.3,
            modality_snr: [1.0, 1.0, 1.0],
            rng_seed: 0,
            delay_seconds: None,
            frame_period: DEFAULT_FRAME_PERIOD,
            dims: FeatureDims::STANDARD,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 || self.frames_per_subject == 0 {
            return Err(Error::input("subject and frame counts must be positive"));
        }
        if self.n_dev_subjects >= self.n_subjects {
            return Err(Error::input(format!(
                "{} dev subjects leave no training subjects out of {}",
                self.n_dev_subjects, self.n_subjects
            )));
        }
        if self.latent_dim < 3 {
            return Err(Error::input("latent_dim must be at least 3"));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::input("noise_sigma must be nonnegative"));
        }
        if self.modality_snr.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::input("modality SNR values must be nonnegative"));
        }
        if !self.frame_period.is_finite() || self.frame_period <= 0.0 {
            return Err(Error::input("frame period must be positive"));
        }
        if let Some(delays) = self.delay_seconds {
            for d in delays {
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::input("delays must be nonnegative"));
                }
                if (d / self.frame_period).round() as usize >= self.frames_per_subject {
                    return Err(Error::input(format!("delay of {d} s exceeds the subject length")));
                }
            }
        }
        Ok(())
    }

    fn delay_frames(&self, d: Dimension) -> usize {
        self.delay_seconds
            .map_or(0, |ds| (ds[d.index()] / self.frame_period).round() as usize)
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Smooth zero-mean trace with standard deviation `LATENT_SCALE`.
fn latent_trace(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let innov = (1.0 - AR_COEFF * AR_COEFF).sqrt();
    let mut raw = Vec::with_capacity(n);
    let mut r = normal(rng);
    for _ in 0..n {
        r = AR_COEFF * r + innov * normal(rng);
        raw.push(r);
    }
    let half = SMOOTH_WINDOW / 2;
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            raw[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let mean = smooth.iter().sum::<f64>() / n as f64;
    let var = smooth.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let scale = if var > 0.0 { LATENT_SCALE / var.sqrt() } else { 0.0 };
    smooth.iter().map(|v| (v - mean) * scale).collect()
}

/// Generates a corpus; identical configs give bit-identical corpora.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Corpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let k = cfg.latent_dim;
    let n = cfg.frames_per_subject;

    let embed_scale = 1.0 / (k as f64).sqrt();
    let embeddings: Vec<Vec<f64>> = Modality::ALL
        .iter()
        .map(|&m| (0..cfg.dims.get(m) * k).map(|_| normal(&mut rng) * embed_scale).collect())
        .collect();

    let n_train = cfg.n_subjects - cfg.n_dev_subjects;
    let mut subjects = Vec::with_capacity(cfg.n_subjects);
    for s in 0..cfg.n_subjects {
        let id = if s < n_train {
            format!("Train_{:02}", s + 1)
        } else {
            format!("Devel_{:02}", s - n_train + 1)
        };

        let traces: Vec<Vec<f64>> = (0..k).map(|_| latent_trace(&mut rng, n)).collect();

        let mut features = Vec::with_capacity(3);
        for m in Modality::ALL {
            let snr = cfg.modality_snr[m.index()];
            // frames × latent observation of the latent state
            let mut observed = vec![0.0; n * k];
            for t in 0..n {
                for j in 0..k {
                    observed[t * k + j] = snr * traces[j][t] + cfg.noise_sigma * normal(&mut rng);
                }
            }
            let dim = cfg.dims.get(m);
            let mut x = Matrix::zeros(n, dim);
            gemm_a_bt(n, k, dim, &observed, &embeddings[m.index()], x.as_mut_slice());
            for v in x.as_mut_slice() {
                *v += cfg.noise_sigma * normal(&mut rng);
            }
            features.push(x);
        }
        let [a, v, t]: [Matrix; 3] = features.try_into().expect("three modalities");

        let label = |d: Dimension| shift_frames(&traces[d.index()], cfg.delay_frames(d));
        subjects.push(SubjectRecord {
            id,
            features: [a, v, t],
            labels: [
                label(Dimension::Arousal)?,
                label(Dimension::Valence)?,
                label(Dimension::Liking)?,
            ],
        });
    }
    Corpus::new(cfg.frame_period, cfg.dims, subjects)
}
