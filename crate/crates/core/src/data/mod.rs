//! Corpus representation, on-disk format, partitioning and a synthetic
//! generator.

pub(crate) mod io;
mod partition;
mod synth;

pub use io::{load_corpus, write_corpus, LABELS_HEADER, META_FILE};
pub use partition::{is_dev_subject, split_partition, Partition};
pub use synth::{generate_synthetic, SynthConfig};

use std::collections::HashSet;

use crate::domain::{Dimension, FeatureDims, Modality};
use crate::error::{Error, Result};
use crate::nn::{Matrix, Samples};

/// One subject: a feature matrix per modality (row = frame) and a label
/// trace per dimension, all of the same length.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub id: String,
    /// Audio, video, text.
    pub features: [Matrix; 3],
    /// Arousal, valence, liking.
    pub labels: [Vec<f64>; 3],
}

impl SubjectRecord {
    pub fn frames(&self) -> usize {
        self.labels[0].len()
    }

    pub fn features(&self, modality: Modality) -> &Matrix {
        &self.features[modality.index()]
    }

    pub fn labels(&self, dimension: Dimension) -> &[f64] {
        &self.labels[dimension.index()]
    }

    /// Checks shapes against `dims` and that every value is finite.
    pub fn validate(&self, dims: &FeatureDims) -> Result<()> {
        let m = self.frames();
        if m == 0 {
            return Err(Error::input(format!("subject {} has no frames", self.id)));
        }
        for d in Dimension::ALL {
            let l = self.labels(d);
            if l.len() != m {
                return Err(Error::input(format!(
                    "subject {}: {d} has {} frames, arousal has {m}",
                    self.id,
                    l.len()
                )));
            }
            if l.iter().any(|v| !v.is_finite()) {
                return Err(Error::input(format!("subject {}: non-finite {d} label", self.id)));
            }
        }
        for modality in Modality::ALL {
            let f = self.features(modality);
            if f.rows() != m {
                return Err(Error::input(format!(
                    "subject {}: {modality} has {} frames, labels have {m}",
                    self.id,
                    f.rows()
                )));
            }
            if f.cols() != dims.get(modality) {
                return Err(Error::input(format!(
                    "subject {}: {modality} has {} features, expected {}",
                    self.id,
                    f.cols(),
                    dims.get(modality)
                )));
            }
            if f.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(Error::input(format!("subject {}: non-finite {modality} feature", self.id)));
            }
        }
        Ok(())
    }
}

/// Subjects sharing a frame period and feature dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    frame_period: f64,
    dims: FeatureDims,
    subjects: Vec<SubjectRecord>,
}

impl Corpus {
    pub fn new(frame_period: f64, dims: FeatureDims, subjects: Vec<SubjectRecord>) -> Result<Self> {
        if !frame_period.is_finite() || frame_period <= 0.0 {
            return Err(Error::input(format!("frame period must be positive, got {frame_period}")));
        }
        let mut seen = HashSet::new();
        for s in &subjects {
            if s.id.is_empty() || s.id.contains(['/', '\\']) {
                return Err(Error::input(format!("invalid subject id '{}'", s.id)));
            }
            if !seen.insert(s.id.as_str()) {
                return Err(Error::input(format!("duplicate subject id '{}'", s.id)));
            }
            s.validate(&dims)?;
        }
        Ok(Corpus {
            frame_period,
            dims,
            subjects,
        })
    }

    pub fn frame_period(&self) -> f64 {
        self.frame_period
    }

    pub fn dims(&self) -> FeatureDims {
        self.dims
    }

    pub fn subjects(&self) -> &[SubjectRecord] {
        &self.subjects
    }

    pub fn subject(&self, id: &str) -> Option<&SubjectRecord> {
        self.subjects.iter().find(|s| s.id == id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.subjects.iter().map(|s| s.id.clone()).collect()
    }

    /// Training and development subject ids, by naming convention.
    pub fn train_dev_ids(&self) -> (Vec<String>, Vec<String>) {
        self.ids().into_iter().partition(|id| !is_dev_subject(id))
    }

    /// Splits the development subjects into a model-selection subset of
    /// `n_select` and a test subset holding the rest.
    pub fn partition(&self, n_select: usize, seed: u64) -> Result<Partition> {
        let (train, dev) = self.train_dev_ids();
        split_partition(&train, &dev, n_select, seed)
    }

    /// Stacks the given subjects, in order, into one sample set for
    /// `dimension`. Returns the samples and the per-subject frame counts.
    pub fn samples(&self, ids: &[String], modalities: &[Modality], dimension: Dimension) -> Result<(Samples, Vec<usize>)> {
        let subjects = ids
            .iter()
            .map(|id| self.subject(id).ok_or_else(|| Error::input(format!("unknown subject '{id}'"))))
            .collect::<Result<Vec<_>>>()?;
        let lengths: Vec<usize> = subjects.iter().map(|s| s.frames()).collect();
        let inputs = modalities
            .iter()
            .map(|&m| Matrix::vstack(&subjects.iter().map(|s| s.features(m)).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?;
        let targets: Vec<f64> = subjects.iter().flat_map(|s| s.labels(dimension).iter().copied()).collect();
        Ok((Samples::new(inputs, Matrix::column(targets))?, lengths))
    }

    /// Concatenated labels of the given subjects.
    pub fn labels(&self, ids: &[String], dimension: Dimension) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for id in ids {
            let s = self.subject(id).ok_or_else(|| Error::input(format!("unknown subject '{id}'")))?;
            out.extend_from_slice(s.labels(dimension));
        }
        Ok(out)
    }
}
