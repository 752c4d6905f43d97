//! End-to-end protocol on a corpus: train on the training subjects, select
//! the checkpoint on the dev selection subset, score on the dev test subset.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::align::{delay_scan_segments, shift_segments, DelayCurve};
use crate::data::{Corpus, Partition};
use crate::domain::{Dimension, FeatureDims, Modality};
use crate::error::{Error, Result};
use crate::fusion::{self, fit_late_fusion, modality_importance, FusionNet, FusionNetSpec, LateFusionModel};
use crate::metrics;
use crate::nn::{self, EpochRecord, Network, Samples, TrainConfig};
use crate::postproc::{apply_scaler_with, LabelStats, ScalerKind, StdRatioForm};

pub const CHECKPOINT_FORMAT: &str = "mmfusion-checkpoint/1";

/// Which network to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Per-modality branches merged inside one network.
    Proposed,
    /// One network over the concatenated features.
    Early,
    /// The proposed architecture restricted to a single modality.
    Unimodal(Modality),
}

impl ModelKind {
    pub fn spec(self, dimension: Dimension, dims: FeatureDims) -> FusionNetSpec {
        match self {
            ModelKind::Proposed => fusion::build_proposed_for(dimension, dims),
            ModelKind::Early => fusion::build_early_for(dimension, dims),
            ModelKind::Unimodal(m) => fusion::build_unimodal_for(dimension, m, dims),
        }
    }

    pub fn modalities(self) -> Vec<Modality> {
        match self {
            ModelKind::Unimodal(m) => vec![m],
            _ => Modality::ALL.to_vec(),
        }
    }

    /// Name usable in file names.
    pub fn file_stem(self) -> String {
        match self {
            ModelKind::Proposed => "proposed".into(),
            ModelKind::Early => "early".into(),
            ModelKind::Unimodal(m) => format!("unimodal-{m}"),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Proposed => f.write_str("proposed"),
            ModelKind::Early => f.write_str("early"),
            ModelKind::Unimodal(m) => write!(f, "unimodal:{m}"),
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "proposed" => Ok(ModelKind::Proposed),
            "early" => Ok(ModelKind::Early),
            "late" => Err(Error::input(
                "late fusion combines unimodal checkpoints; train those and run fuse-late",
            )),
            _ => match lower.strip_prefix("unimodal:").or_else(|| lower.strip_prefix("unimodal-")) {
                Some(m) => Ok(ModelKind::Unimodal(m.parse()?)),
                None => Err(Error::input(format!(
                    "unknown model '{s}' (expected proposed, early or unimodal:<modality>)"
                ))),
            },
        }
    }
}

impl Serialize for ModelKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModelKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Everything needed to reuse a trained model: network, protocol and the
/// training-label statistics the scalers depend on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format: String,
    pub model: ModelKind,
    pub dimension: Dimension,
    pub feature_dims: FeatureDims,
    pub frame_period: f64,
    pub partition: Partition,
    pub label_stats: LabelStats,
    pub train_config: TrainConfig,
    pub init_seed: u64,
    pub best_epoch: usize,
    pub best_dev_ccc: f64,
    pub best_dev_mse: f64,
    pub network: FusionNet,
}

impl ModelCheckpoint {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: ModelCheckpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unsupported format '{}'", ckpt.format)));
        }
        if ckpt.network.spec() != &ckpt.model.spec(ckpt.dimension, ckpt.feature_dims) {
            return Err(Error::Checkpoint(format!(
                "network layout does not match a {} model for {}",
                ckpt.model, ckpt.dimension
            )));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Fails unless `corpus` has the feature sizes and subjects this model
    /// was trained for.
    pub fn check_corpus(&self, corpus: &Corpus) -> Result<()> {
        if corpus.dims() != self.feature_dims {
            return Err(Error::Eval(format!(
                "checkpoint expects feature dims {:?}, corpus has {:?}",
                self.feature_dims,
                corpus.dims()
            )));
        }
        if let Some(id) = self.partition.all().find(|id| corpus.subject(id).is_none()) {
            return Err(Error::Eval(format!("corpus lacks subject '{id}' from the checkpoint partition")));
        }
        Ok(())
    }

    /// Raw predictions, gold labels and per-subject lengths for `ids`.
    pub fn predict(&self, corpus: &Corpus, ids: &[String]) -> Result<Predictions> {
        self.check_corpus(corpus)?;
        let (samples, lengths) = corpus.samples(ids, &self.model.modalities(), self.dimension)?;
        let raw = self.network.predict(&samples.input_refs())?.into_vec();
        Ok(Predictions {
            raw,
            gold: samples.targets.into_vec(),
            lengths,
        })
    }
}

/// Model outputs over a set of subjects, concatenated in subject order.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub raw: Vec<f64>,
    pub gold: Vec<f64>,
    pub lengths: Vec<usize>,
}

/// Trained model and its per-epoch log.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub checkpoint: ModelCheckpoint,
    pub log: Vec<EpochRecord>,
}

fn stacked(corpus: &Corpus, ids: &[String], kind: ModelKind, dimension: Dimension) -> Result<Samples> {
    Ok(corpus.samples(ids, &kind.modalities(), dimension)?.0)
}

/// Trains `kind` for `dimension` on `partition.train`, checkpointing on
/// `partition.dev_select`. Network weights are initialized from `init_seed`.
pub fn train_model(
    corpus: &Corpus,
    partition: &Partition,
    kind: ModelKind,
    dimension: Dimension,
    cfg: &TrainConfig,
    init_seed: u64,
) -> Result<TrainedModel> {
    let train = stacked(corpus, &partition.train, kind, dimension)?;
    let dev = stacked(corpus, &partition.dev_select, kind, dimension)?;
    let label_stats = LabelStats::from_labels(train.targets.as_slice())?;
    let init = FusionNet::new(kind.spec(dimension, corpus.dims()), init_seed)?;
    let outcome = nn::train(init, &train, &dev, cfg)?;
    let ck = outcome.checkpoint;
    Ok(TrainedModel {
        checkpoint: ModelCheckpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            model: kind,
            dimension,
            feature_dims: corpus.dims(),
            frame_period: corpus.frame_period(),
            partition: partition.clone(),
            label_stats,
            train_config: *cfg,
            init_seed,
            best_epoch: ck.best_epoch,
            best_dev_ccc: ck.best_dev_ccc,
            best_dev_mse: ck.best_dev_mse,
            network: ck.params,
        },
        log: outcome.log,
    })
}

/// How scaled predictions are scored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringOptions {
    /// Compensation delay in whole frames, applied after scaling.
    pub delay_frames: usize,
    pub std_ratio_form: StdRatioForm,
}

impl Default for ScoringOptions {
    fn default() -> Self {
        ScoringOptions {
            delay_frames: 0,
            std_ratio_form: StdRatioForm::LabelOverPrediction,
        }
    }
}

/// Scales, delay-compensates, then scores predictions against gold.
pub fn scaled_ccc(
    raw: &[f64],
    gold: &[f64],
    lengths: &[usize],
    scaler: ScalerKind,
    stats: &LabelStats,
    opts: &ScoringOptions,
) -> Result<f64> {
    let scaled = apply_scaler_with(scaler, raw, stats, opts.std_ratio_form)?;
    let shifted = shift_segments(&scaled, lengths, opts.delay_frames)?;
    metrics::ccc(&shifted, gold)
}

/// CCC for each scaler, always computed from the same raw predictions.
pub fn score_all_scalers(
    predictions: &Predictions,
    stats: &LabelStats,
    opts: &ScoringOptions,
) -> Result<Vec<(ScalerKind, f64)>> {
    ScalerKind::ALL
        .iter()
        .map(|&k| {
            Ok((
                k,
                scaled_ccc(&predictions.raw, &predictions.gold, &predictions.lengths, k, stats, opts)?,
            ))
        })
        .collect()
}

/// CCC-versus-delay curve of a model on the given subjects.
pub fn delay_curve(
    checkpoint: &ModelCheckpoint,
    corpus: &Corpus,
    ids: &[String],
    d_max: f64,
    step: f64,
) -> Result<DelayCurve> {
    let p = checkpoint.predict(corpus, ids)?;
    delay_scan_segments(&p.raw, &p.gold, &p.lengths, d_max, step, corpus.frame_period())
}

/// Late fusion of three unimodal models.
#[derive(Debug, Clone, PartialEq)]
pub struct LateFusionOutcome {
    pub dimension: Dimension,
    pub model: LateFusionModel,
    /// `None` when the coefficients sum to zero.
    pub importance: Option<Vec<f64>>,
    /// Fused predictions on the dev test subset.
    pub test_predictions: Predictions,
    pub test_ccc: f64,
    /// Raw dev-test CCC of each unimodal model, in `model.modalities` order.
    pub unimodal_test_ccc: Vec<f64>,
}

/// Fits the combiner on `dev_select` predictions of the unimodal models and
/// scores it on `dev_test`. With `fuse_scaled`, each unimodal series is first
/// passed through that scaler.
pub fn late_fusion(
    corpus: &Corpus,
    unimodal: &[ModelCheckpoint],
    fuse_scaled: Option<ScalerKind>,
    opts: &ScoringOptions,
) -> Result<LateFusionOutcome> {
    let mut unimodal: Vec<&ModelCheckpoint> = unimodal.iter().collect();
    unimodal.sort_by_key(|ck| match ck.model {
        ModelKind::Unimodal(m) => m.index(),
        _ => usize::MAX,
    });
    let first = *unimodal
        .first()
        .ok_or_else(|| Error::input("late fusion needs unimodal checkpoints"))?;
    let dimension = first.dimension;
    let mut modalities = Vec::new();
    for ck in &unimodal {
        let ModelKind::Unimodal(m) = ck.model else {
            return Err(Error::input(format!("late fusion takes unimodal models, got {}", ck.model)));
        };
        if ck.dimension != dimension || ck.partition != first.partition {
            return Err(Error::input("unimodal checkpoints disagree on dimension or partition"));
        }
        if modalities.contains(&m) {
            return Err(Error::input(format!("two unimodal checkpoints for {m}")));
        }
        modalities.push(m);
    }

    let prep = |ck: &ModelCheckpoint, ids: &[String]| -> Result<Predictions> {
        let mut p = ck.predict(corpus, ids)?;
        if let Some(kind) = fuse_scaled {
            p.raw = apply_scaler_with(kind, &p.raw, &ck.label_stats, opts.std_ratio_form)?;
        }
        Ok(p)
    };
    let select: Vec<Predictions> = unimodal
        .iter()
        .map(|ck| prep(ck, &first.partition.dev_select))
        .collect::<Result<_>>()?;
    let test: Vec<Predictions> = unimodal
        .iter()
        .map(|ck| prep(ck, &first.partition.dev_test))
        .collect::<Result<_>>()?;

    let gold_select = &select[0].gold;
    let columns: Vec<(Modality, &[f64])> = modalities
        .iter()
        .copied()
        .zip(select.iter().map(|p| p.raw.as_slice()))
        .collect();
    let model = fit_late_fusion(&columns, gold_select)?;
    let importance = modality_importance(&model).ok();

    let fused = model.predict(&test.iter().map(|p| p.raw.as_slice()).collect::<Vec<_>>())?;
    let gold = test[0].gold.clone();
    let lengths = test[0].lengths.clone();
    let test_ccc = metrics::ccc(&shift_segments(&fused, &lengths, opts.delay_frames)?, &gold)?;
    let unimodal_test_ccc = test
        .iter()
        .map(|p| metrics::ccc(&shift_segments(&p.raw, &p.lengths, opts.delay_frames)?, &p.gold))
        .collect::<Result<Vec<_>>>()?;

    Ok(LateFusionOutcome {
        dimension,
        model,
        importance,
        test_predictions: Predictions {
            raw: fused,
            gold,
            lengths,
        },
        test_ccc,
        unimodal_test_ccc,
    })
}
