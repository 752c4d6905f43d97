//! Multimodal (audio / video / text) continuous emotion regression.
//!
//! Each modality is encoded by its own stack of dense layers; the branch
//! outputs are concatenated and fed to a shared fully connected trunk ending
//! in a single linear regression unit, trained end to end on squared error.
//! Early-fusion (feature concatenation) and late-fusion (least-squares
//! combination of unimodal predictions) baselines share the same machinery.
//!
//! Predictions are scored with the concordance correlation coefficient after
//! optional delay compensation and output scaling.

pub mod align;
pub mod cli;
pub mod data;
pub mod domain;
pub mod error;
pub mod experiment;
pub mod fusion;
pub mod metrics;
pub mod nn;
pub mod postproc;
pub mod report;

pub use domain::{Dimension, FeatureDims, Modality};
pub use error::{Error, Result};
