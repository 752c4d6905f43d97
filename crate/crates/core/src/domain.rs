//! Modalities, emotional dimensions and feature dimensionalities shared by every module.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Source of segment-level features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Audio,
    Video,
    Text,
}

impl Modality {
    /// Fixed concatenation order used by every fused model and checkpoint.
    pub const ALL: [Modality; 3] = [Modality::Audio, Modality::Video, Modality::Text];

    pub fn index(self) -> usize {
        match self {
            Modality::Audio => 0,
            Modality::Video => 1,
            Modality::Text => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Audio => "audio",
            Modality::Video => "video",
            Modality::Text => "text",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "audio" => Ok(Modality::Audio),
            "video" => Ok(Modality::Video),
            "text" => Ok(Modality::Text),
            other => Err(Error::input(format!(
                "unknown modality '{other}' (expected audio, video or text)"
            ))),
        }
    }
}

/// Continuous emotional dimension used as a regression target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Arousal,
    Valence,
    Liking,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Arousal, Dimension::Valence, Dimension::Liking];

    pub fn index(self) -> usize {
        match self {
            Dimension::Arousal => 0,
            Dimension::Valence => 1,
            Dimension::Liking => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Arousal => "arousal",
            Dimension::Valence => "valence",
            Dimension::Liking => "liking",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "arousal" => Ok(Dimension::Arousal),
            "valence" => Ok(Dimension::Valence),
            "liking" => Ok(Dimension::Liking),
            other => Err(Error::input(format!(
                "unknown dimension '{other}' (expected arousal, valence or liking)"
            ))),
        }
    }
}

/// Per-modality feature vector sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDims {
    pub audio: usize,
    pub video: usize,
    pub text: usize,
}

impl FeatureDims {
    /// Bag-of-audio-words, bag-of-video-words (three 1000-word codebooks) and
    /// bag-of-text-words sizes.
    pub const STANDARD: FeatureDims = FeatureDims {
        audio: 1000,
        video: 3000,
        text: 521,
    };

    pub fn new(audio: usize, video: usize, text: usize) -> Result<Self> {
        if audio == 0 || video == 0 || text == 0 {
            return Err(Error::input("feature dimensions must be positive"));
        }
        Ok(FeatureDims { audio, video, text })
    }

    pub fn get(&self, modality: Modality) -> usize {
        match modality {
            Modality::Audio => self.audio,
            Modality::Video => self.video,
            Modality::Text => self.text,
        }
    }

    pub fn total(&self) -> usize {
        self.audio + self.video + self.text
    }
}

impl Default for FeatureDims {
    fn default() -> Self {
        FeatureDims::STANDARD
    }
}
