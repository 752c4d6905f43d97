use serde::{Deserialize, Serialize};

use crate::domain::{Dimension, FeatureDims, Modality};
use crate::error::{Error, Result};
use crate::nn::Activation;

/// Dense layers applied to one modality before the merge. An empty `widths`
/// passes the raw features straight into the merge (early fusion).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub modality: Modality,
    pub input_dim: usize,
    pub widths: Vec<usize>,
}

impl BranchSpec {
    pub fn two_layer(modality: Modality, input_dim: usize, layer1: usize, layer2: usize) -> Self {
        BranchSpec {
            modality,
            input_dim,
            widths: vec![layer1, layer2],
        }
    }

    pub fn passthrough(modality: Modality, input_dim: usize) -> Self {
        BranchSpec {
            modality,
            input_dim,
            widths: Vec::new(),
        }
    }

    /// Width this branch contributes to the merged representation.
    pub fn output_dim(&self) -> usize {
        self.widths.last().copied().unwrap_or(self.input_dim)
    }
}

/// Branches merged by concatenation, a fully connected trunk, and one linear
/// output unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionNetSpec {
    pub branches: Vec<BranchSpec>,
    /// Hidden widths of the trunk that follows the merge.
    pub fusion_widths: Vec<usize>,
    pub hidden_activation: Activation,
}

impl FusionNetSpec {
    pub const OUTPUT_DIM: usize = 1;

    pub fn validate(&self) -> Result<()> {
        if self.branches.is_empty() {
            return Err(Error::input("a fusion network needs at least one branch"));
        }
        for pair in self.branches.windows(2) {
            if pair[0].modality >= pair[1].modality {
                return Err(Error::input(
                    "branches must be distinct and ordered audio, video, text",
                ));
            }
        }
        for b in &self.branches {
            if b.input_dim == 0 || b.widths.contains(&0) {
                return Err(Error::input(format!("{} branch has a zero width", b.modality)));
            }
        }
        if self.fusion_widths.contains(&0) {
            return Err(Error::input("fusion layer width must be positive"));
        }
        Ok(())
    }

    pub fn modalities(&self) -> Vec<Modality> {
        self.branches.iter().map(|b| b.modality).collect()
    }

    /// Width of the concatenated branch outputs.
    pub fn trunk_input_dim(&self) -> usize {
        self.branches.iter().map(BranchSpec::output_dim).sum()
    }

    pub fn input_dims(&self) -> Vec<usize> {
        self.branches.iter().map(|b| b.input_dim).collect()
    }

    pub fn branch(&self, modality: Modality) -> Option<&BranchSpec> {
        self.branches.iter().find(|b| b.modality == modality)
    }
}

/// Per-dimension layer sizes: `(L1, L2)` for audio, video, text and the
/// fusion-layer width.
pub fn layer_table(dimension: Dimension) -> ([(usize, usize); 3], usize) {
    match dimension {
        Dimension::Arousal => ([(50, 50), (100, 100), (200, 200)], 100),
        Dimension::Valence => ([(200, 200), (200, 200), (200, 200)], 200),
        Dimension::Liking => ([(50, 50), (100, 100), (100, 100)], 50),
    }
}

/// Branch-merge network for `dimension` over the standard feature sizes.
pub fn build_proposed(dimension: Dimension) -> FusionNetSpec {
    build_proposed_for(dimension, FeatureDims::STANDARD)
}

pub fn build_proposed_for(dimension: Dimension, dims: FeatureDims) -> FusionNetSpec {
    let (branches, fusion) = layer_table(dimension);
    FusionNetSpec {
        branches: Modality::ALL
            .iter()
            .zip(branches)
            .map(|(&m, (l1, l2))| BranchSpec::two_layer(m, dims.get(m), l1, l2))
            .collect(),
        fusion_widths: vec![fusion],
        hidden_activation: Activation::Relu,
    }
}

/// Single network over the concatenated raw features, with two hidden
/// layers of the dimension's fusion width.
pub fn build_early(dimension: Dimension) -> FusionNetSpec {
    build_early_for(dimension, FeatureDims::STANDARD)
}

pub fn build_early_for(dimension: Dimension, dims: FeatureDims) -> FusionNetSpec {
    let (_, fusion) = layer_table(dimension);
    FusionNetSpec {
        branches: Modality::ALL
            .iter()
            .map(|&m| BranchSpec::passthrough(m, dims.get(m)))
            .collect(),
        fusion_widths: vec![fusion, fusion],
        hidden_activation: Activation::Relu,
    }
}

/// The proposed network restricted to one modality's branch.
pub fn build_unimodal_for(dimension: Dimension, modality: Modality, dims: FeatureDims) -> FusionNetSpec {
    let (branches, fusion) = layer_table(dimension);
    let (l1, l2) = branches[modality.index()];
    FusionNetSpec {
        branches: vec![BranchSpec::two_layer(modality, dims.get(modality), l1, l2)],
        fusion_widths: vec![fusion],
        hidden_activation: Activation::Relu,
    }
}
