use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::spec::FusionNetSpec;
use crate::domain::Modality;
use crate::error::{Error, Result};
use crate::nn::{mse_loss_grad, Matrix, Mlp, Network};

/// Weights of a branch-merge network laid out by its [`FusionNetSpec`].
///
/// Branch outputs are concatenated in spec order (audio, video, text) before
/// entering the trunk. Parameters are ordered branch by branch, then trunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FusionNetParts")]
pub struct FusionNet {
    spec: FusionNetSpec,
    branches: Vec<Mlp>,
    trunk: Mlp,
}

#[derive(Deserialize)]
struct FusionNetParts {
    spec: FusionNetSpec,
    branches: Vec<Mlp>,
    trunk: Mlp,
}

impl TryFrom<FusionNetParts> for FusionNet {
    type Error = Error;

    fn try_from(p: FusionNetParts) -> Result<Self> {
        FusionNet::from_parts(p.spec, p.branches, p.trunk)
    }
}

fn branch_specs(spec: &FusionNetSpec) -> Result<Vec<(usize, Vec<crate::nn::DenseLayerSpec>)>> {
    spec.branches
        .iter()
        .map(|b| Ok((b.input_dim, Mlp::chain_specs(b.input_dim, &b.widths, spec.hidden_activation)?)))
        .collect()
}

impl FusionNet {
    /// Fresh network with seeded fan-in initialization.
    pub fn new(spec: FusionNetSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut branches = Vec::with_capacity(spec.branches.len());
        for (input_dim, specs) in branch_specs(&spec)? {
            branches.push(Mlp::new(input_dim, &specs, &mut rng)?);
        }
        let trunk_specs = Mlp::regression_specs(
            spec.trunk_input_dim(),
            &spec.fusion_widths,
            spec.hidden_activation,
            FusionNetSpec::OUTPUT_DIM,
        )?;
        let trunk = Mlp::new(spec.trunk_input_dim(), &trunk_specs, &mut rng)?;
        Ok(FusionNet { spec, branches, trunk })
    }

    /// All-zero weights and biases.
    pub fn zeros(spec: FusionNetSpec) -> Result<Self> {
        spec.validate()?;
        let branches = branch_specs(&spec)?
            .into_iter()
            .map(|(input_dim, specs)| Mlp::zeros(input_dim, &specs))
            .collect::<Result<Vec<_>>>()?;
        let trunk_specs = Mlp::regression_specs(
            spec.trunk_input_dim(),
            &spec.fusion_widths,
            spec.hidden_activation,
            FusionNetSpec::OUTPUT_DIM,
        )?;
        let trunk = Mlp::zeros(spec.trunk_input_dim(), &trunk_specs)?;
        Ok(FusionNet { spec, branches, trunk })
    }

    /// Assembles a network from existing parts, checking every shape against `spec`.
    pub fn from_parts(spec: FusionNetSpec, branches: Vec<Mlp>, trunk: Mlp) -> Result<Self> {
        spec.validate()?;
        if branches.len() != spec.branches.len() {
            return Err(Error::input(format!(
                "spec has {} branches, got {}",
                spec.branches.len(),
                branches.len()
            )));
        }
        for ((expect_in, expect), got) in branch_specs(&spec)?.into_iter().zip(&branches) {
            if got.input_dim() != expect_in || got.specs() != expect {
                return Err(Error::input("branch layers do not match the spec"));
            }
        }
        let trunk_specs = Mlp::regression_specs(
            spec.trunk_input_dim(),
            &spec.fusion_widths,
            spec.hidden_activation,
            FusionNetSpec::OUTPUT_DIM,
        )?;
        if trunk.input_dim() != spec.trunk_input_dim() || trunk.specs() != trunk_specs {
            return Err(Error::input("trunk layers do not match the spec"));
        }
        // re-validate parameter buffers
        let branches = branches
            .into_iter()
            .map(|b| Mlp::from_layers(b.input_dim(), b.layers().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let trunk = Mlp::from_layers(trunk.input_dim(), trunk.layers().to_vec())?;
        Ok(FusionNet { spec, branches, trunk })
    }

    pub fn spec(&self) -> &FusionNetSpec {
        &self.spec
    }

    pub fn branches(&self) -> &[Mlp] {
        &self.branches
    }

    pub fn trunk(&self) -> &Mlp {
        &self.trunk
    }

    pub fn trunk_mut(&mut self) -> &mut Mlp {
        &mut self.trunk
    }

    pub fn num_parameters(&self) -> usize {
        self.branches.iter().map(Mlp::num_parameters).sum::<usize>() + self.trunk.num_parameters()
    }

    /// Prediction for one sample, one feature vector per branch in spec order.
    pub fn forward_sample(&self, inputs: &[&[f64]]) -> Result<f64> {
        let mats = inputs
            .iter()
            .map(|x| Matrix::from_vec(1, x.len(), x.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Matrix> = mats.iter().collect();
        Ok(self.predict(&refs)?.as_slice()[0])
    }

    /// Prediction for one sample of a three-branch (audio, video, text) network.
    pub fn forward_fused(&self, audio: &[f64], video: &[f64], text: &[f64]) -> Result<f64> {
        if self.spec.modalities() != Modality::ALL {
            return Err(Error::input("network does not have audio, video and text branches"));
        }
        self.forward_sample(&[audio, video, text])
    }

    fn check_inputs(&self, inputs: &[&Matrix]) -> Result<()> {
        if inputs.len() != self.branches.len() {
            return Err(Error::input(format!(
                "network has {} branches, got {} inputs",
                self.branches.len(),
                inputs.len()
            )));
        }
        let rows = inputs[0].rows();
        for (x, b) in inputs.iter().zip(&self.spec.branches) {
            if x.cols() != b.input_dim {
                return Err(Error::input(format!(
                    "{} input has {} features, expected {}",
                    b.modality,
                    x.cols(),
                    b.input_dim
                )));
            }
            if x.rows() != rows {
                return Err(Error::input("branch inputs have different sample counts"));
            }
        }
        Ok(())
    }
}

impl Network for FusionNet {
    fn input_dims(&self) -> Vec<usize> {
        self.spec.input_dims()
    }

    fn output_dim(&self) -> usize {
        FusionNetSpec::OUTPUT_DIM
    }

    fn predict(&self, inputs: &[&Matrix]) -> Result<Matrix> {
        self.check_inputs(inputs)?;
        let outs = self
            .branches
            .iter()
            .zip(inputs)
            .map(|(b, x)| b.forward_batch(x))
            .collect::<Result<Vec<_>>>()?;
        let merged = Matrix::hstack(&outs.iter().collect::<Vec<_>>())?;
        self.trunk.forward_batch(&merged)
    }

    fn loss_and_gradients(&self, inputs: &[&Matrix], targets: &Matrix) -> Result<(f64, Vec<Vec<f64>>)> {
        self.check_inputs(inputs)?;
        let caches = self
            .branches
            .iter()
            .zip(inputs)
            .map(|(b, x)| b.forward_cached(x))
            .collect::<Result<Vec<_>>>()?;
        let branch_outs: Vec<&Matrix> = caches
            .iter()
            .zip(inputs)
            .map(|(c, x)| c.last().unwrap_or(x))
            .collect();
        let merged = Matrix::hstack(&branch_outs)?;
        let trunk_cache = self.trunk.forward_cached(&merged)?;
        let pred = trunk_cache.last().expect("trunk has an output layer");
        let (loss, d_out) = mse_loss_grad(pred, targets)?;

        let needs_merge_grad = self.branches.iter().any(|b| !b.is_identity());
        let (trunk_grads, d_merged) = self.trunk.backward_cached(&merged, &trunk_cache, d_out, needs_merge_grad);

        let mut grads: Vec<Vec<f64>> = Vec::new();
        let mut offset = 0;
        for ((branch, cache), x) in self.branches.iter().zip(&caches).zip(inputs) {
            let width = branch.output_dim();
            if !branch.is_identity() {
                let d_branch = d_merged
                    .as_ref()
                    .expect("merge gradient requested")
                    .column_block(offset, width);
                let (g, _) = branch.backward_cached(x, cache, d_branch, false);
                grads.extend(g.into_iter().flat_map(|g| [g.weights, g.bias]));
            }
            offset += width;
        }
        grads.extend(trunk_grads.into_iter().flat_map(|g| [g.weights, g.bias]));
        Ok((loss, grads))
    }

    fn parameters(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for b in &self.branches {
            out.extend(Network::parameters(b));
        }
        out.extend(Network::parameters(&self.trunk));
        out
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for b in &mut self.branches {
            out.extend(Network::parameters_mut(b));
        }
        out.extend(Network::parameters_mut(&mut self.trunk));
        out
    }
}
