//! Minimal feed-forward network core: dense layers, backpropagation of the
//! squared-error loss, SGD/Adam, and best-epoch checkpointing.

pub(crate) mod matrix;
mod network;
mod optim;
mod train;

pub use matrix::Matrix;
pub use network::{Activation, Dense, DenseLayerSpec, LayerGrads, Mlp};
pub use optim::{Optimizer, OptimizerKind};
pub use train::{train, Checkpoint, EpochRecord, Monitor, Samples, TrainConfig, TrainOutcome};

pub(crate) use network::mse_loss_grad;

use crate::error::{Error, Result};

/// A regression network that can be trained by [`train`].
///
/// Inputs arrive as one matrix per input group (one row per sample).
/// Parameters and gradients are exposed as flat tensors in one fixed order.
pub trait Network {
    fn input_dims(&self) -> Vec<usize>;

    fn output_dim(&self) -> usize;

    fn predict(&self, inputs: &[&Matrix]) -> Result<Matrix>;

    /// Squared-error loss over the batch and its gradient for every tensor
    /// returned by [`Network::parameters`], in the same order.
    fn loss_and_gradients(&self, inputs: &[&Matrix], targets: &Matrix) -> Result<(f64, Vec<Vec<f64>>)>;

    fn parameters(&self) -> Vec<&[f64]>;

    fn parameters_mut(&mut self) -> Vec<&mut [f64]>;
}

impl Network for Mlp {
    fn input_dims(&self) -> Vec<usize> {
        vec![self.input_dim()]
    }

    fn output_dim(&self) -> usize {
        Mlp::output_dim(self)
    }

    fn predict(&self, inputs: &[&Matrix]) -> Result<Matrix> {
        match inputs {
            [x] => self.forward_batch(x),
            _ => Err(Error::input(format!(
                "a plain network takes one input matrix, got {}",
                inputs.len()
            ))),
        }
    }

    fn loss_and_gradients(&self, inputs: &[&Matrix], targets: &Matrix) -> Result<(f64, Vec<Vec<f64>>)> {
        let [x] = inputs else {
            return Err(Error::input(format!(
                "a plain network takes one input matrix, got {}",
                inputs.len()
            )));
        };
        let (loss, grads) = self.backward(x, targets)?;
        Ok((loss, grads.into_iter().flat_map(|g| [g.weights, g.bias]).collect()))
    }

    fn parameters(&self) -> Vec<&[f64]> {
        self.parameter_slices()
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        self.parameter_slices_mut()
    }
}
