use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{gemm_a_b, gemm_a_bt, gemm_at_b, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn derivative_from_output(self, out: f64) -> f64 {
        match self {
            Activation::Relu => {
                if out > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseLayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl DenseLayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::input(format!(
                "layer dimensions must be positive, got {in_dim}x{out_dim}"
            )));
        }
        Ok(DenseLayerSpec {
            in_dim,
            out_dim,
            activation,
        })
    }
}

/// Fully connected layer. `weights` is row-major `out_dim × in_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub spec: DenseLayerSpec,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(spec: DenseLayerSpec) -> Self {
        Dense {
            spec,
            weights: vec![0.0; spec.in_dim * spec.out_dim],
            bias: vec![0.0; spec.out_dim],
        }
    }

    /// Uniform fan-in initialization, `U(-√(6/in), √(6/in))`, zero bias.
    pub fn init<R: Rng + ?Sized>(spec: DenseLayerSpec, rng: &mut R) -> Self {
        let limit = (6.0 / spec.in_dim as f64).sqrt();
        let weights = (0..spec.in_dim * spec.out_dim)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        Dense {
            spec,
            weights,
            bias: vec![0.0; spec.out_dim],
        }
    }

    fn forward_batch(&self, x: &Matrix) -> Matrix {
        let n = x.rows();
        let DenseLayerSpec {
            in_dim,
            out_dim,
            activation,
        } = self.spec;
        let mut out = Matrix::zeros(n, out_dim);
        gemm_a_bt(n, in_dim, out_dim, x.as_slice(), &self.weights, out.as_mut_slice());
        for r in 0..n {
            for (o, b) in out.row_mut(r).iter_mut().zip(&self.bias) {
                *o = activation.apply(*o + b);
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        let s = self.spec;
        if s.in_dim == 0 || s.out_dim == 0 {
            return Err(Error::input("layer dimensions must be positive"));
        }
        if self.weights.len() != s.in_dim * s.out_dim || self.bias.len() != s.out_dim {
            return Err(Error::input(format!(
                "layer parameters do not match shape {}x{}",
                s.out_dim, s.in_dim
            )));
        }
        if self.weights.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::input("non-finite layer parameter"));
        }
        Ok(())
    }
}

/// Gradients of one dense layer, shaped like its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Sequential stack of dense layers. An empty stack is the identity map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    input_dim: usize,
    layers: Vec<Dense>,
}

impl Mlp {
    fn check_chain(input_dim: usize, specs: &[DenseLayerSpec]) -> Result<()> {
        if input_dim == 0 {
            return Err(Error::input("network input dimension must be positive"));
        }
        let mut expect = input_dim;
        for (i, s) in specs.iter().enumerate() {
            if s.in_dim != expect {
                return Err(Error::input(format!(
                    "layer {i} expects {} inputs but receives {expect}",
                    s.in_dim
                )));
            }
            if s.out_dim == 0 {
                return Err(Error::input(format!("layer {i} has zero outputs")));
            }
            expect = s.out_dim;
        }
        Ok(())
    }

    pub fn new<R: Rng + ?Sized>(input_dim: usize, specs: &[DenseLayerSpec], rng: &mut R) -> Result<Self> {
        Self::check_chain(input_dim, specs)?;
        Ok(Mlp {
            input_dim,
            layers: specs.iter().map(|s| Dense::init(*s, rng)).collect(),
        })
    }

    pub fn zeros(input_dim: usize, specs: &[DenseLayerSpec]) -> Result<Self> {
        Self::check_chain(input_dim, specs)?;
        Ok(Mlp {
            input_dim,
            layers: specs.iter().map(|s| Dense::zeros(*s)).collect(),
        })
    }

    /// Assembles a network from explicit layers.
    pub fn from_layers(input_dim: usize, layers: Vec<Dense>) -> Result<Self> {
        let specs: Vec<_> = layers.iter().map(|l| l.spec).collect();
        Self::check_chain(input_dim, &specs)?;
        for l in &layers {
            l.validate()?;
        }
        Ok(Mlp { input_dim, layers })
    }

    /// Layer specs for a chain of `widths`, every layer using `activation`.
    pub fn chain_specs(input_dim: usize, widths: &[usize], activation: Activation) -> Result<Vec<DenseLayerSpec>> {
        let mut specs = Vec::with_capacity(widths.len());
        let mut prev = input_dim;
        for &w in widths {
            specs.push(DenseLayerSpec::new(prev, w, activation)?);
            prev = w;
        }
        Ok(specs)
    }

    /// Hidden layers of `widths` with `hidden` activation followed by a
    /// linear layer of `output_dim` units.
    pub fn regression_specs(
        input_dim: usize,
        widths: &[usize],
        hidden: Activation,
        output_dim: usize,
    ) -> Result<Vec<DenseLayerSpec>> {
        let mut specs = Self::chain_specs(input_dim, widths, hidden)?;
        let prev = widths.last().copied().unwrap_or(input_dim);
        specs.push(DenseLayerSpec::new(prev, output_dim, Activation::Linear)?);
        Ok(specs)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, |l| l.spec.out_dim)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn is_identity(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn specs(&self) -> Vec<DenseLayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Single-sample forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = Matrix::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.forward_batch(&m)?.into_vec())
    }

    /// Forward pass over a batch stored one sample per row.
    pub fn forward_batch(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer.forward_batch(&cur);
        }
        Ok(cur)
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim {
            return Err(Error::input(format!(
                "input has {} features, network expects {}",
                x.cols(),
                self.input_dim
            )));
        }
        Ok(())
    }

    /// Outputs of every layer for a batch, in layer order.
    pub(crate) fn forward_cached(&self, x: &Matrix) -> Result<Vec<Matrix>> {
        self.check_input(x)?;
        let mut outs: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let next = layer.forward_batch(outs.last().unwrap_or(x));
            outs.push(next);
        }
        Ok(outs)
    }

    /// Backpropagates `d_out` (gradient of the loss w.r.t. the network
    /// output) through the cached forward pass of `x`.
    ///
    /// Returns per-layer gradients and, when `want_input_grad` is set, the
    /// gradient w.r.t. `x`.
    pub(crate) fn backward_cached(
        &self,
        x: &Matrix,
        outputs: &[Matrix],
        d_out: Matrix,
        want_input_grad: bool,
    ) -> (Vec<LayerGrads>, Option<Matrix>) {
        let n = x.rows();
        let mut grads: Vec<LayerGrads> = Vec::with_capacity(self.layers.len());
        let mut delta = d_out;
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let DenseLayerSpec {
                in_dim,
                out_dim,
                activation,
            } = layer.spec;
            if activation != Activation::Linear {
                for (d, o) in delta.as_mut_slice().iter_mut().zip(outputs[li].as_slice()) {
                    *d *= activation.derivative_from_output(*o);
                }
            }
            let input = if li == 0 { x } else { &outputs[li - 1] };

            let mut dw = vec![0.0; out_dim * in_dim];
            gemm_at_b(out_dim, n, in_dim, delta.as_slice(), input.as_slice(), &mut dw);
            let mut db = vec![0.0; out_dim];
            for r in 0..n {
                for (b, d) in db.iter_mut().zip(delta.row(r)) {
                    *b += d;
                }
            }
            grads.push(LayerGrads {
                weights: dw,
                bias: db,
            });

            if li > 0 || want_input_grad {
                let mut d_in = Matrix::zeros(n, in_dim);
                gemm_a_b(n, out_dim, in_dim, delta.as_slice(), &layer.weights, d_in.as_mut_slice());
                delta = d_in;
            } else {
                grads.reverse();
                return (grads, None);
            }
        }
        grads.reverse();
        (grads, Some(delta))
    }

    /// Mean squared error over all outputs of the batch and its gradients.
    pub fn backward(&self, x: &Matrix, targets: &Matrix) -> Result<(f64, Vec<LayerGrads>)> {
        let outs = self.forward_cached(x)?;
        let pred = outs.last().unwrap_or(x);
        let (loss, d_out) = mse_loss_grad(pred, targets)?;
        let (grads, _) = self.backward_cached(x, &outs, d_out, false);
        Ok((loss, grads))
    }

    pub(crate) fn parameter_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub(crate) fn parameter_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

/// Loss `(1/N) Σ (ŷ − y)²` over all `N` entries and its gradient w.r.t. `ŷ`.
pub(crate) fn mse_loss_grad(pred: &Matrix, targets: &Matrix) -> Result<(f64, Matrix)> {
    if pred.rows() != targets.rows() || pred.cols() != targets.cols() {
        return Err(Error::input(format!(
            "targets are {}x{}, predictions {}x{}",
            targets.rows(),
            targets.cols(),
            pred.rows(),
            pred.cols()
        )));
    }
    if pred.rows() == 0 {
        return Err(Error::input("empty batch"));
    }
    let count = (pred.rows() * pred.cols()) as f64;
    let mut d = Matrix::zeros(pred.rows(), pred.cols());
    let mut sum = 0.0;
    for ((g, p), t) in d
        .as_mut_slice()
        .iter_mut()
        .zip(pred.as_slice())
        .zip(targets.as_slice())
    {
        let r = p - t;
        sum += r * r;
        *g = 2.0 * r / count;
    }
    Ok((sum / count, d))
}
