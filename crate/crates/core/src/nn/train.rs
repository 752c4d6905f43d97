use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Matrix, Network, Optimizer, OptimizerKind};
use crate::error::{Error, Result};
use crate::metrics;

/// Dev-set quantity used to pick the checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Monitor {
    /// Highest dev CCC.
    Ccc,
    /// Lowest dev MSE.
    Loss,
}

impl fmt::Display for Monitor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Monitor::Ccc => "ccc",
            Monitor::Loss => "loss",
        })
    }
}

impl FromStr for Monitor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ccc" => Ok(Monitor::Ccc),
            "loss" => Ok(Monitor::Loss),
            other => Err(Error::input(format!("unknown monitor '{other}' (expected ccc or loss)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub rng_seed: u64,
    pub optimizer: OptimizerKind,
    pub monitor: Monitor,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 100,
            batch_size: 32,
            rng_seed: 0,
            optimizer: OptimizerKind::Adam,
            monitor: Monitor::Ccc,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::input(format!(
                "learning rate must be a nonnegative number, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::input("epochs must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::input("batch size must be positive"));
        }
        Ok(())
    }
}

/// Inputs (one matrix per input group) and targets sharing a row count.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub inputs: Vec<Matrix>,
    pub targets: Matrix,
}

impl Samples {
    pub fn new(inputs: Vec<Matrix>, targets: Matrix) -> Result<Self> {
        if let Some(m) = inputs.iter().find(|m| m.rows() != targets.rows()) {
            return Err(Error::input(format!(
                "input has {} rows but there are {} targets",
                m.rows(),
                targets.rows()
            )));
        }
        Ok(Samples { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_refs(&self) -> Vec<&Matrix> {
        self.inputs.iter().collect()
    }

    pub fn select(&self, indices: &[usize]) -> Samples {
        Samples {
            inputs: self.inputs.iter().map(|m| m.select_rows(indices)).collect(),
            targets: self.targets.select_rows(indices),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the mini-batch losses seen during the epoch, weighted by batch size.
    pub train_mse: f64,
    pub dev_mse: f64,
    pub dev_ccc: f64,
}

/// Parameters retained from the best monitored epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<N> {
    pub params: N,
    pub best_epoch: usize,
    pub best_dev_ccc: f64,
    pub best_dev_mse: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<N> {
    pub checkpoint: Checkpoint<N>,
    pub log: Vec<EpochRecord>,
}

fn check_samples<N: Network>(net: &N, data: &Samples, name: &str) -> Result<()> {
    if data.is_empty() {
        return Err(Error::input(format!("{name} set is empty")));
    }
    let dims = net.input_dims();
    let got: Vec<usize> = data.inputs.iter().map(Matrix::cols).collect();
    if dims != got {
        return Err(Error::input(format!(
            "{name} inputs have widths {got:?}, network expects {dims:?}"
        )));
    }
    if data.targets.cols() != net.output_dim() {
        return Err(Error::input(format!(
            "{name} targets have {} columns, network outputs {}",
            data.targets.cols(),
            net.output_dim()
        )));
    }
    Ok(())
}

/// Dev-set MSE and CCC of `net`.
pub(crate) fn evaluate<N: Network>(net: &N, data: &Samples) -> Result<(f64, f64)> {
    let pred = net.predict(&data.input_refs())?;
    let pair = metrics::ScoredPair::new(pred.as_slice(), data.targets.as_slice())?;
    Ok((pair.mse(), pair.ccc()))
}

/// Mini-batch training with a seeded per-epoch shuffle.
///
/// After every epoch the dev set is scored; the returned checkpoint holds the
/// parameters of the best epoch under `cfg.monitor` (the earliest on ties).
pub fn train<N: Network + Clone>(
    init: N,
    train: &Samples,
    dev: &Samples,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<N>> {
    cfg.validate()?;
    check_samples(&init, train, "training")?;
    check_samples(&init, dev, "dev")?;

    let mut net = init;
    let shapes: Vec<usize> = net.parameters().iter().map(|p| p.len()).collect();
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate, &shapes);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<Checkpoint<N>> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let b = train.select(batch);
            let (loss, grads) = net.loss_and_gradients(&b.input_refs(), &b.targets)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    detail: format!("mini-batch loss is {loss}"),
                });
            }
            loss_sum += loss * batch.len() as f64;
            optimizer.step(net.parameters_mut(), &grads);
        }
        let train_mse = loss_sum / train.len() as f64;

        let (dev_mse, dev_ccc) = match evaluate(&net, dev) {
            Ok(v) => v,
            Err(Error::Input(detail)) => return Err(Error::Divergence { epoch, detail }),
            Err(e) => return Err(e),
        };
        log.push(EpochRecord {
            epoch,
            train_mse,
            dev_mse,
            dev_ccc,
        });

        let improved = match &best {
            None => true,
            Some(b) => match cfg.monitor {
                Monitor::Ccc => dev_ccc > b.best_dev_ccc,
                Monitor::Loss => dev_mse < b.best_dev_mse,
            },
        };
        if improved {
            best = Some(Checkpoint {
                params: net.clone(),
                best_epoch: epoch,
                best_dev_ccc: dev_ccc,
                best_dev_mse: dev_mse,
            });
        }
    }

    Ok(TrainOutcome {
        checkpoint: best.expect("at least one epoch ran"),
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Mlp};
    use rand_distr::{Distribution, Normal};

    fn linear_toy(n: usize, seed: u64) -> Samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 / n as f64) * 2.0 - 1.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + noise.sample(&mut rng)).collect();
        Samples::new(vec![Matrix::column(xs)], Matrix::column(ys)).unwrap()
    }

    fn linear_net(seed: u64) -> Mlp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let specs = Mlp::regression_specs(1, &[], Activation::Relu, 1).unwrap();
        Mlp::new(1, &specs, &mut rng).unwrap()
    }

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            learning_rate: 0.05,
            epochs,
            batch_size: 8,
            rng_seed: 11,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn training_reduces_loss_on_linear_toy() {
        let train_set = linear_toy(200, 1);
        let dev = linear_toy(50, 2);
        let net = linear_net(3);
        let before = net.backward(&train_set.inputs[0], &train_set.targets).unwrap().0;
        let out = train(net, &train_set, &dev, &cfg(30)).unwrap();
        let after = out
            .checkpoint
            .params
            .backward(&train_set.inputs[0], &train_set.targets)
            .unwrap()
            .0;
        assert!(after < before, "{after} !< {before}");
        assert!(out.checkpoint.best_dev_ccc > 0.99);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let train_set = linear_toy(100, 1);
        let dev = linear_toy(40, 2);
        let a = train(linear_net(3), &train_set, &dev, &cfg(5)).unwrap();
        let b = train(linear_net(3), &train_set, &dev, &cfg(5)).unwrap();
        assert_eq!(a.checkpoint, b.checkpoint);
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn checkpoint_is_best_logged_epoch() {
        let train_set = linear_toy(100, 4);
        let dev = linear_toy(40, 5);
        let out = train(linear_net(6), &train_set, &dev, &cfg(12)).unwrap();
        let max = out.log.iter().map(|r| r.dev_ccc).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(out.checkpoint.best_dev_ccc, max);
        let (_, again) = evaluate(&out.checkpoint.params, &dev).unwrap();
        assert_eq!(again, max);

        let loss_cfg = TrainConfig {
            monitor: Monitor::Loss,
            ..cfg(12)
        };
        let out = train(linear_net(6), &train_set, &dev, &loss_cfg).unwrap();
        let min = out.log.iter().map(|r| r.dev_mse).fold(f64::INFINITY, f64::min);
        assert_eq!(out.checkpoint.best_dev_mse, min);
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let train_set = linear_toy(64, 1);
        let dev = linear_toy(16, 2);
        let net = linear_net(9);
        for kind in [OptimizerKind::Adam, OptimizerKind::Sgd] {
            let c = TrainConfig {
                learning_rate: 0.0,
                optimizer: kind,
                ..cfg(3)
            };
            let out = train(net.clone(), &train_set, &dev, &c).unwrap();
            assert_eq!(out.checkpoint.params, net);
        }
    }

    #[test]
    fn divergence_reports_epoch() {
        let train_set = linear_toy(64, 1);
        let dev = linear_toy(16, 2);
        let c = TrainConfig {
            learning_rate: 1e6,
            optimizer: OptimizerKind::Sgd,
            ..cfg(50)
        };
        match train(linear_net(1), &train_set, &dev, &c) {
            Err(Error::Divergence { epoch, .. }) => assert!(epoch >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_config_and_shapes() {
        let train_set = linear_toy(16, 1);
        let dev = linear_toy(8, 2);
        let c = TrainConfig { epochs: 0, ..cfg(1) };
        assert!(train(linear_net(1), &train_set, &dev, &c).is_err());
        let wide = Samples::new(vec![Matrix::zeros(4, 2)], Matrix::zeros(4, 1)).unwrap();
        assert!(train(linear_net(1), &wide, &dev, &cfg(1)).is_err());
        assert!(Samples::new(vec![Matrix::zeros(3, 1)], Matrix::zeros(4, 1)).is_err());
    }
}
