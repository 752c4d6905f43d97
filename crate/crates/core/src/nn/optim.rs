use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::input(format!("unknown optimizer '{other}'"))),
        }
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

/// Optimizer state for one parameter set.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd {
        learning_rate: f64,
    },
    Adam {
        learning_rate: f64,
        step: i32,
        first: Vec<Vec<f64>>,
        second: Vec<Vec<f64>>,
    },
}

impl Optimizer {
    /// `shapes` are the lengths of the parameter tensors, in update order.
    pub fn new(kind: OptimizerKind, learning_rate: f64, shapes: &[usize]) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { learning_rate },
            OptimizerKind::Adam => Optimizer::Adam {
                learning_rate,
                step: 0,
                first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
                second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            },
        }
    }

    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: &[Vec<f64>]) {
        debug_assert_eq!(params.len(), grads.len());
        match self {
            Optimizer::Sgd { learning_rate } => {
                let lr = *learning_rate;
                for (p, g) in params.into_iter().zip(grads) {
                    for (w, d) in p.iter_mut().zip(g) {
                        *w -= lr * d;
                    }
                }
            }
            Optimizer::Adam {
                learning_rate,
                step,
                first,
                second,
            } => {
                *step += 1;
                let lr = *learning_rate;
                let c1 = 1.0 - BETA1.powi(*step);
                let c2 = 1.0 - BETA2.powi(*step);
                for (((p, g), m), v) in params.into_iter().zip(grads).zip(first.iter_mut()).zip(second.iter_mut()) {
                    for (((w, d), mi), vi) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *mi = BETA1 * *mi + (1.0 - BETA1) * d;
                        *vi = BETA2 * *vi + (1.0 - BETA2) * d * d;
                        let m_hat = *mi / c1;
                        let v_hat = *vi / c2;
                        *w -= lr * m_hat / (v_hat.sqrt() + EPSILON);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_step() {
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.5, &[2]);
        let mut p = vec![1.0, 2.0];
        opt.step(vec![&mut p], &[vec![2.0, -2.0]]);
        assert_eq!(p, vec![0.0, 3.0]);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        // bias correction makes the first update ±lr (up to epsilon)
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01, &[2]);
        let mut p = vec![1.0, 1.0];
        opt.step(vec![&mut p], &[vec![3.0, -0.2]]);
        assert!((p[0] - 0.99).abs() < 1e-9);
        assert!((p[1] - 1.01).abs() < 1e-9);
    }

    #[test]
    fn names_parse() {
        assert_eq!("Adam".parse::<OptimizerKind>().unwrap(), OptimizerKind::Adam);
        assert!("rmsprop".parse::<OptimizerKind>().is_err());
    }
}
