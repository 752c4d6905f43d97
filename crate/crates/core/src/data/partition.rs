use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Development subjects are named with a `Devel`/`dev` prefix (case-insensitive);
/// everything else is training data.
pub fn is_dev_subject(id: &str) -> bool {
    id.get(..3).is_some_and(|p| p.eq_ignore_ascii_case("dev"))
}

/// Training subjects, dev subjects used for model selection, and held-out
/// dev subjects used for testing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub train: Vec<String>,
    pub dev_select: Vec<String>,
    pub dev_test: Vec<String>,
}

impl Partition {
    pub fn all(&self) -> impl Iterator<Item = &String> {
        self.train.iter().chain(&self.dev_select).chain(&self.dev_test)
    }
}

/// Draws `n_select` of the dev subjects (seeded) for model selection; the
/// remaining dev subjects form the test subset. Both subsets keep the input
/// order of `dev_ids`.
pub fn split_partition(train_ids: &[String], dev_ids: &[String], n_select: usize, seed: u64) -> Result<Partition> {
    if train_ids.is_empty() {
        return Err(Error::input("no training subjects"));
    }
    if n_select == 0 || n_select >= dev_ids.len() {
        return Err(Error::input(format!(
            "selection subset size must be in 1..{} for {} dev subjects, got {n_select}",
            dev_ids.len(),
            dev_ids.len()
        )));
    }
    let mut seen = HashSet::new();
    for id in train_ids.iter().chain(dev_ids) {
        if !seen.insert(id) {
            return Err(Error::input(format!("subject '{id}' listed twice")));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..dev_ids.len()).collect();
    order.shuffle(&mut rng);
    let chosen: HashSet<usize> = order[..n_select].iter().copied().collect();

    let (mut dev_select, mut dev_test) = (Vec::new(), Vec::new());
    for (i, id) in dev_ids.iter().enumerate() {
        if chosen.contains(&i) {
            dev_select.push(id.clone());
        } else {
            dev_test.push(id.clone());
        }
    }
    Ok(Partition {
        train: train_ids.to_vec(),
        dev_select,
        dev_test,
    })
}
