use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, Stream};

pub const DEFAULT_FOLDS: usize = 10;

/// Stratified assignment of subjects to folds. Fold `f` tests on `f`,
/// validates on `f + 1 (mod K)` and trains on the rest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: usize,
    pub fold_of: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Train and validation subjects, ascending.
    pub fn fit(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.train.iter().chain(&self.val).copied().collect();
        v.sort_unstable();
        v
    }
}

impl FoldPlan {
    /// Each class is shuffled and dealt round-robin, with the dealer position
    /// carried over between classes so fold sizes also stay balanced.
    pub fn stratified(labels: &[usize], folds: usize, seed: u64) -> Result<Self> {
        if folds < 3 {
            return Err(Error::invalid(format!(
                "need at least 3 folds (train, validation and test), got {folds}"
            )));
        }
        let classes = labels.iter().max().map_or(0, |&c| c + 1);
        let mut fold_of = vec![0; labels.len()];
        let mut dealer = 0;
        for c in 0..classes {
            let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
            if members.len() < folds {
                return Err(Error::invalid(format!(
                    "class {c} has {} subjects, fewer than {folds} folds; use --folds {} or fewer",
                    members.len(),
                    members.len().max(3)
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, Stream::Folds, c as u64));
            members.shuffle(&mut rng);
            for i in members {
                fold_of[i] = dealer % folds;
                dealer += 1;
            }
        }
        Ok(Self { folds, fold_of })
    }

    pub fn split(&self, fold: usize) -> Split {
        assert!(fold < self.folds, "fold {fold} out of range");
        let val_fold = (fold + 1) % self.folds;
        let mut split = Split {
            train: Vec::new(),
            val: Vec::new(),
            test: Vec::new(),
        };
        for (i, &f) in self.fold_of.iter().enumerate() {
            if f == fold {
                split.test.push(i);
            } else if f == val_fold {
                split.val.push(i);
            } else {
                split.train.push(i);
            }
        }
        split
    }
}
