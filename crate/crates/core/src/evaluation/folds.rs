use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{BENIGN, MALWARE};
use crate::evaluation::EvalError;
use crate::rng;

/// Fold id for every row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    /// `counts[fold]` for rows whose label is `class`.
    pub fn class_counts(&self, labels: &[u8], class: u8) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for (&f, &y) in self.assignments.iter().zip(labels) {
            if y == class {
                counts[f] += 1;
            }
        }
        counts
    }
}

/// Stratified K-fold split.
///
/// Each class is shuffled and dealt round-robin; the deal continues from
/// benign where malware stopped, which keeps fold sizes within one row of
/// each other as well.
///
/// A class may have fewer than `k` rows (some folds then hold none of it),
/// but it needs at least two so every training fold still contains it.
/// The experiment loop is stricter, see `evaluation::run`.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<FoldPlan, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidK(k));
    }
    let mut rng = rng::stream(seed, rng::streams::FOLDS);
    let mut assignments = vec![0; labels.len()];
    let mut next = 0;
    for class in [MALWARE, BENIGN] {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if rows.len() < 2 {
            return Err(EvalError::ClassSmallerThanK {
                class,
                count: rows.len(),
                k,
            });
        }
        rows.shuffle(&mut rng);
        for r in rows {
            assignments[r] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldPlan { k, assignments })
}
