//! The six Android-specific methods, all of kind `Subset`.
//!
//! The original publications' pipelines are not reproduced; each module is a
//! fixed stand-in whose departures are listed in its description text.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureKind};
use crate::evaluation::mean_cv_f1;
use crate::models::{ModelKind, ModelSpec};
use crate::rng;
use crate::selection::{MethodError, Selector, SelectorParams};

pub mod jowmdroid;
pub mod mt;
pub mod rfg;
pub mod semidroid;
pub mod sigapi;
pub mod sigpid;

pub use jowmdroid::{run_jowmdroid, JowmOutcome};
pub use mt::select_mt;
pub use rfg::select_rfg;
pub use semidroid::{aggregate_ranks, select_semidroid};
pub use sigapi::select_sigapi;
pub use sigpid::select_sigpid;

pub fn all() -> Vec<Arc<dyn Selector>> {
    vec![
        Arc::new(jowmdroid::JowmDroid),
        Arc::new(mt::MultiTiered),
        Arc::new(rfg::Rfg),
        Arc::new(semidroid::SemiDroid),
        Arc::new(sigapi::SigApi),
        Arc::new(sigpid::SigPid),
    ]
}

pub const INNER_FOLDS: usize = 3;

/// Subset sizes visited by an incremental wrapper, with the metric at each.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SaturationTrace {
    pub steps: Vec<(usize, f64)>,
}

impl SaturationTrace {
    pub fn push(&mut self, size: usize, metric: f64) {
        debug_assert!(self.steps.last().map_or(true, |&(s, _)| s < size));
        self.steps.push((size, metric));
    }

    pub fn best(&self) -> f64 {
        self.steps.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Mean inner-CV F1 of a model restricted to a column subset.
pub struct Wrapper<'a> {
    d: &'a Dataset,
    spec: ModelSpec,
    fold_seed: u64,
}

impl<'a> Wrapper<'a> {
    pub fn new(d: &'a Dataset, kind: ModelKind, seed: u64) -> Self {
        Self {
            d,
            spec: ModelSpec::new(kind, seed),
            fold_seed: rng::derive(seed, rng::streams::WRAPPER_FOLDS),
        }
    }

    pub fn with_spec(mut self, spec: ModelSpec) -> Self {
        self.spec = spec;
        self
    }

    pub fn f1(&self, cols: &[usize]) -> Result<f64, MethodError> {
        Ok(mean_cv_f1(&self.d.select_columns(cols), &self.spec, INNER_FOLDS, self.fold_seed)?)
    }
}

/// Columns of `kind`, or every column (with a warning) when the dataset
/// carries no kinds. `None` means kinds are known but none match.
pub fn gate_columns(d: &Dataset, kind: FeatureKind, method: &str) -> Option<Vec<usize>> {
    match d.columns_of_kind(kind) {
        Some(cols) if cols.is_empty() => None,
        Some(cols) => Some(cols),
        None => {
            log::warn!(
                "{method}: dataset `{}` has no feature kinds; running on ALL {} columns outside the method's domain",
                d.name(),
                d.n_cols()
            );
            Some((0..d.n_cols()).collect())
        }
    }
}

/// Step size for prefix growth: `fraction` of the candidates, at least 1.
pub fn step_size(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).ceil() as usize).max(1)
}

/// Prefix sizes `step, 2*step, ..., n` (the last is always `n`).
pub fn prefix_sizes(n: usize, step: usize) -> Vec<usize> {
    let mut sizes: Vec<usize> = (1..).map(|i| i * step).take_while(|&s| s < n).collect();
    sizes.push(n);
    sizes
}

/// `candidates` sorted by descending score, ties to the lower index.
pub fn rank_by(candidates: &[usize], score: &[f64]) -> Vec<usize> {
    let mut c = candidates.to_vec();
    c.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    c
}

pub(crate) fn fraction_param(p: &SelectorParams, key: &str, default: f64) -> Result<f64, MethodError> {
    let v = p.f64_or(key, default)?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(MethodError::InvalidParam(format!("{key} = {v} not in (0, 1]")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_sizes_cover_all() {
        assert_eq!(prefix_sizes(10, 3), vec![3, 6, 9, 10]);
        assert_eq!(prefix_sizes(4, 4), vec![4]);
        assert_eq!(prefix_sizes(1, 1), vec![1]);
        assert_eq!(step_size(113, 0.05), 6);
        assert_eq!(step_size(3, 0.05), 1);
    }

    #[test]
    fn rank_ties_lower_index() {
        assert_eq!(rank_by(&[0, 1, 2, 3], &[0.5, 0.9, 0.5, 0.1]), vec![1, 0, 2, 3]);
    }
}
