use rand::Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::models::tree::{DecisionTree, TreeParams};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features tried per node; `None` means ceil(sqrt(n_features)).
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub min_samples_split: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: None,
            bootstrap: true,
            min_samples_split: 2,
        }
    }
}

impl ForestParams {
    pub fn tree_params(&self, n_features: usize) -> TreeParams {
        let sqrt = (n_features as f64).sqrt().ceil() as usize;
        TreeParams {
            max_features: Some(self.max_features.unwrap_or(sqrt).max(1)),
            min_samples_split: self.min_samples_split,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    n_features: usize,
}

impl RandomForest {
    /// Tree `t` draws from seed `rng::derive(seed, t)`, so the forest is the
    /// same whatever the thread count.
    pub fn fit(d: &Dataset, params: &ForestParams, seed: u64) -> Self {
        let columns = d.columns();
        let tree_params = params.tree_params(d.n_cols());
        let n = d.n_rows();
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng::stream(rng::derive(seed, t as u64), rng::streams::FOREST);
                let sample: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                DecisionTree::fit_on(&columns, d.labels(), &sample, &tree_params, &mut rng)
            })
            .collect();
        Self {
            trees,
            n_features: d.n_cols(),
        }
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Fraction of trees voting malware.
    pub fn score_row(&self, row: &[f64]) -> f64 {
        let votes: usize = self.trees.iter().map(|t| usize::from(t.predict_row(row))).sum();
        votes as f64 / self.trees.len() as f64
    }
}
