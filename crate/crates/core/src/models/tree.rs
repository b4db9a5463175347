use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, MALWARE};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    /// Features examined per node; `None` examines all of them.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_features: None,
            min_samples_split: 2,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf {
        malware_fraction: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART classification tree with Gini impurity.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_features: usize,
}

fn gini(malware: f64, total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let p = malware / total;
    2.0 * p * (1.0 - p)
}

struct SplitCandidate {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl DecisionTree {
    /// Fits on every row of `d`, drawing feature subsets from `seed`.
    pub fn fit(d: &Dataset, params: &TreeParams, seed: u64) -> Self {
        let columns = d.columns();
        let sample: Vec<usize> = (0..d.n_rows()).collect();
        let mut rng = rng::stream(seed, rng::streams::FOREST);
        Self::fit_on(&columns, d.labels(), &sample, params, &mut rng)
    }

    /// Fits on the rows listed in `sample` (repeats allowed, as in a bootstrap).
    pub(crate) fn fit_on(
        columns: &[Vec<f64>],
        labels: &[u8],
        sample: &[usize],
        params: &TreeParams,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let n_features = columns.len();
        let mtry = params.max_features.unwrap_or(n_features).clamp(1, n_features.max(1));
        let mut nodes = vec![Node::Leaf {
            malware_fraction: 0.0,
        }];
        let mut stack: Vec<(usize, Vec<usize>, usize)> = vec![(0, sample.to_vec(), 0)];
        let mut feature_order: Vec<usize> = (0..n_features).collect();
        let mut pairs: Vec<(f64, u8)> = Vec::with_capacity(sample.len());

        while let Some((slot, idx, depth)) = stack.pop() {
            let total = idx.len() as f64;
            let malware = idx.iter().filter(|&&i| labels[i] == MALWARE).count() as f64;
            let fraction = if total > 0.0 { malware / total } else { 0.0 };
            let pure = malware == 0.0 || malware == total;
            let depth_capped = params.max_depth.is_some_and(|m| depth >= m);
            if pure || idx.len() < params.min_samples_split || depth_capped {
                nodes[slot] = Node::Leaf {
                    malware_fraction: fraction,
                };
                continue;
            }

            feature_order.shuffle(rng);
            let mut best: Option<SplitCandidate> = None;
            let mut examined = 0;
            for &f in &feature_order {
                if examined >= mtry {
                    break;
                }
                pairs.clear();
                pairs.extend(idx.iter().map(|&i| (columns[f][i], labels[i])));
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                if pairs[0].0 == pairs[pairs.len() - 1].0 {
                    // constant here; does not count towards mtry
                    continue;
                }
                examined += 1;
                let mut left_n = 0.0;
                let mut left_m = 0.0;
                for w in 0..pairs.len() - 1 {
                    left_n += 1.0;
                    if pairs[w].1 == MALWARE {
                        left_m += 1.0;
                    }
                    if pairs[w].0 == pairs[w + 1].0 {
                        continue;
                    }
                    let right_n = total - left_n;
                    let right_m = malware - left_m;
                    let impurity = (left_n * gini(left_m, left_n) + right_n * gini(right_m, right_n)) / total;
                    if best.as_ref().map_or(true, |b| impurity < b.impurity) {
                        best = Some(SplitCandidate {
                            feature: f,
                            threshold: 0.5 * (pairs[w].0 + pairs[w + 1].0),
                            impurity,
                        });
                    }
                }
            }

            let Some(split) = best else {
                nodes[slot] = Node::Leaf {
                    malware_fraction: fraction,
                };
                continue;
            };
            let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
                .iter()
                .partition(|&&i| columns[split.feature][i] <= split.threshold);
            let left = nodes.len();
            let right = left + 1;
            nodes.push(Node::Leaf {
                malware_fraction: 0.0,
            });
            nodes.push(Node::Leaf {
                malware_fraction: 0.0,
            });
            nodes[slot] = Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left,
                right,
            };
            stack.push((right, right_idx, depth + 1));
            stack.push((left, left_idx, depth + 1));
        }
        Self { nodes, n_features }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Malware fraction of the training rows in the reached leaf.
    pub fn leaf_fraction(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { malware_fraction } => return *malware_fraction,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Majority label of the reached leaf; an exact tie votes benign.
    pub fn predict_row(&self, row: &[f64]) -> u8 {
        u8::from(self.leaf_fraction(row) > 0.5)
    }
}
