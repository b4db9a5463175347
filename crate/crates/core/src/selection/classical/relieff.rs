use rand::seq::index;

use crate::data::{dedup_rows, Dataset};
use crate::rng;
use crate::selection::{FeatureScore, MethodError, Selection, Selector, SelectorKind, SelectorParams};

pub const DEFAULT_NEIGHBORS: usize = 10;
pub const DEFAULT_SAMPLE_SIZE: usize = 200;

/// ReliefF feature weights for a two-class problem.
///
/// Distances are Manhattan on range-normalized features. Runs on the
/// distinct (row, label) pairs, so exact duplicate rows do not count as
/// neighbours of each other. When a class has too few members the neighbour
/// count shrinks to what is available.
pub fn score_relieff(
    d: &Dataset,
    k_neighbors: usize,
    sample_size: usize,
    seed: u64,
) -> Result<FeatureScore, MethodError> {
    if !d.has_both_classes() {
        return Err(MethodError::ConstantLabels);
    }
    if k_neighbors == 0 || sample_size == 0 {
        return Err(MethodError::InvalidParam("k_neighbors and sample_size must be >= 1".into()));
    }
    let d = dedup_rows(d);
    let n = d.n_rows();
    let p = d.n_cols();
    let cols = d.columns();
    let range: Vec<f64> = cols
        .iter()
        .map(|c| {
            let (lo, hi) = c
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            hi - lo
        })
        .collect();
    let diff = |a: usize, b: usize, j: usize| -> f64 {
        if range[j] > 0.0 {
            (d.value(a, j) - d.value(b, j)).abs() / range[j]
        } else {
            0.0
        }
    };

    let m = sample_size.min(n);
    let mut sampled: Vec<usize> = if m == n {
        (0..n).collect()
    } else {
        let mut rng = rng::stream(seed, rng::streams::RELIEFF);
        index::sample(&mut rng, n, m).into_vec()
    };
    sampled.sort_unstable();

    let labels = d.labels();
    let mut shrunk = false;
    let mut weights = vec![0.0; p];
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n);
    for &i in &sampled {
        dist.clear();
        dist.extend((0..n).filter(|&r| r != i).map(|r| {
            let s: f64 = (0..p).map(|j| diff(i, r, j)).sum();
            (s, r)
        }));
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let hits: Vec<usize> = dist
            .iter()
            .filter(|(_, r)| labels[*r] == labels[i])
            .map(|&(_, r)| r)
            .take(k_neighbors)
            .collect();
        let misses: Vec<usize> = dist
            .iter()
            .filter(|(_, r)| labels[*r] != labels[i])
            .map(|&(_, r)| r)
            .take(k_neighbors)
            .collect();
        if hits.len() < k_neighbors || misses.len() < k_neighbors {
            shrunk = true;
        }
        for j in 0..p {
            if !hits.is_empty() {
                let h: f64 = hits.iter().map(|&r| diff(i, r, j)).sum();
                weights[j] -= h / (m * hits.len()) as f64;
            }
            if !misses.is_empty() {
                let s: f64 = misses.iter().map(|&r| diff(i, r, j)).sum();
                weights[j] += s / (m * misses.len()) as f64;
            }
        }
    }
    if shrunk {
        log::info!("relieff: a class has fewer than {} neighbours; k shrunk to class size", k_neighbors);
    }
    Ok(FeatureScore::from_scores(weights))
}

pub struct ReliefF;

impl Selector for ReliefF {
    fn id(&self) -> &str {
        "relieff"
    }
    fn kind(&self) -> SelectorKind {
        SelectorKind::Ordering
    }
    fn description(&self) -> &str {
        "ReliefF weights from k=10 nearest hits and misses (Manhattan distance on range-normalized \
         features) over up to 200 seeded sampled instances. Operates on distinct rows. Keeps the \
         top k (default: half). Args: k_neighbors, sample_size."
    }
    fn run(&self, d: &Dataset, p: &SelectorParams) -> Result<Selection, MethodError> {
        let k = p.usize_or("k_neighbors", DEFAULT_NEIGHBORS)?;
        let m = p.usize_or("sample_size", DEFAULT_SAMPLE_SIZE)?;
        Ok(Selection::ranked(score_relieff(d, k, m, p.seed)?)
            .param("k_neighbors", k)
            .param("sample_size", m))
    }
}
