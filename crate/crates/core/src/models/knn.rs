use crate::data::{Dataset, MALWARE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

/// Brute-force k-nearest-neighbour classifier.
#[derive(Debug, Clone)]
pub struct Knn {
    k: usize,
    n_features: usize,
    train: Vec<f64>,
    labels: Vec<u8>,
}

impl Knn {
    pub fn fit(d: &Dataset, params: KnnParams) -> Self {
        let mut train = Vec::with_capacity(d.n_rows() * d.n_cols());
        for row in d.rows() {
            train.extend_from_slice(row);
        }
        Self {
            k: params.k.min(d.n_rows()).max(1),
            n_features: d.n_cols(),
            train,
            labels: d.labels().to_vec(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Malware fraction among the k nearest training rows.
    pub fn score_row(&self, row: &[f64]) -> f64 {
        let mut dist: Vec<(f64, usize)> = self
            .train
            .chunks_exact(self.n_features.max(1))
            .enumerate()
            .map(|(i, t)| {
                let d2: f64 = t.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, i)
            })
            .collect();
        // squared distance orders the same as Euclidean; ties go to the lower index
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, cmp);
        }
        let votes = dist[..self.k]
            .iter()
            .filter(|(_, i)| self.labels[*i] == MALWARE)
            .count();
        votes as f64 / self.k as f64
    }
}
