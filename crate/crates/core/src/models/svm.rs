use rand::seq::SliceRandom;

use crate::data::{Dataset, MALWARE};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    pub epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { c: 1.0, epochs: 50 }
    }
}

/// Linear SVM trained with Pegasos-style stochastic subgradient steps.
///
/// Minimizes `lambda/2 |w|^2 + mean(hinge)` with `lambda = 1/(C n)`, which is
/// `1/2 |w|^2 + C sum(hinge)` up to scale. The bias is an extra constant-1
/// input, so it is regularized too. At the end of every epoch the full
/// objective is evaluated and an epoch that made it worse is rolled back,
/// so the recorded objective never increases.
#[derive(Debug, Clone)]
pub struct LinearSvm {
    weights: Vec<f64>,
    bias: f64,
    objective_history: Vec<f64>,
}

fn objective(w: &[f64], b: f64, xs: &[&[f64]], ys: &[f64], lambda: f64) -> f64 {
    let norm2: f64 = w.iter().map(|v| v * v).sum::<f64>() + b * b;
    let hinge: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| {
            let m = y * (dot(w, x) + b);
            (1.0 - m).max(0.0)
        })
        .sum::<f64>()
        / xs.len() as f64;
    0.5 * lambda * norm2 + hinge
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

impl LinearSvm {
    pub fn fit(d: &Dataset, params: &SvmParams, seed: u64) -> Self {
        let n = d.n_rows();
        let dim = d.n_cols();
        let xs: Vec<&[f64]> = d.rows().collect();
        let ys: Vec<f64> = d
            .labels()
            .iter()
            .map(|&l| if l == MALWARE { 1.0 } else { -1.0 })
            .collect();
        let lambda = 1.0 / (params.c * n as f64);
        let radius = 1.0 / lambda.sqrt();

        let mut w = vec![0.0; dim];
        let mut b = 0.0;
        let mut best_w = w.clone();
        let mut best_b = b;
        let mut best_obj = objective(&w, b, &xs, &ys, lambda);
        let mut history = vec![best_obj];

        let mut rng = rng::stream(seed, rng::streams::SVM);
        let mut order: Vec<usize> = (0..n).collect();
        let mut t = 0u64;
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let margin = ys[i] * (dot(&w, xs[i]) + b);
                let shrink = 1.0 - eta * lambda;
                for v in w.iter_mut() {
                    *v *= shrink;
                }
                b *= shrink;
                if margin < 1.0 {
                    for (v, &x) in w.iter_mut().zip(xs[i]) {
                        *v += eta * ys[i] * x;
                    }
                    b += eta * ys[i];
                }
                let norm = (w.iter().map(|v| v * v).sum::<f64>() + b * b).sqrt();
                if norm > radius {
                    let s = radius / norm;
                    for v in w.iter_mut() {
                        *v *= s;
                    }
                    b *= s;
                }
            }
            let obj = objective(&w, b, &xs, &ys, lambda);
            if obj <= best_obj {
                best_obj = obj;
                best_w.clone_from(&w);
                best_b = b;
            } else {
                w.clone_from(&best_w);
                b = best_b;
            }
            history.push(best_obj);
        }
        Self {
            weights: best_w,
            bias: best_b,
            objective_history: history,
        }
    }

    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// Objective after initialization and after each epoch.
    pub fn objective_history(&self) -> &[f64] {
        &self.objective_history
    }

    /// Signed margin `w.x + b`.
    pub fn score_row(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row) + self.bias
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{planted, PlantedSpec};

    #[test]
    fn one_dimensional_separable() {
        let rows = vec![vec![-1.0], vec![-1.0], vec![1.0], vec![1.0], vec![1.0], vec![-1.0]];
        let labels = vec![0, 0, 1, 1, 1, 0];
        let d = Dataset::new("t", rows, vec!["x".into()], labels).unwrap();
        let m = LinearSvm::fit(&d, &SvmParams::default(), 0);
        for (row, &y) in d.rows().zip(d.labels()) {
            assert_eq!(m.score_row(row) >= 0.0, y == 1);
            assert!(m.score_row(row) != 0.0);
        }
    }

    #[test]
    fn objective_never_increases() {
        let p = planted(&PlantedSpec::new(300, 4, 8), 5);
        let m = LinearSvm::fit(&p.dataset, &SvmParams::default(), 9);
        let h = m.objective_history();
        assert_eq!(h.len(), 51);
        for w in h.windows(2) {
            assert!(w[1] <= w[0] + 1e-6);
        }
        assert!(h[50] < h[0]);
    }

    #[test]
    fn informative_weights_dominate() {
        let p = planted(&PlantedSpec::new(400, 3, 5), 6);
        let m = LinearSvm::fit(&p.dataset, &SvmParams::default(), 1);
        let min_sig = p
            .informative
            .iter()
            .map(|&j| m.weights()[j].abs())
            .fold(f64::INFINITY, f64::min);
        let max_noise = (0..8)
            .filter(|j| !p.informative.contains(j))
            .map(|j| m.weights()[j].abs())
            .fold(0.0, f64::max);
        assert!(min_sig > max_noise, "{min_sig} vs {max_noise}");
    }
}
