use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::evaluation::mean_cv_f1;
use crate::models::{ModelKind, ModelSpec};
use crate::rng;
use crate::selection::{MethodError, Selection, Selector, SelectorKind, SelectorParams};

pub const DEFAULT_COLONY: usize = 20;
pub const DEFAULT_ITERATIONS: usize = 50;
pub const SCOUT_LIMIT: usize = 10;
const SIZE_PENALTY: f64 = 0.001;
const INNER_FOLDS: usize = 3;

#[derive(Debug, Clone)]
pub struct AbcOutcome {
    pub selected: Vec<usize>,
    pub best_fitness: f64,
    /// Best fitness among the initial food sources.
    pub initial_best: f64,
    /// Best fitness after each iteration.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

struct Fitness<'a> {
    d: &'a Dataset,
    spec: ModelSpec,
    fold_seed: u64,
    memo: HashMap<Vec<bool>, f64>,
}

impl Fitness<'_> {
    fn eval(&mut self, mask: &[bool]) -> Result<f64, MethodError> {
        if let Some(&f) = self.memo.get(mask) {
            return Ok(f);
        }
        let cols: Vec<usize> = (0..mask.len()).filter(|&j| mask[j]).collect();
        let f1 = mean_cv_f1(&self.d.select_columns(&cols), &self.spec, INNER_FOLDS, self.fold_seed)?;
        let f = f1 - SIZE_PENALTY * cols.len() as f64 / mask.len() as f64;
        self.memo.insert(mask.to_vec(), f);
        Ok(f)
    }
}

fn random_mask(n: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut m: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
    if !m.contains(&true) {
        m[rng.gen_range(0..n)] = true;
    }
    m
}

/// Flips one random bit, never emptying the mask.
fn neighbour(mask: &[bool], rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut m = mask.to_vec();
    let on = m.iter().filter(|&&b| b).count();
    loop {
        let j = rng.gen_range(0..m.len());
        if m[j] && on == 1 {
            if m.len() == 1 {
                return m;
            }
            continue;
        }
        m[j] = !m[j];
        return m;
    }
}

/// Binary artificial bee colony over feature-inclusion masks.
pub fn run_abc(d: &Dataset, colony: usize, iterations: usize, seed: u64) -> Result<AbcOutcome, MethodError> {
    if colony < 2 || iterations < 1 {
        return Err(MethodError::BudgetTooSmall(format!(
            "colony = {colony}, iterations = {iterations}; need colony >= 2 and iterations >= 1"
        )));
    }
    if !d.has_both_classes() {
        return Err(MethodError::ConstantLabels);
    }
    let n = d.n_cols();
    let mut rng = rng::stream(seed, rng::streams::ABC);
    let mut fit = Fitness {
        d,
        spec: ModelSpec::new(ModelKind::Knn, seed),
        fold_seed: rng::derive(seed, rng::streams::WRAPPER_FOLDS),
        memo: HashMap::new(),
    };

    let n_sources = colony / 2;
    let mut sources: Vec<Vec<bool>> = (0..n_sources).map(|_| random_mask(n, &mut rng)).collect();
    let mut fitness = sources.iter().map(|m| fit.eval(m)).collect::<Result<Vec<_>, _>>()?;
    let mut trials = vec![0usize; n_sources];

    let mut best = 0;
    for i in 1..n_sources {
        if fitness[i] > fitness[best] {
            best = i;
        }
    }
    let mut best_mask = sources[best].clone();
    let mut best_fit = fitness[best];
    let initial_best = best_fit;
    let mut history = Vec::with_capacity(iterations);

    let try_improve = |i: usize,
                           sources: &mut Vec<Vec<bool>>,
                           fitness: &mut Vec<f64>,
                           trials: &mut Vec<usize>,
                           fit: &mut Fitness,
                           rng: &mut ChaCha8Rng|
     -> Result<(), MethodError> {
        let cand = neighbour(&sources[i], rng);
        let f = fit.eval(&cand)?;
        if f > fitness[i] {
            sources[i] = cand;
            fitness[i] = f;
            trials[i] = 0;
        } else {
            trials[i] += 1;
        }
        Ok(())
    };

    for _ in 0..iterations {
        // employed bees
        for i in 0..n_sources {
            try_improve(i, &mut sources, &mut fitness, &mut trials, &mut fit, &mut rng)?;
        }
        // onlookers: roulette on fitness shifted to be positive
        let lo = fitness.iter().copied().fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = fitness.iter().map(|f| f - lo + 1e-3).collect();
        let total: f64 = weights.iter().sum();
        for _ in 0..n_sources {
            let mut r = rng.gen::<f64>() * total;
            let mut i = 0;
            while i + 1 < n_sources && r >= weights[i] {
                r -= weights[i];
                i += 1;
            }
            try_improve(i, &mut sources, &mut fitness, &mut trials, &mut fit, &mut rng)?;
        }
        for i in 0..n_sources {
            if fitness[i] > best_fit {
                best_fit = fitness[i];
                best_mask = sources[i].clone();
            }
        }
        // one scout per iteration: the most stagnant exhausted source
        let stale = (0..n_sources)
            .filter(|&i| trials[i] > SCOUT_LIMIT)
            .max_by(|&a, &b| trials[a].cmp(&trials[b]).then(b.cmp(&a)));
        if let Some(i) = stale {
            sources[i] = random_mask(n, &mut rng);
            fitness[i] = fit.eval(&sources[i])?;
            trials[i] = 0;
            if fitness[i] > best_fit {
                best_fit = fitness[i];
                best_mask = sources[i].clone();
            }
        }
        history.push(best_fit);
    }

    Ok(AbcOutcome {
        selected: (0..n).filter(|&j| best_mask[j]).collect(),
        best_fitness: best_fit,
        initial_best,
        history,
        evaluations: fit.memo.len(),
    })
}

pub struct Abc;

impl Selector for Abc {
    fn id(&self) -> &str {
        "abc"
    }
    fn kind(&self) -> SelectorKind {
        SelectorKind::Subset
    }
    fn description(&self) -> &str {
        "Binary artificial bee colony over feature masks (colony 20, i.e. 10 food sources; 50 \
         iterations; scout limit 10). Fitness is the mean stratified 3-fold F1 of KNN on the \
         masked data minus 0.001 x subset fraction. Neighbours flip one bit. Args: colony, iterations."
    }
    fn run(&self, d: &Dataset, p: &SelectorParams) -> Result<Selection, MethodError> {
        let colony = p.usize_or("colony", DEFAULT_COLONY)?;
        let iterations = p.usize_or("iterations", DEFAULT_ITERATIONS)?;
        let out = run_abc(d, colony, iterations, p.seed)?;
        Ok(Selection::subset(out.selected)
            .param("colony", colony)
            .param("iterations", iterations)
            .param("fitness", out.best_fitness))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{planted, PlantedSpec};

    #[test]
    fn single_feature() {
        let p = planted(&PlantedSpec::new(30, 1, 0), 0);
        let out = run_abc(&p.dataset, 4, 3, 1).unwrap();
        assert_eq!(out.selected, vec![0]);
    }

    #[test]
    fn budget_checked() {
        let p = planted(&PlantedSpec::new(30, 1, 1), 0);
        assert!(matches!(run_abc(&p.dataset, 1, 5, 0), Err(MethodError::BudgetTooSmall(_))));
        assert!(matches!(run_abc(&p.dataset, 4, 0, 0), Err(MethodError::BudgetTooSmall(_))));
    }

    #[test]
    fn best_never_below_initial_and_monotone() {
        let p = planted(&PlantedSpec::new(120, 2, 4), 5);
        let out = run_abc(&p.dataset, 6, 8, 5).unwrap();
        assert!(out.best_fitness >= out.initial_best);
        assert!(out.history.windows(2).all(|w| w[1] >= w[0]));
        assert!(!out.selected.is_empty());
    }

    #[test]
    fn neighbour_keeps_mask_nonempty() {
        let mut rng = rng::stream(0, 0);
        let m = vec![false, true, false];
        for _ in 0..50 {
            let n = neighbour(&m, &mut rng);
            assert!(n.contains(&true));
            assert_eq!(n.iter().zip(&m).filter(|(a, b)| a != b).count(), 1);
        }
    }
}
