use std::collections::HashMap;

use rand::Rng;

use crate::data::Dataset;
use crate::models::ModelKind;
use crate::rng;
use crate::selection::stats::info_gain_scores;
use crate::selection::{FeatureScore, MethodError, Selection, Selector, SelectorKind, SelectorParams};

use super::{rank_by, Wrapper};

pub const DEFAULT_POPULATION: usize = 15;
pub const DEFAULT_GENERATIONS: usize = 40;
const DE_F: f64 = 0.5;
const DE_CR: f64 = 0.9;

/// Weight-mapping family chosen by the first gene.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mapping {
    Linear,
    Power,
    Logistic,
}

/// Decoded candidate: mapping, its two parameters, and the cut.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub mapping: Mapping,
    pub a: f64,
    pub b: f64,
    pub tau: f64,
}

// gene bounds: [mapping selector, a, b, tau]
const LOWER: [f64; 4] = [0.0, 0.1, -1.0, 0.0];
const UPPER: [f64; 4] = [3.0, 5.0, 1.0, 1.0];

impl Candidate {
    fn decode(g: &[f64; 4]) -> Self {
        let mapping = match g[0] as usize {
            0 => Mapping::Linear,
            1 => Mapping::Power,
            _ => Mapping::Logistic,
        };
        Self {
            mapping,
            a: g[1],
            b: g[2],
            tau: g[3],
        }
    }

    pub fn map(&self, w: f64) -> f64 {
        match self.mapping {
            Mapping::Linear => self.a * w + self.b,
            Mapping::Power => w.powf(self.a),
            // steeper than the other two, so stretch the slope range
            Mapping::Logistic => 1.0 / (1.0 + (-4.0 * self.a * (w - self.b)).exp()),
        }
    }

    pub fn subset(&self, weights: &[f64]) -> Vec<usize> {
        (0..weights.len()).filter(|&j| self.map(weights[j]) >= self.tau).collect()
    }
}

/// Information gain scaled so the best feature has weight 1.
pub fn base_weights(d: &Dataset) -> Vec<f64> {
    let ig = info_gain_scores(d);
    let max = ig.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        ig.iter().map(|v| v / max).collect()
    } else {
        vec![0.0; ig.len()]
    }
}

#[derive(Debug, Clone)]
pub struct JowmOutcome {
    pub selected: Vec<usize>,
    pub best: Option<Candidate>,
    pub best_fitness: f64,
    /// Best fitness after each generation (index 0 = initial population).
    pub history: Vec<f64>,
    pub used_fallback: bool,
}

/// Differential evolution (rand/1/bin) over (mapping, a, b, tau), maximizing
/// inner 3-fold KNN F1 of the features whose mapped weight clears tau.
pub fn run_jowmdroid(
    d: &Dataset,
    population: usize,
    generations: usize,
    seed: u64,
) -> Result<JowmOutcome, MethodError> {
    if population < 4 {
        return Err(MethodError::BudgetTooSmall(format!(
            "population = {population}; differential evolution needs at least 4"
        )));
    }
    if !d.has_both_classes() {
        return Err(MethodError::ConstantLabels);
    }
    let w = base_weights(d);
    let wrapper = Wrapper::new(d, ModelKind::Knn, seed);
    let mut memo: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut fitness = |g: &[f64; 4]| -> Result<f64, MethodError> {
        let subset = Candidate::decode(g).subset(&w);
        if subset.is_empty() {
            return Ok(f64::NEG_INFINITY);
        }
        if let Some(&f) = memo.get(&subset) {
            return Ok(f);
        }
        let f = wrapper.f1(&subset)?;
        memo.insert(subset, f);
        Ok(f)
    };

    let mut rng = rng::stream(seed, rng::streams::DIFF_EVOLUTION);
    let mut pop: Vec<[f64; 4]> = (0..population)
        .map(|_| std::array::from_fn(|i| rng.gen_range(LOWER[i]..UPPER[i])))
        .collect();
    let mut fit = pop.iter().map(&mut fitness).collect::<Result<Vec<_>, _>>()?;
    let best_of = |fit: &[f64]| {
        (0..fit.len()).fold(0, |b, i| if fit[i] > fit[b] { i } else { b })
    };
    let mut history = vec![fit[best_of(&fit)]];

    for _ in 0..generations {
        for i in 0..population {
            let mut pick = || loop {
                let r = rng.gen_range(0..population);
                if r != i {
                    break r;
                }
            };
            let (r1, r2, r3) = (pick(), pick(), pick());
            let forced = rng.gen_range(0..4);
            let mut trial = pop[i];
            for k in 0..4 {
                if k == forced || rng.gen::<f64>() < DE_CR {
                    let v = pop[r1][k] + DE_F * (pop[r2][k] - pop[r3][k]);
                    // keep the selector gene strictly below its upper bound
                    trial[k] = v.clamp(LOWER[k], UPPER[k] - if k == 0 { 1e-9 } else { 0.0 });
                }
            }
            let f = fitness(&trial)?;
            if f >= fit[i] {
                pop[i] = trial;
                fit[i] = f;
            }
        }
        history.push(fit[best_of(&fit)]);
    }

    let b = best_of(&fit);
    if fit[b].is_finite() {
        let cand = Candidate::decode(&pop[b]);
        Ok(JowmOutcome {
            selected: cand.subset(&w),
            best: Some(cand),
            best_fitness: fit[b],
            history,
            used_fallback: false,
        })
    } else {
        log::warn!("jowmdroid: every candidate selected nothing; falling back to the top 10% by weight");
        let all: Vec<usize> = (0..w.len()).collect();
        let keep = w.len().div_ceil(10).max(1);
        let mut selected = rank_by(&all, &w)[..keep].to_vec();
        selected.sort_unstable();
        Ok(JowmOutcome {
            selected,
            best: None,
            best_fitness: f64::NEG_INFINITY,
            history,
            used_fallback: true,
        })
    }
}

pub struct JowmDroid;

impl Selector for JowmDroid {
    fn id(&self) -> &str {
        "jowmdroid"
    }
    fn kind(&self) -> SelectorKind {
        SelectorKind::Subset
    }
    fn description(&self) -> &str {
        "Weight-mapping selection: base weights are information gain scaled to [0, 1]; a linear, \
         power or logistic mapping with parameters (a, b) and a cut tau are tuned jointly by \
         differential evolution (population 15, 40 generations, seeded) to maximize 3-fold KNN F1 \
         of the features whose mapped weight reaches tau. Falls back to the top 10% by weight if \
         no candidate keeps a feature. Stand-in: the original optimizes per-feature weights for \
         weighted classifiers; the mapping families, bounds and KNN wrapper are local choices. \
         Args: population, generations."
    }
    fn run(&self, d: &Dataset, p: &SelectorParams) -> Result<Selection, MethodError> {
        let population = p.usize_or("population", DEFAULT_POPULATION)?;
        let generations = p.usize_or("generations", DEFAULT_GENERATIONS)?;
        let out = run_jowmdroid(d, population, generations, p.seed)?;
        let mut sel = Selection::subset(out.selected)
            .with_ranking(FeatureScore::from_scores(base_weights(d)))
            .param("population", population)
            .param("generations", generations)
            .param("fallback", out.used_fallback);
        if let Some(c) = out.best {
            sel = sel.param("mapping", format!("{:?}", c.mapping)).param("tau", c.tau);
        }
        Ok(sel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{planted, PlantedSpec};

    #[test]
    fn perfect_feature_always_selected() {
        let mut spec = PlantedSpec::new(120, 1, 6);
        spec.flip = 0.0;
        for seed in 0..3 {
            let p = planted(&spec, seed);
            let out = run_jowmdroid(&p.dataset, 8, 5, seed).unwrap();
            assert!(out.selected.contains(&p.informative[0]), "seed {seed}: {:?}", out.selected);
        }
    }

    #[test]
    fn best_fitness_non_decreasing() {
        let p = planted(&PlantedSpec::new(100, 2, 5), 3);
        let out = run_jowmdroid(&p.dataset, 6, 6, 3).unwrap();
        assert_eq!(out.history.len(), 7);
        assert!(out.history.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn equal_weights_all_or_fallback() {
        // two columns with identical information gain
        let labels: Vec<u8> = (0..24).map(|i| u8::from(i % 2 == 0)).collect();
        let rows = (0..24)
            .map(|i| {
                let y = f64::from(labels[i]);
                let flip = f64::from(u8::from(i % 6 == 0));
                vec![(y - flip).abs(), (y - flip).abs()]
            })
            .collect();
        let d = Dataset::new("t", rows, vec!["a".into(), "b".into()], labels).unwrap();
        let a = run_jowmdroid(&d, 5, 3, 9).unwrap();
        let b = run_jowmdroid(&d, 5, 3, 9).unwrap();
        assert_eq!(a.selected, b.selected);
        assert!(a.selected == vec![0, 1] || a.used_fallback);
    }
}
