use crate::data::{Dataset, FeatureKind, MALWARE};
use crate::models::ModelKind;
use crate::selection::stats::is_present;
use crate::selection::{MethodError, Selection, Selector, SelectorKind, SelectorParams};

use super::{fraction_param, gate_columns, prefix_sizes, step_size, SaturationTrace, Wrapper};

/// Presence rate in malware minus presence rate in benign, per column.
pub fn rate_difference(d: &Dataset) -> Vec<f64> {
    let nm = d.n_malware().max(1) as f64;
    let nb = d.n_benign().max(1) as f64;
    (0..d.n_cols())
        .map(|j| {
            let (mut cm, mut cb) = (0usize, 0usize);
            for (row, &y) in d.rows().zip(d.labels()) {
                if is_present(row[j]) {
                    if y == MALWARE {
                        cm += 1;
                    } else {
                        cb += 1;
                    }
                }
            }
            cm as f64 / nm - cb as f64 / nb
        })
        .collect()
}

fn support(d: &Dataset, j: usize) -> usize {
    d.rows().filter(|r| is_present(r[j])).count()
}

/// Level 2: drop features present in fewer than `min_fraction` of rows.
pub fn prune_support(d: &Dataset, kept: &[usize], min_fraction: f64) -> Vec<usize> {
    let min = min_fraction * d.n_rows() as f64;
    kept.iter().copied().filter(|&j| support(d, j) as f64 >= min).collect()
}

/// P(x_a = 1 | x_b = 1); `None` when b never occurs.
pub fn confidence(d: &Dataset, a: usize, b: usize) -> Option<f64> {
    let (mut both, mut nb) = (0usize, 0usize);
    for r in d.rows() {
        if is_present(r[b]) {
            nb += 1;
            if is_present(r[a]) {
                both += 1;
            }
        }
    }
    (nb > 0).then(|| both as f64 / nb as f64)
}

/// Level 3: walking `kept` in order of decreasing |s|, drop a feature when it
/// implies, or is implied by, an already accepted one with confidence >= `min_conf`.
pub fn prune_cooccurrence(d: &Dataset, kept: &[usize], s: &[f64], min_conf: f64) -> Vec<usize> {
    let abs: Vec<f64> = s.iter().map(|v| v.abs()).collect();
    let mut accepted: Vec<usize> = Vec::new();
    for j in super::rank_by(kept, &abs) {
        let redundant = accepted.iter().any(|&a| {
            confidence(d, a, j).is_some_and(|c| c >= min_conf) || confidence(d, j, a).is_some_and(|c| c >= min_conf)
        });
        if !redundant {
            accepted.push(j);
        }
    }
    accepted.sort_unstable();
    accepted
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigPidOutcome {
    pub selected: Vec<usize>,
    pub trace: SaturationTrace,
    pub after_level1: usize,
    pub after_level2: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SigPidParams {
    pub step_fraction: f64,
    pub min_gain: f64,
    pub patience: usize,
    pub min_support: f64,
    pub min_confidence: f64,
}

impl Default for SigPidParams {
    fn default() -> Self {
        Self {
            step_fraction: 0.05,
            min_gain: 0.005,
            patience: 3,
            min_support: 0.001,
            min_confidence: 0.95,
        }
    }
}

pub fn select_sigpid(d: &Dataset, params: &SigPidParams, seed: u64) -> Result<SigPidOutcome, MethodError> {
    let candidates = gate_columns(d, FeatureKind::Permission, "sigpid").ok_or(MethodError::NoPermissionFeatures)?;
    let s = rate_difference(d);
    let abs: Vec<f64> = s.iter().map(|v| v.abs()).collect();
    let order = super::rank_by(&candidates, &abs);

    // Level 1: grow by |s| until F1 stops improving.
    let wrapper = Wrapper::new(d, ModelKind::Knn, seed);
    let mut trace = SaturationTrace::default();
    let mut kept_size = 0;
    let mut prev = 0.0;
    let mut flat = 0;
    for size in prefix_sizes(order.len(), step_size(order.len(), params.step_fraction)) {
        let f1 = wrapper.f1(&order[..size])?;
        trace.push(size, f1);
        if f1 - prev >= params.min_gain || kept_size == 0 {
            kept_size = size;
            flat = 0;
        } else {
            flat += 1;
            if flat >= params.patience {
                break;
            }
        }
        prev = f1;
    }
    let level1: Vec<usize> = order[..kept_size].to_vec();

    let mut level2 = prune_support(d, &level1, params.min_support);
    if level2.is_empty() {
        log::warn!("sigpid: support pruning removed every feature; keeping the top-ranked one");
        level2.push(level1[0]);
    }
    let selected = prune_cooccurrence(d, &level2, &s, params.min_confidence);
    Ok(SigPidOutcome {
        selected,
        trace,
        after_level1: level1.len(),
        after_level2: level2.len(),
    })
}

pub struct SigPid;

impl Selector for SigPid {
    fn id(&self) -> &str {
        "sigpid"
    }
    fn kind(&self) -> SelectorKind {
        SelectorKind::Subset
    }
    fn description(&self) -> &str {
        "Permission pruning in three levels over Permission columns (all columns, with a warning, \
         when kinds are unknown). L1 ranks by malware-minus-benign presence rate and grows the set \
         in steps of 5% while 3-fold KNN F1 gains >= 0.005 (stops after 3 flat steps). L2 drops \
         features present in < 0.1% of rows. L3 drops the lower-ranked member of any pair with \
         co-occurrence confidence >= 0.95. Stand-in: the original mines permission-ranking, \
         support and association rules with its own classifiers and thresholds; these fixed \
         thresholds and the KNN wrapper are local choices. Args: step_fraction, min_gain, \
         patience, min_support, min_confidence."
    }
    fn run(&self, d: &Dataset, p: &SelectorParams) -> Result<Selection, MethodError> {
        let def = SigPidParams::default();
        let params = SigPidParams {
            step_fraction: fraction_param(p, "step_fraction", def.step_fraction)?,
            min_gain: p.f64_or("min_gain", def.min_gain)?,
            patience: p.usize_or("patience", def.patience)?.max(1),
            min_support: p.f64_or("min_support", def.min_support)?,
            min_confidence: fraction_param(p, "min_confidence", def.min_confidence)?,
        };
        let out = select_sigpid(d, &params, p.seed)?;
        Ok(Selection::subset(out.selected)
            .param("after_level1", out.after_level1)
            .param("after_level2", out.after_level2)
            .param("trace_steps", out.trace.steps.len()))
    }
}
