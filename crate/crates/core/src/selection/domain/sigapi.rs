use crate::data::{Dataset, FeatureKind};
use crate::models::ModelKind;
use crate::selection::stats::info_gain_scores;
use crate::selection::{FeatureScore, MethodError, Selection, Selector, SelectorKind, SelectorParams};

use super::{fraction_param, gate_columns, prefix_sizes, rank_by, step_size, SaturationTrace, Wrapper};

#[derive(Debug, Clone, PartialEq)]
pub struct SigApiOutcome {
    pub selected: Vec<usize>,
    pub trace: SaturationTrace,
}

/// Smallest traced size whose metric reaches `tolerance` times the best.
pub fn earliest_near_best(trace: &SaturationTrace, tolerance: f64) -> usize {
    let target = tolerance * trace.best();
    trace
        .steps
        .iter()
        .find(|s| s.1 >= target)
        .map_or(0, |s| s.0)
}

pub fn select_sigapi(d: &Dataset, step_fraction: f64, tolerance: f64, seed: u64) -> Result<SigApiOutcome, MethodError> {
    let candidates = gate_columns(d, FeatureKind::ApiCall, "sigapi").unwrap_or_else(|| {
        log::warn!("sigapi: dataset `{}` has feature kinds but no API-call columns; using all columns", d.name());
        (0..d.n_cols()).collect()
    });
    let ig = info_gain_scores(d);
    let order = rank_by(&candidates, &ig);
    let wrapper = Wrapper::new(d, ModelKind::Knn, seed);
    let mut trace = SaturationTrace::default();
    for size in prefix_sizes(order.len(), step_size(order.len(), step_fraction)) {
        trace.push(size, wrapper.f1(&order[..size])?);
    }
    let size = earliest_near_best(&trace, tolerance);
    let mut selected = order[..size].to_vec();
    selected.sort_unstable();
    Ok(SigApiOutcome { selected, trace })
}

pub struct SigApi;

impl Selector for SigApi {
    fn id(&self) -> &str {
        "sigapi"
    }
    fn kind(&self) -> SelectorKind {
        SelectorKind::Subset
    }
    fn description(&self) -> &str {
        "API-call selection over ApiCall columns (all columns, with a warning, when kinds are \
         unknown or absent). Ranks by information gain, grows the prefix in steps of 5% recording \
         3-fold KNN F1, and returns the smallest prefix reaching 0.995 x the best F1 seen. \
         Stand-in: the original combines several ranking filters and its own classifiers; the \
         single ranking, the KNN wrapper and the saturation tolerance are local choices. Args: \
         step_fraction, tolerance."
    }
    fn run(&self, d: &Dataset, p: &SelectorParams) -> Result<Selection, MethodError> {
        let step = fraction_param(p, "step_fraction", 0.05)?;
        let tol = fraction_param(p, "tolerance", 0.995)?;
        let out = select_sigapi(d, step, tol, p.seed)?;
        Ok(Selection::subset(out.selected)
            .with_ranking(FeatureScore::from_scores(info_gain_scores(d)))
            .param("trace_steps", out.trace.steps.len()))
    }
}
