use crate::data::Dataset;
use crate::models::{LinearSvm, SvmParams};
use crate::selection::{FeatureScore, MethodError, Selection, Selector, SelectorKind, SelectorParams};

/// Recursive feature elimination with the linear SVM.
///
/// Each round refits on the surviving columns and drops the `step` with the
/// smallest |weight| (ties: the higher index goes first). A feature's score
/// is the round it was eliminated in; the last survivor gets the highest.
pub fn score_rfe(d: &Dataset, step: usize, svm: &SvmParams, seed: u64) -> Result<FeatureScore, MethodError> {
    if !d.has_both_classes() {
        return Err(MethodError::ConstantLabels);
    }
    let step = step.max(1);
    let mut remaining: Vec<usize> = (0..d.n_cols()).collect();
    let mut scores = vec![0.0; d.n_cols()];
    let mut round = 1.0;
    while remaining.len() > 1 {
        let model = LinearSvm::fit(&d.select_columns(&remaining), svm, seed);
        let mut order: Vec<(f64, usize)> = model
            .weights()
            .iter()
            .zip(&remaining)
            .map(|(w, &j)| (w.abs(), j))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
        let n_drop = step.min(remaining.len() - 1);
        for &(_, j) in &order[..n_drop] {
            scores[j] = round;
        }
        let dropped: Vec<usize> = order[..n_drop].iter().map(|&(_, j)| j).collect();
        remaining.retain(|j| !dropped.contains(j));
        round += 1.0;
    }
    scores[remaining[0]] = round;
    Ok(FeatureScore::from_scores(scores))
}

pub struct Rfe;

impl Selector for Rfe {
    fn id(&self) -> &str {
        "rfe"
    }
    fn kind(&self) -> SelectorKind {
        SelectorKind::Ordering
    }
    fn description(&self) -> &str {
        "Recursive feature elimination driven by the linear SVM (svm-linear, C=1): each round drops \
         the `step` (default 1) features with the smallest |weight|. Score = elimination round, so \
         the ranking is a full permutation. Keeps the top k (default: half)."
    }
    fn run(&self, d: &Dataset, p: &SelectorParams) -> Result<Selection, MethodError> {
        let step = p.usize_or("step", 1)?;
        let svm = SvmParams {
            epochs: p.usize_or("epochs", SvmParams::default().epochs)?,
            ..SvmParams::default()
        };
        Ok(Selection::ranked(score_rfe(d, step, &svm, p.seed)?).param("step", step))
    }
}
