//! Stratified cross-validation, metrics, and the experiment run loop.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::models::{self, ModelError, ModelSpec};

pub mod aggregate;
pub mod folds;
pub mod metrics;
pub mod run;

pub use aggregate::{aggregate, mean_metrics, round2, AggregateRow, GroupKey};
pub use folds::{stratified_kfold, FoldPlan};
pub use metrics::{
    confusion, metric_set, metrics_from_confusion, roc_auc, ConfusionMatrix, ConfusionMetrics, MetricSet,
};
pub use run::{evaluate_datasets, evaluate_run, RunOutcome, TaskFailure, TaskTiming};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("K = {0} is invalid; need K >= 2")]
    InvalidK(usize),
    #[error("class {class} has {count} rows, fewer than K = {k}")]
    ClassSmallerThanK { class: u8, count: usize, k: usize },
    #[error("only one class present")]
    SingleClass,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
}

/// One (dataset, method, model, fold) measurement. Field names are the
/// results-store schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub dataset: String,
    pub method: String,
    pub model: String,
    pub fold: usize,
    pub metrics: MetricSet,
    pub n_selected: usize,
    pub selection_seconds: f64,
    pub train_seconds: f64,
}

impl EvalRecord {
    pub fn sort_key(&self) -> (&str, &str, &str, usize) {
        (&self.dataset, &self.method, &self.model, self.fold)
    }
}

/// Fits on `train`, evaluates on `test`.
pub fn evaluate_split(
    spec: &ModelSpec,
    train: &Dataset,
    test: &Dataset,
) -> Result<(ConfusionMatrix, MetricSet), EvalError> {
    let model = models::fit(spec, train)?;
    let scores = model.score(test)?;
    let preds: Vec<u8> = scores.iter().map(|&s| u8::from(s >= model.threshold())).collect();
    metric_set(test.labels(), &preds, &scores)
}

/// Stratified K-fold F1 per fold. Folds are capped at the smaller class
/// size so tiny inner-loop datasets still work.
pub fn cross_val_f1(d: &Dataset, spec: &ModelSpec, k: usize, seed: u64) -> Result<Vec<f64>, EvalError> {
    let smallest = d.n_malware().min(d.n_benign());
    if smallest < 2 {
        return Err(EvalError::ClassSmallerThanK {
            class: u8::from(d.n_malware() < d.n_benign()),
            count: smallest,
            k: 2,
        });
    }
    let k = k.min(smallest);
    let plan = stratified_kfold(d.labels(), k, seed)?;
    (0..k)
        .map(|f| {
            let train = d.select_rows(&plan.train_indices(f));
            let test = d.select_rows(&plan.test_indices(f));
            let model = models::fit(spec, &train)?;
            let preds = model.predict(&test)?;
            let cm = confusion(test.labels(), &preds)?;
            Ok(metrics_from_confusion(&cm).f1)
        })
        .collect()
}

pub fn mean_cv_f1(d: &Dataset, spec: &ModelSpec, k: usize, seed: u64) -> Result<f64, EvalError> {
    let f1 = cross_val_f1(d, spec, k, seed)?;
    Ok(f1.iter().sum::<f64>() / f1.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;
    use crate::synthetic::{planted, PlantedSpec};

    #[test]
    fn cv_on_planted_signal_is_high() {
        let p = planted(&PlantedSpec::new(300, 3, 3), 4);
        let f1 = mean_cv_f1(&p.dataset, &ModelSpec::new(ModelKind::Knn, 0), 3, 1).unwrap();
        assert!(f1 > 0.85, "{f1}");
    }

    #[test]
    fn cv_caps_folds_at_class_size() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![f64::from(u8::from(i < 2))]).collect();
        let labels = (0..8).map(|i| u8::from(i < 2)).collect();
        let d = Dataset::new("t", rows, vec!["a".into()], labels).unwrap();
        let f1 = cross_val_f1(&d, &ModelSpec::new(ModelKind::Knn, 0).set("k", 1).unwrap(), 5, 0).unwrap();
        assert_eq!(f1.len(), 2);
    }
}
