use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::evaluation::{EvalRecord, MetricSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupKey {
    Dataset,
    Method,
    Model,
    Fold,
}

impl GroupKey {
    fn of(self, r: &EvalRecord) -> String {
        match self {
            GroupKey::Dataset => r.dataset.clone(),
            GroupKey::Method => r.method.clone(),
            GroupKey::Model => r.model.clone(),
            GroupKey::Fold => r.fold.to_string(),
        }
    }
}

/// Mean metrics of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub key: Vec<String>,
    pub metrics: MetricSet,
    pub n_records: usize,
    pub mean_n_selected: f64,
}

pub fn mean_metrics<'a>(sets: impl IntoIterator<Item = &'a MetricSet>) -> Option<MetricSet> {
    let mut acc = [0.0f64; 6];
    let mut n = 0usize;
    for m in sets {
        for (a, v) in acc
            .iter_mut()
            .zip([m.accuracy, m.precision, m.recall, m.f1, m.roc_auc, m.mcc])
        {
            *a += v;
        }
        n += 1;
    }
    if n == 0 {
        return None;
    }
    let k = n as f64;
    Some(MetricSet {
        accuracy: acc[0] / k,
        precision: acc[1] / k,
        recall: acc[2] / k,
        f1: acc[3] / k,
        roc_auc: acc[4] / k,
        mcc: acc[5] / k,
    })
}

/// Groups records by the given keys (sorted) and averages each metric.
pub fn aggregate(records: &[EvalRecord], group_by: &[GroupKey]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<Vec<String>, Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        let key = group_by.iter().map(|g| g.of(r)).collect();
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(key, rs)| AggregateRow {
            metrics: mean_metrics(rs.iter().map(|r| &r.metrics)).expect("group is non-empty"),
            n_records: rs.len(),
            mean_n_selected: rs.iter().map(|r| r.n_selected as f64).sum::<f64>() / rs.len() as f64,
            key,
        })
        .collect()
}

/// Two-decimal display rounding.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(dataset: &str, method: &str, f1: f64) -> EvalRecord {
        EvalRecord {
            dataset: dataset.into(),
            method: method.into(),
            model: "knn".into(),
            fold: 0,
            metrics: MetricSet {
                accuracy: f1,
                precision: f1,
                recall: f1,
                f1,
                roc_auc: f1,
                mcc: f1,
            },
            n_selected: 3,
            selection_seconds: 0.0,
            train_seconds: 0.0,
        }
    }

    #[test]
    fn identical_records_average_to_themselves() {
        let rs = vec![rec("a", "m", 0.7), rec("a", "m", 0.7)];
        let rows = aggregate(&rs, &[GroupKey::Method]);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].metrics, rs[0].metrics);
        assert_eq!(rows[0].n_records, 2);
    }

    #[test]
    fn mean_lies_within_range() {
        let rs = vec![rec("a", "m", 0.2), rec("b", "m", 0.9), rec("c", "m", 0.4)];
        let row = &aggregate(&rs, &[GroupKey::Method])[0];
        assert!(row.metrics.f1 >= 0.2 && row.metrics.f1 <= 0.9);
        let by_ds = aggregate(&rs, &[GroupKey::Dataset, GroupKey::Method]);
        assert_eq!(by_ds.len(), 3);
        assert_eq!(by_ds[0].key, vec!["a".to_string(), "m".to_string()]);
    }

    #[test]
    fn rounding() {
        assert_eq!(round2(0.914), 0.91);
        assert_eq!(round2(0.915_1), 0.92);
    }
}
