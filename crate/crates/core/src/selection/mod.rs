//! Selector contract, method registry and application of a selection.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Dataset};
use crate::evaluation::EvalError;
use crate::models::ModelError;
use crate::plugin::{PluginError, PluginManifest, PluginSelector};

pub mod classical;
pub mod domain;
pub mod stats;

/// How a method decides the size of its output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectorKind {
    /// Full ranking, cut at a budget `k`.
    Ordering,
    /// The method decides its own subset size.
    Subset,
}

impl fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Per-feature relevance; higher is more relevant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub entries: Vec<(usize, f64)>,
}

impl FeatureScore {
    /// Scores indexed by feature position.
    pub fn from_scores(scores: Vec<f64>) -> Self {
        Self {
            entries: scores.into_iter().enumerate().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Score of each feature `0..n`; features absent from the ranking get `NEG_INFINITY`.
    pub fn dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![f64::NEG_INFINITY; n];
        for &(j, s) in &self.entries {
            if j < n {
                out[j] = s;
            }
        }
        out
    }

    /// All entries sorted best-first; ties go to the lower index.
    pub fn ordered(&self) -> Vec<usize> {
        let mut e = self.entries.clone();
        e.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        e.into_iter().map(|(j, _)| j).collect()
    }
}

/// Output of a selector run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method_id: String,
    pub selected: Vec<usize>,
    pub ranking: Option<FeatureScore>,
    pub params: BTreeMap<String, String>,
    pub selection_seconds: f64,
}

/// Knobs shared by every selector, plus free-form method-specific keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorParams {
    pub k: Option<usize>,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

impl Default for SelectorParams {
    fn default() -> Self {
        Self {
            k: None,
            alpha: None,
            lambda: None,
            seed: 42,
            extra: BTreeMap::new(),
        }
    }
}

impl SelectorParams {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), MethodError> {
        if self.k == Some(0) {
            return Err(MethodError::InvalidParam("k must be >= 1".into()));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(MethodError::InvalidParam(format!("alpha {a} not in (0, 1)")));
            }
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0) {
                return Err(MethodError::InvalidParam(format!("lambda {l} must be >= 0")));
            }
        }
        Ok(())
    }

    fn parse_extra<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, MethodError> {
        match self.extra.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                MethodError::InvalidParam(format!("`{key}`: cannot parse `{raw}`"))
            }),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, MethodError> {
        Ok(self.parse_extra(key)?.unwrap_or(default))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, MethodError> {
        Ok(self.parse_extra(key)?.unwrap_or(default))
    }
}

#[derive(Debug, Error)]
pub enum MethodError {
    #[error("labels are constant")]
    ConstantLabels,
    #[error("too few samples ({n})")]
    TooFewSamples { n: usize },
    #[error("no feature survives: {0}")]
    NoFeatureSurvives(String),
    #[error("total variance is zero")]
    ZeroTotalVariance,
    #[error("search budget too small: {0}")]
    BudgetTooSmall(String),
    #[error("dataset has feature kinds but no permission features")]
    NoPermissionFeatures,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Plugin(#[from] PluginError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("method `{method}` failed: {source}")]
    SelectorFailure {
        method: String,
        #[source]
        source: MethodError,
    },
    #[error("feature index {index} out of range for {n_cols} columns")]
    IndexOutOfRange { index: usize, n_cols: usize },
    #[error("k = {k} exceeds the {n} ranked features")]
    KTooLarge { k: usize, n: usize },
    #[error("selection is empty")]
    EmptySelection,
    #[error("selection repeats feature {0}")]
    DuplicateIndex(usize),
}

/// What a selector hands back before the registry stamps id and timing.
#[derive(Debug, Clone, Default)]
pub struct Selection {
    pub selected: Vec<usize>,
    pub ranking: Option<FeatureScore>,
    pub params: BTreeMap<String, String>,
}

impl Selection {
    pub fn subset(selected: Vec<usize>) -> Self {
        Self {
            selected,
            ..Self::default()
        }
    }

    pub fn ranked(ranking: FeatureScore) -> Self {
        Self {
            ranking: Some(ranking),
            ..Self::default()
        }
    }

    pub fn with_ranking(mut self, ranking: FeatureScore) -> Self {
        self.ranking = Some(ranking);
        self
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.into(), value.to_string());
        self
    }
}

/// A feature-selection method.
///
/// `Ordering` selectors must return a ranking; the registry cuts it at `k`.
/// `Subset` selectors return their own `selected` set.
pub trait Selector: Send + Sync {
    fn id(&self) -> &str;
    fn kind(&self) -> SelectorKind;
    fn description(&self) -> &str;
    fn run(&self, d: &Dataset, p: &SelectorParams) -> Result<Selection, MethodError>;
}

/// Indices of the `k` highest scores; ties go to the lower feature index.
pub fn top_k(ranking: &FeatureScore, k: usize) -> Result<Vec<usize>, SelectionError> {
    if k > ranking.len() {
        return Err(SelectionError::KTooLarge { k, n: ranking.len() });
    }
    let mut order = ranking.ordered();
    order.truncate(k);
    Ok(order)
}

/// Restricts `d` to the selected columns, in selection order.
pub fn apply_selection(d: &Dataset, r: &SelectionResult) -> Result<Dataset, SelectionError> {
    check_indices(&r.selected, d.n_cols())?;
    Ok(d.select_columns(&r.selected))
}

fn check_indices(selected: &[usize], n_cols: usize) -> Result<(), SelectionError> {
    if selected.is_empty() {
        return Err(SelectionError::EmptySelection);
    }
    let mut seen = vec![false; n_cols];
    for &j in selected {
        if j >= n_cols {
            return Err(SelectionError::IndexOutOfRange { index: j, n_cols });
        }
        if seen[j] {
            return Err(SelectionError::DuplicateIndex(j));
        }
        seen[j] = true;
    }
    Ok(())
}

/// Default budget for ordering methods: half the columns, rounded up.
pub fn default_k(n_cols: usize) -> usize {
    n_cols.div_ceil(2)
}

/// One row of [`Registry::list_methods`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodInfo {
    pub id: String,
    pub kind: SelectorKind,
    pub description: String,
}

/// Id of the no-op baseline that keeps every column.
pub const ALL_FEATURES: &str = "all_features";

struct AllFeatures;

impl Selector for AllFeatures {
    fn id(&self) -> &str {
        ALL_FEATURES
    }
    fn kind(&self) -> SelectorKind {
        SelectorKind::Subset
    }
    fn description(&self) -> &str {
        "Baseline: keeps every feature. Not a selection method; used as the reference row in reports."
    }
    fn run(&self, d: &Dataset, _: &SelectorParams) -> Result<Selection, MethodError> {
        Ok(Selection::subset((0..d.n_cols()).collect()))
    }
}

/// Built-in methods plus discovered plugins. Read-only after construction.
#[derive(Clone)]
pub struct Registry {
    methods: BTreeMap<String, Arc<dyn Selector>>,
    baseline: Arc<dyn Selector>,
}

impl Default for Registry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Registry {
    /// The 17 built-in methods.
    pub fn builtin() -> Self {
        let mut methods: BTreeMap<String, Arc<dyn Selector>> = BTreeMap::new();
        for s in classical::all().into_iter().chain(domain::all()) {
            methods.insert(s.id().to_string(), s);
        }
        Self {
            methods,
            baseline: Arc::new(AllFeatures),
        }
    }

    /// Built-ins plus the given plugins. Plugins whose id collides with an
    /// existing method are skipped with an error log.
    pub fn with_plugins(self, plugins: Vec<PluginManifest>) -> Self {
        self.with_plugins_timeout(plugins, crate::plugin::DEFAULT_TIMEOUT)
    }

    /// Like [`Registry::with_plugins`] with a per-invocation time limit.
    pub fn with_plugins_timeout(mut self, plugins: Vec<PluginManifest>, timeout: std::time::Duration) -> Self {
        for manifest in plugins {
            if self.methods.contains_key(&manifest.id) || manifest.id == ALL_FEATURES {
                log::error!("plugin `{}` collides with an existing method; skipped", manifest.id);
                continue;
            }
            self.methods
                .insert(manifest.id.clone(), Arc::new(PluginSelector::new(manifest).with_timeout(timeout)));
        }
        self
    }

    pub fn list_methods(&self) -> Vec<MethodInfo> {
        self.methods
            .values()
            .map(|s| MethodInfo {
                id: s.id().to_string(),
                kind: s.kind(),
                description: s.description().to_string(),
            })
            .collect()
    }

    pub fn contains(&self, id: &str) -> bool {
        id == ALL_FEATURES || self.methods.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<Arc<dyn Selector>> {
        if id == ALL_FEATURES {
            return Some(self.baseline.clone());
        }
        self.methods.get(id).cloned()
    }

    /// Runs a method and validates its output.
    pub fn select(
        &self,
        method_id: &str,
        d: &Dataset,
        p: &SelectorParams,
    ) -> Result<SelectionResult, SelectionError> {
        let selector = self
            .get(method_id)
            .ok_or_else(|| SelectionError::UnknownMethod(method_id.to_string()))?;
        let fail = |source: MethodError| SelectionError::SelectorFailure {
            method: method_id.to_string(),
            source,
        };
        p.validate().map_err(fail)?;
        if !d.has_both_classes() {
            return Err(fail(MethodError::ConstantLabels));
        }
        let start = Instant::now();
        let mut out = selector.run(d, p).map_err(fail)?;
        let mut params = std::mem::take(&mut out.params);
        params.insert("seed".into(), p.seed.to_string());
        let selected = match selector.kind() {
            SelectorKind::Ordering => {
                let ranking = out.ranking.as_ref().ok_or_else(|| {
                    fail(MethodError::InvalidParam(
                        "ordering method returned no ranking".into(),
                    ))
                })?;
                let mut k = p.k.unwrap_or_else(|| default_k(d.n_cols()));
                if k > ranking.len() {
                    warn!("{method_id}: k = {k} exceeds {} features, using all", ranking.len());
                    k = ranking.len();
                }
                params.insert("k".into(), k.to_string());
                top_k(ranking, k)?
            }
            SelectorKind::Subset => {
                if let Some(k) = p.k {
                    debug!("{method_id}: subset method ignores k = {k}");
                }
                out.selected
            }
        };
        check_indices(&selected, d.n_cols())?;
        Ok(SelectionResult {
            method_id: method_id.to_string(),
            selected,
            ranking: out.ranking,
            params,
            selection_seconds: start.elapsed().as_secs_f64(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy() -> Dataset {
        Dataset::new(
            "toy",
            vec![
                vec![1.0, 0.0, 1.0, 0.0],
                vec![1.0, 1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 1.0],
                vec![0.0, 1.0, 0.0, 1.0],
            ],
            vec!["f1".into(), "f2".into(), "f3".into(), "f4".into()],
            vec![1, 1, 0, 0],
        )
        .unwrap()
    }

    #[test]
    fn top_k_basic_and_ties() {
        let r = FeatureScore::from_scores(vec![0.1, 0.9, 0.5]);
        assert_eq!(top_k(&r, 2).unwrap(), vec![1, 2]);
        let tie = FeatureScore::from_scores(vec![0.5, 0.5]);
        assert_eq!(top_k(&tie, 1).unwrap(), vec![0]);
        assert!(matches!(top_k(&r, 4), Err(SelectionError::KTooLarge { .. })));
    }

    proptest! {
        #[test]
        fn top_k_nested(scores in prop::collection::vec(0u8..5, 1..30), k in 0usize..30) {
            // small integer scores force plenty of ties
            let n = scores.len();
            let r = FeatureScore::from_scores(scores.into_iter().map(f64::from).collect());
            let k = k % n;
            let a = top_k(&r, k).unwrap();
            let b = top_k(&r, k + 1).unwrap();
            prop_assert_eq!(&b[..k], &a[..]);
        }
    }

    #[test]
    fn registry_has_seventeen_sorted_unique() {
        let reg = Registry::builtin();
        let list = reg.list_methods();
        assert_eq!(list.len(), 17);
        let ids: Vec<&str> = list.iter().map(|m| m.id.as_str()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(ids, sorted);
        let subset = list.iter().filter(|m| m.kind == SelectorKind::Subset).count();
        assert_eq!(subset, 11);
    }

    #[test]
    fn select_contract_shape() {
        let reg = Registry::builtin();
        let d = toy();
        let p = SelectorParams {
            k: Some(2),
            ..SelectorParams::default()
        };
        let r = reg.select("chi_square", &d, &p).unwrap();
        assert_eq!(r.selected.len(), 2);
        assert_eq!(r.ranking.as_ref().unwrap().len(), 4);
        assert_eq!(r.method_id, "chi_square");

        let all = SelectorParams {
            k: Some(4),
            ..SelectorParams::default()
        };
        for m in reg.list_methods().iter().filter(|m| m.kind == SelectorKind::Ordering) {
            let mut got = reg.select(&m.id, &d, &all).unwrap().selected;
            got.sort();
            assert_eq!(got, vec![0, 1, 2, 3], "{}", m.id);
        }
        assert!(matches!(
            reg.select("nope", &d, &p),
            Err(SelectionError::UnknownMethod(_))
        ));
    }

    #[test]
    fn default_k_is_half() {
        let r = Registry::builtin()
            .select("mad", &toy(), &SelectorParams::default())
            .unwrap();
        assert_eq!(r.selected.len(), 2);
        assert_eq!(default_k(5), 3);
    }

    #[test]
    fn baseline_keeps_all() {
        let reg = Registry::builtin();
        assert!(reg.contains(ALL_FEATURES));
        let r = reg.select(ALL_FEATURES, &toy(), &SelectorParams::default()).unwrap();
        assert_eq!(r.selected, vec![0, 1, 2, 3]);
    }

    #[test]
    fn apply_selection_slices_columns() {
        let d = Dataset::new(
            "x",
            vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]],
            vec!["f1".into(), "f2".into(), "f3".into()],
            vec![0, 1],
        )
        .unwrap();
        let mut r = SelectionResult {
            method_id: "m".into(),
            selected: vec![0, 1, 2],
            ranking: None,
            params: BTreeMap::new(),
            selection_seconds: 0.0,
        };
        assert_eq!(apply_selection(&d, &r).unwrap(), d);
        r.selected = vec![2, 0];
        let out = apply_selection(&d, &r).unwrap();
        assert_eq!(out.feature_names(), &["f3".to_string(), "f1".to_string()]);
        assert_eq!(out.row(1), &[6.0, 4.0]);
        assert_eq!(out.labels(), d.labels());
        r.selected = vec![5];
        assert!(matches!(
            apply_selection(&d, &r),
            Err(SelectionError::IndexOutOfRange { index: 5, n_cols: 3 })
        ));
    }

    #[test]
    fn params_validation() {
        let bad = SelectorParams {
            alpha: Some(1.5),
            ..SelectorParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = SelectorParams {
            lambda: Some(-1.0),
            ..SelectorParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = SelectorParams {
            k: Some(0),
            ..SelectorParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
