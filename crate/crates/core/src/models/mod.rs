//! The three benchmark classifiers.
//!
//! | id           | model                                   | decision rule     |
//! |--------------|-----------------------------------------|-------------------|
//! | `knn`        | k-nearest neighbours, Euclidean, k = 5  | score >= 0.5      |
//! | `rf`         | random forest, 100 Gini trees           | score >= 0.5      |
//! | `svm-linear` | linear SVM, hinge loss + L2, C = 1      | score >= 0        |
//!
//! The SVM is linear rather than RBF; reports label it `svm-linear`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;

pub mod forest;
pub mod knn;
pub mod svm;
pub mod tree;

pub use forest::{ForestParams, RandomForest};
pub use knn::{Knn, KnnParams};
pub use svm::{LinearSvm, SvmParams};
pub use tree::{DecisionTree, TreeParams};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training set contains a single class")]
    SingleClassTrainingSet,
    #[error("row width {found} does not match training width {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("unknown hyperparameter `{key}` for {model}")]
    UnknownHyperparam { model: String, key: String },
    #[error("bad value `{value}` for hyperparameter `{key}`")]
    BadHyperparam { key: String, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    Knn,
    RandomForest,
    LinearSvm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Knn, ModelKind::RandomForest, ModelKind::LinearSvm];

    pub fn id(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::RandomForest => "rf",
            ModelKind::LinearSvm => "svm-linear",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ModelKind::Knn => {
                "k-nearest neighbours (k=5), Euclidean distance, score = malware fraction among \
                 neighbours, distance ties broken by lower training index."
            }
            ModelKind::RandomForest => {
                "Random forest: 100 Gini trees, ceil(sqrt(n_features)) features per node, \
                 bootstrap rows, unlimited depth, min 2 samples to split; score = fraction of \
                 trees voting malware."
            }
            ModelKind::LinearSvm => {
                "LINEAR SVM substituted for the usual RBF-kernel default: L2-regularized hinge \
                 loss (C=1) minimized by seeded epoch-shuffled subgradient descent (50 epochs); \
                 score = signed margin. Reported as `svm-linear`."
            }
        }
    }

    fn known_keys(self) -> &'static [&'static str] {
        match self {
            ModelKind::Knn => &["k"],
            ModelKind::RandomForest => &["n_trees", "max_features", "bootstrap", "min_samples_split"],
            ModelKind::LinearSvm => &["c", "epochs"],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "knn" => Ok(ModelKind::Knn),
            "rf" | "random_forest" | "randomforest" => Ok(ModelKind::RandomForest),
            "svm-linear" | "svm_linear" | "svm" => Ok(ModelKind::LinearSvm),
            _ => Err(ModelError::UnknownModel(s.to_string())),
        }
    }
}

/// Model kind plus string hyperparameters, checked at construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub hyperparams: BTreeMap<String, String>,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, seed: u64) -> Self {
        Self {
            kind,
            hyperparams: BTreeMap::new(),
            seed,
        }
    }

    pub fn with_hyperparams(
        kind: ModelKind,
        hyperparams: BTreeMap<String, String>,
        seed: u64,
    ) -> Result<Self, ModelError> {
        let spec = Self {
            kind,
            hyperparams,
            seed,
        };
        spec.check_keys()?;
        // surface bad values now rather than at fit time
        spec.knn_params()?;
        spec.forest_params()?;
        spec.svm_params()?;
        Ok(spec)
    }

    pub fn set(mut self, key: &str, value: impl ToString) -> Result<Self, ModelError> {
        self.hyperparams.insert(key.into(), value.to_string());
        Self::with_hyperparams(self.kind, self.hyperparams, self.seed)
    }

    fn check_keys(&self) -> Result<(), ModelError> {
        let known = self.kind.known_keys();
        for key in self.hyperparams.keys() {
            if !known.contains(&key.as_str()) {
                return Err(ModelError::UnknownHyperparam {
                    model: self.kind.id().into(),
                    key: key.clone(),
                });
            }
        }
        Ok(())
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, ModelError> {
        match self.hyperparams.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ModelError::BadHyperparam {
                key: key.into(),
                value: v.clone(),
            }),
        }
    }

    fn knn_params(&self) -> Result<KnnParams, ModelError> {
        let k = self.get("k", KnnParams::default().k)?;
        if k == 0 {
            return Err(ModelError::BadHyperparam {
                key: "k".into(),
                value: "0".into(),
            });
        }
        Ok(KnnParams { k })
    }

    fn forest_params(&self) -> Result<ForestParams, ModelError> {
        let d = ForestParams::default();
        let max_features = match self.hyperparams.get("max_features") {
            None => None,
            Some(v) if v == "sqrt" => None,
            Some(v) => Some(v.parse().map_err(|_| ModelError::BadHyperparam {
                key: "max_features".into(),
                value: v.clone(),
            })?),
        };
        Ok(ForestParams {
            n_trees: self.get("n_trees", d.n_trees)?.max(1),
            max_features,
            bootstrap: self.get("bootstrap", d.bootstrap)?,
            min_samples_split: self.get("min_samples_split", d.min_samples_split)?.max(2),
        })
    }

    fn svm_params(&self) -> Result<SvmParams, ModelError> {
        let d = SvmParams::default();
        let c: f64 = self.get("c", d.c)?;
        if !(c > 0.0) {
            return Err(ModelError::BadHyperparam {
                key: "c".into(),
                value: c.to_string(),
            });
        }
        Ok(SvmParams {
            c,
            epochs: self.get("epochs", d.epochs)?.max(1),
        })
    }
}

/// A fitted classifier. Immutable.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Knn(Knn),
    Forest(RandomForest),
    Svm(LinearSvm),
}

pub(crate) fn check_trainable(d: &Dataset) -> Result<(), ModelError> {
    if d.has_both_classes() {
        Ok(())
    } else {
        Err(ModelError::SingleClassTrainingSet)
    }
}

pub fn fit(spec: &ModelSpec, d: &Dataset) -> Result<TrainedModel, ModelError> {
    spec.check_keys()?;
    check_trainable(d)?;
    Ok(match spec.kind {
        ModelKind::Knn => TrainedModel::Knn(Knn::fit(d, spec.knn_params()?)),
        ModelKind::RandomForest => {
            TrainedModel::Forest(RandomForest::fit(d, &spec.forest_params()?, spec.seed))
        }
        ModelKind::LinearSvm => TrainedModel::Svm(LinearSvm::fit(d, &spec.svm_params()?, spec.seed)),
    })
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Knn(_) => ModelKind::Knn,
            TrainedModel::Forest(_) => ModelKind::RandomForest,
            TrainedModel::Svm(_) => ModelKind::LinearSvm,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TrainedModel::Knn(m) => m.n_features(),
            TrainedModel::Forest(m) => m.n_features(),
            TrainedModel::Svm(m) => m.n_features(),
        }
    }

    /// Score at or above which a row is predicted malware.
    pub fn threshold(&self) -> f64 {
        match self {
            TrainedModel::Svm(_) => 0.0,
            _ => 0.5,
        }
    }

    pub fn score_row(&self, row: &[f64]) -> Result<f64, ModelError> {
        if row.len() != self.n_features() {
            return Err(ModelError::WidthMismatch {
                expected: self.n_features(),
                found: row.len(),
            });
        }
        Ok(match self {
            TrainedModel::Knn(m) => m.score_row(row),
            TrainedModel::Forest(m) => m.score_row(row),
            TrainedModel::Svm(m) => m.score_row(row),
        })
    }

    pub fn score_rows<R: AsRef<[f64]>>(&self, rows: &[R]) -> Result<Vec<f64>, ModelError> {
        rows.iter().map(|r| self.score_row(r.as_ref())).collect()
    }

    pub fn predict_rows<R: AsRef<[f64]>>(&self, rows: &[R]) -> Result<Vec<u8>, ModelError> {
        let t = self.threshold();
        Ok(self
            .score_rows(rows)?
            .into_iter()
            .map(|s| u8::from(s >= t))
            .collect())
    }

    pub fn score(&self, d: &Dataset) -> Result<Vec<f64>, ModelError> {
        d.rows().map(|r| self.score_row(r)).collect()
    }

    pub fn predict(&self, d: &Dataset) -> Result<Vec<u8>, ModelError> {
        let t = self.threshold();
        Ok(self.score(d)?.into_iter().map(|s| u8::from(s >= t)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{planted, PlantedSpec};
    use rand::Rng;

    #[test]
    fn parse_model_ids() {
        assert_eq!("knn".parse::<ModelKind>().unwrap(), ModelKind::Knn);
        assert_eq!("svm".parse::<ModelKind>().unwrap(), ModelKind::LinearSvm);
        assert_eq!("svm-linear".parse::<ModelKind>().unwrap(), ModelKind::LinearSvm);
        assert!("xgboost".parse::<ModelKind>().is_err());
        assert!(ModelKind::LinearSvm.description().contains("LINEAR"));
    }

    #[test]
    fn unknown_hyperparam_rejected() {
        let mut hp = BTreeMap::new();
        hp.insert("depth".to_string(), "3".to_string());
        assert!(matches!(
            ModelSpec::with_hyperparams(ModelKind::Knn, hp, 0),
            Err(ModelError::UnknownHyperparam { .. })
        ));
        assert!(ModelSpec::new(ModelKind::Knn, 0).set("k", "zero").is_err());
    }

    #[test]
    fn single_class_rejected() {
        let d = Dataset::new("x", vec![vec![0.0], vec![1.0]], vec!["a".into()], vec![1, 1]).unwrap();
        for kind in ModelKind::ALL {
            assert!(matches!(
                fit(&ModelSpec::new(kind, 0), &d),
                Err(ModelError::SingleClassTrainingSet)
            ));
        }
    }

    #[test]
    fn width_mismatch_and_empty_rows() {
        let p = planted(&PlantedSpec::new(40, 2, 2), 1);
        for kind in ModelKind::ALL {
            let m = fit(&ModelSpec::new(kind, 0), &p.dataset).unwrap();
            assert!(matches!(
                m.score_row(&[1.0]),
                Err(ModelError::WidthMismatch { expected: 4, found: 1 })
            ));
            let empty: Vec<Vec<f64>> = Vec::new();
            assert!(m.predict_rows(&empty).unwrap().is_empty());
        }
    }

    #[test]
    fn threshold_consistency_on_random_rows() {
        let p = planted(&PlantedSpec::new(120, 3, 5), 2);
        let mut rng = crate::rng::stream(99, 0);
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..8).map(|_| f64::from(u8::from(rng.gen_bool(0.5)))).collect())
            .collect();
        for kind in ModelKind::ALL {
            let m = fit(&ModelSpec::new(kind, 5), &p.dataset).unwrap();
            let scores = m.score_rows(&rows).unwrap();
            let preds = m.predict_rows(&rows).unwrap();
            for (s, y) in scores.iter().zip(&preds) {
                assert_eq!(*y == 1, *s >= m.threshold(), "{kind}");
            }
        }
    }

    #[test]
    fn same_seed_same_predictions() {
        let p = planted(&PlantedSpec::new(150, 3, 5), 3);
        for kind in ModelKind::ALL {
            let a = fit(&ModelSpec::new(kind, 17), &p.dataset).unwrap();
            let b = fit(&ModelSpec::new(kind, 17), &p.dataset).unwrap();
            assert_eq!(a.score(&p.dataset).unwrap(), b.score(&p.dataset).unwrap(), "{kind}");
        }
    }
}
