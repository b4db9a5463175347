//! Experiment configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::LoadOptions;
use crate::models::{ModelError, ModelKind, ModelSpec};
use crate::selection::SelectorParams;

/// A dataset file and how to read it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSource {
    pub path: PathBuf,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    #[serde(default)]
    pub textual_labels: bool,
}

fn default_label_column() -> String {
    "class".into()
}

impl DatasetSource {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            label_column: default_label_column(),
            textual_labels: false,
        }
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            label_column: self.label_column.clone(),
            textual_labels: self.textual_labels,
            read_kinds_sidecar: true,
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub datasets: Vec<DatasetSource>,
    pub methods: Vec<String>,
    pub models: Vec<String>,
    pub k_folds: usize,
    pub balance: bool,
    pub seed: u64,
    pub threads: usize,
    pub no_leakage: bool,
    pub output_dir: PathBuf,
    pub force: bool,
    /// Write wall-clock timings into the record store. Off by default so the
    /// store is byte-reproducible; timings always go to `timings.jsonl`.
    pub record_timings: bool,
    /// `method id -> key -> value`; keys `k`, `alpha`, `lambda` fill the
    /// common selector fields, anything else is method-specific.
    pub method_args: BTreeMap<String, BTreeMap<String, String>>,
    pub model_args: BTreeMap<String, BTreeMap<String, String>>,
    pub plugin_dir: Option<PathBuf>,
    pub plugin_timeout_secs: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            methods: Vec::new(),
            models: vec!["knn".into(), "rf".into(), "svm-linear".into()],
            k_folds: 5,
            balance: false,
            seed: 42,
            threads: 1,
            no_leakage: false,
            output_dir: PathBuf::from("fsbench-out"),
            force: false,
            record_timings: false,
            method_args: BTreeMap::new(),
            model_args: BTreeMap::new(),
            plugin_dir: None,
            plugin_timeout_secs: 3600,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.datasets.is_empty() {
            return Err("no datasets given".into());
        }
        self.validate_grid()
    }

    /// Everything in [`RunConfig::validate`] except the dataset list, for
    /// callers that supply already-loaded datasets.
    pub fn validate_grid(&self) -> Result<(), String> {
        if self.k_folds < 2 {
            return Err(format!("K must be >= 2, got {}", self.k_folds));
        }
        if self.threads < 1 {
            return Err("threads must be >= 1".into());
        }
        if self.methods.is_empty() {
            return Err("no methods given".into());
        }
        if self.models.is_empty() {
            return Err("no models given".into());
        }
        for m in &self.models {
            self.model_spec(m, 0).map_err(|e| e.to_string())?;
        }
        for (method, args) in &self.method_args {
            self.selector_params(method)
                .validate()
                .map_err(|e| format!("{method}: {e}"))?;
            for key in ["k", "alpha", "lambda"] {
                if let Some(v) = args.get(key) {
                    let ok = if key == "k" {
                        v.parse::<usize>().is_ok()
                    } else {
                        v.parse::<f64>().is_ok()
                    };
                    if !ok {
                        return Err(format!("{method}.{key}: cannot parse `{v}`"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Selector parameters for one method, seeded from the run seed.
    pub fn selector_params(&self, method: &str) -> SelectorParams {
        let mut p = SelectorParams::with_seed(self.seed);
        if let Some(args) = self.method_args.get(method) {
            for (key, value) in args {
                match key.as_str() {
                    "k" => p.k = value.parse().ok(),
                    "alpha" => p.alpha = value.parse().ok(),
                    "lambda" => p.lambda = value.parse().ok(),
                    _ => {
                        p.extra.insert(key.clone(), value.clone());
                    }
                }
            }
        }
        p
    }

    pub fn model_spec(&self, model: &str, seed: u64) -> Result<ModelSpec, ModelError> {
        let kind: ModelKind = model.parse()?;
        let args = self
            .model_args
            .get(model)
            .or_else(|| self.model_args.get(kind.id()))
            .cloned()
            .unwrap_or_default();
        ModelSpec::with_hyperparams(kind, args, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> RunConfig {
        RunConfig {
            datasets: vec![DatasetSource::new("a.csv")],
            methods: vec!["chi_square".into()],
            ..RunConfig::default()
        }
    }

    #[test]
    fn defaults_validate() {
        assert!(minimal().validate().is_ok());
        assert_eq!(minimal().k_folds, 5);
        assert_eq!(minimal().seed, 42);
    }

    #[test]
    fn invariants() {
        let mut c = minimal();
        c.k_folds = 1;
        assert!(c.validate().is_err());
        let mut c = minimal();
        c.threads = 0;
        assert!(c.validate().is_err());
        let mut c = minimal();
        c.models = vec!["gbm".into()];
        assert!(c.validate().is_err());
        let mut c = minimal();
        c.methods.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn method_args_fill_params() {
        let mut c = minimal();
        let mut args = BTreeMap::new();
        args.insert("k".to_string(), "7".to_string());
        args.insert("lambda".to_string(), "0.2".to_string());
        args.insert("colony".to_string(), "10".to_string());
        c.method_args.insert("lasso".into(), args);
        let p = c.selector_params("lasso");
        assert_eq!(p.k, Some(7));
        assert_eq!(p.lambda, Some(0.2));
        assert_eq!(p.extra.get("colony").map(String::as_str), Some("10"));
        assert!(c.validate().is_ok());
        c.method_args.get_mut("lasso").unwrap().insert("alpha".into(), "2".into());
        assert!(c.validate().is_err());
    }

    #[test]
    fn serde_round_trip() {
        let c = minimal();
        let text = serde_json::to_string(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }
}
