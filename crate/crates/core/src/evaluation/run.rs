use std::collections::BTreeMap;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::{self, Dataset, PreprocessReport};
use crate::evaluation::{evaluate_split, stratified_kfold, EvalError, EvalRecord, FoldPlan};
use crate::rng;
use crate::selection::{apply_selection, Registry, SelectionResult};

/// A task that did not produce records.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskFailure {
    pub dataset: String,
    pub method: Option<String>,
    pub model: Option<String>,
    pub fold: Option<usize>,
    pub stage: String,
    pub error: String,
}

/// Wall-clock time of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTiming {
    pub dataset: String,
    pub method: String,
    pub model: Option<String>,
    pub fold: Option<usize>,
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    /// Sorted by (dataset, method, model, fold).
    pub records: Vec<EvalRecord>,
    pub failures: Vec<TaskFailure>,
    pub timings: Vec<TaskTiming>,
    pub preprocessing: BTreeMap<String, PreprocessReport>,
}

impl RunOutcome {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

fn failure(dataset: &str, method: Option<&str>, model: Option<&str>, fold: Option<usize>, stage: &str, error: impl ToString) -> TaskFailure {
    TaskFailure {
        dataset: dataset.into(),
        method: method.map(Into::into),
        model: model.map(Into::into),
        fold,
        stage: stage.into(),
        error: error.to_string(),
    }
}

/// Loads every dataset in `cfg` and evaluates the grid.
pub fn evaluate_run(cfg: &RunConfig, registry: &Registry) -> Result<RunOutcome, EvalError> {
    cfg.validate().map_err(EvalError::InvalidConfig)?;
    let mut datasets = Vec::new();
    let mut failures = Vec::new();
    for src in &cfg.datasets {
        match data::load_csv_with(&src.path, &src.load_options()) {
            Ok(d) => datasets.push(d),
            Err(e) => {
                let name = src.path.display().to_string();
                warn!("{name}: load failed: {e}");
                failures.push(failure(&name, None, None, None, "load", e));
            }
        }
    }
    let mut outcome = evaluate_datasets(datasets, cfg, registry)?;
    outcome.failures.extend(failures);
    outcome.failures.sort();
    Ok(outcome)
}

struct Prepared {
    dataset: Dataset,
    plan: FoldPlan,
}

/// Evaluates already-loaded datasets.
///
/// Default mode selects once per (dataset, method) on the full preprocessed
/// dataset, then cross-validates every model on the reduced dataset. With
/// `no_leakage` the selector runs again inside every training fold.
pub fn evaluate_datasets(
    datasets: Vec<Dataset>,
    cfg: &RunConfig,
    registry: &Registry,
) -> Result<RunOutcome, EvalError> {
    cfg.validate_grid().map_err(EvalError::InvalidConfig)?;
    let mut names: Vec<&str> = datasets.iter().map(Dataset::name).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(EvalError::InvalidConfig("dataset names must be unique".into()));
    }
    for m in &cfg.methods {
        if !registry.contains(m) {
            return Err(EvalError::InvalidConfig(format!("unknown method `{m}`")));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| EvalError::InvalidConfig(e.to_string()))?;
    Ok(pool.install(|| run_grid(datasets, cfg, registry)))
}

fn run_grid(datasets: Vec<Dataset>, cfg: &RunConfig, registry: &Registry) -> RunOutcome {
    let mut outcome = RunOutcome::default();
    let balance_seed = cfg.balance.then_some(cfg.seed);

    let mut prepared = Vec::new();
    for d in datasets {
        let name = d.name().to_string();
        let step = data::preprocess(&d, balance_seed)
            .map_err(|e| e.to_string())
            .and_then(|(clean, report)| {
                if !clean.is_binary() {
                    info!("{name}: non-binary feature values present; models use them unscaled");
                }
                // every test fold needs both classes for ROC AUC
                for (class, count) in [(1, clean.n_malware()), (0, clean.n_benign())] {
                    if count < cfg.k_folds {
                        return Err(EvalError::ClassSmallerThanK { class, count, k: cfg.k_folds }.to_string());
                    }
                }
                let plan = stratified_kfold(clean.labels(), cfg.k_folds, cfg.seed).map_err(|e| e.to_string())?;
                Ok((clean, report, plan))
            });
        match step {
            Ok((dataset, report, plan)) => {
                outcome.preprocessing.insert(name, report);
                prepared.push(Prepared { dataset, plan });
            }
            Err(e) => {
                warn!("{name}: preprocessing failed: {e}");
                outcome.failures.push(failure(&name, None, None, None, "preprocess", e));
            }
        }
    }

    let selection_folds: Vec<Option<usize>> = if cfg.no_leakage {
        (0..cfg.k_folds).map(Some).collect()
    } else {
        vec![None]
    };

    // stage 2: selection tasks
    let sel_tasks: Vec<(usize, &str, Option<usize>)> = prepared
        .iter()
        .enumerate()
        .flat_map(|(di, _)| {
            let folds = &selection_folds;
            cfg.methods
                .iter()
                .flat_map(move |m| folds.iter().map(move |&f| (di, m.as_str(), f)))
        })
        .collect();
    let selections: Vec<((usize, &str, Option<usize>), Result<SelectionResult, String>, f64)> = sel_tasks
        .into_par_iter()
        .map(|(di, method, fold)| {
            let p = &prepared[di];
            let input = match fold {
                Some(f) => p.dataset.select_rows(&p.plan.train_indices(f)),
                None => p.dataset.clone(),
            };
            let start = Instant::now();
            let res = registry
                .select(method, &input, &cfg.selector_params(method))
                .map_err(|e| e.to_string());
            ((di, method, fold), res, start.elapsed().as_secs_f64())
        })
        .collect();

    let mut chosen: BTreeMap<(usize, &str, Option<usize>), SelectionResult> = BTreeMap::new();
    for ((di, method, fold), res, secs) in selections {
        let name = prepared[di].dataset.name();
        outcome.timings.push(TaskTiming {
            dataset: name.into(),
            method: method.into(),
            model: None,
            fold,
            stage: "selection".into(),
            seconds: secs,
        });
        match res {
            Ok(r) => {
                info!("{name}/{method}: {} features selected in {secs:.3}s", r.selected.len());
                chosen.insert((di, method, fold), r);
            }
            Err(e) => {
                warn!("{name}/{method}: selection failed: {e}");
                outcome
                    .failures
                    .push(failure(name, Some(method), None, fold, "selection", e));
            }
        }
    }

    // stage 3: training tasks
    let mut train_tasks = Vec::new();
    for (di, p) in prepared.iter().enumerate() {
        for method in &cfg.methods {
            for model in &cfg.models {
                for fold in 0..p.plan.k {
                    let key = (di, method.as_str(), cfg.no_leakage.then_some(fold));
                    if chosen.contains_key(&key) {
                        train_tasks.push((key, model.as_str(), fold));
                    }
                }
            }
        }
    }
    let results: Vec<_> = train_tasks
        .into_par_iter()
        .map(|(key, model, fold)| {
            let p = &prepared[key.0];
            let sel = &chosen[&key];
            let start = Instant::now();
            let res = train_fold(p, sel, cfg, model, fold);
            (key, model, fold, res, start.elapsed().as_secs_f64())
        })
        .collect();

    for ((di, method, _), model, fold, res, secs) in results {
        let name = prepared[di].dataset.name();
        outcome.timings.push(TaskTiming {
            dataset: name.into(),
            method: method.into(),
            model: Some(model.into()),
            fold: Some(fold),
            stage: "training".into(),
            seconds: secs,
        });
        match res {
            Ok(mut record) => {
                if cfg.record_timings {
                    record.train_seconds = secs;
                } else {
                    record.selection_seconds = 0.0;
                    record.train_seconds = 0.0;
                }
                outcome.records.push(record);
            }
            Err(e) => {
                warn!("{name}/{method}/{model}/fold {fold}: {e}");
                outcome
                    .failures
                    .push(failure(name, Some(method), Some(model), Some(fold), "training", e));
            }
        }
    }

    outcome
        .records
        .sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    outcome.failures.sort();
    outcome
}

fn train_fold(
    p: &Prepared,
    sel: &SelectionResult,
    cfg: &RunConfig,
    model: &str,
    fold: usize,
) -> Result<EvalRecord, String> {
    let reduced = apply_selection(&p.dataset, sel).map_err(|e| e.to_string())?;
    let train = reduced.select_rows(&p.plan.train_indices(fold));
    let test = reduced.select_rows(&p.plan.test_indices(fold));
    let spec = cfg
        .model_spec(model, rng::derive(cfg.seed, fold as u64))
        .map_err(|e| e.to_string())?;
    let (_, metrics) = evaluate_split(&spec, &train, &test).map_err(|e| e.to_string())?;
    Ok(EvalRecord {
        dataset: p.dataset.name().to_string(),
        method: sel.method_id.clone(),
        model: spec.kind.id().to_string(),
        fold,
        metrics,
        n_selected: sel.selected.len(),
        selection_seconds: sel.selection_seconds,
        train_seconds: 0.0,
    })
}
