//! Running a configured experiment and writing its output directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::RunConfig;
use crate::evaluation::{evaluate_run, EvalError, RunOutcome};
use crate::plugin::{discover_plugins, plugin_dir_from_env};
use crate::report::{records_to_jsonl, Mode, ReportError, MANIFEST_FILE, RECORDS_FILE};
use crate::selection::Registry;

pub const FAILURES_FILE: &str = "failures.jsonl";
pub const TIMINGS_FILE: &str = "timings.jsonl";
pub const LOG_FILE: &str = "run.log";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot write output directory {path}: {detail}")]
    UnwritableOutputDir { path: PathBuf, detail: String },
    #[error(transparent)]
    Eval(EvalError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

impl From<EvalError> for ExperimentError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::InvalidConfig(s) => ExperimentError::InvalidConfig(s),
            other => ExperimentError::Eval(other),
        }
    }
}

/// What goes into `manifest.json`. Feeding `config` back into [`run_experiment`]
/// (with `force`) reproduces `records.jsonl` byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub mode: Mode,
    pub config: RunConfig,
    /// sha256 of each dataset file, keyed by path as given.
    pub dataset_sha256: BTreeMap<String, String>,
    pub plugins: Vec<String>,
    pub n_records: usize,
    pub n_failures: usize,
}

pub fn load_manifest(dir: &Path) -> Result<RunManifest, ExperimentError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| {
        ExperimentError::InvalidConfig(format!("{}: {e}", path.display()))
    })?;
    serde_json::from_str(&text).map_err(|e| ExperimentError::InvalidConfig(format!("{}: {e}", path.display())))
}

fn file_sha256(path: &Path) -> Option<String> {
    let bytes = fs::read(path).ok()?;
    Some(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Output of a finished run.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub outcome: RunOutcome,
    pub manifest: RunManifest,
    pub output_dir: PathBuf,
}

impl ExperimentResult {
    /// False if any task failed.
    pub fn ok(&self) -> bool {
        self.outcome.ok()
    }
}

fn prepare_dir(dir: &Path, force: bool) -> Result<(), ExperimentError> {
    let unwritable = |detail: String| ExperimentError::UnwritableOutputDir {
        path: dir.to_path_buf(),
        detail,
    };
    if dir.exists() {
        if !dir.is_dir() {
            return Err(unwritable("exists and is not a directory".into()));
        }
        let non_empty = fs::read_dir(dir)
            .map_err(|e| unwritable(e.to_string()))?
            .next()
            .is_some();
        if non_empty && !force {
            return Err(unwritable("already exists and is not empty; pass --force to overwrite".into()));
        }
    }
    fs::create_dir_all(dir).map_err(|e| unwritable(e.to_string()))?;
    // probe before the (possibly long) run starts
    let probe = dir.join(".fsbench-write-probe");
    fs::write(&probe, b"").map_err(|e| unwritable(e.to_string()))?;
    let _ = fs::remove_file(probe);
    Ok(())
}

fn jsonl<T: Serialize>(items: &[T]) -> Result<String, ReportError> {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it)?);
        out.push('\n');
    }
    Ok(out)
}

fn run_log(outcome: &RunOutcome, manifest: &RunManifest) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "fsbench {} seed={} mode={}", manifest.version, manifest.seed, manifest.mode);
    for (name, r) in &outcome.preprocessing {
        let _ = writeln!(
            s,
            "preprocess {name}: rows {} -> drop_nan {} -> dedup {}{}",
            r.rows_in,
            r.after_drop_nan,
            r.after_dedup,
            r.after_balance.map(|n| format!(" -> balance {n}")).unwrap_or_default()
        );
    }
    for t in &outcome.timings {
        let _ = writeln!(
            s,
            "time {} {} {} {} {}: {:.3}s",
            t.stage,
            t.dataset,
            t.method,
            t.model.as_deref().unwrap_or("-"),
            t.fold.map(|f| f.to_string()).unwrap_or_else(|| "-".into()),
            t.seconds
        );
    }
    for f in &outcome.failures {
        let _ = writeln!(
            s,
            "WARN failed {} {} {} {} {}: {}",
            f.stage,
            f.dataset,
            f.method.as_deref().unwrap_or("-"),
            f.model.as_deref().unwrap_or("-"),
            f.fold.map(|f| f.to_string()).unwrap_or_else(|| "-".into()),
            f.error
        );
    }
    let _ = writeln!(
        s,
        "done: {} records, {} failures",
        outcome.records.len(),
        outcome.failures.len()
    );
    s
}

/// Validates `cfg`, evaluates the grid on `cfg.threads` workers and writes
/// `records.jsonl`, `manifest.json`, `failures.jsonl`, `timings.jsonl` and
/// `run.log` into `cfg.output_dir`. Per-task failures do not abort the run;
/// check [`ExperimentResult::ok`].
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentResult, ExperimentError> {
    cfg.validate().map_err(ExperimentError::InvalidConfig)?;
    let mut cfg = cfg.clone();
    // pin the plugin root so the manifest does not depend on the environment
    if cfg.plugin_dir.is_none() {
        cfg.plugin_dir = plugin_dir_from_env();
    }
    let plugins = match &cfg.plugin_dir {
        Some(dir) if dir.is_dir() => discover_plugins(dir),
        Some(dir) => {
            return Err(ExperimentError::InvalidConfig(format!(
                "plugin directory {} does not exist",
                dir.display()
            )))
        }
        None => Vec::new(),
    };
    let plugin_ids: Vec<String> = plugins.iter().map(|p| p.id.clone()).collect();
    let registry = Registry::builtin()
        .with_plugins_timeout(plugins, Duration::from_secs(cfg.plugin_timeout_secs));

    let unknown: Vec<&str> = cfg
        .methods
        .iter()
        .filter(|m| !registry.contains(m))
        .map(String::as_str)
        .collect();
    if !unknown.is_empty() {
        return Err(ExperimentError::InvalidConfig(format!(
            "unknown method(s): {}",
            unknown.join(", ")
        )));
    }

    let dir = cfg.output_dir.clone();
    prepare_dir(&dir, cfg.force)?;

    let outcome = evaluate_run(&cfg, &registry)?;

    let manifest = RunManifest {
        tool: "fsbench".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        mode: Mode::from_balance(cfg.balance),
        dataset_sha256: cfg
            .datasets
            .iter()
            .filter_map(|s| Some((s.path.display().to_string(), file_sha256(&s.path)?)))
            .collect(),
        plugins: plugin_ids,
        n_records: outcome.records.len(),
        n_failures: outcome.failures.len(),
        config: cfg,
    };

    let write = |name: &str, contents: String| {
        fs::write(dir.join(name), contents).map_err(|e| ExperimentError::UnwritableOutputDir {
            path: dir.join(name),
            detail: e.to_string(),
        })
    };
    write(RECORDS_FILE, records_to_jsonl(&outcome.records)?)?;
    write(MANIFEST_FILE, serde_json::to_string_pretty(&manifest).map_err(ReportError::from)? + "\n")?;
    write(FAILURES_FILE, jsonl(&outcome.failures)?)?;
    write(TIMINGS_FILE, jsonl(&outcome.timings)?)?;
    write(LOG_FILE, run_log(&outcome, &manifest))?;

    Ok(ExperimentResult {
        outcome,
        manifest,
        output_dir: dir,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DatasetSource;
    use crate::data::write_csv_file;
    use crate::synthetic::{planted, PlantedSpec};

    fn config(tmp: &Path, out: &str) -> RunConfig {
        let csv = tmp.join("p.csv");
        if !csv.exists() {
            let d = planted(&PlantedSpec::new(60, 2, 4), 1).dataset.with_name("p");
            write_csv_file(&d, &csv, "class").unwrap();
        }
        RunConfig {
            datasets: vec![DatasetSource::new(csv)],
            methods: vec!["chi_square".into()],
            models: vec!["knn".into()],
            k_folds: 3,
            output_dir: tmp.join(out),
            ..RunConfig::default()
        }
    }

    #[test]
    fn writes_store_and_refuses_rerun() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = config(tmp.path(), "out");
        let res = run_experiment(&cfg).unwrap();
        assert!(res.ok());
        assert_eq!(res.outcome.records.len(), 3);
        for f in [RECORDS_FILE, MANIFEST_FILE, FAILURES_FILE, TIMINGS_FILE, LOG_FILE] {
            assert!(cfg.output_dir.join(f).is_file(), "{f}");
        }
        assert!(matches!(
            run_experiment(&cfg),
            Err(ExperimentError::UnwritableOutputDir { .. })
        ));
        let mut forced = cfg.clone();
        forced.force = true;
        assert!(run_experiment(&forced).is_ok());
    }

    #[test]
    fn manifest_reproduces_store() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = config(tmp.path(), "a");
        run_experiment(&cfg).unwrap();
        let mut again = load_manifest(&cfg.output_dir).unwrap().config;
        again.output_dir = tmp.path().join("b");
        run_experiment(&again).unwrap();
        let a = fs::read(tmp.path().join("a").join(RECORDS_FILE)).unwrap();
        let b = fs::read(tmp.path().join("b").join(RECORDS_FILE)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_method_is_invalid_config() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = config(tmp.path(), "x");
        cfg.methods = vec!["nope".into()];
        assert!(matches!(run_experiment(&cfg), Err(ExperimentError::InvalidConfig(_))));
        assert!(!cfg.output_dir.exists());
    }
}
