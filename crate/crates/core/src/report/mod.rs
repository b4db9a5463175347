//! Summary tables, MCC heatmaps and F1 box statistics from record stores.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{mean_metrics, round2, EvalRecord, MetricSet};

pub mod svg;

pub use svg::{color_for, SvgOptions};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const POSITIVE_CLASS: &str = "malware";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("the record store holds no records{0}")]
    EmptyStore(String),
    #[error("unknown format `{0}` (expected csv, json or svg)")]
    UnknownFormat(String),
    #[error("format `{format}` is not available for the {view} view")]
    UnsupportedFormat { format: String, view: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {detail}")]
    Parse { path: PathBuf, line: usize, detail: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Whether the run balanced classes before evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Complete,
    Balanced,
}

impl Mode {
    pub fn from_balance(balance: bool) -> Self {
        if balance {
            Mode::Balanced
        } else {
            Mode::Complete
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Complete => "complete",
            Mode::Balanced => "balanced",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "complete" => Ok(Mode::Complete),
            "balanced" => Ok(Mode::Balanced),
            _ => Err(format!("unknown mode `{s}` (expected complete or balanced)")),
        }
    }
}

/// Records of one run plus the mode recorded in its manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Store {
    pub records: Vec<EvalRecord>,
    pub mode: Mode,
}

impl Store {
    pub fn new(records: Vec<EvalRecord>, mode: Mode) -> Self {
        Self { records, mode }
    }
}

/// Reads a store from a run directory or a `records.jsonl` path. The mode
/// comes from `manifest.json` beside it (complete when absent).
pub fn load_store(path: &Path) -> Result<Store, ReportError> {
    let (records_path, dir) = if path.is_dir() {
        (path.join(RECORDS_FILE), path.to_path_buf())
    } else {
        (path.to_path_buf(), path.parent().map(Path::to_path_buf).unwrap_or_default())
    };
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |source| ReportError::Io { path: p, source }
    };
    let text = fs::read_to_string(&records_path).map_err(io(&records_path))?;
    let records = parse_records(&text, &records_path)?;
    let manifest = dir.join(MANIFEST_FILE);
    let mode = if manifest.is_file() {
        let raw = fs::read_to_string(&manifest).map_err(io(&manifest))?;
        let v: serde_json::Value = serde_json::from_str(&raw)?;
        let balance = v
            .pointer("/config/balance")
            .and_then(serde_json::Value::as_bool)
            .unwrap_or(false);
        Mode::from_balance(balance)
    } else {
        log::warn!("{}: no {MANIFEST_FILE}; assuming complete mode", dir.display());
        Mode::Complete
    };
    Ok(Store { records, mode })
}

pub fn parse_records(text: &str, path: &Path) -> Result<Vec<EvalRecord>, ReportError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ReportError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                detail: e.to_string(),
            })
        })
        .collect()
}

/// One JSON object per line, in the given order.
pub fn records_to_jsonl(records: &[EvalRecord]) -> Result<String, ReportError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Fold-mean per (dataset, method, model).
fn cell_means<'a>(records: impl Iterator<Item = &'a EvalRecord>) -> BTreeMap<(String, String, String), MetricSet> {
    let mut groups: BTreeMap<(String, String, String), Vec<&MetricSet>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.dataset.clone(), r.method.clone(), r.model.clone()))
            .or_default()
            .push(&r.metrics);
    }
    groups
        .into_iter()
        .map(|(k, v)| (k, mean_metrics(v).expect("non-empty group")))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub mode: Mode,
    pub f1: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub roc_auc: f64,
    pub mcc: f64,
    pub n_datasets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub positive_class: String,
    pub rows: Vec<SummaryRow>,
}

fn records_in_mode(stores: &[Store], mode: Mode) -> Result<Vec<&EvalRecord>, ReportError> {
    let recs: Vec<&EvalRecord> = stores
        .iter()
        .filter(|s| s.mode == mode)
        .flat_map(|s| s.records.iter())
        .collect();
    if recs.is_empty() {
        return Err(ReportError::EmptyStore(format!(" in {mode} mode")));
    }
    Ok(recs)
}

/// Per-method means, rounded to 2 decimals. Folds are averaged first within
/// each (dataset, method, model), then those cells are averaged.
pub fn summarize(stores: &[Store], mode: Mode) -> Result<Summary, ReportError> {
    let recs = records_in_mode(stores, mode)?;
    let cells = cell_means(recs.iter().copied());
    let mut by_method: BTreeMap<&str, (Vec<&MetricSet>, BTreeSet<&str>)> = BTreeMap::new();
    for ((dataset, method, _), m) in &cells {
        let e = by_method.entry(method.as_str()).or_default();
        e.0.push(m);
        e.1.insert(dataset.as_str());
    }
    let rows = by_method
        .into_iter()
        .map(|(method, (sets, datasets))| {
            let m = mean_metrics(sets).expect("non-empty");
            SummaryRow {
                method: method.to_string(),
                mode,
                f1: round2(m.f1),
                recall: round2(m.recall),
                accuracy: round2(m.accuracy),
                precision: round2(m.precision),
                roc_auc: round2(m.roc_auc),
                mcc: round2(m.mcc),
                n_datasets: datasets.len(),
            }
        })
        .collect();
    Ok(Summary {
        positive_class: POSITIVE_CLASS.into(),
        rows,
    })
}

/// Mean MCC in percent (2 decimals) per dataset (rows) and method (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapData {
    pub positive_class: String,
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    /// `cells[r][c]`; `None` where the pair was not evaluated.
    pub cells: Vec<Vec<Option<f64>>>,
}

fn all_records(stores: &[Store]) -> Result<Vec<&EvalRecord>, ReportError> {
    let recs: Vec<&EvalRecord> = stores.iter().flat_map(|s| s.records.iter()).collect();
    if recs.is_empty() {
        return Err(ReportError::EmptyStore(String::new()));
    }
    Ok(recs)
}

/// Dataset labels carry a `(B)` suffix for balanced-mode stores so the two
/// modes of one dataset stay separate rows.
fn dataset_label(name: &str, mode: Mode) -> String {
    match mode {
        Mode::Complete => name.to_string(),
        Mode::Balanced => format!("{name} (B)"),
    }
}

pub fn heatmap(stores: &[Store]) -> Result<HeatmapData, ReportError> {
    all_records(stores)?;
    let mut sums: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    for s in stores {
        for r in &s.records {
            let e = sums.entry((dataset_label(&r.dataset, s.mode), r.method.clone())).or_default();
            e.0 += r.metrics.mcc;
            e.1 += 1;
        }
    }
    let rows: Vec<String> = sums.keys().map(|k| k.0.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let columns: Vec<String> = sums.keys().map(|k| k.1.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let cells = rows
        .iter()
        .map(|r| {
            columns
                .iter()
                .map(|c| sums.get(&(r.clone(), c.clone())).map(|&(s, n)| round2(100.0 * s / n as f64)))
                .collect()
        })
        .collect();
    Ok(HeatmapData {
        positive_class: POSITIVE_CLASS.into(),
        rows,
        columns,
        cells,
    })
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRow {
    pub method: String,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Number of (dataset, model) means summarized.
    pub n: usize,
}

impl BoxRow {
    pub fn from_values(method: &str, values: &mut [f64]) -> Self {
        values.sort_by(f64::total_cmp);
        Self {
            method: method.into(),
            min: values[0],
            q1: quantile(values, 0.25),
            median: quantile(values, 0.5),
            q3: quantile(values, 0.75),
            max: values[values.len() - 1],
            n: values.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub positive_class: String,
    pub rows: Vec<BoxRow>,
}

/// Distribution over (dataset, model) of fold-mean F1, per method.
pub fn boxstats(stores: &[Store]) -> Result<BoxStats, ReportError> {
    all_records(stores)?;
    let mut by_method: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for s in stores {
        for ((_, method, _), m) in cell_means(s.records.iter()) {
            by_method.entry(method).or_default().push(m.f1);
        }
    }
    Ok(BoxStats {
        positive_class: POSITIVE_CLASS.into(),
        rows: by_method
            .iter_mut()
            .map(|(m, v)| BoxRow::from_values(m, v))
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl FromStr for Format {
    type Err = ReportError;
    fn from_str(s: &str) -> Result<Self, ReportError> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            _ => Err(ReportError::UnknownFormat(s.into())),
        }
    }
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "view", rename_all = "lowercase")]
pub enum Artifact {
    Summary(Summary),
    Heatmap(HeatmapData),
    Box(BoxStats),
}

impl Artifact {
    pub fn view(&self) -> &'static str {
        match self {
            Artifact::Summary(_) => "summary",
            Artifact::Heatmap(_) => "heatmap",
            Artifact::Box(_) => "box",
        }
    }
}

fn fmt2(x: f64) -> String {
    format!("{x:.2}")
}

fn fmt4(x: f64) -> String {
    format!("{x:.4}")
}

/// Renders an artifact. Output depends only on the artifact, so identical
/// stores give identical bytes.
pub fn emit(artifact: &Artifact, format: Format, svg: &SvgOptions) -> Result<String, ReportError> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(artifact)? + "\n"),
        Format::Csv => emit_csv(artifact),
        Format::Svg => match artifact {
            Artifact::Heatmap(h) => Ok(svg::heatmap_svg(h, svg)),
            Artifact::Box(b) => Ok(svg::box_svg(b, svg)),
            Artifact::Summary(_) => Err(ReportError::UnsupportedFormat {
                format: "svg".into(),
                view: "summary".into(),
            }),
        },
    }
}

fn emit_csv(artifact: &Artifact) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match artifact {
        Artifact::Summary(s) => {
            w.write_record(["method", "mode", "f1", "recall", "accuracy", "precision", "roc_auc", "mcc", "n_datasets"])?;
            for r in &s.rows {
                w.write_record([
                    r.method.clone(),
                    r.mode.to_string(),
                    fmt2(r.f1),
                    fmt2(r.recall),
                    fmt2(r.accuracy),
                    fmt2(r.precision),
                    fmt2(r.roc_auc),
                    fmt2(r.mcc),
                    r.n_datasets.to_string(),
                ])?;
            }
        }
        Artifact::Heatmap(h) => {
            let mut header = vec!["dataset".to_string()];
            header.extend(h.columns.iter().cloned());
            w.write_record(&header)?;
            for (r, row) in h.rows.iter().zip(&h.cells) {
                let mut rec = vec![r.clone()];
                rec.extend(row.iter().map(|c| c.map(fmt2).unwrap_or_default()));
                w.write_record(&rec)?;
            }
        }
        Artifact::Box(b) => {
            w.write_record(["method", "min", "q1", "median", "q3", "max", "n"])?;
            for r in &b.rows {
                w.write_record([
                    r.method.clone(),
                    fmt4(r.min),
                    fmt4(r.q1),
                    fmt4(r.median),
                    fmt4(r.q3),
                    fmt4(r.max),
                    r.n.to_string(),
                ])?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Io {
        path: PathBuf::from("<csv>"),
        source: std::io::Error::other(e.to_string()),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(dataset: &str, method: &str, model: &str, fold: usize, f1: f64, mcc: f64) -> EvalRecord {
        EvalRecord {
            dataset: dataset.into(),
            method: method.into(),
            model: model.into(),
            fold,
            metrics: MetricSet {
                accuracy: 0.9,
                precision: 0.8,
                recall: 0.7,
                f1,
                roc_auc: 0.95,
                mcc,
            },
            n_selected: 3,
            selection_seconds: 0.0,
            train_seconds: 0.0,
        }
    }

    #[test]
    fn quartiles_type7() {
        let v = [0.1, 0.2, 0.3, 0.4];
        assert!((quantile(&v, 0.25) - 0.175).abs() < 1e-12);
        let b = BoxRow::from_values("m", &mut [0.4, 0.1, 0.3, 0.2]);
        assert!((b.median - 0.25).abs() < 1e-12);
        assert!(b.min <= b.q1 && b.q1 <= b.median && b.median <= b.q3 && b.q3 <= b.max);
    }

    #[test]
    fn empty_store_is_error() {
        let s = [Store::new(vec![], Mode::Complete)];
        assert!(matches!(summarize(&s, Mode::Complete), Err(ReportError::EmptyStore(_))));
        assert!(matches!(heatmap(&s), Err(ReportError::EmptyStore(_))));
        assert!(matches!(boxstats(&s), Err(ReportError::EmptyStore(_))));
    }

    #[test]
    fn single_record_summary_is_rounded_record() {
        let s = [Store::new(vec![rec("d", "m", "knn", 0, 0.876, 0.5)], Mode::Complete)];
        let sum = summarize(&s, Mode::Complete).unwrap();
        assert_eq!(sum.rows.len(), 1);
        let r = &sum.rows[0];
        assert_eq!((r.f1, r.recall, r.mcc, r.n_datasets), (0.88, 0.7, 0.5, 1));
    }

    #[test]
    fn modes_partition_records() {
        let s = [
            Store::new(vec![rec("d", "m", "knn", 0, 0.5, 0.0)], Mode::Complete),
            Store::new(vec![rec("d", "m", "knn", 0, 0.9, 0.0)], Mode::Balanced),
        ];
        assert_eq!(summarize(&s, Mode::Complete).unwrap().rows[0].f1, 0.5);
        assert_eq!(summarize(&s, Mode::Balanced).unwrap().rows[0].f1, 0.9);
        assert_eq!(heatmap(&s).unwrap().rows, vec!["d".to_string(), "d (B)".to_string()]);
    }

    #[test]
    fn heatmap_shape_and_uniform_values() {
        let mut recs = Vec::new();
        for d in ["a", "b"] {
            for m in ["x", "y", "z"] {
                recs.push(rec(d, m, "knn", 0, 0.5, 0.8812));
            }
        }
        let h = heatmap(&[Store::new(recs, Mode::Complete)]).unwrap();
        assert_eq!(h.cells.iter().map(Vec::len).sum::<usize>(), 6);
        assert!(h.cells.iter().flatten().all(|c| *c == Some(88.12)));
    }

    #[test]
    fn emit_round_trip_and_stability() {
        let recs = vec![rec("a", "x", "knn", 0, 0.5, 0.3), rec("a", "y", "rf", 1, 0.7, -0.2)];
        let stores = [Store::new(recs, Mode::Complete)];
        let art = Artifact::Heatmap(heatmap(&stores).unwrap());
        let opts = SvgOptions::default();
        let json = emit(&art, Format::Json, &opts).unwrap();
        let back: Artifact = serde_json::from_str(&json).unwrap();
        assert_eq!(back, art);
        assert_eq!(json, emit(&art, Format::Json, &opts).unwrap());
        assert_eq!(emit(&art, Format::Svg, &opts).unwrap(), emit(&art, Format::Svg, &opts).unwrap());
        let sum = Artifact::Summary(summarize(&stores, Mode::Complete).unwrap());
        let back: Artifact = serde_json::from_str(&emit(&sum, Format::Json, &opts).unwrap()).unwrap();
        assert_eq!(back, sum);
        let csv = emit(&sum, Format::Csv, &opts).unwrap();
        assert!(csv.starts_with("method,mode,f1,recall,accuracy,precision,roc_auc,mcc,n_datasets\n"));
        assert!(matches!("pdf".parse::<Format>(), Err(ReportError::UnknownFormat(_))));
    }
}
