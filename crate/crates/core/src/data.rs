//! Dataset loading, validation and the stage-one preprocessing steps
//! (missing-value removal, deduplication, class balancing).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

/// Label used for benign samples.
pub const BENIGN: u8 = 0;
/// Label used for malware samples (the positive class everywhere).
pub const MALWARE: u8 = 1;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("label column `{0}` not found in header")]
    MissingLabelColumn(String),
    #[error("file has no header or no data rows")]
    EmptyFile,
    #[error("line {line}: expected {expected} cells, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: label `{value}` is not 0/1")]
    NonBinaryLabel { line: u64, value: String },
    #[error("every row contains a missing cell")]
    AllRowsDropped,
    #[error("dataset contains a single class")]
    SingleClass,
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("kinds sidecar {path}: {reason}")]
    KindsFile { path: PathBuf, reason: String },
}

/// Static-feature category of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    Permission,
    ApiCall,
    Intent,
    OpCode,
    Unknown,
}

impl FeatureKind {
    /// Parses the one-letter tag used by the `.kinds.json` sidecar.
    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "P" => Some(FeatureKind::Permission),
            "A" => Some(FeatureKind::ApiCall),
            "I" => Some(FeatureKind::Intent),
            "O" => Some(FeatureKind::OpCode),
            _ => None,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            FeatureKind::Permission => "P",
            FeatureKind::ApiCall => "A",
            FeatureKind::Intent => "I",
            FeatureKind::OpCode => "O",
            FeatureKind::Unknown => "?",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A binary-feature tabular dataset. Immutable once built.
///
/// Features are stored row-major; a missing cell is `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    n_rows: usize,
    n_cols: usize,
    features: Vec<f64>,
    feature_names: Vec<String>,
    feature_kinds: Option<Vec<FeatureKind>>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Vec<Vec<f64>>,
        feature_names: Vec<String>,
        labels: Vec<u8>,
    ) -> Result<Self, DataError> {
        let n_cols = feature_names.len();
        let n_rows = features.len();
        if let Some((i, row)) = features.iter().enumerate().find(|(_, r)| r.len() != n_cols) {
            return Err(DataError::Invalid(format!(
                "row {i} has {} cells, expected {n_cols}",
                row.len()
            )));
        }
        let flat = features.into_iter().flatten().collect();
        Self::from_flat(name.into(), n_rows, flat, feature_names, None, labels)
    }

    /// Builds a dataset from a row-major buffer, checking every invariant.
    pub fn from_flat(
        name: String,
        n_rows: usize,
        features: Vec<f64>,
        feature_names: Vec<String>,
        feature_kinds: Option<Vec<FeatureKind>>,
        labels: Vec<u8>,
    ) -> Result<Self, DataError> {
        let n_cols = feature_names.len();
        if n_rows < 2 {
            return Err(DataError::Invalid(format!("need at least 2 rows, got {n_rows}")));
        }
        if n_cols < 1 {
            return Err(DataError::Invalid("need at least 1 feature column".into()));
        }
        if features.len() != n_rows * n_cols {
            return Err(DataError::Invalid("feature buffer size mismatch".into()));
        }
        if labels.len() != n_rows {
            return Err(DataError::Invalid(format!(
                "{} labels for {n_rows} rows",
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(DataError::Invalid(format!("label {bad} is not 0/1")));
        }
        let mut seen = HashSet::with_capacity(n_cols);
        for name in &feature_names {
            if name.is_empty() {
                return Err(DataError::Invalid("empty feature name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(DataError::Invalid(format!("duplicate feature name `{name}`")));
            }
        }
        if let Some(kinds) = &feature_kinds {
            if kinds.len() != n_cols {
                return Err(DataError::Invalid("feature_kinds length mismatch".into()));
            }
        }
        Ok(Self {
            name,
            n_rows,
            n_cols,
            features,
            feature_names,
            feature_kinds,
            labels,
        })
    }

    pub fn with_kinds(mut self, kinds: Vec<FeatureKind>) -> Result<Self, DataError> {
        if kinds.len() != self.n_cols {
            return Err(DataError::Invalid("feature_kinds length mismatch".into()));
        }
        self.feature_kinds = Some(kinds);
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_kinds(&self) -> Option<&[FeatureKind]> {
        self.feature_kinds.as_deref()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.n_cols)
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.features[row * self.n_cols + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.value(i, col)).collect()
    }

    /// All columns, each as a contiguous vector.
    pub fn columns(&self) -> Vec<Vec<f64>> {
        let mut cols = vec![Vec::with_capacity(self.n_rows); self.n_cols];
        for row in self.rows() {
            for (c, &v) in cols.iter_mut().zip(row) {
                c.push(v);
            }
        }
        cols
    }

    pub fn n_malware(&self) -> usize {
        self.labels.iter().filter(|&&l| l == MALWARE).count()
    }

    pub fn n_benign(&self) -> usize {
        self.n_rows - self.n_malware()
    }

    pub fn has_both_classes(&self) -> bool {
        let m = self.n_malware();
        m > 0 && m < self.n_rows
    }

    pub fn require_both_classes(&self) -> Result<(), DataError> {
        if self.has_both_classes() {
            Ok(())
        } else {
            Err(DataError::SingleClass)
        }
    }

    /// True when every present cell is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.features.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn has_missing(&self) -> bool {
        self.features.iter().any(|v| v.is_nan())
    }

    /// Indices of the columns of the given kind; `None` when kinds are unknown.
    pub fn columns_of_kind(&self, kind: FeatureKind) -> Option<Vec<usize>> {
        self.feature_kinds.as_ref().map(|kinds| {
            kinds
                .iter()
                .enumerate()
                .filter(|(_, &k)| k == kind)
                .map(|(j, _)| j)
                .collect()
        })
    }

    /// Row subset in the given order. Used for folds, so the two-row floor
    /// of [`Dataset::from_flat`] does not apply here.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(rows.len() * self.n_cols);
        let mut labels = Vec::with_capacity(rows.len());
        for &r in rows {
            features.extend_from_slice(self.row(r));
            labels.push(self.labels[r]);
        }
        Dataset {
            name: self.name.clone(),
            n_rows: rows.len(),
            n_cols: self.n_cols,
            features,
            feature_names: self.feature_names.clone(),
            feature_kinds: self.feature_kinds.clone(),
            labels,
        }
    }

    /// Column subset in the given order; indices must be in range.
    pub fn select_columns(&self, cols: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(self.n_rows * cols.len());
        for row in self.rows() {
            features.extend(cols.iter().map(|&c| row[c]));
        }
        Dataset {
            name: self.name.clone(),
            n_rows: self.n_rows,
            n_cols: cols.len(),
            features,
            feature_names: cols.iter().map(|&c| self.feature_names[c].clone()).collect(),
            feature_kinds: self
                .feature_kinds
                .as_ref()
                .map(|k| cols.iter().map(|&c| k[c]).collect()),
            labels: self.labels.clone(),
        }
    }
}

/// Class counts and feature-kind histogram of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n_malware: usize,
    pub n_benign: usize,
    pub n_features: usize,
    pub kind_histogram: BTreeMap<FeatureKind, usize>,
}

pub fn meta(d: &Dataset) -> DatasetMeta {
    let mut kind_histogram = BTreeMap::new();
    match d.feature_kinds() {
        Some(kinds) => {
            for &k in kinds {
                *kind_histogram.entry(k).or_insert(0) += 1;
            }
        }
        None => {
            kind_histogram.insert(FeatureKind::Unknown, d.n_cols());
        }
    }
    DatasetMeta {
        n_malware: d.n_malware(),
        n_benign: d.n_benign(),
        n_features: d.n_cols(),
        kind_histogram,
    }
}

/// Options for [`load_csv_with`].
#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub label_column: String,
    /// Accept `benign`/`malware` (any case) in addition to `0`/`1`.
    pub textual_labels: bool,
    /// Read `<stem>.kinds.json` next to the CSV when it exists.
    pub read_kinds_sidecar: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            label_column: "class".into(),
            textual_labels: false,
            read_kinds_sidecar: true,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset, DataError> {
    load_csv_with(
        path,
        &LoadOptions {
            label_column: label_column.into(),
            ..LoadOptions::default()
        },
    )
}

pub fn load_csv_with(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let dataset = parse_csv(file, name, opts)?;
    if opts.read_kinds_sidecar {
        let sidecar = kinds_sidecar_path(path);
        if sidecar.exists() {
            let kinds = read_kinds_sidecar(&sidecar, dataset.feature_names())?;
            return dataset.with_kinds(kinds);
        }
    }
    Ok(dataset)
}

/// `<dir>/<stem>.kinds.json` for `<dir>/<stem>.csv`.
pub fn kinds_sidecar_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.kinds.json"))
}

fn read_kinds_sidecar(path: &Path, names: &[String]) -> Result<Vec<FeatureKind>, DataError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let map: HashMap<String, String> =
        serde_json::from_str(&text).map_err(|e| DataError::KindsFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    for (feature, tag) in &map {
        if FeatureKind::from_tag(tag).is_none() {
            return Err(DataError::KindsFile {
                path: path.to_path_buf(),
                reason: format!("feature `{feature}` has unknown kind `{tag}`"),
            });
        }
    }
    let kinds: Vec<FeatureKind> = names
        .iter()
        .map(|n| {
            map.get(n)
                .and_then(|t| FeatureKind::from_tag(t))
                .unwrap_or(FeatureKind::Unknown)
        })
        .collect();
    let unknown = kinds.iter().filter(|&&k| k == FeatureKind::Unknown).count();
    if unknown > 0 {
        warn!("{}: {unknown} features have no kind in sidecar", path.display());
    }
    Ok(kinds)
}

fn parse_label(raw: &str, textual: bool) -> Option<u8> {
    let t = raw.trim();
    if textual {
        if t.eq_ignore_ascii_case("benign") {
            return Some(BENIGN);
        }
        if t.eq_ignore_ascii_case("malware") {
            return Some(MALWARE);
        }
    }
    match t.parse::<f64>() {
        Ok(v) if v == 0.0 => Some(BENIGN),
        Ok(v) if v == 1.0 => Some(MALWARE),
        _ => None,
    }
}

/// Parses CSV text from any reader. Unparseable feature cells become `NaN`.
pub fn parse_csv<R: std::io::Read>(
    reader: R,
    name: String,
    opts: &LoadOptions,
) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(DataError::EmptyFile);
    }
    let label_idx = header
        .iter()
        .position(|h| *h == opts.label_column)
        .ok_or_else(|| DataError::MissingLabelColumn(opts.label_column.clone()))?;
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut missing = 0usize;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != header.len() {
            return Err(DataError::RaggedRow {
                line,
                expected: header.len(),
                found: record.len(),
            });
        }
        for (i, cell) in record.iter().enumerate() {
            if i == label_idx {
                let label = parse_label(cell, opts.textual_labels).ok_or_else(|| {
                    DataError::NonBinaryLabel {
                        line,
                        value: cell.to_string(),
                    }
                })?;
                labels.push(label);
            } else {
                let v = cell.trim().parse::<f64>().unwrap_or(f64::NAN);
                if v.is_nan() {
                    missing += 1;
                }
                features.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(DataError::EmptyFile);
    }
    if missing > 0 {
        info!("{name}: {missing} missing or unparseable cells");
    }
    let n_rows = labels.len();
    Dataset::from_flat(name, n_rows, features, feature_names, None, labels)
}

fn format_cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v == 0.0 {
        "0".into()
    } else if v == 1.0 {
        "1".into()
    } else {
        format!("{v}")
    }
}

/// Writes the dataset as CSV with the label as the last column.
pub fn write_csv<W: Write>(d: &Dataset, writer: W, label_column: &str) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = d.feature_names().iter().map(String::as_str).collect();
    header.push(label_column);
    wtr.write_record(&header)?;
    let mut cells = Vec::with_capacity(d.n_cols() + 1);
    for (row, &label) in d.rows().zip(d.labels()) {
        cells.clear();
        cells.extend(row.iter().map(|&v| format_cell(v)));
        cells.push(label.to_string());
        wtr.write_record(&cells)?;
    }
    wtr.flush().map_err(|source| DataError::Io {
        path: PathBuf::from("<writer>"),
        source,
    })?;
    Ok(())
}

pub fn write_csv_file(d: &Dataset, path: &Path, label_column: &str) -> Result<(), DataError> {
    let file = std::fs::File::create(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(d, std::io::BufWriter::new(file), label_column)
}

/// Writes `<stem>.kinds.json` next to `csv_path`. Columns of unknown kind
/// are left out. Does nothing if the dataset carries no kinds.
pub fn write_kinds_sidecar(d: &Dataset, csv_path: &Path) -> Result<(), DataError> {
    let Some(kinds) = d.feature_kinds() else {
        return Ok(());
    };
    let map: std::collections::BTreeMap<&str, &str> = d
        .feature_names()
        .iter()
        .zip(kinds)
        .filter(|(_, k)| **k != FeatureKind::Unknown)
        .map(|(n, k)| (n.as_str(), k.tag()))
        .collect();
    let path = kinds_sidecar_path(csv_path);
    let text = serde_json::to_string_pretty(&map).expect("string map serializes") + "\n";
    std::fs::write(&path, text).map_err(|source| DataError::Io { path, source })
}

/// Keeps only the rows without missing cells, in order.
pub fn drop_nan_rows(d: &Dataset) -> Result<Dataset, DataError> {
    let keep: Vec<usize> = (0..d.n_rows())
        .filter(|&i| d.row(i).iter().all(|v| !v.is_nan()))
        .collect();
    if keep.is_empty() {
        return Err(DataError::AllRowsDropped);
    }
    if keep.len() == d.n_rows() {
        return Ok(d.clone());
    }
    Ok(d.select_rows(&keep))
}

fn cell_key(v: f64) -> u64 {
    // -0.0 and 0.0 are the same cell value
    if v == 0.0 {
        0
    } else {
        v.to_bits()
    }
}

/// Keeps the first occurrence of each (feature vector, label) pair.
pub fn dedup_rows(d: &Dataset) -> Dataset {
    let mut seen = HashSet::with_capacity(d.n_rows());
    let keep: Vec<usize> = (0..d.n_rows())
        .filter(|&i| {
            let key: (Vec<u64>, u8) = (d.row(i).iter().map(|&v| cell_key(v)).collect(), d.labels()[i]);
            seen.insert(key)
        })
        .collect();
    if keep.len() == d.n_rows() {
        d.clone()
    } else {
        d.select_rows(&keep)
    }
}

/// Uniform random undersampling of the majority class down to the minority
/// count. Output keeps the original row order.
pub fn balance_undersample(d: &Dataset, seed: u64) -> Result<Dataset, DataError> {
    d.require_both_classes()?;
    let malware: Vec<usize> = (0..d.n_rows()).filter(|&i| d.labels()[i] == MALWARE).collect();
    let benign: Vec<usize> = (0..d.n_rows()).filter(|&i| d.labels()[i] == BENIGN).collect();
    let target = malware.len().min(benign.len());
    let mut rng = rng::stream(seed, rng::streams::BALANCE);
    let mut keep = Vec::with_capacity(2 * target);
    for class_rows in [&malware, &benign] {
        if class_rows.len() == target {
            keep.extend_from_slice(class_rows);
        } else {
            let picked = rand::seq::index::sample(&mut rng, class_rows.len(), target);
            keep.extend(picked.iter().map(|p| class_rows[p]));
        }
    }
    keep.sort_unstable();
    Ok(d.select_rows(&keep))
}

/// Row counts after each preprocessing step.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct PreprocessReport {
    pub rows_in: usize,
    pub after_drop_nan: usize,
    pub after_dedup: usize,
    pub after_balance: Option<usize>,
}

/// drop_nan -> dedup -> optional balance, in that fixed order.
pub fn preprocess(
    d: &Dataset,
    balance_seed: Option<u64>,
) -> Result<(Dataset, PreprocessReport), DataError> {
    let rows_in = d.n_rows();
    let cleaned = drop_nan_rows(d)?;
    let after_drop_nan = cleaned.n_rows();
    let deduped = dedup_rows(&cleaned);
    let after_dedup = deduped.n_rows();
    let (out, after_balance) = match balance_seed {
        Some(seed) => {
            let b = balance_undersample(&deduped, seed)?;
            let n = b.n_rows();
            (b, Some(n))
        }
        None => (deduped, None),
    };
    info!(
        "{}: preprocess drop_nan {rows_in}->{after_drop_nan}, dedup ->{after_dedup}{}",
        d.name(),
        after_balance
            .map(|n| format!(", balance ->{n}"))
            .unwrap_or_default()
    );
    Ok((
        out,
        PreprocessReport {
            rows_in,
            after_drop_nan,
            after_dedup,
            after_balance,
        },
    ))
}
