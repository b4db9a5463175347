//! Out-of-process selection methods.
//!
//! A plugin is a directory `<root>/<id>/` holding `about.desc` (free text
//! shown by `describe`), `plugin.json`, and an executable. The engine writes
//! the dataset to a temporary CSV, runs
//! `<exe> --input <csv> --output <csv> --label-column <name> [--<arg> <value>]...`
//! and reads back the reduced CSV. Surviving column names give the selection.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{self, Dataset, LoadOptions};
use crate::selection::{FeatureScore, MethodError, Selection, Selector, SelectorKind, SelectorParams};

pub const DESCRIPTOR_FILE: &str = "about.desc";
pub const MANIFEST_FILE: &str = "plugin.json";
pub const PLUGIN_DIR_ENV: &str = "FSBENCH_PLUGIN_DIR";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(3600);

#[derive(Debug, Error)]
pub enum PluginError {
    #[error("plugin `{id}` exited with {status}: {stderr}")]
    PluginCrashed { id: String, status: String, stderr: String },
    #[error("plugin `{id}` broke the output contract: {detail}")]
    ProtocolViolation { id: String, detail: String },
    #[error("plugin `{id}` timed out after {seconds} s")]
    Timeout { id: String, seconds: u64 },
    #[error("plugin `{id}`: {detail}")]
    InvalidArgs { id: String, detail: String },
    #[error("plugin `{id}`: i/o error: {source}")]
    Io {
        id: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArgType {
    Int,
    Real,
    Text,
    Flag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeclaredArg {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ArgType,
    #[serde(default)]
    pub default: Option<String>,
}

/// Contents of `plugin.json`.
#[derive(Debug, Clone, Deserialize)]
struct ManifestFile {
    id: Option<String>,
    kind: SelectorKind,
    executable: String,
    #[serde(default)]
    args: Vec<DeclaredArg>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PluginManifest {
    pub id: String,
    pub kind: SelectorKind,
    pub description: String,
    /// Relative to `dir`.
    pub executable: PathBuf,
    pub declared_args: Vec<DeclaredArg>,
    pub dir: PathBuf,
}

impl PluginManifest {
    pub fn executable_path(&self) -> PathBuf {
        self.dir.join(&self.executable)
    }

    /// Reads one plugin directory.
    pub fn load(dir: &Path) -> Result<Self, String> {
        let dir_name = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or("directory name is not UTF-8")?
            .to_string();
        let description = fs::read_to_string(dir.join(DESCRIPTOR_FILE))
            .map_err(|e| format!("missing or unreadable {DESCRIPTOR_FILE}: {e}"))?
            .trim()
            .to_string();
        let raw = fs::read_to_string(dir.join(MANIFEST_FILE))
            .map_err(|e| format!("missing or unreadable {MANIFEST_FILE}: {e}"))?;
        let m: ManifestFile = serde_json::from_str(&raw).map_err(|e| format!("bad {MANIFEST_FILE}: {e}"))?;
        let id = m.id.unwrap_or_else(|| dir_name.clone());
        if id != dir_name {
            return Err(format!("id `{id}` does not match directory name `{dir_name}`"));
        }
        let executable = PathBuf::from(&m.executable);
        if executable.is_absolute() || m.executable.contains("..") {
            return Err(format!("executable `{}` must be a path inside the plugin directory", m.executable));
        }
        let exe = dir.join(&executable);
        if !exe.is_file() {
            return Err(format!("executable `{}` not found", exe.display()));
        }
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            let mode = fs::metadata(&exe).map_err(|e| e.to_string())?.permissions().mode();
            if mode & 0o111 == 0 {
                return Err(format!("executable `{}` is not runnable (chmod +x)", exe.display()));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for a in &m.args {
            if !seen.insert(a.name.as_str()) || matches!(a.name.as_str(), "input" | "output" | "label-column") {
                return Err(format!("argument `{}` is duplicated or reserved", a.name));
            }
            if let Some(d) = &a.default {
                check_arg_value(a, d)?;
            }
        }
        Ok(Self {
            id,
            kind: m.kind,
            description,
            executable,
            declared_args: m.args,
            dir: dir.to_path_buf(),
        })
    }
}

fn check_arg_value(arg: &DeclaredArg, value: &str) -> Result<(), String> {
    let ok = match arg.ty {
        ArgType::Int => value.parse::<i64>().is_ok(),
        ArgType::Real => value.parse::<f64>().is_ok(),
        ArgType::Text => true,
        ArgType::Flag => value.parse::<bool>().is_ok(),
    };
    if ok {
        Ok(())
    } else {
        Err(format!("`{}`: `{value}` is not a valid {:?}", arg.name, arg.ty))
    }
}

/// One manifest per well-formed subdirectory of `root`, sorted by id.
/// Anything malformed is skipped with a warning.
pub fn discover_plugins(root: &Path) -> Vec<PluginManifest> {
    let entries = match fs::read_dir(root) {
        Ok(e) => e,
        Err(e) => {
            log::warn!("plugin root {}: {e}", root.display());
            return Vec::new();
        }
    };
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut out = Vec::new();
    for dir in dirs {
        match PluginManifest::load(&dir) {
            Ok(m) => out.push(m),
            Err(e) => log::warn!("skipping plugin directory {}: {e}", dir.display()),
        }
    }
    out
}

/// Plugin root from `FSBENCH_PLUGIN_DIR`, if set.
pub fn plugin_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(PLUGIN_DIR_ENV).map(PathBuf::from)
}

/// Command-line arguments for the declared args, taking values from `given`
/// and falling back to defaults. Unknown keys are rejected.
pub fn build_args(m: &PluginManifest, given: &BTreeMap<String, String>) -> Result<Vec<String>, PluginError> {
    let invalid = |detail: String| PluginError::InvalidArgs { id: m.id.clone(), detail };
    for key in given.keys() {
        if !m.declared_args.iter().any(|a| &a.name == key) {
            return Err(invalid(format!("undeclared argument `{key}`")));
        }
    }
    let mut out = Vec::new();
    for a in &m.declared_args {
        let Some(value) = given.get(&a.name).or(a.default.as_ref()) else {
            if a.ty == ArgType::Flag {
                continue;
            }
            return Err(invalid(format!("argument `{}` has no value and no default", a.name)));
        };
        check_arg_value(a, value).map_err(invalid)?;
        if a.ty == ArgType::Flag {
            if value == "true" {
                out.push(format!("--{}", a.name));
            }
        } else {
            out.push(format!("--{}", a.name));
            out.push(value.clone());
        }
    }
    Ok(out)
}

fn label_column_for(d: &Dataset) -> String {
    let mut name = "class".to_string();
    while d.feature_names().contains(&name) {
        name.insert(0, '_');
    }
    name
}

/// Checks the reduced dataset against the input and returns the surviving
/// column indices in output order.
pub fn match_output(id: &str, input: &Dataset, output: &Dataset) -> Result<Vec<usize>, PluginError> {
    let violation = |detail: String| PluginError::ProtocolViolation { id: id.into(), detail };
    let index: BTreeMap<&str, usize> = input
        .feature_names()
        .iter()
        .enumerate()
        .map(|(j, n)| (n.as_str(), j))
        .collect();
    let mut selected = Vec::with_capacity(output.n_cols());
    for name in output.feature_names() {
        match index.get(name.as_str()) {
            Some(&j) => selected.push(j),
            None => return Err(violation(format!("output has column `{name}` not present in the input"))),
        }
    }
    if output.n_rows() != input.n_rows() {
        return Err(violation(format!("{} rows in, {} rows out", input.n_rows(), output.n_rows())));
    }
    if output.labels() != input.labels() {
        return Err(violation("labels changed or rows reordered".into()));
    }
    for i in 0..input.n_rows() {
        for (k, &j) in selected.iter().enumerate() {
            let (a, b) = (input.value(i, j), output.value(i, k));
            if a != b && !(a.is_nan() && b.is_nan()) {
                return Err(violation(format!("row {i}, column `{}` changed or rows reordered", input.feature_names()[j])));
            }
        }
    }
    if selected.is_empty() {
        return Err(violation("output keeps no feature column".into()));
    }
    Ok(selected)
}

/// Runs the plugin on `d` and returns the surviving column indices.
pub fn run_plugin(
    m: &PluginManifest,
    d: &Dataset,
    args: &BTreeMap<String, String>,
    timeout: Duration,
) -> Result<Vec<usize>, PluginError> {
    let io = |source: std::io::Error| PluginError::Io { id: m.id.clone(), source };
    let cli_args = build_args(m, args)?;
    let tmp = tempfile::Builder::new().prefix("fsbench-plugin-").tempdir().map_err(io)?;
    let input = tmp.path().join("input.csv");
    let output = tmp.path().join("output.csv");
    let label = label_column_for(d);
    data::write_csv_file(d, &input, &label).map_err(|e| io(std::io::Error::other(e.to_string())))?;

    let stderr_path = tmp.path().join("stderr.txt");
    let mut child = Command::new(m.executable_path().canonicalize().map_err(io)?)
        .arg("--input")
        .arg(&input)
        .arg("--output")
        .arg(&output)
        .arg("--label-column")
        .arg(&label)
        .args(&cli_args)
        .current_dir(&m.dir)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(fs::File::create(&stderr_path).map_err(io)?)
        .spawn()
        .map_err(io)?;

    let start = Instant::now();
    let status = loop {
        if let Some(status) = child.try_wait().map_err(io)? {
            break status;
        }
        if start.elapsed() >= timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Err(PluginError::Timeout {
                id: m.id.clone(),
                seconds: timeout.as_secs(),
            });
        }
        std::thread::sleep(Duration::from_millis(10));
    };
    if !status.success() {
        let stderr = fs::read_to_string(&stderr_path).unwrap_or_default();
        let tail: String = stderr.lines().rev().take(5).collect::<Vec<_>>().into_iter().rev().collect::<Vec<_>>().join(" | ");
        return Err(PluginError::PluginCrashed {
            id: m.id.clone(),
            status: status.to_string(),
            stderr: tail,
        });
    }
    let opts = LoadOptions {
        label_column: label,
        read_kinds_sidecar: false,
        ..LoadOptions::default()
    };
    let reduced = data::load_csv_with(&output, &opts).map_err(|e| PluginError::ProtocolViolation {
        id: m.id.clone(),
        detail: format!("unreadable output: {e}"),
    })?;
    match_output(&m.id, d, &reduced)
}

/// Adapter that makes a plugin look like a built-in selector.
pub struct PluginSelector {
    manifest: PluginManifest,
    timeout: Duration,
}

impl PluginSelector {
    pub fn new(manifest: PluginManifest) -> Self {
        Self {
            manifest,
            timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn manifest(&self) -> &PluginManifest {
        &self.manifest
    }
}

impl Selector for PluginSelector {
    fn id(&self) -> &str {
        &self.manifest.id
    }
    fn kind(&self) -> SelectorKind {
        self.manifest.kind
    }
    fn description(&self) -> &str {
        &self.manifest.description
    }
    fn run(&self, d: &Dataset, p: &SelectorParams) -> Result<Selection, MethodError> {
        let selected = run_plugin(&self.manifest, d, &p.extra, self.timeout)?;
        Ok(match self.manifest.kind {
            // output column order is the ranking, best first
            SelectorKind::Ordering => {
                let n = selected.len() as f64;
                let mut scores = vec![f64::NEG_INFINITY; d.n_cols()];
                for (pos, &j) in selected.iter().enumerate() {
                    scores[j] = n - pos as f64;
                }
                let entries = selected.iter().map(|&j| (j, scores[j])).collect();
                Selection::ranked(FeatureScore { entries })
            }
            SelectorKind::Subset => Selection::subset(selected),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(args: Vec<DeclaredArg>) -> PluginManifest {
        PluginManifest {
            id: "p".into(),
            kind: SelectorKind::Subset,
            description: String::new(),
            executable: "run.sh".into(),
            declared_args: args,
            dir: PathBuf::from("."),
        }
    }

    fn ds(names: &[&str], rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Dataset {
        Dataset::new("t", rows, names.iter().map(|s| s.to_string()).collect(), labels).unwrap()
    }

    #[test]
    fn args_defaults_types_and_flags() {
        let m = manifest(vec![
            DeclaredArg { name: "n".into(), ty: ArgType::Int, default: Some("2".into()) },
            DeclaredArg { name: "verbose".into(), ty: ArgType::Flag, default: None },
        ]);
        assert_eq!(build_args(&m, &BTreeMap::new()).unwrap(), vec!["--n", "2"]);
        let given = BTreeMap::from([("n".to_string(), "5".to_string()), ("verbose".to_string(), "true".to_string())]);
        assert_eq!(build_args(&m, &given).unwrap(), vec!["--n", "5", "--verbose"]);
        let bad = BTreeMap::from([("n".to_string(), "x".to_string())]);
        assert!(matches!(build_args(&m, &bad), Err(PluginError::InvalidArgs { .. })));
        let unknown = BTreeMap::from([("zzz".to_string(), "1".to_string())]);
        assert!(matches!(build_args(&m, &unknown), Err(PluginError::InvalidArgs { .. })));
    }

    #[test]
    fn output_matching_rules() {
        let input = ds(&["a", "b", "c"], vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0]], vec![1, 0]);
        let same = input.clone();
        assert_eq!(match_output("p", &input, &same).unwrap(), vec![0, 1, 2]);
        let reduced = ds(&["c", "a"], vec![vec![1.0, 1.0], vec![1.0, 0.0]], vec![1, 0]);
        assert_eq!(match_output("p", &input, &reduced).unwrap(), vec![2, 0]);
        let extra = ds(&["a", "z"], vec![vec![1.0, 0.0], vec![0.0, 0.0]], vec![1, 0]);
        assert!(matches!(match_output("p", &input, &extra), Err(PluginError::ProtocolViolation { .. })));
        let reordered = ds(&["a"], vec![vec![0.0], vec![1.0]], vec![0, 1]);
        assert!(matches!(match_output("p", &input, &reordered), Err(PluginError::ProtocolViolation { .. })));
    }

    #[test]
    fn discovery_skips_malformed() {
        let root = tempfile::tempdir().unwrap();
        assert!(discover_plugins(root.path()).is_empty());
        let bad = root.path().join("no_desc");
        fs::create_dir(&bad).unwrap();
        fs::write(bad.join(MANIFEST_FILE), r#"{"kind":"Subset","executable":"x"}"#).unwrap();
        assert!(discover_plugins(root.path()).is_empty());
    }
}
