use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fsbench::config::{DatasetSource, RunConfig};
use fsbench::data::{write_csv_file, write_kinds_sidecar};
use fsbench::models::ModelKind;
use fsbench::plugin::{discover_plugins, plugin_dir_from_env};
use fsbench::report::{self, Artifact, Format, Mode, SvgOptions};
use fsbench::selection::Registry;
use fsbench::run_experiment;

/// Benchmark feature-selection methods on binary malware datasets
#[derive(Parser, Debug)]
#[command(name = "fsbench", version, about)]
struct Cli {
    /// Plugin root (overrides FSBENCH_PLUGIN_DIR)
    #[arg(long, global = true, value_name = "DIR")]
    plugin_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List selection methods (built-in and plugins)
    ListMethods,
    /// Describe a selection method or model
    Describe { id: String },
    /// Run an experiment grid and write a record store
    Run(RunArgs),
    /// Build a summary table, MCC heatmap or F1 box statistics from stores
    Report(ReportArgs),
    /// Write the bundled planted demo dataset (CSV plus kinds sidecar)
    MakeDemo {
        #[arg(long, default_value = "demo_planted.csv")]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// TOML file with RunConfig keys; flags given on the command line win
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Dataset CSV (repeatable)
    #[arg(long = "dataset", short = 'd', value_name = "CSV")]
    datasets: Vec<PathBuf>,
    /// Name of the label column in every dataset given by --dataset
    #[arg(long, default_value = "class")]
    label_column: String,
    /// Labels are the words benign/malware rather than 0/1
    #[arg(long)]
    textual_labels: bool,
    /// Comma-separated method ids, or "all"
    #[arg(long, short = 'm', value_delimiter = ',')]
    methods: Vec<String>,
    /// Comma-separated model ids (knn, rf, svm-linear)
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,
    /// Number of cross-validation folds
    #[arg(short = 'k', long = "folds")]
    k_folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Undersample the majority class before evaluation
    #[arg(long)]
    balance: bool,
    /// Run selection inside every training fold instead of once per dataset
    #[arg(long)]
    no_leakage: bool,
    #[arg(long, short = 'o')]
    output_dir: Option<PathBuf>,
    /// Overwrite a non-empty output directory
    #[arg(long)]
    force: bool,
    /// Keep wall-clock timings in the record store (breaks byte reproducibility)
    #[arg(long)]
    record_timings: bool,
    /// Method argument, `<id>.<key>=<value>` (repeatable)
    #[arg(long = "method-arg", value_name = "ID.KEY=VALUE")]
    method_args: Vec<String>,
    /// Model hyperparameter, `<model>.<key>=<value>` (repeatable)
    #[arg(long = "model-arg", value_name = "MODEL.KEY=VALUE")]
    model_args: Vec<String>,
    /// Per-invocation plugin time limit in seconds
    #[arg(long)]
    plugin_timeout: Option<u64>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Run directory or records.jsonl (repeatable, e.g. one complete and one balanced run)
    #[arg(long = "store", required = true)]
    stores: Vec<PathBuf>,
    #[arg(long, default_value = "summary", value_parser = ["summary", "heatmap", "box"])]
    view: String,
    /// csv, json or svg
    #[arg(long, default_value = "csv")]
    format: String,
    /// Output file
    #[arg(long, short = 'o')]
    out: PathBuf,
    /// Mode for the summary view
    #[arg(long, default_value = "complete")]
    mode: String,
    #[arg(long, default_value_t = 900)]
    width: u32,
    #[arg(long, default_value_t = 600)]
    height: u32,
}

fn registry(plugin_dir: Option<&Path>) -> Registry {
    let dir = plugin_dir.map(Path::to_path_buf).or_else(plugin_dir_from_env);
    match dir {
        Some(d) if d.is_dir() => Registry::builtin().with_plugins(discover_plugins(&d)),
        Some(d) => {
            log::warn!("plugin directory {} does not exist", d.display());
            Registry::builtin()
        }
        None => Registry::builtin(),
    }
}

/// First `max` characters, cut at a word boundary.
fn short(text: &str, max: usize) -> String {
    if text.chars().count() <= max {
        return text.to_string();
    }
    let cut: String = text.chars().take(max).collect();
    let cut = cut.rsplit_once(' ').map_or(cut.as_str(), |(a, _)| a);
    format!("{}...", cut.trim_end_matches([',', ';', ':', '.']))
}

fn cmd_list(plugin_dir: Option<&Path>) {
    let methods = registry(plugin_dir).list_methods();
    let width = methods.iter().map(|m| m.id.len()).max().unwrap_or(2).max(2);
    println!("{:<width$}  {:<8}  description", "id", "kind");
    for m in methods {
        println!("{:<width$}  {:<8}  {}", m.id, m.kind.to_string(), short(&m.description, 72));
    }
}

fn cmd_describe(id: &str, plugin_dir: Option<&Path>) -> Result<()> {
    if let Some(s) = registry(plugin_dir).get(id) {
        println!("{} ({})\n\n{}", s.id(), s.kind(), s.description());
        return Ok(());
    }
    if let Ok(kind) = id.parse::<ModelKind>() {
        println!("{} (model)\n\n{}", kind.id(), kind.description());
        return Ok(());
    }
    bail!("unknown method or model `{id}`; see `fsbench list-methods`")
}

/// Splits `id.key=value`; the id may itself contain dots, the key may not.
fn parse_scoped_arg(raw: &str) -> Result<(String, String, String)> {
    let (lhs, value) = raw
        .split_once('=')
        .ok_or_else(|| anyhow!("`{raw}`: expected <id>.<key>=<value>"))?;
    let (id, key) = lhs
        .rsplit_once('.')
        .ok_or_else(|| anyhow!("`{raw}`: expected <id>.<key>=<value>"))?;
    if id.is_empty() || key.is_empty() {
        bail!("`{raw}`: empty id or key");
    }
    Ok((id.into(), key.into(), value.into()))
}

fn merge_scoped(target: &mut BTreeMap<String, BTreeMap<String, String>>, raws: &[String]) -> Result<()> {
    for raw in raws {
        let (id, key, value) = parse_scoped_arg(raw)?;
        target.entry(id).or_default().insert(key, value);
    }
    Ok(())
}

fn build_config(a: &RunArgs, plugin_dir: Option<&Path>, reg: &Registry) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if !a.datasets.is_empty() {
        cfg.datasets = a
            .datasets
            .iter()
            .map(|p| DatasetSource {
                path: p.clone(),
                label_column: a.label_column.clone(),
                textual_labels: a.textual_labels,
            })
            .collect();
    }
    if !a.methods.is_empty() {
        cfg.methods = a.methods.clone();
    }
    if cfg.methods.iter().any(|m| m == "all") {
        cfg.methods = reg.list_methods().into_iter().map(|m| m.id).collect();
    }
    if !a.models.is_empty() {
        cfg.models = a.models.clone();
    }
    if let Some(k) = a.k_folds {
        cfg.k_folds = k;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(t) = a.threads {
        cfg.threads = t;
    }
    if let Some(o) = &a.output_dir {
        cfg.output_dir = o.clone();
    }
    if let Some(t) = a.plugin_timeout {
        cfg.plugin_timeout_secs = t;
    }
    if let Some(p) = plugin_dir {
        cfg.plugin_dir = Some(p.to_path_buf());
    }
    cfg.balance |= a.balance;
    cfg.no_leakage |= a.no_leakage;
    cfg.force |= a.force;
    cfg.record_timings |= a.record_timings;
    merge_scoped(&mut cfg.method_args, &a.method_args)?;
    merge_scoped(&mut cfg.model_args, &a.model_args)?;
    Ok(cfg)
}

fn cmd_run(a: &RunArgs, plugin_dir: Option<&Path>) -> Result<bool> {
    let reg = registry(plugin_dir);
    let cfg = build_config(a, plugin_dir, &reg)?;
    let res = run_experiment(&cfg)?;
    let n_fail = res.outcome.failures.len();
    log::info!(
        "{} records, {n_fail} failures written to {}",
        res.outcome.records.len(),
        res.output_dir.display()
    );
    for f in &res.outcome.failures {
        log::error!(
            "failed: {} {} {} {}: {}",
            f.dataset,
            f.method.as_deref().unwrap_or("-"),
            f.model.as_deref().unwrap_or("-"),
            f.stage,
            f.error
        );
    }
    Ok(res.ok())
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let format: Format = a.format.parse()?;
    let mode: Mode = a.mode.parse().map_err(|e: String| anyhow!(e))?;
    let stores = a
        .stores
        .iter()
        .map(|p| report::load_store(p).with_context(|| format!("loading store {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let artifact = match a.view.as_str() {
        "summary" => Artifact::Summary(report::summarize(&stores, mode)?),
        "heatmap" => Artifact::Heatmap(report::heatmap(&stores)?),
        _ => Artifact::Box(report::boxstats(&stores)?),
    };
    let text = report::emit(
        &artifact,
        format,
        &SvgOptions {
            width: a.width,
            height: a.height,
        },
    )?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(&a.out, text).with_context(|| format!("writing {}", a.out.display()))?;
    log::info!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_make_demo(out: &Path, seed: u64) -> Result<()> {
    let d = fsbench::synthetic::demo_dataset(seed).dataset;
    write_csv_file(&d, out, "class")?;
    write_kinds_sidecar(&d, out)?;
    log::info!("wrote {} ({} rows, {} features)", out.display(), d.n_rows(), d.n_cols());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let plugin_dir = cli.plugin_dir.as_deref();
    let result = match &cli.command {
        Command::ListMethods => {
            cmd_list(plugin_dir);
            Ok(true)
        }
        Command::Describe { id } => cmd_describe(id, plugin_dir).map(|_| true),
        Command::Run(a) => cmd_run(a, plugin_dir),
        Command::Report(a) => cmd_report(a).map(|_| true),
        Command::MakeDemo { out, seed } => cmd_make_demo(out, *seed).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(2)
        }
    }
}
