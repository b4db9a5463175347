//! Benchmarking of feature-selection methods on binary malware datasets.
//!
//! A run loads datasets, preprocesses them, applies each selection method,
//! cross-validates each model on the reduced data and writes a JSON-lines
//! record store. [`report`] turns stores into tables and charts.

pub mod config;
pub mod data;
pub mod evaluation;
pub mod experiment;
pub mod models;
pub mod plugin;
pub mod report;
pub mod rng;
pub mod selection;
pub mod synthetic;

pub use config::{DatasetSource, RunConfig};
pub use data::{Dataset, FeatureKind};
pub use experiment::{run_experiment, ExperimentError, ExperimentResult, RunManifest};
pub use selection::{Registry, Selection, SelectionResult, Selector, SelectorKind, SelectorParams};
