//! Commands behind the `mph` binary.
//!
//! - [`cmd_run`]: load or generate a hierarchy, run the pipeline and write
//!   the result tables, the trial traces and `report.json`.
//! - [`cmd_synth`]: write a synthetic hierarchy as a dataset CSV.
//! - [`cmd_compare`]: put several `report.json` files side by side.
//! - [`cmd_report`]: re-render the tables of an existing `report.json`.

pub mod config;
pub mod tables;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use mph_core::dataset::{self, ColumnSchema, DatasetError, HierarchyBundle};
use mph_core::hpo::{self, HpoError};
use mph_core::mph::{self, MphError, SeriesResult};
use mph_core::synth::{self, SynthConfig, SynthError};
use mph_core::MphReport;
use thiserror::Error;

pub use config::{DataSource, FileConfig, Overrides, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("config {path}: {message}")]
    ConfigFile { path: String, message: String },
    #[error("data: {0}")]
    Dataset(#[from] DatasetError),
    #[error("synth: {0}")]
    Synth(#[from] SynthError),
    #[error("pipeline: {0}")]
    Pipeline(#[from] MphError),
    #[error("trace export: {0}")]
    Trace(#[from] HpoError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("report {path}: {message}")]
    Report { path: String, message: String },
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Paths written by [`cmd_run`] or [`cmd_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub report: MphReport,
    pub written: Vec<PathBuf>,
}

/// Loads or generates the hierarchy named by a run configuration.
pub fn load_bundle(config: &RunConfig) -> Result<HierarchyBundle> {
    Ok(match &config.data {
        DataSource::Csv { path, schema } => {
            let schema = match schema {
                Some(p) => ColumnSchema::from_json_file(p)?,
                None => ColumnSchema::default(),
            };
            dataset::load_csv(path, &schema)?
        }
        DataSource::Benchmark => synth::generate(&synth::default_benchmark_config(config.seed))?,
        DataSource::Synth(c) => synth::generate(c)?,
    })
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Serializes a report exactly as `report.json` stores it.
pub fn report_json(report: &MphReport) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report).map_err(|e| CliError::Report {
        path: "report.json".into(),
        message: e.to_string(),
    })?;
    text.push('\n');
    Ok(text)
}

pub fn read_report(path: &Path) -> Result<MphReport> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Report {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn write_tables(report: &MphReport, out: &Path) -> Result<Vec<PathBuf>> {
    create_dir(out)?;
    let artifacts = tables::render(report).map_err(|e| CliError::Report {
        path: out.display().to_string(),
        message: e.to_string(),
    })?;
    let mut written = Vec::new();
    for a in artifacts {
        for (ext, body) in [("md", &a.markdown), ("csv", &a.csv)] {
            let path = out.join(format!("{}.{ext}", a.name));
            write_file(&path, body.as_bytes())?;
            written.push(path);
        }
    }
    Ok(written)
}

fn write_traces(dir: &Path, phase: &str, result: &SeriesResult) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (family, trials) in &result.traces {
        let path = dir.join(format!("{phase}_{}_{}.csv", result.series, family.label()));
        let mut buf = Vec::new();
        hpo::write_trace_csv(trials, &mut buf)?;
        write_file(&path, &buf)?;
        written.push(path);
    }
    Ok(written)
}

/// Runs the pipeline and writes every artifact under `config.out`.
pub fn cmd_run(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    let bundle = load_bundle(config)?;
    let report = mph::run_mph(&bundle, &config.mph_config())?;

    let mut written = write_tables(&report, &config.out)?;
    let traces = config.out.join("traces");
    create_dir(&traces)?;
    for child in &report.phase1_children {
        written.extend(write_traces(&traces, "phase1", child)?);
    }
    written.extend(write_traces(&traces, "phase1", &report.phase1_parent)?);
    written.extend(write_traces(&traces, "phase2", &report.phase2_parent)?);

    let json_path = config.out.join("report.json");
    write_file(&json_path, report_json(&report)?.as_bytes())?;
    written.push(json_path);
    Ok(RunSummary { report, written })
}

/// Writes a synthetic hierarchy to `out` in the dataset CSV format.
pub fn cmd_synth(config: &SynthConfig, out: &Path) -> Result<HierarchyBundle> {
    let bundle = synth::generate(config)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    dataset::save_csv(&bundle, out)?;
    Ok(bundle)
}

/// Markdown table comparing the given reports, one column per file.
pub fn cmd_compare(paths: &[PathBuf]) -> Result<String> {
    if paths.is_empty() {
        return Err(CliError::Config("compare needs at least one report".into()));
    }
    let reports = paths
        .iter()
        .map(|p| Ok((p.display().to_string(), read_report(p)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(tables::compare_table(&reports).to_markdown())
}

/// Re-renders the tables of `report` into `out`.
pub fn cmd_report(report: &Path, out: &Path) -> Result<RunSummary> {
    let report = read_report(report)?;
    let written = write_tables(&report, out)?;
    Ok(RunSummary { report, written })
}
