//! Run configuration.
//!
//! A run is described by an optional TOML file, the `MPH_SEED` environment
//! variable and command-line flags. Flags win over the environment, which wins
//! over the file. Relative paths inside a file resolve against the file's
//! directory.
//!
//! ```toml
//! seed = 7
//! k = 5
//! mode = "oof"
//! families = ["MLP", "RF", "GB", "XGB"]
//! baselines = true
//! out = "results"
//!
//! [data]
//! synth = "benchmark"   # or a synth TOML path, or `csv = "demand.csv"`
//!
//! [hpo]
//! n_settings = 8
//! ```

use std::path::{Path, PathBuf};

use mph_core::hpo::HpoConfig;
use mph_core::synth::SynthConfig;
use mph_core::{Family, MphConfig, PredictionMode};
use serde::Deserialize;

use crate::CliError;

pub const SEED_ENV: &str = "MPH_SEED";

/// Name accepted for the built-in benchmark generator.
pub const BENCHMARK: &str = "benchmark";

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv { path: PathBuf, schema: Option<PathBuf> },
    /// The default benchmark generator, seeded with the run seed.
    Benchmark,
    Synth(SynthConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: DataSource,
    pub families: Vec<Family>,
    pub hpo: HpoConfig,
    pub k: usize,
    pub seed: u64,
    pub mode: PredictionMode,
    pub baselines: bool,
    pub out: PathBuf,
}

/// On-disk form of a run configuration. Every key is optional.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub mode: Option<String>,
    pub families: Option<Vec<String>>,
    pub baselines: Option<bool>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub data: DataSection,
    pub hpo: Option<HpoConfig>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub csv: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    /// `"benchmark"` or a path to a synth TOML file.
    pub synth: Option<String>,
}

/// Values supplied on the command line.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub synth: Option<String>,
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub n_settings: Option<usize>,
    pub mode: Option<PredictionMode>,
    pub families: Option<Vec<Family>>,
    pub out: Option<PathBuf>,
    pub no_baselines: bool,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = read(path)?;
        toml::from_str(&text).map_err(|e| CliError::ConfigFile {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Reads a synth TOML file.
pub fn load_synth_config(path: &Path) -> Result<SynthConfig, CliError> {
    let text = read(path)?;
    toml::from_str(&text).map_err(|e| CliError::ConfigFile {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn synth_source(name: &str, base: &Path) -> Result<DataSource, CliError> {
    if name == BENCHMARK {
        Ok(DataSource::Benchmark)
    } else {
        load_synth_config(&base.join(name)).map(DataSource::Synth)
    }
}

/// Parses the `MPH_SEED` value, if any.
pub fn parse_env_seed(value: Option<&str>) -> Result<Option<u64>, CliError> {
    value
        .map(|v| {
            v.trim()
                .parse::<u64>()
                .map_err(|_| CliError::Config(format!("{SEED_ENV} = `{v}` is not an unsigned integer")))
        })
        .transpose()
}

impl RunConfig {
    /// Merges file, environment and flags. `file` carries the path it was read
    /// from so relative paths can be resolved.
    pub fn resolve(
        file: Option<(&Path, FileConfig)>,
        env_seed: Option<&str>,
        flags: &Overrides,
    ) -> Result<Self, CliError> {
        let (base, file) = match file {
            Some((path, cfg)) => (path.parent().map(Path::to_path_buf).unwrap_or_default(), cfg),
            None => (PathBuf::new(), FileConfig::default()),
        };
        let cwd = PathBuf::new();

        let seed = flags
            .seed
            .or(parse_env_seed(env_seed)?)
            .or(file.seed)
            .ok_or_else(|| CliError::Config(format!("no seed given (use --seed, {SEED_ENV} or `seed` in the config file)")))?;

        let data = match (&flags.data, &flags.synth) {
            (Some(_), Some(_)) => return Err(CliError::Config("--data and --synth are mutually exclusive".into())),
            (Some(path), None) => DataSource::Csv {
                path: path.clone(),
                schema: flags.schema.clone(),
            },
            (None, Some(name)) => synth_source(name, &cwd)?,
            (None, None) => match (&file.data.csv, &file.data.synth) {
                (Some(_), Some(_)) => {
                    return Err(CliError::Config("[data] sets both `csv` and `synth`".into()));
                }
                (Some(path), None) => DataSource::Csv {
                    path: base.join(path),
                    schema: flags.schema.clone().or_else(|| file.data.schema.as_ref().map(|s| base.join(s))),
                },
                (None, Some(name)) => synth_source(name, &base)?,
                (None, None) => return Err(CliError::Config("no data source (use --data, --synth or [data])".into())),
            },
        };

        let families = match (&flags.families, &file.families) {
            (Some(f), _) => f.clone(),
            (None, Some(names)) => names
                .iter()
                .map(|n| n.parse::<Family>().map_err(|e| CliError::Config(e.to_string())))
                .collect::<Result<_, _>>()?,
            (None, None) => Family::ALL.to_vec(),
        };

        let mode = match (flags.mode, &file.mode) {
            (Some(m), _) => m,
            (None, Some(m)) => m.parse().map_err(CliError::Config)?,
            (None, None) => PredictionMode::OutOfFold,
        };

        let mut hpo = file.hpo.clone().unwrap_or_default();
        if let Some(n) = flags.n_settings {
            hpo.n_settings = n;
        }

        let config = RunConfig {
            data,
            families,
            hpo,
            k: flags.k.or(file.k).unwrap_or(5),
            seed,
            mode,
            baselines: !flags.no_baselines && file.baselines.unwrap_or(true),
            out: flags
                .out
                .clone()
                .or_else(|| file.out.as_ref().map(|o| base.join(o)))
                .unwrap_or_else(|| PathBuf::from("mph-out")),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.mph_config()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn mph_config(&self) -> MphConfig {
        MphConfig {
            families: self.families.clone(),
            hpo: self.hpo.clone(),
            k: self.k,
            seed: self.seed,
            mode: self.mode,
            classical_baselines: self.baselines,
            ..MphConfig::default()
        }
    }
}
