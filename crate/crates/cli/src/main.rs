use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mph_cli::config::{self, FileConfig, Overrides, RunConfig, SEED_ENV};
use mph_cli::{cmd_compare, cmd_report, cmd_run, cmd_synth, CliError};
use mph_core::synth;
use mph_core::{Family, PredictionMode};

#[derive(Parser)]
#[command(name = "mph", version, about = "Multi-phase hierarchical demand forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run both phases and write tables, traces and report.json.
    Run(RunArgs),
    /// Generate a synthetic hierarchy as a dataset CSV.
    Synth(SynthArgs),
    /// Print a side-by-side table of several report.json files.
    Compare(CompareArgs),
    /// Re-render the tables of a report.json.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset CSV.
    #[arg(long, conflicts_with = "synth")]
    data: Option<PathBuf>,
    /// JSON column schema for --data.
    #[arg(long, requires = "data")]
    schema: Option<PathBuf>,
    /// `benchmark` or a synth TOML file.
    #[arg(long)]
    synth: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of cross-validation folds.
    #[arg(long)]
    k: Option<usize>,
    /// Sampler suggestions per family.
    #[arg(long)]
    n_settings: Option<usize>,
    /// insample or oof.
    #[arg(long)]
    mode: Option<PredictionMode>,
    /// Comma-separated subset of MLP,RF,GB,XGB.
    #[arg(long, value_delimiter = ',')]
    families: Option<Vec<Family>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip the classical univariate baselines.
    #[arg(long)]
    no_baselines: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Synth TOML file; the built-in benchmark when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed of the synth config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    report: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(p) => Some((p.as_path(), FileConfig::load(p)?)),
        None => None,
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let flags = Overrides {
        data: args.data,
        schema: args.schema,
        synth: args.synth,
        seed: args.seed,
        k: args.k,
        n_settings: args.n_settings,
        mode: args.mode,
        families: args.families,
        out: args.out,
        no_baselines: args.no_baselines,
    };
    let config = RunConfig::resolve(file, env_seed.as_deref(), &flags)?;
    let summary = cmd_run(&config)?;
    let p = &summary.report.comparisons.parent;
    println!(
        "MPH MAE {:.2} ({}), top-down {:.2} ({}%), bottom-up {:.2} ({}%)",
        p.mph_mae,
        summary.report.mode.label(),
        p.top_down_mae,
        p.improvement_vs_top_down,
        p.bottom_up_mae,
        p.improvement_vs_bottom_up
    );
    println!("wrote {} files to {}", summary.written.len(), config.out.display());
    Ok(())
}

fn synth_cmd(args: SynthArgs) -> Result<(), CliError> {
    let seed = match args.seed {
        Some(s) => Some(s),
        None => config::parse_env_seed(std::env::var(SEED_ENV).ok().as_deref())?,
    };
    let mut cfg = match &args.config {
        Some(p) => config::load_synth_config(p)?,
        None => synth::default_benchmark_config(
            seed.ok_or_else(|| CliError::Config(format!("no seed given (use --seed or {SEED_ENV})")))?,
        ),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let bundle = cmd_synth(&cfg, &args.out)?;
    println!(
        "wrote {} rows, {} children to {}",
        bundle.n_rows(),
        bundle.n_children(),
        args.out.display()
    );
    Ok(())
}

fn compare(args: CompareArgs) -> Result<(), CliError> {
    let table = cmd_compare(&args.reports)?;
    match args.out {
        Some(path) => std::fs::write(&path, table).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Synth(a) => synth_cmd(a),
        Command::Compare(a) => compare(a),
        Command::Report(a) => cmd_report(&a.report, &a.out).map(|s| {
            println!("wrote {} files", s.written.len());
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
