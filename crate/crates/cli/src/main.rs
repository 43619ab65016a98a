use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pdrssn::experiments::{run_experiment, write_datasets, ExperimentConfig, ExperimentError, ExperimentSummary};

/// Manifold-valued TV denoising experiments.
#[derive(Parser, Debug)]
#[command(name = "pdrssn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the data sets of an experiment as JSON.
    Gen(Common),
    /// Run an experiment and write traces and a summary.
    Run(Common),
    /// Print the summary table of a finished experiment.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory of the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct ReportArgs {
    /// Output directory of a previous run.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Configuration whose output directory is reported.
    #[arg(long)]
    config: Option<PathBuf>,
}

const EXIT_RUN_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn fail(e: &ExperimentError) -> ExitCode {
    eprintln!("error: {e}");
    if e.is_config() {
        ExitCode::from(EXIT_CONFIG)
    } else {
        ExitCode::from(EXIT_RUN_FAILED)
    }
}

fn load(args: &Common) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = Some(out.clone());
    }
    Ok(cfg)
}

fn gen(args: &Common) -> ExitCode {
    let cfg = match load(args) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    match write_datasets(&cfg, &cfg.output_dir()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn run(args: &Common) -> ExitCode {
    let cfg = match load(args) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let report = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    print!("{}", report.summary.table());
    println!("written to {}", cfg.output_dir().display());
    if report.summary.has_errors() {
        ExitCode::from(EXIT_RUN_FAILED)
    } else {
        ExitCode::SUCCESS
    }
}

fn report(args: &ReportArgs) -> ExitCode {
    let dir = match (&args.out, &args.config) {
        (Some(d), _) => d.clone(),
        (None, Some(c)) => match ExperimentConfig::load(c) {
            Ok(cfg) => cfg.output_dir(),
            Err(e) => return fail(&e),
        },
        (None, None) => unreachable!("clap requires one of --out and --config"),
    };
    match ExperimentSummary::load(&dir.join("summary.json")) {
        Ok(s) => {
            print!("{}", s.table());
            if s.has_errors() {
                ExitCode::from(EXIT_RUN_FAILED)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => fail(&e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Run(a) => run(a),
        Command::Report(a) => report(a),
    }
}
