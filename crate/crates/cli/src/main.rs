use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::{error, info};

use semilab_cli::{parse_config, run_experiment};

/// Run one semilab experiment described by a TOML config.
#[derive(Debug, Parser)]
#[command(name = "semilab", version)]
struct Args {
    /// Experiment configuration file.
    config: PathBuf,
    /// Output directory (overrides `output` in the config).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Seed for randomized profile phases and sample points.
    #[arg(long)]
    seed: Option<u64>,
    /// More log output; repeat for more.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only errors.
    #[arg(short, long, conflicts_with = "verbose")]
    quiet: bool,
}

const EXIT_AUDIT_FAILED: u8 = 1;
const EXIT_ERROR: u8 = 2;

fn main() -> ExitCode {
    let args = Args::parse();
    let level = match (args.quiet, args.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        (false, 2) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).init();

    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            error!("reading {}: {e}", args.config.display());
            return ExitCode::from(EXIT_ERROR);
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", args.config.display());
            return ExitCode::from(EXIT_ERROR);
        }
    };
    if let Some(o) = args.output {
        cfg.output = o;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }

    match run_experiment(&cfg) {
        Ok(summary) => {
            print!("{}", summary.render());
            if summary.passed() {
                info!("all audits passed");
                ExitCode::SUCCESS
            } else {
                error!("audit failed");
                ExitCode::from(EXIT_AUDIT_FAILED)
            }
        }
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
