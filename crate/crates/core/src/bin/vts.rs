use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vts_core::config::RunConfig;
use vts_core::pipeline::{self, output_dir};
use vts_core::quality::SelectionPolicy;
use vts_core::simkit::ScenarioSpec;
use vts_core::{Error, Result};

/// Recognize-once video text spotting.
///
/// Worker threads can be capped with the VTS_THREADS environment variable.
#[derive(Parser)]
#[command(name = "vts", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario from a spec file.
    Sim {
        /// Scenario spec (TOML); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Refine confidence maps and extract text quads.
    Detect {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        window_n: Option<usize>,
    },
    /// Track regions, score quality and pick one region per stream.
    Spot {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = parse_policy)]
        policy: Option<SelectionPolicy>,
    },
    /// Score a run against ground truth.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_policy(s: &str) -> std::result::Result<SelectionPolicy, String> {
    s.parse()
}

fn run_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => {
            let cwd = std::env::current_dir().map_err(|e| Error::io(".", e))?;
            Ok(RunConfig::with_base(&cwd))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sim { config, out, seed } => {
            let mut spec = match &config {
                Some(p) => pipeline::load_spec(p)?,
                None => ScenarioSpec::default(),
            };
            if let Some(s) = seed {
                spec.seed = s;
            }
            let n = pipeline::run_sim(&spec, &out)?;
            println!("wrote {n} observations to {}", out.display());
        }
        Command::Detect { config, out, window_n } => {
            let mut cfg = run_config(config.as_deref())?;
            if let Some(n) = window_n {
                cfg.detector.window_n = n;
            }
            let out = output_dir(&cfg, out.as_deref());
            let pool = pipeline::thread_pool()?;
            for (frame, count) in pipeline::run_detect(&cfg, &out, &pool)? {
                println!("frame {frame}: {count}");
            }
        }
        Command::Spot { config, out, policy } => {
            let mut cfg = run_config(config.as_deref())?;
            if let Some(p) = policy {
                cfg.recommender.policy = p;
            }
            let out = output_dir(&cfg, out.as_deref());
            let pool = pipeline::thread_pool()?;
            print!("{}", pipeline::run_spot(&cfg, &out, &pool)?.to_text());
        }
        Command::Eval { config, out } => {
            let cfg = run_config(config.as_deref())?;
            let out = output_dir(&cfg, out.as_deref());
            print!("{}", pipeline::run_eval(&cfg, &out)?.to_report());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
