use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rpu_cli::{cmd_benchmark, cmd_evaluate, cmd_generate, cmd_report, cmd_simulate, CliError, GlobalOpts, ModelSource};

/// Benchmark synthetic trip data for representativeness, privacy and utility.
///
/// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
#[derive(Debug, Parser)]
#[command(name = "rpu", version)]
struct Cli {
    /// TOML benchmark config; the bundled demo world is used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory (default: config `output`, else ./rpu-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the configured simulated world as train/holdout/test CSVs.
    Simulate,
    /// Fit one generator and write a synthetic CSV.
    Generate {
        /// Config model name or generator kind.
        #[arg(long, required_unless_present = "model_file")]
        model: Option<String>,
        /// Sample from a saved model file instead of fitting.
        #[arg(long, conflicts_with = "model")]
        model_file: Option<PathBuf>,
        /// Rows to sample (default: train size).
        #[arg(long)]
        n: Option<usize>,
        /// CSV path (default: <out>/<model>.csv).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write the fitted model to this file.
        #[arg(long)]
        save_model: Option<PathBuf>,
    },
    /// Evaluate synthetic CSVs against the configured real data.
    Evaluate {
        #[arg(required = true)]
        synthetic: Vec<PathBuf>,
    },
    /// Fit, sample and evaluate every configured model.
    Benchmark,
    /// Validate a report.json and print its leaderboard.
    Report {
        /// report.json or the directory holding it (default: <out>).
        path: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let opts = GlobalOpts { config: cli.config, seed: cli.seed, jobs: cli.jobs, out: cli.out };
    match cli.command {
        Command::Report { path } => {
            let out = opts.out.clone().unwrap_or_else(|| PathBuf::from("rpu-out"));
            let text = cmd_report(path.as_deref().unwrap_or(&out), &out)?;
            print!("{text}");
        }
        Command::Simulate => {
            let cfg = opts.config()?;
            for p in cmd_simulate(&cfg, &opts.out_dir(&cfg))? {
                eprintln!("wrote {}", p.display());
            }
        }
        Command::Generate { model, model_file, n, output, save_model } => {
            let cfg = opts.config()?;
            let source = match (model, model_file) {
                (_, Some(f)) => ModelSource::File(f),
                (Some(m), None) => ModelSource::Fit(m),
                (None, None) => return Err(CliError::Usage("--model or --model-file is required".into())),
            };
            let output = output.unwrap_or_else(|| {
                let stem = match &source {
                    ModelSource::Fit(m) => m.clone(),
                    ModelSource::File(f) => f.file_stem().map_or("synthetic".into(), |s| s.to_string_lossy().into_owned()),
                };
                opts.out_dir(&cfg).join(format!("{stem}.csv"))
            });
            let summary = cmd_generate(&cfg, &source, n, &output, save_model.as_deref())?;
            eprintln!("{summary}");
        }
        Command::Evaluate { synthetic } => {
            let cfg = opts.config()?;
            let report = cmd_evaluate(&opts, &cfg, &synthetic, &opts.out_dir(&cfg))?;
            print!("{}", report.leaderboard_text());
        }
        Command::Benchmark => {
            let cfg = opts.config()?;
            let report = cmd_benchmark(&opts, &cfg, &opts.out_dir(&cfg))?;
            print!("{}", report.leaderboard_text());
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
