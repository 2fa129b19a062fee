use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serls::cli::{self, FitOptions, McOptions, PredictOptions};

#[derive(Parser)]
#[command(name = "serls", version, about = "Score-engineered robust least squares")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the configured model; writes model.json and fit reports.
    Fit {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Marginal contributions for a fitted model.
    Mc {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Output directory (overrides the config).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score a data file with a fitted model.
    Predict {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Scored CSV path.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::parse().command {
        Command::Fit { config, output } => cli::fit(&FitOptions { config, output }).map(|o| {
            println!("wrote {}", o.output_dir.display());
        }),
        Command::Mc { config, model, output } => cli::mc(&McOptions { config, model, output }).map(|o| {
            println!("wrote {}", o.output_dir.display());
        }),
        Command::Predict {
            config,
            model,
            data,
            output,
        } => cli::predict(&PredictOptions {
            config,
            model,
            data,
            output,
        })
        .map(|o| {
            println!("wrote {} ({} rows)", o.output.display(), o.scores.len());
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("serls: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
