mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;

#[derive(Parser, Debug)]
#[command(name = "iosynth", version, about = "Program synthesis from input/output examples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the benchmark and export tasks plus manifest.
    Gen {
        #[arg(long, default_value = "benchmark")]
        out: PathBuf,
    },
    /// Run a suite under one mode.
    Run(RunArgs),
    /// Let the model choose its own examples.
    Autonomous(RunArgs),
    /// Merge run directories into one report.
    Report {
        dirs: Vec<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
}

/// Flags win over the config file.
#[derive(Args, Debug, Default)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// dio, ablate-ce, ablate-tpp, ablate-ef, flat, direct, bon or sc
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub mock: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated task ids.
    #[arg(long, value_delimiter = ',')]
    pub tasks: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub islands: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub stages: Option<usize>,
    /// Samples per task for bon and sc.
    #[arg(long)]
    pub samples: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Gen { out } => commands::gen(&out),
        Command::Run(args) => commands::run(&args, false),
        Command::Autonomous(args) => commands::run(&args, true),
        Command::Report { dirs, out } => commands::report(&dirs, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure {
            code,
            component,
            message,
        }) => {
            eprintln!("iosynth: {component}: {message}");
            ExitCode::from(code)
        }
    }
}
