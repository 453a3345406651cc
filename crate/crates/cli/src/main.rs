mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use liqcast::{Error, ErrorKind};

#[derive(Parser, Debug)]
#[command(name = "liqcast", version, about = "Liquidity-aware price forecasting pipeline")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated families to run (linear,rf,xgb,lstm).
    #[arg(long, global = true, value_delimiter = ',')]
    pub families: Option<Vec<String>>,
    /// Drop the VVR and VWAP columns.
    #[arg(long, global = true)]
    pub no_liquidity: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse an OHLCV CSV, apply the gap policy and write canonical candles.
    Ingest {
        /// Input CSV (overrides the config data path).
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Distribution summaries of every OHLCV field.
    Stats {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
    /// Build the feature table and its schema sidecar.
    Features {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Fit the configured families and persist the models.
    Train,
    /// Score persisted models on the validation and test blocks.
    Evaluate,
    /// Train every family with and without the liquidity columns.
    Ablate,
    /// Predict closes from a saved model and a feature CSV.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
    },
    /// Collect plot-ready CSVs from a finished run directory.
    ExportPlots {
        /// Run directory to read; defaults to the output directory.
        #[arg(long)]
        from: Option<PathBuf>,
    },
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numerical => 3,
    }
}

fn kind_name(kind: ErrorKind) -> &'static str {
    match kind {
        ErrorKind::Usage => "usage",
        ErrorKind::Data => "data",
        ErrorKind::Numerical => "numerical",
    }
}

fn report_error(command: &str, e: &Error) -> ExitCode {
    let code = exit_code(e.kind());
    let mut record = serde_json::json!({
        "error": {
            "command": command,
            "kind": kind_name(e.kind()),
            "exit_code": code,
            "message": e.to_string(),
        }
    });
    if let Error::FileNotFound(p) | Error::Io { path: p, .. } | Error::Locked(p) = e {
        record["error"]["path"] = serde_json::Value::String(p.display().to_string());
    }
    eprintln!("{record}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let rec = serde_json::json!({
                "error": { "command": "", "kind": "usage", "exit_code": 1, "message": e.to_string() }
            });
            eprintln!("{rec}");
            return ExitCode::from(1);
        }
    };
    let (name, result) = match cli.command {
        Command::Ingest { input } => ("ingest", commands::ingest(&cli.global, input)),
        Command::Stats { input, bins } => ("stats", commands::stats(&cli.global, input, bins)),
        Command::Features { input } => ("features", commands::features(&cli.global, input)),
        Command::Train => ("train", commands::train(&cli.global)),
        Command::Evaluate => ("evaluate", commands::evaluate(&cli.global)),
        Command::Ablate => ("ablate", commands::ablate(&cli.global)),
        Command::Predict { model, features } => ("predict", commands::predict(&cli.global, &model, &features)),
        Command::ExportPlots { from } => ("export-plots", commands::export_plots(&cli.global, from)),
    };
    match result {
        Ok(summary) => {
            use std::io::Write;
            // A closed pipe on stdout is not a failure of the command.
            let _ = writeln!(std::io::stdout(), "{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => report_error(name, &e),
    }
}
