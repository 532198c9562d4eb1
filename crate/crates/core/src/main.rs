use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use grf_tomo::app::{self, Command, RunOptions};

/// Noise propagation through discrete cone-beam local tomography.
#[derive(Parser)]
#[command(name = "grf-tomo", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Predicted covariance of the limiting random field.
    Predict(Opts),
    /// Monte-Carlo reconstruction of pure noise and its statistics.
    Simulate(Opts),
    /// Geometry identities, zero-set checks and Weyl sums.
    Check(Opts),
}

#[derive(Args)]
struct Opts {
    /// JSON config; `paper.json` and `ci.json` resolve to bundled presets
    /// when no such file exists.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: hardware parallelism).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 4 when an acceptance threshold fails.
    #[arg(long)]
    assert: bool,
}

fn short(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-3 {
        format!("{v:.3e}")
    } else {
        format!("{v:.6}")
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (cmd, o) = match cli.command {
        Cmd::Predict(o) => (Command::Predict, o),
        Cmd::Simulate(o) => (Command::Simulate, o),
        Cmd::Check(o) => (Command::Check, o),
    };
    let opts = RunOptions {
        config: o.config,
        seed: o.seed,
        threads: o.threads,
        realizations: o.realizations,
        out: o.out,
        assert: o.assert,
    };
    match app::run(cmd, &opts) {
        Ok(m) => {
            println!("{}", serde_json::to_string_pretty(&m.metrics).unwrap_or_default());
            for a in &m.assertions {
                println!("{} {} = {} ({})", if a.pass { "PASS" } else { "FAIL" }, a.name, short(a.value), a.threshold);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("grf-tomo: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
