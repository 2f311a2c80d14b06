use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use galelab::experiment::{exit_code, run, Command, ExperimentConfig};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Trace,
    Dimest,
    P2s,
    Selective,
    Liftpair,
}

/// Exact gale experiments: capital traces, dimension estimates, the oracle
/// min-sup table, the selective strategy and the pair lift.
#[derive(Parser, Debug)]
#[command(name = "galelab", version)]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the config's out_dir, else ./out).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let mut config = match ExperimentConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("galelab: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = cli.out.or_else(|| config.out_dir.as_ref().map(|p| config.base_dir.join(p))).unwrap_or_else(|| "out".into());
    let command = match cli.command {
        Cmd::Trace => Command::Trace,
        Cmd::Dimest => Command::Dimest,
        Cmd::P2s => Command::P2s,
        Cmd::Selective => Command::Selective,
        Cmd::Liftpair => Command::Liftpair,
    };
    let result = run(command, &config, &out);
    match &result {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            for v in &outcome.violations {
                eprintln!("violation: {v}");
            }
        }
        Err(e) => eprintln!("galelab: {e}"),
    }
    ExitCode::from(exit_code(&result))
}
