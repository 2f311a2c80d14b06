//! The experiment runner behind the `galelab` binary: JSON configs, registries,
//! and the trace, dimest, p2s, selective and liftpair commands.

mod commands;
mod config;

use std::path::Path;

pub use commands::{
    cmd_dimest, cmd_liftpair, cmd_p2s, cmd_selective, cmd_trace, estimate_dimension, p2s_report, Estimate, LiftReport,
    Outcome, P2sCell, P2sReport, TraceRecord,
};
pub use config::{apply_stage, is_martingale, Entry, ExperimentConfig, GridSpec, Stage, DEFAULT_N, DEFAULT_POLICY_C, DEFAULT_THRESHOLD};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Trace,
    Dimest,
    P2s,
    Selective,
    Liftpair,
}

/// Runs a command, writing its outputs into `out` (created if needed).
pub fn run(command: Command, config: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(out)?;
    match command {
        Command::Trace => cmd_trace(config, out),
        Command::Dimest => cmd_dimest(config, out),
        Command::P2s => cmd_p2s(config, out),
        Command::Selective => cmd_selective(config, out),
        Command::Liftpair => cmd_liftpair(config, out),
    }
}

/// 0 when every check passed, 2 on a property violation, 1 on usage or config errors.
pub fn exit_code(result: &Result<Outcome>) -> u8 {
    match result {
        Ok(outcome) => outcome.exit_code(),
        Err(
            Error::Disjointness { .. }
            | Error::ThresholdViolated { .. }
            | Error::SelectorContract { .. }
            | Error::ReductionBound { .. }
            | Error::PolicyViolation { .. },
        ) => 2,
        Err(_) => 1,
    }
}
