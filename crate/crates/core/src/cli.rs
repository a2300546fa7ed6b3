//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 on data,
//! artifact or training errors.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::PipelineConfig;
use crate::error::Error;
use crate::pipeline::Workspace;

#[derive(Debug, Parser)]
#[command(name = "soccer-summary", version, about = "Soccer match summarization from event data and audio")]
pub struct Cli {
    /// key = value configuration file (supports `include <path>`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, global = true, default_value = "run")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    GenData {
        /// Render procedural audio to WAV files.
        #[arg(long)]
        wav: bool,
    },
    /// Fit the metadata feature encoder.
    ExtractFeatures,
    /// Train the stage-1 proposal model per fold.
    TrainProposals,
    /// Score every event with the stage-1 model.
    ScoreEvents,
    /// Threshold event scores into action proposals.
    ExtractProposals,
    /// Train the stage-2 attention model per fold.
    TrainHma,
    /// Score proposals and emit sampled candidate summaries.
    Summarize,
    /// Aggregate the test shards and write result tables.
    Evaluate,
    /// Run every stage in order.
    E2e,
    /// Print every configuration key with its resolved value.
    ShowConfig,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match PipelineConfig::load(cli.config.as_deref(), std::env::vars()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return match e {
                Error::Io { .. } | Error::Parse { .. } => EXIT_USAGE,
                other => exit_code(&other),
            };
        }
    };
    if cli.jobs == 0 {
        eprintln!("error: --jobs must be at least 1");
        return EXIT_USAGE;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {} worker threads: {e}", cli.jobs);
            return EXIT_DATA;
        }
    };
    let ws = Workspace::new(cli.out_dir, cfg, cli.seed);
    let result = pool.install(|| match cli.command {
        Command::GenData { wav } => ws.gen_data_with(wav).map(drop),
        Command::ExtractFeatures => ws.extract_features(),
        Command::TrainProposals => ws.train_proposals(),
        Command::ScoreEvents => ws.score_events(),
        Command::ExtractProposals => ws.extract_proposals(),
        Command::TrainHma => ws.train_hma(),
        Command::Summarize => ws.summarize(),
        Command::Evaluate => ws.evaluate().map(drop),
        Command::E2e => ws.e2e().map(drop),
        Command::ShowConfig => {
            println!("# config_hash={}", ws.cfg.hash());
            for (k, v) in ws.cfg.keys() {
                println!("{k} = {v}");
            }
            Ok(())
        }
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["soccer-summary"]), EXIT_USAGE);
        assert_eq!(run(["soccer-summary", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["soccer-summary", "--jobs", "x", "evaluate"]), EXIT_USAGE);
    }

    #[test]
    fn missing_artifacts_exit_two() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(run(["soccer-summary", "--out-dir", out, "evaluate"]), EXIT_DATA);
    }

    #[test]
    fn global_flags_parse_after_the_subcommand() {
        let c = Cli::try_parse_from(["soccer-summary", "e2e", "--seed", "7", "--jobs", "3"]).unwrap();
        assert_eq!((c.seed, c.jobs), (7, 3));
        assert!(matches!(c.command, Command::E2e));
    }
}
