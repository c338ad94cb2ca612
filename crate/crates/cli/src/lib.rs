//! `sara`: refine review dumps, label topics with an LLM, and report metrics and trends.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use sara_core::model::{Platform, Stage};
use sara_core::CoreError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

mod commands;
pub mod config;
pub mod manifest;

pub use config::{GlobalArgs, RunConfig};
pub use manifest::RunManifest;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("input changed during the run: {0}")]
    InputMutated(String),
    #[error("replay diverged from the recorded outputs: {0}")]
    Diverged(String),
    #[error("strict mode: {0}")]
    Strict(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(CoreError::Io { source, .. }) if source.kind() == std::io::ErrorKind::NotFound => 3,
            CliError::Core(CoreError::Invalid(_) | CoreError::Prompt(_)) => 2,
            CliError::Core(_) => 1,
            CliError::Config(_) => 2,
            CliError::MissingInput(_) => 3,
            CliError::Strict(_) => 4,
            CliError::InputMutated(_) => 5,
            CliError::Diverged(_) => 6,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "invalid_config",
            3 => "missing_input",
            4 => "strict_violation",
            5 => "input_mutated",
            6 => "replay_diverged",
            _ => "runtime",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Denominator {
    /// All classified reviews on the platform
    All,
    /// Gen-AI reviews on the platform
    Genai,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Subcommand)]
#[serde(rename_all = "kebab-case", tag = "name")]
pub enum Command {
    /// Validate review and app dumps and write normalized copies plus rejects
    Ingest,
    /// Run the cleaning cascade up to a stage
    Refine {
        /// Overrides --stage
        #[arg(long)]
        to: Option<Stage>,
    },
    /// Draw the large and small sample of every app category
    Sample,
    /// Extract ten topics per category from its large sample
    ExtractTopics,
    /// Assign every review to one of its category's topics or Other
    AssignTopics,
    /// Score assignments against gold labels
    Evaluate {
        /// Defaults to <run_dir>/assignments.csv
        #[arg(long)]
        assignments: Option<PathBuf>,
    },
    /// Category and topic-category tables, or the average row of a published table
    Metrics {
        /// Bundled published table (2)
        #[arg(long)]
        table: Option<u8>,
        /// CSV in the bundled table's layout
        #[arg(long)]
        table_file: Option<PathBuf>,
    },
    /// Yearly topic-category series, clustering and the elbow curve
    Trends,
    /// Developer reply ratios and delays
    Replies {
        /// Bundled published table (9 or 10)
        #[arg(long)]
        table: Option<u8>,
        #[arg(long)]
        table_file: Option<PathBuf>,
    },
    /// Compare topic-category shares across the two stores
    ComparePlatforms {
        /// classified.jsonl from a Google Play run
        #[arg(long)]
        gps: PathBuf,
        /// classified.jsonl from an App Store run
        #[arg(long)]
        astore: PathBuf,
        #[arg(long, value_enum, default_value_t = Denominator::All)]
        denominator: Denominator,
    },
    /// Run every step from raw dumps to trends
    Report,
    /// Write a seeded synthetic app table and review dump
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5000)]
        n_reviews: usize,
        #[arg(long, default_value_t = 3)]
        apps_per_category: usize,
        #[arg(long, default_value_t = 20241001)]
        synth_seed: u64,
        #[arg(long, default_value = "gps")]
        synth_platform: Platform,
    },
    /// Re-execute the run recorded in a manifest
    Replay { manifest: PathBuf },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Refine { .. } => "refine",
            Command::Sample => "sample",
            Command::ExtractTopics => "extract-topics",
            Command::AssignTopics => "assign-topics",
            Command::Evaluate { .. } => "evaluate",
            Command::Metrics { .. } => "metrics",
            Command::Trends => "trends",
            Command::Replies { .. } => "replies",
            Command::ComparePlatforms { .. } => "compare-platforms",
            Command::Report => "report",
            Command::Synth { .. } => "synth",
            Command::Replay { .. } => "replay",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sara", version, about = "Review refinement, LLM topic labeling, metrics and trends")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    match commands::dispatch(&cli) {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            if !out.message.is_empty() {
                println!("{}", out.message);
            }
            0
        }
        Err((e, run_dir)) => {
            let report = serde_json::json!({
                "status": "error",
                "code": e.exit_code(),
                "kind": e.kind(),
                "command": cli.command.name(),
                "message": e.to_string(),
            });
            eprintln!("{report}");
            if let Some(dir) = run_dir {
                let _ = sara_core::io::write_json(&dir.join("error.json"), &report);
            }
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_kind() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::MissingInput("x".into()).exit_code(), 3);
        assert_eq!(CliError::Strict("x".into()).exit_code(), 4);
        assert_eq!(CliError::InputMutated("x".into()).kind(), "input_mutated");
        assert_eq!(CliError::Diverged("x".into()).kind(), "replay_diverged");
        assert_eq!(CliError::Core(CoreError::UnknownTopic("t".into())).exit_code(), 1);
        let nf = CoreError::Io {
            path: "p".into(),
            source: std::io::Error::from(std::io::ErrorKind::NotFound),
        };
        assert_eq!(CliError::from(nf).kind(), "missing_input");
    }

    #[test]
    fn command_round_trips_through_manifest_json() {
        let c = Command::Refine { to: Some(Stage::S2) };
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["name"], "refine");
        assert_eq!(serde_json::from_value::<Command>(v).unwrap(), c);
        assert_eq!(Command::ExtractTopics.name(), "extract-topics");
    }
}
