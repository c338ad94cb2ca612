//! Run configuration: defaults, then the TOML file, then command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use sara_core::llmgate::GateConfig;
use sara_core::model::{Platform, Stage};
use sara_core::pipeline::PipelineConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub reviews: Option<PathBuf>,
    pub apps: Option<PathBuf>,
    pub platform: Platform,
    pub class_map: Option<PathBuf>,
    /// JSON object: app category -> five {text, label} examples.
    pub examples: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    /// CSV review_id,label marking which gold items are informative.
    pub informative: Option<PathBuf>,
}

impl Default for Inputs {
    fn default() -> Self {
        Self {
            reviews: None,
            apps: None,
            platform: Platform::Gps,
            class_map: None,
            examples: None,
            gold: None,
            informative: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run_dir: PathBuf,
    pub mock_llm: bool,
    pub strict: bool,
    pub workers: Option<usize>,
    pub prompts_dir: Option<PathBuf>,
    pub inputs: Inputs,
    pub pipeline: PipelineConfig,
    pub gate: GateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            run_dir: PathBuf::from("run"),
            mock_llm: false,
            strict: false,
            workers: None,
            prompts_dir: None,
            inputs: Inputs::default(),
            pipeline: PipelineConfig::default(),
            gate: GateConfig::default(),
        }
    }
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    /// Parses a config file. Relative paths inside it are taken relative to the file.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.run_dir.is_relative() {
            cfg.run_dir = base.join(&cfg.run_dir);
        }
        for p in [
            &mut cfg.prompts_dir,
            &mut cfg.inputs.reviews,
            &mut cfg.inputs.apps,
            &mut cfg.inputs.class_map,
            &mut cfg.inputs.examples,
            &mut cfg.inputs.gold,
            &mut cfg.inputs.informative,
            &mut cfg.gate.cache_dir,
        ] {
            rebase(base, p);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.pipeline.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.gate.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// Response cache location; defaults to `<run_dir>/cache`.
    pub fn cache_dir(&self) -> PathBuf {
        self.gate.cache_dir.clone().unwrap_or_else(|| self.run_dir.join("cache"))
    }
}

/// Flags shared by every subcommand. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub run_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Target cleaning stage (s0..s3)
    #[arg(long, global = true)]
    pub stage: Option<Stage>,
    /// Few-shot count for topic extraction (0, 3 or 5)
    #[arg(long, global = true)]
    pub shots: Option<u8>,
    /// Restrict topic work to this app category; repeatable
    #[arg(long, global = true)]
    pub category: Vec<String>,
    /// Cap on parallel workers and in-flight LLM requests
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Treat undecided labels as an error
    #[arg(long, global = true)]
    pub strict: bool,
    /// Use the offline deterministic backend instead of the HTTP endpoint
    #[arg(long, global = true)]
    pub mock_llm: bool,
    #[arg(long, global = true)]
    pub reviews: Option<PathBuf>,
    #[arg(long, global = true)]
    pub apps: Option<PathBuf>,
    #[arg(long, global = true)]
    pub platform: Option<Platform>,
    #[arg(long, global = true)]
    pub class_map: Option<PathBuf>,
    #[arg(long, global = true)]
    pub examples: Option<PathBuf>,
    #[arg(long, global = true)]
    pub gold: Option<PathBuf>,
    #[arg(long, global = true)]
    pub informative: Option<PathBuf>,
    #[arg(long, global = true)]
    pub prompts_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
}

impl GlobalArgs {
    /// Applies every flag that was given and returns their names.
    pub fn apply(&self, cfg: &mut RunConfig) -> Vec<String> {
        let mut set = Vec::new();
        macro_rules! take {
            ($flag:expr, $field:expr, $name:literal) => {
                if let Some(v) = &$flag {
                    $field = v.clone().into();
                    set.push($name.to_string());
                }
            };
        }
        take!(self.run_dir, cfg.run_dir, "run_dir");
        take!(self.seed, cfg.pipeline.seed, "seed");
        take!(self.stage, cfg.pipeline.stage, "stage");
        take!(self.shots, cfg.pipeline.shots, "shots");
        take!(self.workers, cfg.workers, "workers");
        take!(self.reviews, cfg.inputs.reviews, "reviews");
        take!(self.apps, cfg.inputs.apps, "apps");
        take!(self.platform, cfg.inputs.platform, "platform");
        take!(self.class_map, cfg.inputs.class_map, "class_map");
        take!(self.examples, cfg.inputs.examples, "examples");
        take!(self.gold, cfg.inputs.gold, "gold");
        take!(self.informative, cfg.inputs.informative, "informative");
        take!(self.prompts_dir, cfg.prompts_dir, "prompts_dir");
        take!(self.cache_dir, cfg.gate.cache_dir, "cache_dir");
        if !self.category.is_empty() {
            cfg.pipeline.categories = self.category.clone();
            set.push("category".into());
        }
        if self.strict {
            cfg.strict = true;
            set.push("strict".into());
        }
        if self.mock_llm {
            cfg.mock_llm = true;
            set.push("mock_llm".into());
        }
        set
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beats_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "run_dir = \"out\"\n[pipeline]\nseed = 7\nshots = 5\n[inputs]\nreviews = \"r.jsonl\"\n[gate]\nbatch_size = 50\n",
        )
        .unwrap();
        let mut cfg = RunConfig::from_file(&path).unwrap();
        assert_eq!(cfg.pipeline.seed, 7);
        assert_eq!(cfg.gate.batch_size, 50);
        assert_eq!(cfg.gate.max_resend_rounds, 5);
        assert_eq!(cfg.inputs.reviews.as_deref(), Some(dir.path().join("r.jsonl").as_path()));
        let flags = GlobalArgs {
            seed: Some(9),
            ..GlobalArgs::default()
        };
        assert_eq!(flags.apply(&mut cfg), vec!["seed"]);
        assert_eq!(cfg.pipeline.seed, 9);
        assert_eq!(cfg.pipeline.shots, 5);
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "[pipeline]\nsheds = 3\n").unwrap();
        assert!(matches!(RunConfig::from_file(&path), Err(CliError::Config(_))));
    }

    #[test]
    fn invalid_shots_fail_validation() {
        let mut cfg = RunConfig::default();
        cfg.pipeline.shots = 2;
        assert!(cfg.validate().is_err());
    }
}
