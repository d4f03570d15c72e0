use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use centroid_htc::inference::DEFAULT_TOP_K;
use centroid_htc::pipeline::{PreprocessConfig, SplitSpec, SynthSpec};
use centroid_htc::workflow::BenchConfig;
use centroid_htc::ModelConfig;

use crate::UsageError;

pub const DEFAULT_SEED: u64 = 42;

/// Everything a run depends on. Loaded from TOML, then overridden by flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub top_k: usize,
    pub runs: usize,
    pub model: ModelConfig,
    pub preprocess: PreprocessConfig,
    pub split: SplitSpec,
    pub synth: SynthSpec,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            top_k: DEFAULT_TOP_K,
            runs: 1,
            model: ModelConfig::default(),
            preprocess: PreprocessConfig::default(),
            split: SplitSpec::default(),
            synth: SynthSpec::default(),
            bench: BenchConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(file: Option<&Path>, seed: Option<u64>) -> Result<Self> {
        let mut config = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(seed) = seed {
            config.seed = seed;
        }
        config.apply_seed();
        Ok(config)
    }

    /// The run seed drives every seeded component.
    pub fn apply_seed(&mut self) {
        self.model.seed = self.seed;
        self.split.seed = self.seed;
        self.synth.seed = self.seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.split.validate()?;
        if self.top_k == 0 {
            return Err(UsageError("top_k must be at least 1".into()).into());
        }
        if self.runs == 0 {
            return Err(UsageError("runs must be at least 1".into()).into());
        }
        Ok(())
    }

    pub fn log(&self, command: &str) {
        match serde_json::to_string(self) {
            Ok(json) => log::info!("{command}: resolved config {json}"),
            Err(e) => log::warn!("{command}: could not serialise config: {e}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_flag_overrides_file_and_propagates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "seed = 7\ntop_k = 5\n[model]\nscoring = \"weighted\"\n").unwrap();
        let c = RunConfig::load(Some(&path), None).unwrap();
        assert_eq!((c.seed, c.model.seed, c.split.seed, c.top_k), (7, 7, 7, 5));
        let c = RunConfig::load(Some(&path), Some(9)).unwrap();
        assert_eq!((c.seed, c.synth.seed), (9, 9));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "seeed = 7\n").unwrap();
        let err = RunConfig::load(Some(&path), None).unwrap_err();
        assert!(err.downcast_ref::<UsageError>().is_some());
    }

    #[test]
    fn defaults_serialise_fully() {
        let json = serde_json::to_value(RunConfig::default()).unwrap();
        assert_eq!(json["model"]["rrf_k"], 40.0);
        assert_eq!(json["split"]["train"], 0.8);
        assert_eq!(json["top_k"], 3);
    }
}
