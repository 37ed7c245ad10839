//! The run configuration: a TOML file whose sections mirror the library's
//! config types. Every key has a default, so an empty file is valid.

use std::path::{Path, PathBuf};

use motifdiff::denoiser::{DenoiserConfig, TrainConfig};
use motifdiff::diffusion::{Estimator, NoiseSchedule};
use motifdiff::eval::MissingPolicy;
use motifdiff::sampling::{SampleConfig, SampleMethod};
use motifdiff::Alphabet;
use serde::{Deserialize, Serialize};

use crate::fail::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker cap; resolved from the flag, then this key, then the
    /// environment, then the machine.
    pub threads: Option<usize>,
    pub dataset: Option<PathBuf>,
    pub estimator: Estimator,
    pub synth: SynthSection,
    pub sample: SampleSection,
    pub schedule: NoiseSchedule,
    pub digress: DigressSection,
    pub denoiser: DenoiserSection,
    pub train: TrainConfig,
    pub score: ScoreSection,
    pub search: SearchSection,
    pub evaluate: EvaluateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: None,
            dataset: None,
            estimator: Estimator::Disco,
            synth: SynthSection::default(),
            sample: SampleSection::default(),
            schedule: NoiseSchedule::default(),
            digress: DigressSection::default(),
            denoiser: DenoiserSection::default(),
            train: TrainConfig::default(),
            score: ScoreSection::default(),
            search: SearchSection::default(),
            evaluate: EvaluateSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub num_graphs: usize,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub edge_density: f64,
    pub node_classes: usize,
    pub edge_classes: usize,
    /// Planted motifs read from a graph-set file; when absent,
    /// `random_motifs` connected DAGs of `motif_size` nodes are drawn.
    pub motif_file: Option<PathBuf>,
    pub random_motifs: usize,
    pub motif_size: usize,
    pub motif_rate: f64,
    pub node_class_weights: Option<Vec<f64>>,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            num_graphs: 200,
            min_nodes: 12,
            max_nodes: 16,
            edge_density: 0.1,
            node_classes: 4,
            edge_classes: 2,
            motif_file: None,
            random_motifs: 2,
            motif_size: 4,
            motif_rate: 0.8,
            node_class_weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSection {
    pub method: String,
    pub k: usize,
    pub tc: usize,
    pub r: f64,
    pub depth_probs: Option<Vec<f64>>,
}

impl Default for SampleSection {
    fn default() -> Self {
        Self {
            method: "rand-esu".into(),
            k: 4,
            tc: 2000,
            r: 0.0,
            depth_probs: None,
        }
    }
}

impl SampleSection {
    pub fn to_config(&self, seed: u64) -> CliResult<SampleConfig> {
        let method: SampleMethod = self.method.parse()?;
        let cfg = SampleConfig {
            method,
            k: self.k,
            tc: self.tc,
            r: self.r,
            depth_probs: self.depth_probs.clone(),
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DigressSection {
    pub steps: usize,
}

impl Default for DigressSection {
    fn default() -> Self {
        Self { steps: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiserSection {
    pub hidden: usize,
    pub layers: usize,
    pub time_dim: usize,
    pub max_level: usize,
    pub lambda: f64,
}

impl Default for DenoiserSection {
    fn default() -> Self {
        let d = DenoiserConfig::new(Alphabet::new(1, 2).expect("valid alphabet"));
        Self {
            hidden: d.hidden,
            layers: d.layers,
            time_dim: d.time_dim,
            max_level: d.max_level,
            lambda: d.lambda,
        }
    }
}

impl DenoiserSection {
    pub fn to_config(&self, alphabet: Alphabet, seed: u64) -> CliResult<DenoiserConfig> {
        let cfg = DenoiserConfig {
            alphabet,
            hidden: self.hidden,
            layers: self.layers,
            time_dim: self.time_dim,
            max_level: self.max_level,
            lambda: self.lambda,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreSection {
    /// Monte Carlo trials per graph.
    pub trials: usize,
}

impl Default for ScoreSection {
    fn default() -> Self {
        Self { trials: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub k_max: usize,
    pub width: usize,
    pub trials: usize,
    pub instance_cap: usize,
    /// Only patterns whose node classes all lie in this set are kept.
    pub allowed_node_classes: Option<Vec<usize>>,
    /// How many of the final beam's patterns to count exactly.
    pub verify_top: usize,
    pub cutoff_secs: f64,
}

impl Default for SearchSection {
    fn default() -> Self {
        Self {
            k_max: 6,
            width: 50,
            trials: 20,
            instance_cap: 5000,
            allowed_node_classes: None,
            verify_top: 50,
            cutoff_secs: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub k: usize,
    /// `zero-fill` or `require`.
    pub missing: String,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self {
            k: 4,
            missing: "zero-fill".into(),
        }
    }
}

impl EvaluateSection {
    pub fn policy(&self) -> CliResult<MissingPolicy> {
        match self.missing.as_str() {
            "zero-fill" => Ok(MissingPolicy::ZeroFill),
            "require" => Ok(MissingPolicy::Require),
            other => Err(CliError::usage(format!(
                "evaluate.missing must be `zero-fill` or `require`, got `{other}`"
            ))),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn threads(&self) -> usize {
        self.threads.unwrap_or(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults_and_round_trips() {
        let c: RunConfig = toml::from_str("").unwrap();
        assert_eq!(c, RunConfig::default());
        let again: RunConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let c: RunConfig = toml::from_str("[train]\nepochs = 3\n[schedule]\nsteps = 8\n").unwrap();
        assert_eq!(c.train.epochs, 3);
        assert_eq!(c.train.batch_size, TrainConfig::default().batch_size);
        assert_eq!(c.schedule.steps, 8);
        assert_eq!(c.schedule.alpha, NoiseSchedule::default().alpha);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[train]\nepoch = 3\n").is_err());
    }
}
