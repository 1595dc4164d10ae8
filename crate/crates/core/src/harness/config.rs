//! Experiment configuration, loadable from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::learning::{GlobalRule, ModelKind, SyntheticConfig, TrainConfig};
use crate::scenario::GenerationConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Fedmod,
    Star,
    Hfl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerKind {
    #[default]
    P1p2,
    Random,
}

/// What a run does with each seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Schedule, train, and account energy per iteration.
    #[default]
    Train,
    /// Replay the scripted worked example on the five-UAV fixture.
    Fig3Replay,
    /// Run autonomous dissemination on the scenario's UAV network.
    Disseminate,
}

impl Mode {
    /// Modes whose result files share a layout.
    pub fn produces_training_rows(self) -> bool {
        self == Mode::Train
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
#[allow(clippy::large_enum_variant)]
pub enum ScenarioSource {
    /// Drawn with [`crate::scenario::generate`] from the run seed.
    Generate(GenerationConfig),
    /// A scenario TOML file, used as is for every seed.
    File { path: PathBuf },
    /// The five-UAV worked-example fixture.
    Fig3,
}

impl Default for ScenarioSource {
    fn default() -> Self {
        ScenarioSource::Generate(GenerationConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    Synthetic(SyntheticConfig),
    /// IDX files; `max_train` keeps only a prefix of the training set.
    Mnist {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        #[serde(default)]
        max_train: Option<usize>,
    },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SyntheticConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub dataset: DataSource,
    pub labels_per_ud: usize,
    pub labels_per_cluster: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            dataset: DataSource::default(),
            labels_per_ud: 2,
            labels_per_cluster: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub mode: Mode,
    pub scenario: ScenarioSource,
    /// Replaces the scenario's UAV links, e.g. to study topologies.
    pub uav_links: Option<Vec<[usize; 2]>>,
    pub algorithm: Algorithm,
    pub scheduler: SchedulerKind,
    pub dissemination_period: usize,
    /// Coded rounds run on iterations without full dissemination.
    pub partial_rounds: usize,
    /// See [`crate::dissemination::DisseminationPolicy`].
    pub front_runner_priority: bool,
    pub model: ModelKind,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            mode: Mode::Train,
            scenario: ScenarioSource::default(),
            uav_links: None,
            algorithm: Algorithm::Fedmod,
            scheduler: SchedulerKind::P1p2,
            dissemination_period: 1,
            partial_rounds: 1,
            front_runner_priority: true,
            model: ModelKind::Logistic,
            data: DataConfig::default(),
            train: TrainConfig::default(),
            seeds: vec![0],
            out_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.dissemination_period == 0 {
            return Err(Error::Config("dissemination_period must be at least 1".into()));
        }
        if self.mode == Mode::Train {
            self.train.validate()?;
            if let ModelKind::Mlp { hidden: 0 } = self.model {
                return Err(Error::Config("MLP needs at least one hidden unit".into()));
            }
            if matches!(self.scenario, ScenarioSource::Fig3) {
                return Err(Error::Config("the five-UAV fixture has no UDs to train".into()));
            }
        }
        Ok(())
    }

    pub fn strict_global_rule(&mut self) {
        self.train.global_rule = GlobalRule::Strict;
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Parse `A..B` (inclusive) or a single seed.
pub fn parse_seed_range(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("seed range must look like A..B, got {text:?}"));
    match text.split_once("..") {
        Some((a, b)) => {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
            if b < a {
                return Err(bad());
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![text.trim().parse().map_err(|_| bad())?]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut cfg = ExperimentConfig {
            seeds: vec![3, 4],
            model: ModelKind::Mlp { hidden: 8 },
            ..Default::default()
        };
        cfg.strict_global_rule();
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text, Path::new("x.toml")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = ExperimentConfig::from_toml(
            "algorithm = \"star\"\nseeds = [1]\n[scenario]\nsource = \"generate\"\nnum_uds = 8\n",
            Path::new("x.toml"),
        )
        .unwrap();
        assert_eq!(cfg.algorithm, Algorithm::Star);
        match cfg.scenario {
            ScenarioSource::Generate(g) => {
                assert_eq!(g.num_uds, 8);
                assert_eq!(g.num_uavs, 5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(ExperimentConfig::from_toml("algoritm = \"star\"", Path::new("x")).is_err());
        assert!(ExperimentConfig::from_toml("algorithm = \"ring\"", Path::new("x")).is_err());
        assert!(ExperimentConfig::from_toml("dissemination_period = 0", Path::new("x")).is_err());
        assert!(ExperimentConfig::from_toml("seeds = []", Path::new("x")).is_err());
    }

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seed_range("1..5").unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_seed_range("7").unwrap(), vec![7]);
        assert!(parse_seed_range("5..1").is_err());
        assert!(parse_seed_range("a..b").is_err());
    }
}
