//! Named experiment presets.

use crate::harness::config::{
    Algorithm, DataConfig, DataSource, ExperimentConfig, Mode, ScenarioSource, SchedulerKind,
};
use crate::learning::{ModelKind, SyntheticConfig, TrainConfig};
use crate::scenario::GenerationConfig;
use crate::{Error, Result};

pub const PRESET_NAMES: [&str; 6] = [
    "fig3-replay",
    "fig3-auto",
    "train20",
    "fig6-full",
    "fig6-partial",
    "relay-stress",
];

/// Generation knobs under which D2D relaying actually happens: a low rate
/// threshold and UD powers spread over six decades, so that slow direct
/// uploads leave fast UDs enough idle time to forward a neighbour's model.
pub fn relay_stress_generation() -> GenerationConfig {
    GenerationConfig {
        rate_threshold_bps: 5.0e6,
        ud_power_w: (1e-6, 3.0),
        p_los: 0.6,
        ..GenerationConfig::default()
    }
}

/// A 10-class Gaussian mixture small enough for quick runs.
pub fn small_synthetic() -> SyntheticConfig {
    SyntheticConfig {
        num_classes: 10,
        num_features: 20,
        train_per_class: 200,
        test_per_class: 100,
        class_spread: 1.0,
        noise_std: 1.0,
    }
}

fn train20() -> ExperimentConfig {
    ExperimentConfig {
        name: "train20".into(),
        mode: Mode::Train,
        scenario: ScenarioSource::Generate(GenerationConfig::default()),
        algorithm: Algorithm::Fedmod,
        scheduler: SchedulerKind::P1p2,
        model: ModelKind::Logistic,
        data: DataConfig {
            dataset: DataSource::Synthetic(SyntheticConfig::default()),
            labels_per_ud: 2,
            labels_per_cluster: 6,
        },
        train: TrainConfig {
            iterations: 200,
            local_iters: 1,
            learning_rate: 0.02,
            ..TrainConfig::default()
        },
        seeds: vec![1],
        out_dir: "results/train20".into(),
        ..ExperimentConfig::default()
    }
}

fn fig6(full: bool) -> ExperimentConfig {
    let mut links = Vec::new();
    for a in 0..5 {
        for b in a + 1..5 {
            // the partial topology drops the link between the first and fourth UAV
            if full || (a, b) != (0, 3) {
                links.push([a, b]);
            }
        }
    }
    let name = if full { "fig6-full" } else { "fig6-partial" };
    ExperimentConfig {
        name: name.into(),
        uav_links: Some(links),
        dissemination_period: 4,
        partial_rounds: 1,
        train: TrainConfig {
            iterations: 100,
            ..train20().train
        },
        out_dir: format!("results/{name}").into(),
        ..train20()
    }
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let cfg = match name {
        "fig3-replay" => ExperimentConfig {
            name: name.into(),
            mode: Mode::Fig3Replay,
            scenario: ScenarioSource::Fig3,
            out_dir: "results/fig3-replay".into(),
            ..ExperimentConfig::default()
        },
        "fig3-auto" => ExperimentConfig {
            name: name.into(),
            mode: Mode::Disseminate,
            scenario: ScenarioSource::Fig3,
            out_dir: "results/fig3-auto".into(),
            ..ExperimentConfig::default()
        },
        "train20" => train20(),
        "fig6-full" => fig6(true),
        "fig6-partial" => fig6(false),
        "relay-stress" => ExperimentConfig {
            name: name.into(),
            scenario: ScenarioSource::Generate(relay_stress_generation()),
            data: DataConfig {
                dataset: DataSource::Synthetic(small_synthetic()),
                ..DataConfig::default()
            },
            train: TrainConfig {
                iterations: 50,
                learning_rate: 0.02,
                ..TrainConfig::default()
            },
            out_dir: "results/relay-stress".into(),
            ..train20()
        },
        other => {
            return Err(Error::Config(format!(
                "unknown preset {other:?}; known presets: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}
