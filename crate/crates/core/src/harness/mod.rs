//! Experiment configs, presets, result files, and comparisons.

pub mod compare;
pub mod config;
pub mod presets;
pub mod run;

pub use compare::{compare, Comparison};
pub use config::{parse_seed_range, Algorithm, ExperimentConfig, Mode, ScenarioSource, SchedulerKind};
pub use presets::{preset, relay_stress_generation, PRESET_NAMES};
pub use run::{run, run_seed, run_seeds, RunSummary, SeedOutcome};
