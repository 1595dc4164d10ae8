//! Datasets, models, local training, aggregation, and the training loops.

pub mod aggregate;
pub mod data;
pub mod mnist;
pub mod model;
pub mod monitors;
pub mod train;

pub use aggregate::{cluster_aggregate, global_aggregate, GlobalRule, ModelVector, Owner};
pub use data::{partition_noniid, synthetic, Dataset, Partition, SyntheticConfig};
pub use model::{ModelKind, ModelSpec};
pub use monitors::{convergence_monitors, MonitorReport};
pub use train::{run_fedmod, run_hfl, run_star, FedModConfig, FlProblem, IterationRecord, TrainConfig, TrainHistory};
