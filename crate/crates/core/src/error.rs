use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("UD {ud} has no line of sight to UAV {uav}")]
    NonLos { ud: usize, uav: usize },

    #[error("UD {rx} is outside the D2D coverage zone of UD {tx} ({distance_m:.1} m > {radius_m:.1} m)")]
    OutOfZone {
        tx: usize,
        rx: usize,
        distance_m: f64,
        radius_m: f64,
    },

    #[error("UAVs {0} and {1} are not adjacent")]
    NotAdjacent(usize, usize),

    #[error("no rate configured for UAV link {0} -> {1}")]
    MissingRate(usize, usize),

    #[error("empty cluster at UAV {0}")]
    EmptyCluster(usize),

    #[error("graph has {size} vertices, brute force is limited to {limit}")]
    SizeBound { size: usize, limit: usize },

    #[error(
        "dissemination stalled at round {round}: no schedulable transmission while UAVs {waiting:?} still miss models"
    )]
    ProtocolStall { round: usize, waiting: Vec<usize> },

    #[error("UAV graph is disconnected; unreachable from UAV 0: {unreachable:?}")]
    Unreachable { unreachable: Vec<usize> },

    #[error("conflict resolution did not converge within {0} passes")]
    NonConvergence(usize),

    #[error("packet from UAV {tx} is not decodable at UAV {target}: {unknown} unknown models in payload")]
    NotDecodable { tx: usize, target: usize, unknown: usize },

    #[error("model dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("result schema mismatch: {0}")]
    Schema(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
