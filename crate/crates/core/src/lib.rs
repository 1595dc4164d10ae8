//! Deterministic, seedable simulator of decentralized federated learning over
//! a UAV relay network.
//!
//! User devices (UDs) train locally and upload to UAVs over radio resource
//! blocks, non line-of-sight devices piggyback on device-to-device relays, and
//! the UAVs reach global model consensus by exchanging XOR-coded cluster
//! models among themselves instead of talking to a central server.
//!
//! Module map:
//! - [`scenario`]: world description, generation, LOS classification, file IO
//! - [`radio`]: path loss, Shannon rates, A2A SINR, common downlink rate
//! - [`graphs`]: conflict graphs and independent-set solvers
//! - [`scheduling`]: UD to UAV/RRB clustering, D2D relay selection, constraint checks
//! - [`dissemination`]: coded UAV-to-UAV model exchange until consensus
//! - [`learning`]: datasets, classifiers, local SGD, aggregation, training loops
//! - [`accounting`]: per-iteration time and energy ledger
//! - [`harness`]: experiment configs, presets, result files, comparisons

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accounting;
pub mod dissemination;
pub mod error;
pub mod graphs;
pub mod harness;
pub mod learning;
pub mod radio;
pub mod scenario;
pub mod scheduling;

pub use error::{Error, Result};
