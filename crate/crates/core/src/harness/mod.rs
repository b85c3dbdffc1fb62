//! Seeded experiment orchestration and report emission.

mod demand;
mod experiments;
mod report;

use thiserror::Error;

use crate::ballsbins::BinsError;
use crate::codec::CodecError;
use crate::decentral::DecentralError;
use crate::rsgraph::GraphError;

pub use demand::{generate_demands, DemandGen};
pub use experiments::{
    centralized_transmissions, construct, run_ballsbins, run_centralized, run_churn,
    run_decentralized, write_series, BallsBinsConfig, BinsMode, CentralizedConfig, ChurnConfig,
    ChurnOutcome, DecentralizedConfig,
};
pub use report::{Aggregate, ExperimentReport, OutputFormat, Status, TrialRecord, REPORT_SCHEMA};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Decentral(#[from] DecentralError),
    #[error(transparent)]
    Bins(#[from] BinsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `index` under `master`: `splitmix64(master ^ splitmix64(index))`.
///
/// Depends only on the pair, so trials can run in any order or in parallel.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

/// Independent sub-stream seeds of one trial (library content, demands).
pub(crate) fn sub_seed(trial: u64, stream: u64) -> u64 {
    splitmix64(trial ^ stream.wrapping_mul(0xA076_1D64_78BD_642F))
}
