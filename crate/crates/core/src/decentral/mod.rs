//! Decentralized placement on top of a centralized scheme: real users pick
//! one of `K'` virtual caches by two random choices, and delivery runs the
//! centralized scheme once per round of distinct caches.

mod delivery;
mod events;
mod pool;
mod select;

use thiserror::Error;

use crate::codec::CodecError;
use crate::rsgraph::GraphError;

pub use delivery::{
    build_rounds, deliver_decentralized, measure_rate, round_transmissions, DecentralDelivery,
    DecodeFailure, DeliveryPlan, RateReport, RealDemands, Round,
};
pub use events::{
    loads_digest, parse_event_log, replay, run_churn, write_event_log, AuditFailure, Event, Op,
    ReplayAudit,
};
pub use pool::{join_overhead_bits, JoinRecord, LeaveRecord, SlotTable, UserId, VirtualPool};
pub use select::{
    binomial_lambda, kprime_target, select_for_family, select_kprime, FamilyKind, KPrimeChoice,
    Realized,
};

#[derive(Debug, Error)]
pub enum DecentralError {
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("no feasible construction: {0}")]
    NoFeasibleConstruction(String),
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("pool already has users")]
    NotEmpty,
    #[error("no demand for user {0}")]
    MissingDemand(UserId),
    #[error("event log line {line}: {message}")]
    EventLog { line: usize, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}
