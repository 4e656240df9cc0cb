//! Error type shared across the library.

use thiserror::Error;

use crate::experts::ExpertId;
use crate::types::GroupSet;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Losses must lie in [0,1]; out-of-range values are rejected, not clamped.
    #[error("loss {value} for expert {expert} outside [0,1]")]
    LossOutOfRange { expert: ExpertId, value: f64 },

    /// A round violates a structural contract (support mismatch, missing loss, bad timestep).
    #[error("malformed round at t={t}: {reason}")]
    MalformedRound { t: u64, reason: String },

    #[error("empty comparator set")]
    EmptyComparators,

    #[error("unknown expert {0}")]
    UnknownExpert(ExpertId),

    #[error("comparator {expert} asleep at t={t}")]
    ComparatorAsleep { expert: ExpertId, t: u64 },

    #[error("empty awake set at t={t}")]
    EmptyAwakeSet { t: u64 },

    #[error("group index {index} out of range (declared {declared} groups)")]
    GroupOutOfRange { index: u8, declared: u8 },

    #[error("undeclared intersection {profile} at t={t}")]
    UndeclaredIntersection { profile: GroupSet, t: u64 },

    #[error("invalid instance spec: {0}")]
    InvalidSpec(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("hidden set not contained in the group's experts: {0}")]
    HiddenNotInGroup(ExpertId),

    #[error("stream parse error on line {line}: {reason}")]
    StreamParse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
