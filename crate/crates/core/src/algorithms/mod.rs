//! Online learners.
//!
//! Three learners share the [`Learner`] interface: the sleeping-experts
//! algorithm [`anh::AnhLearner`], plain fixed-rate multiplicative weights
//! [`mw::MwLearner`], and the per-intersection ensemble
//! [`ensemble::IntersectionEnsemble`] that runs one multiplicative-weights
//! instance per membership profile with a doubling schedule.

pub mod anh;
pub mod ensemble;
pub mod mw;

use crate::error::Result;
use crate::experts::{ExpertId, ExpertPool};
use crate::types::{Distribution, Round};

/// A sequential learner over an expert pool.
///
/// `predict` must be deterministic given the learner state and inputs, and
/// must not advance the state observable through later predictions; state
/// advances only in `observe`. The phased feedback reductions rely on this:
/// they call `predict` on every round but `observe` only at phase ends.
pub trait Learner {
    fn predict(&mut self, pool: &ExpertPool, round: &Round, awake: &[ExpertId])
        -> Result<Distribution>;

    /// Feeds one observed round: the distribution the learner played (its
    /// own prediction for the round) and the revealed losses in
    /// `round.losses`, over the given awake set.
    fn observe(&mut self, round: &Round, dist: &Distribution, awake: &[ExpertId]) -> Result<()>;
}
