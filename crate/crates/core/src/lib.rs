//! Regret minimization for overlapping subgroups.
//!
//! The library runs sleeping-experts and multiplicative-weights learners
//! over adversarial loss streams whose examples belong to overlapping
//! demographic groups, measures overall / subgroup / sleeping regret,
//! simulates one-sided feedback through phased exploration reductions, and
//! audits the incentive properties (individual rationality and incentive
//! compatibility) of the resulting mechanisms.
//!
//! Module map:
//! - [`types`], [`metrics`]: streams, rounds, distributions, and the three
//!   regret notions everything is evaluated against.
//! - [`experts`]: sleeping-expert pools (global rules plus group-gated
//!   copies) and dynamic expert addition.
//! - [`algorithms`]: AdaNormalHedge, fixed-rate multiplicative weights, and
//!   the per-intersection ensemble with doubling.
//! - [`feedback`]: full-feedback runner, the three pay-for-feedback
//!   exploration reductions, and the apple-tasting transformation.
//! - [`environments`]: deterministic and seeded instance generators.
//! - [`audit`]: FPR/FNR rates, the min-max impossibility scan, and IR/IC
//!   gain measurements.
//! - [`report`]: checkpointed regret reports compiled from run histories.

pub mod algorithms;
pub mod audit;
pub mod environments;
pub mod error;
pub mod experts;
pub mod feedback;
pub mod metrics;
pub mod report;
pub mod rng;
pub mod types;

pub use error::{Error, Result};
pub use experts::{build_pool, ActivationRule, ExpertId, ExpertPool};
pub use types::{Distribution, GroupId, GroupSet, History, Label, LossMap, Round, Stream, StreamMeta};
