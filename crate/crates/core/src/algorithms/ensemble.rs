//! Per-intersection multiplicative weights with a doubling schedule.
//!
//! One multiplicative-weights sub-learner runs per membership profile S
//! (the exact set of groups an example belongs to). A round is routed to
//! the single sub-learner keyed by its profile; no other sub-learner sees
//! it. Each sub-learner's roster is the set of experts that fire on its
//! profile — the global experts plus every group copy for g ∈ S.
//!
//! Horizon guesses double: a sub-learner assumes its profile holds 2^r
//! rounds (initial r = 2) and runs with η = √(log N / 2^r); once it has
//! been routed 2^r rounds it restarts with weights 1, r+1, and the
//! recomputed rate. A roster change (an expert appearing mid-run) also
//! restarts the affected sub-learner from fresh weights.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::experts::{ExpertId, ExpertPool};
use crate::types::{Distribution, GroupSet, Round};

use super::mw::{eta_schedule, MwLearner};
use super::Learner;

/// Initial doubling exponent: a new sub-learner guesses 2^2 rounds.
pub const INITIAL_DOUBLING_EXPONENT: u32 = 2;

#[derive(Debug, Clone)]
struct SubLearner {
    mw: MwLearner,
    /// Doubling exponent r; horizon guess is 2^r.
    exponent: u32,
    /// Rounds routed here since the last restart.
    routed: u64,
}

impl SubLearner {
    fn new(roster: Vec<ExpertId>, exponent: u32) -> Result<SubLearner> {
        let eta = eta_schedule(roster.len(), 1u64 << exponent);
        Ok(SubLearner { mw: MwLearner::new(roster, eta)?, exponent, routed: 0 })
    }
}

#[derive(Debug, Clone, Default)]
pub struct IntersectionEnsemble {
    subs: BTreeMap<GroupSet, SubLearner>,
}

impl IntersectionEnsemble {
    pub fn new() -> IntersectionEnsemble {
        IntersectionEnsemble::default()
    }

    /// Sub-learner weight inspection for tests.
    pub fn sub_weight(&self, profile: GroupSet, id: ExpertId) -> Option<f64> {
        self.subs.get(&profile).and_then(|s| s.mw.weight(id))
    }

    pub fn sub_exponent(&self, profile: GroupSet) -> Option<u32> {
        self.subs.get(&profile).map(|s| s.exponent)
    }

    pub fn sub_eta(&self, profile: GroupSet) -> Option<f64> {
        self.subs.get(&profile).map(|s| s.mw.eta())
    }

    pub fn n_subs(&self) -> usize {
        self.subs.len()
    }

    fn sub_for(&mut self, profile: GroupSet, awake: &[ExpertId], t: u64) -> Result<&mut SubLearner> {
        if awake.is_empty() {
            return Err(Error::EmptyAwakeSet { t });
        }
        let needs_rebuild = match self.subs.get(&profile) {
            Some(sub) => sub.mw.roster() != awake,
            None => true,
        };
        if needs_rebuild {
            let exponent = self
                .subs
                .get(&profile)
                .map(|s| s.exponent)
                .unwrap_or(INITIAL_DOUBLING_EXPONENT);
            self.subs.insert(profile, SubLearner::new(awake.to_vec(), exponent)?);
        }
        Ok(self.subs.get_mut(&profile).expect("just inserted"))
    }

    /// Predict-then-update convenience for full-feedback use.
    pub fn step(&mut self, pool: &ExpertPool, round: &Round) -> Result<Distribution> {
        let awake = pool.awake_set(round);
        let dist = Learner::predict(self, pool, round, &awake)?;
        self.observe(round, &dist, &awake)?;
        Ok(dist)
    }
}

impl Learner for IntersectionEnsemble {
    fn predict(&mut self, _pool: &ExpertPool, round: &Round, awake: &[ExpertId])
        -> Result<Distribution> {
        self.sub_for(round.groups, awake, round.t)?.mw.distribution()
    }

    fn observe(&mut self, round: &Round, _dist: &Distribution, awake: &[ExpertId]) -> Result<()> {
        let sub = self.sub_for(round.groups, awake, round.t)?;
        sub.mw.apply_losses(&round.losses).map_err(|e| match e {
            Error::MalformedRound { reason, .. } => Error::MalformedRound { t: round.t, reason },
            other => other,
        })?;
        sub.routed += 1;
        if sub.routed >= 1u64 << sub.exponent {
            sub.exponent += 1;
            sub.routed = 0;
            let eta = eta_schedule(sub.mw.roster().len(), 1u64 << sub.exponent);
            sub.mw.reset(eta);
        }
        Ok(())
    }
}
