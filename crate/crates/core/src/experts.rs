//! Sleeping-expert pools.
//!
//! The pool realizes the reduction from subgroup guarantees to sleeping
//! experts: every globally available rule gets one always-awake copy, and
//! every group-specific rule gets a copy that wakes only when its group is
//! present. Copies of the same base rule in different groups are distinct
//! experts with distinct ids, so the total pool size is
//! N = |F| + Σ_g |F(g)|. Experts can also be added mid-run; an expert added
//! at time t simply sleeps for all earlier rounds.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{GroupId, GroupSet, Round};

/// Opaque expert identifier, unique within a pool and never reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExpertId(pub u32);

impl ExpertId {
    pub fn index(&self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ExpertId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// Index into a pool's base-rule registry. Copies of one base rule in
/// different groups share the same `BaseId`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BaseId(pub u32);

/// When an expert is awake.
#[derive(Clone)]
pub enum ActivationRule {
    /// Awake every round (a member of the global class F).
    Always,
    /// Awake iff the round's example belongs to the group.
    Group(GroupId),
    /// Awake iff the round's membership profile is exactly this set.
    Intersection(GroupSet),
    /// Arbitrary deterministic predicate over the round.
    Custom(Arc<dyn Fn(&Round) -> bool + Send + Sync>),
}

impl ActivationRule {
    pub fn accepts(&self, round: &Round) -> bool {
        match self {
            ActivationRule::Always => true,
            ActivationRule::Group(g) => round.groups.contains(*g),
            ActivationRule::Intersection(s) => round.groups == *s,
            ActivationRule::Custom(f) => f(round),
        }
    }
}

impl fmt::Debug for ActivationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActivationRule::Always => write!(f, "Always"),
            ActivationRule::Group(g) => write!(f, "Group({g})"),
            ActivationRule::Intersection(s) => write!(f, "Intersection({s})"),
            ActivationRule::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Which comparator class an expert came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Global,
    Group(GroupId),
}

/// One sleeping expert: a copy of a base rule plus its activation rule.
#[derive(Debug, Clone)]
pub struct SleepingExpert {
    pub id: ExpertId,
    pub base: BaseId,
    pub rule: ActivationRule,
    /// Timestep the expert was added; asleep for all t < born_at.
    pub born_at: u64,
    pub origin: Origin,
}

impl SleepingExpert {
    pub fn awake_at(&self, round: &Round) -> bool {
        round.t >= self.born_at && self.rule.accepts(round)
    }
}

/// The full expert pool for a run.
#[derive(Debug, Clone, Default)]
pub struct ExpertPool {
    experts: Vec<SleepingExpert>,
    bases: Vec<String>,
    next_id: u32,
}

impl ExpertPool {
    pub fn new() -> ExpertPool {
        ExpertPool::default()
    }

    /// Number of experts, N.
    pub fn len(&self) -> usize {
        self.experts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experts.is_empty()
    }

    /// One past the largest id ever issued (ids are dense for pools built
    /// by [`build_pool`] and grow by one per addition; hidden pools keep the
    /// surviving experts' original ids).
    pub fn id_capacity(&self) -> usize {
        self.next_id as usize
    }

    pub fn experts(&self) -> &[SleepingExpert] {
        &self.experts
    }

    pub fn expert(&self, id: ExpertId) -> Option<&SleepingExpert> {
        self.experts.iter().find(|e| e.id == id)
    }

    pub fn contains(&self, id: ExpertId) -> bool {
        self.expert(id).is_some()
    }

    pub fn base_name(&self, base: BaseId) -> &str {
        &self.bases[base.0 as usize]
    }

    fn intern_base(&mut self, name: &str) -> BaseId {
        if let Some(i) = self.bases.iter().position(|b| b == name) {
            BaseId(i as u32)
        } else {
            self.bases.push(name.to_string());
            BaseId(self.bases.len() as u32 - 1)
        }
    }

    /// Adds one expert with the given activation rule, born at `born_at`.
    pub fn add_expert(&mut self, base: &str, rule: ActivationRule, born_at: u64) -> ExpertId {
        let origin = match rule {
            ActivationRule::Group(g) => Origin::Group(g),
            _ => Origin::Global,
        };
        self.add_expert_with_origin(base, rule, born_at, origin)
    }

    pub fn add_expert_with_origin(
        &mut self,
        base: &str,
        rule: ActivationRule,
        born_at: u64,
        origin: Origin,
    ) -> ExpertId {
        let id = ExpertId(self.next_id);
        self.next_id += 1;
        let base = self.intern_base(base);
        self.experts.push(SleepingExpert { id, base, rule, born_at, origin });
        id
    }

    /// Ids of the experts awake for this round, ascending.
    pub fn awake_set(&self, round: &Round) -> Vec<ExpertId> {
        self.experts.iter().filter(|e| e.awake_at(round)).map(|e| e.id).collect()
    }

    /// Global comparator class F: always-awake experts present from t=1.
    pub fn global_comparators(&self) -> Vec<ExpertId> {
        self.experts
            .iter()
            .filter(|e| e.origin == Origin::Global && e.born_at <= 1)
            .map(|e| e.id)
            .collect()
    }

    /// Comparator class for group g: the global experts plus g's copies
    /// (only those present from t=1, so they are awake on every g-round).
    pub fn group_comparators(&self, g: GroupId) -> Vec<ExpertId> {
        self.experts
            .iter()
            .filter(|e| e.born_at <= 1)
            .filter(|e| e.origin == Origin::Global || e.origin == Origin::Group(g))
            .map(|e| e.id)
            .collect()
    }

    /// Group-g copies only (the class F(g) proper).
    pub fn group_experts(&self, g: GroupId) -> Vec<ExpertId> {
        self.experts
            .iter()
            .filter(|e| e.origin == Origin::Group(g))
            .map(|e| e.id)
            .collect()
    }

    /// Pool with a subset H of group g's experts hidden. The hidden copies
    /// are removed from F(g), and any global copy of the same base rule is
    /// removed from F as well; other groups' copies stay. Surviving experts
    /// keep their ids.
    pub fn hide(&self, g: GroupId, hidden: &[ExpertId]) -> Result<ExpertPool> {
        for &id in hidden {
            match self.expert(id) {
                Some(e) if e.origin == Origin::Group(g) => {}
                Some(_) => return Err(Error::HiddenNotInGroup(id)),
                None => return Err(Error::UnknownExpert(id)),
            }
        }
        let hidden_bases: Vec<BaseId> = hidden
            .iter()
            .map(|&id| self.expert(id).expect("validated above").base)
            .collect();
        let experts = self
            .experts
            .iter()
            .filter(|e| {
                let in_h = hidden.contains(&e.id);
                let global_copy_of_hidden =
                    e.origin == Origin::Global && hidden_bases.contains(&e.base);
                !(in_h || global_copy_of_hidden)
            })
            .cloned()
            .collect();
        Ok(ExpertPool { experts, bases: self.bases.clone(), next_id: self.next_id })
    }
}

/// Builds the pool for global class F and per-group classes F(g): one
/// always-awake expert per f ∈ F and one group-gated copy per f ∈ F(g) per
/// g, giving N = |F| + Σ_g |F(g)|.
pub fn build_pool(global: &[String], per_group: &[(GroupId, Vec<String>)]) -> ExpertPool {
    let mut pool = ExpertPool::new();
    for name in global {
        pool.add_expert_with_origin(name, ActivationRule::Always, 1, Origin::Global);
    }
    for (g, names) in per_group {
        for name in names {
            pool.add_expert_with_origin(name, ActivationRule::Group(*g), 1, Origin::Group(*g));
        }
    }
    pool
}
