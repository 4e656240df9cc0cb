//! Regret metrics.
//!
//! All three metrics compare the learner's charged loss trajectory against
//! comparator experts, and are pure functions of a [`History`]:
//!
//! - overall regret: Σ_t ℓ̂_t − min_{f∈F} Σ_t ℓ_{t,f}
//! - subgroup regret for group g: the same sums restricted to rounds with
//!   g ∈ G_t, against the group's comparator class F(g)
//! - sleeping regret for expert h: Σ over rounds where h is awake of
//!   (ℓ̂_t − ℓ_{t,h})
//!
//! ℓ̂_t is the expected loss of the played distribution, except on
//! exploration rounds where the label was bought: there the charge is the
//! cost 1. All metrics may be negative and are reported as-is.

use crate::error::{Error, Result};
use crate::experts::ExpertId;
use crate::types::{Distribution, GroupId, History, LossMap};

/// Expected loss Σ_f p_f ℓ_f of a distribution under a loss map.
///
/// Errors when the distribution's support is not covered by the losses.
pub fn expected_loss(dist: &Distribution, losses: &LossMap) -> Result<f64> {
    let mut total = 0.0;
    for (id, p) in dist.iter() {
        let loss = losses.get(id).ok_or_else(|| Error::MalformedRound {
            t: 0,
            reason: format!("no loss for expert {id} in distribution support"),
        })?;
        total += p * loss;
    }
    Ok(total)
}

fn comparator_loss(history: &History, f: ExpertId, only_group: Option<GroupId>) -> Result<f64> {
    let mut total = 0.0;
    for entry in &history.entries {
        if let Some(g) = only_group {
            if !entry.round.groups.contains(g) {
                continue;
            }
        }
        match entry.round.losses.get(f) {
            Some(loss) => total += loss,
            None => return Err(Error::ComparatorAsleep { expert: f, t: entry.round.t }),
        }
    }
    Ok(total)
}

fn charged_total(history: &History, only_group: Option<GroupId>) -> Result<f64> {
    let mut total = 0.0;
    for entry in &history.entries {
        if let Some(g) = only_group {
            if !entry.round.groups.contains(g) {
                continue;
            }
        }
        total += entry.charged_loss()?;
    }
    Ok(total)
}

/// Best (lowest) cumulative comparator loss; ties break to the lowest id.
fn best_comparator_loss(
    history: &History,
    comparators: &[ExpertId],
    only_group: Option<GroupId>,
) -> Result<f64> {
    if comparators.is_empty() {
        return Err(Error::EmptyComparators);
    }
    let mut sorted: Vec<ExpertId> = comparators.to_vec();
    sorted.sort();
    sorted.dedup();
    let mut best = f64::INFINITY;
    for f in sorted {
        let loss = comparator_loss(history, f, only_group)?;
        if loss < best {
            best = loss;
        }
    }
    Ok(best)
}

/// Overall regret against a comparator class whose members are awake on
/// every round of the history.
pub fn overall_regret(history: &History, comparators: &[ExpertId]) -> Result<f64> {
    let best = best_comparator_loss(history, comparators, None)?;
    Ok(charged_total(history, None)? - best)
}

/// Regret restricted to the rounds where group `g` is present, against the
/// group's comparator class.
pub fn subgroup_regret(history: &History, g: GroupId, comparators: &[ExpertId]) -> Result<f64> {
    let best = best_comparator_loss(history, comparators, Some(g))?;
    Ok(charged_total(history, Some(g))? - best)
}

/// Sleeping regret of expert `h`: summed over exactly the rounds where `h`
/// is awake (i.e. carries a loss).
pub fn sleeping_regret(history: &History, h: ExpertId) -> Result<f64> {
    if !history.knows_expert(h) {
        return Err(Error::UnknownExpert(h));
    }
    let mut total = 0.0;
    for entry in &history.entries {
        if let Some(loss) = entry.round.losses.get(h) {
            total += entry.charged_loss()? - loss;
        }
    }
    Ok(total)
}

/// Rounds where `h` was awake, T(h).
pub fn awake_count(history: &History, h: ExpertId) -> u64 {
    history.entries.iter().filter(|e| e.round.losses.contains(h)).count() as u64
}
