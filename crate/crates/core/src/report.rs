//! Checkpointed regret reports compiled from run histories.
//!
//! A report snapshots cumulative overall, per-group, and per-expert
//! sleeping regret at a set of checkpoint timesteps, together with
//! exploration accounting. Comparator classes come from the pool: the
//! global class F for overall regret, and F ∪ F(g) for group g. Experts
//! added after t = 1 cannot serve as comparators over the whole stream, so
//! they appear only in the sleeping-regret section, flagged by `born_at`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experts::{ExpertId, ExpertPool};
use crate::types::{GroupId, History};

/// Powers of two up to `t`, plus `t` itself.
pub fn default_checkpoints(t: u64) -> Vec<u64> {
    let mut cps: Vec<u64> = (0..63)
        .map(|k| 1u64 << k)
        .take_while(|&c| c <= t)
        .collect();
    if cps.last() != Some(&t) && t > 0 {
        cps.push(t);
    }
    cps
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTrajectory {
    pub group: u8,
    /// T(g) at each checkpoint.
    pub sizes: Vec<u64>,
    /// Cumulative subgroup regret at each checkpoint; None when the group
    /// has no comparators.
    pub regret: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertTrajectory {
    pub expert: ExpertId,
    pub born_at: u64,
    /// T(h): rounds the expert was awake, at each checkpoint.
    pub awake: Vec<u64>,
    /// Cumulative sleeping regret at each checkpoint.
    pub regret: Vec<f64>,
}

/// Cumulative regret trajectories plus exploration accounting for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub checkpoints: Vec<u64>,
    /// Cumulative overall regret at each checkpoint; None when the pool has
    /// no global comparators.
    pub overall: Vec<Option<f64>>,
    pub groups: Vec<GroupTrajectory>,
    pub experts: Vec<ExpertTrajectory>,
    pub exploration_count: u64,
    /// Total charged exploration cost (1 per explored round).
    pub exploration_cost: f64,
}

impl RegretReport {
    pub fn final_overall(&self) -> Option<f64> {
        self.overall.last().copied().flatten()
    }

    pub fn final_subgroup(&self, g: GroupId) -> Option<f64> {
        self.groups
            .iter()
            .find(|gt| gt.group == g.0)
            .and_then(|gt| gt.regret.last().copied().flatten())
    }

    pub fn final_group_size(&self, g: GroupId) -> Option<u64> {
        self.groups
            .iter()
            .find(|gt| gt.group == g.0)
            .and_then(|gt| gt.sizes.last().copied())
    }

    pub fn expert(&self, id: ExpertId) -> Option<&ExpertTrajectory> {
        self.experts.iter().find(|e| e.expert == id)
    }
}

/// Streaming accumulator behind both report compilation and per-round CSV
/// trajectories. Feed entries in order; read cumulative values after each.
pub struct RegretAccumulator {
    global_comparators: Vec<(ExpertId, f64)>,
    per_group: Vec<GroupAccumulator>,
    cum_charged: f64,
}

struct GroupAccumulator {
    group: GroupId,
    comparators: Vec<(ExpertId, f64)>,
    cum_charged: f64,
    size: u64,
}

impl RegretAccumulator {
    pub fn new(pool: &ExpertPool, n_groups: u8) -> RegretAccumulator {
        let global_comparators =
            pool.global_comparators().into_iter().map(|id| (id, 0.0)).collect();
        let per_group = (0..n_groups)
            .map(|g| {
                let group = GroupId(g);
                GroupAccumulator {
                    group,
                    comparators: pool
                        .group_comparators(group)
                        .into_iter()
                        .map(|id| (id, 0.0))
                        .collect(),
                    cum_charged: 0.0,
                    size: 0,
                }
            })
            .collect();
        RegretAccumulator { global_comparators, per_group, cum_charged: 0.0 }
    }

    pub fn feed(&mut self, entry: &crate::types::HistoryEntry) -> Result<()> {
        let charged = entry.charged_loss()?;
        self.cum_charged += charged;
        for (id, cum) in &mut self.global_comparators {
            match entry.round.losses.get(*id) {
                Some(loss) => *cum += loss,
                None => {
                    return Err(Error::ComparatorAsleep { expert: *id, t: entry.round.t });
                }
            }
        }
        for acc in &mut self.per_group {
            if !entry.round.groups.contains(acc.group) {
                continue;
            }
            acc.cum_charged += charged;
            acc.size += 1;
            for (id, cum) in &mut acc.comparators {
                match entry.round.losses.get(*id) {
                    Some(loss) => *cum += loss,
                    None => {
                        return Err(Error::ComparatorAsleep { expert: *id, t: entry.round.t });
                    }
                }
            }
        }
        Ok(())
    }

    fn best(comparators: &[(ExpertId, f64)]) -> Option<f64> {
        comparators
            .iter()
            .map(|(_, cum)| *cum)
            .fold(None, |best, x| Some(best.map_or(x, |b: f64| b.min(x))))
    }

    /// Cumulative overall regret so far; None without global comparators.
    pub fn overall_regret(&self) -> Option<f64> {
        Self::best(&self.global_comparators).map(|best| self.cum_charged - best)
    }

    /// Cumulative subgroup regret so far for group `g`.
    pub fn subgroup_regret(&self, g: GroupId) -> Option<f64> {
        let acc = self.per_group.get(g.0 as usize)?;
        Self::best(&acc.comparators).map(|best| acc.cum_charged - best)
    }

    pub fn group_size(&self, g: GroupId) -> u64 {
        self.per_group.get(g.0 as usize).map_or(0, |a| a.size)
    }
}

/// Compiles the checkpointed report for a finished run.
pub fn compile_report(
    history: &History,
    pool: &ExpertPool,
    checkpoints: &[u64],
) -> Result<RegretReport> {
    let mut acc = RegretAccumulator::new(pool, history.n_groups);

    // (expert, born_at, cumulative sleeping regret, awake count)
    let mut sleeping: Vec<(ExpertId, u64, f64, u64)> = history
        .roster
        .iter()
        .map(|&id| {
            let born = pool.expert(id).map_or(1, |e| e.born_at);
            (id, born, 0.0, 0u64)
        })
        .collect();
    sleeping.sort_by_key(|&(id, ..)| id);

    let mut overall = Vec::with_capacity(checkpoints.len());
    let mut groups: Vec<GroupTrajectory> = (0..history.n_groups)
        .map(|g| GroupTrajectory { group: g, sizes: Vec::new(), regret: Vec::new() })
        .collect();
    let mut expert_rows: Vec<ExpertTrajectory> = sleeping
        .iter()
        .map(|&(id, born, ..)| ExpertTrajectory {
            expert: id,
            born_at: born,
            awake: Vec::new(),
            regret: Vec::new(),
        })
        .collect();

    fn snapshot(
        acc: &RegretAccumulator,
        sleeping: &[(ExpertId, u64, f64, u64)],
        overall: &mut Vec<Option<f64>>,
        groups: &mut [GroupTrajectory],
        expert_rows: &mut [ExpertTrajectory],
    ) {
        overall.push(acc.overall_regret());
        for gt in groups.iter_mut() {
            let g = GroupId(gt.group);
            gt.sizes.push(acc.group_size(g));
            gt.regret.push(acc.subgroup_regret(g));
        }
        for (row, &(_, _, regret, awake)) in expert_rows.iter_mut().zip(sleeping) {
            row.awake.push(awake);
            row.regret.push(regret);
        }
    }

    let mut exploration_count = 0u64;
    let mut next_cp = 0usize;
    for entry in &history.entries {
        acc.feed(entry)?;
        if entry.explored {
            exploration_count += 1;
        }
        let charged = entry.charged_loss()?;
        for (id, _, regret, awake) in sleeping.iter_mut() {
            if let Some(loss) = entry.round.losses.get(*id) {
                *regret += charged - loss;
                *awake += 1;
            }
        }
        while next_cp < checkpoints.len() && entry.round.t >= checkpoints[next_cp] {
            snapshot(&acc, &sleeping, &mut overall, &mut groups, &mut expert_rows);
            next_cp += 1;
        }
    }
    // Checkpoints past the end of the stream snapshot the final state.
    while next_cp < checkpoints.len() {
        snapshot(&acc, &sleeping, &mut overall, &mut groups, &mut expert_rows);
        next_cp += 1;
    }

    Ok(RegretReport {
        checkpoints: checkpoints.to_vec(),
        overall,
        groups,
        experts: expert_rows,
        exploration_count,
        exploration_cost: exploration_count as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experts::build_pool;
    use crate::metrics;
    use crate::types::{Distribution, GroupSet, LossMap, Round};

    fn lm(entries: &[(u32, f64)]) -> LossMap {
        LossMap::new(entries.iter().map(|&(i, l)| (ExpertId(i), l)).collect()).unwrap()
    }

    #[test]
    fn default_checkpoints_are_powers_of_two_plus_t() {
        assert_eq!(default_checkpoints(10), vec![1, 2, 4, 8, 10]);
        assert_eq!(default_checkpoints(8), vec![1, 2, 4, 8]);
        assert_eq!(default_checkpoints(1), vec![1]);
    }

    #[test]
    fn report_matches_pure_metrics() {
        let pool = build_pool(&["f".into()], &[(GroupId(0), vec!["a".into()])]);
        let mut history = History::new(1, vec![ExpertId(0), ExpertId(1)]);
        let rounds = [
            (1u64, vec![GroupId(0)], vec![(0u32, 0.3), (1, 0.1)]),
            (2, vec![], vec![(0, 0.9)]),
            (3, vec![GroupId(0)], vec![(0, 0.5), (1, 0.2)]),
        ];
        for (t, gs, losses) in rounds {
            let groups = GroupSet::from_groups(&gs);
            let round = Round::new(t, groups, lm(&losses), None);
            let dist = Distribution::uniform(round.losses.ids().collect()).unwrap();
            history.push(round, dist, false).unwrap();
        }
        let report = compile_report(&history, &pool, &[1, 3]).unwrap();
        assert_eq!(report.checkpoints, vec![1, 3]);
        assert_eq!(
            report.final_overall().unwrap(),
            metrics::overall_regret(&history, &[ExpertId(0)]).unwrap()
        );
        assert_eq!(
            report.final_subgroup(GroupId(0)).unwrap(),
            metrics::subgroup_regret(&history, GroupId(0), &[ExpertId(0), ExpertId(1)]).unwrap()
        );
        let e1 = report.expert(ExpertId(1)).unwrap();
        assert_eq!(
            *e1.regret.last().unwrap(),
            metrics::sleeping_regret(&history, ExpertId(1)).unwrap()
        );
        assert_eq!(*e1.awake.last().unwrap(), 2);
        assert_eq!(report.final_group_size(GroupId(0)), Some(2));
    }

    #[test]
    fn report_roundtrips_through_json() {
        let pool = build_pool(&["f".into()], &[]);
        let mut history = History::new(0, vec![ExpertId(0)]);
        let round = Round::new(1, GroupSet::EMPTY, lm(&[(0, 0.125)]), None);
        let dist = Distribution::uniform(vec![ExpertId(0)]).unwrap();
        history.push(round, dist, true).unwrap();
        let report = compile_report(&history, &pool, &[1]).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        let back: RegretReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        assert_eq!(report.exploration_count, 1);
        assert_eq!(report.exploration_cost, 1.0);
    }
}
