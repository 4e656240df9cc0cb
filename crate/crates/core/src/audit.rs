//! Fairness and incentive audits.
//!
//! - [`fpr_fnr`]: false positive / false negative rates over a masked
//!   subset, with zero-denominator rates flagged as undefined rather than
//!   silently zero.
//! - [`impossibility_scan`]: closed-form min-max of the per-group
//!   unweighted (FPR+FNR)/2 objective over a grid of intersection policies
//!   p for the overlap construction. Off-intersection examples are
//!   predicted perfectly and intersection labels enter in expectation, so
//!   the scan is analytic, not sampled.
//! - [`ir_gain`]: what a group would gain by being served by its own best
//!   comparator instead of the running algorithm (identical to subgroup
//!   regret by construction).
//! - [`ic_gain`]: what a group would gain by hiding a subset of its experts
//!   — the algorithm is run twice with identical seeds, once with the full
//!   pool and once with the hidden experts removed from both the group's
//!   class and the global class.

use serde::{Deserialize, Serialize};

use crate::environments::OverlapInstance;
use crate::error::{Error, Result};
use crate::experts::{ExpertId, ExpertPool};
use crate::types::{GroupId, History, Label};

/// FPR/FNR over a masked example set. `None` rates mean the corresponding
/// denominator (positives or negatives) was empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub n_positives: u64,
    pub n_negatives: u64,
}

impl RateReport {
    /// The unweighted objective (FPR + FNR) / 2; undefined when either rate
    /// is undefined.
    pub fn unweighted_avg(&self) -> Option<f64> {
        Some((self.fpr? + self.fnr?) / 2.0)
    }
}

/// Computes FPR and FNR of (possibly randomized) predictions over the
/// masked subset. `predictions[i]` is the probability of predicting
/// positive on example i; randomized predictions contribute expected
/// values.
pub fn fpr_fnr(predictions: &[f64], labels: &[Label], mask: &[bool]) -> Result<RateReport> {
    if predictions.len() != labels.len() || labels.len() != mask.len() {
        return Err(Error::InvalidSpec(format!(
            "misaligned audit inputs: {} predictions, {} labels, {} mask entries",
            predictions.len(),
            labels.len(),
            mask.len()
        )));
    }
    let mut n_pos = 0u64;
    let mut n_neg = 0u64;
    let mut false_pos = 0.0;
    let mut false_neg = 0.0;
    for ((&p, &label), &selected) in predictions.iter().zip(labels).zip(mask) {
        if !selected {
            continue;
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidSpec(format!("prediction probability {p} outside [0,1]")));
        }
        match label {
            Label::Positive => {
                n_pos += 1;
                false_neg += 1.0 - p;
            }
            Label::Negative => {
                n_neg += 1;
                false_pos += p;
            }
        }
    }
    Ok(RateReport {
        fpr: (n_neg > 0).then(|| false_pos / n_neg as f64),
        fnr: (n_pos > 0).then(|| false_neg / n_pos as f64),
        n_positives: n_pos,
        n_negatives: n_neg,
    })
}

/// Expected-value FPR/FNR of an executed stream: on rounds labeled positive
/// the expected loss is the probability of a mistake on a positive (a false
/// negative), and symmetrically for negative rounds. Restricts to group `g`
/// when given. Errors if a selected round lacks a label.
pub fn stream_rates(history: &History, g: Option<GroupId>) -> Result<RateReport> {
    let mut n_pos = 0u64;
    let mut n_neg = 0u64;
    let mut false_pos = 0.0;
    let mut false_neg = 0.0;
    for entry in &history.entries {
        if let Some(g) = g {
            if !entry.round.groups.contains(g) {
                continue;
            }
        }
        let label = entry.round.label.ok_or_else(|| Error::MalformedRound {
            t: entry.round.t,
            reason: "rate audit requires labeled rounds".into(),
        })?;
        let hat = entry.expected_loss()?;
        match label {
            Label::Positive => {
                n_pos += 1;
                false_neg += hat;
            }
            Label::Negative => {
                n_neg += 1;
                false_pos += hat;
            }
        }
    }
    Ok(RateReport {
        fpr: (n_neg > 0).then(|| false_pos / n_neg as f64),
        fnr: (n_pos > 0).then(|| false_neg / n_pos as f64),
        n_positives: n_pos,
        n_negatives: n_neg,
    })
}

/// Result of the min-max impossibility scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    /// Grid point minimizing the worse group's objective.
    pub best_p: f64,
    /// The minimized max-over-groups unweighted average.
    pub min_max: f64,
    pub grid_points: usize,
}

/// Closed-form per-group objectives when the intersection is predicted
/// positive with probability p and everything else perfectly: returns
/// ((FPR_A + FNR_A)/2, (FPR_B + FNR_B)/2) in expectation over the uniform
/// intersection labels.
pub fn overlap_group_averages(inst: &OverlapInstance, p: f64) -> (f64, f64) {
    let n = inst.n_per_group as f64;
    let shared = inst.examples.iter().filter(|e| e.region == crate::environments::Region::Shared).count() as f64;
    let half_shared = shared / 2.0;
    let disjoint = n - shared;
    // Group A: negatives are the intersection's negative half; positives are
    // A∖B plus the intersection's positive half. Symmetric for B.
    let fpr_a = p;
    let fnr_a = half_shared * (1.0 - p) / (disjoint + half_shared);
    let fpr_b = half_shared * p / (disjoint + half_shared);
    let fnr_b = 1.0 - p;
    ((fpr_a + fnr_a) / 2.0, (fpr_b + fnr_b) / 2.0)
}

/// Scans p over a uniform grid and returns the min over p of the max over
/// groups of the unweighted average objective. The minimum always exceeds
/// 1/4 for this construction.
pub fn impossibility_scan(inst: &OverlapInstance, grid_points: usize) -> Result<ScanReport> {
    if grid_points < 3 {
        return Err(Error::InvalidSpec(format!("grid needs ≥ 3 points, got {grid_points}")));
    }
    let mut best_p = 0.0;
    let mut min_max = f64::INFINITY;
    for i in 0..grid_points {
        let p = i as f64 / (grid_points - 1) as f64;
        let (avg_a, avg_b) = overlap_group_averages(inst, p);
        let worst = avg_a.max(avg_b);
        if worst < min_max {
            min_max = worst;
            best_p = p;
        }
    }
    assert!(min_max >= 0.25 - 1e-12, "min-max {min_max} fell below the 1/4 bound");
    Ok(ScanReport { best_p, min_max, grid_points })
}

/// A group's gain from an alternative serving arrangement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub group: u8,
    /// The algorithm's cumulative charged loss on the group's rounds.
    pub baseline: f64,
    /// The alternative's cumulative loss on the same rounds.
    pub alternative: f64,
    /// baseline − alternative: positive means the group gains by switching.
    pub gain: f64,
    /// T(g), for normalizing the gain.
    pub group_size: u64,
}

impl GainReport {
    pub fn gain_per_round(&self) -> Option<f64> {
        (self.group_size > 0).then(|| self.gain / self.group_size as f64)
    }
}

/// Individual-rationality gain: the algorithm's loss on g-rounds minus the
/// best group comparator's loss there. Coincides with subgroup regret by
/// construction; asymptotic IR holds when gain/T(g) vanishes.
pub fn ir_gain(history: &History, g: GroupId, comparators: &[ExpertId]) -> Result<GainReport> {
    if comparators.is_empty() {
        return Err(Error::EmptyComparators);
    }
    let mut algo = 0.0;
    let mut size = 0u64;
    let mut cum: Vec<(ExpertId, f64)> = {
        let mut c: Vec<ExpertId> = comparators.to_vec();
        c.sort();
        c.dedup();
        c.into_iter().map(|id| (id, 0.0)).collect()
    };
    for entry in &history.entries {
        if !entry.round.groups.contains(g) {
            continue;
        }
        size += 1;
        algo += entry.charged_loss()?;
        for (id, total) in &mut cum {
            match entry.round.losses.get(*id) {
                Some(loss) => *total += loss,
                None => {
                    return Err(Error::ComparatorAsleep { expert: *id, t: entry.round.t });
                }
            }
        }
    }
    let best = cum.iter().map(|&(_, total)| total).fold(f64::INFINITY, f64::min);
    let best = if best.is_finite() { best } else { 0.0 };
    Ok(GainReport { group: g.0, baseline: algo, alternative: best, gain: algo - best, group_size: size })
}

fn charged_on_group(history: &History, g: GroupId) -> Result<(f64, u64)> {
    let mut total = 0.0;
    let mut size = 0u64;
    for entry in &history.entries {
        if entry.round.groups.contains(g) {
            total += entry.charged_loss()?;
            size += 1;
        }
    }
    Ok((total, size))
}

/// Restricts a stream's loss maps to the experts present in `pool`: the
/// hidden-pool half of an IC double-run sees the same rounds with the
/// hidden experts' loss columns dropped.
pub fn restrict_stream(stream: &crate::types::Stream, pool: &ExpertPool) -> Result<crate::types::Stream> {
    let rounds = stream
        .rounds
        .iter()
        .map(|r| {
            let kept: Vec<(ExpertId, f64)> =
                r.losses.iter().filter(|(id, _)| pool.contains(*id)).collect();
            Ok(crate::types::Round::new(r.t, r.groups, crate::types::LossMap::new(kept)?, r.label))
        })
        .collect::<Result<Vec<_>>>()?;
    crate::types::Stream::new(stream.n_groups, rounds)
}

/// Incentive-compatibility gain for group `g` hiding the expert subset
/// `hidden` ⊆ F(g): runs the experiment twice through `run` — once with the
/// full pool, once with the hidden experts removed from both F(g) and F —
/// and returns the group's charged-loss difference (full − hidden).
/// Identical seeds inside `run` make the H = ∅ gain exactly zero.
pub fn ic_gain<R>(pool: &ExpertPool, g: GroupId, hidden: &[ExpertId], mut run: R) -> Result<GainReport>
where
    R: FnMut(&ExpertPool) -> Result<History>,
{
    let hidden_pool = pool.hide(g, hidden)?;
    let baseline_history = run(pool)?;
    let hidden_history = run(&hidden_pool)?;
    let (baseline, size) = charged_on_group(&baseline_history, g)?;
    let (alternative, _) = charged_on_group(&hidden_history, g)?;
    Ok(GainReport {
        group: g.0,
        baseline,
        alternative,
        gain: baseline - alternative,
        group_size: size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::anh::AnhLearner;
    use crate::environments::{gen_ic_instance, gen_overlap_instance, OverlapInstance, Region};
    use crate::experts::build_pool;
    use crate::feedback::run_full_feedback;
    use crate::metrics::subgroup_regret;
    use crate::types::{Distribution, GroupSet, LossMap, Round};

    #[test]
    fn all_correct_predictions_have_zero_rates() {
        let labels = [Label::Positive, Label::Negative, Label::Positive];
        let predictions = [1.0, 0.0, 1.0];
        let mask = [true, true, true];
        let r = fpr_fnr(&predictions, &labels, &mask).unwrap();
        assert_eq!(r.fpr, Some(0.0));
        assert_eq!(r.fnr, Some(0.0));
    }

    #[test]
    fn predictor_a_rates_on_group_a_exact_mode() {
        let inst = gen_overlap_instance(900, 1, true).unwrap();
        let r = fpr_fnr(
            &inst.predictions(OverlapInstance::predict_a),
            &inst.labels(),
            &inst.mask_a(),
        )
        .unwrap();
        assert_eq!(r.fpr, Some(0.0));
        assert_eq!(r.fnr, Some(1.0 / 9.0));
        assert_eq!(r.unweighted_avg(), Some(1.0 / 18.0));

        let r = fpr_fnr(
            &inst.predictions(OverlapInstance::predict_b),
            &inst.labels(),
            &inst.mask_b(),
        )
        .unwrap();
        assert_eq!(r.fpr, Some(1.0 / 9.0));
        assert_eq!(r.fnr, Some(0.0));
        assert_eq!(r.unweighted_avg(), Some(1.0 / 18.0));
    }

    #[test]
    fn all_positive_predictor() {
        let labels = [Label::Positive, Label::Negative];
        let r = fpr_fnr(&[1.0, 1.0], &labels, &[true, true]).unwrap();
        assert_eq!(r.fpr, Some(1.0));
        assert_eq!(r.fnr, Some(0.0));
    }

    #[test]
    fn zero_denominators_are_flagged_undefined() {
        let labels = [Label::Positive, Label::Positive];
        let r = fpr_fnr(&[0.5, 1.0], &labels, &[true, true]).unwrap();
        assert_eq!(r.fpr, None);
        assert!(r.fnr.is_some());
        assert_eq!(r.unweighted_avg(), None);
    }

    #[test]
    fn scan_endpoints_match_direct_rate_evaluation() {
        let inst = gen_overlap_instance(1000, 1, true).unwrap();
        // p = 0 is exactly predictor f_A extended with perfect off-intersection
        // predictions on group A.
        let (avg_a0, avg_b0) = overlap_group_averages(&inst, 0.0);
        let direct_a = fpr_fnr(
            &inst.predictions(OverlapInstance::predict_a),
            &inst.labels(),
            &inst.mask_a(),
        )
        .unwrap();
        assert_eq!(avg_a0, direct_a.unweighted_avg().unwrap());
        // p = 1 on group B matches predictor f_B.
        let (_, avg_b1) = overlap_group_averages(&inst, 1.0);
        let direct_b = fpr_fnr(
            &inst.predictions(OverlapInstance::predict_b),
            &inst.labels(),
            &inst.mask_b(),
        )
        .unwrap();
        assert_eq!(avg_b1, direct_b.unweighted_avg().unwrap());
        // p = 0: group B predicts every positive (all shared) negative, so
        // FNR_B = 1 and FPR_B = 0.
        assert_eq!(avg_b0, 0.5);
    }

    #[test]
    fn scan_values_at_half_and_one() {
        let inst = gen_overlap_instance(1000, 1, true).unwrap();
        let (avg_a, avg_b) = overlap_group_averages(&inst, 1.0);
        assert_eq!(avg_a, 0.5);
        assert_eq!(avg_b, 1.0 / 18.0);
        let (avg_a, avg_b) = overlap_group_averages(&inst, 0.5);
        assert!((avg_a - 5.0 / 18.0).abs() < 1e-15);
        assert!((avg_b - 5.0 / 18.0).abs() < 1e-15);

        let scan = impossibility_scan(&inst, 10_001).unwrap();
        assert!((scan.min_max - 5.0 / 18.0).abs() < 1e-9);
        assert_eq!(scan.best_p, 0.5);
        assert!(scan.min_max > 0.25);
    }

    #[test]
    fn scan_rejects_tiny_grids() {
        let inst = gen_overlap_instance(100, 1, true).unwrap();
        assert!(impossibility_scan(&inst, 2).is_err());
    }

    #[test]
    fn ir_gain_examples() {
        // Algorithm always follows the best group expert → gain 0.
        let mut h = History::new(1, vec![ExpertId(0)]);
        let groups = GroupSet::from_groups(&[GroupId(0)]);
        for t in 1..=3 {
            let losses = LossMap::new(vec![(ExpertId(0), 0.4)]).unwrap();
            h.push(
                Round::new(t, groups, losses, None),
                Distribution::uniform(vec![ExpertId(0)]).unwrap(),
                false,
            )
            .unwrap();
        }
        let r = ir_gain(&h, GroupId(0), &[ExpertId(0)]).unwrap();
        assert_eq!(r.gain, 0.0);
        assert_eq!(r.group_size, 3);

        // Single g-round with ℓ̂ = 0.5 against a loss-0 comparator → 0.5.
        let mut h = History::new(1, vec![ExpertId(0), ExpertId(1)]);
        let losses = LossMap::new(vec![(ExpertId(0), 0.0), (ExpertId(1), 1.0)]).unwrap();
        h.push(
            Round::new(1, groups, losses, None),
            Distribution::uniform(vec![ExpertId(0), ExpertId(1)]).unwrap(),
            false,
        )
        .unwrap();
        let r = ir_gain(&h, GroupId(0), &[ExpertId(0), ExpertId(1)]).unwrap();
        assert_eq!(r.gain, 0.5);
        assert_eq!(r.baseline, 0.5);
        assert_eq!(r.alternative, 0.0);

        assert!(ir_gain(&h, GroupId(0), &[]).is_err());
    }

    #[test]
    fn ir_gain_is_bitwise_subgroup_regret() {
        let (stream, pool) = gen_ic_instance(40, true).unwrap();
        let mut learner = AnhLearner::new(&pool);
        let out = run_full_feedback(&stream, &pool, &mut learner).unwrap();
        for g in [GroupId(0), GroupId(1)] {
            let comps = pool.group_comparators(g);
            let gain = ir_gain(&out.history, g, &comps).unwrap().gain;
            let regret = subgroup_regret(&out.history, g, &comps).unwrap();
            assert_eq!(gain.to_bits(), regret.to_bits());
        }
    }

    #[test]
    fn ic_gain_of_empty_hidden_set_is_exactly_zero() {
        let (stream, pool) = gen_ic_instance(60, true).unwrap();
        let report = ic_gain(&pool, GroupId(0), &[], |p| {
            let mut learner = AnhLearner::new(p);
            Ok(run_full_feedback(&stream, p, &mut learner)?.history)
        })
        .unwrap();
        assert_eq!(report.gain, 0.0);
    }

    #[test]
    fn ic_gain_validates_hidden_subset() {
        let (_, pool) = gen_ic_instance(10, true).unwrap();
        // The global expert is not in F(B).
        let global = pool.global_comparators()[0];
        let err = ic_gain(&pool, GroupId(0), &[global], |_| {
            Ok(History::new(2, vec![]))
        })
        .unwrap_err();
        assert!(matches!(err, Error::HiddenNotInGroup(_)));
    }

    #[test]
    fn ic_gain_positive_on_counterexample_smoke() {
        // Small-T smoke test of the incentive failure; the acceptance suite
        // runs the full-size version.
        let (stream, pool) = gen_ic_instance(2000, true).unwrap();
        let f_b = pool.group_experts(GroupId(0));
        let report = ic_gain(&pool, GroupId(0), &f_b, |p| {
            // Regenerate the stream for the hidden pool: its rounds carry
            // losses for exactly the surviving awake experts.
            let (s, _) = gen_ic_instance(2000, true).unwrap();
            let rounds = s
                .rounds
                .into_iter()
                .map(|r| {
                    let keep: Vec<(ExpertId, f64)> =
                        r.losses.iter().filter(|(id, _)| p.contains(*id)).collect();
                    Round::new(r.t, r.groups, LossMap::new(keep).unwrap(), r.label)
                })
                .collect();
            let s = crate::types::Stream::new(2, rounds).unwrap();
            let mut learner = AnhLearner::new(p);
            Ok(run_full_feedback(&s, p, &mut learner)?.history)
        })
        .unwrap();
        assert!(
            report.gain_per_round().unwrap() > 0.01,
            "expected a clearly positive gain, got {report:?}"
        );
    }

    #[test]
    fn stream_rates_split_expected_losses_by_label() {
        let pool = build_pool(&["f".into()], &[]);
        let mut h = History::new(0, vec![ExpertId(0)]);
        let mk = |t, loss, label| {
            Round::new(t, GroupSet::EMPTY, LossMap::new(vec![(ExpertId(0), loss)]).unwrap(), Some(label))
        };
        let d = Distribution::uniform(vec![ExpertId(0)]).unwrap();
        h.push(mk(1, 0.2, Label::Positive), d.clone(), false).unwrap();
        h.push(mk(2, 0.6, Label::Negative), d.clone(), false).unwrap();
        h.push(mk(3, 0.4, Label::Positive), d, false).unwrap();
        let r = stream_rates(&h, None).unwrap();
        assert!((r.fnr.unwrap() - 0.3).abs() < 1e-15);
        assert!((r.fpr.unwrap() - 0.6).abs() < 1e-15);
        let _ = pool;
    }
}
