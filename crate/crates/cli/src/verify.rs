//! Verification suites: the checks behind `subfair verify`.
//!
//! Each check runs a pinned scenario, measures the quantity of interest,
//! and compares it against its pinned threshold. Suites group the checks:
//!
//! - `regret-bounds`: sleeping/subgroup regret envelopes for the sleeping
//!   pool construction, and the scaling slopes of reductions 2 and 3.
//! - `ic-counterexample`: the incentive failure of the sleeping-experts
//!   learner on the two-group alternating instance.
//! - `mw-ic`: the per-intersection ensemble's bounded hiding gains.
//! - `impossibility`: the min-max scan of the unweighted FPR/FNR objective.
//! - `estimators`: phase-estimator unbiasedness, exact exploration-cost
//!   accounting, and step-function equivalence against straight-line
//!   re-implementations.
//! - `all`: everything.

use rayon::prelude::*;

use subfair_core::algorithms::anh::AnhLearner;
use subfair_core::algorithms::ensemble::IntersectionEnsemble;
use subfair_core::algorithms::mw::MwLearner;
use subfair_core::audit::{fpr_fnr, ic_gain, impossibility_scan, restrict_stream};
use subfair_core::environments::{
    gen_ic_instance, gen_overlap_instance, gen_random_adversary, BaseLoss, GroupExperts,
    InstanceSpec, LossKind, LossModel, OverlapInstance, PoolSpec, ProfileOverride,
};
use subfair_core::feedback::{
    ceil_two_thirds, mw_base_factory, run_full_feedback, run_reduction1, run_reduction2,
    run_reduction3, DrawRange,
};
use subfair_core::rng::sub_rng;
use subfair_core::{ExpertId, ExpertPool, GroupId, GroupSet, LossMap, Round, Stream};

use crate::sweep::{ols_slope, thread_pool};

/// One verification check: what was measured, what was required, verdict.
#[derive(Debug, Clone)]
pub struct Check {
    pub id: &'static str,
    pub name: &'static str,
    pub pass: bool,
    /// Measured value(s) against the pinned threshold, human-readable.
    pub detail: String,
}

impl Check {
    fn new(id: &'static str, name: &'static str, pass: bool, detail: String) -> Check {
        Check { id, name, pass, detail }
    }
}

pub const SUITES: &[&str] =
    &["regret-bounds", "ic-counterexample", "mw-ic", "impossibility", "estimators", "all"];

#[derive(Debug, thiserror::Error)]
#[error("unknown suite {0:?}; valid suites: regret-bounds, ic-counterexample, mw-ic, impossibility, estimators, all")]
pub struct UnknownSuite(pub String);

/// Runs a named suite and returns its checks.
pub fn run_suite(name: &str) -> Result<Vec<Check>, UnknownSuite> {
    let mut checks = Vec::new();
    match name {
        "regret-bounds" => {
            checks.extend(criterion1_sleeping_regret_bounds());
            checks.extend(criterion7_reduction_scaling());
        }
        "ic-counterexample" => checks.extend(criterion2_ic_counterexample()),
        "mw-ic" => checks.extend(criterion3_ensemble_ic()),
        "impossibility" => checks.extend(criterion4_impossibility()),
        "estimators" => {
            checks.extend(criterion5_estimator_unbiasedness());
            checks.extend(criterion6_exploration_cost());
            checks.extend(criterion8_oracle_equivalence());
        }
        "all" => {
            checks.extend(criterion1_sleeping_regret_bounds());
            checks.extend(criterion2_ic_counterexample());
            checks.extend(criterion3_ensemble_ic());
            checks.extend(criterion4_impossibility());
            checks.extend(criterion5_estimator_unbiasedness());
            checks.extend(criterion6_exploration_cost());
            checks.extend(criterion7_reduction_scaling());
            checks.extend(criterion8_oracle_equivalence());
        }
        other => return Err(UnknownSuite(other.to_string())),
    }
    Ok(checks)
}

// --------------------------------------------------------------------------
// Criterion 1: sleeping-regret and subgroup-regret envelopes
// --------------------------------------------------------------------------

/// Three overlapping groups, |F| = 4 global rules and 4 copies per group
/// (N = 16). Per-group best rules have a clear margin so regret curves are
/// well conditioned.
fn c1_spec(t: u64) -> InstanceSpec {
    let global_means = [0.25, 0.5, 0.55, 0.6];
    let copy_means = [0.15, 0.45, 0.5, 0.55];
    let mut loss = Vec::new();
    let mut global = Vec::new();
    for (i, &p) in global_means.iter().enumerate() {
        let name = format!("g{i}");
        loss.push(BaseLoss { base: name.clone(), model: LossModel::bernoulli(p) });
        global.push(name);
    }
    let mut group = Vec::new();
    for g in 0..3u8 {
        let mut experts = Vec::new();
        for (i, &p) in copy_means.iter().enumerate() {
            let name = format!("s{g}{i}");
            loss.push(BaseLoss { base: name.clone(), model: LossModel::bernoulli(p) });
            experts.push(name);
        }
        group.push(GroupExperts { id: g, experts });
    }
    InstanceSpec {
        t,
        groups: 3,
        membership: vec![0.5, 0.35, 0.25],
        pool: PoolSpec { global, group, additions: vec![] },
        loss,
    }
}

pub fn criterion1_sleeping_regret_bounds() -> Vec<Check> {
    const T: u64 = 50_000;
    const SEEDS: u64 = 10;
    let spec = c1_spec(T);

    let results: Vec<(f64, f64, bool)> = thread_pool().install(|| {
        (0..SEEDS)
            .into_par_iter()
            .map(|seed| {
                let (stream, pool) = gen_random_adversary(&spec, seed).expect("valid spec");
                let n = pool.len() as f64;
                let mut learner = AnhLearner::new(&pool);
                let out = run_full_feedback(&stream, &pool, &mut learner).expect("run");
                let report = &out.report;

                // Worst ratio of sleeping regret to its envelope.
                let mut worst_sleeping = f64::NEG_INFINITY;
                for row in &report.experts {
                    let regret = *row.regret.last().unwrap();
                    let t_h = *row.awake.last().unwrap() as f64;
                    let bound = 4.0 * (t_h * n.ln()).sqrt() + 10.0;
                    worst_sleeping = worst_sleeping.max(regret / bound);
                }

                // Worst per-group average regret among groups with
                // T(g) ≥ 10_000, and monotonicity from checkpoint 2^10 on.
                let mut worst_avg = f64::NEG_INFINITY;
                let mut monotone = true;
                for gt in &report.groups {
                    let final_size = *gt.sizes.last().unwrap();
                    let final_regret = gt.regret.last().unwrap().unwrap();
                    if final_size >= 10_000 {
                        worst_avg = worst_avg.max(final_regret / final_size as f64);
                    }
                    let mut prev: Option<f64> = None;
                    for (i, &cp) in report.checkpoints.iter().enumerate() {
                        if cp < 1024 || gt.sizes[i] == 0 {
                            continue;
                        }
                        let avg = gt.regret[i].unwrap() / gt.sizes[i] as f64;
                        if let Some(p) = prev {
                            if avg > p + 1e-9 {
                                monotone = false;
                            }
                        }
                        prev = Some(avg);
                    }
                }
                (worst_sleeping, worst_avg, monotone)
            })
            .collect()
    });

    let worst_sleeping = results.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let worst_avg = results.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let all_monotone = results.iter().all(|r| r.2);

    vec![
        Check::new(
            "C1a",
            "sleeping regret within 4·sqrt(T(h)·ln N) + 10 on all seeds",
            worst_sleeping <= 1.0,
            format!("worst regret/bound ratio {worst_sleeping:.4} (threshold 1.0, {SEEDS} seeds, T={T})"),
        ),
        Check::new(
            "C1b",
            "per-group average regret ≤ 0.05 at T(g) ≥ 10000",
            worst_avg <= 0.05,
            format!("worst subgroup_regret(g)/T(g) = {worst_avg:.5} (threshold 0.05)"),
        ),
        Check::new(
            "C1c",
            "average subgroup regret non-increasing across checkpoints ≥ 2^10",
            all_monotone,
            format!("monotone on all {SEEDS} seeds: {all_monotone}"),
        ),
    ]
}

// --------------------------------------------------------------------------
// Criterion 2: the sleeping-experts incentive failure
// --------------------------------------------------------------------------

pub fn criterion2_ic_counterexample() -> Vec<Check> {
    const T: u64 = 20_000;
    const SEEDS: u64 = 10;
    let (stream, pool) = gen_ic_instance(T, true).expect("even T");
    let group_b = GroupId(0);
    let hidden = pool.group_experts(group_b);

    let mut gains = Vec::new();
    for _seed in 0..SEEDS {
        let report = ic_gain(&pool, group_b, &hidden, |p| {
            let s = restrict_stream(&stream, p)?;
            let mut learner = AnhLearner::new(p);
            Ok(run_full_feedback(&s, p, &mut learner)?.history)
        })
        .expect("ic gain");
        gains.push(report.gain / T as f64);
    }
    let mean_gain = gains.iter().sum::<f64>() / gains.len() as f64;

    // Probability of following the global expert on B∖S rounds after the
    // burn-in, from the baseline (nothing hidden) run.
    let frequency = {
        let mut learner = AnhLearner::new(&pool);
        let out = run_full_feedback(&stream, &pool, &mut learner).expect("run");
        let f_global = pool.global_comparators()[0];
        let mut below_half = 0u64;
        let mut total = 0u64;
        for entry in &out.history.entries {
            let t = entry.round.t;
            if t % 2 == 0 && t > 1000 {
                total += 1;
                if entry.dist.prob(f_global) <= 0.5 + 1e-12 {
                    below_half += 1;
                }
            }
        }
        below_half as f64 / total as f64
    };

    vec![
        Check::new(
            "C2a",
            "hiding the big group's copy gains ≥ 0.03·T under the sleeping learner",
            mean_gain >= 0.03,
            format!("mean ic_gain/T = {mean_gain:.5} over {SEEDS} seeds (threshold 0.03; T={T})"),
        ),
        Check::new(
            "C2b",
            "P(follow global expert) ≤ 1/2 on ≥ 90% of B∖S rounds after burn-in",
            frequency >= 0.9,
            format!("frequency {frequency:.4} (threshold 0.9, burn-in 1000 rounds)"),
        ),
    ]
}

// --------------------------------------------------------------------------
// Criterion 3: the per-intersection ensemble is (asymptotically) IC
// --------------------------------------------------------------------------

fn c3_random_spec(instance_seed: u64, t: u64) -> InstanceSpec {
    // Two overlapping groups, N = 6, per-(base, profile) Bernoulli means.
    let mut rng = sub_rng(instance_seed, "loss-model");
    use rand::Rng;
    let bases = ["r0", "r1", "p00", "p01", "p10", "p11"];
    let mut loss = Vec::new();
    for base in bases {
        let mut per_profile = Vec::new();
        for bits in 0..4u64 {
            let p = 0.1 + 0.8 * rng.random::<f64>();
            per_profile.push(ProfileOverride {
                profile: GroupSet(bits),
                model: LossKind::Bernoulli { p },
            });
        }
        loss.push(BaseLoss {
            base: base.to_string(),
            model: LossModel { model: LossKind::Uniform { lo: 0.0, hi: 1.0 }, per_profile },
        });
    }
    InstanceSpec {
        t,
        groups: 2,
        membership: vec![0.55, 0.5],
        pool: PoolSpec {
            global: vec!["r0".into(), "r1".into()],
            group: vec![
                GroupExperts { id: 0, experts: vec!["p00".into(), "p01".into()] },
                GroupExperts { id: 1, experts: vec!["p10".into(), "p11".into()] },
            ],
            additions: vec![],
        },
        loss,
    }
}

/// |gain| bound for the ensemble: 8·√(T(g)·ln N)·log₂ T.
fn ensemble_gain_bound(t_g: u64, n: usize, t: u64) -> f64 {
    8.0 * ((t_g as f64) * (n as f64).ln()).sqrt() * (t as f64).log2()
}

fn ensemble_ic_gains(stream: &Stream, pool: &ExpertPool, t: u64) -> Vec<(u8, f64, f64)> {
    let mut rows = Vec::new();
    for g in 0..stream.n_groups {
        let g = GroupId(g);
        for hidden in pool.group_experts(g) {
            let report = ic_gain(pool, g, &[hidden], |p| {
                let s = restrict_stream(stream, p)?;
                let mut learner = IntersectionEnsemble::new();
                Ok(run_full_feedback(&s, p, &mut learner)?.history)
            })
            .expect("ic gain");
            let bound = ensemble_gain_bound(report.group_size, pool.len(), t);
            rows.push((g.0, report.gain, bound));
        }
    }
    rows
}

pub fn criterion3_ensemble_ic() -> Vec<Check> {
    const T_IC: u64 = 20_000;
    const T_RANDOM: u64 = 10_000;

    let mut worst_ratio = f64::NEG_INFINITY;
    let mut worst_abs = 0.0f64;
    let mut n_checks = 0usize;

    let (stream, pool) = gen_ic_instance(T_IC, true).expect("even T");
    for (_, gain, bound) in ensemble_ic_gains(&stream, &pool, T_IC) {
        worst_ratio = worst_ratio.max(gain.abs() / bound);
        worst_abs = worst_abs.max(gain.abs());
        n_checks += 1;
    }

    for instance_seed in 100..105u64 {
        let spec = c3_random_spec(instance_seed, T_RANDOM);
        let (stream, pool) = gen_random_adversary(&spec, instance_seed).expect("valid spec");
        for (_, gain, bound) in ensemble_ic_gains(&stream, &pool, T_RANDOM) {
            worst_ratio = worst_ratio.max(gain.abs() / bound);
            worst_abs = worst_abs.max(gain.abs());
            n_checks += 1;
        }
    }

    vec![Check::new(
        "C3",
        "ensemble hiding gains within 8·sqrt(T(g)·ln N)·log2 T for every singleton",
        worst_ratio <= 1.0,
        format!(
            "worst |gain|/bound = {worst_ratio:.5} over {n_checks} hidden sets (worst |gain| = {worst_abs:.2})"
        ),
    )]
}

// --------------------------------------------------------------------------
// Criterion 4: the min-max impossibility scan
// --------------------------------------------------------------------------

pub fn criterion4_impossibility() -> Vec<Check> {
    let inst = gen_overlap_instance(1000, 1, true).expect("valid n");
    let scan = impossibility_scan(&inst, 10_001).expect("scan");
    let target = 5.0 / 18.0;
    let scan_ok = (scan.min_max - target).abs() <= 1e-9 && scan.min_max > 0.25;

    let rate_a = fpr_fnr(
        &inst.predictions(OverlapInstance::predict_a),
        &inst.labels(),
        &inst.mask_a(),
    )
    .expect("rates");
    let rate_b = fpr_fnr(
        &inst.predictions(OverlapInstance::predict_b),
        &inst.labels(),
        &inst.mask_b(),
    )
    .expect("rates");
    let own = 1.0 / 18.0;
    let rates_ok =
        rate_a.unweighted_avg() == Some(own) && rate_b.unweighted_avg() == Some(own);

    vec![
        Check::new(
            "C4a",
            "grid min-max of the unweighted objective equals 5/18 (> 1/4)",
            scan_ok,
            format!(
                "min-max {:.10} at p = {} over {} grid points (target {target:.10})",
                scan.min_max, scan.best_p, scan.grid_points
            ),
        ),
        Check::new(
            "C4b",
            "each group's own predictor achieves exactly 1/18 on its group",
            rates_ok,
            format!(
                "f_A: ({:?}, {:?}), f_B: ({:?}, {:?})",
                rate_a.fpr, rate_a.fnr, rate_b.fpr, rate_b.fnr
            ),
        ),
    ]
}

// --------------------------------------------------------------------------
// Criterion 5: phase-estimator unbiasedness
// --------------------------------------------------------------------------

pub fn criterion5_estimator_unbiasedness() -> Vec<Check> {
    // Fixed 10-round phase with three experts and assorted losses (sevenths
    // keep the sums non-trivial in binary floating point).
    let phase: Vec<LossMap> = (0..10u32)
        .map(|i| {
            LossMap::new(vec![
                (ExpertId(0), i as f64 / 10.0),
                (ExpertId(1), ((i * 3) % 7) as f64 / 7.0),
                (ExpertId(2), ((9 - i) as f64) / 10.0),
            ])
            .unwrap()
        })
        .collect();
    let len = phase.len();

    let mut worst = 0.0f64;
    for expert in 0..3u32 {
        let id = ExpertId(expert);
        // Enumerate every equally likely exploration position: position j
        // contributes the losses at round j as the phase's estimate.
        let mean_estimate = (0..len)
            .map(|position| phase[position].get(id).unwrap())
            .sum::<f64>()
            / len as f64;
        // Phase average, accumulated in the opposite order so the two
        // routes do not share a float-summation path.
        let phase_average =
            phase.iter().rev().map(|l| l.get(id).unwrap()).sum::<f64>() / len as f64;
        worst = worst.max((mean_estimate - phase_average).abs());
    }

    vec![Check::new(
        "C5",
        "mean over all exploration positions equals the phase average",
        worst <= 1e-12,
        format!("worst |mean estimate − phase average| = {worst:.2e} over 3 experts × 10 positions (tolerance 1e-12)"),
    )]
}

// --------------------------------------------------------------------------
// Criterion 6: exact exploration-cost accounting
// --------------------------------------------------------------------------

fn cyclic_stream(t: u64) -> (Stream, ExpertPool) {
    let pool = subfair_core::build_pool(
        &["f".into()],
        &[(GroupId(0), vec!["a".into()]), (GroupId(1), vec!["b".into()])],
    );
    let rounds: Vec<Round> = (1..=t)
        .map(|i| {
            let groups = match i % 3 {
                1 => GroupSet::from_groups(&[GroupId(0)]),
                2 => GroupSet::from_groups(&[GroupId(1)]),
                _ => GroupSet::from_groups(&[GroupId(0), GroupId(1)]),
            };
            let probe = Round::new(i, groups, LossMap::new(vec![]).unwrap(), None);
            let losses: Vec<(ExpertId, f64)> = pool
                .awake_set(&probe)
                .into_iter()
                .map(|id| (id, ((i + id.0 as u64) % 4) as f64 / 4.0))
                .collect();
            Round::new(i, groups, LossMap::new(losses).unwrap(), None)
        })
        .collect();
    (Stream::new(2, rounds).unwrap(), pool)
}

pub fn criterion6_exploration_cost() -> Vec<Check> {
    // Reduction 1 on a three-profile stream with non-cube sizes.
    let (stream, pool) = cyclic_stream(700);
    let out = run_reduction1(&stream, &pool, mw_base_factory(), None, 41).expect("run");
    let expected_r1: u64 =
        stream.meta().intersection_sizes.values().map(|&s| ceil_two_thirds(s)).sum();
    let r1_ok = out.exploration.count() == expected_r1
        && out.exploration.charged_cost() == expected_r1 as f64;
    let r1_detail = format!(
        "reduction 1: |E| = {} (expected Σ⌈T(I)^(2/3)⌉ = {expected_r1})",
        out.exploration.count()
    );

    // Reduction 2 at a cube and a non-cube horizon.
    let mut r2_ok = true;
    let mut r2_detail = String::new();
    for t in [1000u64, 777] {
        let (stream, pool) = cyclic_stream(t);
        let mut base = AnhLearner::new(&pool);
        let out = run_reduction2(&stream, &pool, &mut base, 13).expect("run");
        let expected = ceil_two_thirds(t);
        if out.exploration.count() != expected {
            r2_ok = false;
        }
        if !r2_detail.is_empty() {
            r2_detail.push_str(", ");
        }
        r2_detail.push_str(&format!("T={t}: |E| = {} (expected {expected})", out.exploration.count()));
    }

    vec![
        Check::new("C6a", "reduction 1 explores exactly Σ⌈T(I)^(2/3)⌉ rounds", r1_ok, r1_detail),
        Check::new("C6b", "reduction 2 explores exactly ⌈T^(2/3)⌉ rounds", r2_ok, r2_detail),
    ]
}

// --------------------------------------------------------------------------
// Criterion 7: scaling slopes of reductions 2 and 3
// --------------------------------------------------------------------------

fn c7_spec(t: u64) -> InstanceSpec {
    InstanceSpec {
        t,
        groups: 2,
        membership: vec![0.6, 0.5],
        pool: PoolSpec {
            global: vec!["g0".into(), "g1".into()],
            group: vec![
                GroupExperts { id: 0, experts: vec!["a0".into(), "a1".into()] },
                GroupExperts { id: 1, experts: vec!["b0".into(), "b1".into()] },
            ],
            additions: vec![],
        },
        loss: vec![
            BaseLoss { base: "g0".into(), model: LossModel::bernoulli(0.35) },
            BaseLoss { base: "g1".into(), model: LossModel::bernoulli(0.5) },
            BaseLoss { base: "a0".into(), model: LossModel::bernoulli(0.2) },
            BaseLoss { base: "a1".into(), model: LossModel::bernoulli(0.55) },
            BaseLoss { base: "b0".into(), model: LossModel::bernoulli(0.25) },
            BaseLoss { base: "b1".into(), model: LossModel::bernoulli(0.5) },
        ],
    }
}

fn fit_reduction_slope(reduction: u8, horizons: &[u64], seeds: u64) -> Vec<(u8, f64, f64)> {
    let jobs: Vec<(u64, u64)> = horizons
        .iter()
        .flat_map(|&t| (1..=seeds).map(move |s| (t, s)))
        .collect();
    let results: Vec<(u64, u64, Vec<(u8, f64, u64)>)> = thread_pool().install(|| {
        jobs.par_iter()
            .map(|&(t, seed)| {
                let spec = c7_spec(t);
                let (stream, pool) = gen_random_adversary(&spec, seed).expect("valid spec");
                let mut base = AnhLearner::new(&pool);
                let out = match reduction {
                    2 => run_reduction2(&stream, &pool, &mut base, seed).expect("run"),
                    3 => run_reduction3(&stream, &pool, &mut base, seed, DrawRange::Cap, None)
                        .expect("run")
                        .0,
                    _ => unreachable!(),
                };
                let rows = (0..2u8)
                    .map(|g| {
                        let regret = out.report.final_subgroup(GroupId(g)).unwrap();
                        let size = out.report.final_group_size(GroupId(g)).unwrap();
                        (g, regret, size)
                    })
                    .collect();
                (t, seed, rows)
            })
            .collect()
    });

    // Deterministic aggregation: (t, seed) order.
    let mut sorted = results;
    sorted.sort_by_key(|&(t, seed, _)| (t, seed));
    let mut fits = Vec::new();
    for g in 0..2u8 {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &t in horizons {
            let rows: Vec<&(u64, u64, Vec<(u8, f64, u64)>)> =
                sorted.iter().filter(|&&(rt, _, _)| rt == t).collect();
            let mean_regret: f64 = rows
                .iter()
                .map(|(_, _, v)| v.iter().find(|r| r.0 == g).unwrap().1)
                .sum::<f64>()
                / rows.len() as f64;
            let mean_size: f64 = rows
                .iter()
                .map(|(_, _, v)| v.iter().find(|r| r.0 == g).unwrap().2 as f64)
                .sum::<f64>()
                / rows.len() as f64;
            xs.push(mean_size.ln());
            ys.push(mean_regret.ln());
        }
        let (slope, stderr) = ols_slope(&xs, &ys);
        fits.push((g, slope, stderr));
    }
    fits
}

pub fn criterion7_reduction_scaling() -> Vec<Check> {
    let horizons: Vec<u64> = (12..=17).map(|k| 1u64 << k).collect();
    const SEEDS: u64 = 20;

    let fits2 = fit_reduction_slope(2, &horizons, SEEDS);
    let worst2 = fits2.iter().map(|f| f.1).fold(f64::NEG_INFINITY, f64::max);
    let detail2 = fits2
        .iter()
        .map(|(g, s, se)| format!("g{g}: {s:.3}±{se:.3}"))
        .collect::<Vec<_>>()
        .join(", ");

    let fits3 = fit_reduction_slope(3, &horizons, SEEDS);
    let worst3 = fits3.iter().map(|f| f.1).fold(f64::NEG_INFINITY, f64::max);
    let detail3 = fits3
        .iter()
        .map(|(g, s, se)| format!("g{g}: {s:.3}±{se:.3}"))
        .collect::<Vec<_>>()
        .join(", ");

    vec![
        Check::new(
            "C7a",
            "reduction 2 log-log slope of subgroup regret vs T(g) ≤ 0.85",
            worst2 <= 0.85,
            format!("slopes {detail2} over T ∈ 2^12..2^17, {SEEDS} seeds (threshold 0.85)"),
        ),
        Check::new(
            "C7b",
            "reduction 3 log-log slope of subgroup regret vs T(g) ≤ 0.90",
            worst3 <= 0.90,
            format!("slopes {detail3} over T ∈ 2^12..2^17, {SEEDS} seeds (threshold 0.90)"),
        ),
    ]
}

// --------------------------------------------------------------------------
// Criterion 8: step functions match straight-line re-implementations
// --------------------------------------------------------------------------

/// Naive AdaNormalHedge transcription: arrays, no shared code with the
/// production learner.
#[derive(Clone, Copy)]
struct NaiveAnh {
    r: [f64; 3],
    c: [f64; 3],
}

impl NaiveAnh {
    fn new() -> NaiveAnh {
        NaiveAnh { r: [0.0; 3], c: [0.0; 3] }
    }

    fn weight(r: f64, c: f64) -> f64 {
        let phi = |x: f64, cc: f64| -> f64 {
            let m = if x > 0.0 { x } else { 0.0 };
            (m * m / (3.0 * cc)).exp()
        };
        0.5 * (phi(r + 1.0, c + 1.0) - phi(r - 1.0, c + 1.0))
    }

    fn predict(&self) -> [f64; 3] {
        let q = 1.0 / 3.0;
        let mut w = [0.0; 3];
        let mut total = 0.0;
        for i in 0..3 {
            w[i] = q * Self::weight(self.r[i], self.c[i]);
            total += w[i];
        }
        if total <= 0.0 {
            [1.0 / 3.0; 3]
        } else {
            [w[0] / total, w[1] / total, w[2] / total]
        }
    }

    fn update(&mut self, probs: &[f64; 3], losses: &[f64; 3]) {
        let hat = probs[0] * losses[0] + probs[1] * losses[1] + probs[2] * losses[2];
        for i in 0..3 {
            let inst = hat - losses[i];
            self.r[i] += inst;
            self.c[i] += inst.abs();
        }
    }
}

/// Naive multiplicative weights: direct (1−η)^ℓ products.
#[derive(Clone, Copy)]
struct NaiveMw {
    w: [f64; 3],
    eta: f64,
}

impl NaiveMw {
    fn new(eta: f64) -> NaiveMw {
        NaiveMw { w: [1.0; 3], eta }
    }

    fn predict(&self) -> [f64; 3] {
        let total = self.w[0] + self.w[1] + self.w[2];
        [self.w[0] / total, self.w[1] / total, self.w[2] / total]
    }

    fn update(&mut self, losses: &[f64; 3]) {
        for i in 0..3 {
            self.w[i] *= (1.0 - self.eta).powf(losses[i]);
        }
    }
}

const LEVELS: [f64; 3] = [0.0, 0.5, 1.0];

/// All 27 per-round loss vectors over {0, ½, 1}³.
fn loss_vectors() -> Vec<[f64; 3]> {
    let mut v = Vec::with_capacity(27);
    for &a in &LEVELS {
        for &b in &LEVELS {
            for &c in &LEVELS {
                v.push([a, b, c]);
            }
        }
    }
    v
}

fn anh_dfs(
    learner: &mut AnhLearner,
    naive: NaiveAnh,
    pool: &ExpertPool,
    awake: &[ExpertId],
    vectors: &[[f64; 3]],
    depth: u32,
    max_depth: u32,
    worst: &mut f64,
) {
    let t = depth as u64 + 1;
    let dist = learner.predict(pool, t, awake).expect("predict");
    let probs = naive.predict();
    for i in 0..3 {
        let diff = (dist.prob(ExpertId(i as u32)) - probs[i]).abs();
        if diff > *worst {
            *worst = diff;
        }
    }
    if depth == max_depth {
        return;
    }
    for losses in vectors {
        let round = Round::new(
            t,
            GroupSet::EMPTY,
            LossMap::new(vec![
                (ExpertId(0), losses[0]),
                (ExpertId(1), losses[1]),
                (ExpertId(2), losses[2]),
            ])
            .unwrap(),
            None,
        );
        let saved: Vec<_> = (0..3).map(|i| learner.state(ExpertId(i))).collect();
        let mut child_naive = naive;
        learner.update(&dist, &round, awake).expect("update");
        child_naive.update(&probs, losses);
        for i in 0..3 {
            let s = learner.state(ExpertId(i as u32));
            let dr = (s.regret - child_naive.r[i]).abs();
            let dc = (s.abs_regret - child_naive.c[i]).abs();
            if dr > *worst {
                *worst = dr;
            }
            if dc > *worst {
                *worst = dc;
            }
        }
        anh_dfs(learner, child_naive, pool, awake, vectors, depth + 1, max_depth, worst);
        for (i, s) in saved.iter().enumerate() {
            learner.set_state(ExpertId(i as u32), *s);
        }
    }
}

fn mw_dfs(
    mw: &mut MwLearner,
    naive: NaiveMw,
    vectors: &[[f64; 3]],
    depth: u32,
    max_depth: u32,
    worst: &mut f64,
) {
    let dist = mw.distribution().expect("distribution");
    let probs = naive.predict();
    for i in 0..3 {
        let diff = (dist.prob(ExpertId(i as u32)) - probs[i]).abs();
        if diff > *worst {
            *worst = diff;
        }
    }
    if depth == max_depth {
        return;
    }
    for losses in vectors {
        let loss_map = LossMap::new(vec![
            (ExpertId(0), losses[0]),
            (ExpertId(1), losses[1]),
            (ExpertId(2), losses[2]),
        ])
        .unwrap();
        let saved: Vec<f64> = mw.log_weights().to_vec();
        let mut child_naive = naive;
        mw.apply_losses(&loss_map).expect("apply");
        child_naive.update(losses);
        for i in 0..3 {
            let impl_w = mw.weight(ExpertId(i as u32)).unwrap();
            let diff = (impl_w - child_naive.w[i]).abs();
            if diff > *worst {
                *worst = diff;
            }
        }
        mw_dfs(mw, child_naive, vectors, depth + 1, max_depth, worst);
        mw.restore_log_weights(&saved);
    }
}

pub fn criterion8_oracle_equivalence() -> Vec<Check> {
    const T: u32 = 6;
    let vectors = loss_vectors();
    let pool = subfair_core::build_pool(&["a".into(), "b".into(), "c".into()], &[]);
    let awake: Vec<ExpertId> = (0..3).map(ExpertId).collect();

    // Parallelize over the first two rounds' loss vectors (27² subtrees);
    // every deeper prefix is checked inside its subtree, which covers all
    // sequences with T ≤ 6 and N ≤ 3.
    let prefixes: Vec<(usize, usize)> = (0..27)
        .flat_map(|a| (0..27).map(move |b| (a, b)))
        .collect();

    let worst_anh = thread_pool().install(|| {
        prefixes
            .par_iter()
            .map(|&(a, b)| {
                let mut worst = 0.0f64;
                let mut learner = AnhLearner::new(&pool);
                let mut naive = NaiveAnh::new();
                for &idx in &[a, b] {
                    let losses = vectors[idx];
                    let t = if idx == a { 1 } else { 2 };
                    let dist = learner.predict(&pool, t, &awake).expect("predict");
                    let probs = naive.predict();
                    for i in 0..3 {
                        worst = worst.max((dist.prob(ExpertId(i as u32)) - probs[i]).abs());
                    }
                    let round = Round::new(
                        t,
                        GroupSet::EMPTY,
                        LossMap::new(vec![
                            (ExpertId(0), losses[0]),
                            (ExpertId(1), losses[1]),
                            (ExpertId(2), losses[2]),
                        ])
                        .unwrap(),
                        None,
                    );
                    learner.update(&dist, &round, &awake).expect("update");
                    naive.update(&probs, &losses);
                }
                anh_dfs(&mut learner, naive, &pool, &awake, &vectors, 2, T, &mut worst);
                worst
            })
            .reduce(|| 0.0, f64::max)
    });

    let eta = 0.3;
    let worst_mw = thread_pool().install(|| {
        prefixes
            .par_iter()
            .map(|&(a, b)| {
                let mut worst = 0.0f64;
                let mut mw = MwLearner::new(awake.clone(), eta).expect("mw");
                let mut naive = NaiveMw::new(eta);
                for &idx in &[a, b] {
                    let losses = vectors[idx];
                    let dist = mw.distribution().expect("distribution");
                    let probs = naive.predict();
                    for i in 0..3 {
                        worst = worst.max((dist.prob(ExpertId(i as u32)) - probs[i]).abs());
                    }
                    let loss_map = LossMap::new(vec![
                        (ExpertId(0), losses[0]),
                        (ExpertId(1), losses[1]),
                        (ExpertId(2), losses[2]),
                    ])
                    .unwrap();
                    mw.apply_losses(&loss_map).expect("apply");
                    naive.update(&losses);
                }
                mw_dfs(&mut mw, naive, &vectors, 2, T, &mut worst);
                worst
            })
            .reduce(|| 0.0, f64::max)
    });

    vec![
        Check::new(
            "C8a",
            "sleeping-learner steps match the straight-line formulas on all {0,½,1} sequences",
            worst_anh <= 1e-12,
            format!("worst deviation {worst_anh:.2e} over all T ≤ 6, N = 3 sequences (tolerance 1e-12)"),
        ),
        Check::new(
            "C8b",
            "multiplicative-weights steps match the direct-product formulas",
            worst_mw <= 1e-12,
            format!("worst deviation {worst_mw:.2e} (tolerance 1e-12)"),
        ),
    ]
}
