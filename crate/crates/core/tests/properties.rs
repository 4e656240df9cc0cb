//! Property tests for the regret metrics and learners.

use proptest::prelude::*;

use subfair_core::algorithms::anh::{anh_weight, AnhLearner};
use subfair_core::algorithms::mw::MwLearner;
use subfair_core::environments::{gen_random_adversary, BaseLoss, GroupExperts, InstanceSpec, LossModel, PoolSpec};
use subfair_core::feedback::run_full_feedback;
use subfair_core::metrics::{overall_regret, sleeping_regret, subgroup_regret};
use subfair_core::{
    build_pool, Distribution, ExpertId, GroupId, GroupSet, History, LossMap, Round,
};

fn lm(entries: &[(u32, f64)]) -> LossMap {
    LossMap::new(entries.iter().map(|&(i, l)| (ExpertId(i), l)).collect()).unwrap()
}

// --- anh_weight over a grid: non-negative, zero iff R ≤ −1, monotone in R ---

#[test]
fn anh_weight_grid_properties() {
    let rs: Vec<f64> = (-40..=40).map(|i| i as f64 / 4.0).collect();
    let cs: Vec<f64> = [0.0, 0.25, 1.0, 3.0, 10.0, 100.0].to_vec();
    for &c in &cs {
        let mut prev = -1.0;
        for &r in &rs {
            let w = anh_weight(r, c);
            assert!(w >= 0.0, "w({r},{c}) = {w} negative");
            if r <= -1.0 {
                assert_eq!(w, 0.0, "w({r},{c}) should be 0");
            } else {
                assert!(w > 0.0, "w({r},{c}) should be positive");
            }
            assert!(w >= prev, "w not monotone in R at ({r},{c})");
            prev = w;
        }
    }
}

// --- C ≥ |R| after every update sequence ---

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn anh_state_abs_regret_dominates_regret(
        losses in proptest::collection::vec(
            proptest::collection::vec(0.0f64..=1.0, 3),
            1..20,
        ),
    ) {
        let pool = build_pool(&["a".into(), "b".into(), "c".into()], &[]);
        let mut learner = AnhLearner::new(&pool);
        let awake: Vec<ExpertId> = (0..3).map(ExpertId).collect();
        for (t, row) in losses.iter().enumerate() {
            let round = Round::new(
                t as u64 + 1,
                GroupSet::EMPTY,
                lm(&[(0, row[0]), (1, row[1]), (2, row[2])]),
                None,
            );
            let dist = learner.predict(&pool, round.t, &awake).unwrap();
            // Distribution normalization after every learner step.
            dist.validate().unwrap();
            learner.update(&dist, &round, &awake).unwrap();
            for id in &awake {
                let s = learner.state(*id);
                prop_assert!(s.abs_regret >= s.regret.abs() - 1e-12);
                prop_assert!(s.abs_regret >= 0.0);
            }
        }
    }
}

// --- Regret decomposition: overall = max over comparators of sleeping ---

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn overall_regret_is_max_sleeping_regret(
        rows in proptest::collection::vec(
            (
                proptest::collection::vec(0.0f64..=1.0, 3),
                proptest::collection::vec(0.01f64..=1.0, 3),
            ),
            1..12,
        ),
    ) {
        // All experts awake every round; random play distributions.
        let mut history = History::new(0, (0..3).map(ExpertId).collect());
        for (t, (losses, weights)) in rows.iter().enumerate() {
            let round = Round::new(
                t as u64 + 1,
                GroupSet::EMPTY,
                lm(&[(0, losses[0]), (1, losses[1]), (2, losses[2])]),
                None,
            );
            let dist = Distribution::from_weights(
                weights.iter().enumerate().map(|(i, &w)| (ExpertId(i as u32), w)).collect(),
            )
            .unwrap();
            history.push(round, dist, false).unwrap();
        }
        let comparators: Vec<ExpertId> = (0..3).map(ExpertId).collect();
        let overall = overall_regret(&history, &comparators).unwrap();
        let max_sleeping = comparators
            .iter()
            .map(|&h| sleeping_regret(&history, h).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((overall - max_sleeping).abs() < 1e-9,
            "overall {overall} vs max sleeping {max_sleeping}");
    }
}

// --- Disjoint groups partitioning the stream: Σ_g subgroup ≥ overall ---

#[test]
fn disjoint_subgroup_regrets_dominate_overall() {
    // Groups 0/1 partition the rounds; F(g) = F for both.
    for seed in 0..20u64 {
        let spec = InstanceSpec {
            t: 60,
            groups: 2,
            membership: vec![0.0, 0.0], // overridden below
            pool: PoolSpec {
                global: vec!["x".into(), "y".into()],
                group: vec![],
                additions: vec![],
            },
            loss: vec![
                BaseLoss { base: "x".into(), model: LossModel::bernoulli(0.4) },
                BaseLoss { base: "y".into(), model: LossModel::bernoulli(0.6) },
            ],
        };
        let (stream, _pool) = gen_random_adversary(&spec, seed).unwrap();
        // Re-tag rounds so each belongs to exactly one group.
        let rounds: Vec<Round> = stream
            .rounds
            .into_iter()
            .map(|r| {
                let g = if r.t % 2 == 0 { GroupId(0) } else { GroupId(1) };
                Round::new(r.t, GroupSet::from_groups(&[g]), r.losses, r.label)
            })
            .collect();
        let mut history = History::new(2, vec![ExpertId(0), ExpertId(1)]);
        for round in rounds {
            let dist =
                Distribution::from_weights(vec![(ExpertId(0), 0.3), (ExpertId(1), 0.7)]).unwrap();
            history.push(round, dist, false).unwrap();
        }
        let comps = [ExpertId(0), ExpertId(1)];
        let overall = overall_regret(&history, &comps).unwrap();
        let sum: f64 = (0..2)
            .map(|g| subgroup_regret(&history, GroupId(g), &comps).unwrap())
            .sum();
        assert!(
            sum >= overall - 1e-9,
            "seed {seed}: partitioned subgroup regrets {sum} < overall {overall}"
        );
    }
}

// --- Multiplicative weights stays within the best-expert envelope ---

#[test]
fn mw_near_equality_with_best_expert() {
    // For a fixed-η segment: L* ≤ MW loss ≤ L*(1+η) + ln(N)/η + slack.
    // The lower direction is exact for the (1−η)^ℓ update.
    use rand::Rng;
    let mut rng = subfair_core::rng::sub_rng(11, "stream-gen");
    for &n in &[2usize, 4, 6] {
        for &eta in &[0.05, 0.2, 0.5] {
            for &len in &[16u64, 64, 256] {
                let roster: Vec<ExpertId> = (0..n as u32).map(ExpertId).collect();
                let mut mw = MwLearner::new(roster.clone(), eta).unwrap();
                let mut algo_loss = 0.0;
                let mut expert_loss = vec![0.0f64; n];
                for _ in 0..len {
                    let losses: Vec<(ExpertId, f64)> = roster
                        .iter()
                        .map(|&id| (id, (rng.random::<f64>() * 4.0).floor() / 4.0))
                        .collect();
                    let losses = LossMap::new(losses).unwrap();
                    let dist = mw.step(&losses).unwrap();
                    algo_loss +=
                        subfair_core::metrics::expected_loss(&dist, &losses).unwrap();
                    for (i, &id) in roster.iter().enumerate() {
                        expert_loss[i] += losses.get(id).unwrap();
                    }
                }
                let best = expert_loss.iter().cloned().fold(f64::INFINITY, f64::min);
                let envelope = eta * best + (n as f64).ln() / eta;
                assert!(
                    algo_loss >= best - 1e-9,
                    "n={n} eta={eta} len={len}: MW beat the best expert: {algo_loss} < {best}"
                );
                assert!(
                    algo_loss <= best + envelope + 1.0,
                    "n={n} eta={eta} len={len}: {algo_loss} > {best} + {envelope}"
                );
            }
        }
    }
}

// --- Small brute-force equivalence with sleeping experts ---
//
// Enumerates every awake-pattern and loss sequence over {0, ½, 1} for
// N = 2, T = 3 and checks the production learner against a straight-line
// transcription of the prediction and update formulas.

mod straight_line {
    /// Naive AdaNormalHedge: recompute everything from scratch each round.
    pub struct Naive {
        pub r: Vec<f64>,
        pub c: Vec<f64>,
    }

    impl Naive {
        pub fn new(n: usize) -> Naive {
            Naive { r: vec![0.0; n], c: vec![0.0; n] }
        }

        fn phi(x: f64, c: f64) -> f64 {
            let m = if x > 0.0 { x } else { 0.0 };
            (m * m / (3.0 * c)).exp()
        }

        fn w(r: f64, c: f64) -> f64 {
            0.5 * (Self::phi(r + 1.0, c + 1.0) - Self::phi(r - 1.0, c + 1.0))
        }

        /// Probabilities over the awake experts (uniform prior cancels).
        pub fn predict(&self, awake: &[usize]) -> Vec<f64> {
            let n = self.r.len() as f64;
            let q = 1.0 / n;
            let weights: Vec<f64> =
                awake.iter().map(|&i| q * Self::w(self.r[i], self.c[i])).collect();
            let total: f64 = weights.iter().sum();
            if total <= 0.0 {
                vec![1.0 / awake.len() as f64; awake.len()]
            } else {
                weights.iter().map(|w| w / total).collect()
            }
        }

        pub fn update(&mut self, awake: &[usize], probs: &[f64], losses: &[f64]) {
            let hat: f64 = probs.iter().zip(losses).map(|(p, l)| p * l).sum();
            for (k, &i) in awake.iter().enumerate() {
                let inst = hat - losses[k];
                self.r[i] += inst;
                self.c[i] += inst.abs();
            }
        }
    }
}

#[test]
fn anh_matches_straight_line_reimplementation_with_sleeping() {
    use straight_line::Naive;
    let pool = build_pool(&["a".into(), "b".into()], &[]);
    let levels = [0.0, 0.5, 1.0];
    // Per-round options: awake set × losses for the awake experts.
    let mut options: Vec<(Vec<usize>, Vec<f64>)> = Vec::new();
    for awake in [vec![0], vec![1], vec![0, 1]] {
        if awake.len() == 1 {
            for &l in &levels {
                options.push((awake.clone(), vec![l]));
            }
        } else {
            for &l0 in &levels {
                for &l1 in &levels {
                    options.push((awake.clone(), vec![l0, l1]));
                }
            }
        }
    }
    // 15^3 = 3375 sequences of length 3.
    let mut sequences = 0u32;
    for a in 0..options.len() {
        for b in 0..options.len() {
            for c in 0..options.len() {
                let mut learner = AnhLearner::new(&pool);
                let mut naive = Naive::new(2);
                for (t, &idx) in [a, b, c].iter().enumerate() {
                    let (awake_idx, losses) = &options[idx];
                    let awake: Vec<ExpertId> =
                        awake_idx.iter().map(|&i| ExpertId(i as u32)).collect();
                    let pairs: Vec<(u32, f64)> = awake_idx
                        .iter()
                        .zip(losses)
                        .map(|(&i, &l)| (i as u32, l))
                        .collect();
                    let round = Round::new(t as u64 + 1, GroupSet::EMPTY, lm(&pairs), None);
                    let dist = learner.predict(&pool, round.t, &awake).unwrap();
                    let naive_probs = naive.predict(awake_idx);
                    for (k, id) in awake.iter().enumerate() {
                        assert!(
                            (dist.prob(*id) - naive_probs[k]).abs() < 1e-12,
                            "prediction mismatch at t={t}"
                        );
                    }
                    learner.update(&dist, &round, &awake).unwrap();
                    naive.update(awake_idx, &naive_probs, losses);
                    for i in 0..2 {
                        let s = learner.state(ExpertId(i as u32));
                        assert!((s.regret - naive.r[i]).abs() < 1e-12);
                        assert!((s.abs_regret - naive.c[i]).abs() < 1e-12);
                    }
                }
                sequences += 1;
            }
        }
    }
    assert_eq!(sequences, 3375);
}

// --- Empirical sleeping-regret bound on adversarial streams ---

#[test]
fn sleeping_regret_within_adanormalhedge_envelope() {
    // sleeping_regret(h) ≤ 4·√(C_{T,h}·ln N) + 10 on seeded adversarial
    // streams. Also cross-checks that the metric equals the learner's own
    // cumulative regret state under full feedback.
    for seed in 0..3u64 {
        let spec = InstanceSpec {
            t: 20_000,
            groups: 2,
            membership: vec![0.5, 0.3],
            pool: PoolSpec {
                global: vec!["g0".into(), "g1".into()],
                group: vec![
                    GroupExperts { id: 0, experts: vec!["a0".into(), "a1".into(), "a2".into()] },
                    GroupExperts { id: 1, experts: vec!["b0".into(), "b1".into(), "b2".into()] },
                ],
                additions: vec![],
            },
            loss: vec![],
        };
        let (stream, pool) = gen_random_adversary(&spec, seed).unwrap();
        let n = pool.len() as f64;
        let mut learner = AnhLearner::new(&pool);
        let out = run_full_feedback(&stream, &pool, &mut learner).unwrap();
        for expert in pool.experts() {
            let regret = sleeping_regret(&out.history, expert.id).unwrap();
            let state = learner.state(expert.id);
            assert!(
                (regret - state.regret).abs() < 1e-6,
                "metric {regret} vs learner state {}",
                state.regret
            );
            let bound = 4.0 * (state.abs_regret * n.ln()).sqrt() + 10.0;
            assert!(
                regret <= bound,
                "seed {seed} expert {}: sleeping regret {regret} > bound {bound}",
                expert.id
            );
        }
    }
}
