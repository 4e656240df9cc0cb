//! AdaNormalHedge, sleeping-experts version.
//!
//! Every expert i keeps two scalars: R, the cumulative instantaneous regret
//! over the rounds it fired, and C, the cumulative absolute instantaneous
//! regret. The potential Φ(R,C) = exp(max(0,R)² / (3C)) turns them into a
//! weight
//!
//!   w(R,C) = ½ (Φ(R+1, C+1) − Φ(R−1, C+1))
//!
//! and the learner plays p_{t,i} ∝ q_i · w(R_i, C_i) over the awake set,
//! falling back to uniform over the awake set when every awake weight is
//! zero. After the losses arrive, each awake expert's instantaneous regret
//! r_i = ℓ̂_t − ℓ_{t,i} updates R_i += r_i and C_i += |r_i|; sleeping
//! experts keep their state untouched.
//!
//! The update always evaluates Φ at C+1 ≥ 1, so the C = 0 start needs no
//! special casing.

use crate::error::{Error, Result};
use crate::experts::{ExpertId, ExpertPool};
use crate::metrics::expected_loss;
use crate::types::{Distribution, Round};

use super::Learner;

/// Potential Φ(R,C) = exp(max(0,R)² / (3C)). Callers pass C ≥ 1.
fn potential(r: f64, c: f64) -> f64 {
    let top = r.max(0.0);
    (top * top / (3.0 * c)).exp()
}

/// AdaNormalHedge weight w(R,C) = ½(Φ(R+1,C+1) − Φ(R−1,C+1)).
///
/// Non-negative; zero exactly when R ≤ −1; non-decreasing in R for fixed C.
pub fn anh_weight(r: f64, c: f64) -> f64 {
    debug_assert!(c >= 0.0, "C must be non-negative");
    0.5 * (potential(r + 1.0, c + 1.0) - potential(r - 1.0, c + 1.0))
}

/// Per-expert AdaNormalHedge state.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AnhExpertState {
    /// Cumulative instantaneous regret over fired rounds.
    pub regret: f64,
    /// Cumulative absolute instantaneous regret; C ≥ |R| always.
    pub abs_regret: f64,
}

/// Prior q over experts. Uniform renormalizes over however many experts the
/// pool currently holds, so dynamically added experts join a still-uniform
/// prior. A fixed prior exists for tests.
#[derive(Debug, Clone, Default)]
pub enum Prior {
    #[default]
    Uniform,
    Fixed(Vec<(ExpertId, f64)>),
}

impl Prior {
    fn weight(&self, id: ExpertId, n_current: usize) -> f64 {
        match self {
            Prior::Uniform => 1.0 / n_current as f64,
            Prior::Fixed(qs) => qs
                .iter()
                .find(|(e, _)| *e == id)
                .map(|(_, q)| *q)
                .unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct AnhLearner {
    states: Vec<AnhExpertState>,
    prior: Prior,
}

impl AnhLearner {
    pub fn new(pool: &ExpertPool) -> AnhLearner {
        AnhLearner { states: vec![AnhExpertState::default(); pool.id_capacity()], prior: Prior::Uniform }
    }

    pub fn with_prior(pool: &ExpertPool, prior: Prior) -> AnhLearner {
        AnhLearner { states: vec![AnhExpertState::default(); pool.id_capacity()], prior }
    }

    fn ensure(&mut self, id: ExpertId) {
        if id.index() >= self.states.len() {
            self.states.resize(id.index() + 1, AnhExpertState::default());
        }
    }

    pub fn state(&self, id: ExpertId) -> AnhExpertState {
        self.states.get(id.index()).copied().unwrap_or_default()
    }

    /// Direct state override for tests and oracles.
    pub fn set_state(&mut self, id: ExpertId, state: AnhExpertState) {
        self.ensure(id);
        self.states[id.index()] = state;
    }

    /// Distribution over the awake experts, p_i ∝ q_i · w(R_i, C_i); uniform
    /// over the awake set when every awake weight is zero.
    pub fn predict(&mut self, pool: &ExpertPool, t: u64, awake: &[ExpertId]) -> Result<Distribution> {
        if awake.is_empty() {
            return Err(Error::EmptyAwakeSet { t });
        }
        let n_current = pool.len().max(1);
        let mut weights = Vec::with_capacity(awake.len());
        let mut total = 0.0;
        for &id in awake {
            self.ensure(id);
            let s = self.states[id.index()];
            let w = self.prior.weight(id, n_current) * anh_weight(s.regret, s.abs_regret);
            total += w;
            weights.push((id, w));
        }
        if total <= 0.0 {
            return Distribution::uniform(awake.to_vec());
        }
        Distribution::from_weights(weights)
    }

    /// Updates R and C of every awake expert with its instantaneous regret
    /// against the played distribution's charged loss ℓ̂.
    pub fn update(&mut self, dist: &Distribution, round: &Round, awake: &[ExpertId]) -> Result<()> {
        let hat = expected_loss(dist, &round.losses).map_err(|_| Error::MalformedRound {
            t: round.t,
            reason: "distribution support not covered by round losses".into(),
        })?;
        for &id in awake {
            let loss = round.losses.get(id).ok_or_else(|| Error::MalformedRound {
                t: round.t,
                reason: format!("awake expert {id} has no loss"),
            })?;
            self.ensure(id);
            let r = hat - loss;
            let s = &mut self.states[id.index()];
            s.regret += r;
            s.abs_regret += r.abs();
        }
        Ok(())
    }
}

impl Learner for AnhLearner {
    fn predict(&mut self, pool: &ExpertPool, round: &Round, awake: &[ExpertId])
        -> Result<Distribution> {
        AnhLearner::predict(self, pool, round.t, awake)
    }

    fn observe(&mut self, round: &Round, dist: &Distribution, awake: &[ExpertId]) -> Result<()> {
        self.update(dist, round, awake)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experts::{build_pool, ActivationRule};
    use crate::types::{GroupSet, LossMap};
    use approx::assert_relative_eq;

    fn lm(entries: &[(u32, f64)]) -> LossMap {
        LossMap::new(entries.iter().map(|&(i, l)| (ExpertId(i), l)).collect()).unwrap()
    }

    fn round(t: u64, losses: &[(u32, f64)]) -> Round {
        Round::new(t, GroupSet::EMPTY, lm(losses), None)
    }

    fn two_expert_pool() -> ExpertPool {
        build_pool(&["a".into(), "b".into()], &[])
    }

    #[test]
    fn weight_at_origin() {
        // ½(Φ(1,1) − Φ(−1,1)) = ½(e^{1/3} − 1), evaluated directly.
        let expected = 0.5 * ((1.0f64 / 3.0).exp() - 1.0);
        assert_relative_eq!(anh_weight(0.0, 0.0), expected, max_relative = 1e-12);
    }

    #[test]
    fn weight_zero_when_regret_below_minus_one() {
        assert_eq!(anh_weight(-5.0, 10.0), 0.0);
        assert_eq!(anh_weight(-1.0, 3.0), 0.0);
    }

    #[test]
    fn weight_at_two_three() {
        // ½(e^{9/12} − e^{1/12}), evaluated directly.
        let expected = 0.5 * ((9.0f64 / 12.0).exp() - (1.0f64 / 12.0).exp());
        assert_relative_eq!(anh_weight(2.0, 3.0), expected, max_relative = 1e-12);
        assert_relative_eq!(anh_weight(2.0, 3.0), 0.515048, max_relative = 1e-5);
    }

    #[test]
    fn fresh_learner_is_uniform_by_symmetry() {
        let pool = two_expert_pool();
        let mut learner = AnhLearner::new(&pool);
        let d = learner.predict(&pool, 1, &[ExpertId(0), ExpertId(1)]).unwrap();
        assert_eq!(d.prob(ExpertId(0)), 0.5);
        assert_eq!(d.prob(ExpertId(1)), 0.5);
    }

    #[test]
    fn predict_from_nontrivial_state() {
        let pool = two_expert_pool();
        let mut learner = AnhLearner::new(&pool);
        learner.set_state(ExpertId(0), AnhExpertState { regret: 0.5, abs_regret: 0.5 });
        learner.set_state(ExpertId(1), AnhExpertState { regret: -0.5, abs_regret: 0.5 });
        let d = learner.predict(&pool, 1, &[ExpertId(0), ExpertId(1)]).unwrap();
        // Hand evaluation: w(0.5,0.5) = ½(e^{0.5}−1), w(−0.5,0.5) = ½(e^{1/18}−1).
        let w0 = 0.5 * (0.5f64.exp() - 1.0);
        let w1 = 0.5 * ((1.0f64 / 18.0).exp() - 1.0);
        assert_relative_eq!(d.prob(ExpertId(0)), w0 / (w0 + w1), max_relative = 1e-12);
        assert_relative_eq!(d.prob(ExpertId(0)), 0.91907, max_relative = 1e-5);
        assert_relative_eq!(d.prob(ExpertId(1)), 0.08093, max_relative = 1e-4);
    }

    #[test]
    fn all_zero_weights_fall_back_to_uniform() {
        let pool = two_expert_pool();
        let mut learner = AnhLearner::new(&pool);
        learner.set_state(ExpertId(0), AnhExpertState { regret: -2.0, abs_regret: 2.0 });
        learner.set_state(ExpertId(1), AnhExpertState { regret: -3.0, abs_regret: 3.0 });
        let d = learner.predict(&pool, 1, &[ExpertId(0), ExpertId(1)]).unwrap();
        assert_eq!(d.prob(ExpertId(0)), 0.5);
        assert_eq!(d.prob(ExpertId(1)), 0.5);
    }

    #[test]
    fn empty_awake_set_errors() {
        let pool = two_expert_pool();
        let mut learner = AnhLearner::new(&pool);
        assert!(matches!(learner.predict(&pool, 3, &[]), Err(Error::EmptyAwakeSet { t: 3 })));
    }

    #[test]
    fn update_splits_regret_and_abs_regret() {
        let pool = two_expert_pool();
        let mut learner = AnhLearner::new(&pool);
        let awake = [ExpertId(0), ExpertId(1)];
        let d = Distribution::uniform(awake.to_vec()).unwrap();
        learner.update(&d, &round(1, &[(0, 0.0), (1, 1.0)]), &awake).unwrap();
        assert_eq!(learner.state(ExpertId(0)), AnhExpertState { regret: 0.5, abs_regret: 0.5 });
        assert_eq!(learner.state(ExpertId(1)), AnhExpertState { regret: -0.5, abs_regret: 0.5 });
    }

    #[test]
    fn sleeping_expert_state_is_untouched() {
        let pool = build_pool(
            &["a".into()],
            &[(crate::types::GroupId(0), vec!["b".into()])],
        );
        let mut learner = AnhLearner::new(&pool);
        // Expert 1 asleep: not in the awake set, no loss recorded for it.
        let awake = [ExpertId(0)];
        let d = Distribution::uniform(awake.to_vec()).unwrap();
        learner.update(&d, &round(1, &[(0, 0.7)]), &awake).unwrap();
        assert_eq!(learner.state(ExpertId(1)), AnhExpertState::default());
        // Expert whose loss equals ℓ̂ sees no state change either.
        assert_eq!(learner.state(ExpertId(0)), AnhExpertState::default());
    }

    #[test]
    fn missing_loss_for_awake_expert_errors() {
        let pool = two_expert_pool();
        let mut learner = AnhLearner::new(&pool);
        let awake = [ExpertId(0), ExpertId(1)];
        let d = Distribution::uniform(vec![ExpertId(0)]).unwrap();
        let err = learner.update(&d, &round(1, &[(0, 0.2)]), &awake).unwrap_err();
        assert!(matches!(err, Error::MalformedRound { .. }));
    }

    #[test]
    fn dynamically_added_expert_starts_fresh_under_uniform_prior() {
        let mut pool = build_pool(&["a".into(), "b".into()], &[]);
        let mut learner = AnhLearner::new(&pool);
        let awake = [ExpertId(0), ExpertId(1)];
        let d = Distribution::uniform(awake.to_vec()).unwrap();
        learner.update(&d, &round(1, &[(0, 0.0), (1, 1.0)]), &awake).unwrap();

        let id = pool.add_expert("c", ActivationRule::Always, 2);
        assert_eq!(learner.state(id), AnhExpertState::default());
        let d = learner
            .predict(&pool, 2, &[ExpertId(0), ExpertId(1), id])
            .unwrap();
        d.validate().unwrap();
        // The fresh expert competes with weight w(0,0) under the renormalized
        // uniform prior; all three probabilities are positive.
        assert!(d.prob(id) > 0.0);
    }
}
