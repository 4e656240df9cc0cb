//! Fixed-rate multiplicative weights over a fixed roster.
//!
//! Weights start at 1 and shrink by w ← w·(1−η)^ℓ after each observed loss.
//! Log-weights are stored internally so long runs cannot underflow; the
//! played distribution is the normalized exponential of the stored logs.

use crate::error::{Error, Result};
use crate::experts::{ExpertId, ExpertPool};
use crate::types::{Distribution, LossMap, Round};

use super::Learner;

/// Learning-rate schedule η = √(log N(A) / T(A)), clamped into (0, 0.5].
///
/// The clamp keeps 1−η bounded away from 0 when the horizon guess is tiny,
/// and substitutes 0.5 when the formula degenerates (N ≤ 1).
pub fn eta_schedule(n_experts: usize, horizon: u64) -> f64 {
    if n_experts <= 1 || horizon == 0 {
        return 0.5;
    }
    let eta = ((n_experts as f64).ln() / horizon as f64).sqrt();
    if eta > 0.5 {
        0.5
    } else {
        eta
    }
}

#[derive(Debug, Clone)]
pub struct MwLearner {
    roster: Vec<ExpertId>,
    log_weights: Vec<f64>,
    eta: f64,
}

impl MwLearner {
    /// New learner over a fixed roster with learning rate η ∈ (0,1).
    pub fn new(mut roster: Vec<ExpertId>, eta: f64) -> Result<MwLearner> {
        if !(0.0..1.0).contains(&eta) || eta == 0.0 {
            return Err(Error::InvalidSpec(format!("learning rate {eta} outside (0,1)")));
        }
        if roster.is_empty() {
            return Err(Error::InvalidSpec("empty multiplicative-weights roster".into()));
        }
        roster.sort();
        roster.dedup();
        let n = roster.len();
        Ok(MwLearner { roster, log_weights: vec![0.0; n], eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn roster(&self) -> &[ExpertId] {
        &self.roster
    }

    /// Current weight of a roster expert, (1−η)^{cumulative loss}.
    pub fn weight(&self, id: ExpertId) -> Option<f64> {
        self.roster
            .binary_search(&id)
            .ok()
            .map(|i| self.log_weights[i].exp())
    }

    /// Distribution proportional to the current weights.
    pub fn distribution(&self) -> Result<Distribution> {
        let max = self.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<(ExpertId, f64)> = self
            .roster
            .iter()
            .zip(&self.log_weights)
            .map(|(&id, &lw)| (id, (lw - max).exp()))
            .collect();
        Distribution::from_weights(weights)
    }

    /// Multiplies every roster expert's weight by (1−η)^{its loss}.
    pub fn apply_losses(&mut self, losses: &LossMap) -> Result<()> {
        let shrink = (1.0 - self.eta).ln();
        for (i, &id) in self.roster.iter().enumerate() {
            let loss = losses.get(id).ok_or_else(|| Error::MalformedRound {
                t: 0,
                reason: format!("no loss for roster expert {id}"),
            })?;
            self.log_weights[i] += loss * shrink;
        }
        Ok(())
    }

    /// One full round: play the pre-update weights, then update.
    pub fn step(&mut self, losses: &LossMap) -> Result<Distribution> {
        let dist = self.distribution()?;
        self.apply_losses(losses)?;
        Ok(dist)
    }

    /// Resets every weight to 1 and adopts a new rate (doubling restart).
    pub fn reset(&mut self, eta: f64) {
        self.eta = eta;
        self.log_weights.fill(0.0);
    }

    /// Raw log-weight snapshot, for save/restore in enumeration tests.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn restore_log_weights(&mut self, snapshot: &[f64]) {
        self.log_weights.copy_from_slice(snapshot);
    }
}

impl Learner for MwLearner {
    fn predict(&mut self, _pool: &ExpertPool, _round: &Round, _awake: &[ExpertId])
        -> Result<Distribution> {
        self.distribution()
    }

    fn observe(&mut self, round: &Round, _dist: &Distribution, _awake: &[ExpertId]) -> Result<()> {
        self.apply_losses(&round.losses).map_err(|e| match e {
            Error::MalformedRound { reason, .. } => Error::MalformedRound { t: round.t, reason },
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lm(entries: &[(u32, f64)]) -> LossMap {
        LossMap::new(entries.iter().map(|&(i, l)| (ExpertId(i), l)).collect()).unwrap()
    }

    #[test]
    fn step_example_hand_computed() {
        let mut mw = MwLearner::new(vec![ExpertId(0), ExpertId(1)], 0.5).unwrap();
        let d = mw.step(&lm(&[(0, 0.0), (1, 1.0)])).unwrap();
        assert_eq!(d.prob(ExpertId(0)), 0.5);
        assert_eq!(d.prob(ExpertId(1)), 0.5);
        assert_relative_eq!(mw.weight(ExpertId(0)).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(mw.weight(ExpertId(1)).unwrap(), 0.5, max_relative = 1e-12);
        let d = mw.distribution().unwrap();
        assert_relative_eq!(d.prob(ExpertId(0)), 2.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(d.prob(ExpertId(1)), 1.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_losses_leave_weights_unchanged() {
        let mut mw = MwLearner::new(vec![ExpertId(0), ExpertId(1)], 0.3).unwrap();
        mw.apply_losses(&lm(&[(0, 0.0), (1, 0.0)])).unwrap();
        assert_eq!(mw.weight(ExpertId(0)).unwrap(), 1.0);
        assert_eq!(mw.weight(ExpertId(1)).unwrap(), 1.0);
    }

    #[test]
    fn eta_schedule_value() {
        // √(ln 4 / 400), evaluated directly.
        let expected = (4.0f64.ln() / 400.0).sqrt();
        assert_relative_eq!(eta_schedule(4, 400), expected, max_relative = 1e-12);
        assert_relative_eq!(eta_schedule(4, 400), 0.058870, max_relative = 1e-4);
    }

    #[test]
    fn eta_schedule_clamps() {
        assert_eq!(eta_schedule(1, 100), 0.5);
        assert_eq!(eta_schedule(64, 1), 0.5);
        assert_eq!(eta_schedule(2, 0), 0.5);
        let eta = eta_schedule(1000, 4);
        assert!(eta > 0.0 && eta <= 0.5);
    }

    #[test]
    fn invalid_eta_rejected() {
        assert!(MwLearner::new(vec![ExpertId(0)], 0.0).is_err());
        assert!(MwLearner::new(vec![ExpertId(0)], 1.0).is_err());
        assert!(MwLearner::new(vec![], 0.3).is_err());
    }

    #[test]
    fn weights_non_increasing() {
        let mut mw = MwLearner::new(vec![ExpertId(0), ExpertId(1)], 0.25).unwrap();
        let mut prev = [1.0, 1.0];
        for i in 0..50 {
            let l0 = (i % 3) as f64 / 2.0;
            let l1 = (i % 2) as f64;
            mw.apply_losses(&lm(&[(0, l0), (1, l1)])).unwrap();
            let cur = [mw.weight(ExpertId(0)).unwrap(), mw.weight(ExpertId(1)).unwrap()];
            assert!(cur[0] <= prev[0] && cur[1] <= prev[1]);
            assert!(cur[0] > 0.0 && cur[1] > 0.0);
            prev = cur;
        }
    }

    #[test]
    fn log_weights_survive_long_runs() {
        // (1−η)^{Σℓ} would underflow f64 after ~2000 unit losses at η=0.5.
        let mut mw = MwLearner::new(vec![ExpertId(0), ExpertId(1)], 0.5).unwrap();
        for _ in 0..20_000 {
            mw.apply_losses(&lm(&[(0, 1.0), (1, 0.9)])).unwrap();
        }
        let d = mw.distribution().unwrap();
        d.validate().unwrap();
        assert!(d.prob(ExpertId(1)) > 0.99);
    }
}
