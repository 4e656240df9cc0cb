//! Pay-for-feedback exploration reductions and the apple-tasting transform.
//!
//! In the pay-for-feedback model the learner decides at the start of each
//! round whether to buy the round's label at cost 1 (replacing the action's
//! loss); losses are revealed only on bought rounds. The reductions run a
//! full-feedback base algorithm on top of random exploration points:
//!
//! - Reduction 1: one classical experts algorithm per intersection profile.
//!   The profile's rounds split into ⌈T(I)^{2/3}⌉ phases; each phase
//!   explores one uniformly drawn round and updates the profile's learner
//!   with it at phase end.
//! - Reduction 2: one sleeping-experts algorithm over the whole stream,
//!   with ⌈T^{2/3}⌉ global phases and one exploration draw per phase,
//!   irrespective of groups.
//! - Reduction 3: one sleeping-experts algorithm with adaptive phases. Each
//!   group keeps a counter capped at ⌈T(g)^{1/4}⌉; a phase ends when any
//!   counter hits its cap. Per phase and group one exploration ordinal
//!   X(g,r) is drawn; if the phase ends before the ordinal is reached the
//!   group's estimated losses for the phase are 0, otherwise they are the
//!   losses at the exploration round. Phase end feeds the per-group
//!   estimates to the base learner.
//!
//! Within a phase the base learner's state is frozen: rounds with equal
//! awake sets see bit-identical distributions. Exploration rounds keep the
//! frozen distribution in the history but charge cost 1 to the learner.
//!
//! Phase counts use exact integer arithmetic (⌈x^{2/3}⌉ via cube roots), so
//! exploration-cost accounting is exact: |E| = Σ_I ⌈T(I)^{2/3}⌉ for
//! reduction 1 and |E| = ⌈T^{2/3}⌉ for reduction 2.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::algorithms::Learner;
use crate::error::{Error, Result};
use crate::experts::{ExpertId, ExpertPool, Origin};
use crate::report::{compile_report, default_checkpoints, RegretReport};
use crate::rng::sub_rng;
use crate::types::{
    Distribution, GroupId, GroupSet, History, Label, LossMap, Round, Stream, StreamMeta,
};

/// Smallest x with x^k ≥ n, i.e. ⌈n^{1/k}⌉ computed exactly.
pub fn ceil_root(n: u64, k: u32) -> u64 {
    if n <= 1 {
        return n;
    }
    let target = n as u128;
    let (mut lo, mut hi) = (1u64, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let mut pow: u128 = 1;
        let mut overflow = false;
        for _ in 0..k {
            pow = match pow.checked_mul(mid as u128) {
                Some(p) => p,
                None => {
                    overflow = true;
                    break;
                }
            };
        }
        if overflow || pow >= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// ⌈n^{2/3}⌉ computed exactly: the smallest p with p³ ≥ n².
pub fn ceil_two_thirds(n: u64) -> u64 {
    if n <= 1 {
        return n;
    }
    let target = (n as u128) * (n as u128);
    let (mut lo, mut hi) = (1u64, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let pow = (mid as u128) * (mid as u128) * (mid as u128);
        if pow >= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Contiguous partition of `total` rounds into `n_phases` non-empty phases
/// of near-equal size (the first `total mod n_phases` phases take the extra
/// round). A short final phase still receives one exploration draw over its
/// actual length.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePlan {
    sizes: Vec<u64>,
}

impl PhasePlan {
    pub fn new(total: u64, n_phases: u64) -> PhasePlan {
        if total == 0 || n_phases == 0 {
            return PhasePlan { sizes: Vec::new() };
        }
        let n_phases = n_phases.min(total);
        let base = total / n_phases;
        let extra = total % n_phases;
        let sizes = (0..n_phases).map(|i| if i < extra { base + 1 } else { base }).collect();
        PhasePlan { sizes }
    }

    /// Plan with ⌈total^{2/3}⌉ phases (the reductions' schedule).
    pub fn two_thirds(total: u64) -> PhasePlan {
        PhasePlan::new(total, ceil_two_thirds(total))
    }

    pub fn n_phases(&self) -> usize {
        self.sizes.len()
    }

    pub fn size(&self, phase: usize) -> u64 {
        self.sizes[phase]
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }
}

/// Uniform exploration position within a phase of the given length
/// (0-based offset).
pub fn exploration_draw(rng: &mut ChaCha12Rng, phase_len: u64) -> u64 {
    rng.random_range(0..phase_len)
}

/// The set E of explored (label-bought) timesteps; each costs exactly 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExplorationLog {
    explored: Vec<u64>,
}

impl ExplorationLog {
    pub fn record(&mut self, t: u64) {
        debug_assert!(self.explored.last().is_none_or(|&last| last < t));
        self.explored.push(t);
    }

    pub fn count(&self) -> u64 {
        self.explored.len() as u64
    }

    /// Total charged cost: 1 per explored round, exactly |E|.
    pub fn charged_cost(&self) -> f64 {
        self.explored.len() as f64
    }

    pub fn timesteps(&self) -> &[u64] {
        &self.explored
    }

    pub fn contains(&self, t: u64) -> bool {
        self.explored.binary_search(&t).is_ok()
    }

    /// Explored rounds whose example belongs to group `g`.
    pub fn count_in_group(&self, history: &History, g: GroupId) -> u64 {
        history
            .entries
            .iter()
            .filter(|e| e.explored && e.round.groups.contains(g))
            .count() as u64
    }
}

/// Everything a runner produces: the executed history, the exploration log,
/// and a regret report at the default checkpoints.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub history: History,
    pub exploration: ExplorationLog,
    pub report: RegretReport,
}

fn finish(
    stream: &Stream,
    pool: &ExpertPool,
    history: History,
    log: ExplorationLog,
) -> Result<RunOutput> {
    let report = compile_report(&history, pool, &default_checkpoints(stream.len()))?;
    Ok(RunOutput { history, exploration: log, report })
}

fn roster_of(pool: &ExpertPool) -> Vec<ExpertId> {
    pool.experts().iter().map(|e| e.id).collect()
}

/// Runs a learner with full feedback: predict, then observe, every round.
pub fn run_full_feedback<L: Learner>(
    stream: &Stream,
    pool: &ExpertPool,
    learner: &mut L,
) -> Result<RunOutput> {
    let mut history = History::new(stream.n_groups, roster_of(pool));
    for round in &stream.rounds {
        let awake = pool.awake_set(round);
        let dist = learner.predict(pool, round, &awake)?;
        learner.observe(round, &dist, &awake)?;
        history.push(round.clone(), dist, false)?;
    }
    finish(stream, pool, history, ExplorationLog::default())
}

/// Checks a declared size table against the stream's realized sizes.
/// Every realized profile must be declared with its exact count.
fn check_declared(stream: &Stream, declared: Option<&StreamMeta>) -> Result<StreamMeta> {
    let realized = stream.meta();
    let Some(declared) = declared else { return Ok(realized) };
    for (profile, &count) in &realized.intersection_sizes {
        match declared.intersection_sizes.get(profile) {
            None => {
                let t = stream
                    .rounds
                    .iter()
                    .find(|r| r.groups == *profile)
                    .map_or(0, |r| r.t);
                return Err(Error::UndeclaredIntersection { profile: *profile, t });
            }
            Some(&d) if d != count => {
                return Err(Error::InvalidSpec(format!(
                    "declared size {d} for profile {profile} but stream has {count}"
                )));
            }
            _ => {}
        }
    }
    if declared.total != realized.total {
        return Err(Error::InvalidSpec(format!(
            "declared total {} but stream has {}",
            declared.total, realized.total
        )));
    }
    Ok(realized)
}

struct IntersectionRun {
    learner: Option<Box<dyn Learner>>,
    roster: Vec<ExpertId>,
    plan: PhasePlan,
    draws: Vec<u64>,
    phase: usize,
    seen_in_phase: u64,
    frozen: Option<Distribution>,
    pending: Option<(Round, Distribution)>,
}

/// Reduction 1: independent classical experts algorithms per intersection.
///
/// `base_factory` builds the per-profile learner from its roster and its
/// horizon in phases (the number of updates it will receive). Pass
/// `declared` when sizes come from configuration; they must match the
/// stream exactly.
pub fn run_reduction1<F>(
    stream: &Stream,
    pool: &ExpertPool,
    mut base_factory: F,
    declared: Option<&StreamMeta>,
    seed: u64,
) -> Result<RunOutput>
where
    F: FnMut(&[ExpertId], u64) -> Result<Box<dyn Learner>>,
{
    let meta = check_declared(stream, declared)?;
    let mut rng = sub_rng(seed, "exploration-draws");

    let mut runs: BTreeMap<GroupSet, IntersectionRun> = BTreeMap::new();
    for (&profile, &size) in &meta.intersection_sizes {
        let plan = PhasePlan::two_thirds(size);
        let draws = plan.sizes().iter().map(|&len| exploration_draw(&mut rng, len)).collect();
        runs.insert(
            profile,
            IntersectionRun {
                learner: None,
                roster: Vec::new(),
                plan,
                draws,
                phase: 0,
                seen_in_phase: 0,
                frozen: None,
                pending: None,
            },
        );
    }

    let mut history = History::new(stream.n_groups, roster_of(pool));
    let mut log = ExplorationLog::default();

    for round in &stream.rounds {
        let run = runs
            .get_mut(&round.groups)
            .ok_or(Error::UndeclaredIntersection { profile: round.groups, t: round.t })?;
        let awake = pool.awake_set(round);
        if run.learner.is_none() {
            run.roster = awake.clone();
            run.learner = Some(base_factory(&run.roster, run.plan.n_phases() as u64)?);
        } else if run.roster != awake {
            return Err(Error::MalformedRound {
                t: round.t,
                reason: "awake set changed within an intersection run".into(),
            });
        }
        let learner = run.learner.as_mut().expect("built above");
        if run.frozen.is_none() {
            run.frozen = Some(learner.predict(pool, round, &run.roster)?);
        }
        let dist = run.frozen.clone().expect("frozen above");

        let explored = run.seen_in_phase == run.draws[run.phase];
        if explored {
            log.record(round.t);
            run.pending = Some((round.clone(), dist.clone()));
        }
        history.push(round.clone(), dist, explored)?;

        run.seen_in_phase += 1;
        if run.seen_in_phase == run.plan.size(run.phase) {
            let (expl_round, expl_dist) =
                run.pending.take().expect("every phase explores one round");
            learner.observe(&expl_round, &expl_dist, &run.roster)?;
            run.phase += 1;
            run.seen_in_phase = 0;
            run.frozen = None;
        }
    }
    finish(stream, pool, history, log)
}

/// Default classical base for reduction 1: multiplicative weights with
/// η = √(log N / horizon).
pub fn mw_base_factory() -> impl FnMut(&[ExpertId], u64) -> Result<Box<dyn Learner>> {
    |roster: &[ExpertId], horizon: u64| {
        let eta = crate::algorithms::mw::eta_schedule(roster.len(), horizon);
        let mw = crate::algorithms::mw::MwLearner::new(roster.to_vec(), eta)?;
        Ok(Box::new(mw) as Box<dyn Learner>)
    }
}

/// Predicts from the frozen learner state, caching per awake set so equal
/// awake sets within a phase get bit-identical distributions.
fn frozen_predict<L: Learner>(
    learner: &mut L,
    pool: &ExpertPool,
    round: &Round,
    awake: Vec<ExpertId>,
    cache: &mut HashMap<Vec<ExpertId>, Distribution>,
) -> Result<Distribution> {
    if let Some(dist) = cache.get(&awake) {
        return Ok(dist.clone());
    }
    let dist = learner.predict(pool, round, &awake)?;
    cache.insert(awake, dist.clone());
    Ok(dist)
}

/// Reduction 2: a sleeping-experts base over global fixed phases.
pub fn run_reduction2<L: Learner>(
    stream: &Stream,
    pool: &ExpertPool,
    base: &mut L,
    seed: u64,
) -> Result<RunOutput> {
    let total = stream.len();
    let plan = PhasePlan::two_thirds(total);
    let mut rng = sub_rng(seed, "exploration-draws");
    let draws: Vec<u64> =
        plan.sizes().iter().map(|&len| exploration_draw(&mut rng, len)).collect();

    let mut history = History::new(stream.n_groups, roster_of(pool));
    let mut log = ExplorationLog::default();
    let mut cache: HashMap<Vec<ExpertId>, Distribution> = HashMap::new();
    let mut phase = 0usize;
    let mut seen = 0u64;
    let mut pending: Option<(Round, Distribution, Vec<ExpertId>)> = None;

    for round in &stream.rounds {
        let awake = pool.awake_set(round);
        let dist = frozen_predict(base, pool, round, awake.clone(), &mut cache)?;

        let explored = seen == draws[phase];
        if explored {
            log.record(round.t);
            pending = Some((round.clone(), dist.clone(), awake));
        }
        history.push(round.clone(), dist, explored)?;

        seen += 1;
        if seen == plan.size(phase) {
            let (expl_round, expl_dist, expl_awake) =
                pending.take().expect("every phase explores one round");
            base.observe(&expl_round, &expl_dist, &expl_awake)?;
            phase += 1;
            seen = 0;
            cache.clear();
        }
    }
    finish(stream, pool, history, log)
}

/// Reduction 2 for unknown stream length: horizon guesses double (4, 8,
/// 16, ...). Each epoch restarts a fresh base learner and plans phases for
/// the guessed length; the final epoch is cut off wherever the stream ends,
/// and a cut phase still updates with its exploration round if that round
/// was reached before the cut.
pub fn run_reduction2_doubling<L: Learner, F: FnMut() -> L>(
    stream: &Stream,
    pool: &ExpertPool,
    mut base_factory: F,
    seed: u64,
) -> Result<RunOutput> {
    let mut rng = sub_rng(seed, "exploration-draws");
    let mut history = History::new(stream.n_groups, roster_of(pool));
    let mut log = ExplorationLog::default();

    let total = stream.len();
    let mut pos = 0u64;
    let mut guess = 4u64;
    while pos < total {
        let plan = PhasePlan::two_thirds(guess);
        let draws: Vec<u64> =
            plan.sizes().iter().map(|&len| exploration_draw(&mut rng, len)).collect();
        let mut base = base_factory();
        let mut cache: HashMap<Vec<ExpertId>, Distribution> = HashMap::new();
        let mut pending: Option<(Round, Distribution, Vec<ExpertId>)> = None;
        let mut phase = 0usize;
        let mut seen = 0u64;
        let mut consumed = 0u64;
        while consumed < guess && pos < total {
            let round = &stream.rounds[pos as usize];
            let awake = pool.awake_set(round);
            let dist = frozen_predict(&mut base, pool, round, awake.clone(), &mut cache)?;
            let explored = seen == draws[phase];
            if explored {
                log.record(round.t);
                pending = Some((round.clone(), dist.clone(), awake));
            }
            history.push(round.clone(), dist, explored)?;
            pos += 1;
            consumed += 1;
            seen += 1;
            if seen == plan.size(phase) {
                let (r, d, a) = pending.take().expect("phase explored");
                base.observe(&r, &d, &a)?;
                phase += 1;
                seen = 0;
                cache.clear();
            }
        }
        if let Some((r, d, a)) = pending.take() {
            base.observe(&r, &d, &a)?;
        }
        guess = guess.saturating_mul(2);
    }
    finish(stream, pool, history, log)
}

/// Range the per-group exploration ordinal X(g,r) is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DrawRange {
    /// {1, …, ⌈T(g)^{1/4}⌉}: ordinals within the phase cap, so each
    /// g-example is explored with probability (T(g))^{-1/4}.
    #[default]
    Cap,
    /// {1, …, T(g)}: ordinals over the whole horizon; draws beyond the cap
    /// are simply never reached. Kept for comparison.
    Horizon,
}

/// Per-phase bookkeeping for reduction 3, returned for inspection.
#[derive(Debug, Clone)]
pub struct PhaseState {
    pub index: u64,
    pub started_at: u64,
    /// g-examples seen this phase.
    pub counters: Vec<u64>,
    /// Phase caps ⌈T(g)^{1/4}⌉ (0 for groups absent from the stream).
    pub caps: Vec<u64>,
    /// Exploration ordinal X(g,r) per group, 1-based (0 for absent groups).
    pub draws: Vec<u64>,
    /// Realized exploration times t(r,g), where reached.
    pub reached_at: Vec<Option<u64>>,
}

impl PhaseState {
    fn begin(
        index: u64,
        started_at: u64,
        caps: &[u64],
        t_g: &[u64],
        range: DrawRange,
        rng: &mut ChaCha12Rng,
    ) -> PhaseState {
        let draws = caps
            .iter()
            .zip(t_g)
            .map(|(&cap, &size)| {
                if size == 0 {
                    0
                } else {
                    let hi = match range {
                        DrawRange::Cap => cap,
                        DrawRange::Horizon => size,
                    };
                    rng.random_range(1..=hi)
                }
            })
            .collect();
        PhaseState {
            index,
            started_at,
            counters: vec![0; caps.len()],
            caps: caps.to_vec(),
            draws,
            reached_at: vec![None; caps.len()],
        }
    }

    fn at_cap(&self) -> bool {
        self.counters.iter().zip(&self.caps).any(|(&c, &cap)| cap > 0 && c >= cap)
    }
}

/// Reduction 3: adaptive per-group phases over a sleeping-experts base.
///
/// Returns the per-phase states alongside the run so callers can audit the
/// phase-end rule.
pub fn run_reduction3<L: Learner>(
    stream: &Stream,
    pool: &ExpertPool,
    base: &mut L,
    seed: u64,
    range: DrawRange,
    declared: Option<&StreamMeta>,
) -> Result<(RunOutput, Vec<PhaseState>)> {
    let meta = check_declared(stream, declared)?;
    let n_groups = stream.n_groups as usize;
    let caps: Vec<u64> = meta
        .group_sizes
        .iter()
        .map(|&t_g| if t_g == 0 { 0 } else { ceil_root(t_g, 4) })
        .collect();

    let mut rng = sub_rng(seed, "exploration-draws");
    let mut history = History::new(stream.n_groups, roster_of(pool));
    let mut log = ExplorationLog::default();
    let mut cache: HashMap<Vec<ExpertId>, Distribution> = HashMap::new();
    let mut states: Vec<PhaseState> = Vec::new();
    let mut phase = PhaseState::begin(0, 1, &caps, &meta.group_sizes, range, &mut rng);
    let mut reached: Vec<Option<Round>> = vec![None; n_groups];

    for round in &stream.rounds {
        let awake = pool.awake_set(round);
        let dist = frozen_predict(base, pool, round, awake, &mut cache)?;

        let mut explored = false;
        for g in round.groups.iter() {
            let gi = g.0 as usize;
            let ordinal = phase.counters[gi] + 1;
            if phase.reached_at[gi].is_none() && phase.draws[gi] == ordinal {
                explored = true;
                phase.reached_at[gi] = Some(round.t);
                reached[gi] = Some(round.clone());
            }
        }
        if explored {
            log.record(round.t);
        }
        for g in round.groups.iter() {
            phase.counters[g.0 as usize] += 1;
        }
        history.push(round.clone(), dist, explored)?;

        if phase.at_cap() {
            feed_phase_estimates(base, pool, round.t, n_groups, &meta, &mut reached)?;
            states.push(phase);
            phase = PhaseState::begin(
                states.len() as u64,
                round.t + 1,
                &caps,
                &meta.group_sizes,
                range,
                &mut rng,
            );
            cache.clear();
        }
    }
    // A final partial phase still feeds its estimates; unreached draws give
    // zero estimated losses, which leave the base learner unchanged.
    if phase.counters.iter().any(|&c| c > 0) {
        feed_phase_estimates(base, pool, stream.len(), n_groups, &meta, &mut reached)?;
        states.push(phase);
    }

    let output = finish(stream, pool, history, log)?;
    Ok((output, states))
}

/// Feeds ℓ̃(r,g) for every group to the base learner, one virtual round per
/// group in ascending group order. The virtual round wakes exactly the
/// experts associated with g (the global experts and g's copies); when the
/// group's exploration point was not reached, its estimated losses are 0.
fn feed_phase_estimates<L: Learner>(
    base: &mut L,
    pool: &ExpertPool,
    t: u64,
    n_groups: usize,
    meta: &StreamMeta,
    reached: &mut [Option<Round>],
) -> Result<()> {
    for gi in 0..n_groups {
        if meta.group_sizes[gi] == 0 {
            continue;
        }
        let g = GroupId(gi as u8);
        let fg: Vec<ExpertId> = pool
            .experts()
            .iter()
            .filter(|e| e.born_at <= t)
            .filter(|e| e.origin == Origin::Global || e.origin == Origin::Group(g))
            .map(|e| e.id)
            .collect();
        if fg.is_empty() {
            reached[gi] = None;
            continue;
        }
        let losses = match reached[gi].take() {
            Some(expl_round) => {
                let mut pairs = Vec::with_capacity(fg.len());
                for &id in &fg {
                    let loss =
                        expl_round.losses.get(id).ok_or_else(|| Error::MalformedRound {
                            t: expl_round.t,
                            reason: format!("exploration round lacks loss for group expert {id}"),
                        })?;
                    pairs.push((id, loss));
                }
                LossMap::new(pairs)?
            }
            None => LossMap::new(fg.iter().map(|&id| (id, 0.0)).collect())?,
        };
        let virtual_round = Round::new(t, GroupSet::from_groups(&[g]), losses, None);
        let dist = base.predict(pool, &virtual_round, &fg)?;
        base.observe(&virtual_round, &dist, &fg)?;
    }
    Ok(())
}

/// How non-exploration actions are charged in an apple-tasting run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionMode {
    /// Charge the expected loss of the played distribution.
    #[default]
    Expected,
    /// Sample one expert from the distribution and charge its loss.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppleEntry {
    pub t: u64,
    pub explored: bool,
    /// The emitted action, when determined: exploration rounds force the
    /// positive action. Elsewhere experts are abstract loss columns, so the
    /// emitted action itself is not observable.
    pub emitted_positive: Option<bool>,
    /// Loss suffered this round under apple tasting.
    pub loss: f64,
}

/// An apple-tasting view of a pay-for-feedback run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppleTastingRun {
    pub entries: Vec<AppleEntry>,
    /// Total apple-tasting loss.
    pub total_loss: f64,
    /// Total charged in the pay-for-feedback accounting (cost 1 per
    /// exploration); never below the apple-tasting total.
    pub pay_for_feedback_loss: f64,
}

/// Transforms a pay-for-feedback run into an apple-tasting run: on
/// exploration rounds the positive action is emitted (observing the label)
/// and the loss suffered is the positive action's 0/1 loss, which cost 1
/// upper-bounds; on other rounds the policy's action stands and the learner
/// observes nothing. Exploration rounds therefore require labels.
pub fn to_apple_tasting(
    output: &RunOutput,
    mode: ActionMode,
    seed: u64,
) -> Result<AppleTastingRun> {
    let mut rng = sub_rng(seed, "sampling");
    let mut entries = Vec::with_capacity(output.history.len());
    let mut total_loss = 0.0;
    let mut pff_loss = 0.0;
    for entry in &output.history.entries {
        let (emitted_positive, loss) = if entry.explored {
            let label = entry.round.label.ok_or_else(|| Error::MalformedRound {
                t: entry.round.t,
                reason: "exploration round carries no label for apple tasting".into(),
            })?;
            let positive_loss = match label {
                Label::Positive => 0.0,
                Label::Negative => 1.0,
            };
            (Some(true), positive_loss)
        } else {
            let loss = match mode {
                ActionMode::Expected => entry.expected_loss()?,
                ActionMode::Sampled => {
                    let draw: f64 = rng.random();
                    let mut cum = 0.0;
                    let mut picked = None;
                    for (id, p) in entry.dist.iter() {
                        cum += p;
                        if draw < cum {
                            picked = Some(id);
                            break;
                        }
                    }
                    let id = picked.unwrap_or_else(|| {
                        entry.dist.support().last().expect("non-empty distribution")
                    });
                    entry.round.losses.get(id).ok_or_else(|| Error::MalformedRound {
                        t: entry.round.t,
                        reason: format!("no loss for sampled expert {id}"),
                    })?
                }
            };
            (None, loss)
        };
        total_loss += loss;
        pff_loss += entry.charged_loss()?;
        entries.push(AppleEntry {
            t: entry.round.t,
            explored: entry.explored,
            emitted_positive,
            loss,
        });
    }
    Ok(AppleTastingRun { entries, total_loss, pay_for_feedback_loss: pff_loss })
}
