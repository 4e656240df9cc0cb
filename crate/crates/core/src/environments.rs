//! Instance generators: the hardcoded incentive counterexample, the
//! overlapping-groups labeled batch, and seeded random adversarial streams.
//!
//! Generators are pure in (spec, seed): the same inputs always produce
//! bit-identical outputs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experts::{build_pool, ActivationRule, ExpertPool};
use crate::rng::sub_rng;
use crate::types::{GroupId, GroupSet, Label, LossMap, Round, Stream, MAX_GROUPS};

/// Loss distribution for one (base expert, profile) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LossKind {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
    Bernoulli { p: f64 },
}

impl LossKind {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            LossKind::Constant { value } => (0.0..=1.0).contains(value),
            LossKind::Uniform { lo, hi } => {
                (0.0..=1.0).contains(lo) && (0.0..=1.0).contains(hi) && lo <= hi
            }
            LossKind::Bernoulli { p } => (0.0..=1.0).contains(p),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("invalid loss model {self:?}")))
        }
    }

    fn draw(&self, rng: &mut rand_chacha::ChaCha12Rng) -> f64 {
        match self {
            LossKind::Constant { value } => *value,
            LossKind::Uniform { lo, hi } => lo + rng.random::<f64>() * (hi - lo),
            LossKind::Bernoulli { p } => {
                if rng.random::<f64>() < *p {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Loss model for one base expert: a default plus per-profile overrides
/// keyed by the exact membership profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossModel {
    pub model: LossKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_profile: Vec<ProfileOverride>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileOverride {
    pub profile: GroupSet,
    pub model: LossKind,
}

impl LossModel {
    pub fn constant(value: f64) -> LossModel {
        LossModel { model: LossKind::Constant { value }, per_profile: Vec::new() }
    }

    pub fn bernoulli(p: f64) -> LossModel {
        LossModel { model: LossKind::Bernoulli { p }, per_profile: Vec::new() }
    }

    fn kind_for(&self, profile: GroupSet) -> &LossKind {
        self.per_profile
            .iter()
            .find(|o| o.profile == profile)
            .map(|o| &o.model)
            .unwrap_or(&self.model)
    }
}

/// A scheduled mid-run expert addition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertAddition {
    pub t: u64,
    pub base: String,
    /// Group the copy belongs to; omitted for a global expert.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<u8>,
}

/// Named global experts, per-group expert lists, and scheduled additions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolSpec {
    #[serde(default)]
    pub global: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub group: Vec<GroupExperts>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub additions: Vec<ExpertAddition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupExperts {
    pub id: u8,
    pub experts: Vec<String>,
}

impl PoolSpec {
    pub fn build(&self) -> ExpertPool {
        let per_group: Vec<(GroupId, Vec<String>)> =
            self.group.iter().map(|g| (GroupId(g.id), g.experts.clone())).collect();
        let mut pool = build_pool(&self.global, &per_group);
        for add in &self.additions {
            let rule = match add.group {
                Some(g) => ActivationRule::Group(GroupId(g)),
                None => ActivationRule::Always,
            };
            pool.add_expert(&add.base, rule, add.t);
        }
        pool
    }

    fn validate(&self, n_groups: u8) -> Result<()> {
        for g in &self.group {
            if g.id >= n_groups {
                return Err(Error::GroupOutOfRange { index: g.id, declared: n_groups });
            }
        }
        for add in &self.additions {
            if add.t == 0 {
                return Err(Error::InvalidSpec("addition timestep must be ≥ 1".into()));
            }
            if let Some(g) = add.group {
                if g >= n_groups {
                    return Err(Error::GroupOutOfRange { index: g, declared: n_groups });
                }
            }
        }
        Ok(())
    }
}

/// Fully determines a random adversarial stream given a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub t: u64,
    pub groups: u8,
    /// Independent per-group membership probabilities, one per group.
    pub membership: Vec<f64>,
    pub pool: PoolSpec,
    /// Loss models keyed by base expert name; unlisted bases draw uniformly
    /// from [0,1].
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loss: Vec<BaseLoss>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseLoss {
    pub base: String,
    #[serde(flatten)]
    pub model: LossModel,
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.groups > MAX_GROUPS {
            return Err(Error::InvalidSpec(format!(
                "{} groups exceeds the {MAX_GROUPS}-group limit",
                self.groups
            )));
        }
        if self.membership.len() != self.groups as usize {
            return Err(Error::InvalidSpec(format!(
                "{} membership probabilities for {} groups",
                self.membership.len(),
                self.groups
            )));
        }
        for &p in &self.membership {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidSpec(format!("membership probability {p} outside [0,1]")));
            }
        }
        self.pool.validate(self.groups)?;
        for bl in &self.loss {
            bl.model.model.validate()?;
            for o in &bl.model.per_profile {
                o.profile.validate(self.groups)?;
                o.model.validate()?;
            }
        }
        Ok(())
    }
}

const DEFAULT_LOSS: LossKind = LossKind::Uniform { lo: 0.0, hi: 1.0 };

/// Seeded adversarial stream: each round's membership profile is drawn from
/// the per-group probabilities, and each awake expert's loss from its
/// base's per-(expert, profile) model. Deterministic given (spec, seed).
pub fn gen_random_adversary(spec: &InstanceSpec, seed: u64) -> Result<(Stream, ExpertPool)> {
    spec.validate()?;
    let pool = spec.pool.build();
    let mut rng = sub_rng(seed, "stream-gen");
    let mut rounds = Vec::with_capacity(spec.t as usize);
    let empty = LossMap::new(vec![])?;
    for t in 1..=spec.t {
        let mut groups = GroupSet::EMPTY;
        for (i, &p) in spec.membership.iter().enumerate() {
            if rng.random::<f64>() < p {
                groups.insert(GroupId(i as u8));
            }
        }
        let probe = Round::new(t, groups, empty.clone(), None);
        let mut losses = Vec::new();
        for id in pool.awake_set(&probe) {
            let expert = pool.expert(id).expect("awake expert exists");
            let base_name = pool.base_name(expert.base);
            let kind = spec
                .loss
                .iter()
                .find(|bl| bl.base == base_name)
                .map(|bl| bl.model.kind_for(groups))
                .unwrap_or(&DEFAULT_LOSS);
            losses.push((id, kind.draw(&mut rng)));
        }
        rounds.push(Round::new(t, groups, LossMap::new(losses)?, None));
    }
    Ok((Stream::new(spec.groups, rounds)?, pool))
}

/// Group indices of the incentive counterexample: B covers every round, S
/// covers every other round.
pub const IC_GROUP_B: GroupId = GroupId(0);
pub const IC_GROUP_S: GroupId = GroupId(1);

/// The two-group incentive counterexample. The big group B is the whole
/// population; the small group S arrives on alternating rounds (odd rounds
/// by default; `s_on_odd = false` swaps the parity). The pool is one global
/// expert plus one copy per group; losses follow the fixed table
///
/// - S-rounds (profile {B,S}): global expert 1.0, both group copies 0.2
/// - remaining rounds (profile {B}): global expert 0.0, B's copy 0.2
pub fn gen_ic_instance(t: u64, s_on_odd: bool) -> Result<(Stream, ExpertPool)> {
    if t == 0 || t % 2 != 0 {
        return Err(Error::InvalidSpec(format!("incentive instance needs even T, got {t}")));
    }
    let pool = build_pool(
        &["f".into()],
        &[(IC_GROUP_B, vec!["f_B".into()]), (IC_GROUP_S, vec!["f_S".into()])],
    );
    let f = pool.global_comparators()[0];
    let f_b = pool.group_experts(IC_GROUP_B)[0];
    let f_s = pool.group_experts(IC_GROUP_S)[0];

    let mut rounds = Vec::with_capacity(t as usize);
    for i in 1..=t {
        let s_round = (i % 2 == 1) == s_on_odd;
        let round = if s_round {
            Round::new(
                i,
                GroupSet::from_groups(&[IC_GROUP_B, IC_GROUP_S]),
                LossMap::new(vec![(f, 1.0), (f_b, 0.2), (f_s, 0.2)])?,
                None,
            )
        } else {
            Round::new(
                i,
                GroupSet::from_groups(&[IC_GROUP_B]),
                LossMap::new(vec![(f, 0.0), (f_b, 0.2)])?,
                None,
            )
        };
        rounds.push(round);
    }
    Ok((Stream::new(2, rounds)?, pool))
}

/// Region of an example in the two-overlapping-groups construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    AOnly,
    BOnly,
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapExample {
    pub region: Region,
    pub label: Label,
}

/// Labeled batch over two groups that share 20% of their examples: A's
/// non-overlapping examples are all positive, B's all negative, and the
/// shared examples carry uniform labels (exactly balanced in exact mode).
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapInstance {
    /// Examples per group, |A| = |B| = n.
    pub n_per_group: u64,
    pub examples: Vec<OverlapExample>,
}

impl OverlapInstance {
    pub fn in_group_a(&self, ex: &OverlapExample) -> bool {
        ex.region != Region::BOnly
    }

    pub fn in_group_b(&self, ex: &OverlapExample) -> bool {
        ex.region != Region::AOnly
    }

    /// Group A's proposed predictor: positive exactly on A ∖ B.
    pub fn predict_a(region: Region) -> Label {
        match region {
            Region::AOnly => Label::Positive,
            _ => Label::Negative,
        }
    }

    /// Group B's proposed predictor: positive exactly on A ∩ B.
    pub fn predict_b(region: Region) -> Label {
        match region {
            Region::Shared => Label::Positive,
            _ => Label::Negative,
        }
    }

    pub fn labels(&self) -> Vec<Label> {
        self.examples.iter().map(|e| e.label).collect()
    }

    /// Probability-of-positive vector for a deterministic region predictor.
    pub fn predictions(&self, predict: fn(Region) -> Label) -> Vec<f64> {
        self.examples
            .iter()
            .map(|e| if predict(e.region).is_positive() { 1.0 } else { 0.0 })
            .collect()
    }

    pub fn mask_a(&self) -> Vec<bool> {
        self.examples.iter().map(|e| self.in_group_a(e)).collect()
    }

    pub fn mask_b(&self) -> Vec<bool> {
        self.examples.iter().map(|e| self.in_group_b(e)).collect()
    }
}

/// Generates the overlap construction with `n` examples per group
/// (divisible by 10 so the 80/20 split and the balanced intersection are
/// exact). In exact mode the shared labels are exactly half positive; in
/// sampled mode they are i.i.d. uniform from the seed.
pub fn gen_overlap_instance(n: u64, seed: u64, exact: bool) -> Result<OverlapInstance> {
    if n == 0 || n % 10 != 0 {
        return Err(Error::InvalidSpec(format!(
            "overlap instance needs n divisible by 10, got {n}"
        )));
    }
    let shared = n / 5;
    let disjoint = n - shared;
    let mut rng = sub_rng(seed, "stream-gen");
    let mut examples = Vec::with_capacity((disjoint * 2 + shared) as usize);
    for _ in 0..disjoint {
        examples.push(OverlapExample { region: Region::AOnly, label: Label::Positive });
    }
    for _ in 0..disjoint {
        examples.push(OverlapExample { region: Region::BOnly, label: Label::Negative });
    }
    for i in 0..shared {
        let label = if exact {
            if i < shared / 2 {
                Label::Positive
            } else {
                Label::Negative
            }
        } else if rng.random::<f64>() < 0.5 {
            Label::Positive
        } else {
            Label::Negative
        };
        examples.push(OverlapExample { region: Region::Shared, label });
    }
    Ok(OverlapInstance { n_per_group: n, examples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experts::ExpertId;

    #[test]
    fn ic_instance_matches_loss_table_exhaustively() {
        let (stream, pool) = gen_ic_instance(10, true).unwrap();
        assert_eq!(pool.len(), 3);
        let (f, f_b, f_s) = (ExpertId(0), ExpertId(1), ExpertId(2));
        let mut s_rounds = 0;
        for round in &stream.rounds {
            if round.t % 2 == 1 {
                assert_eq!(round.groups, GroupSet::from_groups(&[IC_GROUP_B, IC_GROUP_S]));
                assert_eq!(round.losses.get(f), Some(1.0));
                assert_eq!(round.losses.get(f_b), Some(0.2));
                assert_eq!(round.losses.get(f_s), Some(0.2));
                s_rounds += 1;
            } else {
                assert_eq!(round.groups, GroupSet::from_groups(&[IC_GROUP_B]));
                assert_eq!(round.losses.get(f), Some(0.0));
                assert_eq!(round.losses.get(f_b), Some(0.2));
                assert_eq!(round.losses.get(f_s), None);
            }
        }
        assert_eq!(s_rounds, 5);
        let meta = stream.meta();
        assert_eq!(meta.group_size(IC_GROUP_B), 10);
        assert_eq!(meta.group_size(IC_GROUP_S), 5);
    }

    #[test]
    fn ic_instance_parity_swap() {
        let (stream, _) = gen_ic_instance(6, false).unwrap();
        assert_eq!(stream.rounds[0].groups, GroupSet::from_groups(&[IC_GROUP_B]));
        assert_eq!(
            stream.rounds[1].groups,
            GroupSet::from_groups(&[IC_GROUP_B, IC_GROUP_S])
        );
    }

    #[test]
    fn ic_instance_rejects_odd_t() {
        assert!(gen_ic_instance(7, true).is_err());
        assert!(gen_ic_instance(0, true).is_err());
    }

    #[test]
    fn overlap_instance_split_and_exact_labels() {
        let n = 1000;
        let inst = gen_overlap_instance(n, 1, true).unwrap();
        let shared = inst.examples.iter().filter(|e| e.region == Region::Shared).count() as u64;
        let a_only = inst.examples.iter().filter(|e| e.region == Region::AOnly).count() as u64;
        assert_eq!(shared, n / 5);
        assert_eq!(a_only, n - n / 5);
        // |A∩B| = 0.2·|A| = 0.25·|A∖B|.
        assert_eq!(4 * shared, a_only);
        let shared_pos = inst
            .examples
            .iter()
            .filter(|e| e.region == Region::Shared && e.label.is_positive())
            .count() as u64;
        assert_eq!(shared_pos, shared / 2);
        assert!(gen_overlap_instance(1003, 1, true).is_err());
    }

    #[test]
    fn overlap_sampled_mode_is_seeded() {
        let a = gen_overlap_instance(100, 7, false).unwrap();
        let b = gen_overlap_instance(100, 7, false).unwrap();
        assert_eq!(a, b);
        let c = gen_overlap_instance(100, 8, false).unwrap();
        assert_ne!(a, c);
    }

    fn small_spec() -> InstanceSpec {
        InstanceSpec {
            t: 50,
            groups: 2,
            membership: vec![0.6, 0.4],
            pool: PoolSpec {
                global: vec!["f".into()],
                group: vec![
                    GroupExperts { id: 0, experts: vec!["a".into()] },
                    GroupExperts { id: 1, experts: vec!["b".into()] },
                ],
                additions: vec![],
            },
            loss: vec![BaseLoss { base: "f".into(), model: LossModel::bernoulli(0.5) }],
        }
    }

    #[test]
    fn random_adversary_is_seed_deterministic() {
        let spec = small_spec();
        let (s1, _) = gen_random_adversary(&spec, 42).unwrap();
        let (s2, _) = gen_random_adversary(&spec, 42).unwrap();
        assert_eq!(s1, s2);
        let (s3, _) = gen_random_adversary(&spec, 43).unwrap();
        assert_ne!(s1, s3);
    }

    #[test]
    fn random_adversary_constant_zero_losses() {
        let mut spec = small_spec();
        spec.loss = vec![
            BaseLoss { base: "f".into(), model: LossModel::constant(0.0) },
            BaseLoss { base: "a".into(), model: LossModel::constant(0.0) },
            BaseLoss { base: "b".into(), model: LossModel::constant(0.0) },
        ];
        let (stream, _) = gen_random_adversary(&spec, 1).unwrap();
        for round in &stream.rounds {
            for (_, loss) in round.losses.iter() {
                assert_eq!(loss, 0.0);
            }
        }
    }

    #[test]
    fn membership_probability_one_fills_the_group() {
        let mut spec = small_spec();
        spec.membership = vec![1.0, 0.0];
        let (stream, _) = gen_random_adversary(&spec, 5).unwrap();
        let meta = stream.meta();
        assert_eq!(meta.group_size(GroupId(0)), spec.t);
        assert_eq!(meta.group_size(GroupId(1)), 0);
        meta.validate().unwrap();
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = small_spec();
        spec.membership = vec![1.5, 0.2];
        assert!(gen_random_adversary(&spec, 1).is_err());

        let mut spec = small_spec();
        spec.membership = vec![0.5];
        assert!(gen_random_adversary(&spec, 1).is_err());

        let mut spec = small_spec();
        spec.loss[0].model.model = LossKind::Bernoulli { p: 1.2 };
        assert!(gen_random_adversary(&spec, 1).is_err());
    }

    #[test]
    fn losses_defined_for_exactly_the_awake_experts() {
        let spec = small_spec();
        let (stream, pool) = gen_random_adversary(&spec, 9).unwrap();
        for round in &stream.rounds {
            let awake = pool.awake_set(round);
            assert_eq!(round.losses.ids().collect::<Vec<_>>(), awake);
        }
    }

    #[test]
    fn scheduled_addition_appears_at_its_time() {
        let mut spec = small_spec();
        spec.pool.additions.push(ExpertAddition { t: 20, base: "late".into(), group: Some(0) });
        let (stream, pool) = gen_random_adversary(&spec, 3).unwrap();
        let late = pool.experts().last().unwrap().id;
        for round in &stream.rounds {
            let has_loss = round.losses.contains(late);
            let should = round.t >= 20 && round.groups.contains(GroupId(0));
            assert_eq!(has_loss, should, "t={}", round.t);
        }
    }
}
