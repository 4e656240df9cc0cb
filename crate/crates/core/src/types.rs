//! Domain types for group-annotated loss streams.
//!
//! An example arriving at round `t` belongs to a subset of the declared
//! demographic groups (its [`GroupSet`]), and every expert awake at `t`
//! carries a loss in [0,1]. Losses outside [0,1] are rejected at ingestion,
//! never clamped. At most 64 groups are supported so group subsets pack
//! into one machine word and intersection profiles can key maps directly.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experts::ExpertId;

pub const MAX_GROUPS: u8 = 64;

/// Index into the declared group list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupId(pub u8);

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g{}", self.0)
    }
}

/// Subset of the declared groups, packed as a bitset over at most 64 groups.
///
/// The empty set is allowed: an example may belong to no declared group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupSet(pub u64);

impl GroupSet {
    pub const EMPTY: GroupSet = GroupSet(0);

    pub fn from_groups(groups: &[GroupId]) -> GroupSet {
        let mut bits = 0u64;
        for g in groups {
            bits |= 1u64 << g.0;
        }
        GroupSet(bits)
    }

    pub fn contains(&self, g: GroupId) -> bool {
        g.0 < MAX_GROUPS && self.0 & (1u64 << g.0) != 0
    }

    pub fn insert(&mut self, g: GroupId) {
        self.0 |= 1u64 << g.0;
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> u32 {
        self.0.count_ones()
    }

    pub fn iter(&self) -> impl Iterator<Item = GroupId> + '_ {
        (0..MAX_GROUPS).filter(|i| self.0 & (1u64 << i) != 0).map(GroupId)
    }

    /// Every member index is below the declared group count.
    pub fn validate(&self, declared: u8) -> Result<()> {
        match self.iter().find(|g| g.0 >= declared) {
            Some(g) => Err(Error::GroupOutOfRange { index: g.0, declared }),
            None => Ok(()),
        }
    }

    pub fn to_hex(&self) -> String {
        format!("{:x}", self.0)
    }

    pub fn from_hex(s: &str) -> Option<GroupSet> {
        u64::from_str_radix(s, 16).ok().map(GroupSet)
    }
}

impl fmt::Display for GroupSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:x}", self.0)
    }
}

// Serialized as a hex string so profiles can key JSON maps.
impl Serialize for GroupSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for GroupSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        GroupSet::from_hex(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("bad group bitmask {s:?}")))
    }
}

/// Binary label of an example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
}

impl Label {
    pub fn is_positive(&self) -> bool {
        matches!(self, Label::Positive)
    }
}

/// Per-expert losses for one round, defined for exactly the awake experts.
///
/// Stored sorted by expert id; all values validated into [0,1] on
/// construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(ExpertId, f64)>", into = "Vec<(ExpertId, f64)>")]
pub struct LossMap(Vec<(ExpertId, f64)>);

impl LossMap {
    pub fn new(mut entries: Vec<(ExpertId, f64)>) -> Result<LossMap> {
        entries.sort_by_key(|(id, _)| *id);
        for window in entries.windows(2) {
            if window[0].0 == window[1].0 {
                return Err(Error::InvalidDistribution(format!(
                    "duplicate expert {} in loss map",
                    window[0].0
                )));
            }
        }
        for &(expert, value) in &entries {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::LossOutOfRange { expert, value });
            }
        }
        Ok(LossMap(entries))
    }

    pub fn get(&self, id: ExpertId) -> Option<f64> {
        self.0
            .binary_search_by_key(&id, |(e, _)| *e)
            .ok()
            .map(|i| self.0[i].1)
    }

    pub fn contains(&self, id: ExpertId) -> bool {
        self.get(id).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ExpertId, f64)> + '_ {
        self.0.iter().copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = ExpertId> + '_ {
        self.0.iter().map(|(id, _)| *id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<(ExpertId, f64)>> for LossMap {
    type Error = Error;
    fn try_from(v: Vec<(ExpertId, f64)>) -> Result<LossMap> {
        LossMap::new(v)
    }
}

impl From<LossMap> for Vec<(ExpertId, f64)> {
    fn from(m: LossMap) -> Self {
        m.0
    }
}

/// One arriving example: timestep, group memberships, per-expert losses,
/// optional binary label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub t: u64,
    pub groups: GroupSet,
    pub losses: LossMap,
    pub label: Option<Label>,
}

impl Round {
    pub fn new(t: u64, groups: GroupSet, losses: LossMap, label: Option<Label>) -> Round {
        Round { t, groups, losses, label }
    }
}

/// Probability distribution over experts (the learner's play for a round).
///
/// Non-negative, sums to one within 1e-9, and its support must be a subset
/// of the round's awake set (enforced where rounds and distributions meet).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution(Vec<(ExpertId, f64)>);

/// Tolerance on Σp = 1 for distribution validation.
pub const DIST_SUM_TOL: f64 = 1e-9;

impl Distribution {
    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(mut entries: Vec<(ExpertId, f64)>) -> Result<Distribution> {
        entries.sort_by_key(|(id, _)| *id);
        let mut total = 0.0;
        for &(id, w) in &entries {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "weight {w} for expert {id} is negative or non-finite"
                )));
            }
            total += w;
        }
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("all weights zero".into()));
        }
        for entry in &mut entries {
            entry.1 /= total;
        }
        Ok(Distribution(entries))
    }

    /// Uniform distribution over the given support.
    pub fn uniform(mut support: Vec<ExpertId>) -> Result<Distribution> {
        if support.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        support.sort();
        support.dedup();
        let p = 1.0 / support.len() as f64;
        Ok(Distribution(support.into_iter().map(|id| (id, p)).collect()))
    }

    /// Probability assigned to `id` (zero when outside the support).
    pub fn prob(&self, id: ExpertId) -> f64 {
        self.0
            .binary_search_by_key(&id, |(e, _)| *e)
            .ok()
            .map_or(0.0, |i| self.0[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ExpertId, f64)> + '_ {
        self.0.iter().copied()
    }

    pub fn support(&self) -> impl Iterator<Item = ExpertId> + '_ {
        self.0.iter().map(|(id, _)| *id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks normalization and non-negativity.
    pub fn validate(&self) -> Result<()> {
        let mut sum = 0.0;
        for &(id, p) in &self.0 {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "probability {p} for expert {id} is invalid"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > DIST_SUM_TOL {
            return Err(Error::InvalidDistribution(format!("sum {sum} not within 1e-9 of 1")));
        }
        Ok(())
    }
}

/// Realized sizes of a stream: total rounds, per-group counts T(g), and
/// per-intersection-profile counts T(I). Profiles partition the stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamMeta {
    pub total: u64,
    pub group_sizes: Vec<u64>,
    pub intersection_sizes: BTreeMap<GroupSet, u64>,
}

impl StreamMeta {
    pub fn from_rounds(rounds: &[Round], n_groups: u8) -> StreamMeta {
        let mut group_sizes = vec![0u64; n_groups as usize];
        let mut intersection_sizes = BTreeMap::new();
        for round in rounds {
            *intersection_sizes.entry(round.groups).or_insert(0) += 1;
            for g in round.groups.iter() {
                group_sizes[g.0 as usize] += 1;
            }
        }
        StreamMeta { total: rounds.len() as u64, group_sizes, intersection_sizes }
    }

    pub fn group_size(&self, g: GroupId) -> u64 {
        self.group_sizes.get(g.0 as usize).copied().unwrap_or(0)
    }

    /// Consistency: profiles partition the stream, and each T(g) is the sum
    /// of T(I) over profiles containing g.
    pub fn validate(&self) -> Result<()> {
        let sum: u64 = self.intersection_sizes.values().sum();
        if sum != self.total {
            return Err(Error::InvalidSpec(format!(
                "intersection sizes sum to {sum}, expected {}",
                self.total
            )));
        }
        for (i, &size) in self.group_sizes.iter().enumerate() {
            let g = GroupId(i as u8);
            let from_profiles: u64 = self
                .intersection_sizes
                .iter()
                .filter(|(profile, _)| profile.contains(g))
                .map(|(_, n)| n)
                .sum();
            if from_profiles != size {
                return Err(Error::InvalidSpec(format!(
                    "group {g} size {size} != {from_profiles} from profiles"
                )));
            }
        }
        Ok(())
    }
}

/// A complete loss stream over `n_groups` declared groups, rounds numbered
/// consecutively from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub n_groups: u8,
    pub rounds: Vec<Round>,
}

impl Stream {
    pub fn new(n_groups: u8, rounds: Vec<Round>) -> Result<Stream> {
        if n_groups > MAX_GROUPS {
            return Err(Error::InvalidSpec(format!(
                "{n_groups} groups exceeds the {MAX_GROUPS}-group limit"
            )));
        }
        for (i, round) in rounds.iter().enumerate() {
            if round.t != i as u64 + 1 {
                return Err(Error::MalformedRound {
                    t: round.t,
                    reason: format!("expected t={}", i + 1),
                });
            }
            round.groups.validate(n_groups)?;
        }
        Ok(Stream { n_groups, rounds })
    }

    pub fn len(&self) -> u64 {
        self.rounds.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn meta(&self) -> StreamMeta {
        StreamMeta::from_rounds(&self.rounds, self.n_groups)
    }
}

#[derive(Serialize, Deserialize)]
struct RoundRecord {
    t: u64,
    groups: String,
    losses: Vec<(ExpertId, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<Label>,
}

/// Writes a stream as line-delimited JSON records with fields
/// `t`, `groups` (hex bitmask), `losses`, and optional `label`.
pub fn write_stream<W: Write>(mut w: W, stream: &Stream) -> std::io::Result<()> {
    for round in &stream.rounds {
        let record = RoundRecord {
            t: round.t,
            groups: round.groups.to_hex(),
            losses: round.losses.iter().collect(),
            label: round.label,
        };
        serde_json::to_writer(&mut w, &record)?;
        writeln!(w)?;
    }
    Ok(())
}

/// Reads a stream written by [`write_stream`]; `n_groups` declares the
/// group universe the records must fit in.
pub fn read_stream<R: BufRead>(r: R, n_groups: u8) -> Result<Stream> {
    let mut rounds = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::StreamParse { line: i + 1, reason: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RoundRecord = serde_json::from_str(&line)
            .map_err(|e| Error::StreamParse { line: i + 1, reason: e.to_string() })?;
        let groups = GroupSet::from_hex(&record.groups).ok_or_else(|| Error::StreamParse {
            line: i + 1,
            reason: format!("bad group bitmask {:?}", record.groups),
        })?;
        let losses = LossMap::new(record.losses)?;
        rounds.push(Round::new(record.t, groups, losses, record.label));
    }
    Stream::new(n_groups, rounds)
}

/// One executed round: what arrived, what the learner played, and whether
/// the round was an exploration (label-purchase) round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub round: Round,
    pub dist: Distribution,
    pub explored: bool,
}

impl HistoryEntry {
    /// Expected loss of the played distribution, Σ_f p_f ℓ_f.
    pub fn expected_loss(&self) -> Result<f64> {
        crate::metrics::expected_loss(&self.dist, &self.round.losses)
            .map_err(|_| Error::MalformedRound {
                t: self.round.t,
                reason: "distribution support not covered by losses".into(),
            })
    }

    /// Loss charged to the learner: cost 1 on exploration rounds (the price
    /// of buying the label replaces the action's loss), expected loss
    /// otherwise.
    pub fn charged_loss(&self) -> Result<f64> {
        if self.explored {
            Ok(1.0)
        } else {
            self.expected_loss()
        }
    }
}

/// Full record of a run. Metrics are pure functions of this value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub n_groups: u8,
    /// Every expert id that existed in the run's pool (for unknown-expert
    /// detection; an expert may appear here yet never wake).
    pub roster: Vec<ExpertId>,
    pub entries: Vec<HistoryEntry>,
}

impl History {
    pub fn new(n_groups: u8, roster: Vec<ExpertId>) -> History {
        History { n_groups, roster, entries: Vec::new() }
    }

    /// Appends an entry, enforcing increasing timesteps and that the played
    /// distribution's support is covered by the round's losses.
    pub fn push(&mut self, round: Round, dist: Distribution, explored: bool) -> Result<()> {
        if let Some(last) = self.entries.last() {
            if round.t <= last.round.t {
                return Err(Error::MalformedRound {
                    t: round.t,
                    reason: format!("timestep not increasing (previous {})", last.round.t),
                });
            }
        }
        for id in dist.support() {
            if !round.losses.contains(id) {
                return Err(Error::MalformedRound {
                    t: round.t,
                    reason: format!("distribution puts mass on asleep expert {id}"),
                });
            }
        }
        self.entries.push(HistoryEntry { round, dist, explored });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn knows_expert(&self, id: ExpertId) -> bool {
        self.roster.contains(&id)
    }
}
