//! Experiment configuration: a single TOML file with nested sections.
//!
//! The schema is strict — unknown fields are rejected — and every run
//! embeds the SHA-256 digest of the canonicalized config so outputs are
//! traceable to the exact configuration that produced them.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use subfair_core::environments::{BaseLoss, InstanceSpec, PoolSpec};
use subfair_core::feedback::{ActionMode, DrawRange};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<PoolSpec>,
    pub learner: LearnerConfig,
    #[serde(default)]
    pub feedback: FeedbackConfig,
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InstanceConfig {
    /// Seeded random adversarial stream over declared groups.
    Random {
        t: u64,
        groups: u8,
        membership: Vec<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        loss: Vec<BaseLoss>,
    },
    /// The two-group incentive counterexample (fixed pool and losses).
    Ic {
        t: u64,
        #[serde(default = "default_true")]
        s_on_odd: bool,
    },
}

fn default_true() -> bool {
    true
}

impl InstanceConfig {
    pub fn t(&self) -> u64 {
        match self {
            InstanceConfig::Random { t, .. } | InstanceConfig::Ic { t, .. } => *t,
        }
    }

    pub fn with_t(&self, t: u64) -> InstanceConfig {
        let mut c = self.clone();
        match &mut c {
            InstanceConfig::Random { t: slot, .. } | InstanceConfig::Ic { t: slot, .. } => {
                *slot = t
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Anh,
    Mw,
    IntersectionMw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    /// Learning-rate override for plain multiplicative weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReductionKind {
    #[default]
    None,
    R1,
    R2,
    R3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackMode {
    #[default]
    Full,
    PayForFeedback,
    AppleTasting,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FeedbackConfig {
    #[serde(default)]
    pub reduction: ReductionKind,
    #[serde(default)]
    pub mode: FeedbackMode,
    /// Reduction 3 only: range of the per-group exploration ordinal.
    #[serde(default)]
    pub draw_range: DrawRange,
    /// Apple tasting only: how non-exploration actions are charged.
    #[serde(default)]
    pub action_mode: ActionMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    /// Defaults to powers of two plus T.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &std::path::Path) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::from_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match &self.instance {
            InstanceConfig::Random { t, groups, membership, loss } => {
                let pool = self
                    .pool
                    .as_ref()
                    .ok_or_else(|| invalid("random instance requires a [pool] section"))?;
                let spec = InstanceSpec {
                    t: *t,
                    groups: *groups,
                    membership: membership.clone(),
                    pool: pool.clone(),
                    loss: loss.clone(),
                };
                spec.validate().map_err(|e| invalid(e.to_string()))?;
            }
            InstanceConfig::Ic { t, .. } => {
                if self.pool.is_some() {
                    return Err(invalid(
                        "the ic instance defines its own pool; remove the [pool] section",
                    ));
                }
                if *t == 0 || *t % 2 != 0 {
                    return Err(invalid(format!("ic instance needs even T, got {t}")));
                }
            }
        }

        if self.run.seeds.is_empty() {
            return Err(invalid("run.seeds must list at least one seed"));
        }
        if let Some(cps) = &self.run.checkpoints {
            if cps.is_empty() || cps.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid("run.checkpoints must be non-empty and strictly increasing"));
            }
        }

        if let Some(eta) = self.learner.eta {
            if self.learner.algorithm != Algorithm::Mw {
                return Err(invalid("learner.eta applies only to algorithm = \"mw\""));
            }
            if !(eta > 0.0 && eta < 1.0) {
                return Err(invalid(format!("learner.eta {eta} outside (0,1)")));
            }
        }
        if self.learner.algorithm == Algorithm::Mw {
            let has_group_experts = match &self.pool {
                Some(p) => {
                    !p.group.is_empty() || p.additions.iter().any(|a| a.group.is_some())
                }
                None => true, // the ic pool has group experts
            };
            if has_group_experts {
                return Err(invalid(
                    "algorithm \"mw\" needs an always-awake roster (no group experts)",
                ));
            }
        }

        match (self.feedback.reduction, self.feedback.mode) {
            (ReductionKind::None, FeedbackMode::Full) => {}
            (ReductionKind::None, _) => {
                return Err(invalid(
                    "pay-for-feedback and apple-tasting modes need a reduction (r1, r2, or r3)",
                ));
            }
            (_, FeedbackMode::Full) => {
                return Err(invalid("reductions run under pay-for-feedback or apple-tasting"));
            }
            (ReductionKind::R1, _) => {
                if self.learner.algorithm == Algorithm::IntersectionMw {
                    return Err(invalid(
                        "reduction r1 already runs per-intersection learners; use anh or mw",
                    ));
                }
            }
            (ReductionKind::R2 | ReductionKind::R3, _) => {
                if self.learner.algorithm == Algorithm::Mw {
                    return Err(invalid(
                        "reductions r2 and r3 need a sleeping-experts base (anh or intersection-mw)",
                    ));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonicalized (JSON-serialized) config.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The instance spec for a random instance (validated configs only).
    pub fn instance_spec(&self) -> Option<InstanceSpec> {
        match &self.instance {
            InstanceConfig::Random { t, groups, membership, loss } => Some(InstanceSpec {
                t: *t,
                groups: *groups,
                membership: membership.clone(),
                pool: self.pool.clone().unwrap_or_default(),
                loss: loss.clone(),
            }),
            InstanceConfig::Ic { .. } => None,
        }
    }

    pub fn checkpoints(&self) -> Vec<u64> {
        self.run
            .checkpoints
            .clone()
            .unwrap_or_else(|| subfair_core::report::default_checkpoints(self.instance.t()))
    }
}
