//! Single-experiment execution: build the instance, run the configured
//! learner under the configured feedback model, and emit a per-round CSV
//! trajectory plus a JSON summary. Deterministic given (config, seed).

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use subfair_core::algorithms::anh::AnhLearner;
use subfair_core::algorithms::ensemble::IntersectionEnsemble;
use subfair_core::algorithms::mw::{eta_schedule, MwLearner};
use subfair_core::algorithms::Learner;
use subfair_core::audit::{ir_gain, stream_rates, GainReport, RateReport};
use subfair_core::environments::{gen_ic_instance, gen_random_adversary};
use subfair_core::error::Error as CoreError;
use subfair_core::feedback::{
    mw_base_factory, run_full_feedback, run_reduction1, run_reduction2, run_reduction3,
    to_apple_tasting, AppleTastingRun, RunOutput,
};
use subfair_core::report::{compile_report, RegretAccumulator, RegretReport};
use subfair_core::{Distribution, ExpertPool, GroupId, Round, Stream};

use crate::config::{Algorithm, ExperimentConfig, FeedbackMode, InstanceConfig, ReductionKind};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RunError>;

/// One learner behind a common face, picked by the config.
pub enum AnyLearner {
    Anh(AnhLearner),
    Mw(MwLearner),
    Ensemble(IntersectionEnsemble),
}

impl Learner for AnyLearner {
    fn predict(
        &mut self,
        pool: &ExpertPool,
        round: &Round,
        awake: &[subfair_core::ExpertId],
    ) -> subfair_core::Result<Distribution> {
        match self {
            AnyLearner::Anh(l) => Learner::predict(l, pool, round, awake),
            AnyLearner::Mw(l) => Learner::predict(l, pool, round, awake),
            AnyLearner::Ensemble(l) => Learner::predict(l, pool, round, awake),
        }
    }

    fn observe(
        &mut self,
        round: &Round,
        dist: &Distribution,
        awake: &[subfair_core::ExpertId],
    ) -> subfair_core::Result<()> {
        match self {
            AnyLearner::Anh(l) => l.observe(round, dist, awake),
            AnyLearner::Mw(l) => l.observe(round, dist, awake),
            AnyLearner::Ensemble(l) => l.observe(round, dist, awake),
        }
    }
}

/// Builds the configured instance. The root seed feeds the stream-gen
/// substream; the ic instance is deterministic.
pub fn build_instance(config: &ExperimentConfig, seed: u64) -> Result<(Stream, ExpertPool)> {
    match &config.instance {
        InstanceConfig::Random { .. } => {
            let spec = config.instance_spec().expect("random instance has a spec");
            Ok(gen_random_adversary(&spec, seed)?)
        }
        InstanceConfig::Ic { t, s_on_odd } => Ok(gen_ic_instance(*t, *s_on_odd)?),
    }
}

pub fn build_learner(config: &ExperimentConfig, pool: &ExpertPool, horizon: u64) -> Result<AnyLearner> {
    Ok(match config.learner.algorithm {
        Algorithm::Anh => AnyLearner::Anh(AnhLearner::new(pool)),
        Algorithm::Mw => {
            let roster: Vec<_> = pool.experts().iter().map(|e| e.id).collect();
            let eta = config.learner.eta.unwrap_or_else(|| eta_schedule(roster.len(), horizon));
            AnyLearner::Mw(MwLearner::new(roster, eta)?)
        }
        Algorithm::IntersectionMw => AnyLearner::Ensemble(IntersectionEnsemble::new()),
    })
}

fn execute(
    config: &ExperimentConfig,
    stream: &Stream,
    pool: &ExpertPool,
    seed: u64,
) -> Result<RunOutput> {
    let t = stream.len();
    Ok(match config.feedback.reduction {
        ReductionKind::None => {
            let mut learner = build_learner(config, pool, t)?;
            run_full_feedback(stream, pool, &mut learner)?
        }
        ReductionKind::R1 => match config.learner.algorithm {
            Algorithm::Anh => {
                let factory = |roster: &[subfair_core::ExpertId], _phases: u64| {
                    let mut learner = AnhLearner::new(pool);
                    // Pre-size for the roster (ids may exceed dense range in
                    // hidden pools).
                    for &id in roster {
                        learner.set_state(id, Default::default());
                    }
                    Ok(Box::new(learner) as Box<dyn Learner>)
                };
                run_reduction1(stream, pool, factory, None, seed)?
            }
            _ => run_reduction1(stream, pool, mw_base_factory(), None, seed)?,
        },
        ReductionKind::R2 => {
            let mut learner = build_learner(config, pool, t)?;
            run_reduction2(stream, pool, &mut learner, seed)?
        }
        ReductionKind::R3 => {
            let mut learner = build_learner(config, pool, t)?;
            run_reduction3(stream, pool, &mut learner, seed, config.feedback.draw_range, None)?.0
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub group: u8,
    pub rates: RateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Audits {
    /// Individual-rationality gain per group (equals subgroup regret).
    pub ir: Vec<GainReport>,
    /// Expected-value FPR/FNR per group; present only for labeled streams.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<GroupRates>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppleSummary {
    pub total_loss: f64,
    pub pay_for_feedback_loss: f64,
}

/// Self-describing per-seed summary: embeds the config digest and seed so
/// any report can be traced to the run that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_digest: String,
    pub seed: u64,
    pub exploration_count: u64,
    pub exploration_cost: f64,
    pub report: RegretReport,
    pub audits: Audits,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub apple: Option<AppleSummary>,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub seed: u64,
    pub summary: Summary,
    pub trajectory_csv: String,
}

/// Runs one seed of the experiment and renders its artifacts in memory.
pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<RunArtifacts> {
    let (stream, pool) = build_instance(config, seed)?;
    let output = execute(config, &stream, &pool, seed)?;

    let apple = match config.feedback.mode {
        FeedbackMode::AppleTasting => {
            let run: AppleTastingRun =
                to_apple_tasting(&output, config.feedback.action_mode, seed)?;
            Some(AppleSummary {
                total_loss: run.total_loss,
                pay_for_feedback_loss: run.pay_for_feedback_loss,
            })
        }
        _ => None,
    };

    let report = compile_report(&output.history, &pool, &config.checkpoints())?;

    let mut ir = Vec::new();
    for g in 0..stream.n_groups {
        let g = GroupId(g);
        let comparators = pool.group_comparators(g);
        if !comparators.is_empty() {
            ir.push(ir_gain(&output.history, g, &comparators)?);
        }
    }
    let all_labeled = output.history.entries.iter().all(|e| e.round.label.is_some());
    let rates = if all_labeled && !output.history.is_empty() {
        let mut per_group = Vec::new();
        for g in 0..stream.n_groups {
            per_group.push(GroupRates {
                group: g,
                rates: stream_rates(&output.history, Some(GroupId(g)))?,
            });
        }
        Some(per_group)
    } else {
        None
    };

    let summary = Summary {
        config_digest: config.digest(),
        seed,
        exploration_count: output.exploration.count(),
        exploration_cost: output.exploration.charged_cost(),
        report,
        audits: Audits { ir, rates },
        apple,
    };
    let trajectory_csv = render_trajectory(&output, &pool, stream.n_groups)?;
    Ok(RunArtifacts { seed, summary, trajectory_csv })
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "nan".to_string(),
    }
}

/// Fixed-order per-round CSV: t, group bitmask, explored flag, expected
/// loss, charged exploration cost, cumulative overall regret, then one
/// cumulative subgroup-regret column per declared group.
pub fn render_trajectory(output: &RunOutput, pool: &ExpertPool, n_groups: u8) -> Result<String> {
    let mut csv = String::new();
    csv.push_str("t,group_bitmask_hex,explored,expected_loss,charged_cost");
    csv.push_str(",cum_overall_regret");
    for g in 0..n_groups {
        csv.push_str(&format!(",cum_subgroup_regret_g{g}"));
    }
    csv.push('\n');

    let mut acc = RegretAccumulator::new(pool, n_groups);
    for entry in &output.history.entries {
        acc.feed(entry).map_err(RunError::Core)?;
        let expected = entry.expected_loss().map_err(RunError::Core)?;
        let cost = if entry.explored { 1.0 } else { 0.0 };
        csv.push_str(&format!(
            "{},{},{},{},{},{}",
            entry.round.t,
            entry.round.groups.to_hex(),
            u8::from(entry.explored),
            expected,
            cost,
            fmt_opt(acc.overall_regret()),
        ));
        for g in 0..n_groups {
            csv.push(',');
            csv.push_str(&fmt_opt(acc.subgroup_regret(GroupId(g))));
        }
        csv.push('\n');
    }
    Ok(csv)
}

/// Runs every configured seed and writes `trajectory_<seed>.csv` and
/// `summary_<seed>.json` under `out`.
pub fn run_to_dir(config: &ExperimentConfig, out: &Path, seed_override: Option<u64>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let seeds: Vec<u64> = match seed_override {
        Some(s) => vec![s],
        None => config.run.seeds.clone(),
    };
    let mut written = Vec::new();
    for seed in seeds {
        let artifacts = run_experiment(config, seed)?;
        let csv_path = out.join(format!("trajectory_{seed}.csv"));
        let json_path = out.join(format!("summary_{seed}.json"));
        fs::write(&csv_path, &artifacts.trajectory_csv)?;
        let mut file = fs::File::create(&json_path)?;
        serde_json::to_writer_pretty(&mut file, &artifacts.summary)
            .map_err(|e| RunError::Io(e.into()))?;
        file.write_all(b"\n")?;
        written.push(csv_path);
        written.push(json_path);
    }
    Ok(written)
}
