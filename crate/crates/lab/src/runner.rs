//! Multi-seed orchestration and CSV output.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use frodo_core::frodo::{FrodoConfig, InnerMode};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{LabError, LabResult};
use crate::experiments::{self, SeedRun};
use crate::metrics::{aggregate, write_aggregate, write_rows};

/// One arm of an experiment. Multi-arm experiments write each arm to its own
/// subdirectory.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Condition {
    Frodo { name: String, frodo: FrodoConfig },
    Walk,
    TdLambda { lambda: f64 },
    Lookahead,
}

impl Condition {
    /// Subdirectory name; empty for single-arm experiments.
    pub fn dir_name(&self) -> String {
        match self {
            Condition::Frodo { name, .. } => name.clone(),
            Condition::TdLambda { lambda } => format!("lambda_{lambda}"),
            Condition::Walk | Condition::Lookahead => String::new(),
        }
    }
}

pub fn conditions(config: &ExperimentConfig) -> Vec<Condition> {
    match config.experiment {
        Experiment::CatchFrodo | Experiment::OffpolicyCatchFrodo => vec![Condition::Frodo {
            name: String::new(),
            frodo: config.frodo.clone(),
        }],
        Experiment::AblationTargetVsLoss => [InnerMode::Target, InnerMode::DirectLoss]
            .into_iter()
            .map(|mode| Condition::Frodo {
                name: mode.name().to_string(),
                frodo: FrodoConfig {
                    inner_mode: mode,
                    ..config.frodo.clone()
                },
            })
            .collect(),
        Experiment::WalkFrodo => vec![Condition::Walk],
        Experiment::WalkTdLambda => config
            .lambdas
            .iter()
            .map(|&lambda| Condition::TdLambda { lambda })
            .collect(),
        Experiment::CatchLookaheadBaseline => vec![Condition::Lookahead],
    }
}

pub fn run_seed(config: &ExperimentConfig, condition: &Condition, seed: u64) -> LabResult<SeedRun> {
    match condition {
        Condition::Frodo { frodo, .. } => experiments::catch_frodo(config, frodo.clone(), seed),
        Condition::Walk => experiments::walk_frodo(config, seed),
        Condition::TdLambda { lambda } => experiments::walk_td_lambda(config, *lambda, seed),
        Condition::Lookahead => experiments::catch_lookahead(config, seed),
    }
}

/// All seeds of one condition, in seed order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionResult {
    pub condition: Condition,
    pub dir: PathBuf,
    pub runs: Vec<SeedRun>,
}

impl ConditionResult {
    pub fn all_diverged(&self) -> bool {
        !self.runs.is_empty() && self.runs.iter().all(|r| r.diverged)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub conditions: Vec<ConditionResult>,
}

impl RunSummary {
    /// True when every seed of every condition hit a diverged meta-update.
    pub fn all_diverged(&self) -> bool {
        !self.conditions.is_empty() && self.conditions.iter().all(ConditionResult::all_diverged)
    }
}

/// Runs every (condition, seed) job on a pool of worker threads. Each job owns
/// its environment, learner and tape; results are written after all join.
pub fn run(config: &ExperimentConfig) -> LabResult<RunSummary> {
    config.validate()?;
    let conds = conditions(config);
    let jobs: Vec<(usize, u64)> = (0..conds.len())
        .flat_map(|c| config.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let results: Mutex<Vec<Option<LabResult<SeedRun>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = config.threads.min(jobs.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(c, seed)) = jobs.get(i) else { break };
                let r = run_seed(config, &conds[c], seed);
                if let Ok(mut slots) = results.lock() {
                    slots[i] = Some(r);
                }
            });
        }
    });
    let mut slots = results.into_inner().map_err(|_| LabError::data("worker panicked"))?.into_iter();

    let mut summary = RunSummary { conditions: Vec::new() };
    for condition in conds {
        let mut runs = Vec::with_capacity(config.seeds.len());
        for _ in &config.seeds {
            let r = slots.next().flatten().ok_or_else(|| LabError::data("worker did not finish"))?;
            runs.push(r?);
        }
        let name = condition.dir_name();
        let dir = if name.is_empty() { config.out.clone() } else { config.out.join(name) };
        summary.conditions.push(ConditionResult { condition, dir, runs });
    }
    for c in &summary.conditions {
        write_condition(&c.dir, &c.runs)?;
    }
    Ok(summary)
}

pub fn seed_file(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed_{seed}.csv"))
}

pub fn aggregate_file(dir: &Path) -> PathBuf {
    dir.join("aggregate.csv")
}

fn write_condition(dir: &Path, runs: &[SeedRun]) -> LabResult<()> {
    fs::create_dir_all(dir)?;
    for r in runs {
        write_rows(&r.rows, BufWriter::new(File::create(seed_file(dir, r.seed))?))?;
    }
    let rows: Vec<_> = runs.iter().map(|r| r.rows.clone()).collect();
    write_aggregate(&aggregate(&rows)?, BufWriter::new(File::create(aggregate_file(dir))?))
}
