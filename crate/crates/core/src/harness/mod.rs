//! Experiment runner: generates a workload, runs every configured scheduler
//! on the same materialized reads, trains and checkpoint-evaluates the
//! agent, and writes CSV metrics.

mod config;
mod metrics;
mod oracle;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::DqnAgent;
use crate::baselines::{run_fcfs, run_greedy};
use crate::bufferpool::BufferPool;
use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::queue::{PreparedQuery, ScheduleOutcome};
use crate::workload::{generate_workload, Workload};

pub use config::{ExperimentConfig, SchedulerKind};
pub use metrics::{
    emit_metrics, emit_summary, format_metrics, format_summary, metrics_rows, parse_metrics, CostModel, MetricsRow,
    SummaryRow, METRICS_HEADER, SUMMARY_HEADER,
};
pub use oracle::{brute_force_oracle, OracleResult, MAX_ORACLE_QUERIES};

/// Stream separating read materialization from the workload generator.
const READS_STREAM: u64 = 0x7265_6164_7321;

/// Checkpoints at `0, every, 2*every, ...` and always at `total`.
pub fn checkpoint_schedule(total: u64, every: u64) -> Vec<u64> {
    let every = every.max(1);
    let mut points: Vec<u64> = (0..=total).step_by(every as usize).collect();
    if points.last() != Some(&total) {
        points.push(total);
    }
    points
}

/// Workload with reads materialized once, split into the queue the agent
/// trains on and the queue every scheduler is evaluated on.
#[derive(Debug, Clone)]
pub struct PreparedWorkload {
    pub workload: Workload,
    pub train: Vec<PreparedQuery>,
    pub eval: Vec<PreparedQuery>,
}

impl PreparedWorkload {
    pub fn catalog(&self) -> &Catalog {
        &self.workload.catalog
    }
}

/// Without a template split the agent trains and is evaluated on the whole
/// queue; with one, it trains on training templates and is evaluated on the
/// held-out ones.
pub fn prepare_workload(cfg: &ExperimentConfig) -> Result<PreparedWorkload> {
    let cfg = cfg.resolved();
    let workload = generate_workload(&cfg.workload)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ READS_STREAM);
    let prepared = workload
        .queries
        .iter()
        .map(|q| PreparedQuery::from_spec(q, &workload.catalog, cfg.read_mode, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let (train, eval) = if workload.split.test.is_empty() {
        (prepared.clone(), prepared)
    } else {
        prepared
            .into_iter()
            .partition(|q| workload.split.train.contains(&q.template_id))
    };
    if train.is_empty() || eval.is_empty() {
        return Err(Error::Config("template split left an empty queue".into()));
    }
    Ok(PreparedWorkload { workload, train, eval })
}

#[derive(Debug, Clone)]
pub struct CheckpointEval {
    pub checkpoint: u64,
    pub outcome: ScheduleOutcome,
}

#[derive(Debug, Clone)]
pub struct SchedulerRun {
    pub scheduler: SchedulerKind,
    /// Final schedule of the evaluation queue.
    pub outcome: ScheduleOutcome,
    /// Agent evaluations along training; one entry per checkpoint for the
    /// baselines too (their schedule does not change).
    pub checkpoints: Vec<CheckpointEval>,
}

impl SchedulerRun {
    pub fn at_checkpoint(&self, checkpoint: u64) -> Option<&ScheduleOutcome> {
        self.checkpoints
            .iter()
            .find(|c| c.checkpoint == checkpoint)
            .map(|c| &c.outcome)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub checkpoints: Vec<u64>,
    pub runs: Vec<SchedulerRun>,
    pub agent: Option<DqnAgent>,
}

impl ExperimentReport {
    pub fn run(&self, kind: SchedulerKind) -> Option<&SchedulerRun> {
        self.runs.iter().find(|r| r.scheduler == kind)
    }

    pub fn metrics(&self, kind: SchedulerKind) -> Vec<MetricsRow> {
        self.run(kind)
            .map(|r| metrics_rows(kind.name(), &r.outcome, self.config.cost_model()))
            .unwrap_or_default()
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let cost = self.config.cost_model();
        let mut rows = Vec::new();
        for &checkpoint in &self.checkpoints {
            for run in &self.runs {
                if let Some(outcome) = run.at_checkpoint(checkpoint) {
                    rows.push(SummaryRow {
                        scheduler: run.scheduler.name().to_string(),
                        checkpoint,
                        avg_hit_ratio: outcome.average_hit_ratio(),
                        total_cost: cost.total(outcome),
                    });
                }
            }
        }
        rows
    }

    /// `metrics_<scheduler>.csv` per scheduler and `summary.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for run in &self.runs {
            let path = dir.join(format!("metrics_{}.csv", run.scheduler.name()));
            emit_metrics(&self.metrics(run.scheduler), &path)?;
        }
        emit_summary(&self.summary(), &dir.join("summary.csv"))
    }
}

fn fresh_pool(catalog: &Catalog, cfg: &ExperimentConfig) -> Result<BufferPool> {
    BufferPool::new(catalog, cfg.buffer_blocks)
}

/// Baseline schedule of a queue on a fresh pool.
pub fn run_baseline(
    kind: SchedulerKind,
    catalog: &Catalog,
    capacity: usize,
    queue: &[PreparedQuery],
) -> Result<ScheduleOutcome> {
    let mut pool = BufferPool::new(catalog, capacity)?;
    match kind {
        SchedulerKind::Fcfs => run_fcfs(&mut pool, queue),
        SchedulerKind::Greedy => run_greedy(&mut pool, catalog, queue),
        SchedulerKind::Agent => Err(Error::Config("the agent is not a baseline".into())),
    }
}

/// Trains an agent for `cfg.epochs` passes over `train`, evaluating it on
/// `eval` (fresh pool, no exploration) at every checkpoint.
pub fn train_agent(
    cfg: &ExperimentConfig,
    catalog: &Catalog,
    train: &[PreparedQuery],
    eval: &[PreparedQuery],
) -> Result<(DqnAgent, Vec<CheckpointEval>)> {
    let cfg = cfg.resolved();
    let total = (cfg.epochs * train.len()) as u64;
    let mut agent_cfg = cfg.agent.clone();
    if let Some(fraction) = cfg.epsilon_decay_fraction {
        agent_cfg.epsilon_decay_steps = (fraction * total as f64).round() as u64;
    }
    let mut agent = DqnAgent::new(agent_cfg, catalog.len(), cfg.width)?;
    let schedule = checkpoint_schedule(total, cfg.checkpoint_every);
    let mut evals = Vec::with_capacity(schedule.len());
    let evaluate = |agent: &DqnAgent, evals: &mut Vec<CheckpointEval>| -> Result<()> {
        let mut pool = fresh_pool(catalog, &cfg)?;
        evals.push(CheckpointEval {
            checkpoint: agent.decisions(),
            outcome: agent.evaluate(&mut pool, catalog, eval)?,
        });
        Ok(())
    };
    if schedule.first() == Some(&0) {
        evaluate(&agent, &mut evals)?;
    }
    for _ in 0..cfg.epochs {
        let mut pool = fresh_pool(catalog, &cfg)?;
        agent.train_episode(&mut pool, catalog, train, |agent| {
            let step = agent.decisions();
            if step > 0 && schedule.binary_search(&step).is_ok() {
                evaluate(agent, &mut evals)?;
            }
            Ok(())
        })?;
    }
    Ok((agent, evals))
}

/// Runs the experiment in memory.
pub fn run_experiment_in_memory(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let cfg = cfg.resolved();
    let prepared = prepare_workload(&cfg)?;
    run_prepared(&cfg, &prepared)
}

pub fn run_prepared(cfg: &ExperimentConfig, prepared: &PreparedWorkload) -> Result<ExperimentReport> {
    let catalog = prepared.catalog();
    let total = (cfg.epochs * prepared.train.len()) as u64;
    let checkpoints = checkpoint_schedule(total, cfg.checkpoint_every);
    let mut runs = Vec::new();
    let mut trained = None;
    for &kind in &cfg.schedulers {
        let run = match kind {
            SchedulerKind::Fcfs | SchedulerKind::Greedy => {
                let outcome = run_baseline(kind, catalog, cfg.buffer_blocks, &prepared.eval)?;
                SchedulerRun {
                    scheduler: kind,
                    checkpoints: checkpoints
                        .iter()
                        .map(|&checkpoint| CheckpointEval {
                            checkpoint,
                            outcome: outcome.clone(),
                        })
                        .collect(),
                    outcome,
                }
            }
            SchedulerKind::Agent => {
                let (agent, evals) = train_agent(cfg, catalog, &prepared.train, &prepared.eval)?;
                let outcome = evals.last().map(|e| e.outcome.clone()).unwrap_or_default();
                trained = Some(agent);
                SchedulerRun {
                    scheduler: kind,
                    outcome,
                    checkpoints: evals,
                }
            }
        };
        runs.push(run);
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        checkpoints,
        runs,
        agent: trained,
    })
}

/// Runs the experiment and writes its CSVs to `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let report = run_experiment_in_memory(cfg)?;
    report.write(&cfg.out_dir)?;
    Ok(report)
}

/// Scores a saved agent and the configured baselines on the evaluation
/// queue without further training.
pub fn evaluate_agent(cfg: &ExperimentConfig, agent: &DqnAgent) -> Result<ExperimentReport> {
    cfg.validate()?;
    let cfg = cfg.resolved();
    let prepared = prepare_workload(&cfg)?;
    let catalog = prepared.catalog();
    let checkpoint = agent.decisions();
    let mut runs = Vec::new();
    for &kind in &cfg.schedulers {
        let outcome = match kind {
            SchedulerKind::Agent => agent.evaluate(&mut fresh_pool(catalog, &cfg)?, catalog, &prepared.eval)?,
            _ => run_baseline(kind, catalog, cfg.buffer_blocks, &prepared.eval)?,
        };
        runs.push(SchedulerRun {
            scheduler: kind,
            checkpoints: vec![CheckpointEval {
                checkpoint,
                outcome: outcome.clone(),
            }],
            outcome,
        });
    }
    Ok(ExperimentReport {
        config: cfg,
        checkpoints: vec![checkpoint],
        runs,
        agent: None,
    })
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub queries: Vec<PreparedQuery>,
    pub oracle: OracleResult,
    pub fcfs: ScheduleOutcome,
    pub greedy: ScheduleOutcome,
}

/// Exhaustive optimum of the first `n` evaluation queries next to FCFS and
/// greedy on the same reads.
pub fn oracle_report(cfg: &ExperimentConfig, n: usize) -> Result<OracleReport> {
    cfg.validate()?;
    let cfg = cfg.resolved();
    let prepared = prepare_workload(&cfg)?;
    let queries = oracle_queue(&prepared, n);
    let catalog = prepared.catalog();
    Ok(OracleReport {
        oracle: brute_force_oracle(cfg.buffer_blocks, &queries, catalog)?,
        fcfs: run_baseline(SchedulerKind::Fcfs, catalog, cfg.buffer_blocks, &queries)?,
        greedy: run_baseline(SchedulerKind::Greedy, catalog, cfg.buffer_blocks, &queries)?,
        queries,
    })
}

/// First `n` evaluation queries, sized for the brute-force oracle.
pub fn oracle_queue(prepared: &PreparedWorkload, n: usize) -> Vec<PreparedQuery> {
    prepared.eval.iter().take(n).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_points() {
        assert_eq!(checkpoint_schedule(10, 4), vec![0, 4, 8, 10]);
        assert_eq!(checkpoint_schedule(8, 4), vec![0, 4, 8]);
        assert_eq!(checkpoint_schedule(0, 4), vec![0]);
    }

    fn small_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.workload.query_count = 30;
        cfg.workload.template_count = 6;
        cfg.epochs = 1;
        cfg.checkpoint_every = 10;
        cfg.agent.min_replay_before_training = 8;
        cfg.width = 8;
        cfg
    }

    #[test]
    fn small_experiment_report() {
        let report = run_experiment_in_memory(&small_config()).unwrap();
        assert_eq!(report.checkpoints, vec![0, 10, 20, 30]);
        let summary = report.summary();
        assert_eq!(summary.len(), 3 * 4);
        for kind in [SchedulerKind::Fcfs, SchedulerKind::Greedy, SchedulerKind::Agent] {
            let run = report.run(kind).unwrap();
            assert!(run.outcome.is_permutation_of(30));
            assert_eq!(run.checkpoints.len(), 4);
            assert_eq!(report.metrics(kind).len(), 30);
        }
    }

    #[test]
    fn split_evaluates_held_out_templates() {
        let mut cfg = small_config();
        cfg.workload.test_template_fraction = 0.34;
        let prepared = prepare_workload(&cfg).unwrap();
        let split = &prepared.workload.split;
        assert!(prepared.eval.iter().all(|q| split.test.contains(&q.template_id)));
        assert!(prepared.train.iter().all(|q| split.train.contains(&q.template_id)));
        assert_eq!(prepared.train.len() + prepared.eval.len(), 30);
    }
}
