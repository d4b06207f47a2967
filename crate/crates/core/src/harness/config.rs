use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::error::{Error, Result};
use crate::workload::{ReadMode, WorkloadSpec};

use super::metrics::CostModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerKind {
    Fcfs,
    Greedy,
    Agent,
}

impl SchedulerKind {
    pub fn name(self) -> &'static str {
        match self {
            SchedulerKind::Fcfs => "fcfs",
            SchedulerKind::Greedy => "greedy",
            SchedulerKind::Agent => "agent",
        }
    }

    /// Parses a comma separated list such as `fcfs,greedy,agent`.
    pub fn parse_list(text: &str) -> Result<Vec<SchedulerKind>> {
        text.split(',').map(|s| s.trim().parse()).collect()
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchedulerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fcfs" => Ok(SchedulerKind::Fcfs),
            "greedy" => Ok(SchedulerKind::Greedy),
            "agent" => Ok(SchedulerKind::Agent),
            other => Err(Error::Config(format!("unknown scheduler {other:?}"))),
        }
    }
}

/// Everything one experiment run needs. Loaded from TOML; every field has
/// a default so a config file only lists what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; overrides the workload and agent seeds.
    pub seed: u64,
    pub buffer_blocks: usize,
    /// Feature width per relation row.
    pub width: usize,
    /// Training passes over the training queue.
    pub epochs: usize,
    /// Evaluate the agent every this many training decisions.
    pub checkpoint_every: u64,
    /// If set, epsilon decays over this fraction of all training decisions
    /// (replaces `agent.epsilon_decay_steps`).
    pub epsilon_decay_fraction: Option<f64>,
    pub schedulers: Vec<SchedulerKind>,
    pub read_mode: ReadMode,
    pub hit_cost: f64,
    pub miss_cost: f64,
    pub out_dir: PathBuf,
    pub workload: WorkloadSpec,
    pub agent: AgentConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            buffer_blocks: 256,
            width: 32,
            epochs: 3,
            checkpoint_every: 120,
            epsilon_decay_fraction: Some(0.5),
            schedulers: vec![SchedulerKind::Fcfs, SchedulerKind::Greedy, SchedulerKind::Agent],
            read_mode: ReadMode::Deterministic,
            hit_cost: 1.0,
            miss_cost: 100.0,
            out_dir: PathBuf::from("out"),
            workload: WorkloadSpec::default(),
            agent: AgentConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn cost_model(&self) -> CostModel {
        CostModel {
            hit_cost: self.hit_cost,
            miss_cost: self.miss_cost,
        }
    }

    /// Seeds propagated from the master seed.
    pub fn resolved(&self) -> Self {
        let mut cfg = self.clone();
        cfg.workload.seed = self.seed;
        cfg.agent.seed = self.seed.wrapping_add(1);
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.schedulers.is_empty() {
            return Err(Error::Config("at least one scheduler is required".into()));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::Config("checkpoint_every must be at least 1".into()));
        }
        if self.buffer_blocks == 0 || self.width == 0 || self.epochs == 0 {
            return Err(Error::Config("buffer_blocks, width and epochs must be positive".into()));
        }
        if let Some(f) = self.epsilon_decay_fraction {
            if !(f.is_finite() && (0.0..=1.0).contains(&f)) {
                return Err(Error::Config(format!("epsilon_decay_fraction {f} outside [0, 1]")));
            }
        }
        if !(self.hit_cost.is_finite()
            && self.miss_cost.is_finite()
            && self.hit_cost >= 0.0
            && self.miss_cost > self.hit_cost)
        {
            return Err(Error::Config("costs must satisfy 0 <= hit_cost < miss_cost".into()));
        }
        self.workload.validate()?;
        self.agent.validate()
    }
}
