//! Deep Q-learning scheduler.
//!
//! The agent scores every waiting query with `Q(state, action)`, where the
//! state is the downsized buffer bitmap and the action is the downsized
//! access matrix of the query. After executing the chosen query it observes
//! the query's hit ratio as reward and regresses the network toward
//! `r + gamma * max_a' Q_target(s', a')` over the queries still waiting.
//! Training uses uniform experience replay and a periodically synced target
//! network; both can be switched off.

mod replay;
mod tabular;

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bufferpool::BufferPool;
use crate::catalog::Catalog;
use crate::encoding::{encode_buffer_state, encode_query_action};
use crate::error::{Error, Result};
use crate::neuralnet::{read_json, train_batch, write_json, Adam, Mlp, NetworkCheckpoint};
use crate::queue::{run_queue, Decision, PreparedQuery, ScheduleOutcome};

pub use replay::{Features, ReplayBuffer, Transition};
pub use tabular::TabularQ;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Discount factor of future hit ratios.
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Training decisions over which epsilon falls linearly to its end value.
    pub epsilon_decay_steps: u64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub min_replay_before_training: usize,
    /// Observations between target-network syncs.
    pub target_sync_period: u64,
    pub use_replay: bool,
    pub use_target_network: bool,
    pub learning_rate: f64,
    /// Gradient steps per observation once training has started.
    pub updates_per_step: usize,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 600,
            replay_capacity: 10_000,
            batch_size: 32,
            min_replay_before_training: 64,
            target_sync_period: 500,
            use_replay: true,
            use_target_network: true,
            learning_rate: Adam::DEFAULT_LEARNING_RATE,
            updates_per_step: 1,
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64, what: &str| {
            if v.is_finite() && (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} {v} outside [0, 1]")))
            }
        };
        unit(self.gamma, "gamma")?;
        unit(self.epsilon_start, "epsilon_start")?;
        unit(self.epsilon_end, "epsilon_end")?;
        if self.replay_capacity == 0 || self.batch_size == 0 || self.updates_per_step == 0 {
            return Err(Error::Config(
                "replay_capacity, batch_size and updates_per_step must be positive".into(),
            ));
        }
        if self.use_target_network && self.target_sync_period == 0 {
            return Err(Error::Config("target_sync_period must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning_rate {}", self.learning_rate)));
        }
        Ok(())
    }

    pub fn epsilon(&self) -> EpsilonSchedule {
        EpsilonSchedule {
            start: self.epsilon_start,
            end: self.epsilon_end,
            decay_steps: self.epsilon_decay_steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl EpsilonSchedule {
    pub fn value(&self, step: u64) -> f64 {
        if self.decay_steps == 0 || step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Evaluate,
}

/// Index of the next query: uniform with probability `epsilon`, otherwise
/// the highest-scoring candidate (earliest on ties).
pub fn select_action<R: Rng + ?Sized>(
    net: &Mlp,
    state: &[f64],
    candidates: &[&[f64]],
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    match candidates.len() {
        0 => return Err(Error::EmptyQueue),
        1 => return Ok(0),
        _ => {}
    }
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return Ok(rng.random_range(0..candidates.len()));
    }
    let scores = net.score_candidates(state, candidates)?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(best)
}

/// `r` for a terminal step, `r + gamma * next_max` otherwise.
pub fn bellman_value(reward: f64, gamma: f64, next_max: Option<f64>) -> f64 {
    match next_max {
        Some(q) => reward + gamma * q,
        None => reward,
    }
}

pub fn bellman_target(transition: &Transition, gamma: f64, target_net: &Mlp) -> Result<f64> {
    if transition.terminal() {
        return Ok(transition.reward);
    }
    let candidates: Vec<&[f64]> = transition.next_candidates.iter().map(|a| &a[..]).collect();
    let scores = target_net.score_candidates(&transition.next_state, &candidates)?;
    let next_max = scores.into_iter().fold(f64::NEG_INFINITY, f64::max);
    Ok(bellman_value(transition.reward, gamma, Some(next_max)))
}

/// Flattened downsized buffer state.
pub fn encode_state(pool: &BufferPool, catalog: &Catalog, width: usize) -> Result<Features> {
    let snapshot = pool.snapshot(catalog)?;
    Ok(Arc::from(
        encode_buffer_state(&snapshot, width)?.into_inner().into_vec(),
    ))
}

pub fn encode_action(query: &PreparedQuery, width: usize) -> Result<Features> {
    Ok(Arc::from(
        encode_query_action(&query.access, width)?.into_inner().into_vec(),
    ))
}

#[derive(Debug, Clone)]
pub struct DqnAgent {
    config: AgentConfig,
    relations: usize,
    width: usize,
    online: Mlp,
    target: Mlp,
    adam: Adam,
    replay: ReplayBuffer,
    rng: ChaCha8Rng,
    decisions: u64,
    observations: u64,
    target_generation: u64,
}

impl DqnAgent {
    /// Agent for feature matrices of `relations x width`.
    pub fn new(config: AgentConfig, relations: usize, width: usize) -> Result<Self> {
        config.validate()?;
        if relations == 0 || width == 0 {
            return Err(Error::Config("feature shape must be non-empty".into()));
        }
        let online = Mlp::q_network(2 * relations * width, config.seed)?;
        let adam = Adam::new(&online, config.learning_rate);
        Ok(Self {
            relations,
            width,
            target: online.clone(),
            adam,
            online,
            replay: ReplayBuffer::new(if config.use_replay { config.replay_capacity } else { 1 }),
            rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x9E37_79B9_7F4A_7C15),
            decisions: 0,
            observations: 0,
            target_generation: 0,
            config,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn network(&self) -> &Mlp {
        &self.online
    }

    pub fn network_mut(&mut self) -> &mut Mlp {
        &mut self.online
    }

    pub fn target_network(&self) -> &Mlp {
        &self.target
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn optimizer(&self) -> &Adam {
        &self.adam
    }

    /// Training decisions taken so far (the epsilon schedule position).
    pub fn decisions(&self) -> u64 {
        self.decisions
    }

    pub fn current_epsilon(&self) -> f64 {
        self.config.epsilon().value(self.decisions)
    }

    /// Copies the online network into the target network.
    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
        self.target_generation += 1;
    }

    fn bootstrap_net(&self) -> &Mlp {
        if self.config.use_target_network {
            &self.target
        } else {
            &self.online
        }
    }

    /// Stores the transition and, once the replay holds enough experience,
    /// takes `updates_per_step` gradient steps on uniformly sampled batches.
    /// Returns the loss of the last step, if any.
    pub fn observe_and_learn(&mut self, transition: Transition) -> Result<Option<f64>> {
        self.replay.push(transition);
        self.observations += 1;
        let threshold = if self.config.use_replay {
            self.config.min_replay_before_training.max(1)
        } else {
            1
        };
        let mut loss = None;
        if self.replay.len() >= threshold {
            for _ in 0..self.config.updates_per_step {
                let indexes = if self.config.use_replay {
                    self.replay.sample_indexes(&mut self.rng, self.config.batch_size)
                } else {
                    vec![self.replay.len() - 1]
                };
                let batch = self.training_batch(&indexes)?;
                loss = Some(train_batch(&mut self.online, &mut self.adam, &batch)?);
                if !self.config.use_target_network {
                    // bootstrap values come from the network that just moved
                    self.target_generation += 1;
                }
            }
        }
        if self.config.use_target_network && self.observations.is_multiple_of(self.config.target_sync_period) {
            self.sync_target();
        }
        Ok(loss)
    }

    /// Inputs and Bellman targets for the given replay entries. Targets are
    /// cached per entry until the bootstrap network changes.
    pub fn training_batch(&mut self, indexes: &[usize]) -> Result<Vec<(Vec<f64>, f64)>> {
        let generation = self.target_generation;
        let gamma = self.config.gamma;
        let mut batch = Vec::with_capacity(indexes.len());
        for &i in indexes {
            let cached = self.replay.slot_mut(i).target;
            let target = match cached {
                Some((g, value)) if g == generation => value,
                _ => {
                    let tr = self
                        .replay
                        .get(i)
                        .ok_or_else(|| Error::validation(format!("replay index {i} out of range")))?;
                    let value = bellman_target(tr, gamma, self.bootstrap_net())?;
                    self.replay.slot_mut(i).target = Some((generation, value));
                    value
                }
            };
            let tr = &self.replay.slot_mut(i).transition;
            let input: Vec<f64> = tr.state.iter().chain(tr.action.iter()).copied().collect();
            batch.push((input, target));
        }
        Ok(batch)
    }

    fn check_shape(&self, catalog: &Catalog) -> Result<()> {
        if catalog.len() != self.relations {
            return Err(Error::shape(
                format!("{} relations", self.relations),
                format!("{} relations", catalog.len()),
            ));
        }
        Ok(())
    }

    pub fn schedule_queue(
        &mut self,
        pool: &mut BufferPool,
        catalog: &Catalog,
        queue: &[PreparedQuery],
        mode: Mode,
    ) -> Result<ScheduleOutcome> {
        match mode {
            Mode::Train => self.train_episode(pool, catalog, queue, |_| Ok(())),
            Mode::Evaluate => self.evaluate(pool, catalog, queue),
        }
    }

    /// Greedy (epsilon = 0) schedule without learning; leaves the agent untouched.
    pub fn evaluate(
        &self,
        pool: &mut BufferPool,
        catalog: &Catalog,
        queue: &[PreparedQuery],
    ) -> Result<ScheduleOutcome> {
        self.check_shape(catalog)?;
        if queue.is_empty() {
            return Err(Error::EmptyQueue);
        }
        let actions = queue
            .iter()
            .map(|q| encode_action(q, self.width))
            .collect::<Result<Vec<_>>>()?;
        let mut unused = ChaCha8Rng::seed_from_u64(0);
        run_queue(pool, queue, |pool, remaining| {
            let state = encode_state(pool, catalog, self.width)?;
            let candidates: Vec<&[f64]> = remaining.iter().map(|(p, _)| &actions[*p][..]).collect();
            select_action(&self.online, &state, &candidates, 0.0, &mut unused)
        })
    }

    /// One training pass over the queue. `after_decision` runs after every
    /// observed transition, e.g. to evaluate a frozen view of the agent.
    pub fn train_episode<F>(
        &mut self,
        pool: &mut BufferPool,
        catalog: &Catalog,
        queue: &[PreparedQuery],
        mut after_decision: F,
    ) -> Result<ScheduleOutcome>
    where
        F: FnMut(&Self) -> Result<()>,
    {
        self.check_shape(catalog)?;
        if queue.is_empty() {
            return Err(Error::EmptyQueue);
        }
        let actions = queue
            .iter()
            .map(|q| encode_action(q, self.width))
            .collect::<Result<Vec<_>>>()?;
        let mut remaining: Vec<usize> = (0..queue.len()).collect();
        let mut outcome = ScheduleOutcome::default();
        let mut state = encode_state(pool, catalog, self.width)?;
        while !remaining.is_empty() {
            let candidates: Vec<&[f64]> = remaining.iter().map(|&p| &actions[p][..]).collect();
            let epsilon = self.current_epsilon();
            let choice = select_action(&self.online, &state, &candidates, epsilon, &mut self.rng)?;
            let position = remaining.remove(choice);
            let query = &queue[position];
            let stats = pool.execute_query(&query.reads)?;
            let reward = stats.hit_ratio();
            let next_state = encode_state(pool, catalog, self.width)?;
            let transition = Transition {
                state,
                action: actions[position].clone(),
                reward,
                next_state: next_state.clone(),
                next_candidates: remaining.iter().map(|&p| actions[p].clone()).collect(),
            };
            self.observe_and_learn(transition)?;
            self.decisions += 1;
            outcome.decisions.push(Decision {
                position,
                query_id: query.query_id,
                stats,
                reward,
            });
            after_decision(self)?;
            state = next_state;
        }
        Ok(outcome)
    }

    pub fn checkpoint(&self) -> AgentCheckpoint {
        AgentCheckpoint {
            version: AGENT_CHECKPOINT_VERSION,
            config: self.config.clone(),
            relations: self.relations,
            width: self.width,
            network: NetworkCheckpoint::new(&self.online, &self.adam),
            target: self.target.clone(),
            decisions: self.decisions,
            observations: self.observations,
            rng: self.rng.clone(),
        }
    }

    /// Restores networks, optimizer, exploration position and rng. The
    /// replay buffer starts empty.
    pub fn from_checkpoint(checkpoint: AgentCheckpoint) -> Result<Self> {
        if checkpoint.version != AGENT_CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion {
                found: checkpoint.version,
                expected: AGENT_CHECKPOINT_VERSION,
            });
        }
        let mut agent = Self::new(checkpoint.config, checkpoint.relations, checkpoint.width)?;
        let expected = agent.online.dims();
        if checkpoint.network.net.dims() != expected || checkpoint.target.dims() != expected {
            return Err(Error::shape(
                format!("{expected:?}"),
                format!("{:?}", checkpoint.network.net.dims()),
            ));
        }
        agent.online = checkpoint.network.net;
        agent.adam = checkpoint.network.adam;
        agent.target = checkpoint.target;
        agent.decisions = checkpoint.decisions;
        agent.observations = checkpoint.observations;
        agent.rng = checkpoint.rng;
        Ok(agent)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, &self.checkpoint())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(read_json(path)?)
    }
}

pub const AGENT_CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub version: u32,
    pub config: AgentConfig,
    pub relations: usize,
    pub width: usize,
    pub network: NetworkCheckpoint,
    pub target: Mlp,
    pub decisions: u64,
    pub observations: u64,
    pub rng: ChaCha8Rng,
}
