//! Queued queries with their concrete read sets, and schedule outcomes.

use std::collections::BTreeSet;

use crate::bufferpool::{BlockRef, BufferPool, ExecutionStats};
use crate::catalog::{access_matrix, BlockMatrix, Catalog, QueryId, QuerySpec, TemplateId};
use crate::error::{Error, Result};
use crate::workload::{materialize_reads, ReadMode};

/// A query waiting in the execution queue.
///
/// `access` is what schedulers may look at (estimated per-block access
/// probabilities); `reads` is what execution actually touches. Reads are
/// resolved once so every scheduler replays the same blocks.
#[derive(Debug, Clone)]
pub struct PreparedQuery {
    pub query_id: QueryId,
    pub template_id: TemplateId,
    pub access: BlockMatrix,
    pub reads: Vec<BlockRef>,
}

impl PreparedQuery {
    pub fn from_spec<R: rand::Rng + ?Sized>(
        spec: &QuerySpec,
        catalog: &Catalog,
        mode: ReadMode,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            query_id: spec.query_id,
            template_id: spec.template_id,
            access: access_matrix(spec, catalog)?,
            reads: materialize_reads(spec, catalog, mode, rng)?,
        })
    }

    /// A query with a known read set; its access matrix is the 0/1
    /// indicator of those reads.
    pub fn from_reads(query_id: QueryId, reads: Vec<BlockRef>, catalog: &Catalog) -> Result<Self> {
        let mut access = BlockMatrix::zeros(catalog);
        for block in &reads {
            let row = catalog.row_of(block.relation)?;
            let cell = access
                .row_mut(row)
                .get_mut(block.block as usize)
                .ok_or_else(|| Error::validation(format!("block {block:?} outside catalog")))?;
            *cell = 1.0;
        }
        Ok(Self {
            query_id,
            template_id: 0,
            access,
            reads,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    /// Position of the query in the original queue.
    pub position: usize,
    pub query_id: QueryId,
    pub stats: ExecutionStats,
    pub reward: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScheduleOutcome {
    pub decisions: Vec<Decision>,
}

impl ScheduleOutcome {
    /// Execution order as positions in the original queue.
    pub fn order(&self) -> Vec<usize> {
        self.decisions.iter().map(|d| d.position).collect()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.decisions.iter().map(|d| d.reward).collect()
    }

    pub fn totals(&self) -> ExecutionStats {
        let mut total = ExecutionStats::default();
        for d in &self.decisions {
            total += d.stats;
        }
        total
    }

    pub fn total_misses(&self) -> u64 {
        self.totals().misses
    }

    /// Mean of per-query hit ratios.
    pub fn average_hit_ratio(&self) -> f64 {
        if self.decisions.is_empty() {
            return 0.0;
        }
        self.decisions.iter().map(|d| d.reward).sum::<f64>() / self.decisions.len() as f64
    }

    pub fn is_permutation_of(&self, len: usize) -> bool {
        let seen: BTreeSet<usize> = self.order().into_iter().collect();
        self.decisions.len() == len && seen.len() == len && seen.iter().all(|&p| p < len)
    }
}

/// Runs the queue to completion, asking `pick` for the next index into the
/// remaining queue. The remaining queue keeps the original relative order
/// and pairs each query with its original position.
pub fn run_queue<F>(pool: &mut BufferPool, queue: &[PreparedQuery], mut pick: F) -> Result<ScheduleOutcome>
where
    F: FnMut(&BufferPool, &[(usize, &PreparedQuery)]) -> Result<usize>,
{
    let mut remaining: Vec<(usize, &PreparedQuery)> = queue.iter().enumerate().collect();
    let mut outcome = ScheduleOutcome::default();
    while !remaining.is_empty() {
        let choice = pick(pool, &remaining)?;
        if choice >= remaining.len() {
            return Err(Error::validation(format!(
                "scheduler picked index {choice} of {}",
                remaining.len()
            )));
        }
        let (position, query) = remaining.remove(choice);
        let stats = pool.execute_query(&query.reads)?;
        outcome.decisions.push(Decision {
            position,
            query_id: query.query_id,
            stats,
            reward: stats.hit_ratio(),
        });
    }
    Ok(outcome)
}
