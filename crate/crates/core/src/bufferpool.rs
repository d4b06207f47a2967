//! Block-granular buffer pool with strict LRU eviction.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::catalog::{BlockMatrix, Catalog, RelationId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockRef {
    pub relation: RelationId,
    pub block: u32,
}

impl BlockRef {
    pub fn new(relation: RelationId, block: u32) -> Self {
        Self { relation, block }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Hit,
    Miss,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionStats {
    pub hits: u64,
    pub misses: u64,
    pub requests: u64,
}

impl ExecutionStats {
    pub fn record(&mut self, access: Access) {
        self.requests += 1;
        match access {
            Access::Hit => self.hits += 1,
            Access::Miss => self.misses += 1,
        }
    }

    pub fn hit_ratio(&self) -> f64 {
        hit_ratio_reward(self)
    }
}

impl std::ops::AddAssign for ExecutionStats {
    fn add_assign(&mut self, rhs: Self) {
        self.hits += rhs.hits;
        self.misses += rhs.misses;
        self.requests += rhs.requests;
    }
}

/// Hits over requests; a query that requested nothing scores 0.
pub fn hit_ratio_reward(stats: &ExecutionStats) -> f64 {
    if stats.requests == 0 {
        0.0
    } else {
        stats.hits as f64 / stats.requests as f64
    }
}

/// Fixed-capacity set of resident blocks ordered by recency.
///
/// `stamps` and `recency` always hold exactly the same blocks; the smallest
/// stamp is the least recently used block.
#[derive(Debug, Clone)]
pub struct BufferPool {
    capacity: usize,
    bounds: HashMap<RelationId, usize>,
    stamps: HashMap<BlockRef, u64>,
    recency: BTreeMap<u64, BlockRef>,
    clock: u64,
}

impl BufferPool {
    pub fn new(catalog: &Catalog, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::validation("buffer pool capacity must be positive"));
        }
        let bounds = catalog.relations().iter().map(|r| (r.id, r.block_count)).collect();
        Ok(Self {
            capacity,
            bounds,
            stamps: HashMap::with_capacity(capacity),
            recency: BTreeMap::new(),
            clock: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.stamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stamps.is_empty()
    }

    pub fn contains(&self, block: BlockRef) -> bool {
        self.stamps.contains_key(&block)
    }

    /// Resident blocks, least recently used first.
    pub fn resident(&self) -> impl Iterator<Item = BlockRef> + '_ {
        self.recency.values().copied()
    }

    pub fn clear(&mut self) {
        self.stamps.clear();
        self.recency.clear();
        self.clock = 0;
    }

    pub fn validate(&self, block: BlockRef) -> Result<()> {
        match self.bounds.get(&block.relation) {
            None => Err(Error::UnknownRelation(block.relation)),
            Some(&count) if (block.block as usize) < count => Ok(()),
            Some(&count) => Err(Error::validation(format!(
                "block {} out of range for relation {} ({count} blocks)",
                block.block, block.relation
            ))),
        }
    }

    pub fn access_block(&mut self, block: BlockRef) -> Result<Access> {
        self.validate(block)?;
        self.clock += 1;
        if let Some(stamp) = self.stamps.get_mut(&block) {
            self.recency.remove(stamp);
            *stamp = self.clock;
            self.recency.insert(self.clock, block);
            return Ok(Access::Hit);
        }
        if self.stamps.len() == self.capacity {
            if let Some((_, victim)) = self.recency.pop_first() {
                self.stamps.remove(&victim);
            }
        }
        self.stamps.insert(block, self.clock);
        self.recency.insert(self.clock, block);
        Ok(Access::Miss)
    }

    pub fn execute_query(&mut self, reads: &[BlockRef]) -> Result<ExecutionStats> {
        let mut stats = ExecutionStats::default();
        for &block in reads {
            stats.record(self.access_block(block)?);
        }
        Ok(stats)
    }

    /// 0/1 occupancy at full resolution.
    pub fn snapshot(&self, catalog: &Catalog) -> Result<BlockMatrix> {
        let mut matrix = BlockMatrix::zeros(catalog);
        for block in self.stamps.keys() {
            let row = catalog.row_of(block.relation)?;
            let cells = matrix.row_mut(row);
            let cell = cells
                .get_mut(block.block as usize)
                .ok_or_else(|| Error::validation(format!("resident block {block:?} outside catalog")))?;
            *cell = 1.0;
        }
        Ok(matrix)
    }

    /// Sum of access probabilities over resident blocks; equals the dot
    /// product of the snapshot with `access` without building the snapshot.
    pub fn expected_hits(&self, catalog: &Catalog, access: &BlockMatrix) -> Result<f64> {
        if !access.matches_catalog(catalog) {
            return Err(Error::shape("catalog-shaped access matrix", access.shape_string()));
        }
        let mut total = 0.0;
        for block in self.recency.values() {
            total += access.row(catalog.row_of(block.relation)?)[block.block as usize];
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{RelationKind, RelationMeta};

    fn catalog() -> Catalog {
        Catalog::new(vec![
            RelationMeta::new(1, "t", RelationKind::Base, 5),
            RelationMeta::new(2, "u", RelationKind::Base, 4),
        ])
        .unwrap()
    }

    fn b(block: u32) -> BlockRef {
        BlockRef::new(1, block)
    }

    #[test]
    fn cold_miss_then_warm_hit() {
        let cat = catalog();
        let mut pool = BufferPool::new(&cat, 2).unwrap();
        assert_eq!(pool.access_block(b(1)).unwrap(), Access::Miss);
        assert_eq!(pool.resident().collect::<Vec<_>>(), vec![b(1)]);
        pool.access_block(b(2)).unwrap();
        assert_eq!(pool.access_block(b(1)).unwrap(), Access::Hit);
        assert_eq!(pool.resident().last(), Some(b(1)));
    }

    #[test]
    fn evicts_least_recent() {
        let cat = catalog();
        let mut pool = BufferPool::new(&cat, 2).unwrap();
        pool.access_block(b(1)).unwrap();
        pool.access_block(b(2)).unwrap();
        assert_eq!(pool.access_block(b(3)).unwrap(), Access::Miss);
        let mut resident: Vec<_> = pool.resident().collect();
        resident.sort();
        assert_eq!(resident, vec![b(2), b(3)]);
    }

    #[test]
    fn worked_example_orders() {
        // blocks b1..b5 live at indexes 0..4
        let cat = catalog();
        let q1 = [b(0), b(1)];
        let q2 = [b(3), b(4)];
        let q3 = [b(1), b(2)];

        let mut pool = BufferPool::new(&cat, 2).unwrap();
        let s1 = pool.execute_query(&q1).unwrap();
        assert_eq!((s1.hits, s1.misses), (0, 2));
        let s3 = pool.execute_query(&q3).unwrap();
        assert_eq!((s3.hits, s3.misses), (1, 1));
        let s2 = pool.execute_query(&q2).unwrap();
        assert_eq!((s2.hits, s2.misses), (0, 2));
        assert_eq!(s1.misses + s2.misses + s3.misses, 5);

        let mut pool = BufferPool::new(&cat, 2).unwrap();
        let total: u64 = [&q1[..], &q2, &q3]
            .iter()
            .map(|q| pool.execute_query(q).unwrap().misses)
            .sum();
        assert_eq!(total, 6);
    }

    #[test]
    fn warm_repeat_is_all_hits() {
        let cat = catalog();
        let mut pool = BufferPool::new(&cat, 3).unwrap();
        let reads = [b(0), BlockRef::new(2, 3), b(4)];
        pool.execute_query(&reads).unwrap();
        let again = pool.execute_query(&reads).unwrap();
        assert_eq!(again.hits, 3);
        assert_eq!(again.hit_ratio(), 1.0);
    }

    #[test]
    fn reward_arithmetic() {
        let s = ExecutionStats {
            hits: 3,
            misses: 1,
            requests: 4,
        };
        assert_eq!(hit_ratio_reward(&s), 0.75);
        assert_eq!(hit_ratio_reward(&ExecutionStats::default()), 0.0);
        let all = ExecutionStats {
            hits: 5,
            misses: 0,
            requests: 5,
        };
        assert_eq!(hit_ratio_reward(&all), 1.0);
    }

    #[test]
    fn snapshot_marks_resident_blocks() {
        let cat = catalog();
        let mut pool = BufferPool::new(&cat, 4).unwrap();
        assert_eq!(pool.snapshot(&cat).unwrap().count_nonzero(), 0);
        pool.execute_query(&[BlockRef::new(2, 0), BlockRef::new(2, 1)]).unwrap();
        let snap = pool.snapshot(&cat).unwrap();
        assert_eq!(snap.row(1), &[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(snap.count_nonzero(), pool.len());
    }

    #[test]
    fn rejects_invalid_blocks() {
        let cat = catalog();
        let mut pool = BufferPool::new(&cat, 2).unwrap();
        assert!(matches!(
            pool.access_block(BlockRef::new(9, 0)),
            Err(Error::UnknownRelation(9))
        ));
        assert!(matches!(
            pool.access_block(BlockRef::new(2, 4)),
            Err(Error::Validation(_))
        ));
        assert!(pool.is_empty());
        assert!(BufferPool::new(&cat, 0).is_err());
    }
}
