//! Non-learned schedulers: first-come-first-served and the greedy
//! buffer-overlap heuristic.

use crate::bufferpool::BufferPool;
use crate::catalog::{BlockMatrix, Catalog};
use crate::error::{Error, Result};
use crate::queue::{run_queue, PreparedQuery, ScheduleOutcome};

pub fn fcfs_next(queue_len: usize) -> Result<usize> {
    if queue_len == 0 {
        return Err(Error::EmptyQueue);
    }
    Ok(0)
}

/// Dot product of a 0/1 buffer snapshot with a query's access
/// probabilities: the expected number of buffer hits.
pub fn greedy_score(snapshot: &BlockMatrix, access: &BlockMatrix) -> Result<f64> {
    if !snapshot.same_shape(access) {
        return Err(Error::shape(snapshot.shape_string(), access.shape_string()));
    }
    Ok(snapshot
        .rows()
        .iter()
        .zip(access.rows())
        .map(|(s, a)| s.iter().zip(a).map(|(x, y)| x * y).sum::<f64>())
        .sum())
}

/// Highest expected hits against the current pool; ties go to the earliest
/// queued query.
pub fn greedy_next(pool: &BufferPool, catalog: &Catalog, queue: &[&BlockMatrix]) -> Result<usize> {
    if queue.is_empty() {
        return Err(Error::EmptyQueue);
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (i, access) in queue.iter().enumerate() {
        let score = pool.expected_hits(catalog, access)?;
        if score > best.1 {
            best = (i, score);
        }
    }
    Ok(best.0)
}

pub fn run_fcfs(pool: &mut BufferPool, queue: &[PreparedQuery]) -> Result<ScheduleOutcome> {
    run_queue(pool, queue, |_, remaining| fcfs_next(remaining.len()))
}

pub fn run_greedy(pool: &mut BufferPool, catalog: &Catalog, queue: &[PreparedQuery]) -> Result<ScheduleOutcome> {
    run_queue(pool, queue, |pool, remaining| {
        let access: Vec<&BlockMatrix> = remaining.iter().map(|(_, q)| &q.access).collect();
        greedy_next(pool, catalog, &access)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bufferpool::BlockRef;
    use crate::catalog::{RelationKind, RelationMeta};

    fn catalog() -> Catalog {
        Catalog::new(vec![RelationMeta::new(1, "t", RelationKind::Base, 5)]).unwrap()
    }

    fn worked_example(cat: &Catalog) -> Vec<PreparedQuery> {
        let q = |id, blocks: [u32; 2]| {
            PreparedQuery::from_reads(id, blocks.iter().map(|&b| BlockRef::new(1, b)).collect(), cat).unwrap()
        };
        vec![q(1, [0, 1]), q(2, [3, 4]), q(3, [1, 2])]
    }

    #[test]
    fn fcfs_keeps_input_order() {
        assert_eq!(fcfs_next(2).unwrap(), 0);
        assert!(matches!(fcfs_next(0), Err(Error::EmptyQueue)));
        let cat = catalog();
        let mut pool = BufferPool::new(&cat, 2).unwrap();
        let out = run_fcfs(&mut pool, &worked_example(&cat)).unwrap();
        assert_eq!(out.order(), vec![0, 1, 2]);
        assert_eq!(out.total_misses(), 6);
    }

    #[test]
    fn scores_after_first_query() {
        let cat = catalog();
        let queries = worked_example(&cat);
        let mut pool = BufferPool::new(&cat, 2).unwrap();
        let empty = pool.snapshot(&cat).unwrap();
        assert!(queries.iter().all(|q| greedy_score(&empty, &q.access).unwrap() == 0.0));

        pool.execute_query(&queries[0].reads).unwrap();
        let snap = pool.snapshot(&cat).unwrap();
        assert_eq!(greedy_score(&snap, &queries[2].access).unwrap(), 1.0);
        assert_eq!(greedy_score(&snap, &queries[1].access).unwrap(), 0.0);
        let rest = [&queries[1].access, &queries[2].access];
        assert_eq!(greedy_next(&pool, &cat, &rest).unwrap(), 1);
    }

    #[test]
    fn greedy_fixes_worked_example() {
        let cat = catalog();
        let mut pool = BufferPool::new(&cat, 2).unwrap();
        let out = run_greedy(&mut pool, &cat, &worked_example(&cat)).unwrap();
        assert_eq!(out.order(), vec![0, 2, 1]);
        assert_eq!(out.total_misses(), 5);
    }

    #[test]
    fn selective_over_resident_relation() {
        let snap = BlockMatrix::from_rows(vec![vec![1.0; 4]]);
        let access = BlockMatrix::from_rows(vec![vec![0.5; 4]]);
        assert_eq!(greedy_score(&snap, &access).unwrap(), 2.0);
        let bad = BlockMatrix::from_rows(vec![vec![0.5; 3]]);
        assert!(greedy_score(&snap, &bad).is_err());
    }

    #[test]
    fn cold_pool_picks_head() {
        let cat = catalog();
        let pool = BufferPool::new(&cat, 2).unwrap();
        let queries = worked_example(&cat);
        let access: Vec<&BlockMatrix> = queries.iter().map(|q| &q.access).collect();
        assert_eq!(greedy_next(&pool, &cat, &access).unwrap(), 0);
        assert_eq!(greedy_next(&pool, &cat, &access[2..]).unwrap(), 0);
        assert!(matches!(greedy_next(&pool, &cat, &[]), Err(Error::EmptyQueue)));
    }
}
