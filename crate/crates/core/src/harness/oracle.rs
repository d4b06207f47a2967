use itertools::Itertools;

use crate::bufferpool::BufferPool;
use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::queue::PreparedQuery;

/// Largest queue the exhaustive search accepts (9! orders).
pub const MAX_ORACLE_QUERIES: usize = 9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    /// Positions in the input queue.
    pub order: Vec<usize>,
    pub misses: u64,
}

/// Minimum total misses over every execution order, each simulated on a
/// fresh pool. Among optimal orders the lexicographically smallest wins.
pub fn brute_force_oracle(capacity: usize, queries: &[PreparedQuery], catalog: &Catalog) -> Result<OracleResult> {
    if queries.is_empty() {
        return Err(Error::EmptyQueue);
    }
    if queries.len() > MAX_ORACLE_QUERIES {
        return Err(Error::QueueTooLarge {
            len: queries.len(),
            limit: MAX_ORACLE_QUERIES,
        });
    }
    let mut pool = BufferPool::new(catalog, capacity)?;
    let mut best: Option<OracleResult> = None;
    // itertools yields permutations of a sorted input in lexicographic order
    for order in (0..queries.len()).permutations(queries.len()) {
        pool.clear();
        let mut misses = 0;
        for &i in &order {
            misses += pool.execute_query(&queries[i].reads)?.misses;
            if best.as_ref().is_some_and(|b| misses >= b.misses) {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| misses < b.misses) {
            best = Some(OracleResult { order, misses });
        }
    }
    Ok(best.expect("at least one permutation"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bufferpool::BlockRef;
    use crate::catalog::{RelationKind, RelationMeta};

    fn catalog() -> Catalog {
        Catalog::new(vec![RelationMeta::new(1, "t", RelationKind::Base, 5)]).unwrap()
    }

    fn query(cat: &Catalog, id: u64, blocks: &[u32]) -> PreparedQuery {
        PreparedQuery::from_reads(id, blocks.iter().map(|&b| BlockRef::new(1, b)).collect(), cat).unwrap()
    }

    #[test]
    fn worked_example_optimum() {
        let cat = catalog();
        let queries = vec![
            query(&cat, 1, &[0, 1]),
            query(&cat, 2, &[3, 4]),
            query(&cat, 3, &[1, 2]),
        ];
        let best = brute_force_oracle(2, &queries, &cat).unwrap();
        assert_eq!(best.misses, 5);
        assert_eq!(best.order, vec![0, 2, 1]);
    }

    #[test]
    fn single_query_is_cold() {
        let cat = catalog();
        let best = brute_force_oracle(2, &[query(&cat, 1, &[0, 1, 2])], &cat).unwrap();
        assert_eq!(
            best,
            OracleResult {
                order: vec![0],
                misses: 3
            }
        );
    }

    #[test]
    fn guards_queue_size() {
        let cat = catalog();
        let queries: Vec<_> = (0..10).map(|i| query(&cat, i, &[0])).collect();
        assert!(matches!(
            brute_force_oracle(2, &queries, &cat),
            Err(Error::QueueTooLarge { len: 10, .. })
        ));
        assert!(matches!(brute_force_oracle(2, &[], &cat), Err(Error::EmptyQueue)));
    }
}
