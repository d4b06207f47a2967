//! Buffer bitmap and query vector encodings, downsized to a fixed width.

use bufsched::agent::{encode_action, encode_state};
use bufsched::bufferpool::{BlockRef, BufferPool};
use bufsched::catalog::{Catalog, RelationKind, RelationMeta};
use bufsched::encoding::downsample;
use bufsched::queue::PreparedQuery;

fn main() -> bufsched::Result<()> {
    println!("{:?}", downsample(&[1.0, 0.0, 1.0], 2)?);
    println!("{:?}", downsample(&[1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0], 3)?);

    let catalog = Catalog::new(vec![
        RelationMeta::new(1, "orders", RelationKind::Base, 12),
        RelationMeta::new(2, "orders_idx", RelationKind::Index, 4),
    ])?;
    let mut pool = BufferPool::new(&catalog, 6)?;
    let reads: Vec<BlockRef> = [0, 1, 2, 3, 8].iter().map(|&b| BlockRef::new(1, b)).collect();
    pool.execute_query(&reads)?;
    pool.access_block(BlockRef::new(2, 0))?;

    let width = 4;
    let state = encode_state(&pool, &catalog, width)?;
    let query = PreparedQuery::from_reads(7, vec![BlockRef::new(1, 9), BlockRef::new(1, 10)], &catalog)?;
    let action = encode_action(&query, width)?;
    for (name, features) in [("state", &state), ("action", &action)] {
        for (r, row) in features.chunks(width).enumerate() {
            println!("{name:>6} {:>10}: {row:?}", catalog.relations()[r].name);
        }
    }
    Ok(())
}
