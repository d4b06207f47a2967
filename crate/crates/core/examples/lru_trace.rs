//! The three-query example: FCFS reads six blocks from disk, running q3
//! before q2 reads five.

use bufsched::bufferpool::{Access, BlockRef, BufferPool};
use bufsched::catalog::{Catalog, RelationKind, RelationMeta};

fn main() -> bufsched::Result<()> {
    let catalog = Catalog::new(vec![RelationMeta::new(1, "t", RelationKind::Base, 5)])?;
    let q = |blocks: &[u32]| blocks.iter().map(|&b| BlockRef::new(1, b)).collect::<Vec<_>>();
    let queries = [("q1", q(&[0, 1])), ("q2", q(&[3, 4])), ("q3", q(&[1, 2]))];

    for order in [[0, 1, 2], [0, 2, 1]] {
        let mut pool = BufferPool::new(&catalog, 2)?;
        let mut misses = 0;
        for i in order {
            let (name, reads) = &queries[i];
            let trace: Vec<String> = reads
                .iter()
                .map(|&b| {
                    let access = pool.access_block(b).expect("block in catalog");
                    misses += u32::from(access == Access::Miss);
                    format!("b{}:{:?}", b.block + 1, access)
                })
                .collect();
            let resident: Vec<String> = pool.resident().map(|b| format!("b{}", b.block + 1)).collect();
            println!("  {name} {}  pool [{}]", trace.join(" "), resident.join(" "));
        }
        println!("order {:?}: {misses} disk reads\n", order.map(|i| queries[i].0));
    }
    Ok(())
}
