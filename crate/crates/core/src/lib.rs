//! Buffer-pool-aware query scheduling.
//!
//! A strict-LRU block buffer pool is simulated exactly. Queries are turned
//! into per-relation block access bitmaps, downsampled to fixed-width
//! features and scored by a Q-network that picks which queued query to run
//! next. FCFS and a greedy overlap scheduler serve as baselines, and an
//! exhaustive search gives the optimum for small queues.
//!
//! ```
//! use bufsched::bufferpool::{BlockRef, BufferPool};
//! use bufsched::catalog::{Catalog, RelationKind, RelationMeta};
//!
//! let catalog = Catalog::new(vec![RelationMeta::new(1, "t", RelationKind::Base, 5)]).unwrap();
//! let mut pool = BufferPool::new(&catalog, 2).unwrap();
//! let reads = [BlockRef::new(1, 0), BlockRef::new(1, 1), BlockRef::new(1, 0)];
//! let stats = pool.execute_query(&reads).unwrap();
//! assert_eq!((stats.hits, stats.misses), (1, 2));
//! ```

pub mod agent;
pub mod baselines;
pub mod bufferpool;
pub mod catalog;
pub mod encoding;
pub mod error;
pub mod harness;
pub mod neuralnet;
pub mod queue;
pub mod workload;

pub use error::{Error, Result};
