use std::collections::VecDeque;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bufsched::baselines::{greedy_score, run_fcfs, run_greedy};
use bufsched::bufferpool::{Access, BlockRef, BufferPool};
use bufsched::catalog::{
    parse_plan, AccessDescriptor, BlockMatrix, Catalog, PlanDocument, PlanNode, RelationKind, RelationMeta,
};
use bufsched::encoding::downsample;
use bufsched::harness::brute_force_oracle;
use bufsched::queue::PreparedQuery;
use bufsched::workload::{generate_workload, materialize_reads, plan_selectivities, ReadMode, WorkloadSpec};

/// Independent LRU: a deque ordered from most to least recently used.
fn reference_lru(capacity: usize, trace: &[BlockRef]) -> Vec<bool> {
    let mut order: VecDeque<BlockRef> = VecDeque::new();
    trace
        .iter()
        .map(|&b| {
            let hit = match order.iter().position(|&x| x == b) {
                Some(i) => {
                    order.remove(i);
                    true
                }
                None => {
                    if order.len() == capacity {
                        order.pop_back();
                    }
                    false
                }
            };
            order.push_front(b);
            hit
        })
        .collect()
}

fn catalog(sizes: &[usize]) -> Catalog {
    Catalog::new(
        sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| RelationMeta::new(i as u32 + 1, format!("r{i}"), RelationKind::Base, n))
            .collect(),
    )
    .unwrap()
}

fn trace_strategy() -> impl Strategy<Value = (Vec<usize>, usize, Vec<(u32, u32)>)> {
    (prop::collection::vec(1usize..12, 1..4), 1usize..10).prop_flat_map(|(sizes, capacity)| {
        let picks = sizes.len() as u32;
        let trace = prop::collection::vec((0..picks, 0u32..12), 0..120);
        (Just(sizes), Just(capacity), trace)
    })
}

fn to_blocks(sizes: &[usize], raw: &[(u32, u32)]) -> Vec<BlockRef> {
    raw.iter()
        .map(|&(r, b)| BlockRef::new(r + 1, b % sizes[r as usize] as u32))
        .collect()
}

proptest! {
    #[test]
    fn pool_never_exceeds_capacity((sizes, capacity, raw) in trace_strategy()) {
        let cat = catalog(&sizes);
        let mut pool = BufferPool::new(&cat, capacity).unwrap();
        for b in to_blocks(&sizes, &raw) {
            pool.access_block(b).unwrap();
            prop_assert!(pool.len() <= capacity);
        }
    }

    #[test]
    fn lru_matches_reference((sizes, capacity, raw) in trace_strategy()) {
        let cat = catalog(&sizes);
        let trace = to_blocks(&sizes, &raw);
        let mut pool = BufferPool::new(&cat, capacity).unwrap();
        let got: Vec<bool> = trace.iter().map(|&b| pool.access_block(b).unwrap() == Access::Hit).collect();
        prop_assert_eq!(got, reference_lru(capacity, &trace));
    }

    #[test]
    fn snapshot_counts_resident_blocks((sizes, capacity, raw) in trace_strategy()) {
        let cat = catalog(&sizes);
        let mut pool = BufferPool::new(&cat, capacity).unwrap();
        pool.execute_query(&to_blocks(&sizes, &raw)).unwrap();
        let snapshot = pool.snapshot(&cat).unwrap();
        prop_assert_eq!(snapshot.count_nonzero(), pool.len());
        for b in pool.resident() {
            let row = cat.row_of(b.relation).unwrap();
            prop_assert_eq!(snapshot.row(row)[b.block as usize], 1.0);
        }
    }

    #[test]
    fn downsample_preserves_mean_and_range(row in prop::collection::vec(0.0f64..=1.0, 1..200), width in 1usize..40) {
        let out = downsample(&row, width).unwrap();
        prop_assert_eq!(out.len(), width);
        prop_assert!(out.iter().all(|&v| (0.0..=1.0).contains(&v)));
        if row.len() % width == 0 {
            let mean_in = row.iter().sum::<f64>() / row.len() as f64;
            let mean_out = out.iter().sum::<f64>() / width as f64;
            prop_assert!((mean_in - mean_out).abs() <= 1e-12);
        }
    }

    #[test]
    fn downsample_is_monotone(
        pairs in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..120),
        width in 1usize..30,
    ) {
        let lo: Vec<f64> = pairs.iter().map(|&(a, b)| a.min(b)).collect();
        let hi: Vec<f64> = pairs.iter().map(|&(a, b)| a.max(b)).collect();
        let (lo, hi) = (downsample(&lo, width).unwrap(), downsample(&hi, width).unwrap());
        prop_assert!(lo.iter().zip(&hi).all(|(a, b)| a <= b));
    }

    #[test]
    fn union_is_commutative_and_bounded(p in 0.0f64..=1.0, q in 0.0f64..=1.0) {
        let a = AccessDescriptor::Selective { selectivity: p };
        let b = AccessDescriptor::Selective { selectivity: q };
        prop_assert_eq!(a.union(b), b.union(a));
        let u = a.union(b).probability();
        prop_assert!(u >= p.max(q) - 1e-15 && u <= 1.0);
        prop_assert_eq!(a.union(AccessDescriptor::None), a);
        prop_assert_eq!(a.union(AccessDescriptor::FullScan), AccessDescriptor::FullScan);
    }

    #[test]
    fn greedy_score_matches_double_loop(
        cells in prop::collection::vec((any::<bool>(), 0.0f64..=1.0), 1..60),
        split in 1usize..5,
    ) {
        let rows = |f: &dyn Fn(&(bool, f64)) -> f64| -> Vec<Vec<f64>> {
            cells.chunks(split).map(|c| c.iter().map(f).collect()).collect()
        };
        let snapshot = BlockMatrix::from_rows(rows(&|c| if c.0 { 1.0 } else { 0.0 }));
        let access = BlockMatrix::from_rows(rows(&|c| c.1));
        let mut expected = 0.0;
        for i in 0..snapshot.row_count() {
            for j in 0..snapshot.row(i).len() {
                expected += snapshot.row(i)[j] * access.row(i)[j];
            }
        }
        let score = greedy_score(&snapshot, &access).unwrap();
        prop_assert!((score - expected).abs() <= 1e-9);
        // linear in the access matrix
        let doubled = BlockMatrix::from_rows(access.rows().iter().map(|r| r.iter().map(|v| 2.0 * v).collect()).collect());
        prop_assert!((greedy_score(&snapshot, &doubled).unwrap() - 2.0 * score).abs() <= 1e-9);
    }

    #[test]
    fn schedules_are_permutations(seed in 0u64..1000, n in 1usize..12, capacity in 1usize..20) {
        let cat = catalog(&[8, 5, 10]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let queue: Vec<PreparedQuery> = (0..n)
            .map(|i| {
                let reads = (1..=3u32)
                    .flat_map(|r| {
                        let size = cat.block_count(r).unwrap() as u32;
                        let p = rand::Rng::random::<f64>(&mut rng);
                        (0..size).filter(move |b| bufsched::workload::block_threshold(r + seed as u32, *b) < p)
                            .map(move |b| BlockRef::new(r, b))
                    })
                    .collect();
                PreparedQuery::from_reads(i as u64, reads, &cat).unwrap()
            })
            .collect();
        let fcfs = run_fcfs(&mut BufferPool::new(&cat, capacity).unwrap(), &queue).unwrap();
        let greedy = run_greedy(&mut BufferPool::new(&cat, capacity).unwrap(), &cat, &queue).unwrap();
        prop_assert!(fcfs.is_permutation_of(n));
        prop_assert!(greedy.is_permutation_of(n));
        prop_assert_eq!(fcfs.order(), (0..n).collect::<Vec<_>>());
        prop_assert!(fcfs.rewards().iter().chain(&greedy.rewards()).all(|r| (0.0..=1.0).contains(r)));
        if n <= 6 {
            let best = brute_force_oracle(capacity, &queue, &cat).unwrap();
            prop_assert!(best.misses <= fcfs.total_misses());
            prop_assert!(best.misses <= greedy.total_misses());
        }
    }
}

fn small_spec() -> impl Strategy<Value = WorkloadSpec> {
    (
        0u64..10_000,
        3usize..10,
        1usize..20,
        0.0f64..0.5,
        0.5f64..1.0,
        0.0f64..0.4,
    )
        .prop_map(|(seed, relations, templates, lo, hi, test)| WorkloadSpec {
            relation_count: relations,
            min_blocks: 4,
            max_blocks: 40,
            template_count: templates.max(2),
            max_fanout: 2,
            min_selectivity: lo,
            max_selectivity: hi,
            query_count: 30,
            test_template_fraction: test,
            seed,
            ..WorkloadSpec::default()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn instantiated_selectivities_stay_in_template_ranges(spec in small_spec()) {
        let w = generate_workload(&spec).unwrap();
        prop_assert_eq!(w.queries.len(), spec.query_count);
        prop_assert!(w.split.train.is_disjoint(&w.split.test));
        for plan in &w.plans {
            let template = &w.templates[plan.template_id as usize];
            let ranges = template.selectivity_ranges();
            let values = plan_selectivities(&plan.root);
            prop_assert_eq!(ranges.len(), values.len());
            for ((lo, hi), v) in ranges.into_iter().zip(values) {
                prop_assert!(lo <= v && v <= hi);
            }
        }
    }

    #[test]
    fn parse_plan_is_deterministic(spec in small_spec()) {
        let w = generate_workload(&spec).unwrap();
        for plan in &w.plans {
            let round_tripped = PlanDocument::from_json(&plan.to_json().unwrap()).unwrap();
            prop_assert_eq!(parse_plan(plan, &w.catalog).unwrap(), parse_plan(&round_tripped, &w.catalog).unwrap());
        }
    }

    #[test]
    fn reads_are_sorted_and_unique(spec in small_spec(), sampled in any::<bool>()) {
        let w = generate_workload(&spec).unwrap();
        let mode = if sampled { ReadMode::Sampled } else { ReadMode::Deterministic };
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for q in &w.queries {
            let reads = materialize_reads(q, &w.catalog, mode, &mut rng).unwrap();
            let rows: Vec<usize> = reads.iter().map(|b| w.catalog.row_of(b.relation).unwrap()).collect();
            for (pair, rows) in reads.windows(2).zip(rows.windows(2)) {
                prop_assert!(rows[0] < rows[1] || (rows[0] == rows[1] && pair[0].block < pair[1].block));
            }
        }
    }
}

#[test]
fn nested_loop_inner_side_scales() {
    let cat = Catalog::new(vec![
        RelationMeta::new(1, "a", RelationKind::Base, 10),
        RelationMeta::new(2, "b", RelationKind::Base, 10),
        RelationMeta::new(3, "b_idx", RelationKind::Index, 4),
    ])
    .unwrap();
    let plan = PlanDocument {
        query_id: 0,
        template_id: 0,
        root: PlanNode::nested_loop(
            PlanNode::SeqScan { relation: 1 },
            PlanNode::IndexScan {
                relation: 2,
                index: 3,
                selectivity: 0.3,
            },
            3,
        ),
    };
    let spec = parse_plan(&plan, &cat).unwrap();
    assert_eq!(spec.access(1), AccessDescriptor::FullScan);
    assert!((spec.access(2).probability() - 0.9).abs() < 1e-12);
    assert!((spec.access(3).probability() - 0.9).abs() < 1e-12);
}
