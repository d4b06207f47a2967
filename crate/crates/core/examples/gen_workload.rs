//! Generates the default synthetic workload, prints per-template read
//! footprints and exports catalog and plan files.
//!
//! cargo run --example gen_workload -- [out_dir]

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bufsched::harness::ExperimentConfig;
use bufsched::queue::PreparedQuery;
use bufsched::workload::generate_workload;

fn main() -> bufsched::Result<()> {
    let cfg = ExperimentConfig::default();
    let workload = generate_workload(&cfg.workload)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut footprints: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for spec in &workload.queries {
        let q = PreparedQuery::from_spec(spec, &workload.catalog, cfg.read_mode, &mut rng)?;
        footprints.entry(q.template_id).or_default().push(q.reads.len());
    }
    println!(
        "{} relations, {} blocks in total",
        workload.catalog.len(),
        workload.catalog.total_blocks()
    );
    for rel in workload.catalog.relations() {
        println!("  {:>12} {:?} {} blocks", rel.name, rel.kind, rel.block_count);
    }
    println!(
        "reads per query by template (buffer holds {} blocks):",
        cfg.buffer_blocks
    );
    for (template, sizes) in &footprints {
        let mean = sizes.iter().sum::<usize>() as f64 / sizes.len() as f64;
        println!(
            "  template {template:>2}: {:>3} queries, mean {mean:>6.1} reads",
            sizes.len()
        );
    }
    if let Some(dir) = std::env::args().nth(1) {
        workload.export(dir.as_ref())?;
        println!("exported to {dir}");
    }
    Ok(())
}
