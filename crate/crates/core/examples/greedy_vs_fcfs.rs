//! FCFS, greedy and the exhaustive optimum on a small generated workload.

use bufsched::harness::{oracle_report, ExperimentConfig};

fn main() -> bufsched::Result<()> {
    let mut cfg = ExperimentConfig {
        buffer_blocks: 32,
        ..ExperimentConfig::default()
    };
    cfg.workload.relation_count = 6;
    cfg.workload.min_blocks = 8;
    cfg.workload.max_blocks = 32;
    cfg.workload.template_count = 4;
    cfg.workload.max_fanout = 2;
    cfg.workload.query_count = 8;
    for seed in 0..5 {
        let report = oracle_report(&cfg.clone().with_seed(seed), 8)?;
        println!(
            "seed {seed}: fcfs {:>3}  greedy {:>3}  optimum {:>3} misses  (optimal order {:?})",
            report.fcfs.total_misses(),
            report.greedy.total_misses(),
            report.oracle.misses,
            report.oracle.order
        );
    }
    Ok(())
}
