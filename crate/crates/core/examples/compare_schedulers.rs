//! FCFS, greedy and the learned scheduler on the default synthetic workload,
//! one thread per seed.
//!
//! cargo run --release --example compare_schedulers -- [seeds]

use std::thread;

use bufsched::harness::{run_experiment_in_memory, ExperimentConfig, SchedulerKind};

fn main() -> bufsched::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let handles: Vec<_> = (0..seeds)
        .map(|seed| thread::spawn(move || run_experiment_in_memory(&ExperimentConfig::default().with_seed(seed))))
        .collect();
    let mut totals = [0.0; 3];
    for (seed, handle) in handles.into_iter().enumerate() {
        let report = handle.join().expect("worker panicked")?;
        let ratio = |kind| report.run(kind).unwrap().outcome.average_hit_ratio();
        let row = [
            ratio(SchedulerKind::Fcfs),
            ratio(SchedulerKind::Greedy),
            ratio(SchedulerKind::Agent),
        ];
        let curve: Vec<String> = report
            .run(SchedulerKind::Agent)
            .unwrap()
            .checkpoints
            .iter()
            .map(|c| format!("{:.3}", c.outcome.average_hit_ratio()))
            .collect();
        println!(
            "seed {seed}: fcfs {:.4} greedy {:.4} agent {:.4}  curve [{}]",
            row[0],
            row[1],
            row[2],
            curve.join(" ")
        );
        for (t, r) in totals.iter_mut().zip(row) {
            *t += r / seeds as f64;
        }
    }
    println!(
        "mean:   fcfs {:.4} greedy {:.4} agent {:.4}",
        totals[0], totals[1], totals[2]
    );
    Ok(())
}
