//! Trains on 80% of the query templates and evaluates on queries built from
//! the held-out 20%, before and after training.
//!
//! cargo run --release --example unseen_templates -- [seeds]

use std::thread;

use bufsched::harness::{run_experiment_in_memory, ExperimentConfig, SchedulerKind};

fn main() -> bufsched::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let handles: Vec<_> = (0..seeds)
        .map(|seed| {
            thread::spawn(move || {
                let mut cfg = ExperimentConfig::default().with_seed(seed);
                cfg.workload.test_template_fraction = 0.2;
                run_experiment_in_memory(&cfg)
            })
        })
        .collect();
    let mut gain = 0.0;
    for (seed, handle) in handles.into_iter().enumerate() {
        let report = handle.join().expect("worker panicked")?;
        let agent = report.run(SchedulerKind::Agent).unwrap();
        let untrained = agent.checkpoints.first().unwrap().outcome.average_hit_ratio();
        let trained = agent.outcome.average_hit_ratio();
        let fcfs = report.run(SchedulerKind::Fcfs).unwrap().outcome.average_hit_ratio();
        let greedy = report.run(SchedulerKind::Greedy).unwrap().outcome.average_hit_ratio();
        println!(
            "seed {seed}: held-out queries {}  untrained {untrained:.4} trained {trained:.4}  fcfs {fcfs:.4} greedy {greedy:.4}",
            agent.outcome.decisions.len()
        );
        gain += (trained - untrained) / seeds as f64;
    }
    println!("mean gain over untrained: {gain:.4}");
    Ok(())
}
