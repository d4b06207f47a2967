//! Trains the scheduler on a reduced workload, saves a checkpoint, restores
//! it and checks the restored agent schedules identically.

use bufsched::agent::DqnAgent;
use bufsched::bufferpool::BufferPool;
use bufsched::harness::{prepare_workload, run_baseline, train_agent, ExperimentConfig, SchedulerKind};

fn main() -> bufsched::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.workload.query_count = 120;
    cfg.epochs = 3;
    cfg.checkpoint_every = 60;
    let prepared = prepare_workload(&cfg)?;
    let catalog = prepared.catalog();

    let (agent, curve) = train_agent(&cfg, catalog, &prepared.train, &prepared.eval)?;
    for point in &curve {
        println!(
            "after {:>3} decisions: hit ratio {:.4}",
            point.checkpoint,
            point.outcome.average_hit_ratio()
        );
    }
    for kind in [SchedulerKind::Fcfs, SchedulerKind::Greedy] {
        let outcome = run_baseline(kind, catalog, cfg.buffer_blocks, &prepared.eval)?;
        println!("{kind:>6}: hit ratio {:.4}", outcome.average_hit_ratio());
    }

    let dir = std::env::temp_dir().join("bufsched-train-agent");
    std::fs::create_dir_all(&dir).map_err(|e| bufsched::Error::Config(e.to_string()))?;
    let path = dir.join("agent.json");
    agent.save(&path)?;
    let restored = DqnAgent::load(&path)?;
    let run = |a: &DqnAgent| {
        a.evaluate(
            &mut BufferPool::new(catalog, cfg.buffer_blocks)?,
            catalog,
            &prepared.eval,
        )
    };
    assert_eq!(run(&agent)?.order(), run(&restored)?.order());
    println!("checkpoint {} restores to an identical schedule", path.display());
    Ok(())
}
