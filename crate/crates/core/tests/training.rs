use bufsched::agent::{AgentConfig, DqnAgent, Mode};
use bufsched::bufferpool::BufferPool;
use bufsched::harness::{prepare_workload, ExperimentConfig};
use bufsched::neuralnet::{train_batch, Adam, Mlp};

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        width: 8,
        ..ExperimentConfig::default()
    };
    cfg.workload.query_count = 30;
    cfg.workload.template_count = 6;
    cfg
}

#[test]
fn identical_networks_train_identically() {
    let batches: Vec<Vec<(Vec<f64>, f64)>> = (0..20)
        .map(|b| {
            (0..8)
                .map(|i| (vec![(b * i) as f64 % 3.0, 1.0, 0.0, (i % 2) as f64], i as f64 / 8.0))
                .collect()
        })
        .collect();
    let run = || {
        let mut net = Mlp::new(&[4, 16, 16, 1], 9).unwrap();
        let mut adam = Adam::new(&net, 1e-3);
        for batch in &batches {
            train_batch(&mut net, &mut adam, batch).unwrap();
        }
        net
    };
    assert_eq!(run(), run());
}

#[test]
fn identical_agents_learn_identically() {
    let cfg = small().resolved();
    let prepared = prepare_workload(&cfg).unwrap();
    let catalog = prepared.catalog();
    let agent_cfg = AgentConfig {
        min_replay_before_training: 8,
        target_sync_period: 10,
        ..cfg.agent.clone()
    };
    let train = || {
        let mut agent = DqnAgent::new(agent_cfg.clone(), catalog.len(), cfg.width).unwrap();
        for _ in 0..2 {
            let mut pool = BufferPool::new(catalog, cfg.buffer_blocks).unwrap();
            agent
                .schedule_queue(&mut pool, catalog, &prepared.train, Mode::Train)
                .unwrap();
        }
        agent
    };
    let (a, b) = (train(), train());
    assert_eq!(a.network(), b.network());
    assert_eq!(a.target_network(), b.target_network());
    assert!(a.optimizer().step_count() > 0);
}

#[test]
fn ablations_still_schedule_every_query() {
    let cfg = small().resolved();
    let prepared = prepare_workload(&cfg).unwrap();
    let catalog = prepared.catalog();
    for (use_replay, use_target_network) in [(false, false), (false, true), (true, false)] {
        let agent_cfg = AgentConfig {
            use_replay,
            use_target_network,
            min_replay_before_training: 1,
            batch_size: 1,
            ..cfg.agent.clone()
        };
        let mut agent = DqnAgent::new(agent_cfg, catalog.len(), cfg.width).unwrap();
        let mut pool = BufferPool::new(catalog, cfg.buffer_blocks).unwrap();
        let outcome = agent
            .schedule_queue(&mut pool, catalog, &prepared.train, Mode::Train)
            .unwrap();
        assert!(outcome.is_permutation_of(prepared.train.len()));
        assert!(agent.network().is_finite());
    }
}
