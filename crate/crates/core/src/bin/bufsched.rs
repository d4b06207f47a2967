use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bufsched::agent::DqnAgent;
use bufsched::harness::{
    evaluate_agent, oracle_report, run_experiment, ExperimentConfig, ExperimentReport, SchedulerKind,
};
use bufsched::workload::generate_workload;
use bufsched::Result;

#[derive(Parser)]
#[command(version, about = "Buffer-aware query scheduling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; omitted fields keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train the agent, writing checkpoint metrics and agent.json.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint_every: Option<u64>,
    },
    /// Evaluate a saved agent next to the baselines.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Agent checkpoint written by `train`.
        #[arg(long)]
        agent: PathBuf,
        /// Comma separated, e.g. `fcfs,greedy,agent`.
        #[arg(long, value_delimiter = ',')]
        schedulers: Vec<SchedulerKind>,
    },
    /// Train the agent and compare it with the baselines on one workload.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint_every: Option<u64>,
        /// Comma separated, e.g. `fcfs,greedy,agent`.
        #[arg(long, value_delimiter = ',')]
        schedulers: Vec<SchedulerKind>,
    },
    /// Exhaustive optimum for the first few evaluation queries.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 7)]
        queries: usize,
    },
    /// Export the generated catalog, templates and plan files.
    GenWorkload {
        #[command(flatten)]
        common: Common,
    },
}

fn print_summary(report: &ExperimentReport) {
    for run in &report.runs {
        println!(
            "{:<7} avg_hit_ratio {:.6}  total_misses {}",
            run.scheduler,
            run.outcome.average_hit_ratio(),
            run.outcome.total_misses()
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            common,
            checkpoint_every,
        } => {
            let mut cfg = common.load()?;
            cfg.schedulers = vec![SchedulerKind::Agent];
            if let Some(k) = checkpoint_every {
                cfg.checkpoint_every = k;
            }
            let report = run_experiment(&cfg)?;
            let path = cfg.out_dir.join("agent.json");
            report.agent.as_ref().expect("agent was scheduled").save(&path)?;
            print_summary(&report);
            println!("saved {}", path.display());
        }
        Command::Evaluate {
            common,
            agent,
            schedulers,
        } => {
            let mut cfg = common.load()?;
            if !schedulers.is_empty() {
                cfg.schedulers = schedulers;
            }
            let report = evaluate_agent(&cfg, &DqnAgent::load(&agent)?)?;
            report.write(&cfg.out_dir)?;
            print_summary(&report);
        }
        Command::Compare {
            common,
            checkpoint_every,
            schedulers,
        } => {
            let mut cfg = common.load()?;
            if let Some(k) = checkpoint_every {
                cfg.checkpoint_every = k;
            }
            if !schedulers.is_empty() {
                cfg.schedulers = schedulers;
            }
            print_summary(&run_experiment(&cfg)?);
        }
        Command::Oracle { common, queries } => {
            let report = oracle_report(&common.load()?, queries)?;
            println!(
                "oracle  misses {:>6}  order {:?}",
                report.oracle.misses, report.oracle.order
            );
            println!(
                "greedy  misses {:>6}  order {:?}",
                report.greedy.total_misses(),
                report.greedy.order()
            );
            println!(
                "fcfs    misses {:>6}  order {:?}",
                report.fcfs.total_misses(),
                report.fcfs.order()
            );
        }
        Command::GenWorkload { common } => {
            let cfg = common.load()?.resolved();
            let workload = generate_workload(&cfg.workload)?;
            workload.export(&cfg.out_dir)?;
            println!(
                "{} relations, {} templates, {} plans written to {}",
                workload.catalog.len(),
                workload.templates.len(),
                workload.plans.len(),
                cfg.out_dir.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
