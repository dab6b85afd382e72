//! Command-line entry point: `run`, `sweep` and `audit`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fhsdn::cli::{audit, parse_config, run_plan, ExperimentPlan, Sweep};
use fhsdn::sim::Mode;

#[derive(Parser)]
#[command(name = "fhsdn", version, about = "Fronthaul-aware SDN controller simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Runs the base scenario for every configured seed.
    Run(Common),
    /// Runs every point of the configured sweep for every seed.
    Sweep(Common),
    /// Checks the statistics controller's strategy for ε-CCE and prints ε.
    Audit(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file (`key = value` lines).
    config: PathBuf,
    /// Overrides the configured seeds with a single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides the controller mode (statistics, realization, non-sdn).
    #[arg(long)]
    mode: Option<Mode>,
}

impl Common {
    fn plan(&self) -> fhsdn::Result<ExperimentPlan> {
        let text = std::fs::read_to_string(&self.config).map_err(|e| fhsdn::Error::File {
            path: self.config.clone(),
            source: Box::new(e.into()),
        })?;
        let mut plan = parse_config(&text)?;
        if let Some(seed) = self.seed {
            plan.seeds = vec![seed];
        }
        if let Some(dir) = &self.out_dir {
            plan.out_dir = dir.clone();
        }
        if let Some(mode) = self.mode {
            plan.base.mode = mode;
        }
        Ok(plan)
    }
}

fn execute(plan: &ExperimentPlan) -> fhsdn::Result<bool> {
    let report = run_plan(plan)?;
    for path in &report.files {
        println!("{}", path.display());
    }
    for (point, seed, err) in &report.failures {
        eprintln!("failed: {point} seed {seed}: {err}");
    }
    Ok(report.succeeded())
}

fn main_inner(cli: Cli) -> fhsdn::Result<bool> {
    match cli.command {
        Command::Run(c) => {
            let mut plan = c.plan()?;
            plan.sweep = Sweep::None;
            execute(&plan)
        }
        Command::Sweep(c) => {
            let plan = c.plan()?;
            if plan.sweep == Sweep::None {
                return Err(fhsdn::Error::Config("the configuration defines no sweep".into()));
            }
            execute(&plan)
        }
        Command::Audit(c) => {
            let plan = c.plan()?;
            let mut scenario = plan.base.clone();
            scenario.seed = plan.seeds[0];
            let report = audit(&scenario)?;
            println!("epsilon = {:e}", report.epsilon);
            for (b, gap) in report.per_bs_gap.iter().enumerate() {
                println!("bs {b}: gap = {gap:e}");
            }
            println!(
                "auxiliary utility, eps 1e-6: {} (worst violation {:e})",
                if report.auxiliary.pass { "pass" } else { "fail" },
                report.auxiliary.worst_violation
            );
            println!(
                "expected utility, eps {:e}: {} (worst violation {:e})",
                report.epsilon + 1e-6,
                if report.expected.pass { "pass" } else { "fail" },
                report.expected.worst_violation
            );
            Ok(report.auxiliary.pass && report.expected.pass)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match main_inner(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
