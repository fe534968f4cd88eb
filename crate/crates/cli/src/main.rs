use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use divsched::coalition::{enumerate_best_coalition, greedy_coalition, shapley_ranking, ShapleyMode};
use divsched::experiment::{load_config, run_experiment, ExperimentSpec};
use divsched::policy::PolicyKind;
use divsched::seed::{stream_rng, Stream};
use divsched::sim::{grid_search_alpha, Simulation};
use divsched::Error;

#[derive(Parser)]
#[command(name = "divsched", version, about = "Diversity-aware RSU uplink scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the policy x seed x sweep grid of an experiment file.
    Simulate(SimulateArgs),
    /// Evaluate a validation oracle on the first interval of a config.
    Oracle {
        #[arg(value_enum)]
        kind: OracleKind,
        #[command(flatten)]
        args: OracleArgs,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Restrict to these policies (repeatable or comma separated).
    #[arg(long, value_delimiter = ',')]
    policy: Vec<String>,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Include each interval's slot matrix in the per-run JSON.
    #[arg(long)]
    dump_schedule: bool,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Coalition,
    Grid,
    Shapley,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    config: PathBuf,
    /// Weights to score with: fair or nofair.
    #[arg(long, default_value = "fair")]
    weights: String,
    /// Grid steps per RSU for the grid oracle.
    #[arg(long, default_value_t = 10)]
    steps: usize,
    /// Permutations for sampled Shapley values when exact is too large.
    #[arg(long, default_value_t = 2000)]
    samples: usize,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse(_) => 2,
        _ => 1,
    }
}

fn simulate(args: SimulateArgs) -> Result<ExitCode, Error> {
    let mut spec: ExperimentSpec = load_config(&args.config)?;
    if !args.policy.is_empty() {
        spec.policies = args
            .policy
            .iter()
            .map(|p| p.parse::<PolicyKind>())
            .collect::<Result<_, _>>()?;
    }
    if let Some(seed) = args.seed {
        spec.seeds = vec![seed];
    }
    if let Some(out) = args.out {
        spec.output_dir = out;
    }
    spec.dump_schedule |= args.dump_schedule;
    spec.validate()?;

    let report = run_experiment(&spec)?;
    println!(
        "{} runs, {} failed, outputs in {}",
        report.runs,
        report.failures.len(),
        report.output_dir.display()
    );
    for (id, err) in &report.failures {
        eprintln!("run {id} failed: {err}");
    }
    Ok(if report.failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn oracle(kind: OracleKind, args: OracleArgs) -> Result<ExitCode, Error> {
    let spec = load_config(&args.config)?;
    let cfg = &spec.base;
    let weights_kind: PolicyKind = args.weights.parse()?;
    let weights = match weights_kind {
        PolicyKind::OptimizedFair => cfg.weights_fair,
        PolicyKind::OptimizedNoFair => cfg.weights_nofair,
        other => return Err(Error::config(format!("--weights must be fair or nofair, got {other}"))),
    };
    let mut sim = Simulation::new(cfg, &cfg.policy(weights_kind))?;
    let snapshot = sim.snapshot()?;
    let out = match kind {
        OracleKind::Coalition => {
            let exact = enumerate_best_coalition(&snapshot, cfg.coalition_size, &weights, &cfg.limits)?;
            let greedy = greedy_coalition(&snapshot, cfg.coalition_size, &weights, &cfg.limits)?;
            json!({ "exact": exact, "greedy": greedy })
        }
        OracleKind::Grid => {
            let (alpha, value) = grid_search_alpha(&snapshot, args.steps, &weights)?;
            json!({ "alpha": alpha.0, "value": value })
        }
        OracleKind::Shapley => {
            let mode = if cfg.rsus <= cfg.limits.exact_shapley_limit {
                ShapleyMode::Exact
            } else {
                ShapleyMode::Sampled { samples: args.samples }
            };
            let mut rng = stream_rng(cfg.seed, Stream::Policy);
            let result = shapley_ranking(&snapshot, &weights, mode, &cfg.limits, &mut rng)?;
            json!({ "mode": result.mode, "values": result.values, "ranking": result.ranking() })
        }
    };
    let snap = json!({
        "drop_rates": snapshot.channel.drop_rates,
        "delay_rates": snapshot.channel.delay_rates,
    });
    let mut out = out;
    out["channel"] = snap;
    println!("{}", serde_json::to_string_pretty(&out).expect("json values serialize"));
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Oracle { kind, args } => oracle(kind, args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
