//! `reflow` — run, plan and inspect reuse-aware workflow iterations.

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reflow_core::change::{self, ChangeSet, Signature};
use reflow_core::dag::{slice_to_outputs, NodeId};
use reflow_core::engine::{
    self, EngineConfig, Executor, IterationRecord, ProcessExecutor, Scenario, SessionConfig,
    SimulatedExecutor,
};
use reflow_core::omp::{MatOutcome, MatPolicy};
use reflow_core::store::MaterializationCatalog;
use reflow_core::workflow::Workflow;
use reflow_core::{oep, oracle, psp, report, synth};
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "reflow",
    version,
    about = "Reuse-aware runner for iterative workflow DAGs",
    long_about = "Plans each workflow iteration as a load/compute/prune assignment that \
provably minimizes running time given what is already stored, and decides which fresh \
results to keep for the next iteration within a storage budget."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Show the optimal plan for a workflow against the current store.
    Plan(PlanArgs),
    /// Run one iteration: plan, execute, materialize, record.
    Run(RunArgs),
    /// Run a whole session of random single-node modifications.
    Simulate(SimulateArgs),
    /// Explain which nodes changed between two workflow files and why.
    Diff(DiffArgs),
    /// Check the planner against exhaustive search on random instances.
    Verify(VerifyArgs),
    /// Rebuild the session report from a store.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    /// Keep a result when recomputing costs more than twice a reload.
    Opt,
    /// Keep everything that fits the budget.
    Am,
    /// Keep nothing.
    Nm,
}

impl From<PolicyArg> for MatPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Opt => MatPolicy::StreamingHeuristic,
            PolicyArg::Am => MatPolicy::AlwaysMaterialize,
            PolicyArg::Nm => MatPolicy::NeverMaterialize,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ExecutorArg {
    /// Replay declared times and sizes without running anything.
    Sim,
    /// Run each node's shell command and measure it.
    Process,
}

const DEFAULT_BUDGET: u64 = 10 * (1 << 30); // 10 GiB

#[derive(Args)]
struct PlanArgs {
    /// Workflow description file.
    workflow: PathBuf,
    #[arg(long, default_value = "store")]
    store: PathBuf,
    /// Also print the project-selection instance behind the plan.
    #[arg(long)]
    emit_psp: bool,
}

#[derive(Args)]
struct RunArgs {
    workflow: PathBuf,
    #[arg(long, default_value = "store")]
    store: PathBuf,
    /// Storage budget in bytes.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    #[arg(long, value_enum, default_value_t = PolicyArg::Opt)]
    policy: PolicyArg,
    #[arg(long, value_enum, default_value_t = ExecutorArg::Sim)]
    executor: ExecutorArg,
}

#[derive(Args)]
struct SimulateArgs {
    workflow: PathBuf,
    #[arg(long, default_value = "store")]
    store: PathBuf,
    /// Total iterations, including the initial run.
    #[arg(long, default_value_t = 10)]
    iters: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative weights of the three modification kinds, as "dpr,li,ppr".
    #[arg(long, default_value = "1,1,1", value_parser = parse_weights)]
    weights: Scenario,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    #[arg(long, value_enum, default_value_t = PolicyArg::Opt)]
    policy: PolicyArg,
    #[arg(long, value_enum, default_value_t = ExecutorArg::Sim)]
    executor: ExecutorArg,
}

#[derive(Args)]
struct DiffArgs {
    /// Earlier workflow version.
    prev: PathBuf,
    /// Later workflow version.
    next: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Number of random instances to check.
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Upper bound on nodes per instance (exhaustive search caps at 16).
    #[arg(long, default_value_t = 10)]
    max_nodes: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, default_value = "store")]
    store: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    format: ReportFormat,
}

fn parse_weights(text: &str) -> Result<Scenario, String> {
    let parts: Vec<&str> = text.split(',').collect();
    let [dpr, li, ppr] = parts.as_slice() else {
        return Err(format!("expected three comma-separated weights, got {text:?}"));
    };
    let parse = |s: &str| s.trim().parse::<u32>().map_err(|e| format!("bad weight {s:?}: {e}"));
    Ok(Scenario { dpr: parse(dpr)?, li: parse(li)?, ppr: parse(ppr)? })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Plan(args) => cmd_plan(args),
        Command::Run(args) => cmd_run(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Diff(args) => cmd_diff(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Report(args) => cmd_report(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

/// Change detection for read-only commands: diff the sliced graph against
/// the signatures recorded by the store's most recent iteration, or treat
/// everything as new if the store has no history.
fn change_against_history(
    store: &MaterializationCatalog,
    sliced: &reflow_core::dag::WorkflowDag,
) -> reflow_core::Result<ChangeSet> {
    let history = store.history_iterations()?;
    let prev_sigs: BTreeSet<Signature> = match history.last() {
        None => BTreeSet::new(),
        Some(&t) => {
            let record: IterationRecord = store.get_history(t)?;
            record.signatures.into_values().collect()
        }
    };
    change::diff_against(&prev_sigs, sliced)
}

fn cmd_plan(args: PlanArgs) -> reflow_core::Result<ExitCode> {
    let workflow = Workflow::from_path(&args.workflow)?;
    let store = MaterializationCatalog::open(&args.store)?;
    let sliced = slice_to_outputs(&workflow.dag)?;
    let sliced_workflow =
        Workflow::new(sliced.clone(), workflow.disk_read_bytes_per_ms, workflow.profiles.clone());
    let change = change_against_history(&store, &sliced)?;
    let metrics = change::resolve_load_times(&sliced_workflow, &change, &store)?;
    let plan = oep::optimal_plan(&sliced, &metrics, &change)?;

    println!("plan for {} ({} nodes in slice):", args.workflow.display(), sliced.len());
    for (id, state) in &plan.states {
        let m = &metrics[id];
        let load = match m.load_ms.finite() {
            Some(ms) => format!("{ms} ms"),
            None => "-".to_owned(),
        };
        let tag = if change.is_original(id) { "  [changed]" } else { "" };
        println!(
            "  {:<20} {:<8} compute {} ms, load {}{}",
            id.as_str(),
            format!("{state:?}").to_lowercase(),
            m.compute_ms,
            load,
            tag
        );
    }
    println!("predicted cost: {} ms", plan.cost_ms);

    if args.emit_psp {
        let instance = oep::reduce_to_psp(&sliced, &metrics, &change)?;
        println!();
        print!("{}", psp::render(&instance));
    }
    Ok(ExitCode::SUCCESS)
}

fn with_executor<T>(
    kind: ExecutorArg,
    store_root: &std::path::Path,
    f: impl FnOnce(&mut dyn Executor) -> reflow_core::Result<T>,
) -> reflow_core::Result<T> {
    match kind {
        ExecutorArg::Sim => f(&mut SimulatedExecutor),
        ExecutorArg::Process => {
            let mut exec = ProcessExecutor::new(store_root.join("work"))?;
            f(&mut exec)
        }
    }
}

fn cmd_run(args: RunArgs) -> reflow_core::Result<ExitCode> {
    let workflow = Workflow::from_path(&args.workflow)?;
    let mut store = MaterializationCatalog::open(&args.store)?;
    let config = EngineConfig { budget_bytes: args.budget, policy: args.policy.into() };
    let record = with_executor(args.executor, &args.store, |exec| {
        engine::run_iteration(&mut store, &workflow, &config, exec, "manual", None)
    })?;
    print_record(&record);
    Ok(ExitCode::SUCCESS)
}

fn print_record(record: &IterationRecord) {
    let stored = record
        .decisions
        .iter()
        .filter(|d| d.outcome == MatOutcome::Store)
        .count();
    println!(
        "iteration {} ({}): predicted {} ms, ran {} ms, wrote {} artifacts ({} ms), stored {} bytes",
        record.iteration,
        record.iteration_type,
        record.predicted_cost_ms,
        record.realized_run_ms,
        stored,
        record.mat_write_ms,
        record.storage_bytes,
    );
}

fn cmd_simulate(args: SimulateArgs) -> reflow_core::Result<ExitCode> {
    let workflow = Workflow::from_path(&args.workflow)?;
    let mut store = MaterializationCatalog::open(&args.store)?;
    let config = SessionConfig {
        iterations: args.iters,
        seed: args.seed,
        scenario: args.weights,
        budget_bytes: args.budget,
        policy: args.policy.into(),
    };
    let records = with_executor(args.executor, &args.store, |exec| {
        engine::simulate_session(&mut store, &workflow, &config, exec)
    })?;
    for record in &records {
        print_record(record);
    }
    let rows = report::rows_from_records(&records);
    let csv_path = args.store.join("report.csv");
    let json_path = args.store.join("report.json");
    std::fs::write(&csv_path, report::render_csv(&rows))?;
    std::fs::write(&json_path, report::render_json(&rows))?;
    if let Some(last) = records.last() {
        println!("final cumulative time: {} ms over {} iterations", last.cumulative_ms, records.len());
    }
    println!("report written to {} and {}", csv_path.display(), json_path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_diff(args: DiffArgs) -> reflow_core::Result<ExitCode> {
    let prev = Workflow::from_path(&args.prev)?;
    let next = Workflow::from_path(&args.next)?;
    let prev_by_id = change::signatures(&prev.dag)?;
    let next_by_id = change::signatures(&next.dag)?;
    let prev_set: BTreeMap<&Signature, &NodeId> =
        prev_by_id.iter().map(|(id, sig)| (sig, id)).collect();

    for (id, sig) in &next_by_id {
        let verdict = if let Some(prev_id) = prev_set.get(sig) {
            if *prev_id == id {
                "unchanged".to_owned()
            } else {
                format!("unchanged (same content as prior node {prev_id})")
            }
        } else {
            match (prev.dag.node(id), next.dag.node(id)) {
                (None, _) => "added".to_owned(),
                (Some(p), Some(n)) if p.code != n.code => "changed: code edited".to_owned(),
                (Some(p), Some(n)) if p.inputs != n.inputs => "changed: inputs rewired".to_owned(),
                _ => "changed: an upstream node changed".to_owned(),
            }
        };
        println!("{:<20} {verdict}", id.as_str());
    }
    for id in prev_by_id.keys() {
        if !next_by_id.contains_key(id) {
            println!("{:<20} removed", id.as_str());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> reflow_core::Result<ExitCode> {
    if args.max_nodes > oracle::MAX_EXHAUSTIVE_NODES {
        eprintln!(
            "refusing: exhaustive search is capped at {} nodes (asked for {})",
            oracle::MAX_EXHAUSTIVE_NODES,
            args.max_nodes
        );
        return Ok(ExitCode::from(2));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    for trial in 0..args.trials {
        let dag = synth::random_dag(&mut rng, args.max_nodes);
        let metrics = synth::random_metrics(&mut rng, &dag, 0.6);
        let change = synth::random_change(&mut rng, &dag, 0.2);
        let plan = oep::optimal_plan(&dag, &metrics, &change)?;
        let (oracle_cost, _) = oracle::brute_force_oep(&dag, &metrics, &change)?;
        if plan.cost_ms != oracle_cost {
            eprintln!(
                "mismatch on trial {trial} (seed {}): planner {} ms, exhaustive {} ms",
                args.seed, plan.cost_ms, oracle_cost
            );
            return Ok(ExitCode::FAILURE);
        }
    }
    println!(
        "verified {} random instances of up to {} nodes against exhaustive search",
        args.trials, args.max_nodes
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(args: ReportArgs) -> reflow_core::Result<ExitCode> {
    let store = MaterializationCatalog::open(&args.store)?;
    let rows = report::rows_from_store(&store)?;
    match args.format {
        ReportFormat::Csv => print!("{}", report::render_csv(&rows)),
        ReportFormat::Json => println!("{}", report::render_json(&rows)),
    }
    Ok(ExitCode::SUCCESS)
}
