//! The iteration engine: run one workflow version end to end, reusing stored
//! artifacts where the planner says to, and deciding what to keep for the
//! next version as nodes fall out of scope.
//!
//! Each iteration follows the same pipeline: validate and slice the graph,
//! diff its signatures against the previous iteration, drop stored artifacts
//! nothing can reference anymore, resolve per-node load times from the
//! catalog, plan, execute the plan in topological order, and persist a full
//! record of what happened. Time is modeled in milliseconds throughout; the
//! simulated executor replays declared times, the process executor measures
//! real commands.

use crate::change::{self, ChangeSet, Signature};
use crate::dag::{
    self, slice_to_outputs, topological_order, ExecutionPlan, NodeId, NodeState, OperatorKind,
    WorkflowDag,
};
use crate::oep;
use crate::omp::{self, BudgetLedger, LedgerEntry, MatDecision, MatOutcome, MatPolicy};
use crate::store::MaterializationCatalog;
use crate::workflow::Workflow;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs::OpenOptions;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::time::Instant;

const DECISIONS_FILE: &str = "decisions.jsonl";

/// Produces node artifacts. The engine drives it strictly in dependency
/// order, so an implementation may assume every input of a node was computed
/// or restored earlier in the same iteration.
pub trait Executor {
    /// Run the operator for `node` and return the realized milliseconds.
    fn compute(&mut self, workflow: &Workflow, node: &NodeId) -> Result<u64>;

    /// Size of the artifact produced by the most recent `compute(node)` (or
    /// restored by `restore(node)`).
    fn artifact_bytes(&mut self, workflow: &Workflow, node: &NodeId) -> Result<u64>;

    /// Stream the artifact of `node` out, for materialization.
    fn persist(
        &mut self,
        workflow: &Workflow,
        node: &NodeId,
        out: &mut dyn Write,
    ) -> io::Result<()>;

    /// Make a stored artifact available again as if `node` had just run.
    fn restore(
        &mut self,
        workflow: &Workflow,
        node: &NodeId,
        artifact: &mut dyn Read,
    ) -> io::Result<()>;
}

/// Replays the declared per-node times and sizes without running anything.
/// Artifacts are synthetic but have the declared byte size, so storage
/// budgets and integrity checks behave exactly as they would with real data.
#[derive(Debug, Default)]
pub struct SimulatedExecutor;

impl Executor for SimulatedExecutor {
    fn compute(&mut self, workflow: &Workflow, node: &NodeId) -> Result<u64> {
        Ok(workflow.profile(node)?.compute_ms)
    }

    fn artifact_bytes(&mut self, workflow: &Workflow, node: &NodeId) -> Result<u64> {
        Ok(workflow.profile(node)?.size_bytes)
    }

    fn persist(
        &mut self,
        workflow: &Workflow,
        node: &NodeId,
        out: &mut dyn Write,
    ) -> io::Result<()> {
        let size = workflow
            .profile(node)
            .map_err(|e| io::Error::new(io::ErrorKind::NotFound, e.to_string()))?
            .size_bytes;
        write_pattern(out, node.as_str().as_bytes(), size)
    }

    fn restore(
        &mut self,
        _workflow: &Workflow,
        _node: &NodeId,
        artifact: &mut dyn Read,
    ) -> io::Result<()> {
        // Nothing consumes the bytes in simulation; drain to mimic a read.
        io::copy(artifact, &mut io::sink()).map(|_| ())
    }
}

/// Fill `out` with `size` bytes of a repeating pattern.
fn write_pattern(out: &mut dyn Write, pattern: &[u8], size: u64) -> io::Result<()> {
    let pattern = if pattern.is_empty() { b"x" } else { pattern };
    let mut chunk = Vec::with_capacity(8192);
    while chunk.len() < 8192 {
        chunk.extend_from_slice(pattern);
    }
    let mut left = size;
    while left > 0 {
        let n = left.min(chunk.len() as u64) as usize;
        out.write_all(&chunk[..n])?;
        left -= n as u64;
    }
    Ok(())
}

/// Runs each node's declared shell command and measures it. Commands see
/// their node id in `REFLOW_NODE_ID`, the path to write in `REFLOW_OUTPUT`,
/// and space-separated input paths in `REFLOW_INPUTS`.
#[derive(Debug)]
pub struct ProcessExecutor {
    work_dir: PathBuf,
}

impl ProcessExecutor {
    pub fn new(work_dir: impl Into<PathBuf>) -> Result<Self> {
        let work_dir = work_dir.into();
        std::fs::create_dir_all(&work_dir)?;
        Ok(ProcessExecutor { work_dir })
    }

    fn output_path(&self, node: &NodeId) -> PathBuf {
        self.work_dir.join(node.as_str())
    }
}

impl Executor for ProcessExecutor {
    fn compute(&mut self, workflow: &Workflow, node: &NodeId) -> Result<u64> {
        let profile = workflow.profile(node)?;
        let command = profile.command.as_deref().ok_or_else(|| {
            Error::InvalidWorkflow(format!("node {node} has no command for the process executor"))
        })?;
        let decl = workflow.dag.node(node).ok_or_else(|| Error::UnknownNode(node.clone()))?;
        let inputs: Vec<String> = decl
            .inputs
            .iter()
            .map(|p| self.output_path(p).to_string_lossy().into_owned())
            .collect();
        let started = Instant::now();
        let status = std::process::Command::new("sh")
            .arg("-c")
            .arg(command)
            .env("REFLOW_NODE_ID", node.as_str())
            .env("REFLOW_OUTPUT", self.output_path(node))
            .env("REFLOW_INPUTS", inputs.join(" "))
            .status()?;
        let elapsed = started.elapsed().as_millis() as u64;
        if !status.success() {
            return Err(Error::CommandFailed { node: node.clone(), status: status.to_string() });
        }
        Ok(elapsed)
    }

    fn artifact_bytes(&mut self, _workflow: &Workflow, node: &NodeId) -> Result<u64> {
        Ok(std::fs::metadata(self.output_path(node))?.len())
    }

    fn persist(
        &mut self,
        _workflow: &Workflow,
        node: &NodeId,
        out: &mut dyn Write,
    ) -> io::Result<()> {
        let mut file = std::fs::File::open(self.output_path(node))?;
        io::copy(&mut file, out).map(|_| ())
    }

    fn restore(
        &mut self,
        _workflow: &Workflow,
        node: &NodeId,
        artifact: &mut dyn Read,
    ) -> io::Result<()> {
        let mut file = std::fs::File::create(self.output_path(node))?;
        io::copy(artifact, &mut file).map(|_| ())
    }
}

/// Per-iteration knobs.
#[derive(Clone, Copy, Debug)]
pub struct EngineConfig {
    pub budget_bytes: u64,
    pub policy: MatPolicy,
}

/// One Load executed during an iteration, kept for auditing: a changed node
/// must never appear here.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadRecord {
    pub node_id: NodeId,
    /// Signature served from the store; None for sources, which "load" by
    /// re-reading their external input.
    pub signature: Option<Signature>,
    pub was_original: bool,
    pub ms: u64,
}

/// Trace entry; the order of entries is the order things happened.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "event")]
pub enum EngineEvent {
    /// A stored artifact no longer matched any current node and was dropped.
    Purge { signature: Signature, node_id: NodeId },
    /// A node ran (state Compute) or was served from storage (state Load).
    Execute { node_id: NodeId, state: NodeState, ms: u64 },
    /// A node fell out of scope and its keep-or-drop decision was made.
    Decide { node_id: NodeId, outcome: MatOutcome },
}

/// Everything that happened in one iteration. Persisted as
/// `history/<iteration>.json`; the signature map seeds the next iteration's
/// change detection.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u64,
    /// "initial", a modification tag ("dpr" / "li" / "ppr"), or "none".
    pub iteration_type: String,
    pub modified_node: Option<NodeId>,
    pub policy: MatPolicy,
    pub original_nodes: BTreeSet<NodeId>,
    pub plan_states: BTreeMap<NodeId, NodeState>,
    /// Plan cost the optimizer predicted.
    pub predicted_cost_ms: u64,
    /// Realized milliseconds per executed node.
    pub realized_node_ms: BTreeMap<NodeId, u64>,
    /// Sum of realized node times.
    pub realized_run_ms: u64,
    /// Time spent writing materialized artifacts.
    pub mat_write_ms: u64,
    /// Running total of run and write time across the session so far.
    pub cumulative_ms: u64,
    /// Stored bytes after this iteration's purges and writes.
    pub storage_bytes: u64,
    /// Decisions that wanted to store but were refused for lack of budget.
    pub am_budget_skips: u64,
    pub decisions: Vec<MatDecision>,
    pub loads: Vec<LoadRecord>,
    pub events: Vec<EngineEvent>,
    /// Signature of every node of the sliced graph this iteration.
    pub signatures: BTreeMap<NodeId, Signature>,
}

/// Serve one stored artifact to the executor, verifying the index entry
/// against the file first. An artifact that fails verification aborts the
/// iteration — silently recomputing here would hide store corruption.
pub fn load_node(
    store: &MaterializationCatalog,
    executor: &mut dyn Executor,
    workflow: &Workflow,
    node: &NodeId,
    sig: &Signature,
) -> Result<()> {
    let mut artifact = store.open_artifact(sig)?;
    executor.restore(workflow, node, &mut artifact)?;
    Ok(())
}

/// Run one iteration of `workflow` against the store: diff, purge, plan,
/// execute, decide materializations, and persist the iteration record.
pub fn run_iteration(
    store: &mut MaterializationCatalog,
    workflow: &Workflow,
    config: &EngineConfig,
    executor: &mut dyn Executor,
    iteration_type: &str,
    modified_node: Option<NodeId>,
) -> Result<IterationRecord> {
    dag::validate(&workflow.dag).into_result()?;
    let sliced = slice_to_outputs(&workflow.dag)?;
    let sliced_workflow = Workflow::new(
        sliced.clone(),
        workflow.disk_read_bytes_per_ms,
        workflow.profiles.clone(),
    );

    // Which iteration is this, and what did the previous one look like?
    let iteration = store.history_iterations()?.len() as u64;
    let (prev_sigs, prev_cumulative) = if iteration == 0 {
        (BTreeSet::new(), 0)
    } else {
        let prev: IterationRecord = store.get_history(iteration - 1)?;
        (prev.signatures.into_values().collect(), prev.cumulative_ms)
    };
    let change = change::diff_against(&prev_sigs, &sliced)?;
    let signatures = change::signatures(&sliced)?;

    let mut events = Vec::new();

    // Drop stored artifacts no current node can reference.
    let mut ledger = BudgetLedger::with_entries(
        config.budget_bytes,
        store.entries().map(|(sig, entry)| {
            (
                sig.clone(),
                LedgerEntry { node_id: entry.node_id.clone(), bytes: entry.size_bytes },
            )
        }),
    );
    for sig in omp::purge_stale(&mut ledger, &change) {
        if let Some(entry) = store.remove(&sig)? {
            events.push(EngineEvent::Purge { signature: sig, node_id: entry.node_id });
        }
    }

    let metrics = change::resolve_load_times(&sliced_workflow, &change, store)?;
    let plan = oep::optimal_plan(&sliced, &metrics, &change)?;

    let outcome = execute_plan(
        store,
        &sliced_workflow,
        config,
        executor,
        &plan,
        &change,
        &signatures,
        &mut ledger,
        iteration,
        &mut events,
    )?;

    let record = IterationRecord {
        iteration,
        iteration_type: iteration_type.to_owned(),
        modified_node,
        policy: config.policy,
        original_nodes: change.original.clone(),
        plan_states: plan.states.clone(),
        predicted_cost_ms: plan.cost_ms,
        realized_run_ms: outcome.realized_total,
        realized_node_ms: outcome.realized_ms,
        mat_write_ms: outcome.mat_write_ms,
        cumulative_ms: prev_cumulative + outcome.realized_total + outcome.mat_write_ms,
        storage_bytes: ledger.used_bytes(),
        am_budget_skips: outcome.budget_skips,
        decisions: outcome.decisions,
        loads: outcome.loads,
        events,
        signatures,
    };
    debug_assert_eq!(record.storage_bytes, store.total_bytes());

    store.put_history(iteration, &record)?;
    append_decisions(store, &record)?;
    Ok(record)
}

struct ExecOutcome {
    realized_ms: BTreeMap<NodeId, u64>,
    realized_total: u64,
    mat_write_ms: u64,
    budget_skips: u64,
    decisions: Vec<MatDecision>,
    loads: Vec<LoadRecord>,
}

/// Execute a plan in topological order, deciding the fate of each node as it
/// falls out of scope (all non-pruned children done).
#[allow(clippy::too_many_arguments)]
fn execute_plan(
    store: &mut MaterializationCatalog,
    workflow: &Workflow,
    config: &EngineConfig,
    executor: &mut dyn Executor,
    plan: &ExecutionPlan,
    change: &ChangeSet,
    signatures: &BTreeMap<NodeId, Signature>,
    ledger: &mut BudgetLedger,
    iteration: u64,
    events: &mut Vec<EngineEvent>,
) -> Result<ExecOutcome> {
    let dag = &workflow.dag;
    let order = topological_order(dag)?;
    let children = dag.children();
    let speed = workflow.disk_read_bytes_per_ms;

    // A node is decidable once it and all of its non-pruned children have
    // executed. Pruned children never run and never need their parents.
    let mut pending_children: BTreeMap<&NodeId, usize> = BTreeMap::new();
    for id in &order {
        let live_children = children[id]
            .iter()
            .filter(|c| plan.states[*c] != NodeState::Prune)
            .count();
        pending_children.insert(id, live_children);
    }

    let mut realized_ms: BTreeMap<NodeId, u64> = BTreeMap::new();
    let mut decided: BTreeSet<&NodeId> = BTreeSet::new();
    let mut decisions = Vec::new();
    let mut loads = Vec::new();
    let mut mat_write_ms = 0u64;
    let mut budget_skips = 0u64;

    for id in &order {
        let state = plan.states[id];
        let decl = dag.node(id).expect("node from topological order");
        match state {
            NodeState::Prune => continue,
            NodeState::Compute => {
                let ms = executor.compute(workflow, id)?;
                realized_ms.insert(id.clone(), ms);
                events.push(EngineEvent::Execute { node_id: id.clone(), state, ms });
            }
            NodeState::Load => {
                let ms = if decl.kind == OperatorKind::Source {
                    // Sources load by re-reading their external input.
                    let ms = executor.compute(workflow, id)?;
                    loads.push(LoadRecord {
                        node_id: id.clone(),
                        signature: None,
                        was_original: change.is_original(id),
                        ms,
                    });
                    ms
                } else {
                    let sig = change
                        .equivalent
                        .get(id)
                        .ok_or_else(|| Error::LoadUnavailable(id.clone()))?;
                    load_node(store, executor, workflow, id, sig)?;
                    let ms = store.entry(sig).map(|e| e.load_ms).unwrap_or(0);
                    loads.push(LoadRecord {
                        node_id: id.clone(),
                        signature: Some(sig.clone()),
                        was_original: change.is_original(id),
                        ms,
                    });
                    ms
                };
                realized_ms.insert(id.clone(), ms);
                events.push(EngineEvent::Execute { node_id: id.clone(), state, ms });
            }
        }

        // This node is done; see what fell out of scope.
        let mut eligible: Vec<&NodeId> = Vec::new();
        if pending_children[id] == 0 {
            eligible.push(id);
        }
        for parent in &decl.inputs {
            let left = pending_children.get_mut(parent).expect("parent in sliced graph");
            *left -= 1;
            if *left == 0 && realized_ms.contains_key(parent) {
                eligible.push(parent);
            }
        }
        eligible.sort();
        for node in eligible {
            if !decided.insert(node) {
                continue;
            }
            if dag.node(node).expect("known node").kind == OperatorKind::Source {
                continue; // sources re-read their input; storing a copy buys nothing
            }
            let size = executor.artifact_bytes(workflow, node)?;
            let projected = omp::projected_load_ms(size, speed);
            let cumulative = omp::cumulative_runtime(dag, &realized_ms, node)?;
            let sig = &signatures[node];
            let decision =
                omp::decide(config.policy, ledger, node, sig, cumulative, projected, size);
            match decision.outcome {
                MatOutcome::Store => {
                    let fresh = store.put(sig.clone(), node, size, projected, iteration, |file| {
                        executor.persist(workflow, node, file)
                    })?;
                    debug_assert!(fresh, "ledger admitted a signature the store already had");
                    mat_write_ms += projected;
                }
                MatOutcome::OverBudget => budget_skips += 1,
                _ => {}
            }
            events.push(EngineEvent::Decide {
                node_id: node.clone(),
                outcome: decision.outcome,
            });
            decisions.push(decision);
        }
    }

    debug_assert!(
        order.iter().all(|id| {
            plan.states[id] == NodeState::Prune
                || dag.node(id).unwrap().kind == OperatorKind::Source
                || decided.contains(id)
        }),
        "every executed non-source node must get a materialization decision"
    );

    Ok(ExecOutcome {
        realized_total: realized_ms.values().sum(),
        realized_ms,
        mat_write_ms,
        budget_skips,
        decisions,
        loads,
    })
}

#[derive(Serialize)]
struct DecisionLine<'a> {
    iteration: u64,
    #[serde(flatten)]
    decision: &'a MatDecision,
}

/// Append this iteration's decisions to `decisions.jsonl` in the store, one
/// JSON object per line.
fn append_decisions(store: &MaterializationCatalog, record: &IterationRecord) -> Result<()> {
    if record.decisions.is_empty() {
        return Ok(());
    }
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(store.root().join(DECISIONS_FILE))?;
    for decision in &record.decisions {
        let line = serde_json::to_string(&DecisionLine { iteration: record.iteration, decision })?;
        writeln!(file, "{line}")?;
    }
    Ok(())
}

/// Relative frequency of the three modification kinds in a simulated
/// session. Weights need not sum to anything in particular, just not to zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub dpr: u32,
    pub li: u32,
    pub ppr: u32,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario { dpr: 1, li: 1, ppr: 1 }
    }
}

/// Session-level knobs for [`simulate_session`].
#[derive(Clone, Copy, Debug)]
pub struct SessionConfig {
    /// Total iterations to run, including the initial one.
    pub iterations: u64,
    pub seed: u64,
    pub scenario: Scenario,
    pub budget_bytes: u64,
    pub policy: MatPolicy,
}

/// Rebuild `workflow` with a nonce comment appended to one node's code —
/// the smallest possible edit that still changes the node's signature.
pub fn touch_node(
    workflow: &Workflow,
    node: &NodeId,
    nonce: u32,
    iteration: u64,
) -> Result<Workflow> {
    if !workflow.dag.contains(node) {
        return Err(Error::UnknownNode(node.clone()));
    }
    let decls: Vec<_> = workflow
        .dag
        .nodes()
        .cloned()
        .map(|mut decl| {
            if &decl.id == node {
                decl.code = format!("{}  # rev {nonce:08x}", decl.code);
            }
            decl
        })
        .collect();
    Ok(Workflow::new(
        WorkflowDag::new(iteration, decls)?,
        workflow.disk_read_bytes_per_ms,
        workflow.profiles.clone(),
    ))
}

fn draw_kind(rng: &mut ChaCha8Rng, scenario: &Scenario) -> Result<OperatorKind> {
    let total = scenario.dpr + scenario.li + scenario.ppr;
    if total == 0 {
        return Err(Error::ZeroScenarioWeights);
    }
    let roll = rng.gen_range(0..total);
    Ok(if roll < scenario.dpr {
        OperatorKind::Dpr
    } else if roll < scenario.dpr + scenario.li {
        OperatorKind::Li
    } else {
        OperatorKind::Ppr
    })
}

/// Run a whole development session: the workflow as given, then
/// `iterations - 1` random single-node modifications drawn from the
/// scenario weights. Modification draws never depend on the policy or on
/// what the engine did, so two sessions with the same seed see the same
/// sequence of workflow versions whatever their policy or budget — exactly
/// what a policy comparison needs.
pub fn simulate_session(
    store: &mut MaterializationCatalog,
    workflow: &Workflow,
    config: &SessionConfig,
    executor: &mut dyn Executor,
) -> Result<Vec<IterationRecord>> {
    const MAX_REDRAWS: u32 = 16;

    let engine_config =
        EngineConfig { budget_bytes: config.budget_bytes, policy: config.policy };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut current = workflow.clone();
    let mut records = Vec::new();
    if config.iterations == 0 {
        return Ok(records);
    }
    records.push(run_iteration(store, &current, &engine_config, executor, "initial", None)?);

    for t in 1..config.iterations {
        let mut picked: Option<(OperatorKind, NodeId)> = None;
        for _ in 0..MAX_REDRAWS {
            let kind = draw_kind(&mut rng, &config.scenario)?;
            let candidates: Vec<&NodeId> = current
                .dag
                .nodes()
                .filter(|d| d.kind == kind)
                .map(|d| &d.id)
                .collect();
            if !candidates.is_empty() {
                let choice = candidates[rng.gen_range(0..candidates.len())].clone();
                picked = Some((kind, choice));
                break;
            }
        }
        let (label, modified) = match picked {
            Some((kind, node)) => {
                let nonce: u32 = rng.gen();
                current = touch_node(&current, &node, nonce, t)?;
                let label = match kind {
                    OperatorKind::Dpr => "dpr",
                    OperatorKind::Li => "li",
                    OperatorKind::Ppr => "ppr",
                    OperatorKind::Source => unreachable!("sources are never drawn"),
                };
                (label, Some(node))
            }
            None => ("none", None),
        };
        records.push(run_iteration(store, &current, &engine_config, executor, label, modified)?);
    }
    Ok(records)
}
