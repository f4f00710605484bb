//! Brute-force reference implementations the optimizers are tested against.
//!
//! Everything here trades speed for obviousness: plain enumeration with the
//! feasibility rules spelled out inline, deliberately sharing no code with
//! the production solvers. Instance sizes are capped so a mistake can't turn
//! into an endless loop; callers get a hard error instead.

use crate::change::ChangeSet;
use crate::dag::{
    topological_order, LoadTime, NodeId, NodeState, OperatorDecl, OperatorKind, OperatorMetrics,
    WorkflowDag,
};
use crate::{Error, Result};
use std::collections::{BTreeMap, BTreeSet};

/// Node-count cap for exhaustive 3-state enumeration (3^16 ≈ 43M states).
pub const MAX_EXHAUSTIVE_NODES: usize = 16;
/// Item cap for exhaustive knapsack enumeration.
pub const MAX_KNAPSACK_ITEMS: usize = 20;

struct NodeInfo {
    compute: u64,
    load: Option<u64>,
    original: bool,
    output: bool,
    parents: Vec<usize>,
}

/// Flatten an instance into topological order with per-node facts, for the
/// exhaustive searches below.
fn node_infos(
    dag: &WorkflowDag,
    metrics: &BTreeMap<NodeId, OperatorMetrics>,
    change: &ChangeSet,
) -> Result<(Vec<NodeId>, Vec<NodeInfo>)> {
    if dag.len() > MAX_EXHAUSTIVE_NODES {
        return Err(Error::TooLargeForExhaustive {
            what: "nodes",
            actual: dag.len(),
            bound: MAX_EXHAUSTIVE_NODES,
        });
    }
    let order = topological_order(dag)?;
    let position: BTreeMap<&NodeId, usize> =
        order.iter().enumerate().map(|(i, id)| (id, i)).collect();
    let mut info = Vec::with_capacity(order.len());
    for id in &order {
        let decl = dag.node(id).expect("node from topological order");
        let m = metrics.get(id).ok_or_else(|| Error::UnknownNode(id.clone()))?;
        info.push(NodeInfo {
            compute: m.compute_ms,
            load: m.load_ms.finite(),
            original: change.is_original(id),
            output: decl.is_output,
            parents: decl.inputs.iter().map(|p| position[p]).collect(),
        });
    }
    Ok((order, info))
}

/// Exhaustively find a cheapest feasible plan: every changed node computed,
/// no computed node on a pruned parent, outputs not pruned, loads only where
/// a stored artifact exists. Returns the cost and the first cheapest witness
/// in a fixed enumeration order (nodes topologically, states in
/// load/compute/prune order), so results are deterministic.
pub fn brute_force_oep(
    dag: &WorkflowDag,
    metrics: &BTreeMap<NodeId, OperatorMetrics>,
    change: &ChangeSet,
) -> Result<(u64, BTreeMap<NodeId, NodeState>)> {
    let (order, info) = node_infos(dag, metrics, change)?;

    struct Search<'a> {
        info: &'a [NodeInfo],
        states: Vec<NodeState>,
        best_cost: u64,
        best: Option<Vec<NodeState>>,
    }
    impl Search<'_> {
        fn go(&mut self, pos: usize, cost: u64) {
            if cost > self.best_cost {
                return; // cannot beat the incumbent, equal ties keep the first
            }
            if pos == self.info.len() {
                if cost < self.best_cost || self.best.is_none() {
                    self.best_cost = cost;
                    self.best = Some(self.states.clone());
                }
                return;
            }
            let node = &self.info[pos];
            for state in [NodeState::Load, NodeState::Compute, NodeState::Prune] {
                let step = match state {
                    NodeState::Load => {
                        if node.original {
                            continue;
                        }
                        match node.load {
                            Some(ms) => ms,
                            None => continue,
                        }
                    }
                    NodeState::Compute => {
                        // Parents precede in topological order, so their
                        // states are already fixed.
                        if node.parents.iter().any(|&p| self.states[p] == NodeState::Prune) {
                            continue;
                        }
                        node.compute
                    }
                    NodeState::Prune => {
                        if node.original || node.output {
                            continue;
                        }
                        0
                    }
                };
                self.states.push(state);
                self.go(pos + 1, cost + step);
                self.states.pop();
            }
        }
    }

    let mut search = Search { info: &info, states: Vec::new(), best_cost: u64::MAX, best: None };
    search.go(0, 0);
    let witness = search.best.expect("computing every node is always feasible");
    Ok((
        search.best_cost,
        order.into_iter().zip(witness).collect(),
    ))
}

/// Number of distinct feasible plans that achieve the minimum cost. Golden
/// instances assert this is exactly one, so their expected witness is not an
/// accident of tie-breaking.
pub fn count_optimal_plans(
    dag: &WorkflowDag,
    metrics: &BTreeMap<NodeId, OperatorMetrics>,
    change: &ChangeSet,
) -> Result<usize> {
    let (best_cost, _) = brute_force_oep(dag, metrics, change)?;
    let (_, info) = node_infos(dag, metrics, change)?;

    fn walk(info: &[NodeInfo], states: &mut Vec<NodeState>, cost: u64, best: u64) -> usize {
        if cost > best {
            return 0;
        }
        let pos = states.len();
        if pos == info.len() {
            return usize::from(cost == best);
        }
        let node = &info[pos];
        let mut found = 0;
        for state in [NodeState::Load, NodeState::Compute, NodeState::Prune] {
            let step = match state {
                NodeState::Load => match (node.original, node.load) {
                    (false, Some(ms)) => ms,
                    _ => continue,
                },
                NodeState::Compute => {
                    if node.parents.iter().any(|&p| states[p] == NodeState::Prune) {
                        continue;
                    }
                    node.compute
                }
                NodeState::Prune => {
                    if node.original || node.output {
                        continue;
                    }
                    0
                }
            };
            states.push(state);
            found += walk(info, states, cost + step, best);
            states.pop();
        }
        found
    }

    Ok(walk(&info, &mut Vec::new(), 0, best_cost))
}

/// The same search, but with changed nodes handled by preference instead of
/// by constraint: their compute is free in the primary objective and ties
/// prefer computing more of them, mirroring an infinitesimal reward for each
/// changed node that reruns. The reported cost adds the real compute times
/// of the changed nodes back in, so it is comparable to [`brute_force_oep`].
///
/// On graphs sliced to their outputs, with change sets closed under
/// descendants, this must agree exactly with the constrained search — the
/// test suite holds the two implementations together.
pub fn brute_force_oep_by_preference(
    dag: &WorkflowDag,
    metrics: &BTreeMap<NodeId, OperatorMetrics>,
    change: &ChangeSet,
) -> Result<(u64, BTreeMap<NodeId, NodeState>)> {
    if dag.len() > MAX_EXHAUSTIVE_NODES {
        return Err(Error::TooLargeForExhaustive {
            what: "nodes",
            actual: dag.len(),
            bound: MAX_EXHAUSTIVE_NODES,
        });
    }
    let order = topological_order(dag)?;
    let position: BTreeMap<&NodeId, usize> =
        order.iter().enumerate().map(|(i, id)| (id, i)).collect();
    let ids = order.clone();

    let mut best: Option<(u64, usize, Vec<NodeState>)> = None; // (cost, changed-not-computed, states)
    let n = order.len();
    let mut states = vec![NodeState::Prune; n];
    let mut stack = vec![0usize]; // state index per position, driven iteratively below

    // Iterative odometer over 3^n assignments; feasibility checked per node.
    'outer: loop {
        // Build states from the odometer.
        for (i, &s) in stack.iter().enumerate() {
            states[i] = match s {
                0 => NodeState::Load,
                1 => NodeState::Compute,
                _ => NodeState::Prune,
            };
        }
        if stack.len() == n {
            let mut cost: u64 = 0;
            let mut skipped_changed = 0usize;
            let mut feasible = true;
            for (i, id) in ids.iter().enumerate() {
                let decl = dag.node(id).unwrap();
                let m = &metrics[id];
                match states[i] {
                    NodeState::Load => {
                        // A changed node has nothing valid to load.
                        if change.is_original(id) || m.load_ms.finite().is_none() {
                            feasible = false;
                            break;
                        }
                        cost += m.load_ms.finite().unwrap();
                    }
                    NodeState::Compute => {
                        if decl.inputs.iter().any(|p| states[position[p]] == NodeState::Prune) {
                            feasible = false;
                            break;
                        }
                        // Changed nodes rerun for free in the primary cost.
                        if !change.is_original(id) {
                            cost += m.compute_ms;
                        }
                    }
                    NodeState::Prune => {
                        if decl.is_output {
                            feasible = false;
                            break;
                        }
                        if change.is_original(id) {
                            skipped_changed += 1;
                        }
                    }
                }
            }
            if feasible {
                let candidate = (cost, skipped_changed, states.clone());
                let better = match &best {
                    None => true,
                    Some((bc, bs, _)) => (cost, skipped_changed) < (*bc, *bs),
                };
                if better {
                    best = Some(candidate);
                }
            }
        } else {
            stack.push(0);
            continue;
        }
        // Advance the odometer.
        loop {
            match stack.pop() {
                None => break 'outer,
                Some(s) if s < 2 => {
                    stack.push(s + 1);
                    break;
                }
                Some(_) => {}
            }
        }
    }

    let (cost, _, witness) = best.expect("computing every node is always feasible");
    let changed_compute: u64 = ids
        .iter()
        .enumerate()
        .filter(|(i, id)| change.is_original(id) && witness[*i] == NodeState::Compute)
        .map(|(_, id)| metrics[id].compute_ms)
        .sum();
    Ok((cost + changed_compute, ids.into_iter().zip(witness).collect()))
}

/// The two-indicator view of a plan used for cross-checking against the
/// integer-program formulation: per node, "present" (not pruned) and
/// "computed" flags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IlpAssignment {
    pub present: BTreeMap<NodeId, bool>,
    pub computed: BTreeMap<NodeId, bool>,
}

impl IlpAssignment {
    pub fn from_states(states: &BTreeMap<NodeId, NodeState>) -> Self {
        IlpAssignment {
            present: states.iter().map(|(id, s)| (id.clone(), *s != NodeState::Prune)).collect(),
            computed: states.iter().map(|(id, s)| (id.clone(), *s == NodeState::Compute)).collect(),
        }
    }

    /// Check the linear constraints: computed implies present, computed
    /// implies every parent present, and changed nodes are computed.
    pub fn is_feasible(&self, dag: &WorkflowDag, change: &ChangeSet) -> bool {
        for decl in dag.nodes() {
            let present = self.present[&decl.id];
            let computed = self.computed[&decl.id];
            if computed && !present {
                return false;
            }
            if computed && decl.inputs.iter().any(|p| !self.present[p]) {
                return false;
            }
            if change.is_original(&decl.id) && !computed {
                return false;
            }
        }
        true
    }
}

/// Objective of the integer-program formulation: `present·load +
/// computed·(compute − load)` summed over nodes, with unavailable loads at a
/// stand-in value. For any assignment that never loads an artifact-less
/// node this telescopes to exactly the plan cost, whatever the stand-in.
pub fn ilp_objective(
    dag: &WorkflowDag,
    metrics: &BTreeMap<NodeId, OperatorMetrics>,
    assignment: &IlpAssignment,
) -> i64 {
    let stand_in: i64 = 1 + dag
        .nodes()
        .map(|d| {
            let m = &metrics[&d.id];
            let c = m.compute_ms as i64;
            let l = m.load_ms.finite().unwrap_or(0) as i64;
            c + l + (l - c).abs()
        })
        .sum::<i64>();
    dag.nodes()
        .map(|d| {
            let m = &metrics[&d.id];
            let l = m.load_ms.finite().map(|v| v as i64).unwrap_or(stand_in);
            let c = m.compute_ms as i64;
            let present = i64::from(assignment.present[&d.id]);
            let computed = i64::from(assignment.computed[&d.id]);
            present * l + computed * (c - l)
        })
        .sum()
}

/// Exhaustive materialization choice: over every budget-feasible subset `M`
/// of storable nodes, minimize (time to write `M`) + (optimal plan time of
/// an identical next iteration that may additionally load `M`). Returns the
/// first minimizer in subset-enumeration order.
///
/// Storable means: not a source (sources re-read their input; storing a copy
/// buys nothing) and not already stored (re-storing is a no-op).
pub fn brute_force_omp(
    dag: &WorkflowDag,
    metrics: &BTreeMap<NodeId, OperatorMetrics>,
    budget_bytes: u64,
    disk_read_bytes_per_ms: u64,
) -> Result<(u64, BTreeSet<NodeId>)> {
    if dag.len() > MAX_EXHAUSTIVE_NODES {
        return Err(Error::TooLargeForExhaustive {
            what: "nodes",
            actual: dag.len(),
            bound: MAX_EXHAUSTIVE_NODES,
        });
    }
    let speed = disk_read_bytes_per_ms.max(1);
    let candidates: Vec<&OperatorDecl> = dag
        .nodes()
        .filter(|d| d.kind != OperatorKind::Source)
        .filter(|d| !metrics[&d.id].load_ms.is_finite())
        .collect();
    let no_changes = ChangeSet::default();
    let mut best: Option<(u64, BTreeSet<NodeId>)> = None;
    for mask in 0u32..(1u32 << candidates.len()) {
        let chosen: Vec<&OperatorDecl> = candidates
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, d)| *d)
            .collect();
        let stored: u64 = chosen.iter().map(|d| metrics[&d.id].size_bytes).sum();
        if stored > budget_bytes {
            continue;
        }
        let mut write_ms: u64 = 0;
        let mut next_metrics = metrics.clone();
        for d in &chosen {
            let m = next_metrics.get_mut(&d.id).unwrap();
            let ms = div_ceil(m.size_bytes, speed);
            m.load_ms = LoadTime::Finite(ms);
            write_ms += ms;
        }
        let replay = crate::oep::optimal_plan(dag, &next_metrics, &no_changes)?;
        let total = write_ms + replay.cost_ms;
        if best.as_ref().map_or(true, |(cost, _)| total < *cost) {
            best = Some((total, chosen.iter().map(|d| d.id.clone()).collect()));
        }
    }
    Ok(best.expect("the empty subset is always feasible"))
}

/// A 0/1 knapsack instance. Sizes and profits are positive and aligned.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnapsackInstance {
    pub sizes: Vec<u64>,
    pub profits: Vec<u64>,
    pub budget: u64,
}

impl KnapsackInstance {
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }
}

/// Exhaustive knapsack: best total profit within the budget, plus the first
/// best item set in subset-enumeration order.
pub fn brute_force_knapsack(inst: &KnapsackInstance) -> Result<(u64, BTreeSet<usize>)> {
    assert_eq!(inst.sizes.len(), inst.profits.len());
    if inst.len() > MAX_KNAPSACK_ITEMS {
        return Err(Error::TooLargeForExhaustive {
            what: "items",
            actual: inst.len(),
            bound: MAX_KNAPSACK_ITEMS,
        });
    }
    let mut best_profit = 0u64;
    let mut best_set = BTreeSet::new();
    for mask in 0u32..(1u32 << inst.len()) {
        let mut size = 0u64;
        let mut profit = 0u64;
        for i in 0..inst.len() {
            if mask & (1 << i) != 0 {
                size += inst.sizes[i];
                profit += inst.profits[i];
            }
        }
        if size <= inst.budget && profit > best_profit {
            best_profit = profit;
            best_set = (0..inst.len()).filter(|i| mask & (1 << i) != 0).collect();
        }
    }
    Ok((best_profit, best_set))
}

/// Independent dynamic-programming check on the best knapsack profit.
pub fn knapsack_dp(inst: &KnapsackInstance) -> u64 {
    let budget = inst.budget as usize;
    let mut best = vec![0u64; budget + 1];
    for i in 0..inst.len() {
        let size = inst.sizes[i] as usize;
        let profit = inst.profits[i];
        if size > budget {
            continue;
        }
        for cap in (size..=budget).rev() {
            best[cap] = best[cap].max(best[cap - size] + profit);
        }
    }
    best[budget]
}

/// Throughput used by [`knapsack_to_omp`]. Item artifacts are scaled by the
/// same factor, so load times stay numerically equal to the item sizes.
pub const KNAPSACK_BYTES_PER_MS: u64 = 1000;

/// Embed a knapsack instance into a materialization-choice instance.
///
/// One cheap shared root feeds one output node per item. Item `i` costs
/// `p_i + 2·s_i` to compute and `s_i` to load or store (its artifact is
/// `1000·s_i` bytes at 1000 bytes/ms), with a storage budget of `1000·B`
/// bytes. Writing item `i` now and loading it next iteration costs `2·s_i`,
/// versus `p_i + 2·s_i` to recompute: materializing item `i` saves exactly
/// `p_i` within a storage allowance of `s_i`. The exhaustive OMP choice on
/// this graph is therefore exactly the knapsack optimum.
pub fn knapsack_to_omp(
    inst: &KnapsackInstance,
) -> (WorkflowDag, BTreeMap<NodeId, OperatorMetrics>, u64) {
    let root = NodeId::from("root");
    let mut decls = vec![OperatorDecl {
        id: root.clone(),
        kind: OperatorKind::Source,
        code: "shared_input()".into(),
        inputs: vec![],
        is_output: false,
    }];
    let mut metrics = BTreeMap::from([(
        root.clone(),
        OperatorMetrics {
            compute_ms: 1,
            load_ms: LoadTime::Finite(1),
            size_bytes: KNAPSACK_BYTES_PER_MS,
        },
    )]);
    for (i, (&size, &profit)) in inst.sizes.iter().zip(&inst.profits).enumerate() {
        let id = NodeId::new(format!("item{i:02}"));
        decls.push(OperatorDecl {
            id: id.clone(),
            kind: OperatorKind::Dpr,
            code: format!("item_{i}(root)"),
            inputs: vec![root.clone()],
            is_output: true,
        });
        metrics.insert(
            id,
            OperatorMetrics {
                compute_ms: profit + 2 * size,
                load_ms: LoadTime::Unavailable,
                size_bytes: size * KNAPSACK_BYTES_PER_MS,
            },
        );
    }
    let dag = WorkflowDag::new(0, decls).expect("generated ids are unique");
    (dag, metrics, inst.budget * KNAPSACK_BYTES_PER_MS)
}

/// Vertex cap (excluding source and sink) for exhaustive cut enumeration.
pub const MAX_CUT_VERTICES: usize = 20;

/// Exhaustive minimum cut: try every vertex set containing the source but
/// not the sink and take the cheapest crossing capacity, with unbounded
/// arcs at the same stand-in value the solver uses. Comparing
/// [`crate::flow::max_flow`]'s value against this checks the
/// max-flow = min-cut identity.
pub fn brute_force_min_cut(net: &crate::flow::FlowNetwork) -> Result<i64> {
    let free: Vec<usize> = (0..net.vertices())
        .filter(|&v| v != net.source() && v != net.sink())
        .collect();
    if free.len() > MAX_CUT_VERTICES {
        return Err(Error::TooLargeForExhaustive {
            what: "cut vertices",
            actual: free.len(),
            bound: MAX_CUT_VERTICES,
        });
    }
    let mut best = i64::MAX;
    for mask in 0u32..(1u32 << free.len()) {
        let mut side = BTreeSet::from([net.source()]);
        side.extend(free.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, v)| *v));
        best = best.min(crate::flow::cut_capacity(net, &side));
    }
    Ok(best)
}

fn div_ceil(num: u64, den: u64) -> u64 {
    num / den + u64::from(num % den != 0)
}
