//! Workflow graph types and the basic graph operations everything else
//! builds on: validation, deterministic topological order, slicing to the
//! declared outputs, plan costing, and plan feasibility checks.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

/// Identifier of a workflow node. Orderable so that every iteration order in
/// the crate (and every tie-break) is deterministic.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

/// What stage of the workflow an operator belongs to. Source nodes read
/// external data; the other kinds tag the stage an iteration scenario may
/// modify (data pre-processing, learning/inference, post-processing).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Source,
    Dpr,
    Li,
    Ppr,
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OperatorKind::Source => "source",
            OperatorKind::Dpr => "dpr",
            OperatorKind::Li => "li",
            OperatorKind::Ppr => "ppr",
        };
        f.write_str(s)
    }
}

/// One operator declaration. `inputs` is ordered: swapping two inputs is a
/// semantic change and is treated as one by change tracking.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorDecl {
    pub id: NodeId,
    pub kind: OperatorKind,
    pub code: String,
    pub inputs: Vec<NodeId>,
    pub is_output: bool,
}

/// An immutable workflow DAG for one iteration. Nodes are keyed by id; edges
/// run from each input to the node declaring it. Construction only rejects
/// duplicate ids — use [`validate`] for everything else, so that a caller can
/// report all findings at once.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowDag {
    iteration: u64,
    nodes: BTreeMap<NodeId, OperatorDecl>,
}

impl WorkflowDag {
    pub fn new(iteration: u64, decls: impl IntoIterator<Item = OperatorDecl>) -> Result<Self> {
        let mut nodes = BTreeMap::new();
        for decl in decls {
            let id = decl.id.clone();
            if nodes.insert(id.clone(), decl).is_some() {
                return Err(Error::DuplicateNode(id));
            }
        }
        Ok(WorkflowDag { iteration, nodes })
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn node(&self, id: &NodeId) -> Option<&OperatorDecl> {
        self.nodes.get(id)
    }

    /// Nodes in ascending id order.
    pub fn nodes(&self) -> impl Iterator<Item = &OperatorDecl> {
        self.nodes.values()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.keys()
    }

    pub fn outputs(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.values().filter(|d| d.is_output).map(|d| &d.id)
    }

    /// Child map derived from the declared inputs. Children are sorted by id.
    pub fn children(&self) -> BTreeMap<NodeId, Vec<NodeId>> {
        let mut out: BTreeMap<NodeId, Vec<NodeId>> =
            self.nodes.keys().map(|id| (id.clone(), Vec::new())).collect();
        for decl in self.nodes.values() {
            for input in &decl.inputs {
                if let Some(kids) = out.get_mut(input) {
                    kids.push(decl.id.clone());
                }
            }
        }
        for kids in out.values_mut() {
            kids.sort();
            kids.dedup();
        }
        out
    }

    /// All ancestors of `id` (excluding `id` itself), each reported once.
    pub fn ancestors(&self, id: &NodeId) -> Result<BTreeSet<NodeId>> {
        if !self.nodes.contains_key(id) {
            return Err(Error::UnknownNode(id.clone()));
        }
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<&NodeId> = VecDeque::new();
        queue.push_back(id);
        while let Some(cur) = queue.pop_front() {
            if let Some(decl) = self.nodes.get(cur) {
                for input in &decl.inputs {
                    if seen.insert(input.clone()) {
                        queue.push_back(input);
                    }
                }
            }
        }
        Ok(seen)
    }
}

/// Per-node cost model for one iteration. Times are whole milliseconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorMetrics {
    pub compute_ms: u64,
    pub load_ms: LoadTime,
    pub size_bytes: u64,
}

/// Time to load a node's stored result. `Unavailable` means no stored
/// equivalent exists, so loading is not an option for this node — it is an
/// explicit variant rather than a sentinel value so that arithmetic on it is
/// impossible by construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LoadTime {
    Finite(u64),
    Unavailable,
}

impl LoadTime {
    pub fn finite(self) -> Option<u64> {
        match self {
            LoadTime::Finite(ms) => Some(ms),
            LoadTime::Unavailable => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, LoadTime::Finite(_))
    }
}

impl fmt::Display for LoadTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadTime::Finite(ms) => write!(f, "{ms}"),
            LoadTime::Unavailable => f.write_str("unavailable"),
        }
    }
}

/// The fate of one node in one iteration's plan.
///
/// The derived order (`Load < Compute < Prune`) is the tie-break order used
/// when an enumeration must pick a single witness among equal-cost plans.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeState {
    /// Read the stored result of an equivalent earlier node.
    Load,
    /// Run the operator.
    Compute,
    /// Skip the node entirely; nothing that runs depends on it.
    Prune,
}

impl fmt::Display for NodeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NodeState::Load => "load",
            NodeState::Compute => "compute",
            NodeState::Prune => "prune",
        };
        f.write_str(s)
    }
}

/// A full assignment of states plus its predicted wall-clock cost.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionPlan {
    pub states: BTreeMap<NodeId, NodeState>,
    pub cost_ms: u64,
}

/// One problem found by [`validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ValidationIssue {
    /// No node is marked `is_output`.
    NoOutputs,
    /// The named nodes form a dependency cycle.
    Cycle(Vec<NodeId>),
    /// `node` lists `input`, which does not exist in the graph.
    UnknownInput { node: NodeId, input: NodeId },
    /// Source operators read external data and may not have workflow inputs.
    SourceWithInputs(NodeId),
    /// A node id is the empty string.
    EmptyId,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationIssue::NoOutputs => f.write_str("no node is marked as an output"),
            ValidationIssue::Cycle(nodes) => {
                let names: Vec<&str> = nodes.iter().map(|n| n.as_str()).collect();
                write!(f, "cycle through {}", names.join(", "))
            }
            ValidationIssue::UnknownInput { node, input } => {
                write!(f, "{node} reads {input}, which is not declared")
            }
            ValidationIssue::SourceWithInputs(node) => {
                write!(f, "source node {node} must not have inputs")
            }
            ValidationIssue::EmptyId => f.write_str("node id is empty"),
        }
    }
}

/// Everything wrong with a graph, gathered in one pass.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }

    /// Convert into a hard error unless the report is clean.
    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            let text: Vec<String> = self.issues.iter().map(|i| i.to_string()).collect();
            Err(Error::InvalidWorkflow(text.join("; ")))
        }
    }
}

/// Check structural invariants: at least one output, all inputs resolvable,
/// sources input-free, ids non-empty, and no cycles. All findings are
/// collected; the report is empty exactly when the graph is well-formed.
pub fn validate(dag: &WorkflowDag) -> ValidationReport {
    let mut issues = Vec::new();
    if dag.outputs().next().is_none() {
        issues.push(ValidationIssue::NoOutputs);
    }
    for decl in dag.nodes() {
        if decl.id.as_str().is_empty() {
            issues.push(ValidationIssue::EmptyId);
        }
        if decl.kind == OperatorKind::Source && !decl.inputs.is_empty() {
            issues.push(ValidationIssue::SourceWithInputs(decl.id.clone()));
        }
        for input in &decl.inputs {
            if !dag.contains(input) {
                issues.push(ValidationIssue::UnknownInput {
                    node: decl.id.clone(),
                    input: input.clone(),
                });
            }
        }
    }
    if let Err(Error::Cycle(nodes)) = topological_order(dag) {
        issues.push(ValidationIssue::Cycle(nodes));
    }
    ValidationReport { issues }
}

/// Topological order with deterministic tie-breaking: among ready nodes the
/// smallest id runs first (Kahn's algorithm over a sorted ready set). Fails
/// with the offending node set if the graph has a cycle.
pub fn topological_order(dag: &WorkflowDag) -> Result<Vec<NodeId>> {
    let mut indegree: BTreeMap<&NodeId, usize> = BTreeMap::new();
    for decl in dag.nodes() {
        indegree.entry(&decl.id).or_insert(0);
        for input in &decl.inputs {
            if dag.contains(input) {
                *indegree.entry(&decl.id).or_insert(0) += 1;
            }
        }
    }
    let children = dag.children();
    let mut ready: BTreeSet<&NodeId> = indegree
        .iter()
        .filter(|(_, deg)| **deg == 0)
        .map(|(id, _)| *id)
        .collect();
    let mut order = Vec::with_capacity(dag.len());
    while let Some(&next) = ready.iter().next() {
        ready.remove(next);
        order.push(next.clone());
        if let Some(kids) = children.get(next) {
            for kid in kids {
                let deg = indegree.get_mut(kid).expect("child is a known node");
                *deg -= 1;
                if *deg == 0 {
                    ready.insert(kid);
                }
            }
        }
    }
    if order.len() == dag.len() {
        Ok(order)
    } else {
        // Everything still holding an in-degree sits on or behind a cycle;
        // report the members with no acyclic justification left.
        let mut stuck: Vec<NodeId> = indegree
            .into_iter()
            .filter(|(_, deg)| *deg > 0)
            .map(|(id, _)| id.clone())
            .collect();
        stuck.sort();
        Err(Error::Cycle(stuck))
    }
}

/// Drop every node that no declared output transitively depends on. The
/// result keeps the same iteration number; outputs and their ancestor closure
/// survive unchanged. Errors if the graph declares no outputs at all.
pub fn slice_to_outputs(dag: &WorkflowDag) -> Result<WorkflowDag> {
    let mut keep: BTreeSet<NodeId> = BTreeSet::new();
    let mut queue: VecDeque<NodeId> = VecDeque::new();
    for out in dag.outputs() {
        if keep.insert(out.clone()) {
            queue.push_back(out.clone());
        }
    }
    if keep.is_empty() {
        return Err(Error::NoOutputs);
    }
    while let Some(cur) = queue.pop_front() {
        if let Some(decl) = dag.node(&cur) {
            for input in &decl.inputs {
                if keep.insert(input.clone()) {
                    queue.push_back(input.clone());
                }
            }
        }
    }
    WorkflowDag::new(
        dag.iteration(),
        dag.nodes().filter(|d| keep.contains(&d.id)).cloned(),
    )
}

/// Predicted wall-clock cost of a state assignment: computed nodes charge
/// their compute time, loaded nodes their load time, pruned nodes nothing.
/// Loading a node with no stored artifact is an error.
pub fn plan_cost(
    dag: &WorkflowDag,
    metrics: &BTreeMap<NodeId, OperatorMetrics>,
    states: &BTreeMap<NodeId, NodeState>,
) -> Result<u64> {
    let mut total: u64 = 0;
    for decl in dag.nodes() {
        let state = states
            .get(&decl.id)
            .ok_or_else(|| Error::UnknownNode(decl.id.clone()))?;
        let m = metrics
            .get(&decl.id)
            .ok_or_else(|| Error::UnknownNode(decl.id.clone()))?;
        match state {
            NodeState::Compute => total += m.compute_ms,
            NodeState::Load => match m.load_ms {
                LoadTime::Finite(ms) => total += ms,
                LoadTime::Unavailable => return Err(Error::LoadUnavailable(decl.id.clone())),
            },
            NodeState::Prune => {}
        }
    }
    Ok(total)
}

/// A feasibility violation found by [`check_plan`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PlanViolation {
    /// A node whose declaration changed must be recomputed, not loaded or
    /// pruned: no stored result can be trusted for it.
    ChangedNodeNotComputed { node: NodeId, state: NodeState },
    /// A computed node consumes its parents' outputs, so no parent of a
    /// computed node may be pruned.
    ComputeWithPrunedParent { node: NodeId, parent: NodeId },
    /// The plan has no state for a node (or names an unknown one).
    MissingState(NodeId),
}

impl fmt::Display for PlanViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanViolation::ChangedNodeNotComputed { node, state } => {
                write!(f, "changed node {node} is planned as {state}, must be computed")
            }
            PlanViolation::ComputeWithPrunedParent { node, parent } => {
                write!(f, "computed node {node} depends on pruned parent {parent}")
            }
            PlanViolation::MissingState(node) => write!(f, "no state assigned for {node}"),
        }
    }
}

/// Check a state assignment for feasibility: every changed ("original") node
/// is computed, and no computed node has a pruned parent. Returns all
/// violations; an empty list means the plan is executable.
pub fn check_plan(
    dag: &WorkflowDag,
    originals: &BTreeSet<NodeId>,
    states: &BTreeMap<NodeId, NodeState>,
) -> Vec<PlanViolation> {
    let mut violations = Vec::new();
    for decl in dag.nodes() {
        let Some(&state) = states.get(&decl.id) else {
            violations.push(PlanViolation::MissingState(decl.id.clone()));
            continue;
        };
        if originals.contains(&decl.id) && state != NodeState::Compute {
            violations.push(PlanViolation::ChangedNodeNotComputed {
                node: decl.id.clone(),
                state,
            });
        }
        if state == NodeState::Compute {
            for parent in &decl.inputs {
                if states.get(parent) == Some(&NodeState::Prune) {
                    violations.push(PlanViolation::ComputeWithPrunedParent {
                        node: decl.id.clone(),
                        parent: parent.clone(),
                    });
                }
            }
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decl(id: &str, kind: OperatorKind, inputs: &[&str], is_output: bool) -> OperatorDecl {
        OperatorDecl {
            id: NodeId::from(id),
            kind,
            code: format!("{id}()"),
            inputs: inputs.iter().map(|s| NodeId::from(*s)).collect(),
            is_output,
        }
    }

    /// src -> a -> b(out), with a stray `loose` node feeding nothing.
    fn small_dag() -> WorkflowDag {
        WorkflowDag::new(
            0,
            vec![
                decl("src", OperatorKind::Source, &[], false),
                decl("a", OperatorKind::Dpr, &["src"], false),
                decl("b", OperatorKind::Li, &["a"], true),
                decl("loose", OperatorKind::Dpr, &["src"], false),
            ],
        )
        .unwrap()
    }

    fn metrics_for(dag: &WorkflowDag, compute: u64, load: LoadTime) -> BTreeMap<NodeId, OperatorMetrics> {
        dag.node_ids()
            .map(|id| {
                (
                    id.clone(),
                    OperatorMetrics {
                        compute_ms: compute,
                        load_ms: load,
                        size_bytes: 1,
                    },
                )
            })
            .collect()
    }

    #[test]
    fn test_validate_clean_graph() {
        assert!(validate(&small_dag()).is_ok());
    }

    #[test]
    fn test_validate_reports_all_findings() {
        let dag = WorkflowDag::new(
            0,
            vec![
                decl("s", OperatorKind::Source, &["ghost"], false),
                decl("x", OperatorKind::Dpr, &["s"], false),
            ],
        )
        .unwrap();
        let report = validate(&dag);
        assert!(report.issues.contains(&ValidationIssue::NoOutputs));
        assert!(report
            .issues
            .contains(&ValidationIssue::SourceWithInputs(NodeId::from("s"))));
        assert!(report.issues.contains(&ValidationIssue::UnknownInput {
            node: NodeId::from("s"),
            input: NodeId::from("ghost"),
        }));
    }

    #[test]
    fn test_validate_finds_cycle() {
        let dag = WorkflowDag::new(
            0,
            vec![
                decl("a", OperatorKind::Dpr, &["b"], true),
                decl("b", OperatorKind::Dpr, &["a"], false),
            ],
        )
        .unwrap();
        let report = validate(&dag);
        assert!(report
            .issues
            .iter()
            .any(|i| matches!(i, ValidationIssue::Cycle(nodes)
                if nodes == &[NodeId::from("a"), NodeId::from("b")])));
    }

    #[test]
    fn test_duplicate_id_rejected_at_construction() {
        let err = WorkflowDag::new(
            0,
            vec![
                decl("a", OperatorKind::Dpr, &[], true),
                decl("a", OperatorKind::Dpr, &[], false),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateNode(id) if id.as_str() == "a"));
    }

    #[test]
    fn test_topological_order_parents_first() {
        let dag = small_dag();
        let order = topological_order(&dag).unwrap();
        let pos: BTreeMap<&NodeId, usize> =
            order.iter().enumerate().map(|(i, id)| (id, i)).collect();
        for d in dag.nodes() {
            for input in &d.inputs {
                assert!(pos[input] < pos[&d.id], "{input} must precede {}", d.id);
            }
        }
    }

    #[test]
    fn test_topological_order_breaks_ties_by_id() {
        // Three independent roots come out in id order.
        let dag = WorkflowDag::new(
            0,
            vec![
                decl("c", OperatorKind::Source, &[], true),
                decl("a", OperatorKind::Source, &[], true),
                decl("b", OperatorKind::Source, &[], true),
            ],
        )
        .unwrap();
        let order = topological_order(&dag).unwrap();
        assert_eq!(order, vec![NodeId::from("a"), NodeId::from("b"), NodeId::from("c")]);
    }

    #[test]
    fn test_topological_order_cycle_error() {
        let dag = WorkflowDag::new(
            0,
            vec![
                decl("a", OperatorKind::Dpr, &["c"], true),
                decl("b", OperatorKind::Dpr, &["a"], false),
                decl("c", OperatorKind::Dpr, &["b"], false),
            ],
        )
        .unwrap();
        assert!(matches!(topological_order(&dag), Err(Error::Cycle(_))));
    }

    #[test]
    fn test_slice_drops_unreachable_work() {
        let dag = small_dag();
        let sliced = slice_to_outputs(&dag).unwrap();
        assert!(sliced.contains(&NodeId::from("src")));
        assert!(sliced.contains(&NodeId::from("a")));
        assert!(sliced.contains(&NodeId::from("b")));
        assert!(!sliced.contains(&NodeId::from("loose")));
        assert_eq!(sliced.iteration(), dag.iteration());
    }

    #[test]
    fn test_slice_is_idempotent() {
        let once = slice_to_outputs(&small_dag()).unwrap();
        let twice = slice_to_outputs(&once).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn test_slice_without_outputs_errors() {
        let dag = WorkflowDag::new(0, vec![decl("a", OperatorKind::Source, &[], false)]).unwrap();
        assert!(matches!(slice_to_outputs(&dag), Err(Error::NoOutputs)));
    }

    #[test]
    fn test_plan_cost_sums_by_state() {
        let dag = small_dag();
        let mut metrics = metrics_for(&dag, 10, LoadTime::Finite(3));
        metrics.insert(
            NodeId::from("b"),
            OperatorMetrics { compute_ms: 7, load_ms: LoadTime::Finite(2), size_bytes: 1 },
        );
        let states: BTreeMap<NodeId, NodeState> = [
            ("src", NodeState::Prune),
            ("a", NodeState::Load),
            ("b", NodeState::Compute),
            ("loose", NodeState::Prune),
        ]
        .into_iter()
        .map(|(id, s)| (NodeId::from(id), s))
        .collect();
        assert_eq!(plan_cost(&dag, &metrics, &states).unwrap(), 3 + 7);
    }

    #[test]
    fn test_plan_cost_rejects_unavailable_load() {
        let dag = small_dag();
        let metrics = metrics_for(&dag, 10, LoadTime::Unavailable);
        let states: BTreeMap<NodeId, NodeState> = dag
            .node_ids()
            .map(|id| (id.clone(), NodeState::Load))
            .collect();
        assert!(matches!(
            plan_cost(&dag, &metrics, &states),
            Err(Error::LoadUnavailable(_))
        ));
    }

    #[test]
    fn test_plan_cost_empty_assignment_is_zero() {
        let dag = small_dag();
        let metrics = metrics_for(&dag, 10, LoadTime::Finite(1));
        let states: BTreeMap<NodeId, NodeState> = dag
            .node_ids()
            .map(|id| (id.clone(), NodeState::Prune))
            .collect();
        assert_eq!(plan_cost(&dag, &metrics, &states).unwrap(), 0);
    }

    #[test]
    fn test_check_plan_accepts_feasible_plan() {
        let dag = small_dag();
        let originals: BTreeSet<NodeId> = [NodeId::from("b")].into();
        let states: BTreeMap<NodeId, NodeState> = [
            ("src", NodeState::Prune),
            ("a", NodeState::Load),
            ("b", NodeState::Compute),
            ("loose", NodeState::Prune),
        ]
        .into_iter()
        .map(|(id, s)| (NodeId::from(id), s))
        .collect();
        assert!(check_plan(&dag, &originals, &states).is_empty());
    }

    #[test]
    fn test_check_plan_flags_changed_node_not_computed() {
        let dag = small_dag();
        let originals: BTreeSet<NodeId> = [NodeId::from("a")].into();
        let states: BTreeMap<NodeId, NodeState> = [
            ("src", NodeState::Prune),
            ("a", NodeState::Load),
            ("b", NodeState::Load),
            ("loose", NodeState::Prune),
        ]
        .into_iter()
        .map(|(id, s)| (NodeId::from(id), s))
        .collect();
        let violations = check_plan(&dag, &originals, &states);
        assert!(violations.iter().any(|v| matches!(
            v,
            PlanViolation::ChangedNodeNotComputed { node, .. } if node.as_str() == "a"
        )));
    }

    #[test]
    fn test_check_plan_flags_pruned_parent_of_computed_node() {
        let dag = small_dag();
        let originals = BTreeSet::new();
        let states: BTreeMap<NodeId, NodeState> = [
            ("src", NodeState::Prune),
            ("a", NodeState::Prune),
            ("b", NodeState::Compute),
            ("loose", NodeState::Prune),
        ]
        .into_iter()
        .map(|(id, s)| (NodeId::from(id), s))
        .collect();
        let violations = check_plan(&dag, &originals, &states);
        assert_eq!(
            violations,
            vec![PlanViolation::ComputeWithPrunedParent {
                node: NodeId::from("b"),
                parent: NodeId::from("a"),
            }]
        );
    }

    #[test]
    fn test_ancestors_diamond() {
        let dag = WorkflowDag::new(
            0,
            vec![
                decl("r", OperatorKind::Source, &[], false),
                decl("l", OperatorKind::Dpr, &["r"], false),
                decl("m", OperatorKind::Dpr, &["r"], false),
                decl("j", OperatorKind::Li, &["l", "m"], true),
            ],
        )
        .unwrap();
        let anc = dag.ancestors(&NodeId::from("j")).unwrap();
        assert_eq!(
            anc,
            ["l", "m", "r"].into_iter().map(NodeId::from).collect::<BTreeSet<_>>()
        );
    }
}
