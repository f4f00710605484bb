//! Exact per-iteration planning: decide for every node whether to load its
//! stored result, compute it, or prune it, minimizing total predicted time.
//!
//! The problem reduces to project selection ([`crate::psp`]): each node
//! yields a `Keep` project worth `-load` (having the result available costs
//! a load, unless a compute replaces it) and a `Compute` project worth
//! `load - compute` (what running the operator saves, or costs, relative to
//! loading). `Compute` requires the node's own `Keep` plus `Keep` of every
//! parent — exactly the rule that a computed node cannot sit on pruned
//! inputs. Maximizing profit therefore minimizes plan time.
//!
//! Nodes without a stored artifact can't be loaded. They get a stand-in
//! load cost `big`, chosen larger than the total cost of computing the whole
//! graph: since computing everything is always feasible, no optimal
//! selection ever pays `big`, while for a `Keep`+`Compute` pair the `big`
//! terms cancel and the pair still prices a compute correctly. Changed
//! ("original") nodes and declared outputs are not priced into submission
//! but pinned: their projects are forced into the selection, so the
//! guarantee that changed nodes rerun and outputs survive is structural
//! rather than a tie-break.

use crate::change::ChangeSet;
use crate::dag::{
    check_plan, plan_cost, ExecutionPlan, NodeId, NodeState, OperatorMetrics, WorkflowDag,
};
use crate::psp::{solve_psp, ProjectId, PspInstance};
use crate::{Error, Result};
use std::collections::BTreeMap;

/// Stand-in load cost for nodes with no stored artifact: strictly more than
/// any real plan can cost, so the optimizer never "loads" such a node.
fn big_for(dag: &WorkflowDag, metrics: &BTreeMap<NodeId, OperatorMetrics>) -> Result<i64> {
    let mut total: i64 = 1;
    for decl in dag.nodes() {
        let m = metrics.get(&decl.id).ok_or_else(|| Error::UnknownNode(decl.id.clone()))?;
        let c = m.compute_ms as i64;
        let l = m.load_ms.finite().unwrap_or(0) as i64;
        total += c + l + (l - c).abs();
    }
    Ok(total)
}

/// Translate one iteration's planning problem into project selection.
pub fn reduce_to_psp(
    dag: &WorkflowDag,
    metrics: &BTreeMap<NodeId, OperatorMetrics>,
    change: &ChangeSet,
) -> Result<PspInstance> {
    let big = big_for(dag, metrics)?;
    let mut inst = PspInstance::default();
    for decl in dag.nodes() {
        let m = &metrics[&decl.id];
        let load = m.load_ms.finite().map(|v| v as i64).unwrap_or(big);
        let keep = ProjectId::Keep(decl.id.clone());
        let compute = ProjectId::Compute(decl.id.clone());
        inst.profits.insert(keep.clone(), -load);
        inst.profits.insert(compute.clone(), load - m.compute_ms as i64);
        inst.prerequisites.insert((compute.clone(), keep.clone()));
        for parent in &decl.inputs {
            inst.prerequisites
                .insert((compute.clone(), ProjectId::Keep(parent.clone())));
        }
        if change.is_original(&decl.id) {
            inst.forced.insert(keep.clone());
            inst.forced.insert(compute.clone());
        } else if decl.is_output {
            // Outputs must exist but may come from storage.
            inst.forced.insert(keep.clone());
        }
    }
    Ok(inst)
}

/// Read a selection back into per-node states: both projects mean compute,
/// `Keep` alone means load, neither means prune. `Compute` without `Keep`
/// cannot come out of a closed selection; seeing it indicates a solver bug.
pub fn plan_from_projects(
    dag: &WorkflowDag,
    selection: &std::collections::BTreeSet<ProjectId>,
) -> Result<BTreeMap<NodeId, NodeState>> {
    let mut states = BTreeMap::new();
    for decl in dag.nodes() {
        let keep = selection.contains(&ProjectId::Keep(decl.id.clone()));
        let compute = selection.contains(&ProjectId::Compute(decl.id.clone()));
        let state = match (keep, compute) {
            (true, true) => NodeState::Compute,
            (true, false) => NodeState::Load,
            (false, false) => NodeState::Prune,
            (false, true) => return Err(Error::SelectionNotClosed(decl.id.clone())),
        };
        states.insert(decl.id.clone(), state);
    }
    Ok(states)
}

/// Compute the optimal plan for one iteration of a graph already sliced to
/// its outputs. The result always passes [`check_plan`]: changed nodes are
/// computed, no computed node reads a pruned parent, and outputs survive.
/// Among equal-cost plans, the one with the fewest loads and computes wins,
/// deterministically.
pub fn optimal_plan(
    dag: &WorkflowDag,
    metrics: &BTreeMap<NodeId, OperatorMetrics>,
    change: &ChangeSet,
) -> Result<ExecutionPlan> {
    let inst = reduce_to_psp(dag, metrics, change)?;
    let selection = solve_psp(&inst);
    let states = plan_from_projects(dag, &selection)?;
    let cost_ms = plan_cost(dag, metrics, &states)?;
    debug_assert_eq!(
        cost_ms as i64,
        -inst.profit_of(&selection),
        "selected profit must mirror plan cost"
    );
    debug_assert!(
        check_plan(dag, &change.original, &states).is_empty(),
        "planner produced an infeasible plan"
    );
    Ok(ExecutionPlan { states, cost_ms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::{LoadTime, OperatorDecl, OperatorKind};
    use std::collections::{BTreeMap, BTreeSet};

    fn decl(id: &str, inputs: &[&str], is_output: bool) -> OperatorDecl {
        OperatorDecl {
            id: NodeId::from(id),
            kind: OperatorKind::Dpr,
            code: format!("{id}()"),
            inputs: inputs.iter().map(|s| NodeId::from(*s)).collect(),
            is_output,
        }
    }

    fn metric(compute: u64, load: LoadTime) -> OperatorMetrics {
        OperatorMetrics { compute_ms: compute, load_ms: load, size_bytes: 1 }
    }

    fn no_changes() -> ChangeSet {
        ChangeSet::default()
    }

    fn originals(ids: &[&str]) -> ChangeSet {
        ChangeSet {
            original: ids.iter().map(|s| NodeId::from(*s)).collect(),
            equivalent: BTreeMap::new(),
        }
    }

    #[test]
    fn test_reduce_prices_one_node() {
        let dag = WorkflowDag::new(0, vec![decl("n", &[], false)]).unwrap();
        let metrics = BTreeMap::from([(NodeId::from("n"), metric(10, LoadTime::Finite(4)))]);
        let inst = reduce_to_psp(&dag, &metrics, &no_changes()).unwrap();
        assert_eq!(inst.profits[&ProjectId::Keep(NodeId::from("n"))], -4);
        assert_eq!(inst.profits[&ProjectId::Compute(NodeId::from("n"))], 4 - 10);
        assert_eq!(inst.prerequisites.len(), 1);
        assert!(inst.forced.is_empty());
    }

    #[test]
    fn test_reduce_prices_unavailable_load_above_any_plan() {
        let dag = WorkflowDag::new(0, vec![decl("n", &[], false)]).unwrap();
        let metrics = BTreeMap::from([(NodeId::from("n"), metric(10, LoadTime::Unavailable))]);
        let inst = reduce_to_psp(&dag, &metrics, &no_changes()).unwrap();
        // big = 1 + (c + 0 + |0 - c|) = 1 + 20 = 21
        assert_eq!(inst.profits[&ProjectId::Keep(NodeId::from("n"))], -21);
        assert_eq!(inst.profits[&ProjectId::Compute(NodeId::from("n"))], 21 - 10);
    }

    #[test]
    fn test_reduce_emits_two_projects_per_node_and_pair_per_edge() {
        let dag = WorkflowDag::new(
            0,
            vec![
                decl("a", &[], false),
                decl("b", &[], false),
                decl("c", &["a", "b"], false),
                decl("d", &["c"], true),
            ],
        )
        .unwrap();
        let metrics: BTreeMap<NodeId, OperatorMetrics> = dag
            .node_ids()
            .map(|id| (id.clone(), metric(5, LoadTime::Finite(2))))
            .collect();
        let inst = reduce_to_psp(&dag, &metrics, &no_changes()).unwrap();
        assert_eq!(inst.profits.len(), 2 * 4);
        // One self pair per node plus one pair per edge.
        assert_eq!(inst.prerequisites.len(), 4 + 3);
    }

    #[test]
    fn test_reduce_forces_changed_nodes_and_outputs() {
        let dag =
            WorkflowDag::new(0, vec![decl("a", &[], false), decl("b", &["a"], true)]).unwrap();
        let metrics: BTreeMap<NodeId, OperatorMetrics> = dag
            .node_ids()
            .map(|id| (id.clone(), metric(5, LoadTime::Finite(2))))
            .collect();
        let inst = reduce_to_psp(&dag, &metrics, &originals(&["a"])).unwrap();
        assert!(inst.forced.contains(&ProjectId::Keep(NodeId::from("a"))));
        assert!(inst.forced.contains(&ProjectId::Compute(NodeId::from("a"))));
        assert!(inst.forced.contains(&ProjectId::Keep(NodeId::from("b"))));
        assert!(!inst.forced.contains(&ProjectId::Compute(NodeId::from("b"))));
    }

    #[test]
    fn test_plan_from_projects_maps_states() {
        let dag = WorkflowDag::new(
            0,
            vec![decl("a", &[], false), decl("b", &["a"], false), decl("c", &["b"], true)],
        )
        .unwrap();
        let selection = BTreeSet::from([
            ProjectId::Keep(NodeId::from("b")),
            ProjectId::Keep(NodeId::from("c")),
            ProjectId::Compute(NodeId::from("c")),
        ]);
        let states = plan_from_projects(&dag, &selection).unwrap();
        assert_eq!(states[&NodeId::from("a")], NodeState::Prune);
        assert_eq!(states[&NodeId::from("b")], NodeState::Load);
        assert_eq!(states[&NodeId::from("c")], NodeState::Compute);
    }

    #[test]
    fn test_plan_from_projects_rejects_unclosed_selection() {
        let dag = WorkflowDag::new(0, vec![decl("a", &[], true)]).unwrap();
        let selection = BTreeSet::from([ProjectId::Compute(NodeId::from("a"))]);
        assert!(matches!(
            plan_from_projects(&dag, &selection),
            Err(Error::SelectionNotClosed(_))
        ));
    }

    #[test]
    fn test_plan_computes_single_changed_node() {
        let dag = WorkflowDag::new(0, vec![decl("n", &[], true)]).unwrap();
        let metrics = BTreeMap::from([(NodeId::from("n"), metric(5, LoadTime::Unavailable))]);
        let plan = optimal_plan(&dag, &metrics, &originals(&["n"])).unwrap();
        assert_eq!(plan.states[&NodeId::from("n")], NodeState::Compute);
        assert_eq!(plan.cost_ms, 5);
    }

    #[test]
    fn test_plan_loads_parent_of_changed_node() {
        let dag =
            WorkflowDag::new(0, vec![decl("a", &[], false), decl("b", &["a"], true)]).unwrap();
        let metrics = BTreeMap::from([
            (NodeId::from("a"), metric(10, LoadTime::Finite(3))),
            (NodeId::from("b"), metric(2, LoadTime::Unavailable)),
        ]);
        let plan = optimal_plan(&dag, &metrics, &originals(&["b"])).unwrap();
        assert_eq!(plan.states[&NodeId::from("a")], NodeState::Load);
        assert_eq!(plan.states[&NodeId::from("b")], NodeState::Compute);
        assert_eq!(plan.cost_ms, 3 + 2);
    }

    #[test]
    fn test_plan_prunes_upstream_of_loaded_output() {
        let dag =
            WorkflowDag::new(0, vec![decl("a", &[], false), decl("b", &["a"], true)]).unwrap();
        let metrics = BTreeMap::from([
            (NodeId::from("a"), metric(10, LoadTime::Finite(2))),
            (NodeId::from("b"), metric(10, LoadTime::Finite(1))),
        ]);
        let plan = optimal_plan(&dag, &metrics, &no_changes()).unwrap();
        assert_eq!(plan.states[&NodeId::from("a")], NodeState::Prune);
        assert_eq!(plan.states[&NodeId::from("b")], NodeState::Load);
        assert_eq!(plan.cost_ms, 1);
    }

    #[test]
    fn test_plan_computes_unavailable_dependency_of_changed_node() {
        let dag =
            WorkflowDag::new(0, vec![decl("a", &[], false), decl("b", &["a"], true)]).unwrap();
        let metrics = BTreeMap::from([
            (NodeId::from("a"), metric(4, LoadTime::Unavailable)),
            (NodeId::from("b"), metric(2, LoadTime::Unavailable)),
        ]);
        let plan = optimal_plan(&dag, &metrics, &originals(&["b"])).unwrap();
        assert_eq!(plan.states[&NodeId::from("a")], NodeState::Compute);
        assert_eq!(plan.states[&NodeId::from("b")], NodeState::Compute);
        assert_eq!(plan.cost_ms, 6);
    }

    #[test]
    fn test_equal_cost_tie_prefers_load_over_compute() {
        // Load and compute both cost 5; the smaller selection (load) wins.
        let dag = WorkflowDag::new(0, vec![decl("n", &[], true)]).unwrap();
        let metrics = BTreeMap::from([(NodeId::from("n"), metric(5, LoadTime::Finite(5)))]);
        let plan = optimal_plan(&dag, &metrics, &no_changes()).unwrap();
        assert_eq!(plan.states[&NodeId::from("n")], NodeState::Load);
    }

    #[test]
    fn test_plan_is_deterministic() {
        let dag = WorkflowDag::new(
            0,
            vec![
                decl("a", &[], false),
                decl("b", &["a"], false),
                decl("c", &["a"], false),
                decl("d", &["b", "c"], true),
            ],
        )
        .unwrap();
        let metrics: BTreeMap<NodeId, OperatorMetrics> = dag
            .node_ids()
            .map(|id| (id.clone(), metric(7, LoadTime::Finite(7))))
            .collect();
        let first = optimal_plan(&dag, &metrics, &no_changes()).unwrap();
        let second = optimal_plan(&dag, &metrics, &no_changes()).unwrap();
        assert_eq!(first, second);
    }
}
