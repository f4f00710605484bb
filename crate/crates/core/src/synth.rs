//! Seeded random instance generators for the randomized test suites and the
//! `verify` subcommand. Everything is a pure function of the caller's RNG,
//! so a fixed seed reproduces an instance exactly.

use crate::change::ChangeSet;
use crate::dag::{LoadTime, NodeId, OperatorDecl, OperatorKind, OperatorMetrics, WorkflowDag};
use crate::flow::{Capacity, FlowNetwork};
use crate::oracle::KnapsackInstance;
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// A random DAG of 1..=`max_nodes` nodes. Edges only point from lower to
/// higher index, so the graph is acyclic by construction. Nodes without
/// inputs are sources; every sink is an output (so planning always has a
/// target) and interior nodes are outputs occasionally.
pub fn random_dag(rng: &mut impl Rng, max_nodes: usize) -> WorkflowDag {
    let n = rng.gen_range(1..=max_nodes.max(1));
    let mut inputs: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut has_child = vec![false; n];
    for j in 1..n {
        for i in 0..j {
            if rng.gen_bool(0.35) {
                inputs[j].push(i);
                has_child[i] = true;
            }
        }
    }
    let kinds = [OperatorKind::Dpr, OperatorKind::Li, OperatorKind::Ppr];
    let decls: Vec<OperatorDecl> = (0..n)
        .map(|i| OperatorDecl {
            id: node_id(i),
            kind: if inputs[i].is_empty() {
                OperatorKind::Source
            } else {
                kinds[rng.gen_range(0..kinds.len())]
            },
            // Random payload so distinct instances hash differently.
            code: format!("op_{i}(seed={})", rng.gen_range(0..1_000_000u32)),
            inputs: inputs[i].iter().map(|&p| node_id(p)).collect(),
            is_output: !has_child[i] || rng.gen_bool(0.15),
        })
        .collect();
    WorkflowDag::new(0, decls).expect("generated ids are unique")
}

/// Random per-node costs: compute times 1..=100 ms, artifact sizes
/// 1..=10000 bytes, and a stored artifact (load 1..=100 ms) with probability
/// `load_availability`.
pub fn random_metrics(
    rng: &mut impl Rng,
    dag: &WorkflowDag,
    load_availability: f64,
) -> BTreeMap<NodeId, OperatorMetrics> {
    dag.node_ids()
        .map(|id| {
            let m = OperatorMetrics {
                compute_ms: rng.gen_range(1..=100),
                load_ms: if rng.gen_bool(load_availability) {
                    LoadTime::Finite(rng.gen_range(1..=100))
                } else {
                    LoadTime::Unavailable
                },
                size_bytes: rng.gen_range(1..=10_000),
            };
            (id.clone(), m)
        })
        .collect()
}

/// A random change set: each node is seeded as changed with probability
/// `seed_probability`, then the set is closed under descendants — a change
/// anywhere invalidates everything downstream, exactly as signature
/// propagation would.
pub fn random_change(rng: &mut impl Rng, dag: &WorkflowDag, seed_probability: f64) -> ChangeSet {
    let children = dag.children();
    let mut original = BTreeSet::new();
    let mut queue: VecDeque<NodeId> = VecDeque::new();
    for id in dag.node_ids() {
        if rng.gen_bool(seed_probability) {
            original.insert(id.clone());
            queue.push_back(id.clone());
        }
    }
    while let Some(id) = queue.pop_front() {
        for child in &children[&id] {
            if original.insert(child.clone()) {
                queue.push_back(child.clone());
            }
        }
    }
    ChangeSet { original, equivalent: BTreeMap::new() }
}

/// A random flow network on 2..=10 vertices (source 0, sink 1) with finite
/// arc capacities 0..=20.
pub fn random_flow_network(rng: &mut impl Rng) -> FlowNetwork {
    let vertices = rng.gen_range(2..=10);
    let mut net = FlowNetwork::new(vertices, 0, 1);
    for from in 0..vertices {
        for to in 0..vertices {
            if from != to && rng.gen_bool(0.3) {
                net.add_arc(from, to, Capacity::Finite(rng.gen_range(0..=20)));
            }
        }
    }
    net
}

/// A random knapsack instance of 0..=`max_items` items with sizes 1..=12,
/// profits 1..=20 and budget 0..=40.
pub fn random_knapsack(rng: &mut impl Rng, max_items: usize) -> KnapsackInstance {
    let n = rng.gen_range(0..=max_items);
    KnapsackInstance {
        sizes: (0..n).map(|_| rng.gen_range(1..=12)).collect(),
        profits: (0..n).map(|_| rng.gen_range(1..=20)).collect(),
        budget: rng.gen_range(0..=40),
    }
}

fn node_id(index: usize) -> NodeId {
    NodeId::new(format!("n{index:02}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::validate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn test_same_seed_same_instances() {
        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let da = random_dag(&mut a, 12);
            let db = random_dag(&mut b, 12);
            assert_eq!(da, db);
            assert_eq!(random_metrics(&mut a, &da, 0.5), random_metrics(&mut b, &db, 0.5));
            assert_eq!(random_change(&mut a, &da, 0.2), random_change(&mut b, &db, 0.2));
            assert_eq!(random_knapsack(&mut a, 12), random_knapsack(&mut b, 12));
        }
    }

    #[test]
    fn test_generated_dags_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let dag = random_dag(&mut rng, 12);
            let report = validate(&dag);
            assert!(report.is_ok(), "invalid dag: {:?}", report);
            assert!(dag.outputs().next().is_some());
        }
    }

    #[test]
    fn test_random_change_is_descendant_closed() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let dag = random_dag(&mut rng, 12);
            let change = random_change(&mut rng, &dag, 0.25);
            for decl in dag.nodes() {
                if decl.inputs.iter().any(|p| change.is_original(p)) {
                    assert!(
                        change.is_original(&decl.id),
                        "child of a changed node must be changed"
                    );
                }
            }
        }
    }
}
