//! Randomized invariants, each checked against seeded generators so that a
//! failing case reproduces from the seed proptest reports.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reflow_core::change;
use reflow_core::dag::{check_plan, plan_cost, NodeState};
use reflow_core::engine::touch_node;
use reflow_core::flow::{cut_capacity, max_flow};
use reflow_core::workflow::{NodeProfile, Workflow};
use reflow_core::{oep, oracle, synth};
use std::collections::BTreeMap;

/// Wrap a generated graph in a workflow with made-up profiles, so the
/// change-tracking entry points that want a full workflow can run on it.
fn as_workflow(dag: &reflow_core::dag::WorkflowDag) -> Workflow {
    let profiles: BTreeMap<_, _> = dag
        .node_ids()
        .map(|id| {
            (
                id.clone(),
                NodeProfile { compute_ms: 1, size_bytes: 1, command: None },
            )
        })
        .collect();
    Workflow::new(dag.clone(), 1000, profiles)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// The min-cut planner and exhaustive search agree on cost, and both
    /// witnesses are feasible.
    #[test]
    fn prop_planner_matches_exhaustive_search(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dag = synth::random_dag(&mut rng, 9);
        let metrics = synth::random_metrics(&mut rng, &dag, 0.5);
        let chg = synth::random_change(&mut rng, &dag, 0.2);
        let plan = oep::optimal_plan(&dag, &metrics, &chg).unwrap();
        let (best, witness) = oracle::brute_force_oep(&dag, &metrics, &chg).unwrap();
        prop_assert_eq!(plan.cost_ms, best);
        prop_assert!(check_plan(&dag, &chg.original, &plan.states).is_empty());
        prop_assert!(check_plan(&dag, &chg.original, &witness).is_empty());
    }

    /// The two independently written exhaustive searches agree with each
    /// other — a bug would have to be made twice, differently, to slip by.
    #[test]
    fn prop_exhaustive_searches_agree(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dag = synth::random_dag(&mut rng, 8);
        let metrics = synth::random_metrics(&mut rng, &dag, 0.5);
        let chg = synth::random_change(&mut rng, &dag, 0.25);
        let (a, _) = oracle::brute_force_oep(&dag, &metrics, &chg).unwrap();
        let (b, _) = oracle::brute_force_oep_by_preference(&dag, &metrics, &chg).unwrap();
        prop_assert_eq!(a, b);
    }

    /// On instances too large to enumerate, the planner still produces a
    /// feasible plan whose declared cost matches its own state map.
    #[test]
    fn prop_plans_are_feasible_at_size(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dag = synth::random_dag(&mut rng, 40);
        let metrics = synth::random_metrics(&mut rng, &dag, 0.4);
        let chg = synth::random_change(&mut rng, &dag, 0.1);
        let plan = oep::optimal_plan(&dag, &metrics, &chg).unwrap();
        prop_assert!(check_plan(&dag, &chg.original, &plan.states).is_empty());
        prop_assert_eq!(plan.cost_ms, plan_cost(&dag, &metrics, &plan.states).unwrap());
        // Changed nodes always rerun; declared outputs always survive.
        for id in &chg.original {
            prop_assert_eq!(plan.states[id], NodeState::Compute);
        }
        for id in dag.outputs() {
            prop_assert_ne!(plan.states[id], NodeState::Prune);
        }
    }

    /// A graph diffed against itself has no new nodes and an equivalent for
    /// every node.
    #[test]
    fn prop_self_diff_reports_nothing_new(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dag = synth::random_dag(&mut rng, 12);
        let chg = change::diff(&dag, &dag).unwrap();
        prop_assert!(chg.original.is_empty());
        prop_assert_eq!(chg.equivalent.len(), dag.len());
    }

    /// Editing one node's code invalidates exactly that node and its
    /// descendants, nothing else.
    #[test]
    fn prop_touch_invalidates_exactly_the_cone(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dag = synth::random_dag(&mut rng, 12);
        let workflow = as_workflow(&dag);
        let victim = {
            let ids: Vec<_> = dag.node_ids().cloned().collect();
            ids[(seed as usize) % ids.len()].clone()
        };
        let touched = touch_node(&workflow, &victim, 0xBEEF, 1).unwrap();
        let chg = change::diff(&dag, &touched.dag).unwrap();

        // The victim and its descendants: nodes whose ancestors include it.
        let mut expected = std::collections::BTreeSet::from([victim.clone()]);
        for id in dag.node_ids() {
            if touched.dag.ancestors(id).unwrap().contains(&victim) {
                expected.insert(id.clone());
            }
        }
        prop_assert_eq!(&chg.original, &expected);
        for id in dag.node_ids() {
            prop_assert_eq!(chg.equivalent.contains_key(id), !expected.contains(id));
        }
    }

    /// The max-flow solver's reported cut is a real source/sink cut whose
    /// capacity equals the flow value.
    #[test]
    fn prop_max_flow_cut_is_a_certificate(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = synth::random_flow_network(&mut rng);
        let result = max_flow(&net);
        prop_assert!(result.source_side.contains(&net.source()));
        prop_assert!(!result.source_side.contains(&net.sink()));
        prop_assert_eq!(result.flow, cut_capacity(&net, &result.source_side));
    }

    /// The knapsack dynamic program and the exhaustive knapsack agree.
    #[test]
    fn prop_knapsack_dp_matches_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = synth::random_knapsack(&mut rng, 12);
        let (best, chosen) = oracle::brute_force_knapsack(&inst).unwrap();
        prop_assert_eq!(best, oracle::knapsack_dp(&inst));
        let size: u64 = chosen.iter().map(|&i| inst.sizes[i]).sum();
        let profit: u64 = chosen.iter().map(|&i| inst.profits[i]).sum();
        prop_assert!(size <= inst.budget);
        prop_assert_eq!(profit, best);
    }
}
