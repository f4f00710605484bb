//! Project selection: pick a subset of projects maximizing total profit,
//! subject to prerequisite constraints ("selecting d requires selecting q")
//! and a set of forced selections.
//!
//! Solved exactly by a minimum cut: source-side projects are selected.
//! Positive-profit projects hang off the source with their profit as
//! capacity, negative-profit projects feed the sink with their loss, and a
//! prerequisite becomes an uncuttable arc from dependent to prerequisite, so
//! any finite cut respects the closure. Forced projects are tied to the
//! source with an uncuttable arc. Among equally profitable selections the
//! solver returns the unique smallest one (the residual-reachable side of
//! the cut), which downstream means: never select a project you don't need.

use crate::dag::NodeId;
use crate::flow::{self, Capacity, FlowNetwork};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// One of the two projects each workflow node contributes.
///
/// * `Keep(n)`: n is not pruned — its result exists at run time, by loading
///   if nothing else. Profit is the negated load time.
/// * `Compute(n)`: n is produced by running the operator instead of loading.
///   Profit is load minus compute (what switching away from a load saves).
///
/// Selecting `Compute` only makes sense on top of `Keep`, which is the
/// per-node prerequisite pair; a computed node needs each parent present,
/// which is the per-edge pair.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum ProjectId {
    Keep(NodeId),
    Compute(NodeId),
}

impl ProjectId {
    pub fn node(&self) -> &NodeId {
        match self {
            ProjectId::Keep(n) | ProjectId::Compute(n) => n,
        }
    }
}

impl fmt::Display for ProjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProjectId::Keep(n) => write!(f, "keep({n})"),
            ProjectId::Compute(n) => write!(f, "compute({n})"),
        }
    }
}

/// A project-selection instance. `prerequisites` holds `(dependent,
/// prerequisite)` pairs; `forced` projects must appear in any solution.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PspInstance {
    pub profits: BTreeMap<ProjectId, i64>,
    pub prerequisites: BTreeSet<(ProjectId, ProjectId)>,
    pub forced: BTreeSet<ProjectId>,
}

impl PspInstance {
    pub fn projects(&self) -> impl Iterator<Item = &ProjectId> {
        self.profits.keys()
    }

    pub fn profit_of(&self, selection: &BTreeSet<ProjectId>) -> i64 {
        selection.iter().map(|p| self.profits.get(p).copied().unwrap_or(0)).sum()
    }

    /// Does `selection` contain every prerequisite of its members and every
    /// forced project?
    pub fn is_closed(&self, selection: &BTreeSet<ProjectId>) -> bool {
        self.forced.iter().all(|p| selection.contains(p))
            && self
                .prerequisites
                .iter()
                .all(|(dep, pre)| !selection.contains(dep) || selection.contains(pre))
    }
}

/// Build the cut network for an instance. Returned alongside the mapping
/// from project to vertex (source is 0, sink is 1, projects follow in
/// sorted order) so the same construction serves solving and inspection.
pub fn build_network(inst: &PspInstance) -> (FlowNetwork, BTreeMap<ProjectId, usize>) {
    let index: BTreeMap<ProjectId, usize> = inst
        .profits
        .keys()
        .enumerate()
        .map(|(i, p)| (p.clone(), i + 2))
        .collect();
    let mut net = FlowNetwork::new(index.len() + 2, 0, 1);
    for (project, &profit) in &inst.profits {
        let v = index[project];
        if profit > 0 {
            net.add_arc(0, v, Capacity::Finite(profit));
        } else if profit < 0 {
            net.add_arc(v, 1, Capacity::Finite(-profit));
        }
    }
    for (dep, pre) in &inst.prerequisites {
        net.add_arc(index[dep], index[pre], Capacity::Unbounded);
    }
    for project in &inst.forced {
        net.add_arc(0, index[project], Capacity::Unbounded);
    }
    (net, index)
}

/// Solve an instance exactly. Returns the smallest maximum-profit closed
/// selection containing all forced projects.
pub fn solve_psp(inst: &PspInstance) -> BTreeSet<ProjectId> {
    let (net, index) = build_network(inst);
    let result = flow::max_flow(&net);
    let selection: BTreeSet<ProjectId> = index
        .into_iter()
        .filter(|(_, v)| result.source_side.contains(v))
        .map(|(p, _)| p)
        .collect();
    debug_assert!(inst.is_closed(&selection), "min cut produced a non-closed selection");
    selection
}

/// Deterministic text rendering of an instance and its network, for
/// inspection and byte-for-byte differential testing.
pub fn render(inst: &PspInstance) -> String {
    use std::fmt::Write;
    let mut out = String::from("psp v1\n");
    for (project, profit) in &inst.profits {
        writeln!(out, "project {project} {profit}").unwrap();
    }
    for (dep, pre) in &inst.prerequisites {
        writeln!(out, "pair {dep} {pre}").unwrap();
    }
    for project in &inst.forced {
        writeln!(out, "forced {project}").unwrap();
    }
    let (net, _) = build_network(inst);
    writeln!(
        out,
        "network vertices {} source {} sink {}",
        net.vertices(),
        net.source(),
        net.sink()
    )
    .unwrap();
    for &(from, to, cap) in net.arcs() {
        match cap {
            Capacity::Finite(c) => writeln!(out, "arc {from} {to} {c}").unwrap(),
            Capacity::Unbounded => writeln!(out, "arc {from} {to} unbounded").unwrap(),
        }
    }
    out
}
