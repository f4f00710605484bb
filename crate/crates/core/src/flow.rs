//! Maximum flow / minimum cut on small directed networks, via the
//! Edmonds-Karp algorithm (breadth-first augmenting paths, O(V·E²)).
//!
//! Two details matter to callers beyond the flow value:
//!
//! * **Determinism.** Neighbors are scanned in ascending vertex order, so
//!   equal-capacity networks always produce the same flow assignment and the
//!   same minimum cut, which keeps every downstream plan reproducible.
//! * **Unbounded arcs.** An [`Capacity::Unbounded`] arc stands for a hard
//!   constraint that a cut may never sever. Internally it gets a capacity
//!   larger than the sum of all finite capacities, so as long as any finite
//!   cut exists, no unbounded arc ever crosses the returned cut.

use std::collections::BTreeSet;

/// Arc capacity. `Finite` must be non-negative.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Capacity {
    Finite(i64),
    Unbounded,
}

/// A directed flow network with a designated source and sink.
#[derive(Clone, Debug)]
pub struct FlowNetwork {
    vertices: usize,
    source: usize,
    sink: usize,
    arcs: Vec<(usize, usize, Capacity)>,
}

impl FlowNetwork {
    pub fn new(vertices: usize, source: usize, sink: usize) -> Self {
        assert!(source < vertices && sink < vertices && source != sink);
        FlowNetwork { vertices, source, sink, arcs: Vec::new() }
    }

    pub fn add_arc(&mut self, from: usize, to: usize, cap: Capacity) {
        assert!(from < self.vertices && to < self.vertices && from != to);
        if let Capacity::Finite(c) = cap {
            assert!(c >= 0, "arc capacity must be non-negative");
        }
        self.arcs.push((from, to, cap));
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn arcs(&self) -> &[(usize, usize, Capacity)] {
        &self.arcs
    }

    /// The value every `Unbounded` arc is substituted with: one more than
    /// the sum of all finite capacities, i.e. more than any finite cut.
    pub fn unbounded_stand_in(&self) -> i64 {
        let finite_total: i64 = self
            .arcs
            .iter()
            .map(|(_, _, cap)| match cap {
                Capacity::Finite(c) => *c,
                Capacity::Unbounded => 0,
            })
            .sum();
        finite_total + 1
    }
}

/// Result of [`max_flow`]: the flow value and the source side of a minimum
/// cut (the vertices still reachable from the source in the residual graph).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaxFlowResult {
    pub flow: i64,
    pub source_side: BTreeSet<usize>,
}

struct Edge {
    to: usize,
    cap: i64,
}

/// Run Edmonds-Karp. The returned `source_side` is the unique minimal
/// minimum cut: exactly the vertices with residual capacity from the source.
pub fn max_flow(net: &FlowNetwork) -> MaxFlowResult {
    let unbounded = net.unbounded_stand_in();
    let mut edges: Vec<Edge> = Vec::with_capacity(net.arcs.len() * 2);
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); net.vertices];
    for &(from, to, cap) in &net.arcs {
        let cap = match cap {
            Capacity::Finite(c) => c,
            Capacity::Unbounded => unbounded,
        };
        adj[from].push(edges.len());
        edges.push(Edge { to, cap });
        adj[to].push(edges.len());
        edges.push(Edge { to: from, cap: 0 });
    }
    // Fixed scan order: ascending target vertex, then insertion order.
    for list in &mut adj {
        list.sort_by_key(|&i| (edges[i].to, i));
    }

    let mut flow: i64 = 0;
    loop {
        // bfs for the shortest augmenting path
        let mut prev_edge: Vec<Option<usize>> = vec![None; net.vertices];
        let mut visited = vec![false; net.vertices];
        visited[net.source] = true;
        let mut queue = std::collections::VecDeque::from([net.source]);
        'bfs: while let Some(u) = queue.pop_front() {
            for &ei in &adj[u] {
                let edge = &edges[ei];
                if edge.cap > 0 && !visited[edge.to] {
                    visited[edge.to] = true;
                    prev_edge[edge.to] = Some(ei);
                    if edge.to == net.sink {
                        break 'bfs;
                    }
                    queue.push_back(edge.to);
                }
            }
        }
        if !visited[net.sink] {
            break;
        }

        // bottleneck along the path
        let mut delta = i64::MAX;
        let mut v = net.sink;
        while v != net.source {
            let ei = prev_edge[v].expect("path reaches source");
            delta = delta.min(edges[ei].cap);
            v = edges[ei ^ 1].to;
        }

        // push the flow
        let mut v = net.sink;
        while v != net.source {
            let ei = prev_edge[v].expect("path reaches source");
            edges[ei].cap -= delta;
            edges[ei ^ 1].cap += delta;
            v = edges[ei ^ 1].to;
        }
        flow += delta;
    }

    // Residual reachability from the source gives the minimal min cut.
    let mut source_side = BTreeSet::from([net.source]);
    let mut queue = std::collections::VecDeque::from([net.source]);
    while let Some(u) = queue.pop_front() {
        for &ei in &adj[u] {
            let edge = &edges[ei];
            if edge.cap > 0 && source_side.insert(edge.to) {
                queue.push_back(edge.to);
            }
        }
    }
    MaxFlowResult { flow, source_side }
}

/// Capacity of the cut induced by `source_side` (arcs leaving the set),
/// with unbounded arcs at their stand-in value. Used to cross-check
/// max-flow = min-cut in tests.
pub fn cut_capacity(net: &FlowNetwork, source_side: &BTreeSet<usize>) -> i64 {
    let unbounded = net.unbounded_stand_in();
    net.arcs()
        .iter()
        .filter(|(from, to, _)| source_side.contains(from) && !source_side.contains(to))
        .map(|(_, _, cap)| match cap {
            Capacity::Finite(c) => *c,
            Capacity::Unbounded => unbounded,
        })
        .sum()
}
