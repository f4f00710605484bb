//! Materialization choices: which freshly produced artifacts to keep on disk
//! for the next iteration, within a storage budget.
//!
//! Picking the best set is a knapsack-shaped problem, so decisions are made
//! greedily as nodes fall out of scope during a run: once nothing downstream
//! still needs a node in memory, we either persist it or let it go. A node is
//! kept when the time it took to produce (its cumulative runtime) is more
//! than twice the time it would take to load back, i.e. when one reuse
//! already pays for the write and the read.

use crate::change::{ChangeSet, Signature};
use crate::dag::{NodeId, WorkflowDag};
use crate::oep;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// How the engine treats artifacts that fall out of scope.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatPolicy {
    /// Keep a node iff its cumulative runtime strictly exceeds twice its
    /// projected load time and the budget admits it.
    StreamingHeuristic,
    /// Keep everything the budget admits, in scope order.
    AlwaysMaterialize,
    /// Keep nothing.
    NeverMaterialize,
}

impl MatPolicy {
    /// Short stable name used in reports and on the command line.
    pub fn tag(self) -> &'static str {
        match self {
            MatPolicy::StreamingHeuristic => "opt",
            MatPolicy::AlwaysMaterialize => "am",
            MatPolicy::NeverMaterialize => "nm",
        }
    }
}

/// One stored artifact as the budget sees it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub node_id: NodeId,
    pub bytes: u64,
}

/// Running account of stored bytes against the storage budget, keyed by
/// content signature. The engine keeps this in lockstep with the on-disk
/// catalog; tests drive it directly.
#[derive(Clone, Debug)]
pub struct BudgetLedger {
    budget_bytes: u64,
    used_bytes: u64,
    entries: BTreeMap<Signature, LedgerEntry>,
}

impl BudgetLedger {
    pub fn new(budget_bytes: u64) -> Self {
        BudgetLedger { budget_bytes, used_bytes: 0, entries: BTreeMap::new() }
    }

    /// Rebuild the account from already-stored artifacts.
    pub fn with_entries(
        budget_bytes: u64,
        entries: impl IntoIterator<Item = (Signature, LedgerEntry)>,
    ) -> Self {
        let mut ledger = BudgetLedger::new(budget_bytes);
        for (sig, entry) in entries {
            ledger.used_bytes += entry.bytes;
            ledger.entries.insert(sig, entry);
        }
        ledger
    }

    pub fn budget_bytes(&self) -> u64 {
        self.budget_bytes
    }

    pub fn used_bytes(&self) -> u64 {
        self.used_bytes
    }

    pub fn contains(&self, sig: &Signature) -> bool {
        self.entries.contains_key(sig)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Signature, &LedgerEntry)> {
        self.entries.iter()
    }

    pub fn fits(&self, bytes: u64) -> bool {
        self.used_bytes.saturating_add(bytes) <= self.budget_bytes
    }

    /// Record a new artifact. Returns false (and records nothing) if the
    /// budget would overflow. Double-adding a signature is a caller bug.
    pub fn admit(&mut self, sig: Signature, node_id: NodeId, bytes: u64) -> bool {
        if !self.fits(bytes) {
            return false;
        }
        let replaced = self.entries.insert(sig, LedgerEntry { node_id, bytes });
        debug_assert!(replaced.is_none(), "signature admitted twice");
        self.used_bytes += bytes;
        true
    }

    pub fn remove(&mut self, sig: &Signature) -> Option<LedgerEntry> {
        let entry = self.entries.remove(sig)?;
        self.used_bytes -= entry.bytes;
        Some(entry)
    }
}

/// Outcome of one out-of-scope decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatOutcome {
    /// Written to the store and charged to the budget.
    Store,
    /// An identical artifact is already stored; nothing to do.
    AlreadyStored,
    /// Recomputing is cheap enough that storing wouldn't pay off.
    NotWorthStoring,
    /// Worth storing, but the budget has no room left.
    OverBudget,
    /// The policy never stores.
    Disabled,
}

/// One out-of-scope decision, with the numbers it was based on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatDecision {
    pub node_id: NodeId,
    pub signature: Signature,
    /// Time actually spent this run producing the node and everything it
    /// depended on.
    pub cumulative_ms: u64,
    /// Time a future iteration would spend loading the stored artifact.
    pub projected_load_ms: u64,
    pub size_bytes: u64,
    pub outcome: MatOutcome,
}

/// Decide the fate of a node that just fell out of scope, updating the
/// ledger when the artifact is kept.
pub fn decide(
    policy: MatPolicy,
    ledger: &mut BudgetLedger,
    node_id: &NodeId,
    signature: &Signature,
    cumulative_ms: u64,
    projected_load_ms: u64,
    size_bytes: u64,
) -> MatDecision {
    let outcome = if ledger.contains(signature) {
        MatOutcome::AlreadyStored
    } else {
        match policy {
            MatPolicy::NeverMaterialize => MatOutcome::Disabled,
            MatPolicy::StreamingHeuristic
                if cumulative_ms <= projected_load_ms.saturating_mul(2) =>
            {
                MatOutcome::NotWorthStoring
            }
            MatPolicy::StreamingHeuristic | MatPolicy::AlwaysMaterialize => {
                if ledger.admit(signature.clone(), node_id.clone(), size_bytes) {
                    MatOutcome::Store
                } else {
                    MatOutcome::OverBudget
                }
            }
        }
    };
    MatDecision {
        node_id: node_id.clone(),
        signature: signature.clone(),
        cumulative_ms,
        projected_load_ms,
        size_bytes,
        outcome,
    }
}

/// Time actually spent this run producing `node`: its own realized time plus
/// the realized time of every ancestor, each counted once. Nodes without a
/// realized entry (pruned, or reused for free) contribute nothing.
pub fn cumulative_runtime(
    dag: &WorkflowDag,
    realized_ms: &BTreeMap<NodeId, u64>,
    node: &NodeId,
) -> Result<u64> {
    let mut total = realized_ms.get(node).copied().unwrap_or(0);
    for ancestor in &dag.ancestors(node)? {
        total += realized_ms.get(ancestor).copied().unwrap_or(0);
    }
    Ok(total)
}

/// Projected time to read (or write) `size_bytes` at `bytes_per_ms`,
/// rounded up to a whole millisecond.
pub fn projected_load_ms(size_bytes: u64, bytes_per_ms: u64) -> u64 {
    let speed = bytes_per_ms.max(1);
    size_bytes / speed + u64::from(size_bytes % speed != 0)
}

/// Total cost of keeping exactly `chosen`: the time to write those artifacts
/// now plus the optimal plan cost of an identical next iteration that can
/// load them back. This is the objective the exhaustive search minimizes and
/// the streaming heuristic approximates.
pub fn materialization_runtime(
    dag: &WorkflowDag,
    metrics: &BTreeMap<NodeId, crate::dag::OperatorMetrics>,
    chosen: &BTreeSet<NodeId>,
    bytes_per_ms: u64,
) -> Result<u64> {
    let mut next = metrics.clone();
    let mut write_ms = 0u64;
    for id in chosen {
        let m = next.get_mut(id).ok_or_else(|| crate::Error::UnknownNode(id.clone()))?;
        let ms = projected_load_ms(m.size_bytes, bytes_per_ms);
        m.load_ms = crate::dag::LoadTime::Finite(ms);
        write_ms += ms;
    }
    let plan = oep::optimal_plan(dag, &next, &ChangeSet::default())?;
    Ok(write_ms + plan.cost_ms)
}

/// Drop every ledger entry whose signature no longer matches any unchanged
/// node of the current workflow — artifacts of edited nodes, of deleted
/// nodes, and of stale versions can never be loaded again. Returns the
/// dropped signatures in ascending order so the caller can mirror the
/// removal in the on-disk store.
pub fn purge_stale(ledger: &mut BudgetLedger, change: &ChangeSet) -> Vec<Signature> {
    let live: BTreeSet<&Signature> = change.equivalent.values().collect();
    let stale: Vec<Signature> = ledger
        .entries()
        .filter(|(sig, _)| !live.contains(sig))
        .map(|(sig, _)| sig.clone())
        .collect();
    for sig in &stale {
        ledger.remove(sig);
    }
    stale
}
