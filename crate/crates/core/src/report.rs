//! Session reports: one row per iteration, rendered as CSV and JSON.
//!
//! Rows are derived from the persisted iteration records, so a report can be
//! rebuilt from a store at any time. State fractions are kept as exact
//! rationals ("2/5", never 0.4) so rows are byte-stable and sums come out
//! exact; both renderers emit identical bytes for identical histories.

use crate::dag::NodeState;
use crate::engine::IterationRecord;
use crate::store::MaterializationCatalog;
use crate::Result;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

/// Header comment identifying the CSV dialect.
pub const CSV_HEADER: &str = "# reflow-report v1";

const CSV_COLUMNS: &str = "iteration,type,plan_cost_ms,realized_run_ms,mat_write_ms,\
cumulative_ms,storage_bytes,nodes,loaded,computed,pruned,\
load_fraction,compute_fraction,prune_fraction";

/// An exact fraction `num/den`, deliberately not reduced: the denominator
/// stays the node count, so fractions from one row share it and sum to
/// exactly one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        let (num, den) = text
            .split_once('/')
            .ok_or_else(|| D::Error::custom(format!("bad fraction {text:?}")))?;
        Ok(Fraction {
            num: num.parse().map_err(D::Error::custom)?,
            den: den.parse().map_err(D::Error::custom)?,
        })
    }
}

/// One report row, summarizing one iteration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRow {
    pub iteration: u64,
    pub iteration_type: String,
    pub plan_cost_ms: u64,
    pub realized_run_ms: u64,
    pub mat_write_ms: u64,
    pub cumulative_ms: u64,
    pub storage_bytes: u64,
    pub nodes: u64,
    pub loaded: u64,
    pub computed: u64,
    pub pruned: u64,
    pub load_fraction: Fraction,
    pub compute_fraction: Fraction,
    pub prune_fraction: Fraction,
}

impl ReportRow {
    pub fn from_record(record: &IterationRecord) -> Self {
        let count = |state: NodeState| -> u64 {
            record.plan_states.values().filter(|s| **s == state).count() as u64
        };
        let nodes = record.plan_states.len() as u64;
        let (loaded, computed, pruned) =
            (count(NodeState::Load), count(NodeState::Compute), count(NodeState::Prune));
        ReportRow {
            iteration: record.iteration,
            iteration_type: record.iteration_type.clone(),
            plan_cost_ms: record.predicted_cost_ms,
            realized_run_ms: record.realized_run_ms,
            mat_write_ms: record.mat_write_ms,
            cumulative_ms: record.cumulative_ms,
            storage_bytes: record.storage_bytes,
            nodes,
            loaded,
            computed,
            pruned,
            load_fraction: Fraction { num: loaded, den: nodes },
            compute_fraction: Fraction { num: computed, den: nodes },
            prune_fraction: Fraction { num: pruned, den: nodes },
        }
    }
}

pub fn rows_from_records(records: &[IterationRecord]) -> Vec<ReportRow> {
    records.iter().map(ReportRow::from_record).collect()
}

/// Rebuild report rows from the iteration records persisted in a store.
pub fn rows_from_store(store: &MaterializationCatalog) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for t in store.history_iterations()? {
        let record: IterationRecord = store.get_history(t)?;
        rows.push(ReportRow::from_record(&record));
    }
    Ok(rows)
}

/// Render rows as CSV. Iteration-type tokens never contain commas or quotes,
/// so no escaping is needed and output is byte-stable.
pub fn render_csv(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    out.push_str(CSV_COLUMNS);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.iteration,
            r.iteration_type,
            r.plan_cost_ms,
            r.realized_run_ms,
            r.mat_write_ms,
            r.cumulative_ms,
            r.storage_bytes,
            r.nodes,
            r.loaded,
            r.computed,
            r.pruned,
            r.load_fraction,
            r.compute_fraction,
            r.prune_fraction
        ));
    }
    out
}

/// Render rows as pretty-printed JSON (a mirror of the CSV content).
pub fn render_json(rows: &[ReportRow]) -> String {
    serde_json::to_string_pretty(rows).expect("report serialization cannot fail")
}
