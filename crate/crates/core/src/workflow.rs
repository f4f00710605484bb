//! On-disk workflow description: the graph plus the per-node execution
//! profile (declared compute time and output size) used by the simulated
//! executor and by load-time projection.
//!
//! The format is strict JSON — unknown fields are rejected so that typos in
//! hand-written workflows fail loudly instead of silently changing behavior.

use crate::dag::{NodeId, OperatorDecl, OperatorKind, WorkflowDag};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Declared execution profile of one node: how long the operator takes to
/// run and how large its output is. `command` is only used by the process
/// executor; the simulated executor replays the declared numbers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeProfile {
    pub compute_ms: u64,
    pub size_bytes: u64,
    pub command: Option<String>,
}

/// A parsed workflow file: the DAG, disk throughput for load-time
/// projection, and each node's execution profile.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Workflow {
    pub dag: WorkflowDag,
    pub disk_read_bytes_per_ms: u64,
    pub profiles: BTreeMap<NodeId, NodeProfile>,
}

impl Workflow {
    pub fn new(
        dag: WorkflowDag,
        disk_read_bytes_per_ms: u64,
        profiles: BTreeMap<NodeId, NodeProfile>,
    ) -> Self {
        Workflow { dag, disk_read_bytes_per_ms, profiles }
    }

    pub fn profile(&self, id: &NodeId) -> Result<&NodeProfile> {
        self.profiles.get(id).ok_or_else(|| Error::UnknownNode(id.clone()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: WorkflowFile = serde_json::from_str(text)?;
        file.into_workflow()
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let file = WorkflowFile {
            iteration: self.dag.iteration(),
            disk_read_bytes_per_ms: self.disk_read_bytes_per_ms,
            nodes: self
                .dag
                .nodes()
                .map(|decl| {
                    let profile = &self.profiles[&decl.id];
                    NodeFile {
                        id: decl.id.clone(),
                        kind: decl.kind,
                        code: decl.code.clone(),
                        inputs: decl.inputs.clone(),
                        is_output: decl.is_output,
                        compute_ms: profile.compute_ms,
                        size_bytes: profile.size_bytes,
                        command: profile.command.clone(),
                    }
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("workflow serialization cannot fail")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkflowFile {
    iteration: u64,
    disk_read_bytes_per_ms: u64,
    nodes: Vec<NodeFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeFile {
    id: NodeId,
    kind: OperatorKind,
    code: String,
    inputs: Vec<NodeId>,
    is_output: bool,
    compute_ms: u64,
    size_bytes: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    command: Option<String>,
}

impl WorkflowFile {
    fn into_workflow(self) -> Result<Workflow> {
        if self.disk_read_bytes_per_ms == 0 {
            return Err(Error::InvalidWorkflow(
                "disk_read_bytes_per_ms must be positive".into(),
            ));
        }
        let mut profiles = BTreeMap::new();
        let mut decls = Vec::with_capacity(self.nodes.len());
        for node in self.nodes {
            profiles.insert(
                node.id.clone(),
                NodeProfile {
                    compute_ms: node.compute_ms,
                    size_bytes: node.size_bytes,
                    command: node.command,
                },
            );
            decls.push(OperatorDecl {
                id: node.id,
                kind: node.kind,
                code: node.code,
                inputs: node.inputs,
                is_output: node.is_output,
            });
        }
        let dag = WorkflowDag::new(self.iteration, decls)?;
        Ok(Workflow::new(dag, self.disk_read_bytes_per_ms, profiles))
    }
}
