//! Change detection across workflow iterations.
//!
//! Every node gets a Merkle-style signature: a digest of its own code plus
//! the signatures of its inputs, in declared order. Two nodes with equal
//! signatures produce identical results (assuming deterministic operators),
//! so a stored artifact keyed by signature can stand in for any node that
//! hashes to it — across iterations, and even across renames. The scheme
//! errs on the safe side: textually different but semantically equal code
//! (`a + b` vs `b + a`) hashes differently and is conservatively treated as
//! changed, which costs a recompute but never a wrong reuse.

use crate::dag::{LoadTime, NodeId, OperatorDecl, OperatorKind, OperatorMetrics, WorkflowDag};
use crate::store::MaterializationCatalog;
use crate::workflow::Workflow;
use crate::{Error, Result};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// 256-bit node signature, rendered as lowercase hex.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Signature([u8; 32]);

impl Signature {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Signature(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(text: &str) -> Option<Self> {
        let bytes = hex::decode(text).ok()?;
        let arr: [u8; 32] = bytes.try_into().ok()?;
        Some(Signature(arr))
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sig:{}", &self.to_hex()[..12])
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Signature::from_hex(&text)
            .ok_or_else(|| D::Error::custom(format!("bad signature {text:?}")))
    }
}

/// Signature of one node given its parents' signatures, which must be in the
/// node's declared input order — input order is part of a node's meaning.
/// Code and parent list are length-prefixed so distinct inputs can never
/// collide by concatenation.
pub fn signature(decl: &OperatorDecl, parent_sigs: &[Signature]) -> Signature {
    let mut hasher = Sha256::new();
    hasher.update((decl.code.len() as u64).to_le_bytes());
    hasher.update(decl.code.as_bytes());
    hasher.update((parent_sigs.len() as u64).to_le_bytes());
    for sig in parent_sigs {
        hasher.update(sig.as_bytes());
    }
    Signature(hasher.finalize().into())
}

/// Signatures of every node in the graph, computed parents-first.
pub fn signatures(dag: &WorkflowDag) -> Result<BTreeMap<NodeId, Signature>> {
    let order = crate::dag::topological_order(dag)?;
    let mut sigs: BTreeMap<NodeId, Signature> = BTreeMap::new();
    for id in order {
        let decl = dag.node(&id).expect("topological order only yields known nodes");
        let parent_sigs: Vec<Signature> = decl
            .inputs
            .iter()
            .map(|input| {
                sigs.get(input)
                    .copied()
                    .ok_or_else(|| Error::UnknownNode(input.clone()))
            })
            .collect::<Result<_>>()?;
        sigs.insert(id, signature(decl, &parent_sigs));
    }
    Ok(sigs)
}

/// How the nodes of one iteration relate to the previous one. `original`
/// nodes have no equivalent in the prior version and must be recomputed;
/// `equivalent` nodes carry the signature under which a prior result (if
/// stored) can be found. Together the two cover every node of the new graph.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeSet {
    pub original: BTreeSet<NodeId>,
    pub equivalent: BTreeMap<NodeId, Signature>,
}

impl ChangeSet {
    pub fn is_original(&self, id: &NodeId) -> bool {
        self.original.contains(id)
    }

    /// A change set with nothing marked original and no known equivalences —
    /// the right input when planning a hypothetical future iteration.
    pub fn empty_for(dag: &WorkflowDag) -> Result<ChangeSet> {
        let sigs = signatures(dag)?;
        Ok(ChangeSet { original: BTreeSet::new(), equivalent: sigs })
    }
}

/// Compare two workflow versions. A node of `next` is original exactly when
/// its signature appears nowhere in `prev` — matching is by content, not by
/// node id, so a renamed but unmodified node still counts as equivalent.
/// Because signatures fold in parent signatures, a change anywhere taints
/// every fresh descendant.
pub fn diff(prev: &WorkflowDag, next: &WorkflowDag) -> Result<ChangeSet> {
    let prev_sigs: BTreeSet<Signature> = signatures(prev)?.into_values().collect();
    diff_against(&prev_sigs, next)
}

/// [`diff`] against a stored signature set rather than a live graph.
pub fn diff_against(prev_sigs: &BTreeSet<Signature>, next: &WorkflowDag) -> Result<ChangeSet> {
    let next_sigs = signatures(next)?;
    let mut change = ChangeSet::default();
    for (id, sig) in next_sigs {
        if prev_sigs.contains(&sig) {
            change.equivalent.insert(id, sig);
        } else {
            change.original.insert(id);
        }
    }
    Ok(change)
}

/// Build the per-node cost model for planning one iteration.
///
/// Compute times and output sizes come from the declared profiles. Load
/// times are resolved as:
///
/// * original nodes: unavailable — a changed node may never be served from
///   storage, whatever the catalog holds;
/// * source nodes: loading means re-reading the external input, which is the
///   same work as computing, so load equals compute;
/// * nodes with a cataloged equivalent artifact: stored size divided by disk
///   throughput, rounded up to a whole millisecond;
/// * everything else: unavailable.
///
/// A catalog entry whose artifact fails verification is treated as absent
/// (with a warning) rather than trusted.
pub fn resolve_load_times(
    workflow: &Workflow,
    change: &ChangeSet,
    catalog: &MaterializationCatalog,
) -> Result<BTreeMap<NodeId, OperatorMetrics>> {
    let speed = workflow.disk_read_bytes_per_ms.max(1);
    let mut metrics = BTreeMap::new();
    for decl in workflow.dag.nodes() {
        let profile = workflow.profile(&decl.id)?;
        let load_ms = if change.is_original(&decl.id) {
            LoadTime::Unavailable
        } else if decl.kind == OperatorKind::Source {
            LoadTime::Finite(profile.compute_ms)
        } else if let Some(sig) = change.equivalent.get(&decl.id) {
            match catalog.entry(sig) {
                Some(entry) => match catalog.verify(sig) {
                    Ok(()) => LoadTime::Finite(div_ceil(entry.size_bytes, speed)),
                    Err(err) => {
                        log::warn!("ignoring stored artifact for {}: {err}", decl.id);
                        LoadTime::Unavailable
                    }
                },
                None => LoadTime::Unavailable,
            }
        } else {
            LoadTime::Unavailable
        };
        metrics.insert(
            decl.id.clone(),
            OperatorMetrics {
                compute_ms: profile.compute_ms,
                load_ms,
                size_bytes: profile.size_bytes,
            },
        );
    }
    Ok(metrics)
}

fn div_ceil(num: u64, den: u64) -> u64 {
    num / den + u64::from(num % den != 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::OperatorKind;

    fn decl(id: &str, code: &str, inputs: &[&str]) -> OperatorDecl {
        OperatorDecl {
            id: NodeId::from(id),
            kind: if inputs.is_empty() { OperatorKind::Source } else { OperatorKind::Dpr },
            code: code.to_owned(),
            inputs: inputs.iter().map(|s| NodeId::from(*s)).collect(),
            is_output: false,
        }
    }

    fn chain(codes: &[(&str, &str)]) -> WorkflowDag {
        let mut decls = Vec::new();
        let mut prev: Option<String> = None;
        for (id, code) in codes {
            let inputs: Vec<&str> = prev.iter().map(|s| s.as_str()).collect();
            let mut d = decl(id, code, &inputs);
            d.is_output = false;
            decls.push(d);
            prev = Some((*id).to_owned());
        }
        if let Some(last) = decls.last_mut() {
            last.is_output = true;
        }
        WorkflowDag::new(0, decls).unwrap()
    }

    #[test]
    fn test_signature_is_deterministic() {
        let d = decl("x", "sum(a, b)", &[]);
        assert_eq!(signature(&d, &[]), signature(&d, &[]));
    }

    #[test]
    fn test_commuted_code_hashes_differently() {
        // `a + b` and `b + a` compute the same thing, but the tracker may
        // not assume so; a false "changed" is safe, a false "same" is not.
        let left = decl("x", "a + b", &[]);
        let right = decl("x", "b + a", &[]);
        assert_ne!(signature(&left, &[]), signature(&right, &[]));
    }

    #[test]
    fn test_parent_change_propagates_to_child() {
        let before = chain(&[("a", "read()"), ("b", "clean(a)")]);
        let after = chain(&[("a", "read_v2()"), ("b", "clean(a)")]);
        let sig_before = signatures(&before).unwrap();
        let sig_after = signatures(&after).unwrap();
        assert_ne!(sig_before[&NodeId::from("b")], sig_after[&NodeId::from("b")]);
    }

    #[test]
    fn test_input_order_matters() {
        let join = decl("join", "merge(l, r)", &["l", "r"]);
        let left = signature(&decl("l", "l()", &[]), &[]);
        let right = signature(&decl("r", "r()", &[]), &[]);
        assert_ne!(signature(&join, &[left, right]), signature(&join, &[right, left]));
    }

    #[test]
    fn test_diff_identical_graphs_has_no_originals() {
        let dag = chain(&[("a", "read()"), ("b", "clean(a)"), ("c", "model(b)")]);
        let change = diff(&dag, &dag).unwrap();
        assert!(change.original.is_empty());
        assert_eq!(change.equivalent.len(), dag.len());
    }

    #[test]
    fn test_diff_marks_node_and_descendants_original() {
        let prev = chain(&[("a", "read()"), ("b", "clean(a)"), ("c", "model(b)")]);
        let next = chain(&[("a", "read()"), ("b", "clean_v2(a)"), ("c", "model(b)")]);
        let change = diff(&prev, &next).unwrap();
        assert_eq!(
            change.original,
            ["b", "c"].into_iter().map(NodeId::from).collect::<BTreeSet<_>>()
        );
        assert!(change.equivalent.contains_key(&NodeId::from("a")));
    }

    #[test]
    fn test_diff_added_node_is_original() {
        let prev = chain(&[("a", "read()"), ("c", "model(a)")]);
        let next = chain(&[("a", "read()"), ("b", "clean(a)"), ("c", "model(b)")]);
        let change = diff(&prev, &next).unwrap();
        assert!(change.is_original(&NodeId::from("b")));
        // `c` now reads `b`, so its signature moved too.
        assert!(change.is_original(&NodeId::from("c")));
    }

    #[test]
    fn test_diff_matches_renamed_node_by_content() {
        let prev = chain(&[("a", "read()"), ("b", "clean(a)")]);
        let next = chain(&[("a", "read()"), ("b2", "clean(a)")]);
        let change = diff(&prev, &next).unwrap();
        assert!(change.original.is_empty());
        assert!(change.equivalent.contains_key(&NodeId::from("b2")));
    }

    mod resolve {
        use super::*;
        use crate::store::MaterializationCatalog;
        use crate::workflow::{NodeProfile, Workflow};

        fn workflow() -> Workflow {
            let dag = WorkflowDag::new(
                0,
                vec![
                    decl("raw", "read()", &[]),
                    decl("clean", "clean(raw)", &["raw"]),
                    {
                        let mut d = decl("model", "fit(clean)", &["clean"]);
                        d.is_output = true;
                        d
                    },
                ],
            )
            .unwrap();
            let profiles = [
                ("raw", NodeProfile { compute_ms: 7, size_bytes: 100, command: None }),
                ("clean", NodeProfile { compute_ms: 40, size_bytes: 2500, command: None }),
                ("model", NodeProfile { compute_ms: 90, size_bytes: 10, command: None }),
            ]
            .into_iter()
            .map(|(id, p)| (NodeId::from(id), p))
            .collect();
            Workflow::new(dag, 1000, profiles)
        }

        #[test]
        fn test_source_load_equals_compute() {
            let wf = workflow();
            let change = ChangeSet::empty_for(&wf.dag).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let catalog = MaterializationCatalog::open(dir.path()).unwrap();
            let metrics = resolve_load_times(&wf, &change, &catalog).unwrap();
            assert_eq!(metrics[&NodeId::from("raw")].load_ms, LoadTime::Finite(7));
        }

        #[test]
        fn test_original_node_never_loadable() {
            let wf = workflow();
            let mut change = ChangeSet::empty_for(&wf.dag).unwrap();
            // Mark everything original, as on a first-ever run.
            for id in wf.dag.node_ids() {
                change.equivalent.remove(id);
                change.original.insert(id.clone());
            }
            let dir = tempfile::tempdir().unwrap();
            let mut catalog = MaterializationCatalog::open(dir.path()).unwrap();
            // Even a stored artifact under the current signature must be ignored.
            let sig = signatures(&wf.dag).unwrap()[&NodeId::from("clean")];
            catalog
                .put(sig, &NodeId::from("clean"), 2500, 3, 0, |w| {
                    std::io::Write::write_all(w, &vec![0u8; 2500])
                })
                .unwrap();
            let metrics = resolve_load_times(&wf, &change, &catalog).unwrap();
            for id in wf.dag.node_ids() {
                assert_eq!(metrics[id].load_ms, LoadTime::Unavailable, "{id}");
            }
        }

        #[test]
        fn test_cataloged_node_load_time_from_stored_size() {
            let wf = workflow();
            let change = ChangeSet::empty_for(&wf.dag).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let mut catalog = MaterializationCatalog::open(dir.path()).unwrap();
            let sig = change.equivalent[&NodeId::from("clean")];
            catalog
                .put(sig, &NodeId::from("clean"), 2500, 3, 0, |w| {
                    std::io::Write::write_all(w, &vec![0u8; 2500])
                })
                .unwrap();
            let metrics = resolve_load_times(&wf, &change, &catalog).unwrap();
            // ceil(2500 bytes / 1000 bytes-per-ms) = 3 ms
            assert_eq!(metrics[&NodeId::from("clean")].load_ms, LoadTime::Finite(3));
            // Nothing stored for the model: not loadable.
            assert_eq!(metrics[&NodeId::from("model")].load_ms, LoadTime::Unavailable);
        }

        #[test]
        fn test_missing_artifact_treated_as_absent() {
            let wf = workflow();
            let change = ChangeSet::empty_for(&wf.dag).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let mut catalog = MaterializationCatalog::open(dir.path()).unwrap();
            let sig = change.equivalent[&NodeId::from("clean")];
            catalog
                .put(sig, &NodeId::from("clean"), 2500, 3, 0, |w| {
                    std::io::Write::write_all(w, &vec![0u8; 2500])
                })
                .unwrap();
            std::fs::remove_file(catalog.artifact_path(&sig)).unwrap();
            let metrics = resolve_load_times(&wf, &change, &catalog).unwrap();
            assert_eq!(metrics[&NodeId::from("clean")].load_ms, LoadTime::Unavailable);
        }
    }
}
