//! Content-addressed artifact store.
//!
//! Layout under the store root:
//!
//! ```text
//! catalog.json        index: signature -> entry (atomic rewrite on change)
//! objects/<hex-sig>   one artifact per stored signature
//! history/<t>.json    one record per completed iteration
//! ```
//!
//! An artifact is written and flushed before its index entry appears, and
//! index rewrites go through a temp file plus rename, so a crash can leave an
//! orphan object but never an entry pointing at a missing or torn artifact.
//! Orphans are swept on open.

use crate::change::Signature;
use crate::dag::NodeId;
use crate::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

const CATALOG_FILE: &str = "catalog.json";
const OBJECTS_DIR: &str = "objects";
const HISTORY_DIR: &str = "history";
const HASH_ALGO: &str = "sha256";
const CATALOG_VERSION: u32 = 1;

/// Index entry for one stored artifact.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    /// Node that produced the artifact (informational; lookups go by signature).
    pub node_id: NodeId,
    pub size_bytes: u64,
    /// Time the write took; with symmetric disk throughput this is also the
    /// expected time to read it back.
    pub load_ms: u64,
    pub created_iteration: u64,
    /// Path of the artifact, relative to the store root.
    pub artifact: String,
}

#[derive(Serialize, Deserialize)]
struct CatalogFile {
    version: u32,
    hash_algo: String,
    entries: BTreeMap<Signature, CatalogEntry>,
}

/// The persistent index of stored artifacts.
#[derive(Debug)]
pub struct MaterializationCatalog {
    root: PathBuf,
    entries: BTreeMap<Signature, CatalogEntry>,
}

impl MaterializationCatalog {
    /// Open (or initialize) a store rooted at `root`, sweeping any orphan
    /// artifacts left behind by an interrupted materialization.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join(OBJECTS_DIR))?;
        fs::create_dir_all(root.join(HISTORY_DIR))?;
        let index_path = root.join(CATALOG_FILE);
        let entries = if index_path.exists() {
            let file: CatalogFile = serde_json::from_str(&fs::read_to_string(&index_path)?)?;
            if file.hash_algo != HASH_ALGO {
                return Err(Error::Integrity {
                    signature: "<catalog>".into(),
                    reason: format!(
                        "catalog hashed with {:?}, this build uses {HASH_ALGO:?}",
                        file.hash_algo
                    ),
                });
            }
            file.entries
        } else {
            BTreeMap::new()
        };
        let mut catalog = MaterializationCatalog { root, entries };
        catalog.sweep_orphans()?;
        if !index_path.exists() {
            catalog.write_index()?;
        }
        Ok(catalog)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, sig: &Signature) -> bool {
        self.entries.contains_key(sig)
    }

    pub fn entry(&self, sig: &Signature) -> Option<&CatalogEntry> {
        self.entries.get(sig)
    }

    /// Entries in signature order.
    pub fn entries(&self) -> impl Iterator<Item = (&Signature, &CatalogEntry)> {
        self.entries.iter()
    }

    pub fn total_bytes(&self) -> u64 {
        self.entries.values().map(|e| e.size_bytes).sum()
    }

    pub fn artifact_path(&self, sig: &Signature) -> PathBuf {
        self.root.join(OBJECTS_DIR).join(sig.to_hex())
    }

    /// Store an artifact. `write` receives the destination file; the index
    /// is only updated (and rewritten atomically) after the artifact is
    /// fully on disk. Storing a signature that already exists is a no-op.
    pub fn put(
        &mut self,
        sig: Signature,
        node_id: &NodeId,
        size_bytes: u64,
        load_ms: u64,
        created_iteration: u64,
        write: impl FnOnce(&mut File) -> std::io::Result<()>,
    ) -> Result<bool> {
        if self.entries.contains_key(&sig) {
            return Ok(false);
        }
        let path = self.artifact_path(&sig);
        let mut file = File::create(&path)?;
        write(&mut file)?;
        file.sync_all()?;
        self.entries.insert(
            sig,
            CatalogEntry {
                node_id: node_id.clone(),
                size_bytes,
                load_ms,
                created_iteration,
                artifact: format!("{OBJECTS_DIR}/{}", sig.to_hex()),
            },
        );
        self.write_index()?;
        Ok(true)
    }

    /// Drop an entry and its artifact. A failed file deletion is demoted to
    /// a warning — the entry is gone either way, and the orphan sweep will
    /// retry on the next open.
    pub fn remove(&mut self, sig: &Signature) -> Result<Option<CatalogEntry>> {
        let removed = self.entries.remove(sig);
        if removed.is_some() {
            self.write_index()?;
            if let Err(err) = fs::remove_file(self.artifact_path(sig)) {
                log::warn!("could not delete artifact {sig}: {err}");
            }
        }
        Ok(removed)
    }

    /// Check that the artifact behind `sig` exists and has the indexed size.
    pub fn verify(&self, sig: &Signature) -> Result<()> {
        let entry = self.entries.get(sig).ok_or_else(|| Error::Integrity {
            signature: sig.to_hex(),
            reason: "not in catalog".into(),
        })?;
        let meta = fs::metadata(self.artifact_path(sig)).map_err(|err| Error::Integrity {
            signature: sig.to_hex(),
            reason: format!("artifact missing: {err}"),
        })?;
        if meta.len() != entry.size_bytes {
            return Err(Error::Integrity {
                signature: sig.to_hex(),
                reason: format!(
                    "artifact is {} bytes, index says {}",
                    meta.len(),
                    entry.size_bytes
                ),
            });
        }
        Ok(())
    }

    pub fn open_artifact(&self, sig: &Signature) -> Result<File> {
        self.verify(sig)?;
        Ok(File::open(self.artifact_path(sig))?)
    }

    /// Iterations with a stored history record, ascending.
    pub fn history_iterations(&self) -> Result<Vec<u64>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.root.join(HISTORY_DIR))? {
            let name = entry?.file_name();
            let name = name.to_string_lossy();
            if let Some(stem) = name.strip_suffix(".json") {
                if let Ok(t) = stem.parse::<u64>() {
                    out.push(t);
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    pub fn put_history<T: Serialize>(&self, iteration: u64, record: &T) -> Result<()> {
        let path = self.root.join(HISTORY_DIR).join(format!("{iteration}.json"));
        atomic_write(&path, serde_json::to_string_pretty(record)?.as_bytes())
    }

    pub fn get_history<T: DeserializeOwned>(&self, iteration: u64) -> Result<T> {
        let path = self.root.join(HISTORY_DIR).join(format!("{iteration}.json"));
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    fn write_index(&self) -> Result<()> {
        let file = CatalogFile {
            version: CATALOG_VERSION,
            hash_algo: HASH_ALGO.to_owned(),
            entries: self.entries.clone(),
        };
        atomic_write(
            &self.root.join(CATALOG_FILE),
            serde_json::to_string_pretty(&file)?.as_bytes(),
        )
    }

    fn sweep_orphans(&mut self) -> Result<()> {
        for dirent in fs::read_dir(self.root.join(OBJECTS_DIR))? {
            let dirent = dirent?;
            let name = dirent.file_name();
            let known = Signature::from_hex(&name.to_string_lossy())
                .map(|sig| self.entries.contains_key(&sig))
                .unwrap_or(false);
            if !known {
                log::warn!("sweeping orphan artifact {:?}", dirent.path());
                fs::remove_file(dirent.path())?;
            }
        }
        Ok(())
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut file = File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
