//! On-disk prior store with a per-key read cache.
//!
//! Layout under the root:
//!
//! ```text
//! pairwise/<hh>/<sha256(key)>.json
//! chains/<hh>/<sha256(key)>.json
//! hyper/<hh>/<sha256(key)>.json
//! ```
//!
//! Values are rounded to nine significant digits before they are written, so
//! saving a loaded value reproduces the same bytes.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chain::PatternChainSet;
use crate::error::{Error, Result};
use crate::extract::{PairwiseRelation, RelationMeta};
use crate::hyper::{HyperKey, HyperPrior, HyperRelation, HyperStatus};
use crate::scene::Transform;

/// Rounds to nine significant digits. `-0.0` becomes `0.0`.
pub fn quantize(v: f64) -> f64 {
    if !v.is_finite() {
        return v;
    }
    let q: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

pub fn quantize_transform(t: &Transform) -> Transform {
    Transform {
        x: quantize(t.x),
        y: quantize(t.y),
        z: quantize(t.z),
        theta: quantize(t.theta),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Content hash of a relation's prior list. Chain sets record it so they can
/// be detected as stale when the relation is re-extracted.
pub fn relation_hash(relation: &PairwiseRelation) -> String {
    let priors: Vec<Transform> = relation.priors.iter().map(quantize_transform).collect();
    sha256_hex(&serde_json::to_vec(&priors).expect("transforms serialize"))
}

fn pair_key(dominant: &str, secondary: &str) -> String {
    format!("{dominant}|{secondary}")
}

// ---------------------------------------------------------------------------
// File documents

#[derive(Serialize, Deserialize)]
struct MetaDoc {
    #[serde(rename = "angleWeight")]
    angle_weight: f64,
    #[serde(rename = "rhoQ")]
    rho_q: f64,
    #[serde(rename = "deltaQ")]
    delta_q: f64,
    proximity: f64,
}

#[derive(Serialize, Deserialize)]
struct PairwiseDoc {
    dominant: String,
    secondary: String,
    meta: MetaDoc,
    priors: Vec<Transform>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ChainsDoc {
    dominant: String,
    secondary: String,
    relation_hash: String,
    chains: Vec<Vec<usize>>,
    aligned: bool,
}

#[derive(Serialize, Deserialize)]
struct SlotPoseDoc {
    slot: usize,
    x: f64,
    y: f64,
    z: f64,
    theta: f64,
}

#[derive(Serialize, Deserialize)]
struct HyperDoc {
    key: String,
    status: String,
    priors: Vec<Vec<SlotPoseDoc>>,
}

fn pairwise_doc(rel: &PairwiseRelation) -> PairwiseDoc {
    PairwiseDoc {
        dominant: rel.dominant_id.clone(),
        secondary: rel.secondary_id.clone(),
        meta: MetaDoc {
            angle_weight: quantize(rel.meta.angle_weight),
            rho_q: quantize(rel.meta.rho_quantile),
            delta_q: quantize(rel.meta.delta_quantile),
            proximity: quantize(rel.meta.proximity),
        },
        priors: rel.priors.iter().map(quantize_transform).collect(),
    }
}

fn hyper_doc(rel: &HyperRelation) -> HyperDoc {
    HyperDoc {
        key: rel.key.to_string(),
        status: rel.status.as_str().to_string(),
        priors: rel
            .priors
            .iter()
            .map(|p| {
                p.poses
                    .iter()
                    .map(|(slot, t)| {
                        let t = quantize_transform(t);
                        SlotPoseDoc {
                            slot: *slot,
                            x: t.x,
                            y: t.y,
                            z: t.z,
                            theta: t.theta,
                        }
                    })
                    .collect()
            })
            .collect(),
    }
}

fn to_bytes<T: Serialize>(doc: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(doc).expect("document serializes");
    v.push(b'\n');
    v
}

/// Serialized bytes of a relation exactly as the store writes them.
pub fn pairwise_bytes(rel: &PairwiseRelation) -> Vec<u8> {
    to_bytes(&pairwise_doc(rel))
}

pub fn hyper_bytes(rel: &HyperRelation) -> Vec<u8> {
    to_bytes(&hyper_doc(rel))
}

// ---------------------------------------------------------------------------
// Cache

/// A cache slot. The mutex doubles as the per-key writer lock and makes
/// concurrent first loads of one key share a single disk read.
type Slot<T> = Arc<Mutex<Option<Option<Arc<T>>>>>;

struct Cache<T> {
    slots: RwLock<HashMap<String, Slot<T>>>,
}

impl<T> Default for Cache<T> {
    fn default() -> Self {
        Self {
            slots: RwLock::new(HashMap::new()),
        }
    }
}

impl<T> Cache<T> {
    fn slot(&self, key: &str) -> Slot<T> {
        if let Some(s) = self.slots.read().unwrap().get(key) {
            return s.clone();
        }
        self.slots
            .write()
            .unwrap()
            .entry(key.to_string())
            .or_default()
            .clone()
    }

    fn found(&self) -> Vec<Arc<T>> {
        let slots: Vec<Slot<T>> = self.slots.read().unwrap().values().cloned().collect();
        slots
            .iter()
            .filter_map(|s| s.lock().unwrap().clone().flatten())
            .collect()
    }

    fn clear(&self) {
        self.slots.write().unwrap().clear();
    }
}

/// Result of looking up a chain set.
#[derive(Debug, Clone)]
pub enum ChainLookup {
    Found(Arc<PatternChainSet>),
    NotFound,
    /// Stored chains were built from a different version of the relation.
    Stale,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StoreCounters {
    /// Files read from disk.
    pub fs_reads: u64,
    /// `load_*` calls, cached or not.
    pub lookups: u64,
}

#[derive(Clone, Copy)]
enum Kind {
    Pairwise,
    Chains,
    Hyper,
}

impl Kind {
    fn dir(self) -> &'static str {
        match self {
            Kind::Pairwise => "pairwise",
            Kind::Chains => "chains",
            Kind::Hyper => "hyper",
        }
    }
}

/// Pairwise relations, chain sets and complete hyper-relations, persisted
/// one file per key. Safe to share between threads.
pub struct PriorStore {
    root: Option<PathBuf>,
    pairwise: Cache<PairwiseRelation>,
    chains: Cache<PatternChainSet>,
    hyper: Cache<HyperRelation>,
    fs_reads: AtomicU64,
    lookups: AtomicU64,
    tmp_counter: AtomicU64,
}

impl std::fmt::Debug for PriorStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PriorStore").field("root", &self.root).finish_non_exhaustive()
    }
}

impl PriorStore {
    /// Opens (creating if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for kind in [Kind::Pairwise, Kind::Chains, Kind::Hyper] {
            let d = root.join(kind.dir());
            fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
        Ok(Self::with_root(Some(root)))
    }

    /// A store that never touches the filesystem.
    pub fn in_memory() -> Self {
        Self::with_root(None)
    }

    fn with_root(root: Option<PathBuf>) -> Self {
        Self {
            root,
            pairwise: Cache::default(),
            chains: Cache::default(),
            hyper: Cache::default(),
            fs_reads: AtomicU64::new(0),
            lookups: AtomicU64::new(0),
            tmp_counter: AtomicU64::new(0),
        }
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn counters(&self) -> StoreCounters {
        StoreCounters {
            fs_reads: self.fs_reads.load(Ordering::Relaxed),
            lookups: self.lookups.load(Ordering::Relaxed),
        }
    }

    /// Drops every cached entry; later loads go back to disk. In-memory
    /// stores lose their contents.
    pub fn clear_cache(&self) {
        self.pairwise.clear();
        self.chains.clear();
        self.hyper.clear();
    }

    fn path_for(&self, kind: Kind, key: &str) -> Option<PathBuf> {
        let h = sha256_hex(key.as_bytes());
        self.root
            .as_ref()
            .map(|r| r.join(kind.dir()).join(&h[..2]).join(format!("{h}.json")))
    }

    fn write_file(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        let dir = path.parent().expect("store paths have a parent");
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let n = self.tmp_counter.fetch_add(1, Ordering::Relaxed);
        let tmp = dir.join(format!(".tmp-{}-{n}", std::process::id()));
        fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    fn read_file(&self, path: &Path) -> Result<Option<Vec<u8>>> {
        match fs::read(path) {
            Ok(b) => {
                self.fs_reads.fetch_add(1, Ordering::Relaxed);
                Ok(Some(b))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    fn load_cached<T>(
        &self,
        cache: &Cache<T>,
        kind: Kind,
        key: &str,
        parse: impl FnOnce(&[u8], &Path) -> Result<T>,
    ) -> Result<Option<Arc<T>>> {
        self.lookups.fetch_add(1, Ordering::Relaxed);
        let slot = cache.slot(key);
        let mut guard = slot.lock().unwrap();
        if let Some(entry) = guard.as_ref() {
            return Ok(entry.clone());
        }
        let Some(path) = self.path_for(kind, key) else {
            return Ok(None);
        };
        let value = match self.read_file(&path)? {
            Some(bytes) => Some(Arc::new(parse(&bytes, &path)?)),
            None => None,
        };
        *guard = Some(value.clone());
        Ok(value)
    }

    fn save_cached<T>(&self, cache: &Cache<T>, kind: Kind, key: &str, value: T, bytes: &[u8]) -> Result<()> {
        let slot = cache.slot(key);
        let mut guard = slot.lock().unwrap();
        if let Some(path) = self.path_for(kind, key) {
            self.write_file(&path, bytes)?;
        }
        *guard = Some(Some(Arc::new(value)));
        Ok(())
    }

    // -- pairwise ----------------------------------------------------------

    pub fn save_pairwise(&self, relation: &PairwiseRelation) -> Result<()> {
        let doc = pairwise_doc(relation);
        let bytes = to_bytes(&doc);
        let key = pair_key(&relation.dominant_id, &relation.secondary_id);
        self.save_cached(&self.pairwise, Kind::Pairwise, &key, relation_from_doc(doc), &bytes)
    }

    /// `Ok(None)` when no relation exists for the pair.
    pub fn load_pairwise(&self, dominant: &str, secondary: &str) -> Result<Option<Arc<PairwiseRelation>>> {
        let key = pair_key(dominant, secondary);
        self.load_cached(&self.pairwise, Kind::Pairwise, &key, |bytes, path| {
            let doc: PairwiseDoc = parse_doc(bytes, &key, path)?;
            if doc.dominant != dominant || doc.secondary != secondary {
                return Err(integrity(&key, path, "file belongs to another key"));
            }
            if doc.priors.is_empty() {
                return Err(integrity(&key, path, "relation has no priors"));
            }
            Ok(relation_from_doc(doc))
        })
    }

    /// Every stored pairwise key, sorted.
    pub fn pairwise_keys(&self) -> Result<Vec<(String, String)>> {
        let mut keys: Vec<(String, String)> = match &self.root {
            None => self.pairwise.found().iter().map(|r| r.key()).collect(),
            Some(_) => self
                .scan(Kind::Pairwise)?
                .into_iter()
                .map(|(bytes, path)| {
                    let doc: PairwiseDoc = parse_doc(&bytes, "?", &path)?;
                    Ok((doc.dominant, doc.secondary))
                })
                .collect::<Result<_>>()?,
        };
        keys.sort();
        keys.dedup();
        Ok(keys)
    }

    // -- chains ------------------------------------------------------------

    pub fn save_chains(&self, set: &PatternChainSet) -> Result<()> {
        let doc = ChainsDoc {
            dominant: set.dominant_id.clone(),
            secondary: set.secondary_id.clone(),
            relation_hash: set.relation_hash.clone(),
            chains: set.chains.clone(),
            aligned: set.aligned,
        };
        let key = pair_key(&set.dominant_id, &set.secondary_id);
        self.save_cached(&self.chains, Kind::Chains, &key, set.clone(), &to_bytes(&doc))
    }

    /// Looks up the chain set for a pair. `relation_hash` is the hash of the
    /// relation the caller is using; a mismatch yields [`ChainLookup::Stale`].
    pub fn load_chains(&self, dominant: &str, secondary: &str, relation_hash: &str) -> Result<ChainLookup> {
        let key = pair_key(dominant, secondary);
        let found = self.load_cached(&self.chains, Kind::Chains, &key, |bytes, path| {
            let doc: ChainsDoc = parse_doc(bytes, &key, path)?;
            if doc.dominant != dominant || doc.secondary != secondary {
                return Err(integrity(&key, path, "file belongs to another key"));
            }
            Ok(PatternChainSet {
                dominant_id: doc.dominant,
                secondary_id: doc.secondary,
                chains: doc.chains,
                relation_hash: doc.relation_hash,
                aligned: doc.aligned,
            })
        })?;
        Ok(match found {
            None => ChainLookup::NotFound,
            Some(set) if set.relation_hash != relation_hash => ChainLookup::Stale,
            Some(set) => ChainLookup::Found(set),
        })
    }

    // -- hyper -------------------------------------------------------------

    /// Persists a complete hyper-relation. Other statuses are rejected: they
    /// only live in the generating process.
    pub fn save_hyper(&self, relation: &HyperRelation) -> Result<()> {
        if relation.status != HyperStatus::Complete || relation.priors.is_empty() {
            return Err(Error::Validation(format!(
                "only complete hyper-relations are stored (key {})",
                relation.key
            )));
        }
        let doc = hyper_doc(relation);
        let bytes = to_bytes(&doc);
        let key = relation.key.to_string();
        let value = hyper_from_doc(doc, &relation.key);
        self.save_cached(&self.hyper, Kind::Hyper, &key, value, &bytes)
    }

    pub fn load_hyper(&self, key: &HyperKey) -> Result<Option<Arc<HyperRelation>>> {
        let k = key.to_string();
        self.load_cached(&self.hyper, Kind::Hyper, &k, |bytes, path| {
            let doc: HyperDoc = parse_doc(bytes, &k, path)?;
            if doc.key != k {
                return Err(integrity(&k, path, "file belongs to another key"));
            }
            if doc.status != HyperStatus::Complete.as_str() || doc.priors.is_empty() {
                return Err(integrity(&k, path, "stored hyper-relation is not complete"));
            }
            let slots = key.slot_count();
            for p in &doc.priors {
                let mut seen: Vec<usize> = p.iter().map(|s| s.slot).collect();
                seen.sort_unstable();
                if seen != (0..slots).collect::<Vec<_>>() {
                    return Err(integrity(&k, path, "prior slots do not cover the key"));
                }
            }
            Ok(hyper_from_doc(doc, key))
        })
    }

    /// Every stored hyper key string, sorted.
    pub fn hyper_keys(&self) -> Result<Vec<String>> {
        let mut keys: Vec<String> = match &self.root {
            None => self.hyper.found().iter().map(|r| r.key.to_string()).collect(),
            Some(_) => self
                .scan(Kind::Hyper)?
                .into_iter()
                .map(|(bytes, path)| Ok(parse_doc::<HyperDoc>(&bytes, "?", &path)?.key))
                .collect::<Result<_>>()?,
        };
        keys.sort();
        keys.dedup();
        Ok(keys)
    }

    fn scan(&self, kind: Kind) -> Result<Vec<(Vec<u8>, PathBuf)>> {
        let Some(root) = &self.root else {
            return Ok(Vec::new());
        };
        let dir = root.join(kind.dir());
        let mut files = Vec::new();
        let shards = match fs::read_dir(&dir) {
            Ok(r) => r,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(files),
            Err(e) => return Err(Error::io(&dir, e)),
        };
        let mut paths: Vec<PathBuf> = Vec::new();
        for shard in shards {
            let shard = shard.map_err(|e| Error::io(&dir, e))?.path();
            if !shard.is_dir() {
                continue;
            }
            for f in fs::read_dir(&shard).map_err(|e| Error::io(&shard, e))? {
                let p = f.map_err(|e| Error::io(&shard, e))?.path();
                if p.extension().is_some_and(|x| x == "json") {
                    paths.push(p);
                }
            }
        }
        paths.sort();
        for p in paths {
            if let Some(b) = self.read_file(&p)? {
                files.push((b, p));
            }
        }
        Ok(files)
    }
}

fn integrity(key: &str, path: &Path, reason: &str) -> Error {
    Error::Integrity {
        key: key.to_string(),
        location: path.display().to_string(),
        reason: reason.to_string(),
    }
}

fn parse_doc<T: for<'de> Deserialize<'de>>(bytes: &[u8], key: &str, path: &Path) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| integrity(key, path, &e.to_string()))
}

fn relation_from_doc(doc: PairwiseDoc) -> PairwiseRelation {
    PairwiseRelation {
        dominant_id: doc.dominant,
        secondary_id: doc.secondary,
        priors: doc.priors,
        meta: RelationMeta {
            angle_weight: doc.meta.angle_weight,
            rho_quantile: doc.meta.rho_q,
            delta_quantile: doc.meta.delta_q,
            proximity: doc.meta.proximity,
        },
    }
}

fn hyper_from_doc(doc: HyperDoc, key: &HyperKey) -> HyperRelation {
    let priors = doc
        .priors
        .into_iter()
        .map(|p| {
            let mut poses: Vec<(usize, Transform)> = p
                .into_iter()
                .map(|s| {
                    (
                        s.slot,
                        Transform {
                            x: s.x,
                            y: s.y,
                            z: s.z,
                            theta: s.theta,
                        },
                    )
                })
                .collect();
            poses.sort_by_key(|(s, _)| *s);
            HyperPrior { poses }
        })
        .collect();
    HyperRelation {
        key: key.clone(),
        priors,
        status: HyperStatus::Complete,
        reason: None,
    }
}
