//! Hyper-relations: joint poses for a dominant object and a fixed multiset of
//! secondaries, assembled from pairwise priors with tier-aware filtering.

mod service;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

pub use service::{Executor, HyperResponse, HyperService, InlineExecutor, ManualExecutor, ThreadPoolExecutor};

use crate::error::{Error, Result};
use crate::extract::PairwiseRelation;
use crate::par;
use crate::scene::{Catalog, Transform};
use crate::store::PriorStore;
use crate::tier::{Solid, TierRules};

/// Poses closer than this in every component count as the same.
pub const POSE_TOLERANCE: f64 = 1e-6;

/// Canonical identity of a hyper-relation: a dominant instance plus a sorted
/// multiset of secondary instances.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HyperKey {
    pub dominant_id: String,
    /// Sorted by instance id, counts ≥ 1.
    pub secondaries: Vec<(String, usize)>,
}

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || id.contains(['|', ',', '*']) {
        return Err(Error::InvalidKey(format!("bad instance id `{id}`")));
    }
    Ok(())
}

impl HyperKey {
    /// Merges repeated ids and sorts. At least two secondary copies are
    /// required.
    pub fn new<S: Into<String>>(dominant: &str, secondaries: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        check_id(dominant)?;
        let mut merged: BTreeMap<String, usize> = BTreeMap::new();
        for (id, n) in secondaries {
            let id = id.into();
            check_id(&id)?;
            if n == 0 {
                return Err(Error::InvalidKey(format!("zero count for `{id}`")));
            }
            *merged.entry(id).or_default() += n;
        }
        let key = Self {
            dominant_id: dominant.to_string(),
            secondaries: merged.into_iter().collect(),
        };
        if key.slot_count() < 2 {
            return Err(Error::InvalidKey(format!("{key}: need at least two secondaries")));
        }
        Ok(key)
    }

    /// Key for a list of secondary instance ids (repeats allowed).
    pub fn from_instances<S: AsRef<str>>(dominant: &str, ids: &[S]) -> Result<Self> {
        Self::new(dominant, ids.iter().map(|s| (s.as_ref().to_string(), 1)))
    }

    pub fn slot_count(&self) -> usize {
        self.secondaries.iter().map(|(_, n)| n).sum()
    }

    /// Instance id of each slot, slots expanded in key order.
    pub fn slots(&self) -> Vec<&str> {
        self.secondaries
            .iter()
            .flat_map(|(id, n)| std::iter::repeat_n(id.as_str(), *n))
            .collect()
    }
}

impl fmt::Display for HyperKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|", self.dominant_id)?;
        for (i, (id, n)) in self.secondaries.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{id}*{n}")?;
        }
        Ok(())
    }
}

impl FromStr for HyperKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidKey(s.to_string());
        let (dom, rest) = s.split_once('|').ok_or_else(bad)?;
        let mut secs = Vec::new();
        for part in rest.split(',') {
            let (id, n) = part.split_once('*').ok_or_else(bad)?;
            let n: usize = n.parse().map_err(|_| bad())?;
            secs.push((id.to_string(), n));
        }
        let key = Self::new(dom, secs)?;
        if key.to_string() != s {
            return Err(bad());
        }
        Ok(key)
    }
}

/// One joint assignment: a pose per slot, relative to the dominant at
/// identity, sorted by slot.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperPrior {
    pub poses: Vec<(usize, Transform)>,
}

impl HyperPrior {
    fn approx_eq(&self, other: &HyperPrior) -> bool {
        self.poses.len() == other.poses.len()
            && self.poses.iter().zip(&other.poses).all(|((sa, a), (sb, b))| {
                sa == sb
                    && (a.x - b.x).abs() <= POSE_TOLERANCE
                    && (a.y - b.y).abs() <= POSE_TOLERANCE
                    && (a.z - b.z).abs() <= POSE_TOLERANCE
                    && (a.theta - b.theta).abs() <= POSE_TOLERANCE
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HyperStatus {
    Complete,
    Generating,
    Failed,
}

impl HyperStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            HyperStatus::Complete => "complete",
            HyperStatus::Generating => "generating",
            HyperStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperRelation {
    pub key: HyperKey,
    pub priors: Vec<HyperPrior>,
    pub status: HyperStatus,
    /// Why generation failed, when it did.
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HyperParams {
    pub max_restarts: usize,
    pub target_count: usize,
    pub attempt_budget: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            max_restarts: 100,
            target_count: 64,
            attempt_budget: 5000,
        }
    }
}

/// Everything a sampling attempt needs, resolved once per key.
struct Problem {
    /// Per slot: index into `relations`.
    slot_rel: Vec<usize>,
    relations: Vec<Arc<PairwiseRelation>>,
    /// Per relation, per prior: the solid of that secondary copy.
    solids: Vec<Vec<Solid>>,
    rules: TierRules,
}

impl Problem {
    fn new(key: &HyperKey, store: &PriorStore, catalog: &Catalog) -> Result<Self> {
        let mut relations = Vec::new();
        let mut solids = Vec::new();
        let mut slot_rel = Vec::new();
        for (r, (id, n)) in key.secondaries.iter().enumerate() {
            let rel = store
                .load_pairwise(&key.dominant_id, id)?
                .ok_or_else(|| Error::UnsatisfiableKey {
                    dominant: key.dominant_id.clone(),
                    secondary: id.clone(),
                })?;
            let inst = catalog.lookup(id)?;
            solids.push(rel.priors.iter().map(|p| Solid::of(inst, p)).collect());
            relations.push(rel);
            slot_rel.extend(std::iter::repeat_n(r, *n));
        }
        Ok(Self {
            slot_rel,
            relations,
            solids,
            rules: TierRules::default(),
        })
    }

    /// One pass: random slot order, uniform pick among survivors. `None` on a
    /// dead end.
    fn attempt(&self, rng: &mut impl Rng) -> Option<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.slot_rel.len()).collect();
        order.shuffle(rng);
        let mut chosen: Vec<Option<usize>> = vec![None; order.len()];
        let mut placed: Vec<&Solid> = Vec::with_capacity(order.len());
        for slot in order {
            let r = self.slot_rel[slot];
            let survivors: Vec<usize> = (0..self.solids[r].len())
                .filter(|&k| placed.iter().all(|s| !self.rules.collides(&self.solids[r][k], s)))
                .collect();
            if survivors.is_empty() {
                return None;
            }
            let k = survivors[rng.random_range(0..survivors.len())];
            chosen[slot] = Some(k);
            placed.push(&self.solids[r][k]);
        }
        Some(chosen.into_iter().map(|c| c.expect("every slot chosen")).collect())
    }

    fn generate(&self, rng: &mut impl Rng, max_restarts: usize) -> Option<Vec<usize>> {
        (0..max_restarts).find_map(|_| self.attempt(rng))
    }

    /// Sorts identical-instance slots by pose so permutations of identical
    /// copies compare equal.
    fn to_prior(&self, mut choice: Vec<usize>) -> HyperPrior {
        let mut start = 0;
        while start < choice.len() {
            let r = self.slot_rel[start];
            let end = start + self.slot_rel[start..].iter().take_while(|&&x| x == r).count();
            let rel = &self.relations[r];
            choice[start..end].sort_by(|&a, &b| pose_cmp(&rel.priors[a], &rel.priors[b]).then(a.cmp(&b)));
            start = end;
        }
        HyperPrior {
            poses: choice
                .iter()
                .enumerate()
                .map(|(slot, &k)| (slot, self.relations[self.slot_rel[slot]].priors[k]))
                .collect(),
        }
    }
}

fn pose_cmp(a: &Transform, b: &Transform) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x)
        .then(a.z.total_cmp(&b.z))
        .then(a.theta.total_cmp(&b.theta))
        .then(a.y.total_cmp(&b.y))
}

/// Samples one joint assignment, restarting on dead ends. `Ok(None)` when all
/// `max_restarts` attempts failed.
pub fn generate_hyper_prior(
    key: &HyperKey,
    store: &PriorStore,
    catalog: &Catalog,
    rng: &mut impl Rng,
    max_restarts: usize,
) -> Result<Option<HyperPrior>> {
    let problem = Problem::new(key, store, catalog)?;
    Ok(problem.generate(rng, max_restarts).map(|c| problem.to_prior(c)))
}

const BATCH: usize = 64;

/// Repeats [`generate_hyper_prior`] until `target_count` distinct priors are
/// found or `attempt_budget` calls are spent. Calls run in parallel batches
/// on forked streams and are consumed in order, so the result only depends
/// on `rng`.
pub fn enrich_hyper_relation(
    key: &HyperKey,
    store: &PriorStore,
    catalog: &Catalog,
    rng: &mut impl Rng,
    params: &HyperParams,
) -> HyperRelation {
    let failed = |reason: String| HyperRelation {
        key: key.clone(),
        priors: Vec::new(),
        status: HyperStatus::Failed,
        reason: Some(reason),
    };
    let problem = match Problem::new(key, store, catalog) {
        Ok(p) => p,
        Err(e) => return failed(e.to_string()),
    };
    let seed: u64 = rng.random();
    let mut priors: Vec<HyperPrior> = Vec::new();
    let mut done = 0;
    'outer: while done < params.attempt_budget && priors.len() < params.target_count {
        let n = BATCH.min(params.attempt_budget - done);
        let results = par::map_range(n, |i| {
            let mut r = par::fork_rng(seed, (done + i) as u64);
            problem.generate(&mut r, params.max_restarts)
        });
        done += n;
        for choice in results.into_iter().flatten() {
            let prior = problem.to_prior(choice);
            if !priors.iter().any(|p| p.approx_eq(&prior)) {
                priors.push(prior);
                if priors.len() >= params.target_count {
                    break 'outer;
                }
            }
        }
    }
    if priors.is_empty() {
        return failed(format!("no collision-free assignment in {done} attempts"));
    }
    HyperRelation {
        key: key.clone(),
        priors,
        status: HyperStatus::Complete,
        reason: None,
    }
}

/// Deterministic generation seed for a key.
pub fn key_seed(key: &HyperKey) -> u64 {
    par::seed_from_str(&key.to_string())
}
