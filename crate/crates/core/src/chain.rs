//! Pattern chains: index lists into a pairwise relation whose secondary copies
//! can all be placed at once without overlapping.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;

use crate::error::Result;
use crate::extract::PairwiseRelation;
use crate::geom::{normalize_angle, wrap_angle_diff, OrientedRect};
use crate::par;
use crate::scene::{Catalog, Transform};
use crate::store::{quantize_transform, relation_hash};
use crate::tier::OVERLAP_EPS;

#[derive(Debug, Clone, PartialEq)]
pub struct PatternChainSet {
    pub dominant_id: String,
    pub secondary_id: String,
    pub chains: Vec<Vec<usize>>,
    /// Hash of the relation's prior list the chains were generated from.
    pub relation_hash: String,
    pub aligned: bool,
}

impl PatternChainSet {
    pub fn max_len(&self) -> usize {
        self.chains.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Snap tolerances used when alignment is on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignParams {
    pub tolerance_m: f64,
    pub tolerance_rad: f64,
}

impl Default for AlignParams {
    fn default() -> Self {
        Self {
            tolerance_m: 0.05,
            tolerance_rad: 0.05,
        }
    }
}

/// Symmetric "copies overlap" matrix over a relation's priors, dominant at
/// identity.
#[derive(Debug, Clone)]
pub struct ConflictGraph {
    n: usize,
    bits: Vec<bool>,
}

impl ConflictGraph {
    pub fn build(relation: &PairwiseRelation, width: f64, depth: f64) -> Self {
        let rects: Vec<OrientedRect> = relation
            .priors
            .iter()
            .map(|p| OrientedRect::new(p.position(), width, depth, p.theta))
            .collect();
        let n = rects.len();
        let rows = par::map_range(n, |i| {
            (0..n)
                .map(|j| i == j || rects[i].overlaps(&rects[j], OVERLAP_EPS))
                .collect::<Vec<bool>>()
        });
        Self {
            n,
            bits: rows.concat(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn conflicts(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    fn grow(&self, start: usize, rng: &mut impl Rng) -> Vec<usize> {
        let mut chain = vec![start];
        let mut open: Vec<bool> = (0..self.n).map(|j| !self.conflicts(start, j)).collect();
        loop {
            let candidates: Vec<usize> = (0..self.n).filter(|&j| open[j]).collect();
            if candidates.is_empty() {
                return chain;
            }
            let pick = candidates[rng.random_range(0..candidates.len())];
            chain.push(pick);
            for (j, o) in open.iter_mut().enumerate() {
                if self.conflicts(pick, j) {
                    *o = false;
                }
            }
        }
    }
}

/// Grows one chain from `start`: repeatedly appends a uniformly chosen prior
/// whose copy overlaps none of the copies chosen so far, until none is left.
pub fn generate_chain(
    relation: &PairwiseRelation,
    catalog: &Catalog,
    start: usize,
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    let inst = catalog.lookup(&relation.secondary_id)?;
    let graph = ConflictGraph::build(relation, inst.width, inst.depth);
    Ok(graph.grow(start, rng))
}

/// One chain per prior, the k-th starting at index k, so every prior is used
/// at least once.
pub fn generate_chain_set(
    relation: &PairwiseRelation,
    catalog: &Catalog,
    rng: &mut impl Rng,
    aligned: bool,
) -> Result<PatternChainSet> {
    let inst = catalog.lookup(&relation.secondary_id)?;
    let graph = ConflictGraph::build(relation, inst.width, inst.depth);
    let seed: u64 = rng.random();
    let chains = par::map_range(graph.len(), |k| {
        let mut r = par::fork_rng(seed, k as u64);
        graph.grow(k, &mut r)
    });
    Ok(PatternChainSet {
        dominant_id: relation.dominant_id.clone(),
        secondary_id: relation.secondary_id.clone(),
        chains,
        relation_hash: relation_hash(relation),
        aligned,
    })
}

fn snap_theta(theta: f64, tol: f64) -> f64 {
    let target = normalize_angle((theta / FRAC_PI_2).round() * FRAC_PI_2);
    if wrap_angle_diff(theta, target).abs() < tol {
        target
    } else {
        theta
    }
}

fn any_overlap(poses: &[Transform], width: f64, depth: f64, moved: &[usize]) -> bool {
    let rect = |p: &Transform| OrientedRect::new(p.position(), width, depth, p.theta);
    moved.iter().any(|&m| {
        let a = rect(&poses[m]);
        poses
            .iter()
            .enumerate()
            .any(|(j, p)| j != m && a.overlaps(&rect(p), OVERLAP_EPS))
    })
}

/// Groups of indices whose values are all within `tol` of each other.
fn snap_groups(values: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match groups.last_mut() {
            Some(g) if values[i] - values[*g.last().unwrap()] < tol => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
        .into_iter()
        .filter(|g| {
            let lo = values[g[0]];
            let hi = values[*g.last().unwrap()];
            g.len() > 1 && hi - lo < tol && hi != lo
        })
        .collect()
}

fn align_pass(poses: &mut [Transform], width: f64, depth: f64, params: &AlignParams) {
    for k in 0..poses.len() {
        let snapped = snap_theta(poses[k].theta, params.tolerance_rad);
        if snapped != poses[k].theta {
            let old = poses[k].theta;
            poses[k].theta = snapped;
            if any_overlap(poses, width, depth, &[k]) {
                poses[k].theta = old;
            }
        }
    }
    for axis in 0..2 {
        let get = |p: &Transform| if axis == 0 { p.x } else { p.z };
        let values: Vec<f64> = poses.iter().map(get).collect();
        for group in snap_groups(&values, params.tolerance_m) {
            let mean = group.iter().map(|&i| values[i]).sum::<f64>() / group.len() as f64;
            let saved: Vec<Transform> = group.iter().map(|&i| poses[i]).collect();
            for &i in &group {
                if axis == 0 {
                    poses[i].x = mean;
                } else {
                    poses[i].z = mean;
                }
            }
            if any_overlap(poses, width, depth, &group) {
                for (&i, s) in group.iter().zip(saved) {
                    poses[i] = s;
                }
            }
        }
    }
}

/// Copies of the chain's priors with near-right angles snapped and near-equal
/// x or z coordinates merged to their mean. Adjustments that would make two
/// copies overlap are reverted. Passes repeat until nothing changes, so the
/// output is a fixed point. Values are quantized like stored priors.
pub fn align_chain(
    relation: &PairwiseRelation,
    chain: &[usize],
    catalog: &Catalog,
    params: &AlignParams,
) -> Result<Vec<Transform>> {
    let inst = catalog.lookup(&relation.secondary_id)?;
    let mut poses: Vec<Transform> = chain.iter().map(|&i| relation.priors[i]).collect();
    Ok(align_poses(&mut poses, inst.width, inst.depth, params))
}

pub(crate) fn align_poses(
    poses: &mut Vec<Transform>,
    width: f64,
    depth: f64,
    params: &AlignParams,
) -> Vec<Transform> {
    for _ in 0..16 {
        let before = poses.clone();
        align_pass(poses, width, depth, params);
        if *poses == before {
            break;
        }
    }
    poses.iter().map(quantize_transform).collect()
}
