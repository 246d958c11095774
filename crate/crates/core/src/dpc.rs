//! Density-peak scoring used to denoise raw relative-pose samples.
//!
//! Each sample gets a local density `rho` (neighbours within a cutoff `d_c`)
//! and a separation `delta` (distance to the nearest denser sample). Samples
//! that are sparse *and* isolated are dropped; everything else is kept as a
//! prior.

use crate::error::{Error, Result};
use crate::geom::wrap_angle_diff;
use crate::par;
use crate::scene::Transform;

/// Distance between two poses: Euclidean over translation plus the wrapped
/// angle difference scaled by `angle_weight` (meters per radian).
pub fn transform_distance(a: &Transform, b: &Transform, angle_weight: f64) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    let dt = angle_weight * wrap_angle_diff(a.theta, b.theta);
    (dx * dx + dy * dy + dz * dz + dt * dt).sqrt()
}

/// Which end of the sorted pairwise distances the cutoff rank counts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CutoffOrder {
    /// The m-th smallest distance: about 1.5% of samples fall within `d_c`.
    #[default]
    Ascending,
    /// The m-th greatest distance.
    Descending,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cutoff {
    Rank(CutoffOrder),
    Fixed(f64),
}

impl Default for Cutoff {
    fn default() -> Self {
        Cutoff::Rank(CutoffOrder::Ascending)
    }
}

/// Rank of the cutoff distance among the `K·(K−1)` ordered pairs:
/// `⌈0.015·K²⌉`, clamped to `[1, K·(K−1)]`.
pub fn cutoff_rank(k: usize) -> usize {
    let k = k as u128;
    let m = (15 * k * k).div_ceil(1000);
    let pairs = k * k.saturating_sub(1);
    m.clamp(1, pairs.max(1)) as usize
}

/// Condensed upper-triangular pairwise distance table.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(poses: &[Transform], angle_weight: f64) -> Self {
        let n = poses.len();
        let rows = par::map_range(n, |i| {
            poses[i + 1..]
                .iter()
                .map(|q| transform_distance(&poses[i], q, angle_weight))
                .collect::<Vec<f64>>()
        });
        Self {
            n,
            data: rows.concat(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.data[a * self.n - a * (a + 1) / 2 + (b - a - 1)]
    }

    /// All unordered pair distances.
    pub fn pairs(&self) -> &[f64] {
        &self.data
    }

    /// The `m`-th value (1-based) of the ordered-pair distance list, where
    /// each unordered distance appears twice.
    pub fn ordered_pair_stat(&self, m: usize, order: CutoffOrder) -> f64 {
        let mut v = self.data.clone();
        let idx = (m - 1) / 2;
        match order {
            CutoffOrder::Ascending => {
                v.select_nth_unstable_by(idx, f64::total_cmp);
            }
            CutoffOrder::Descending => {
                v.select_nth_unstable_by(idx, |a, b| b.total_cmp(a));
            }
        }
        v[idx]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpcScores {
    pub rho: Vec<u32>,
    pub delta: Vec<f64>,
    pub d_c: f64,
}

/// Scores `poses` with the default rank-based cutoff.
pub fn dpc_scores(poses: &[Transform], angle_weight: f64) -> Result<DpcScores> {
    dpc_scores_with(poses, angle_weight, Cutoff::default())
}

/// Scores `poses`.
///
/// Sample `j` counts as denser than `k` when `rho_j > rho_k`, or when they
/// tie and `j` comes first. The densest sample has no denser neighbour and
/// gets its largest distance to any other sample.
pub fn dpc_scores_with(poses: &[Transform], angle_weight: f64, cutoff: Cutoff) -> Result<DpcScores> {
    let n = poses.len();
    if n < 2 {
        return Err(Error::InsufficientSamples(n));
    }
    let dist = DistanceMatrix::new(poses, angle_weight);
    let d_c = match cutoff {
        Cutoff::Fixed(v) => v,
        Cutoff::Rank(order) => dist.ordered_pair_stat(cutoff_rank(n), order),
    };
    let rho: Vec<u32> = par::map_range(n, |k| {
        (0..n).filter(|&j| j != k && dist.get(k, j) <= d_c).count() as u32
    });
    let delta = par::map_range(n, |k| {
        let mut nearest = f64::INFINITY;
        let mut farthest = 0.0f64;
        for j in 0..n {
            if j == k {
                continue;
            }
            let d = dist.get(k, j);
            farthest = farthest.max(d);
            let denser = rho[j] > rho[k] || (rho[j] == rho[k] && j < k);
            if denser && d < nearest {
                nearest = d;
            }
        }
        if nearest.is_finite() {
            nearest
        } else {
            farthest
        }
    });
    Ok(DpcScores { rho, delta, d_c })
}

/// Linear-interpolated sample quantile.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Indices (original order) of samples that survive denoising. A sample is
/// removed when its `rho` is at or below the `rho_quantile` (and below the
/// maximum) and its `delta` is above the `delta_quantile`.
pub fn dpc_denoise(scores: &DpcScores, rho_quantile: f64, delta_quantile: f64) -> Result<Vec<usize>> {
    for q in [rho_quantile, delta_quantile] {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Validation(format!("quantile {q} outside (0, 1)")));
        }
    }
    let rho_f: Vec<f64> = scores.rho.iter().map(|&r| r as f64).collect();
    let rho_cut = quantile(&rho_f, rho_quantile);
    let rho_max = rho_f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let delta_cut = quantile(&scores.delta, delta_quantile);
    let kept: Vec<usize> = (0..scores.rho.len())
        .filter(|&k| {
            let r = rho_f[k];
            let sparse = r <= rho_cut && r < rho_max;
            let isolated = scores.delta[k] > delta_cut;
            !(sparse && isolated)
        })
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyRelation);
    }
    Ok(kept)
}
