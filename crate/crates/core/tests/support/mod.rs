//! Independent reference implementations used as test oracles. Nothing here
//! calls the library's geometry, scoring or placement code.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::f64::consts::PI;

use layoutforge::scene::{ObjectInstance, Scene, Tier, Transform};

// ---------------------------------------------------------------------------
// Plain 2D geometry

pub type P = (f64, f64);

fn rot(p: P, th: f64) -> P {
    let (s, c) = th.sin_cos();
    (p.0 * c - p.1 * s, p.0 * s + p.1 * c)
}

/// Corners of a `w × d` rectangle centered at `(cx, cz)` rotated by `th`,
/// counter-clockwise.
pub fn rect_corners(cx: f64, cz: f64, w: f64, d: f64, th: f64) -> Vec<P> {
    [(-w / 2.0, -d / 2.0), (w / 2.0, -d / 2.0), (w / 2.0, d / 2.0), (-w / 2.0, d / 2.0)]
        .iter()
        .map(|&c| {
            let r = rot(c, th);
            (cx + r.0, cz + r.1)
        })
        .collect()
}

pub fn footprint(inst: &ObjectInstance, t: &Transform) -> Vec<P> {
    rect_corners(t.x, t.z, inst.width, inst.depth, t.theta)
}

fn cross(o: P, a: P, b: P) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

pub fn signed_area(poly: &[P]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum::<f64>()
        / 2.0
}

fn ccw(mut poly: Vec<P>) -> Vec<P> {
    if signed_area(&poly) < 0.0 {
        poly.reverse();
    }
    poly
}

/// Area of the intersection of two convex polygons (Sutherland–Hodgman).
pub fn convex_overlap(a: &[P], b: &[P]) -> f64 {
    let clip = ccw(b.to_vec());
    let mut out = ccw(a.to_vec());
    for i in 0..clip.len() {
        let (e0, e1) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut out);
        if input.is_empty() {
            break;
        }
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let cin = cross(e0, e1, cur) >= 0.0;
            let pin = cross(e0, e1, prev) >= 0.0;
            if cin {
                if !pin {
                    out.push(intersect(prev, cur, e0, e1));
                }
                out.push(cur);
            } else if pin {
                out.push(intersect(prev, cur, e0, e1));
            }
        }
    }
    if out.len() < 3 {
        0.0
    } else {
        signed_area(&out).abs()
    }
}

fn intersect(p: P, q: P, a: P, b: P) -> P {
    let d1 = cross(a, b, p);
    let d2 = cross(a, b, q);
    let t = d1 / (d1 - d2);
    (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1))
}

fn dist_point_segment(p: P, a: P, b: P) -> f64 {
    let (dx, dz) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dz * dz;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dz) / len2).clamp(0.0, 1.0)
    };
    let (x, z) = (a.0 + t * dx, a.1 + t * dz);
    ((p.0 - x).powi(2) + (p.1 - z).powi(2)).sqrt()
}

/// Even-odd ray cast; points within `tol` of the boundary count as inside.
pub fn point_in_polygon(p: P, poly: &[P], tol: f64) -> bool {
    let n = poly.len();
    for i in 0..n {
        if dist_point_segment(p, poly[i], poly[(i + 1) % n]) <= tol {
            return true;
        }
    }
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.1 > p.1) != (b.1 > p.1) {
            let x = a.0 + (p.1 - a.1) / (b.1 - a.1) * (b.0 - a.0);
            if p.0 < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn point_strictly_in_convex(p: P, poly: &[P], margin: f64) -> bool {
    let poly = ccw(poly.to_vec());
    let n = poly.len();
    (0..n).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        cross(a, b, p) / len > margin
    })
}

/// A convex polygon lies inside a simple polygon when its densely sampled
/// boundary is inside and no polygon vertex pokes into it.
pub fn convex_inside_polygon(rect: &[P], poly: &[P], tol: f64) -> bool {
    let n = rect.len();
    for i in 0..n {
        let (a, b) = (rect[i], rect[(i + 1) % n]);
        for k in 0..=200 {
            let t = k as f64 / 200.0;
            let p = (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
            if !point_in_polygon(p, poly, tol) {
                return false;
            }
        }
    }
    poly.iter().all(|&v| !point_strictly_in_convex(v, rect, tol))
}

pub fn floor_points(scene: &Scene) -> Vec<P> {
    scene.room.floor.vertices().iter().map(|p| (p.x, p.z)).collect()
}

// ---------------------------------------------------------------------------
// Tiers

pub const EPS_AREA: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Body {
    pub corners: Vec<P>,
    pub tier: Tier,
    pub base: f64,
    pub top: f64,
}

pub fn body(inst: &ObjectInstance, t: &Transform) -> Body {
    Body {
        corners: footprint(inst, t),
        tier: inst.tier,
        base: t.y,
        top: t.y + inst.height,
    }
}

pub fn passable(a: Tier, b: Tier) -> bool {
    use Tier::*;
    matches!((a, b), (Carpet, Floor) | (Floor, Carpet) | (Surface, Floor) | (Floor, Surface))
}

pub fn bodies_collide(a: &Body, b: &Body) -> bool {
    if passable(a.tier, b.tier) {
        return false;
    }
    let vertical = a.base < b.top && b.base < a.top;
    vertical && convex_overlap(&a.corners, &b.corners) >= EPS_AREA
}

// ---------------------------------------------------------------------------
// Density peaks

pub fn pose_distance(a: &Transform, b: &Transform, w: f64) -> f64 {
    let mut dt = (a.theta - b.theta).rem_euclid(2.0 * PI);
    if dt > PI {
        dt -= 2.0 * PI;
    }
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2) + (w * dt).powi(2)).sqrt()
}

/// Scores by the textbook O(K²) loops: the cutoff is the m-th smallest of the
/// K·(K−1) ordered-pair distances with m = ⌈0.015·K²⌉.
pub fn dpc_oracle(poses: &[Transform], w: f64) -> (Vec<u32>, Vec<f64>, f64) {
    let k = poses.len();
    // Each unordered pair is evaluated once so the table is exactly symmetric.
    let mut d = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            d[i][j] = pose_distance(&poses[i], &poses[j], w);
            d[j][i] = d[i][j];
        }
    }
    let mut ordered = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            if i != j {
                ordered.push(d[i][j]);
            }
        }
    }
    ordered.sort_by(f64::total_cmp);
    let m = ((0.015 * (k * k) as f64).ceil() as usize).clamp(1, ordered.len());
    let dc = ordered[m - 1];
    let rho: Vec<u32> = (0..k).map(|i| (0..k).filter(|&j| j != i && d[i][j] <= dc).count() as u32).collect();
    let delta = (0..k)
        .map(|i| {
            let denser = (0..k).filter(|&j| rho[j] > rho[i] || (rho[j] == rho[i] && j < i));
            match denser.map(|j| d[i][j]).reduce(f64::min) {
                Some(v) => v,
                None => (0..k).filter(|&j| j != i).map(|j| d[i][j]).fold(0.0, f64::max),
            }
        })
        .collect();
    (rho, delta, dc)
}

/// Linear-interpolated quantile by the textbook formula.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = pos.ceil() as usize;
    v[i] + (v[j] - v[i]) * (pos - i as f64)
}

// ---------------------------------------------------------------------------
// Graphs

pub struct UnionFind(Vec<usize>);

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let r = self.find(self.0[x]);
            self.0[x] = r;
        }
        self.0[x]
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }

    /// Components as sorted vertex sets.
    pub fn sets(&mut self) -> BTreeSet<Vec<usize>> {
        let n = self.0.len();
        let mut by_root: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for v in 0..n {
            let r = self.find(v);
            by_root.entry(r).or_default().push(v);
        }
        by_root.into_values().collect()
    }
}

// ---------------------------------------------------------------------------
// Placement

/// Door clearance zone: the door's extent along its nearest wall, extruded
/// `depth` inward.
pub fn clearance_zone(floor: &[P], door: &[P], depth: f64) -> Vec<P> {
    let c = door.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0 / 4.0, acc.1 + p.1 / 4.0));
    let floor = ccw(floor.to_vec());
    let n = floor.len();
    let (mut best, mut bd) = (0, f64::INFINITY);
    for i in 0..n {
        let d = dist_point_segment(c, floor[i], floor[(i + 1) % n]);
        if d < bd {
            bd = d;
            best = i;
        }
    }
    let (a, b) = (floor[best], floor[(best + 1) % n]);
    let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
    let u = ((b.0 - a.0) / len, (b.1 - a.1) / len);
    let nrm = (-u.1, u.0);
    let s: Vec<f64> = door.iter().map(|p| (p.0 - a.0) * u.0 + (p.1 - a.1) * u.1).collect();
    let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let at = |s: f64, h: f64| (a.0 + u.0 * s + nrm.0 * h, a.1 + u.1 * s + nrm.1 * h);
    vec![at(lo, 0.0), at(hi, 0.0), at(hi, depth), at(lo, depth)]
}

#[derive(Debug, Clone)]
pub struct PlacedBox {
    pub group: usize,
    pub corners: Vec<P>,
    pub tier: Tier,
    pub base: f64,
    pub top: f64,
}

/// Every violation of the three room constraints plus the window rule, as
/// human-readable strings. Empty means sound. Containment allows the 1 cm
/// inward margin used by placement.
pub fn placement_violations(scene: &Scene, boxes: &[PlacedBox], clearance_scale: f64) -> Vec<String> {
    let floor = floor_points(scene);
    let mut v = Vec::new();
    for b in boxes {
        let shrunk = shrink(&b.corners, 0.01);
        if !convex_inside_polygon(&shrunk, &floor, 1e-9) {
            v.push(format!("group {} leaves the room", b.group));
        }
    }
    for (i, a) in boxes.iter().enumerate() {
        for b in &boxes[i + 1..] {
            let ba = Body {
                corners: a.corners.clone(),
                tier: a.tier,
                base: a.base,
                top: a.top,
            };
            let bb = Body {
                corners: b.corners.clone(),
                tier: b.tier,
                base: b.base,
                top: b.top,
            };
            if bodies_collide(&ba, &bb) {
                v.push(format!("groups {} and {} overlap", a.group, b.group));
            }
        }
    }
    for (k, d) in scene.room.doors.iter().enumerate() {
        let door: Vec<P> = d.rect.corners().iter().map(|p| (p.x, p.z)).collect();
        let zone = clearance_zone(&floor, &door, d.swing_depth * clearance_scale);
        for b in boxes {
            if convex_overlap(&b.corners, &door) >= EPS_AREA || convex_overlap(&b.corners, &zone) >= EPS_AREA {
                v.push(format!("group {} blocks door {k}", b.group));
            }
        }
    }
    for (k, w) in scene.room.windows.iter().enumerate() {
        let win: Vec<P> = w.rect.corners().iter().map(|p| (p.x, p.z)).collect();
        for b in boxes {
            if convex_overlap(&b.corners, &win) >= EPS_AREA && b.top > w.sill_height {
                v.push(format!("group {} (top {:.2}) covers window {k} (sill {:.2})", b.group, b.top, w.sill_height));
            }
        }
    }
    v
}

/// Moves every edge of a convex polygon `m` inward (rectangles only).
pub fn shrink(rect: &[P], m: f64) -> Vec<P> {
    let c = rect.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0 / 4.0, acc.1 + p.1 / 4.0));
    let e0 = ((rect[1].0 - rect[0].0), (rect[1].1 - rect[0].1));
    let e1 = ((rect[2].0 - rect[1].0), (rect[2].1 - rect[1].1));
    let l0 = (e0.0 * e0.0 + e0.1 * e0.1).sqrt();
    let l1 = (e1.0 * e1.0 + e1.1 * e1.1).sqrt();
    let th = e0.1.atan2(e0.0);
    rect_corners(c.0, c.1, (l0 - 2.0 * m).max(0.0), (l1 - 2.0 * m).max(0.0), th)
}

// ---------------------------------------------------------------------------
// Hyper-relations

/// All collision-free joint assignments for slots drawing from `lists`
/// (one prior list and instance per slot), canonicalized by sorting poses
/// within runs of identical instances.
pub fn valid_assignments(slots: &[(&ObjectInstance, &[Transform])]) -> BTreeSet<Vec<[u64; 4]>> {
    let mut out = BTreeSet::new();
    let mut idx = vec![0usize; slots.len()];
    if slots.iter().any(|(_, l)| l.is_empty()) {
        return out;
    }
    loop {
        let bodies: Vec<Body> = slots.iter().zip(&idx).map(|((inst, l), &i)| body(inst, &l[i])).collect();
        let ok = (0..bodies.len()).all(|i| (i + 1..bodies.len()).all(|j| !bodies_collide(&bodies[i], &bodies[j])));
        if ok {
            let poses: Vec<(&str, Transform)> = slots
                .iter()
                .zip(&idx)
                .map(|((inst, l), &i)| (inst.instance_id.as_str(), l[i]))
                .collect();
            out.insert(canonical(&poses));
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return out;
            }
            idx[k] += 1;
            if idx[k] < slots[k].1.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

pub fn pose_bits(t: &Transform) -> [u64; 4] {
    [t.x.to_bits(), t.y.to_bits(), t.z.to_bits(), t.theta.to_bits()]
}

/// Sorted poses per instance id, concatenated in id order.
pub fn canonical(poses: &[(&str, Transform)]) -> Vec<[u64; 4]> {
    let mut by: std::collections::BTreeMap<&str, Vec<Transform>> = Default::default();
    for (id, t) in poses {
        by.entry(id).or_default().push(*t);
    }
    by.into_values()
        .flat_map(|mut v| {
            v.sort_by(|a, b| {
                a.x.total_cmp(&b.x)
                    .then(a.z.total_cmp(&b.z))
                    .then(a.theta.total_cmp(&b.theta))
                    .then(a.y.total_cmp(&b.y))
            });
            v.into_iter().map(|t| pose_bits(&t))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Fixtures

pub fn inst(id: &str, w: f64, d: f64, h: f64, tier: Tier) -> ObjectInstance {
    ObjectInstance {
        instance_id: id.into(),
        width: w,
        depth: d,
        height: h,
        tier,
        dominant_capable: false,
        wall_mounted: false,
        mount_elevation: 0.0,
        wall_affine: false,
    }
}

pub fn dominant(id: &str, w: f64, d: f64, h: f64) -> ObjectInstance {
    ObjectInstance {
        dominant_capable: true,
        ..inst(id, w, d, h, Tier::Floor)
    }
}

/// Table with eight chair priors: four around it (indices 2, 3, 6, 7 never
/// conflict) and two pairs where prior 0 overlaps 4 and prior 1 overlaps 5.
pub fn eight_prior_fixture() -> Vec<Transform> {
    vec![
        Transform::planar(-0.4, 0.7, PI),
        Transform::planar(0.4, 0.7, PI),
        Transform::planar(1.1, 0.0, PI / 2.0),
        Transform::planar(-1.1, 0.0, -PI / 2.0),
        Transform::planar(-0.25, 0.75, PI),
        Transform::planar(0.25, 0.75, PI),
        Transform::planar(-0.4, -0.7, 0.0),
        Transform::planar(0.4, -0.7, 0.0),
    ]
}
