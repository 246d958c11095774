//! Places group bounding boxes in the room: largest first, heuristic poses
//! (corners, wall midpoints, beside placed groups) before rounds of random
//! wall samples whose density doubles each round.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::geom::{Edge, OrientedRect, Point2, Polygon};
use crate::grouping::CoherentGroup;
use crate::par;
use crate::scene::{PlacedObject, RoomEnvelope, Transform};
use crate::tier::{Solid, TierRules, OVERLAP_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Door,
    Window,
}

/// A door or window as a fixed obstacle.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub rect: OrientedRect,
    pub kind: BlockKind,
    /// Groups no taller than this may overlap the block (windows: the sill).
    pub blocking_height: f64,
    /// Space that must stay free in front of a door.
    pub clearance: Option<OrientedRect>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrangeConfig {
    /// Number of random densification rounds.
    pub n_max: u32,
    pub door_clearance_scale: f64,
    /// Inward margin for the containment test (meters).
    pub boundary_tolerance: f64,
}

impl Default for ArrangeConfig {
    fn default() -> Self {
        Self {
            n_max: 7,
            door_clearance_scale: 1.0,
            boundary_tolerance: 0.01,
        }
    }
}

/// Rotation that turns local +z into direction `n`.
pub fn facing(n: Point2) -> f64 {
    (-n.x).atan2(n.z)
}

/// Free zone in front of a door: spans the door along its nearest wall and
/// extends `depth` into the room.
pub fn door_clearance(room: &Polygon, door: &OrientedRect, depth: f64) -> OrientedRect {
    let edge = room.nearest_edge(door.center);
    let u = edge.direction();
    let n = edge.inward_normal();
    let along: Vec<f64> = door.corners().iter().map(|c| c.sub(edge.start).dot(u)).collect();
    let lo = along.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = along.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let center = edge.start.add(u.scale(0.5 * (lo + hi))).add(n.scale(0.5 * depth));
    OrientedRect::new(center, hi - lo, depth, facing(n))
}

pub fn room_blocks(room: &RoomEnvelope, door_clearance_scale: f64) -> Vec<Block> {
    let mut out = Vec::new();
    for d in &room.doors {
        out.push(Block {
            rect: d.rect,
            kind: BlockKind::Door,
            blocking_height: f64::INFINITY,
            clearance: Some(door_clearance(&room.floor, &d.rect, d.swing_depth * door_clearance_scale)),
        });
    }
    for w in &room.windows {
        out.push(Block {
            rect: w.rect,
            kind: BlockKind::Window,
            blocking_height: w.sill_height,
            clearance: None,
        });
    }
    out
}

/// Indices of `groups` by plan area, largest first; ties keep input order.
pub fn sort_groups(groups: &[CoherentGroup]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..groups.len()).collect();
    idx.sort_by(|&a, &b| groups[b].area().total_cmp(&groups[a].area()));
    idx
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacedGroup {
    /// Index into the arranged group list.
    pub group: usize,
    pub transform: Transform,
    pub solid: Solid,
}

/// The placement test: inside the room (with the inward margin), clear of
/// placed groups under the tier rules, clear of doors and their clearance
/// zones, and over a window only when no taller than its sill.
pub fn check_ok(
    group: &CoherentGroup,
    t: &Transform,
    placed: &[PlacedGroup],
    blocks: &[Block],
    room: &Polygon,
    config: &ArrangeConfig,
) -> bool {
    let solid = group.solid_at(t);
    if !room.contains_rect(&solid.rect.shrink(config.boundary_tolerance)) {
        return false;
    }
    let rules = TierRules::default();
    if placed.iter().any(|p| rules.collides(&solid, &p.solid)) {
        return false;
    }
    blocks.iter().all(|b| {
        let hits = |r: &OrientedRect| solid.rect.overlaps(r, OVERLAP_EPS);
        match b.kind {
            BlockKind::Door => !hits(&b.rect) && !b.clearance.as_ref().is_some_and(hits),
            BlockKind::Window => solid.top <= b.blocking_height || !hits(&b.rect),
        }
    })
}

/// Group-frame transform that puts the bounding box center at `center` with
/// rotation `theta`.
fn frame_for(group: &CoherentGroup, center: Point2, theta: f64) -> Transform {
    let origin = center.sub(group.bounds.center.rotate(theta));
    Transform::planar(origin.x, origin.z, theta)
}

/// Pose with the box's back on `edge` at arc length `s` and pushed `lift`
/// into the room. A lift of half the room span puts the center mid-room.
fn wall_pose(group: &CoherentGroup, edge: &Edge, s: f64, lift: f64, span: f64) -> Transform {
    let hd = group.bounds.half_d;
    let n = edge.inward_normal();
    let offset = if span > 0.0 {
        hd + lift * (1.0 - 2.0 * hd / span).max(0.0)
    } else {
        hd
    };
    frame_for(group, edge.point_at(s).add(n.scale(offset)), facing(n))
}

fn corner_poses(group: &CoherentGroup, room: &Polygon) -> Vec<Transform> {
    let (hw, hd) = (group.bounds.half_w, group.bounds.half_d);
    let k = room.len();
    (0..k)
        .map(|i| {
            let incoming = room.edge((i + k - 1) % k);
            let outgoing = room.edge(i);
            let corner = outgoing.start;
            let (li, lo) = (incoming.length(), outgoing.length());
            let prefer_incoming = li > lo || (li == lo && incoming.index < outgoing.index);
            let (wall, other, u) = if prefer_incoming {
                (incoming, outgoing, incoming.direction().scale(-1.0))
            } else {
                (outgoing, incoming, outgoing.direction())
            };
            let n = wall.inward_normal();
            let m = other.inward_normal();
            let um = u.dot(m);
            let s0 = if um > 1e-12 {
                (-2.0 * hd * n.dot(m) / um).max(0.0)
            } else {
                0.0
            };
            let center = corner.add(u.scale(hw + s0)).add(n.scale(hd));
            frame_for(group, center, facing(n))
        })
        .collect()
}

fn neighbor_poses(group: &CoherentGroup, placed: &PlacedGroup) -> [Transform; 4] {
    let r = &placed.solid.rect;
    let (ux, uz) = r.axes();
    let (hw, hd) = (group.bounds.half_w, group.bounds.half_d);
    let back = uz.scale(hd - r.half_d);
    let th = r.theta;
    [
        frame_for(group, r.center.add(ux.scale(r.half_w + hw)).add(back), th),
        frame_for(group, r.center.sub(ux.scale(r.half_w + hw)).add(back), th),
        frame_for(group, r.center.add(uz.scale(r.half_d + hd)), th),
        frame_for(group, r.center.sub(uz.scale(r.half_d + hd)), th),
    ]
}

/// Heuristic poses in order: one per room corner (back to the longer wall),
/// one per wall midpoint (lifted by the group's lifting), four per placed
/// group (flush against each side, same rotation). Wall-mounted groups get
/// wall poses only.
pub fn heuristic_candidates(group: &CoherentGroup, room: &RoomEnvelope, placed: &[PlacedGroup]) -> Vec<Transform> {
    let span = room.span();
    let mut out = corner_poses(group, &room.floor);
    for e in room.floor.edges() {
        out.push(wall_pose(group, &e, 0.5 * e.length(), group.lifting, span));
    }
    if !group.wall_mounted {
        for p in placed {
            out.extend(neighbor_poses(group, p));
        }
    }
    out
}

/// Number of random poses on an edge of length `len` in round `n`.
pub fn samples_per_edge(len: f64, n: u32) -> usize {
    (2f64.powi(n as i32) * len).ceil() as usize
}

/// `⌈2ⁿ·len⌉` poses per wall, uniform along it with the back to the wall and
/// lifted by the group's lifting, shuffled together.
pub fn random_candidates(group: &CoherentGroup, room: &RoomEnvelope, n: u32, rng: &mut impl Rng) -> Vec<Transform> {
    let span = room.span();
    let hw = group.bounds.half_w;
    let mut out = Vec::new();
    for e in room.floor.edges() {
        let len = e.length();
        let lo = hw.min(0.5 * len);
        let hi = (len - hw).max(0.5 * len);
        for _ in 0..samples_per_edge(len, n) {
            let s = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            out.push(wall_pose(group, &e, s, group.lifting, span));
        }
    }
    out.shuffle(rng);
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InsertStats {
    pub candidates: usize,
    /// Random rounds run (0 when a heuristic pose fit).
    pub rounds: u32,
}

/// First candidate passing [`check_ok`]: heuristic poses, then random rounds
/// `1..=n_max`.
pub fn insert_rectangle(
    group: &CoherentGroup,
    room: &RoomEnvelope,
    placed: &[PlacedGroup],
    blocks: &[Block],
    rng: &mut impl Rng,
    config: &ArrangeConfig,
) -> (Option<Transform>, InsertStats) {
    let mut stats = InsertStats::default();
    let test = |cands: &[Transform], stats: &mut InsertStats| {
        let hit = par::position_first(cands, |t| check_ok(group, t, placed, blocks, &room.floor, config));
        stats.candidates += hit.map_or(cands.len(), |i| i + 1);
        hit.map(|i| cands[i])
    };
    let heur = heuristic_candidates(group, room, placed);
    if let Some(t) = test(&heur, &mut stats) {
        return (Some(t), stats);
    }
    for n in 1..=config.n_max {
        stats.rounds = n;
        let cands = random_candidates(group, room, n, rng);
        if let Some(t) = test(&cands, &mut stats) {
            return (Some(t), stats);
        }
    }
    (None, stats)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discard {
    pub group: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub group: usize,
    pub candidates: usize,
    pub rounds: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlacementResult {
    pub placed: Vec<PlacedGroup>,
    pub discarded: Vec<Discard>,
    pub stats: Vec<GroupStats>,
}

/// World poses of a group's members: the group transform composed with each
/// member's local pose.
pub fn propagate(group: &CoherentGroup, t: &Transform, objects: &[crate::scene::ObjectInstance]) -> Vec<(usize, PlacedObject)> {
    group
        .members
        .iter()
        .map(|m| {
            (
                m.object,
                PlacedObject {
                    instance_id: objects[m.object].instance_id.clone(),
                    transform: t.compose(&m.local),
                },
            )
        })
        .collect()
}

/// Places every group in [`sort_groups`] order; groups with no valid pose
/// are discarded.
pub fn arrange_groups(
    groups: &[CoherentGroup],
    room: &RoomEnvelope,
    rng: &mut impl Rng,
    config: &ArrangeConfig,
) -> PlacementResult {
    let blocks = room_blocks(room, config.door_clearance_scale);
    let mut res = PlacementResult::default();
    for g in sort_groups(groups) {
        let (t, st) = insert_rectangle(&groups[g], room, &res.placed, &blocks, rng, config);
        res.stats.push(GroupStats {
            group: g,
            candidates: st.candidates,
            rounds: st.rounds,
        });
        match t {
            Some(t) => res.placed.push(PlacedGroup {
                group: g,
                transform: t,
                solid: groups[g].solid_at(&t),
            }),
            None => res.discarded.push(Discard {
                group: g,
                reason: format!("no valid pose after {} rounds", config.n_max),
            }),
        }
    }
    res
}
