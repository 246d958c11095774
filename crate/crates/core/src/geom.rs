//! Planar geometry on the floor plane.
//!
//! Everything here works in `(x, z)` world coordinates; elevation is handled
//! by callers. Rectangles are oriented (center, half extents, rotation) and
//! polygons are simple and counter-clockwise.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

const ORIENT_EPS: f64 = 1e-12;

/// Wraps an angle into `[-π, π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut t = theta - two_pi * ((theta + PI) / two_pi).floor();
    if t >= PI {
        t -= two_pi;
    }
    if t < -PI {
        t += two_pi;
    }
    t
}

/// Signed angular difference `a - b` wrapped into `[-π, π]`.
pub fn wrap_angle_diff(a: f64, b: f64) -> f64 {
    normalize_angle(a - b)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub z: f64,
}

impl Point2 {
    pub const fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }

    pub fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.z + o.z)
    }

    pub fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.z - o.z)
    }

    pub fn scale(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.z * s)
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.z * o.z
    }

    /// z-component of the 3D cross product of `(x, 0, z)`-style planar vectors
    /// written as `(x, z)`; positive when `o` is counter-clockwise from `self`.
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.z - self.z * o.x
    }

    pub fn length(self) -> f64 {
        self.x.hypot(self.z)
    }

    pub fn distance(self, o: Point2) -> f64 {
        self.sub(o).length()
    }

    /// Rotates counter-clockwise by `theta`.
    pub fn rotate(self, theta: f64) -> Point2 {
        let (s, c) = theta.sin_cos();
        Point2::new(c * self.x - s * self.z, s * self.x + c * self.z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.z.is_finite()
    }
}

/// An oriented rectangle on the floor plane.
///
/// `half_w` runs along the rectangle's local x axis and `half_d` along its
/// local z axis (the "front" direction at `theta = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub center: Point2,
    pub half_w: f64,
    pub half_d: f64,
    pub theta: f64,
}

impl OrientedRect {
    pub fn new(center: Point2, width: f64, depth: f64, theta: f64) -> Self {
        Self {
            center,
            half_w: width / 2.0,
            half_d: depth / 2.0,
            theta,
        }
    }

    /// Unit vectors of the local x and z axes in world coordinates.
    pub fn axes(&self) -> (Point2, Point2) {
        let (s, c) = self.theta.sin_cos();
        (Point2::new(c, s), Point2::new(-s, c))
    }

    /// Corners in counter-clockwise order, starting at local `(+w, +d)`.
    pub fn corners(&self) -> [Point2; 4] {
        let (ux, uz) = self.axes();
        let a = ux.scale(self.half_w);
        let b = uz.scale(self.half_d);
        let c = self.center;
        [
            c.add(a).add(b),
            c.sub(a).add(b),
            c.sub(a).sub(b),
            c.add(a).sub(b),
        ]
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_w * self.half_d
    }

    /// Shrinks every side inward by `margin` (clamped at zero extent).
    pub fn shrink(&self, margin: f64) -> OrientedRect {
        OrientedRect {
            half_w: (self.half_w - margin).max(0.0),
            half_d: (self.half_d - margin).max(0.0),
            ..*self
        }
    }

    pub fn contains_point(&self, p: Point2) -> bool {
        let (ux, uz) = self.axes();
        let d = p.sub(self.center);
        d.dot(ux).abs() <= self.half_w + 1e-12 && d.dot(uz).abs() <= self.half_d + 1e-12
    }

    /// Separating-axis test; `true` when the closed rectangles are disjoint
    /// along some axis by more than `gap`.
    pub fn separated(&self, other: &OrientedRect, gap: f64) -> bool {
        let (ax, az) = self.axes();
        let (bx, bz) = other.axes();
        let d = other.center.sub(self.center);
        for axis in [ax, az, bx, bz] {
            let ra = self.half_w * ax.dot(axis).abs() + self.half_d * az.dot(axis).abs();
            let rb = other.half_w * bx.dot(axis).abs() + other.half_d * bz.dot(axis).abs();
            if d.dot(axis).abs() > ra + rb + gap {
                return true;
            }
        }
        false
    }

    /// Exact intersection area of the two rectangles.
    pub fn overlap_area(&self, other: &OrientedRect) -> f64 {
        if self.separated(other, 0.0) {
            return 0.0;
        }
        let clipped = clip_convex(&self.corners(), &other.corners());
        polygon_area(&clipped).abs()
    }

    /// Overlap test with an area tolerance: touching or sliver contact below
    /// `eps` square meters does not count.
    pub fn overlaps(&self, other: &OrientedRect, eps: f64) -> bool {
        self.overlap_area(other) >= eps
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn aabb(&self) -> (Point2, Point2) {
        bounding_box(&self.corners())
    }
}

/// Signed area via the shoelace formula; positive for counter-clockwise.
pub fn polygon_area(pts: &[Point2]) -> f64 {
    if pts.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..pts.len() {
        let a = pts[i];
        let b = pts[(i + 1) % pts.len()];
        s += a.cross(b);
    }
    s / 2.0
}

pub fn bounding_box(pts: &[Point2]) -> (Point2, Point2) {
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        lo.x = lo.x.min(p.x);
        lo.z = lo.z.min(p.z);
        hi.x = hi.x.max(p.x);
        hi.z = hi.z.max(p.z);
    }
    (lo, hi)
}

/// Sutherland–Hodgman clip of convex `subject` by convex counter-clockwise
/// `clip`.
fn clip_convex(subject: &[Point2], clip: &[Point2]) -> Vec<Point2> {
    let mut output: Vec<Point2> = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let edge = b.sub(a);
        let inside = |p: Point2| edge.cross(p.sub(a)) >= 0.0;
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let cur_in = inside(cur);
            let prev_in = inside(prev);
            if cur_in {
                if !prev_in {
                    output.push(line_intersection(prev, cur, a, b));
                }
                output.push(cur);
            } else if prev_in {
                output.push(line_intersection(prev, cur, a, b));
            }
        }
    }
    output
}

fn line_intersection(p1: Point2, p2: Point2, a: Point2, b: Point2) -> Point2 {
    let r = p2.sub(p1);
    let s = b.sub(a);
    let denom = r.cross(s);
    if denom.abs() < ORIENT_EPS {
        return p1;
    }
    let t = a.sub(p1).cross(s) / denom;
    p1.add(r.scale(t))
}

fn orientation(a: Point2, b: Point2, c: Point2) -> i8 {
    let v = b.sub(a).cross(c.sub(a));
    if v > ORIENT_EPS {
        1
    } else if v < -ORIENT_EPS {
        -1
    } else {
        0
    }
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) - ORIENT_EPS
        && p.x <= a.x.max(b.x) + ORIENT_EPS
        && p.z >= a.z.min(b.z) - ORIENT_EPS
        && p.z <= a.z.max(b.z) + ORIENT_EPS
}

/// Closed segment intersection (touching counts).
pub fn segments_intersect(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let o1 = orientation(p1, p2, q1);
    let o2 = orientation(p1, p2, q2);
    let o3 = orientation(q1, q2, p1);
    let o4 = orientation(q1, q2, p2);
    if o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0 {
        return true;
    }
    (o1 == 0 && on_segment(p1, p2, q1))
        || (o2 == 0 && on_segment(p1, p2, q2))
        || (o3 == 0 && on_segment(q1, q2, p1))
        || (o4 == 0 && on_segment(q1, q2, p2))
        || (o1 != o2 && o3 != o4)
}

/// Distance from `p` to the closed segment `a`–`b`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a.add(ab.scale(t)))
}

/// A simple polygon, stored counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point2>,
}

/// One directed boundary edge together with its inward unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub index: usize,
    pub start: Point2,
    pub end: Point2,
}

impl Edge {
    pub fn length(&self) -> f64 {
        self.start.distance(self.end)
    }

    pub fn direction(&self) -> Point2 {
        let d = self.end.sub(self.start);
        d.scale(1.0 / d.length())
    }

    /// Left normal; points into the interior of a counter-clockwise polygon.
    pub fn inward_normal(&self) -> Point2 {
        let u = self.direction();
        Point2::new(-u.z, u.x)
    }

    pub fn point_at(&self, s: f64) -> Point2 {
        self.start.add(self.direction().scale(s))
    }
}

impl Polygon {
    /// Builds a polygon, reversing clockwise input so that the stored ring is
    /// counter-clockwise. Duplicate closing vertices are dropped.
    pub fn new(mut vertices: Vec<Point2>) -> Self {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if polygon_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        Self { vertices }
    }

    pub fn rectangle(width: f64, depth: f64) -> Self {
        Self::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(width, 0.0),
            Point2::new(width, depth),
            Point2::new(0.0, depth),
        ])
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| Edge {
            index: i,
            start: self.vertices[i],
            end: self.vertices[(i + 1) % n],
        })
    }

    pub fn edge(&self, i: usize) -> Edge {
        let n = self.vertices.len();
        Edge {
            index: i % n,
            start: self.vertices[i % n],
            end: self.vertices[(i + 1) % n],
        }
    }

    pub fn bounding_box(&self) -> (Point2, Point2) {
        bounding_box(&self.vertices)
    }

    /// No two non-adjacent edges touch and no edge is degenerate.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let edges: Vec<Edge> = self.edges().collect();
        if edges.iter().any(|e| e.length() <= 0.0) {
            return false;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if segments_intersect(edges[i].start, edges[i].end, edges[j].start, edges[j].end) {
                    return false;
                }
            }
        }
        true
    }

    /// Even-odd crossing test. Points exactly on the boundary may go either way.
    pub fn contains_point(&self, p: Point2) -> bool {
        let mut inside = false;
        let n = self.vertices.len();
        let mut j = n - 1;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[j];
            if (a.z > p.z) != (b.z > p.z) {
                let x = (b.x - a.x) * (p.z - a.z) / (b.z - a.z) + a.x;
                if p.x < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// `true` when the closed rectangle lies in the polygon interior and no
    /// boundary edge touches it.
    pub fn contains_rect(&self, rect: &OrientedRect) -> bool {
        let corners = rect.corners();
        if !corners.iter().all(|c| self.contains_point(*c)) {
            return false;
        }
        for e in self.edges() {
            if rect.contains_point(e.start) {
                return false;
            }
            for k in 0..4 {
                if segments_intersect(e.start, e.end, corners[k], corners[(k + 1) % 4]) {
                    return false;
                }
            }
        }
        true
    }

    /// `true` when any boundary edge touches the rectangle.
    pub fn boundary_touches(&self, rect: &OrientedRect) -> bool {
        let corners = rect.corners();
        self.edges().any(|e| {
            rect.contains_point(e.start)
                || (0..4).any(|k| segments_intersect(e.start, e.end, corners[k], corners[(k + 1) % 4]))
        })
    }

    /// Index of the edge closest to `p`.
    pub fn nearest_edge(&self, p: Point2) -> Edge {
        self.edges()
            .min_by(|a, b| {
                point_segment_distance(p, a.start, a.end)
                    .total_cmp(&point_segment_distance(p, b.start, b.end))
            })
            .expect("polygon has edges")
    }
}
