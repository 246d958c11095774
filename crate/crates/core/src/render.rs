//! Top-down SVG of a laid-out scene. One unit is a centimeter; the floor's
//! z axis maps to SVG y.

use std::fmt::Write;

use crate::arrange::door_clearance;
use crate::geom::{OrientedRect, Point2};
use crate::scene::Scene;

const SCALE: f64 = 100.0;
const MARGIN: f64 = 20.0;
const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
];

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn points(pts: &[Point2]) -> String {
    pts.iter()
        .map(|p| format!("{:.1},{:.1}", p.x * SCALE, p.z * SCALE))
        .collect::<Vec<_>>()
        .join(" ")
}

fn rect_polygon(svg: &mut String, class: &str, r: &OrientedRect) {
    let _ = writeln!(svg, r#"  <polygon class="{class}" points="{}"/>"#, points(&r.corners()));
}

/// Renders `scene`. `group_of[i]` colors object `i`; objects without a
/// transform are left out.
pub fn render_svg(scene: &Scene, group_of: &[Option<usize>]) -> String {
    let (lo, hi) = scene.room.floor.bounding_box();
    let (x0, y0) = (lo.x * SCALE - MARGIN, lo.z * SCALE - MARGIN);
    let (w, h) = ((hi.x - lo.x) * SCALE + 2.0 * MARGIN, (hi.z - lo.z) * SCALE + 2.0 * MARGIN);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0:.1} {y0:.1} {w:.1} {h:.1}" width="{w:.0}" height="{h:.0}">"#
    );
    svg.push_str("  <style>\n");
    svg.push_str("    .room { fill: #f7f5f0; stroke: #333; stroke-width: 4; }\n");
    svg.push_str("    .door { fill: #8d6e63; }\n    .clearance { fill: #8d6e63; fill-opacity: 0.15; }\n");
    svg.push_str("    .window { fill: #81d4fa; }\n    .object { fill-opacity: 0.7; stroke: #222; stroke-width: 1; }\n");
    for (i, c) in PALETTE.iter().enumerate() {
        let _ = writeln!(svg, "    .group-{i} {{ fill: {c}; }}");
    }
    svg.push_str("  </style>\n");
    let _ = writeln!(svg, "  <title>{}</title>", escape(&scene.id));
    let _ = writeln!(svg, r#"  <polygon class="room" points="{}"/>"#, points(scene.room.floor.vertices()));
    for d in &scene.room.doors {
        rect_polygon(&mut svg, "clearance", &door_clearance(&scene.room.floor, &d.rect, d.swing_depth));
        rect_polygon(&mut svg, "door", &d.rect);
    }
    for win in &scene.room.windows {
        rect_polygon(&mut svg, "window", &win.rect);
    }
    for (i, o) in scene.objects.iter().enumerate() {
        let Some(t) = o.transform else { continue };
        let g = group_of.get(i).copied().flatten().unwrap_or(0);
        let (ow, od) = (o.instance.width * SCALE, o.instance.depth * SCALE);
        let _ = writeln!(
            svg,
            r#"  <rect class="object group-{}" data-instance="{}" x="{:.1}" y="{:.1}" width="{ow:.1}" height="{od:.1}" transform="translate({:.1} {:.1}) rotate({:.2})"/>"#,
            g % PALETTE.len(),
            escape(&o.instance.instance_id),
            -ow / 2.0,
            -od / 2.0,
            t.x * SCALE,
            t.z * SCALE,
            t.theta.to_degrees(),
        );
    }
    svg.push_str("</svg>\n");
    svg
}
