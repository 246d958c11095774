//! Scene data model and the scene JSON document format.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{normalize_angle, OrientedRect, Point2, Polygon};

/// Translation plus rotation about the vertical axis. The floor is `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Transform {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub theta: f64,
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        x: 0.0,
        y: 0.0,
        z: 0.0,
        theta: 0.0,
    };

    /// Builds a transform with `theta` normalized to `[-π, π)`.
    pub fn new(x: f64, y: f64, z: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            z,
            theta: normalize_angle(theta),
        }
    }

    pub fn planar(x: f64, z: f64, theta: f64) -> Self {
        Self::new(x, 0.0, z, theta)
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.theta.is_finite()
    }

    /// Maps a point from this transform's local frame into its parent frame.
    pub fn apply_point(&self, local: Point2) -> Point2 {
        self.position().add(local.rotate(self.theta))
    }

    /// Composes `child` (expressed in this frame) into the parent frame.
    pub fn compose(&self, child: &Transform) -> Transform {
        let p = self.apply_point(child.position());
        Transform::new(p.x, self.y + child.y, p.z, self.theta + child.theta)
    }

    /// Expresses `other` (parent frame) in this transform's local frame.
    pub fn relative(&self, other: &Transform) -> Transform {
        let d = other.position().sub(self.position()).rotate(-self.theta);
        Transform::new(d.x, other.y - self.y, d.z, other.theta - self.theta)
    }
}

/// Vertical stacking class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tier {
    Floor,
    Carpet,
    Surface,
    WallMounted,
}

/// A furniture model. Several objects in one scene may share an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectInstance {
    pub instance_id: String,
    pub width: f64,
    pub depth: f64,
    pub height: f64,
    pub tier: Tier,
    pub dominant_capable: bool,
    pub wall_mounted: bool,
    pub mount_elevation: f64,
    /// Prefers standing against a wall (beds, wardrobes, tv stands).
    pub wall_affine: bool,
}

impl ObjectInstance {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| {
            Err(Error::Validation(format!("instance {}: {msg}", self.instance_id)))
        };
        if self.instance_id.is_empty() {
            return Err(Error::Validation("empty instance id".into()));
        }
        if !(self.width > 0.0 && self.depth > 0.0 && self.height > 0.0) {
            return bad("footprint and height must be positive");
        }
        if !self.mount_elevation.is_finite() || self.mount_elevation < 0.0 {
            return bad("mount elevation must be finite and non-negative");
        }
        if self.dominant_capable && !matches!(self.tier, Tier::Floor | Tier::Surface) {
            return bad("dominant-capable instances must be floor or surface tier");
        }
        Ok(())
    }

    /// Footprint rectangle at `t`.
    pub fn footprint_at(&self, t: &Transform) -> OrientedRect {
        OrientedRect::new(t.position(), self.width, self.depth, t.theta)
    }
}

/// Instance table keyed by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    instances: BTreeMap<String, ObjectInstance>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts an instance; an existing definition with the same id is kept
    /// and `false` is returned if the two differ.
    pub fn insert(&mut self, inst: ObjectInstance) -> bool {
        match self.instances.get(&inst.instance_id) {
            Some(existing) => existing == &inst,
            None => {
                self.instances.insert(inst.instance_id.clone(), inst);
                true
            }
        }
    }

    pub fn get(&self, id: &str) -> Option<&ObjectInstance> {
        self.instances.get(id)
    }

    pub fn lookup(&self, id: &str) -> Result<&ObjectInstance> {
        self.get(id).ok_or_else(|| Error::UnknownInstance(id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ObjectInstance> {
        self.instances.values()
    }

    pub fn from_scenes<'a>(scenes: impl IntoIterator<Item = &'a Scene>) -> Self {
        let mut cat = Catalog::new();
        for s in scenes {
            for o in &s.objects {
                if !cat.insert(o.instance.clone()) {
                    tracing::warn!(
                        scene = %s.id,
                        instance = %o.instance.instance_id,
                        "conflicting instance definition ignored"
                    );
                }
            }
        }
        cat
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacedObject {
    pub instance_id: String,
    pub transform: Transform,
}

/// World-space footprint of a placed object.
pub fn world_footprint(obj: &PlacedObject, catalog: &Catalog) -> Result<OrientedRect> {
    Ok(catalog.lookup(&obj.instance_id)?.footprint_at(&obj.transform))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Door {
    pub rect: OrientedRect,
    pub swing_depth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub rect: OrientedRect,
    pub sill_height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoomEnvelope {
    pub floor: Polygon,
    pub doors: Vec<Door>,
    pub windows: Vec<Window>,
}

impl RoomEnvelope {
    pub fn rectangular(width: f64, depth: f64) -> Self {
        Self {
            floor: Polygon::rectangle(width, depth),
            doors: Vec::new(),
            windows: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.floor.vertices().iter().all(|p| p.is_finite()) {
            return Err(Error::Validation("room polygon has non-finite vertices".into()));
        }
        if !self.floor.is_simple() {
            return Err(Error::Validation("room polygon is not simple".into()));
        }
        if self.floor.area() <= 0.0 {
            return Err(Error::Validation("room polygon has no area".into()));
        }
        for (i, d) in self.doors.iter().enumerate() {
            if !self.floor.boundary_touches(&d.rect) {
                return Err(Error::Validation(format!("door {i} is off the room boundary")));
            }
        }
        for (i, w) in self.windows.iter().enumerate() {
            if !self.floor.boundary_touches(&w.rect) {
                return Err(Error::Validation(format!("window {i} is off the room boundary")));
            }
        }
        Ok(())
    }

    /// Shorter side of the room's bounding box.
    pub fn span(&self) -> f64 {
        let (lo, hi) = self.floor.bounding_box();
        (hi.x - lo.x).min(hi.z - lo.z)
    }
}

/// One object slot in a scene; the transform is absent in layout requests.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub instance: ObjectInstance,
    pub transform: Option<Transform>,
}

impl SceneObject {
    pub fn placed(&self) -> Option<PlacedObject> {
        self.transform.map(|t| PlacedObject {
            instance_id: self.instance.instance_id.clone(),
            transform: t,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub id: String,
    pub room: RoomEnvelope,
    pub objects: Vec<SceneObject>,
}

impl Scene {
    /// Checks invariants; corpus examples additionally require every object to
    /// be placed inside the room's bounding region.
    pub fn validate(&self, corpus_example: bool) -> Result<()> {
        self.room.validate()?;
        let (lo, hi) = self.room.floor.bounding_box();
        for (i, o) in self.objects.iter().enumerate() {
            o.instance.validate()?;
            match (&o.transform, corpus_example) {
                (None, true) => {
                    return Err(Error::Validation(format!("object {i} has no transform")));
                }
                (Some(t), _) if !t.is_finite() => {
                    return Err(Error::Validation(format!("object {i} has a non-finite transform")));
                }
                (Some(t), true) => {
                    let inside =
                        t.x >= lo.x && t.x <= hi.x && t.z >= lo.z && t.z <= hi.z;
                    if !inside {
                        return Err(Error::Validation(format!(
                            "object {i} ({}) lies outside the room",
                            o.instance.instance_id
                        )));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn catalog(&self) -> Catalog {
        Catalog::from_scenes(std::iter::once(self))
    }

    pub fn from_json(text: &str) -> Result<Scene> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: SceneDoc = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            file: "<inline>".into(),
            message: format!("{}: {}", e.path(), e.inner()),
        })?;
        Ok(doc.into_scene())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SceneDoc::from_scene(self)).expect("scene serializes")
    }
}

// ---------------------------------------------------------------------------
// Wire format

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    Rad,
    Deg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SceneDoc {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_unit: Option<AngleUnit>,
    pub room: RoomDoc,
    pub objects: Vec<ObjectDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomDoc {
    pub floor: Vec<[f64; 2]>,
    #[serde(default)]
    pub doors: Vec<DoorDoc>,
    #[serde(default)]
    pub windows: Vec<WindowDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DoorDoc {
    pub cx: f64,
    pub cz: f64,
    pub w: f64,
    pub d: f64,
    #[serde(default)]
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub swing_depth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowDoc {
    pub cx: f64,
    pub cz: f64,
    pub w: f64,
    pub d: f64,
    #[serde(default)]
    pub theta: f64,
    pub sill: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootprintDoc {
    pub w: f64,
    pub d: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ObjectDoc {
    pub instance_id: String,
    pub footprint: FootprintDoc,
    pub tier: Tier,
    #[serde(default)]
    pub dominant_capable: bool,
    #[serde(default)]
    pub wall_mounted: bool,
    #[serde(default)]
    pub mount_elevation: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub wall_affine: bool,
    #[serde(default)]
    pub transform: Option<Transform>,
}

impl SceneDoc {
    pub fn into_scene(self) -> Scene {
        let k = match self.angle_unit {
            Some(AngleUnit::Deg) => PI / 180.0,
            _ => 1.0,
        };
        let room = RoomEnvelope {
            floor: Polygon::new(self.room.floor.iter().map(|p| Point2::new(p[0], p[1])).collect()),
            doors: self
                .room
                .doors
                .into_iter()
                .map(|d| Door {
                    rect: OrientedRect::new(
                        Point2::new(d.cx, d.cz),
                        d.w,
                        d.d,
                        normalize_angle(d.theta * k),
                    ),
                    swing_depth: d.swing_depth.unwrap_or(d.w.max(d.d)),
                })
                .collect(),
            windows: self
                .room
                .windows
                .into_iter()
                .map(|w| Window {
                    rect: OrientedRect::new(
                        Point2::new(w.cx, w.cz),
                        w.w,
                        w.d,
                        normalize_angle(w.theta * k),
                    ),
                    sill_height: w.sill,
                })
                .collect(),
        };
        let objects = self
            .objects
            .into_iter()
            .map(|o| SceneObject {
                instance: ObjectInstance {
                    instance_id: o.instance_id,
                    width: o.footprint.w,
                    depth: o.footprint.d,
                    height: o.footprint.h,
                    tier: o.tier,
                    dominant_capable: o.dominant_capable,
                    wall_mounted: o.wall_mounted,
                    mount_elevation: o.mount_elevation,
                    wall_affine: o.wall_affine,
                },
                transform: o.transform.map(|t| Transform::new(t.x, t.y, t.z, t.theta * k)),
            })
            .collect();
        Scene {
            id: self.id,
            room,
            objects,
        }
    }

    pub fn from_scene(scene: &Scene) -> SceneDoc {
        SceneDoc {
            id: scene.id.clone(),
            angle_unit: None,
            room: RoomDoc {
                floor: scene.room.floor.vertices().iter().map(|p| [p.x, p.z]).collect(),
                doors: scene
                    .room
                    .doors
                    .iter()
                    .map(|d| DoorDoc {
                        cx: d.rect.center.x,
                        cz: d.rect.center.z,
                        w: d.rect.half_w * 2.0,
                        d: d.rect.half_d * 2.0,
                        theta: d.rect.theta,
                        swing_depth: Some(d.swing_depth),
                    })
                    .collect(),
                windows: scene
                    .room
                    .windows
                    .iter()
                    .map(|w| WindowDoc {
                        cx: w.rect.center.x,
                        cz: w.rect.center.z,
                        w: w.rect.half_w * 2.0,
                        d: w.rect.half_d * 2.0,
                        theta: w.rect.theta,
                        sill: w.sill_height,
                    })
                    .collect(),
            },
            objects: scene
                .objects
                .iter()
                .map(|o| ObjectDoc {
                    instance_id: o.instance.instance_id.clone(),
                    footprint: FootprintDoc {
                        w: o.instance.width,
                        d: o.instance.depth,
                        h: o.instance.height,
                    },
                    tier: o.instance.tier,
                    dominant_capable: o.instance.dominant_capable,
                    wall_mounted: o.instance.wall_mounted,
                    mount_elevation: o.instance.mount_elevation,
                    wall_affine: o.instance.wall_affine,
                    transform: o.transform,
                })
                .collect(),
        }
    }
}

/// Result of loading a corpus: valid scenes plus one warning per skipped scene.
#[derive(Debug, Default)]
pub struct CorpusLoad {
    pub scenes: Vec<Scene>,
    pub warnings: Vec<String>,
}

fn parse_file(path: &Path) -> Result<Vec<SceneDoc>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |e: serde_path_to_error::Error<serde_json::Error>| Error::Parse {
        file: path.display().to_string(),
        message: format!("{}: {}", e.path(), e.inner()),
    };
    if text.trim_start().starts_with('[') {
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(parse_err)
    } else {
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map(|d| vec![d]).map_err(parse_err)
    }
}

fn corpus_files(path: &Path) -> Result<Vec<PathBuf>> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(path).map_err(|e| Error::io(path, e))? {
        let p = entry.map_err(|e| Error::io(path, e))?.path();
        if p.is_file() && p.extension().is_some_and(|e| e == "json") {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

/// Loads every scene document under `path` (a file, or a directory of `.json`
/// files read in name order). Scenes that parse but break an invariant are
/// skipped with a warning; a malformed document aborts the load.
pub fn load_scene_corpus(path: &Path) -> Result<CorpusLoad> {
    let mut out = CorpusLoad::default();
    for file in corpus_files(path)? {
        for doc in parse_file(&file)? {
            let scene = doc.into_scene();
            match scene.validate(true) {
                Ok(()) => out.scenes.push(scene),
                Err(e) => {
                    let msg = format!("{}: scene {} skipped: {e}", file.display(), scene.id);
                    tracing::warn!("{msg}");
                    out.warnings.push(msg);
                }
            }
        }
    }
    Ok(out)
}

/// Writes one scene per file, named after the scene id.
pub fn write_scene_corpus(dir: &Path, scenes: &[Scene]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for s in scenes {
        let p = dir.join(format!("{}.json", s.id));
        fs::write(&p, s.to_json()).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}
