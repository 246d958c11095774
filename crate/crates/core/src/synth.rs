//! Synthetic corpora and layout fixtures with known ground truth.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geom::{OrientedRect, Point2, Polygon};
use crate::scene::{Door, ObjectInstance, RoomEnvelope, Scene, SceneObject, Tier, Transform, Window};

const JITTER: f64 = 0.01;
const PRESENCE: f64 = 0.85;
const NOISE_EXTENT: f64 = 2.5;

fn instance(id: &str, w: f64, d: f64, h: f64) -> ObjectInstance {
    ObjectInstance {
        instance_id: id.into(),
        width: w,
        depth: d,
        height: h,
        tier: Tier::Floor,
        dominant_capable: false,
        wall_mounted: false,
        mount_elevation: 0.0,
        wall_affine: false,
    }
}

fn dominant(mut i: ObjectInstance) -> ObjectInstance {
    i.dominant_capable = true;
    i
}

fn wall_affine(mut i: ObjectInstance) -> ObjectInstance {
    i.wall_affine = true;
    i
}

/// The furniture used by every synthetic corpus and fixture, by id.
pub fn furniture(id: &str) -> ObjectInstance {
    match id {
        "dining_table" => dominant(instance(id, 1.6, 0.9, 0.75)),
        "dining_chair" => instance(id, 0.45, 0.5, 0.9),
        "coffee_table" => dominant(instance(id, 1.2, 0.6, 0.45)),
        "sofa3" => instance(id, 2.1, 0.9, 0.85),
        "armchair" => instance(id, 0.8, 0.8, 0.85),
        "tv_stand" => wall_affine(dominant(instance(id, 1.6, 0.45, 0.5))),
        "tv" => ObjectInstance {
            tier: Tier::Surface,
            ..instance(id, 1.2, 0.1, 0.7)
        },
        "rug" => ObjectInstance {
            tier: Tier::Carpet,
            ..instance(id, 2.0, 1.4, 0.01)
        },
        "bed" => wall_affine(dominant(instance(id, 1.6, 2.1, 1.0))),
        "nightstand" => instance(id, 0.45, 0.4, 0.55),
        "wardrobe" => wall_affine(instance(id, 1.2, 0.6, 2.0)),
        "desk" => dominant(instance(id, 1.2, 0.6, 0.75)),
        "desk_chair" => instance(id, 0.5, 0.5, 0.95),
        "cabinet" => instance(id, 0.8, 0.4, 0.9),
        "plant" => instance(id, 0.4, 0.4, 1.2),
        "painting" => ObjectInstance {
            tier: Tier::WallMounted,
            wall_mounted: true,
            mount_elevation: 1.5,
            ..instance(id, 0.8, 0.05, 0.6)
        },
        _ => panic!("unknown synthetic instance `{id}`"),
    }
}

/// Relative poses of the table's four chairs in [`four_pose_corpus`].
pub fn four_chair_poses() -> Vec<Transform> {
    vec![
        Transform::planar(0.0, 0.7, PI),
        Transform::planar(0.0, -0.7, 0.0),
        Transform::planar(1.05, 0.0, FRAC_PI_2),
        Transform::planar(-1.05, 0.0, -FRAC_PI_2),
    ]
}

struct Template {
    dominant: &'static str,
    /// Members relative to the dominant.
    members: Vec<(&'static str, Transform)>,
}

fn templates() -> Vec<Template> {
    let tv_stand = Transform::planar(0.0, 2.0, PI);
    vec![
        Template {
            dominant: "dining_table",
            members: vec![
                ("dining_chair", Transform::planar(0.4, 0.7, PI)),
                ("dining_chair", Transform::planar(-0.4, 0.7, PI)),
                ("dining_chair", Transform::planar(0.4, -0.7, 0.0)),
                ("dining_chair", Transform::planar(-0.4, -0.7, 0.0)),
                ("dining_chair", Transform::planar(1.05, 0.0, FRAC_PI_2)),
                ("dining_chair", Transform::planar(-1.05, 0.0, -FRAC_PI_2)),
            ],
        },
        Template {
            dominant: "coffee_table",
            members: vec![
                ("sofa3", Transform::planar(0.0, -1.1, 0.0)),
                ("armchair", Transform::planar(1.3, 0.0, FRAC_PI_2)),
                ("armchair", Transform::planar(-1.3, 0.0, -FRAC_PI_2)),
                ("tv_stand", tv_stand),
                ("tv", tv_stand.compose(&Transform::new(0.0, 0.5, 0.05, 0.0))),
                ("rug", Transform::IDENTITY),
            ],
        },
        Template {
            dominant: "bed",
            members: vec![
                ("nightstand", Transform::planar(1.05, -0.85, 0.0)),
                ("nightstand", Transform::planar(-1.05, -0.85, 0.0)),
            ],
        },
        Template {
            dominant: "desk",
            members: vec![("desk_chair", Transform::planar(0.0, 0.55, PI))],
        },
    ]
}

struct Sampler {
    rng: ChaCha8Rng,
    jitter: Normal<f64>,
}

impl Sampler {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            jitter: Normal::new(0.0, JITTER).expect("valid sigma"),
        }
    }

    fn jittered(&mut self, t: &Transform) -> Transform {
        let j = &self.jitter;
        let r = &mut self.rng;
        Transform::new(t.x + j.sample(r), t.y, t.z + j.sample(r), t.theta + j.sample(r))
    }

    fn uniform_pose(&mut self) -> Transform {
        let r = &mut self.rng;
        Transform::planar(
            r.random_range(-NOISE_EXTENT..NOISE_EXTENT),
            r.random_range(-NOISE_EXTENT..NOISE_EXTENT),
            r.random_range(-PI..PI),
        )
    }

    fn dominant_pose(&mut self) -> Transform {
        let r = &mut self.rng;
        Transform::planar(r.random_range(3.5..6.5), r.random_range(3.5..6.5), r.random_range(-PI..PI))
    }

    /// Places a template in a 10 m room. Each member appears with a fixed
    /// probability; with probability `noise` its pose is replaced by a
    /// uniform one around the dominant.
    fn scene(&mut self, id: String, dom: &str, members: &[(&str, Transform)], noise: f64, all_present: bool) -> Scene {
        let world = self.dominant_pose();
        let mut objects = vec![SceneObject {
            instance: furniture(dom),
            transform: Some(world),
        }];
        for (inst, rel) in members {
            if !all_present && !self.rng.random_bool(PRESENCE) {
                continue;
            }
            let local = if self.rng.random_bool(noise) {
                self.uniform_pose()
            } else {
                self.jittered(rel)
            };
            objects.push(SceneObject {
                instance: furniture(inst),
                transform: Some(world.compose(&local)),
            });
        }
        Scene {
            id,
            room: RoomEnvelope::rectangular(10.0, 10.0),
            objects,
        }
    }
}

/// `n` scenes cycling through the dining, living, bedroom and desk
/// templates.
pub fn synth_corpus(n: usize, seed: u64, noise: f64) -> Vec<Scene> {
    let templates = templates();
    let mut s = Sampler::new(seed);
    (0..n)
        .map(|i| {
            let t = &templates[i % templates.len()];
            s.scene(format!("synth-{i:04}"), t.dominant, &t.members, noise, false)
        })
        .collect()
}

/// A table with four chairs per scene at [`four_chair_poses`]; each chair is
/// replaced by a uniform pose with probability `noise`.
pub fn four_pose_corpus(n_scenes: usize, noise: f64, seed: u64) -> (Vec<Scene>, Vec<Transform>) {
    let truth = four_chair_poses();
    let members: Vec<(&str, Transform)> = truth.iter().map(|t| ("dining_chair", *t)).collect();
    let mut s = Sampler::new(seed);
    let scenes = (0..n_scenes)
        .map(|i| s.scene(format!("four-{i:04}"), "dining_table", &members, noise, true))
        .collect();
    (scenes, truth)
}

/// 95 poses in two tight clusters plus 5 uniform outliers, shuffled. The
/// flag marks outliers.
pub fn two_cluster_samples(seed: u64) -> (Vec<Transform>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, 0.03).expect("valid sigma");
    let centers = [Transform::planar(0.0, 0.8, PI), Transform::planar(0.0, -0.8, 0.0)];
    let mut out: Vec<(Transform, bool)> = (0..95)
        .map(|i| {
            let c = centers[i % 2];
            let t = Transform::planar(c.x + n.sample(&mut rng), c.z + n.sample(&mut rng), c.theta + n.sample(&mut rng));
            (t, false)
        })
        .collect();
    for _ in 0..5 {
        let t = Transform::planar(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-PI..PI));
        out.push((t, true));
    }
    rand::seq::SliceRandom::shuffle(out.as_mut_slice(), &mut rng);
    out.into_iter().unzip()
}

fn objects(ids: &[&str]) -> Vec<SceneObject> {
    ids.iter()
        .map(|id| SceneObject {
            instance: furniture(id),
            transform: None,
        })
        .collect()
}

fn door(cx: f64, cz: f64, w: f64, theta: f64) -> Door {
    Door {
        rect: OrientedRect::new(Point2::new(cx, cz), w, 0.1, theta),
        swing_depth: w,
    }
}

fn window(cx: f64, cz: f64, w: f64, theta: f64, sill: f64) -> Window {
    Window {
        rect: OrientedRect::new(Point2::new(cx, cz), w, 0.1, theta),
        sill_height: sill,
    }
}

/// 4 × 5 m bedroom with a door and a window: bed with two nightstands,
/// wardrobe, desk with chair.
pub fn bedroom_scene() -> Scene {
    let mut room = RoomEnvelope::rectangular(4.0, 5.0);
    room.doors.push(door(3.3, 0.0, 0.9, 0.0));
    room.windows.push(window(4.0, 2.5, 1.2, FRAC_PI_2, 0.9));
    Scene {
        id: "bedroom".into(),
        room,
        objects: objects(&["bed", "nightstand", "nightstand", "wardrobe", "desk", "desk_chair"]),
    }
}

/// L-shaped open-plan room with dining and living furniture (16 objects).
pub fn living_dining_scene() -> Scene {
    let floor = Polygon::new(
        [(0.0, 0.0), (9.0, 0.0), (9.0, 7.0), (4.0, 7.0), (4.0, 4.5), (0.0, 4.5)]
            .iter()
            .map(|&(x, z)| Point2::new(x, z))
            .collect(),
    );
    let room = RoomEnvelope {
        floor,
        doors: vec![door(1.0, 0.0, 0.9, 0.0)],
        windows: vec![window(9.0, 3.5, 1.6, FRAC_PI_2, 0.8), window(6.5, 7.0, 1.4, 0.0, 0.9)],
    };
    Scene {
        id: "living-dining".into(),
        room,
        objects: objects(&[
            "dining_table",
            "dining_chair",
            "dining_chair",
            "dining_chair",
            "dining_chair",
            "coffee_table",
            "sofa3",
            "armchair",
            "armchair",
            "tv_stand",
            "tv",
            "rug",
            "cabinet",
            "cabinet",
            "plant",
            "painting",
        ]),
    }
}

/// 3.2 × 3.4 m room with more furniture than fits comfortably.
pub fn crowded_scene() -> Scene {
    let mut room = RoomEnvelope::rectangular(3.2, 3.4);
    room.doors.push(door(0.0, 2.8, 0.8, FRAC_PI_2));
    room.windows.push(window(1.6, 3.4, 1.0, 0.0, 1.0));
    Scene {
        id: "crowded".into(),
        room,
        objects: objects(&[
            "bed",
            "nightstand",
            "nightstand",
            "wardrobe",
            "desk",
            "desk_chair",
            "cabinet",
            "cabinet",
            "plant",
            "armchair",
            "painting",
        ]),
    }
}

/// The three layout fixtures.
pub fn layout_fixtures() -> Vec<Scene> {
    vec![bedroom_scene(), living_dining_scene(), crowded_scene()]
}
