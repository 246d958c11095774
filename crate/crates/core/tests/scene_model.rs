mod support;

use std::f64::consts::PI;
use std::fs;

use layoutforge::geom::{normalize_angle, Point2};
use layoutforge::scene::{load_scene_corpus, world_footprint, write_scene_corpus, Catalog, PlacedObject, Scene};
use layoutforge::synth::synth_corpus;
use layoutforge::Error;
use proptest::prelude::*;
use support::{inst, rect_corners};

fn catalog_with(w: f64, d: f64) -> Catalog {
    let mut c = Catalog::new();
    c.insert(inst("box", w, d, 1.0, layoutforge::Tier::Floor));
    c
}

fn placed(x: f64, z: f64, theta: f64) -> PlacedObject {
    PlacedObject {
        instance_id: "box".into(),
        transform: layoutforge::Transform::planar(x, z, theta),
    }
}

fn sorted(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    v
}

fn close(a: &[(f64, f64)], b: &[(f64, f64)], tol: f64) -> bool {
    let (a, b) = (sorted(a.to_vec()), sorted(b.to_vec()));
    a.len() == b.len() && a.iter().zip(&b).all(|(p, q)| (p.0 - q.0).abs() < tol && (p.1 - q.1).abs() < tol)
}

fn corners_of(obj: &PlacedObject, cat: &Catalog) -> Vec<(f64, f64)> {
    world_footprint(obj, cat).unwrap().corners().iter().map(|p| (p.x, p.z)).collect()
}

#[test]
fn footprint_quarter_turn() {
    let cat = catalog_with(2.0, 1.0);
    let got = corners_of(&placed(3.0, 4.0, PI / 2.0), &cat);
    let want = vec![(2.5, 3.0), (3.5, 3.0), (2.5, 5.0), (3.5, 5.0)];
    assert!(close(&got, &want, 1e-12), "{got:?}");
}

#[test]
fn footprint_eighth_turn_matches_corner_transform() {
    let cat = catalog_with(1.0, 1.0);
    let got = corners_of(&placed(0.0, 0.0, PI / 4.0), &cat);
    let want = rect_corners(0.0, 0.0, 1.0, 1.0, PI / 4.0);
    assert!(close(&got, &want, 1e-12));
    for (x, z) in got {
        assert!(((x * x + z * z).sqrt() - 2f64.sqrt() / 2.0).abs() < 1e-12);
    }
}

#[test]
fn unknown_instance_is_a_lookup_error() {
    let r = world_footprint(&placed(0.0, 0.0, 0.0), &Catalog::new());
    assert!(matches!(r, Err(Error::UnknownInstance(_))));
}

proptest! {
    #[test]
    fn normalization_ignores_full_turns(theta in -10.0f64..10.0) {
        let base = normalize_angle(theta);
        prop_assert!((-PI..PI).contains(&base));
        for k in -3i32..=3 {
            let n = normalize_angle(theta + 2.0 * PI * k as f64);
            prop_assert!((-PI..PI).contains(&n));
            let d = (n - base).abs();
            prop_assert!(d < 1e-9 || (d - 2.0 * PI).abs() < 1e-9, "k={k}: {n} vs {base}");
        }
    }

    #[test]
    fn footprint_is_translation_equivariant(
        x in -20.0f64..20.0, z in -20.0f64..20.0, th in -PI..PI,
        dx in -5.0f64..5.0, dz in -5.0f64..5.0,
        w in 0.1f64..3.0, d in 0.1f64..3.0,
    ) {
        let cat = catalog_with(w, d);
        let a = world_footprint(&placed(x, z, th), &cat).unwrap().corners();
        let b = world_footprint(&placed(x + dx, z + dz, th), &cat).unwrap().corners();
        for (p, q) in a.iter().zip(b.iter()) {
            prop_assert!((q.x - p.x - dx).abs() < 1e-9);
            prop_assert!((q.z - p.z - dz).abs() < 1e-9);
        }
    }

    #[test]
    fn footprint_matches_corner_oracle(x in -5.0f64..5.0, z in -5.0f64..5.0, th in -PI..PI, w in 0.1f64..3.0, d in 0.1f64..3.0) {
        let cat = catalog_with(w, d);
        let got = corners_of(&placed(x, z, th), &cat);
        prop_assert!(close(&got, &rect_corners(x, z, w, d, th), 1e-9));
    }
}

#[test]
fn synthetic_corpus_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let scenes = synth_corpus(50, 3, 0.1);
    write_scene_corpus(dir.path(), &scenes).unwrap();
    let load = load_scene_corpus(dir.path()).unwrap();
    assert!(load.warnings.is_empty(), "{:?}", load.warnings);
    assert_eq!(load.scenes.len(), 50);
    for (a, b) in scenes.iter().zip(&load.scenes) {
        assert_eq!(a.id, b.id);
        assert_eq!(a.objects.len(), b.objects.len());
        for (oa, ob) in a.objects.iter().zip(&b.objects) {
            assert_eq!(oa.instance, ob.instance);
            let (ta, tb) = (oa.transform.unwrap(), ob.transform.unwrap());
            for (u, v) in [(ta.x, tb.x), (ta.y, tb.y), (ta.z, tb.z), (ta.theta, tb.theta)] {
                assert!((u - v).abs() <= 1e-9);
            }
        }
    }
    // Serializing the loaded scenes parses back to equal scenes.
    for s in &load.scenes {
        assert_eq!(&Scene::from_json(&s.to_json()).unwrap(), s);
    }
}

const VALID: &str = r#"{"id":"ok","room":{"floor":[[0,0],[4,0],[4,3],[0,3]]},
  "objects":[{"instanceId":"t","footprint":{"w":1,"d":1,"h":1},"tier":"floor",
  "transform":{"x":2,"y":0,"z":1.5,"theta":0}}]}"#;

#[test]
fn two_files_load_two_scenes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.json"), VALID).unwrap();
    fs::write(dir.path().join("b.json"), VALID.replace("\"ok\"", "\"ok2\"")).unwrap();
    let load = load_scene_corpus(dir.path()).unwrap();
    assert_eq!(load.scenes.len(), 2);
    assert!(load.warnings.is_empty());
}

#[test]
fn self_intersecting_room_is_skipped_with_one_warning() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.json"), VALID).unwrap();
    let bowtie = VALID
        .replace("\"ok\"", "\"bowtie\"")
        .replace("[[0,0],[4,0],[4,3],[0,3]]", "[[0,0],[4,3],[4,0],[0,3]]");
    fs::write(dir.path().join("b.json"), bowtie).unwrap();
    let load = load_scene_corpus(dir.path()).unwrap();
    assert_eq!(load.scenes.len(), 1);
    assert_eq!(load.warnings.len(), 1);
    assert!(load.warnings[0].contains("bowtie"));
}

#[test]
fn malformed_document_names_file_and_field() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), VALID.replace("\"w\":1", "\"w\":\"wide\"")).unwrap();
    let err = load_scene_corpus(dir.path()).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("bad.json"), "{msg}");
    assert!(msg.contains("footprint.w"), "{msg}");
}

#[test]
fn degrees_are_converted_at_load() {
    let text = VALID.replace("\"id\":\"ok\"", "\"id\":\"ok\",\"angleUnit\":\"deg\"").replace("\"theta\":0", "\"theta\":90");
    let s = Scene::from_json(&text).unwrap();
    assert!((s.objects[0].transform.unwrap().theta - PI / 2.0).abs() < 1e-12);
}

#[test]
fn swing_depth_defaults_to_longer_door_side() {
    let text = VALID.replace(
        "[[0,0],[4,0],[4,3],[0,3]]}",
        "[[0,0],[4,0],[4,3],[0,3]],\"doors\":[{\"cx\":1,\"cz\":0,\"w\":0.9,\"d\":0.1,\"theta\":0}]}",
    );
    let s = Scene::from_json(&text).unwrap();
    assert_eq!(s.room.doors[0].swing_depth, 0.9);
    assert!(s.room.doors[0].rect.contains_point(Point2::new(1.0, 0.0)));
}
