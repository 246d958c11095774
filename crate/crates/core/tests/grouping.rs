mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use layoutforge::chain::generate_chain_set;
use layoutforge::extract::{ExtractionParams, PairwiseRelation};
use layoutforge::grouping::{
    assign_dominants, build_relation_graph, coherent_components, coherent_grouping, instantiate_group, GroupContext, GroupTree,
    GroupingConfig, PlacementSource, RelationGraph,
};
use layoutforge::hyper::{enrich_hyper_relation, HyperKey, HyperParams, HyperService, InlineExecutor, ManualExecutor};
use layoutforge::layout::extract_to_store;
use layoutforge::scene::{Catalog, ObjectInstance, Tier, Transform};
use layoutforge::store::PriorStore;
use layoutforge::synth::{furniture, layout_fixtures, synth_corpus};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{bodies_collide, body, dominant, footprint, inst, UnionFind};

fn corpus_store() -> Arc<PriorStore> {
    static STORE: OnceLock<Arc<PriorStore>> = OnceLock::new();
    STORE
        .get_or_init(|| {
            let store = Arc::new(PriorStore::in_memory());
            extract_to_store(&synth_corpus(200, 7, 0.1), &ExtractionParams::default(), true, &store).unwrap();
            store
        })
        .clone()
}

fn catalog_of(objects: &[ObjectInstance]) -> Catalog {
    let mut c = Catalog::new();
    for o in objects {
        c.insert(o.clone());
    }
    c
}

fn ctx<'a>(store: &'a PriorStore, catalog: &'a Catalog, hyper: Option<&'a HyperService>) -> GroupContext<'a> {
    GroupContext {
        store,
        catalog,
        hyper,
        config: GroupingConfig::default(),
        room_span: 4.0,
    }
}

fn relate(store: &PriorStore, dom: &str, sec: &str, priors: Vec<Transform>) {
    store.save_pairwise(&PairwiseRelation::new(dom, sec, priors)).unwrap();
}

fn with_chains(store: &PriorStore, catalog: &Catalog, dom: &str, sec: &str) {
    let rel = store.load_pairwise(dom, sec).unwrap().unwrap();
    let set = generate_chain_set(&rel, catalog, &mut ChaCha8Rng::seed_from_u64(0), false).unwrap();
    store.save_chains(&set).unwrap();
}

fn living_objects() -> Vec<ObjectInstance> {
    vec![
        dominant("coffee_table", 1.2, 0.6, 0.45),
        inst("sofa", 2.1, 0.9, 0.85, Tier::Floor),
        inst("sofa", 2.1, 0.9, 0.85, Tier::Floor),
        dominant("tv_stand", 1.6, 0.45, 0.5),
        inst("tv", 1.2, 0.1, 0.7, Tier::Surface),
        inst("cabinet", 0.8, 0.4, 0.9, Tier::Floor),
        inst("cabinet", 0.8, 0.4, 0.9, Tier::Floor),
    ]
}

fn living_store() -> PriorStore {
    let s = PriorStore::in_memory();
    relate(&s, "coffee_table", "sofa", vec![Transform::planar(0.0, 1.2, PI), Transform::planar(0.0, -1.2, 0.0)]);
    relate(&s, "coffee_table", "tv_stand", vec![Transform::planar(0.0, 2.0, PI)]);
    relate(&s, "tv_stand", "tv", vec![Transform::new(0.0, 0.5, 0.05, 0.0)]);
    s
}

#[test]
fn living_room_graph_and_components() {
    let objs = living_objects();
    let g = build_relation_graph(&objs, &living_store()).unwrap();
    assert_eq!(g.edges, BTreeSet::from([(0, 1), (0, 2), (0, 3), (3, 4)]));
    assert_eq!(coherent_components(&g), vec![vec![0, 1, 2, 3, 4], vec![5], vec![6]]);
}

#[test]
fn unrelated_cabinets_have_no_edges() {
    let objs = vec![inst("cabinet", 0.8, 0.4, 0.9, Tier::Floor); 2];
    let g = build_relation_graph(&objs, &living_store()).unwrap();
    assert!(g.edges.is_empty());
    assert_eq!(coherent_components(&g).len(), 2);
    let empty = build_relation_graph(&[], &living_store()).unwrap();
    assert_eq!(empty.vertex_count, 0);
    assert!(coherent_components(&empty).is_empty());
}

#[test]
fn complete_graph_is_one_component() {
    let mut g = RelationGraph::new(5);
    for a in 0..5 {
        for b in 0..5 {
            if a != b {
                g.edges.insert((a, b));
            }
        }
    }
    assert_eq!(coherent_components(&g), vec![vec![0, 1, 2, 3, 4]]);
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> RelationGraph {
    let mut g = RelationGraph::new(n);
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.random_bool(p) {
                g.edges.insert((a, b));
            }
        }
    }
    g
}

fn union_find_components(g: &RelationGraph) -> BTreeSet<Vec<usize>> {
    let mut uf = UnionFind::new(g.vertex_count);
    for &(a, b) in &g.edges {
        uf.union(a, b);
    }
    uf.sets()
}

#[test]
fn components_match_union_find_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        let n = rng.random_range(1..=40);
        let p = rng.random_range(0.0..0.08);
        let g = random_graph(&mut rng, n, p);
        let got: BTreeSet<Vec<usize>> = coherent_components(&g).into_iter().collect();
        assert_eq!(got, union_find_components(&g));
    }
}

proptest! {
    #[test]
    fn components_partition_vertices(seed in any::<u64>(), n in 0usize..40, p in 0.0f64..0.2) {
        let g = random_graph(&mut ChaCha8Rng::seed_from_u64(seed), n, p);
        let comps = coherent_components(&g);
        let mut all: Vec<usize> = comps.iter().flatten().copied().collect();
        all.sort();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let got: BTreeSet<Vec<usize>> = comps.into_iter().collect();
        prop_assert_eq!(got, union_find_components(&g));
    }
}

fn dining(chairs: usize) -> (Vec<ObjectInstance>, PriorStore, Catalog) {
    let mut objs = vec![dominant("dining_table", 1.6, 0.9, 0.75)];
    objs.extend(std::iter::repeat_n(inst("chair", 0.45, 0.5, 0.9, Tier::Floor), chairs));
    let store = PriorStore::in_memory();
    relate(&store, "dining_table", "chair", layoutforge::synth::four_chair_poses());
    let cat = catalog_of(&objs);
    with_chains(&store, &cat, "dining_table", "chair");
    (objs, store, cat)
}

#[test]
fn chain_capacity_limits_assignments() {
    let (objs, store, _) = dining(6);
    let g = build_relation_graph(&objs, &store).unwrap();
    let comp: Vec<usize> = (0..7).collect();
    for seed in 0..10 {
        let trees = assign_dominants(&comp, &g, &objs, &store, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert_eq!(trees.len(), 3);
        let table = trees.iter().find(|t| t.root == 0).unwrap();
        assert_eq!(table.children[&0].len(), 4);
        assert_eq!(trees.iter().filter(|t| t.children.is_empty()).count(), 2);
    }
}

#[test]
fn capacity_without_chains_is_one() {
    let objs = vec![
        dominant("dining_table", 1.6, 0.9, 0.75),
        inst("chair", 0.45, 0.5, 0.9, Tier::Floor),
        inst("chair", 0.45, 0.5, 0.9, Tier::Floor),
    ];
    let store = PriorStore::in_memory();
    relate(&store, "dining_table", "chair", layoutforge::synth::four_chair_poses());
    let g = build_relation_graph(&objs, &store).unwrap();
    let trees = assign_dominants(&[0, 1, 2], &g, &objs, &store, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(trees.len(), 2);
}

#[test]
fn chair_goes_to_either_desk_or_dressing_table() {
    let objs = vec![
        dominant("desk", 1.2, 0.6, 0.75),
        dominant("dressing_table", 1.0, 0.5, 0.75),
        inst("chair", 0.5, 0.5, 0.95, Tier::Floor),
    ];
    let store = PriorStore::in_memory();
    relate(&store, "desk", "chair", vec![Transform::planar(0.0, 0.6, PI)]);
    relate(&store, "dressing_table", "chair", vec![Transform::planar(0.0, 0.55, PI)]);
    let g = build_relation_graph(&objs, &store).unwrap();
    let mut count = [0; 2];
    for seed in 0..60 {
        let trees = assign_dominants(&[0, 1, 2], &g, &objs, &store, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let owners: Vec<usize> = trees.iter().filter(|t| t.children.values().any(|c| c.contains(&2))).map(|t| t.root).collect();
        assert_eq!(owners.len(), 1);
        count[owners[0]] += 1;
    }
    assert!(count[0] > 0 && count[1] > 0, "{count:?}");
}

#[test]
fn singleton_component_is_a_trivial_tree() {
    let objs = vec![inst("wardrobe", 1.2, 0.6, 2.0, Tier::Floor)];
    let g = RelationGraph::new(1);
    let trees = assign_dominants(&[0], &g, &objs, &PriorStore::in_memory(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(trees, vec![GroupTree::singleton(0)]);
}

#[test]
fn four_chairs_come_from_one_chain() {
    let (objs, store, cat) = dining(4);
    let set = match store.load_chains("dining_table", "chair", &layoutforge::store::relation_hash(&store.load_pairwise("dining_table", "chair").unwrap().unwrap())).unwrap() {
        layoutforge::store::ChainLookup::Found(s) => s,
        other => panic!("{other:?}"),
    };
    let rel = store.load_pairwise("dining_table", "chair").unwrap().unwrap();
    let mut tree = GroupTree::singleton(0);
    tree.children.insert(0, vec![1, 2, 3, 4]);
    for seed in 0..10 {
        let out = instantiate_group(&tree, 0, &objs, &ctx(&store, &cat, None), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert!(out.detached.is_empty());
        let chairs: Vec<_> = out.group.members.iter().filter(|m| m.object != 0).collect();
        assert_eq!(chairs.len(), 4);
        assert!(chairs.iter().all(|m| m.source == PlacementSource::Chain));
        let used: BTreeSet<usize> = chairs
            .iter()
            .map(|m| rel.priors.iter().position(|p| p == &m.local).expect("pose is a stored prior"))
            .collect();
        assert!(set.chains.iter().any(|c| used.iter().all(|u| c.contains(u))));
        for (i, a) in chairs.iter().enumerate() {
            for b in &chairs[i + 1..] {
                assert!(!bodies_collide(&body(&objs[a.object], &a.local), &body(&objs[b.object], &b.local)));
            }
        }
    }
}

#[test]
fn tv_on_stand_uses_the_pairwise_prior() {
    let objs = vec![dominant("tv_stand", 1.6, 0.45, 0.5), inst("tv", 1.2, 0.1, 0.7, Tier::Surface)];
    let store = living_store();
    let cat = catalog_of(&objs);
    let mut tree = GroupTree::singleton(0);
    tree.children.insert(0, vec![1]);
    let out = instantiate_group(&tree, 0, &objs, &ctx(&store, &cat, None), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let tv = out.group.members.iter().find(|m| m.object == 1).unwrap();
    assert_eq!(tv.source, PlacementSource::Pairwise);
    assert_eq!(tv.local, Transform::new(0.0, 0.5, 0.05, 0.0));
}

#[test]
fn cached_hyper_relation_is_used_verbatim() {
    let objs = vec![
        dominant("coffee_table", 1.2, 0.6, 0.45),
        inst("sofa", 2.1, 0.9, 0.85, Tier::Floor),
        inst("tv_stand", 1.6, 0.45, 0.5, Tier::Floor),
    ];
    let store = Arc::new(living_store());
    let cat = catalog_of(&objs);
    let key = HyperKey::from_instances("coffee_table", &["sofa", "tv_stand"]).unwrap();
    let rel = enrich_hyper_relation(&key, &store, &cat, &mut ChaCha8Rng::seed_from_u64(0), &HyperParams::default());
    assert_eq!(rel.priors.len(), 2);
    store.save_hyper(&rel).unwrap();
    let exec = Arc::new(ManualExecutor::new());
    let svc = HyperService::new(Arc::clone(&store), exec.clone(), HyperParams::default());
    let mut tree = GroupTree::singleton(0);
    tree.children.insert(0, vec![1, 2]);
    let out = instantiate_group(&tree, 0, &objs, &ctx(&store, &cat, Some(&svc)), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert_eq!(exec.pending(), 0);
    let placed: Vec<Transform> = [1usize, 2]
        .iter()
        .map(|&obj| {
            let m = out.group.members.iter().find(|m| m.object == obj).unwrap();
            assert_eq!(m.source, PlacementSource::Hyper);
            m.local
        })
        .collect();
    assert!(rel.priors.iter().any(|p| p.poses.iter().map(|(_, t)| *t).collect::<Vec<_>>() == placed));
}

#[test]
fn pending_hyper_relation_falls_back_to_pairwise() {
    let objs = vec![
        dominant("coffee_table", 1.2, 0.6, 0.45),
        inst("sofa", 2.1, 0.9, 0.85, Tier::Floor),
        inst("tv_stand", 1.6, 0.45, 0.5, Tier::Floor),
    ];
    let store = Arc::new(living_store());
    let cat = catalog_of(&objs);
    let exec = Arc::new(ManualExecutor::new());
    let svc = HyperService::new(Arc::clone(&store), exec.clone(), HyperParams::default());
    let mut tree = GroupTree::singleton(0);
    tree.children.insert(0, vec![1, 2]);
    let out = instantiate_group(&tree, 0, &objs, &ctx(&store, &cat, Some(&svc)), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert_eq!(out.group.members.len(), 3);
    assert!(out.group.members[1..].iter().all(|m| m.source == PlacementSource::Pairwise));
    assert_eq!(exec.pending(), 1);
}

#[test]
fn child_without_prior_detaches() {
    let objs = vec![dominant("coffee_table", 1.2, 0.6, 0.45), inst("lamp", 0.3, 0.3, 1.5, Tier::Floor)];
    let store = living_store();
    let cat = catalog_of(&objs);
    let mut tree = GroupTree::singleton(0);
    tree.children.insert(0, vec![1]);
    let out = instantiate_group(&tree, 0, &objs, &ctx(&store, &cat, None), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(out.group.members.len(), 1);
    assert_eq!(out.detached, vec![GroupTree::singleton(1)]);
}

fn fixture_objects() -> Vec<Vec<ObjectInstance>> {
    layout_fixtures()
        .into_iter()
        .map(|s| s.objects.into_iter().map(|o| o.instance).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn grouping_partitions_and_is_sound(seed in any::<u64>(), which in 0usize..3) {
        let store = corpus_store();
        let objs = &fixture_objects()[which];
        let cat = catalog_of(objs);
        let svc = HyperService::new(Arc::clone(&store), Arc::new(InlineExecutor), HyperParams::default());
        let g = coherent_grouping(objs, &ctx(&store, &cat, Some(&svc)), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();

        let mut seen: Vec<usize> = g.groups.iter().flat_map(|gr| gr.members.iter().map(|m| m.object)).collect();
        seen.sort();
        prop_assert_eq!(seen, (0..objs.len()).collect::<Vec<_>>());

        for gr in &g.groups {
            // Members other than a parent-child pair never collide.
            let parent: BTreeMap<usize, Option<usize>> = gr.members.iter().map(|m| (m.object, m.parent)).collect();
            for (i, a) in gr.members.iter().enumerate() {
                for b in &gr.members[i + 1..] {
                    if parent[&a.object] == Some(b.object) || parent[&b.object] == Some(a.object) {
                        continue;
                    }
                    prop_assert!(!bodies_collide(&body(&objs[a.object], &a.local), &body(&objs[b.object], &b.local)),
                        "objects {} and {} collide in group {}", a.object, b.object, gr.id);
                }
            }
            let b = &gr.bounds;
            for m in &gr.members {
                for (x, z) in footprint(&objs[m.object], &m.local) {
                    prop_assert!((x - b.center.x).abs() <= b.half_w + 1e-9);
                    prop_assert!((z - b.center.z).abs() <= b.half_d + 1e-9);
                }
                prop_assert!(m.local.y >= b.base - 1e-9 && m.local.y + objs[m.object].height <= b.top + 1e-9);
            }
            prop_assert!(gr.lifting >= 0.0 && gr.lifting <= 2.0 + 1e-12);
        }
    }
}

#[test]
fn grouping_is_seed_deterministic() {
    let store = corpus_store();
    for objs in fixture_objects() {
        let cat = catalog_of(&objs);
        let run = |seed| {
            let g = coherent_grouping(&objs, &ctx(&store, &cat, None), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            format!("{:?}", g.groups)
        };
        assert_eq!(run(5), run(5));
    }
}

#[test]
fn warm_instantiation_reads_at_most_one_prior_per_node() {
    let store = corpus_store();
    let svc = HyperService::new(Arc::clone(&store), Arc::new(InlineExecutor), HyperParams::default());
    for objs in fixture_objects() {
        let cat = catalog_of(&objs);
        let c = ctx(&store, &cat, Some(&svc));
        let g = build_relation_graph(&objs, &store).unwrap();
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for comp in coherent_components(&g) {
                for tree in assign_dominants(&comp, &g, &objs, &store, &mut rng).unwrap() {
                    // First pass warms caches and generates hyper-relations.
                    instantiate_group(&tree, 0, &objs, &c, &mut rng.clone()).unwrap();
                    let before = store.counters();
                    instantiate_group(&tree, 0, &objs, &c, &mut rng).unwrap();
                    let after = store.counters();
                    assert_eq!(after.fs_reads, before.fs_reads);
                    let lookups = after.lookups - before.lookups;
                    assert!(lookups as usize <= tree.len(), "{lookups} lookups for {} nodes", tree.len());
                }
            }
        }
    }
}

#[test]
fn wall_affine_roots_hug_walls_more_often() {
    let store = PriorStore::in_memory();
    let cfg = GroupingConfig::default();
    let objs = vec![furniture("bed"), furniture("cabinet")];
    let cat = catalog_of(&objs);
    let mut zero = [0usize; 2];
    let n = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..n {
        for (i, z) in zero.iter_mut().enumerate() {
            let g = instantiate_group(&GroupTree::singleton(i), 0, &objs, &ctx(&store, &cat, None), &mut rng).unwrap();
            if g.group.lifting == 0.0 {
                *z += 1;
            }
        }
    }
    let rate = |k: usize| zero[k] as f64 / n as f64;
    assert!((rate(0) - cfg.p_wall_affine).abs() < 0.04, "{}", rate(0));
    assert!((rate(1) - cfg.p_wall).abs() < 0.04, "{}", rate(1));
}
