//! End-to-end pipelines: corpus → store, and request scene → placed scene.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arrange::{arrange_groups, propagate, ArrangeConfig, PlacementResult};
use crate::chain::generate_chain_set;
use crate::error::Result;
use crate::extract::{extract_pairwise_relations, ExtractionParams};
use crate::grouping::{coherent_grouping, CoherentGroup, GroupContext, GroupingConfig, HyperSummary};
use crate::hyper::HyperService;
use crate::par;
use crate::scene::{Catalog, ObjectInstance, Scene, SceneDoc, Transform};
use crate::store::PriorStore;

#[derive(Debug, Clone, PartialEq)]
pub struct RelationReport {
    pub dominant: String,
    pub secondary: String,
    pub raw_samples: usize,
    pub kept: usize,
    pub emitted: bool,
    pub chains: usize,
    pub longest_chain: usize,
}

impl RelationReport {
    pub fn removal_rate(&self) -> f64 {
        if self.raw_samples == 0 {
            0.0
        } else {
            (self.raw_samples - self.kept) as f64 / self.raw_samples as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtractReport {
    pub scenes: usize,
    pub relations: Vec<RelationReport>,
}

impl ExtractReport {
    pub fn emitted(&self) -> usize {
        self.relations.iter().filter(|r| r.emitted).count()
    }
}

/// Extracts pairwise relations, precomputes their chain sets and writes both
/// to `store`. Chain generation is seeded per relation key, so the result
/// does not depend on iteration order.
pub fn extract_to_store(corpus: &[Scene], params: &ExtractionParams, align: bool, store: &PriorStore) -> Result<ExtractReport> {
    let catalog = Catalog::from_scenes(corpus);
    let ex = extract_pairwise_relations(corpus, &catalog, params);
    let rels: Vec<_> = ex.relations.values().collect();
    let chain_sets = par::map_slice(&rels, |rel| {
        let mut rng = ChaCha8Rng::seed_from_u64(par::seed_from_str(&format!("{}|{}", rel.dominant_id, rel.secondary_id)));
        generate_chain_set(rel, &catalog, &mut rng, align)
    });
    let mut report = ExtractReport {
        scenes: corpus.len(),
        relations: Vec::new(),
    };
    let mut chain_info = std::collections::BTreeMap::new();
    for (rel, set) in rels.iter().zip(chain_sets) {
        let set = set?;
        store.save_pairwise(rel)?;
        store.save_chains(&set)?;
        chain_info.insert(rel.key(), (set.chains.len(), set.max_len()));
    }
    for st in &ex.stats {
        let key = (st.dominant_id.clone(), st.secondary_id.clone());
        let info = chain_info.get(&key).copied();
        let (chains, longest) = info.unwrap_or((0, 0));
        report.relations.push(RelationReport {
            dominant: st.dominant_id.clone(),
            secondary: st.secondary_id.clone(),
            raw_samples: st.raw_samples,
            kept: st.kept,
            emitted: info.is_some(),
            chains,
            longest_chain: longest,
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayoutConfig {
    pub n_max: u32,
    pub align: bool,
    pub p_wall_affine: f64,
    pub p_wall: f64,
    pub door_clearance_scale: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        let a = ArrangeConfig::default();
        let g = GroupingConfig::default();
        Self {
            n_max: a.n_max,
            align: g.align,
            p_wall_affine: g.p_wall_affine,
            p_wall: g.p_wall,
            door_clearance_scale: a.door_clearance_scale,
        }
    }
}

impl LayoutConfig {
    pub fn arrange(&self) -> ArrangeConfig {
        ArrangeConfig {
            n_max: self.n_max,
            door_clearance_scale: self.door_clearance_scale,
            ..ArrangeConfig::default()
        }
    }

    pub fn grouping(&self) -> GroupingConfig {
        GroupingConfig {
            p_wall_affine: self.p_wall_affine,
            p_wall: self.p_wall,
            align: self.align,
            ..GroupingConfig::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct LayoutOutcome {
    /// The request scene with world transforms filled in; objects of
    /// discarded groups have none.
    pub scene: Scene,
    pub groups: Vec<CoherentGroup>,
    pub placement: PlacementResult,
    pub hyper: HyperSummary,
}

impl LayoutOutcome {
    /// Group id of every object.
    pub fn group_of(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.scene.objects.len()];
        for g in &self.groups {
            for m in &g.members {
                out[m.object] = Some(g.id);
            }
        }
        out
    }
}

/// Groups the scene's objects and arranges the groups in its room. All
/// randomness comes from one generator seeded with `seed`.
pub fn layout_scene(
    scene: &Scene,
    store: &PriorStore,
    hyper: Option<&HyperService>,
    seed: u64,
    config: &LayoutConfig,
) -> Result<LayoutOutcome> {
    let objects: Vec<ObjectInstance> = scene.objects.iter().map(|o| o.instance.clone()).collect();
    let catalog = scene.catalog();
    let ctx = GroupContext {
        store,
        catalog: &catalog,
        hyper,
        config: config.grouping(),
        room_span: scene.room.span(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grouping = coherent_grouping(&objects, &ctx, &mut rng)?;
    let placement = arrange_groups(&grouping.groups, &scene.room, &mut rng, &config.arrange());
    let mut out = scene.clone();
    for o in &mut out.objects {
        o.transform = None;
    }
    for p in &placement.placed {
        for (obj, po) in propagate(&grouping.groups[p.group], &p.transform, &objects) {
            out.objects[obj].transform = Some(po.transform);
        }
    }
    Ok(LayoutOutcome {
        scene: out,
        groups: grouping.groups,
        placement,
        hyper: grouping.hyper,
    })
}

// ---------------------------------------------------------------------------
// Wire types for the HTTP service

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LayoutConfigDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub align: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_wall_affine: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_wall: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub door_clearance_scale: Option<f64>,
}

impl LayoutConfigDoc {
    pub fn resolve(&self) -> LayoutConfig {
        let d = LayoutConfig::default();
        LayoutConfig {
            n_max: self.n_max.unwrap_or(d.n_max),
            align: self.align.unwrap_or(d.align),
            p_wall_affine: self.p_wall_affine.unwrap_or(d.p_wall_affine),
            p_wall: self.p_wall.unwrap_or(d.p_wall),
            door_clearance_scale: self.door_clearance_scale.unwrap_or(d.door_clearance_scale),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LayoutRequest {
    pub scene: SceneDoc,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub config: LayoutConfigDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MemberDoc {
    pub object: usize,
    pub instance_id: String,
    pub parent: Option<usize>,
    pub source: String,
    pub local: Transform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GroupDoc {
    pub id: usize,
    pub root: usize,
    pub members: Vec<MemberDoc>,
    pub width: f64,
    pub depth: f64,
    pub height: f64,
    pub lifting: f64,
    /// World pose of the group frame; absent when discarded.
    pub transform: Option<Transform>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DiscardDoc {
    pub group: usize,
    pub objects: Vec<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StatsDoc {
    pub groups: usize,
    pub placed: usize,
    pub discarded: usize,
    pub candidates: usize,
    pub max_rounds: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LayoutResponse {
    pub scene: SceneDoc,
    pub groups: Vec<GroupDoc>,
    pub discards: Vec<DiscardDoc>,
    pub stats: StatsDoc,
    pub hyper_status: String,
}

impl LayoutResponse {
    pub fn from_outcome(out: &LayoutOutcome) -> Self {
        let transform_of = |g: usize| out.placement.placed.iter().find(|p| p.group == g).map(|p| p.transform);
        let groups = out
            .groups
            .iter()
            .map(|g| GroupDoc {
                id: g.id,
                root: g.root,
                members: g
                    .members
                    .iter()
                    .map(|m| MemberDoc {
                        object: m.object,
                        instance_id: out.scene.objects[m.object].instance.instance_id.clone(),
                        parent: m.parent,
                        source: m.source.as_str().to_string(),
                        local: m.local,
                    })
                    .collect(),
                width: g.width(),
                depth: g.depth(),
                height: g.height(),
                lifting: g.lifting,
                transform: transform_of(g.id),
            })
            .collect();
        let discards = out
            .placement
            .discarded
            .iter()
            .map(|d| DiscardDoc {
                group: d.group,
                objects: out.groups[d.group].members.iter().map(|m| m.object).collect(),
                reason: d.reason.clone(),
            })
            .collect();
        LayoutResponse {
            scene: SceneDoc::from_scene(&out.scene),
            groups,
            discards,
            stats: StatsDoc {
                groups: out.groups.len(),
                placed: out.placement.placed.len(),
                discarded: out.placement.discarded.len(),
                candidates: out.placement.stats.iter().map(|s| s.candidates).sum(),
                max_rounds: out.placement.stats.iter().map(|s| s.rounds).max().unwrap_or(0),
            },
            hyper_status: out.hyper.as_str().to_string(),
        }
    }
}
