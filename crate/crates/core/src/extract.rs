//! Pairwise relation extraction from a scene corpus.

use std::collections::BTreeMap;

use crate::dpc::{dpc_denoise, dpc_scores_with, Cutoff, CutoffOrder};
use crate::error::Error;
use crate::par;
use crate::scene::{Catalog, PlacedObject, Scene, Tier, Transform};
use crate::store::quantize_transform;

/// Pose of `secondary` in the local frame of `dominant`.
pub fn relative_pose(dominant: &PlacedObject, secondary: &PlacedObject) -> Transform {
    dominant.transform.relative(&secondary.transform)
}

/// A raw co-occurrence sample before denoising.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeSample {
    pub pose: Transform,
    pub source_scene: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractionParams {
    pub angle_weight: f64,
    pub rho_quantile: f64,
    pub delta_quantile: f64,
    pub proximity: f64,
    pub min_samples: usize,
    pub cutoff_order: CutoffOrder,
}

impl Default for ExtractionParams {
    fn default() -> Self {
        Self {
            angle_weight: 1.0,
            rho_quantile: 0.10,
            delta_quantile: 0.90,
            proximity: 3.0,
            min_samples: 4,
            cutoff_order: CutoffOrder::Ascending,
        }
    }
}

/// Parameters recorded alongside each stored relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelationMeta {
    pub angle_weight: f64,
    pub rho_quantile: f64,
    pub delta_quantile: f64,
    pub proximity: f64,
}

impl From<&ExtractionParams> for RelationMeta {
    fn from(p: &ExtractionParams) -> Self {
        Self {
            angle_weight: p.angle_weight,
            rho_quantile: p.rho_quantile,
            delta_quantile: p.delta_quantile,
            proximity: p.proximity,
        }
    }
}

impl Default for RelationMeta {
    fn default() -> Self {
        (&ExtractionParams::default()).into()
    }
}

/// Denoised relative poses from a dominant instance to a secondary one. The
/// prior order is stable: pattern chains index into it.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseRelation {
    pub dominant_id: String,
    pub secondary_id: String,
    pub priors: Vec<Transform>,
    pub meta: RelationMeta,
}

impl PairwiseRelation {
    pub fn new(dominant: &str, secondary: &str, priors: Vec<Transform>) -> Self {
        Self {
            dominant_id: dominant.to_string(),
            secondary_id: secondary.to_string(),
            priors: priors.iter().map(quantize_transform).collect(),
            meta: RelationMeta::default(),
        }
    }

    pub fn key(&self) -> (String, String) {
        (self.dominant_id.clone(), self.secondary_id.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationStats {
    pub dominant_id: String,
    pub secondary_id: String,
    pub raw_samples: usize,
    pub kept: usize,
}

impl RelationStats {
    pub fn removed(&self) -> usize {
        self.raw_samples - self.kept
    }
}

#[derive(Debug, Default)]
pub struct Extraction {
    pub relations: BTreeMap<(String, String), PairwiseRelation>,
    /// One entry per candidate pair that had samples, emitted or not.
    pub stats: Vec<RelationStats>,
}

/// Collects raw samples per `(dominant, secondary)` instance pair.
pub fn collect_samples(
    corpus: &[Scene],
    catalog: &Catalog,
    proximity: f64,
) -> BTreeMap<(String, String), Vec<RelativeSample>> {
    let mut out: BTreeMap<(String, String), Vec<RelativeSample>> = BTreeMap::new();
    for scene in corpus {
        let placed: Vec<PlacedObject> = scene.objects.iter().filter_map(|o| o.placed()).collect();
        for (i, dom) in placed.iter().enumerate() {
            let Some(dom_inst) = catalog.get(&dom.instance_id) else {
                continue;
            };
            if !dom_inst.dominant_capable {
                continue;
            }
            for (j, sec) in placed.iter().enumerate() {
                if i == j {
                    continue;
                }
                let Some(sec_inst) = catalog.get(&sec.instance_id) else {
                    continue;
                };
                let gap = dom.transform.position().distance(sec.transform.position());
                if gap > proximity {
                    continue;
                }
                let mut pose = relative_pose(dom, sec);
                if matches!(sec_inst.tier, Tier::Floor | Tier::Carpet) {
                    pose.y = 0.0;
                }
                out.entry((dom.instance_id.clone(), sec.instance_id.clone()))
                    .or_default()
                    .push(RelativeSample {
                        pose,
                        source_scene: scene.id.clone(),
                    });
            }
        }
    }
    out
}

/// Runs sample collection, density-peak scoring and denoising for every
/// co-occurring pair. Pairs are processed independently (in parallel when
/// enabled) and merged in key order.
pub fn extract_pairwise_relations(
    corpus: &[Scene],
    catalog: &Catalog,
    params: &ExtractionParams,
) -> Extraction {
    let samples: Vec<((String, String), Vec<RelativeSample>)> =
        collect_samples(corpus, catalog, params.proximity).into_iter().collect();
    let meta = RelationMeta::from(params);
    let results = par::map_slice(&samples, |((dom, sec), raw)| {
        let stats = |kept| RelationStats {
            dominant_id: dom.clone(),
            secondary_id: sec.clone(),
            raw_samples: raw.len(),
            kept,
        };
        let need = params.min_samples.max(2);
        if raw.len() < need {
            return (None, stats(0));
        }
        let poses: Vec<Transform> = raw.iter().map(|s| s.pose).collect();
        let kept = dpc_scores_with(&poses, params.angle_weight, Cutoff::Rank(params.cutoff_order))
            .and_then(|s| dpc_denoise(&s, params.rho_quantile, params.delta_quantile));
        match kept {
            Ok(idx) if idx.len() >= params.min_samples => {
                let priors = idx.iter().map(|&k| quantize_transform(&poses[k])).collect();
                let rel = PairwiseRelation {
                    dominant_id: dom.clone(),
                    secondary_id: sec.clone(),
                    priors,
                    meta,
                };
                let n = idx.len();
                (Some(rel), stats(n))
            }
            Ok(idx) => (None, stats(idx.len())),
            Err(Error::EmptyRelation) => (None, stats(0)),
            Err(e) => {
                tracing::warn!(dominant = %dom, secondary = %sec, "scoring failed: {e}");
                (None, stats(0))
            }
        }
    });
    let mut out = Extraction::default();
    for (rel, st) in results {
        if let Some(r) = rel {
            out.relations.insert(r.key(), r);
        }
        out.stats.push(st);
    }
    out
}
