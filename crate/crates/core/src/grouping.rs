//! Coherent grouping: split a request's objects into connected components of
//! the relation graph, pick one dominant per secondary, and lay each tree out
//! locally from the stored priors.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::chain::{align_poses, AlignParams};
use crate::error::Result;
use crate::extract::PairwiseRelation;
use crate::geom::{OrientedRect, Point2};
use crate::hyper::{HyperKey, HyperResponse, HyperService, HyperStatus};
use crate::scene::{Catalog, ObjectInstance, Tier, Transform};
use crate::store::{relation_hash, ChainLookup, PriorStore};
use crate::tier::{Solid, TierRules};

/// Directed edges `dominant → secondary` between object indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelationGraph {
    pub vertex_count: usize,
    pub edges: BTreeSet<(usize, usize)>,
}

impl RelationGraph {
    pub fn new(vertex_count: usize) -> Self {
        Self {
            vertex_count,
            edges: BTreeSet::new(),
        }
    }

    /// Dominants with an edge into `v`.
    pub fn dominants_of(&self, v: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.1 == v).map(|e| e.0).collect()
    }
}

/// An edge `a → b` exists when `a` may dominate and the store holds a
/// relation from `a`'s instance to `b`'s.
pub fn build_relation_graph(objects: &[ObjectInstance], store: &PriorStore) -> Result<RelationGraph> {
    let mut g = RelationGraph::new(objects.len());
    let mut known: HashMap<(&str, &str), bool> = HashMap::new();
    for (a, da) in objects.iter().enumerate() {
        if !da.dominant_capable {
            continue;
        }
        for (b, db) in objects.iter().enumerate() {
            if a == b {
                continue;
            }
            let k = (da.instance_id.as_str(), db.instance_id.as_str());
            let exists = match known.get(&k) {
                Some(&e) => e,
                None => {
                    let e = store.load_pairwise(k.0, k.1)?.is_some();
                    known.insert(k, e);
                    e
                }
            };
            if exists {
                g.edges.insert((a, b));
            }
        }
    }
    Ok(g)
}

/// Maximal connected components with edges taken as undirected. Each
/// component is sorted; components are ordered by their smallest vertex.
pub fn coherent_components(graph: &RelationGraph) -> Vec<Vec<usize>> {
    let n = graph.vertex_count;
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in &graph.edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// A dominant tree: `children[p]` lists the objects placed relative to `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupTree {
    pub root: usize,
    pub children: BTreeMap<usize, Vec<usize>>,
}

impl GroupTree {
    pub fn singleton(root: usize) -> Self {
        Self {
            root,
            children: BTreeMap::new(),
        }
    }

    /// Nodes in breadth-first order from the root.
    pub fn nodes(&self) -> Vec<usize> {
        let mut out = vec![self.root];
        let mut i = 0;
        while i < out.len() {
            if let Some(c) = self.children.get(&out[i]) {
                out.extend(c);
            }
            i += 1;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.nodes().len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The subtree rooted at `v`.
    pub fn subtree(&self, v: usize) -> GroupTree {
        let mut t = GroupTree::singleton(v);
        let mut stack = vec![v];
        while let Some(p) = stack.pop() {
            if let Some(c) = self.children.get(&p) {
                t.children.insert(p, c.clone());
                stack.extend(c);
            }
        }
        t
    }
}

/// Maximum number of copies of `secondary` that `dominant` can hold: the
/// longest stored chain, or 1 without a usable chain set.
fn capacity(store: &PriorStore, dominant: &str, secondary: &str) -> Result<usize> {
    let Some(rel) = store.load_pairwise(dominant, secondary)? else {
        return Ok(0);
    };
    Ok(match store.load_chains(dominant, secondary, &relation_hash(&rel))? {
        ChainLookup::Found(set) => set.max_len().max(1),
        _ => 1,
    })
}

/// Gives every secondary in `component` at most one dominant, chosen
/// uniformly among candidates with spare capacity that would not close a
/// cycle. Secondaries left without a dominant become roots of their own
/// trees.
pub fn assign_dominants(
    component: &[usize],
    graph: &RelationGraph,
    objects: &[ObjectInstance],
    store: &PriorStore,
    rng: &mut impl Rng,
) -> Result<Vec<GroupTree>> {
    let members: BTreeSet<usize> = component.iter().copied().collect();
    let mut secondaries: Vec<usize> = component
        .iter()
        .copied()
        .filter(|&v| graph.dominants_of(v).iter().any(|d| members.contains(d)))
        .collect();
    secondaries.shuffle(rng);

    let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
    let mut used: HashMap<(usize, &str), usize> = HashMap::new();
    let mut caps: HashMap<(&str, &str), usize> = HashMap::new();
    for b in secondaries {
        let b_inst = objects[b].instance_id.as_str();
        let mut viable = Vec::new();
        for a in graph.dominants_of(b) {
            if !members.contains(&a) {
                continue;
            }
            let a_inst = objects[a].instance_id.as_str();
            let cap = match caps.get(&(a_inst, b_inst)) {
                Some(&c) => c,
                None => {
                    let c = capacity(store, a_inst, b_inst)?;
                    caps.insert((a_inst, b_inst), c);
                    c
                }
            };
            if used.get(&(a, b_inst)).copied().unwrap_or(0) >= cap {
                continue;
            }
            // Walking up from `a` must not reach `b`.
            let mut up = Some(a);
            let mut cyclic = false;
            while let Some(u) = up {
                if u == b {
                    cyclic = true;
                    break;
                }
                up = parent.get(&u).copied();
            }
            if !cyclic {
                viable.push(a);
            }
        }
        if let Some(&a) = viable.choose(rng) {
            parent.insert(b, a);
            *used.entry((a, b_inst)).or_default() += 1;
        }
    }

    let mut trees = Vec::new();
    for &v in component {
        if parent.contains_key(&v) {
            continue;
        }
        let mut t = GroupTree::singleton(v);
        let mut stack = vec![v];
        while let Some(p) = stack.pop() {
            let kids: Vec<usize> = parent.iter().filter(|(_, &q)| q == p).map(|(&c, _)| c).collect();
            if !kids.is_empty() {
                stack.extend(&kids);
                t.children.insert(p, kids);
            }
        }
        trees.push(t);
    }
    Ok(trees)
}

/// Which prior kind placed a member.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementSource {
    Root,
    Hyper,
    Chain,
    Pairwise,
}

impl PlacementSource {
    pub fn as_str(self) -> &'static str {
        match self {
            PlacementSource::Root => "root",
            PlacementSource::Hyper => "hyper",
            PlacementSource::Chain => "chain",
            PlacementSource::Pairwise => "pairwise",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupMember {
    pub object: usize,
    pub parent: Option<usize>,
    pub source: PlacementSource,
    /// Pose in the group frame (root at the origin, facing +z).
    pub local: Transform,
}

/// Axis-aligned box around all members in the group frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupBounds {
    pub center: Point2,
    pub half_w: f64,
    pub half_d: f64,
    pub base: f64,
    pub top: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherentGroup {
    pub id: usize,
    pub root: usize,
    pub members: Vec<GroupMember>,
    pub bounds: GroupBounds,
    /// Distance the group keeps from its wall; 0 means against the wall.
    pub lifting: f64,
    pub tier: Tier,
    pub wall_mounted: bool,
}

impl CoherentGroup {
    pub fn width(&self) -> f64 {
        2.0 * self.bounds.half_w
    }

    pub fn depth(&self) -> f64 {
        2.0 * self.bounds.half_d
    }

    pub fn height(&self) -> f64 {
        self.bounds.top - self.bounds.base
    }

    pub fn area(&self) -> f64 {
        self.width() * self.depth()
    }

    /// Plan rectangle of the bounding box when the group frame sits at `t`.
    pub fn rect_at(&self, t: &Transform) -> OrientedRect {
        OrientedRect::new(t.apply_point(self.bounds.center), self.width(), self.depth(), t.theta)
    }

    pub fn solid_at(&self, t: &Transform) -> Solid {
        Solid {
            rect: self.rect_at(t),
            tier: self.tier,
            base: t.y + self.bounds.base,
            top: t.y + self.bounds.top,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupingConfig {
    /// Chance of a zero lifting for groups whose root prefers walls.
    pub p_wall_affine: f64,
    pub p_wall: f64,
    pub align: bool,
    pub align_params: AlignParams,
}

impl Default for GroupingConfig {
    fn default() -> Self {
        Self {
            p_wall_affine: 0.8,
            p_wall: 0.3,
            align: true,
            align_params: AlignParams::default(),
        }
    }
}

pub struct GroupContext<'a> {
    pub store: &'a PriorStore,
    pub catalog: &'a Catalog,
    /// Without a service, hyper-relations are skipped.
    pub hyper: Option<&'a HyperService>,
    pub config: GroupingConfig,
    /// Shorter side of the room; liftings are drawn from `(0, room_span/2]`.
    pub room_span: f64,
}

#[derive(Debug, Clone)]
pub struct Instantiated {
    pub group: CoherentGroup,
    /// Subtrees whose root could not be placed; each becomes its own group.
    pub detached: Vec<GroupTree>,
    pub hyper_statuses: Vec<HyperStatus>,
}

struct Layout<'o> {
    objects: &'o [ObjectInstance],
    rules: TierRules,
    members: Vec<GroupMember>,
    solids: Vec<(usize, Solid)>,
}

impl Layout<'_> {
    /// `true` when `obj` at `t` collides with nothing placed except `parent`.
    fn fits(&self, obj: usize, parent: usize, t: &Transform) -> bool {
        let s = Solid::of(&self.objects[obj], t);
        self.solids
            .iter()
            .all(|(o, other)| *o == parent || !self.rules.collides(&s, other))
    }

    fn place(&mut self, obj: usize, parent: Option<usize>, source: PlacementSource, t: Transform) {
        self.solids.push((obj, Solid::of(&self.objects[obj], &t)));
        self.members.push(GroupMember {
            object: obj,
            parent,
            source,
            local: t,
        });
    }

    fn local_of(&self, obj: usize) -> Transform {
        self.members
            .iter()
            .find(|m| m.object == obj)
            .expect("parent placed before children")
            .local
    }
}

/// Lays out one dominant tree in its own frame.
///
/// Per parent: two or more distinct child instances use a complete
/// hyper-relation when one is available; identical children take a prefix
/// of a pattern chain; anything left samples pairwise priors that do not
/// collide with what is already placed. Children with no usable prior are
/// detached together with their subtrees.
pub fn instantiate_group(
    tree: &GroupTree,
    id: usize,
    objects: &[ObjectInstance],
    ctx: &GroupContext<'_>,
    rng: &mut impl Rng,
) -> Result<Instantiated> {
    let root_inst = &objects[tree.root];
    let root_local = if root_inst.wall_mounted {
        Transform::new(0.0, root_inst.mount_elevation, 0.0, 0.0)
    } else {
        Transform::IDENTITY
    };
    let mut lay = Layout {
        objects,
        rules: TierRules::default(),
        members: Vec::new(),
        solids: Vec::new(),
    };
    lay.place(tree.root, None, PlacementSource::Root, root_local);

    let mut rels: HashMap<(String, String), Option<Arc<PairwiseRelation>>> = HashMap::new();
    let mut relation = |dom: &str, sec: &str| -> Result<Option<Arc<PairwiseRelation>>> {
        let k = (dom.to_string(), sec.to_string());
        if let Some(r) = rels.get(&k) {
            return Ok(r.clone());
        }
        let r = ctx.store.load_pairwise(dom, sec)?;
        rels.insert(k, r.clone());
        Ok(r)
    };

    let mut detached = Vec::new();
    let mut statuses = Vec::new();
    let mut queue = VecDeque::from([tree.root]);
    while let Some(p) = queue.pop_front() {
        let Some(kids) = tree.children.get(&p) else {
            continue;
        };
        let p_inst = objects[p].instance_id.as_str();
        let p_local = lay.local_of(p);
        let mut by_inst: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for &k in kids {
            by_inst.entry(objects[k].instance_id.as_str()).or_default().push(k);
        }
        let before = lay.members.len();

        if by_inst.len() >= 2 {
            if let Some(svc) = ctx.hyper {
                let key = HyperKey::new(p_inst, by_inst.iter().map(|(i, v)| (i.to_string(), v.len())))?;
                let resp = svc.request(&key, ctx.catalog);
                statuses.push(resp.status());
                if let HyperResponse::Complete(rel) = resp {
                    let prior = rel.priors.choose(rng).expect("complete relations are non-empty");
                    let slots: Vec<usize> = by_inst.values().flatten().copied().collect();
                    let poses: Vec<(usize, Transform)> = prior
                        .poses
                        .iter()
                        .map(|(s, t)| (slots[*s], p_local.compose(t)))
                        .collect();
                    let mark = lay.members.len();
                    let mut ok = true;
                    for &(obj, t) in &poses {
                        if !lay.fits(obj, p, &t) {
                            ok = false;
                            break;
                        }
                        lay.place(obj, Some(p), PlacementSource::Hyper, t);
                    }
                    if ok {
                        by_inst.clear();
                    } else {
                        lay.members.truncate(mark);
                        lay.solids.truncate(mark);
                    }
                }
            }
        }

        for (sec, ks) in by_inst {
            let Some(rel) = relation(p_inst, sec)? else {
                for &k in &ks {
                    tracing::warn!(object = k, "no prior from {p_inst} to {sec}; detaching");
                    detached.push(tree.subtree(k));
                }
                continue;
            };
            let mut pending: Vec<usize> = ks.clone();
            if ks.len() >= 2 {
                if let ChainLookup::Found(set) = ctx.store.load_chains(p_inst, sec, &relation_hash(&rel))? {
                    let n = ks.len();
                    let longest = set.max_len();
                    let qualifying: Vec<&Vec<usize>> = set
                        .chains
                        .iter()
                        .filter(|c| c.len() >= n.min(longest))
                        .collect();
                    if let Some(chain) = qualifying.choose(rng) {
                        let take = n.min(chain.len());
                        let mut poses: Vec<Transform> = chain[..take].iter().map(|&i| rel.priors[i]).collect();
                        if set.aligned && ctx.config.align {
                            let inst = &objects[ks[0]];
                            poses = align_poses(&mut poses, inst.width, inst.depth, &ctx.config.align_params);
                        }
                        pending.clear();
                        for (i, &k) in ks.iter().enumerate() {
                            match poses.get(i).map(|t| p_local.compose(t)) {
                                Some(t) if lay.fits(k, p, &t) => lay.place(k, Some(p), PlacementSource::Chain, t),
                                _ => pending.push(k),
                            }
                        }
                    }
                }
            }
            for k in pending {
                let survivors: Vec<Transform> = rel
                    .priors
                    .iter()
                    .map(|t| p_local.compose(t))
                    .filter(|t| lay.fits(k, p, t))
                    .collect();
                match survivors.choose(rng) {
                    Some(&t) => lay.place(k, Some(p), PlacementSource::Pairwise, t),
                    None => {
                        tracing::debug!(object = k, "no free pairwise prior; detaching");
                        detached.push(tree.subtree(k));
                    }
                }
            }
        }
        for m in &lay.members[before..] {
            queue.push_back(m.object);
        }
    }

    let members = lay.members;
    let bounds = bounds_of(&members, objects);
    let wall_mounted = root_inst.wall_mounted && members.len() == 1;
    let lifting = if root_inst.wall_mounted {
        0.0
    } else {
        let p_wall = if root_inst.wall_affine {
            ctx.config.p_wall_affine
        } else {
            ctx.config.p_wall
        };
        if rng.random::<f64>() < p_wall {
            0.0
        } else {
            0.5 * ctx.room_span * (1.0 - rng.random::<f64>())
        }
    };
    let tier = if root_inst.wall_mounted {
        Tier::WallMounted
    } else if members.iter().all(|m| objects[m.object].tier == Tier::Carpet) {
        Tier::Carpet
    } else {
        Tier::Floor
    };
    Ok(Instantiated {
        group: CoherentGroup {
            id,
            root: tree.root,
            members,
            bounds,
            lifting,
            tier,
            wall_mounted,
        },
        detached,
        hyper_statuses: statuses,
    })
}

fn bounds_of(members: &[GroupMember], objects: &[ObjectInstance]) -> GroupBounds {
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut base = f64::INFINITY;
    let mut top = f64::NEG_INFINITY;
    for m in members {
        let inst = &objects[m.object];
        for c in inst.footprint_at(&m.local).corners() {
            lo = Point2::new(lo.x.min(c.x), lo.z.min(c.z));
            hi = Point2::new(hi.x.max(c.x), hi.z.max(c.z));
        }
        base = base.min(m.local.y);
        top = top.max(m.local.y + inst.height);
    }
    GroupBounds {
        center: Point2::new(0.5 * (lo.x + hi.x), 0.5 * (lo.z + hi.z)),
        half_w: 0.5 * (hi.x - lo.x),
        half_d: 0.5 * (hi.z - lo.z),
        base,
        top,
    }
}

/// Aggregate hyper-relation outcome of one grouping pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HyperSummary {
    /// No parent needed a hyper-relation.
    None,
    Pending,
    Failed,
    Complete,
}

impl HyperSummary {
    pub fn as_str(self) -> &'static str {
        match self {
            HyperSummary::None => "none",
            HyperSummary::Pending => "pending",
            HyperSummary::Failed => "failed",
            HyperSummary::Complete => "complete",
        }
    }

    fn from_statuses(s: &[HyperStatus]) -> Self {
        if s.is_empty() {
            HyperSummary::None
        } else if s.contains(&HyperStatus::Generating) {
            HyperSummary::Pending
        } else if s.contains(&HyperStatus::Failed) {
            HyperSummary::Failed
        } else {
            HyperSummary::Complete
        }
    }
}

#[derive(Debug, Clone)]
pub struct Grouping {
    pub groups: Vec<CoherentGroup>,
    pub hyper: HyperSummary,
}

/// Full grouping pass: graph, components, dominant trees, local layouts.
/// Every object ends up in exactly one group.
pub fn coherent_grouping(objects: &[ObjectInstance], ctx: &GroupContext<'_>, rng: &mut impl Rng) -> Result<Grouping> {
    let graph = build_relation_graph(objects, ctx.store)?;
    let mut work: VecDeque<GroupTree> = VecDeque::new();
    for comp in coherent_components(&graph) {
        work.extend(assign_dominants(&comp, &graph, objects, ctx.store, rng)?);
    }
    let mut groups = Vec::new();
    let mut statuses = Vec::new();
    while let Some(tree) = work.pop_front() {
        let inst = instantiate_group(&tree, groups.len(), objects, ctx, rng)?;
        statuses.extend(inst.hyper_statuses);
        work.extend(inst.detached);
        groups.push(inst.group);
    }
    Ok(Grouping {
        groups,
        hyper: HyperSummary::from_statuses(&statuses),
    })
}
