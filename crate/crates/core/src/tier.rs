//! Tier- and height-aware collision between placed solids.

use std::collections::BTreeSet;

use crate::geom::OrientedRect;
use crate::scene::{ObjectInstance, Tier, Transform};

/// Plan-view overlap below this area (m²) is treated as contact, not collision.
pub const OVERLAP_EPS: f64 = 1e-6;

/// A footprint with a tier and a vertical extent `[base, top)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solid {
    pub rect: OrientedRect,
    pub tier: Tier,
    pub base: f64,
    pub top: f64,
}

impl Solid {
    /// The solid occupied by `inst` at `t`; elevation comes from `t.y`.
    pub fn of(inst: &ObjectInstance, t: &Transform) -> Self {
        Self {
            rect: inst.footprint_at(t),
            tier: inst.tier,
            base: t.y,
            top: t.y + inst.height,
        }
    }
}

/// Unordered tier pairs that never collide with each other.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TierRules {
    passable: BTreeSet<(Tier, Tier)>,
}

impl Default for TierRules {
    /// Carpets pass under floor furniture; surface items sit on floor furniture.
    fn default() -> Self {
        Self::new([(Tier::Carpet, Tier::Floor), (Tier::Surface, Tier::Floor)])
    }
}

impl TierRules {
    pub fn new(pairs: impl IntoIterator<Item = (Tier, Tier)>) -> Self {
        let passable = pairs
            .into_iter()
            .map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
            .collect();
        Self { passable }
    }

    /// No exemptions: every tier pair is checked geometrically.
    pub fn strict() -> Self {
        Self::new([])
    }

    pub fn passable(&self, a: Tier, b: Tier) -> bool {
        let k = if a <= b { (a, b) } else { (b, a) };
        self.passable.contains(&k)
    }

    /// `true` when the two solids collide: their tiers are not mutually
    /// passable, their footprints overlap by at least [`OVERLAP_EPS`], and
    /// their vertical extents intersect.
    pub fn collides(&self, a: &Solid, b: &Solid) -> bool {
        if a.tier != b.tier && self.passable(a.tier, b.tier) {
            return false;
        }
        let vertical = a.base < b.top && b.base < a.top;
        vertical && a.rect.overlaps(&b.rect, OVERLAP_EPS)
    }
}

/// [`TierRules::collides`] with the default passability table.
pub fn tier_collides(a: &Solid, b: &Solid) -> bool {
    TierRules::default().collides(a, b)
}
