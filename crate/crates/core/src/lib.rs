//! Instance-level furniture layout: pairwise spatial priors mined from a
//! scene corpus, grouped into coherent groups and arranged in a room.
//!
//! The data-parallel kernels use rayon when the `parallel` feature is on
//! (the default) and run sequentially otherwise; results are identical.

pub mod arrange;
pub mod chain;
pub mod dpc;
pub mod error;
pub mod extract;
pub mod geom;
pub mod grouping;
pub mod hyper;
pub mod layout;
pub mod par;
pub mod render;
pub mod scene;
pub mod store;
pub mod synth;
pub mod tier;

pub use error::{Error, Result};
pub use layout::{extract_to_store, layout_scene, LayoutConfig, LayoutOutcome, LayoutRequest, LayoutResponse};
pub use scene::{Catalog, ObjectInstance, Scene, Tier, Transform};
pub use store::PriorStore;
