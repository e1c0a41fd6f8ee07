//! Learn a shape grammar from example voxel buildings and derive new ones.
//!
//! The pipeline has three stages:
//!
//! 1. [`inference`] segments an example [`VoxelModel`] into a
//!    [`ShapeSet`] by hill-climbing on an entropy-based cost.
//! 2. [`grammar`] turns one or more shape sets into a [`ShapeGrammar`]: every
//!    pair of face-adjacent shapes yields two rules, and rules are shared
//!    between shapes that match up to translation and z-rotation.
//! 3. [`production`] derives new buildings from the grammar, randomly or one
//!    chosen rule at a time, and [`enclosure`] prunes shapes that do not help
//!    separate inside from outside.
//!
//! [`metrics`] summarizes shape sets and sweeps inference parameters over a
//! corpus; [`corpus`] holds a small synthetic corpus of buildings.
//!
//! ```
//! use voxgram::{corpus, grammar, inference, production};
//! use voxgram::{InferenceParams, SearchOps, ShapeSpec};
//!
//! let house = corpus::hollow_box_house();
//! let params = InferenceParams::new(ShapeSpec::Rectangular, 1.0, SearchOps::MergeOnly);
//! let shapes = inference::hill_climb(&house, &params)?;
//! let g = grammar::induce(&[shapes])?;
//! let p = production::generate(&g, 7, 20, production::ConflictPolicy::Reject)?;
//! assert!(p.to_model("out").len() > 0);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod corpus;
pub mod cost;
pub mod enclosure;
pub mod grammar;
pub mod inference;
pub mod metrics;
pub mod production;
pub mod shape;
pub mod transform;
pub mod voxel;

pub use grammar::ShapeGrammar;
pub use inference::{InferenceParams, SearchOps, ShapeSet};
pub use production::Production;
pub use shape::{ClassId, MatchClass, Shape, ShapeId, ShapeSpec};
pub use transform::GridTransform;
pub use voxel::{Axis, Block, BlockType, GridPos, VoxelModel};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/voxels.md")]
    mod voxels {}
    #[doc = include_str!("../../../book/src/matching.md")]
    mod matching {}
    #[doc = include_str!("../../../book/src/inference.md")]
    mod inference {}
    #[doc = include_str!("../../../book/src/grammar.md")]
    mod grammar {}
    #[doc = include_str!("../../../book/src/production.md")]
    mod production {}
    #[doc = include_str!("../../../book/src/enclosure.md")]
    mod enclosure {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
}
