//! Fast multipole method for the Helmholtz kernel: Morton-ordered octrees,
//! spherical expansions and translations, dual-tree traversal and the
//! cache-fit grain tuner.

pub mod expansion;
pub mod morton;
pub mod pipeline;
pub mod translate;
pub mod traversal;
pub mod tree;
pub mod tuning;

pub use expansion::Expansion;
pub use morton::{morton_key, Bounds};
pub use tree::{build_tree, Body, Cell, Octree, Span};
pub use traversal::{dual_tree_traversal, InteractionLists, TraversalConfig};
pub use tuning::{cache_fit, select_grain, CachePlan};
pub use pipeline::{FmmConfig, FmmPlan, FmmStats, Precision};
