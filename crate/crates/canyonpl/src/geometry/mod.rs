//! Point-cloud preprocessing and spatial indexing.
//!
//! - [`transform`] — world-to-street rigid motion (re-origin at the Rx
//!   ground point, street axis to +X).
//! - [`kdtree`] — deterministic median-split KD-tree for kNN queries.
//! - [`denoise`] — statistical outlier removal on mean kNN distance.
//! - [`voxel`] — 1 m cube grid, exact segment traversal, box counting.

pub mod denoise;
pub mod kdtree;
pub mod transform;
pub mod voxel;

pub use denoise::{knn_denoise, DenoiseParams};
pub use kdtree::KdTree;
pub use transform::{to_street_frame, StreetTransform};
pub use voxel::{build_voxel_grid, count_in_box, traverse_unit_grid, VoxelGrid};
