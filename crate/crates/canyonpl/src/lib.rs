//! Street-canyon mm-wave path loss prediction pipeline.
//!
//! The crate covers the full chain from raw scene data to evaluated
//! predictors:
//!
//! - [`scene`] — domain model and text-format loaders for links, street
//!   metadata, LiDAR-style point clouds, and building footprints.
//! - [`geometry`] — point-cloud preprocessing (street-frame alignment,
//!   kNN statistical denoising) and spatial indexing (KD-tree, 1 m voxel
//!   grid, exact segment-voxel traversal).
//! - [`clutter`] — the seven expert street-clutter features per link and
//!   the train-only standard scaler.
//! - [`building`] — building footprint collapse into 1 m height maps,
//!   per-link 500x40 facade patches, and per-cell min-max normalization.
//! - [`ae`] — a self-contained 1D-CNN autoencoder (manual forward/backward,
//!   Adam, masked log-cosh loss) that compresses facade patches to 12
//!   features.
//! - [`regress`] — Lasso and Elastic-net by coordinate descent, random
//!   forest regression, RBF-kernel SVR by SMO, and 5-fold grid-search CV.
//! - [`baselines`] — slope-intercept fit and the two closed-form 3GPP
//!   street benchmarks.
//! - [`eval`] — links-shuffle-split and street-by-street protocols, RMSE
//!   aggregation, distance-binned errors, feature-importance analyses,
//!   and the best-of-N autoencoder procedure.
//! - [`synth`] — seeded synthetic street scenes with a known generative
//!   path-loss model, so every claim is testable without field data.

pub mod ae;
pub mod baselines;
pub mod building;
pub mod clutter;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod matrix;
pub mod persist;
pub mod regress;
pub mod scene;
pub mod synth;

pub use error::{Error, Result};
