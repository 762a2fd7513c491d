//! The four regression families and grid-search cross-validation.
//!
//! - [`linear`] — Lasso and Elastic-net by cyclic coordinate descent.
//! - [`forest`] — random-forest regression (20 trees, depth ≤ 25).
//! - [`svr`] — RBF-kernel ε-insensitive SVR by sequential minimal
//!   optimization.
//! - [`grid`] — 9-point log-grid hyperparameter search with 5-fold CV.
//!
//! All models train on standardized features; pairing a model with its
//! scaler is the pipeline's job (see the evaluation harness).

pub mod forest;
pub mod grid;
pub mod linear;
pub mod svr;

pub use forest::{fit_random_forest, ForestModel};
pub use grid::{grid_search_linear, grid_search_svr, GRID_VALUES};
pub use linear::{fit_elasticnet, fit_lasso, LinearModel};
pub use svr::{fit_svr, SvrModel};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Which regression family to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Lasso,
    ElasticNet,
    RandomForest,
    Svr,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Lasso,
        ModelKind::ElasticNet,
        ModelKind::RandomForest,
        ModelKind::Svr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lasso => "lasso",
            ModelKind::ElasticNet => "elastic-net",
            ModelKind::RandomForest => "random-forest",
            ModelKind::Svr => "svr",
        }
    }

    pub fn parse(s: &str) -> Result<ModelKind> {
        match s {
            "lasso" => Ok(ModelKind::Lasso),
            "elastic-net" | "elasticnet" => Ok(ModelKind::ElasticNet),
            "random-forest" | "forest" => Ok(ModelKind::RandomForest),
            "svr" => Ok(ModelKind::Svr),
            other => Err(Error::invalid(format!(
                "unknown model kind '{other}' (expected lasso, elastic-net, random-forest, svr)"
            ))),
        }
    }
}

/// Family-level knobs that the hyperparameter grid does not cover.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FamilyConfig {
    /// Elastic-net l1 mixing weight δ.
    pub delta: f64,
    /// SVR tube half-width ε, dB.
    pub epsilon: f64,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig {
            delta: 0.5,
            epsilon: 0.5,
        }
    }
}

/// A fitted model of any family.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum TrainedModel {
    Linear(LinearModel),
    Forest(ForestModel),
    Svr(SvrModel),
}

impl TrainedModel {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        match self {
            TrainedModel::Linear(m) => m.predict(x),
            TrainedModel::Forest(m) => m.predict(x),
            TrainedModel::Svr(m) => m.predict(x),
        }
    }
}

/// Trains one family on standardized features: grid-searched α for the
/// linear families, grid-searched (C, γ) for SVR, fixed configuration
/// for the forest (only α and (C, γ) are grid-searched).
pub fn fit_family(
    kind: ModelKind,
    x: &Matrix,
    y: &[f64],
    seed: u64,
    cfg: &FamilyConfig,
) -> Result<TrainedModel> {
    match kind {
        ModelKind::Lasso => {
            let (_, model) = grid_search_linear(x, y, 1.0, seed)?;
            Ok(TrainedModel::Linear(model))
        }
        ModelKind::ElasticNet => {
            let (_, model) = grid_search_linear(x, y, cfg.delta, seed)?;
            Ok(TrainedModel::Linear(model))
        }
        ModelKind::RandomForest => Ok(TrainedModel::Forest(fit_random_forest(x, y, seed)?)),
        ModelKind::Svr => {
            let (_, model) = grid_search_svr(x, y, cfg.epsilon, seed)?;
            Ok(TrainedModel::Svr(model))
        }
    }
}
