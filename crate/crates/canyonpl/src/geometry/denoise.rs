//! Statistical outlier removal on mean kNN distance.
//!
//! For every point, compute the mean distance to its k nearest
//! neighbors. Points whose mean distance exceeds
//! `global mean + alpha * global std` (population std) are dropped.
//! Output preserves input order.

use crate::error::{Error, Result};
use crate::geometry::kdtree::KdTree;
use crate::scene::PointCloud;

#[derive(Debug, Clone, Copy)]
pub struct DenoiseParams {
    /// Neighbor count used for the per-point mean distance.
    pub k: usize,
    /// Threshold width in standard deviations above the mean.
    pub alpha: f64,
}

impl Default for DenoiseParams {
    fn default() -> Self {
        DenoiseParams { k: 16, alpha: 2.0 }
    }
}

impl DenoiseParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::invalid("denoise k must be >= 1"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::invalid("denoise alpha must be > 0"));
        }
        Ok(())
    }
}

/// Removes statistical outliers. Requires `k < cloud.len()` so every
/// point has k genuine neighbors.
pub fn knn_denoise(cloud: &PointCloud, params: DenoiseParams) -> Result<PointCloud> {
    params.validate()?;
    if cloud.is_empty() {
        return Err(Error::invalid("cannot denoise an empty cloud"));
    }
    if params.k >= cloud.len() {
        return Err(Error::invalid(format!(
            "denoise k ({}) must be smaller than the point count ({})",
            params.k,
            cloud.len()
        )));
    }

    let tree = KdTree::build(&cloud.points);
    let mean_dists: Vec<f64> = cloud
        .points
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let nn = tree.k_nearest(p, params.k, Some(i));
            nn.iter().map(|&(_, d)| d).sum::<f64>() / nn.len() as f64
        })
        .collect();

    let n = mean_dists.len() as f64;
    let mean = mean_dists.iter().sum::<f64>() / n;
    let var = mean_dists.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    let threshold = mean + params.alpha * var.sqrt();

    let points = cloud
        .points
        .iter()
        .zip(&mean_dists)
        .filter(|&(_, &d)| d <= threshold)
        .map(|(&p, _)| p)
        .collect();
    Ok(PointCloud::new(points, cloud.frame))
}
