//! The seven expert street-clutter features and feature standardization.
//!
//! Canonical column order, fixed for every matrix, weight vector, and
//! report in the crate:
//!
//! | # | feature            | definition                                  |
//! |---|--------------------|---------------------------------------------|
//! | 0 | `log3d`            | log10 of the Euclidean Tx-Rx distance        |
//! | 1 | `log1d`            | log10 of the along-street Tx-Rx distance     |
//! | 2 | `street_width`     | canyon width, meters                         |
//! | 3 | `clutter_per_link` | point count in the 1 m cubes on the Tx-Rx ray|
//! | 4 | `clutter_per_street` | cloud density in the street volume, pts/m³ |
//! | 5 | `rx_height`        | Rx mount height, meters                      |
//! | 6 | `both_sides`       | 1 when buildings line both sides, else 0     |

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::to_street_frame;
use crate::geometry::voxel::{build_voxel_grid, count_in_box, VoxelGrid};
use crate::matrix::Matrix;
use crate::scene::{Dataset, Frame, Point3, PointCloud};

/// Street-frame clouds for every street, keyed by street id: the form
/// [`assemble_clutter`] consumes.
pub fn street_frame_clouds(dataset: &Dataset) -> Result<HashMap<String, PointCloud>> {
    dataset
        .streets
        .iter()
        .map(|s| Ok((s.meta.street_id.clone(), to_street_frame(&s.cloud, &s.meta)?)))
        .collect()
}

/// Canonical feature names, index-aligned with the matrix columns.
pub const CLUTTER_FEATURE_NAMES: [&str; 7] = [
    "log3d",
    "log1d",
    "street_width",
    "clutter_per_link",
    "clutter_per_street",
    "rx_height",
    "both_sides",
];

/// Columns of the reduced four-feature set: log3d, clutter_per_link,
/// clutter_per_street, both_sides (canonical relative order kept).
pub const CLUTTER4_COLUMNS: [usize; 4] = [0, 3, 4, 6];

/// Street-level cloud density: points in the volume spanned by the
/// street out to the furthest Tx, divided by that volume (points/m³).
///
/// The box is `[0, furthest_tx_1d] x [-width/2, width/2] x [0, rx_height]`
/// in the street frame; membership is half-open.
pub fn clutter_per_street(
    cloud: &PointCloud,
    width: f64,
    rx_height: f64,
    furthest_tx_1d: f64,
) -> Result<f64> {
    if cloud.frame != Frame::Street {
        return Err(Error::invalid("clutter_per_street expects a street-frame cloud"));
    }
    if !(furthest_tx_1d > 0.0) {
        return Err(Error::invalid(format!(
            "furthest_tx_1d must be > 0, got {furthest_tx_1d}"
        )));
    }
    let volume = furthest_tx_1d * width * rx_height;
    if !(volume > 0.0) {
        return Err(Error::invalid("street volume is zero"));
    }
    let n = count_in_box(
        cloud,
        Point3::new(0.0, -width / 2.0, 0.0),
        Point3::new(furthest_tx_1d, width / 2.0, rx_height),
    )?;
    Ok(n as f64 / volume)
}

/// Link-level clutter: total points in the 1 m cubes traversed by the
/// open Tx-Rx segment.
pub fn clutter_per_link(grid: &VoxelGrid, tx: Point3, rx: Point3) -> Result<u64> {
    grid.counts_along_segment(tx, rx)
}

/// Assembles the n_links x 7 clutter feature matrix (canonical column
/// order, row order = dataset link order) and the dB target vector.
///
/// `clouds` maps street_id to that street's preprocessed street-frame
/// cloud (the caller decides on denoising; the pipeline default applies
/// it before this call).
pub fn assemble_clutter(
    dataset: &Dataset,
    clouds: &HashMap<String, PointCloud>,
) -> Result<(Matrix, Vec<f64>)> {
    // Street-level quantities are computed once and shared by links.
    struct StreetCtx {
        grid: VoxelGrid,
        cps: f64,
        width: f64,
        rx_height: f64,
        both_sides: f64,
    }

    let mut ctx: HashMap<&str, StreetCtx> = HashMap::new();
    for scene in &dataset.streets {
        let id = scene.meta.street_id.as_str();
        let cloud = clouds
            .get(id)
            .ok_or_else(|| Error::invalid(format!("no cloud provided for street {id}")))?;
        let links = dataset.links_for_street(id);
        if links.is_empty() {
            continue;
        }
        let furthest = links.iter().map(|l| l.d1d).fold(f64::MIN, f64::max);
        let cps = clutter_per_street(cloud, scene.meta.width, scene.meta.rx_height, furthest)?;
        ctx.insert(
            id,
            StreetCtx {
                grid: build_voxel_grid(cloud)?,
                cps,
                width: scene.meta.width,
                rx_height: scene.meta.rx_height,
                both_sides: f64::from(scene.meta.buildings_both_sides),
            },
        );
    }

    let mut rows = Vec::with_capacity(dataset.links.len());
    let mut targets = Vec::with_capacity(dataset.links.len());
    for link in &dataset.links {
        let c = ctx
            .get(link.street_id.as_str())
            .ok_or_else(|| Error::invalid(format!("no cloud provided for street {}", link.street_id)))?;
        let rx = Point3::new(0.0, 0.0, c.rx_height);
        let cpl = clutter_per_link(&c.grid, link.tx_position, rx)?;
        rows.push(vec![
            link.d3d.log10(),
            link.d1d.log10(),
            c.width,
            cpl as f64,
            c.cps,
            c.rx_height,
            c.both_sides,
        ]);
        targets.push(link.measured_pl);
    }
    Ok((Matrix::from_rows(&rows)?, targets))
}

// --- standardization ----------------------------------------------------

/// Columns whose training std is at or below this (relative) floor are
/// treated as constant and map to zero.
const CONSTANT_STD_FLOOR: f64 = 1e-12;

/// Per-column standardizer fitted on training rows only: f̂ = (f − μ)/σ
/// with population (divide-by-n) σ. Constant columns map to zero.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StandardScaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl StandardScaler {
    /// Fits means and population stds per column.
    pub fn fit(train: &Matrix) -> Result<StandardScaler> {
        if train.rows() == 0 {
            return Err(Error::invalid("cannot fit a scaler on an empty matrix"));
        }
        let n = train.rows() as f64;
        let mut means = vec![0.0; train.cols()];
        let mut stds = vec![0.0; train.cols()];
        for c in 0..train.cols() {
            let mean = (0..train.rows()).map(|r| train.get(r, c)).sum::<f64>() / n;
            let var = (0..train.rows())
                .map(|r| (train.get(r, c) - mean).powi(2))
                .sum::<f64>()
                / n;
            means[c] = mean;
            stds[c] = var.sqrt();
        }
        Ok(StandardScaler { means, stds })
    }

    /// True when column `c` was constant in the training data.
    pub fn is_constant(&self, c: usize) -> bool {
        self.stds[c] <= CONSTANT_STD_FLOOR * (1.0 + self.means[c].abs())
    }

    /// Applies the training-time transform to any matrix.
    pub fn transform(&self, m: &Matrix) -> Result<Matrix> {
        if m.cols() != self.means.len() {
            return Err(Error::invalid(format!(
                "scaler fitted on {} columns, matrix has {}",
                self.means.len(),
                m.cols()
            )));
        }
        let mut out = Matrix::zeros(m.rows(), m.cols());
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                let v = if self.is_constant(c) {
                    0.0
                } else {
                    (m.get(r, c) - self.means[c]) / self.stds[c]
                };
                out.set(r, c, v);
            }
        }
        Ok(out)
    }

    /// Inverse of [`StandardScaler::transform`] for non-constant columns;
    /// constant columns recover their training mean.
    pub fn inverse_transform(&self, m: &Matrix) -> Result<Matrix> {
        if m.cols() != self.means.len() {
            return Err(Error::invalid(format!(
                "scaler fitted on {} columns, matrix has {}",
                self.means.len(),
                m.cols()
            )));
        }
        let mut out = Matrix::zeros(m.rows(), m.cols());
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                let v = if self.is_constant(c) {
                    self.means[c]
                } else {
                    m.get(r, c) * self.stds[c] + self.means[c]
                };
                out.set(r, c, v);
            }
        }
        Ok(out)
    }
}
