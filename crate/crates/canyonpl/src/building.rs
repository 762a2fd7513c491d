//! Building features: footprint collapse, facade patches, normalization.
//!
//! Extruded footprints collapse along Z into a 1 m height map over the
//! street frame: 500 cells along the street ([0, 500)) by 40 cells
//! across it ([-20, 20), street centerline at y = 0). Each link gets a
//! 500 x 40 facade patch: height-map rows out to the Tx, zero-padded
//! beyond. A per-cell min-max scaler maps training patches into [0, 1]
//! for the autoencoder.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::transform::StreetTransform;
use crate::scene::{BuildingFootprint, Dataset, LinkRecord, Point2, Point3, StreetMeta};

/// Along-street cells: [0, 500) m at 1 m resolution.
pub const ALONG_CELLS: usize = 500;
/// Across-street cells: [-20, 20) m at 1 m resolution.
pub const ACROSS_CELLS: usize = 40;
/// Across-street window start, meters.
pub const ACROSS_MIN: f64 = -20.0;

/// Z-collapsed building heights on the street-frame grid.
/// `get(i, j)` is the height at along-cell i, across-cell j (0 = none).
#[derive(Debug, Clone, PartialEq)]
pub struct HeightMap {
    values: Vec<f64>,
}

impl HeightMap {
    pub fn zero() -> HeightMap {
        HeightMap {
            values: vec![0.0; ALONG_CELLS * ACROSS_CELLS],
        }
    }

    #[inline]
    pub fn get(&self, along: usize, across: usize) -> f64 {
        debug_assert!(along < ALONG_CELLS && across < ACROSS_CELLS);
        self.values[along * ACROSS_CELLS + across]
    }

    #[inline]
    fn set(&mut self, along: usize, across: usize, v: f64) {
        self.values[along * ACROSS_CELLS + across] = v;
    }
}

/// One link's facade input: 500 x 40 values, row-major along the street.
/// Heights in meters before normalization, [0, 1] after.
#[derive(Debug, Clone, PartialEq)]
pub struct FacadePatch {
    values: Vec<f64>,
}

impl FacadePatch {
    pub fn zero() -> FacadePatch {
        FacadePatch {
            values: vec![0.0; ALONG_CELLS * ACROSS_CELLS],
        }
    }

    /// Wraps a flat row-major buffer; the shape is a hard invariant.
    pub fn from_values(values: Vec<f64>) -> Result<FacadePatch> {
        if values.len() != ALONG_CELLS * ACROSS_CELLS {
            return Err(Error::invalid(format!(
                "facade patch must hold {} values, got {}",
                ALONG_CELLS * ACROSS_CELLS,
                values.len()
            )));
        }
        Ok(FacadePatch { values })
    }

    #[inline]
    pub fn get(&self, along: usize, across: usize) -> f64 {
        debug_assert!(along < ALONG_CELLS && across < ACROSS_CELLS);
        self.values[along * ACROSS_CELLS + across]
    }

    #[inline]
    pub fn set(&mut self, along: usize, across: usize, v: f64) {
        debug_assert!(along < ALONG_CELLS && across < ACROSS_CELLS);
        self.values[along * ACROSS_CELLS + across] = v;
    }

    /// Flat row-major view (along-major, 40 across values per row).
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Even-odd rule: a point is inside when a ray crosses the boundary an
/// odd number of times. Boundary handling follows the usual half-open
/// crossing test; exactly-on-edge points are not relied on by callers
/// (cell centers sit at half-meter offsets).
fn point_in_polygon(p: Point2, poly: &[Point2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (vi, vj) = (poly[i], poly[j]);
        if (vi.y > p.y) != (vj.y > p.y) {
            let x_cross = vi.x + (p.y - vi.y) / (vj.y - vi.y) * (vj.x - vi.x);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Collapses world-frame footprints onto the street-frame grid: each
/// cell center inside a footprint takes the footprint height, overlaps
/// resolve by maximum.
pub fn collapse_buildings(footprints: &[BuildingFootprint], meta: &StreetMeta) -> HeightMap {
    let t = StreetTransform::from_meta(meta);
    let mut map = HeightMap::zero();
    for i in 0..ALONG_CELLS {
        for j in 0..ACROSS_CELLS {
            let center_street = Point3::new(
                i as f64 + 0.5,
                ACROSS_MIN + j as f64 + 0.5,
                0.0,
            );
            let w = t.to_world(center_street);
            let w2 = Point2::new(w.x, w.y);
            let mut h = 0.0f64;
            for fp in footprints {
                if fp.height > h && point_in_polygon(w2, &fp.polygon) {
                    h = fp.height;
                }
            }
            if h > 0.0 {
                map.set(i, j, h);
            }
        }
    }
    map
}

/// Cuts the link's facade patch out of the street height map: rows
/// 0..⌊d1d⌋-1 are copied, all later rows stay zero.
pub fn facade_patch(map: &HeightMap, link: &LinkRecord) -> Result<FacadePatch> {
    if !(link.d1d > 0.0 && link.d1d <= 500.0) {
        return Err(Error::invalid(format!(
            "link {}: d1d {} outside (0, 500]",
            link.link_id, link.d1d
        )));
    }
    let rows = link.d1d.floor() as usize;
    let mut patch = FacadePatch::zero();
    for i in 0..rows.min(ALONG_CELLS) {
        for j in 0..ACROSS_CELLS {
            patch.set(i, j, map.get(i, j));
        }
    }
    Ok(patch)
}

/// One raw facade patch per link, keyed by link id: each street's
/// footprints collapse to a height map once, then every link cuts its
/// own distance-limited view.
pub fn facade_patches(dataset: &Dataset) -> Result<HashMap<String, FacadePatch>> {
    let mut patches = HashMap::new();
    for scene in &dataset.streets {
        let map = collapse_buildings(&scene.footprints, &scene.meta);
        for link in &dataset.links {
            if link.street_id == scene.meta.street_id {
                patches.insert(link.link_id.clone(), facade_patch(&map, link)?);
            }
        }
    }
    Ok(patches)
}

/// Per-cell min-max scaler fitted on training patches only.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridScaler {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl GridScaler {
    /// Cellwise min/max over the training patches.
    pub fn fit(train: &[FacadePatch]) -> Result<GridScaler> {
        if train.is_empty() {
            return Err(Error::invalid("grid scaler needs at least one patch"));
        }
        let cells = ALONG_CELLS * ACROSS_CELLS;
        let mut min = vec![f64::INFINITY; cells];
        let mut max = vec![f64::NEG_INFINITY; cells];
        for p in train {
            for (c, &v) in p.as_slice().iter().enumerate() {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
        Ok(GridScaler { min, max })
    }

    /// Maps cell values to (v - min)/(max - min); degenerate cells
    /// (max = min) map to 0; the result is clamped to [0, 1] so unseen
    /// test heights stay in the autoencoder's trained range.
    pub fn normalize(&self, patch: &FacadePatch) -> FacadePatch {
        let values = patch
            .as_slice()
            .iter()
            .enumerate()
            .map(|(c, &v)| {
                let range = self.max[c] - self.min[c];
                if range > 0.0 {
                    ((v - self.min[c]) / range).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect();
        FacadePatch { values }
    }

    /// Inverse of [`GridScaler::normalize`] at non-degenerate cells;
    /// degenerate cells recover their training value.
    pub fn denormalize(&self, patch: &FacadePatch) -> FacadePatch {
        let values = patch
            .as_slice()
            .iter()
            .enumerate()
            .map(|(c, &v)| {
                let range = self.max[c] - self.min[c];
                if range > 0.0 {
                    self.min[c] + v * range
                } else {
                    self.min[c]
                }
            })
            .collect();
        FacadePatch { values }
    }
}

// --- patch CSV export ---------------------------------------------------

/// Writes a patch as 500 comma-separated lines of 40 values (row-major).
pub fn save_patch_csv(path: &std::path::Path, patch: &FacadePatch) -> Result<()> {
    let mut s = String::new();
    for i in 0..ALONG_CELLS {
        for j in 0..ACROSS_CELLS {
            if j > 0 {
                s.push(',');
            }
            s.push_str(&format!("{}", patch.get(i, j)));
        }
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Loads a patch written by [`save_patch_csv`].
pub fn load_patch_csv(path: &std::path::Path) -> Result<FacadePatch> {
    let label = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::with_capacity(ALONG_CELLS * ACROSS_CELLS);
    for (ln, line) in text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
    {
        for tok in line.split(',') {
            let v: f64 = tok.trim().parse().map_err(|_| {
                Error::parse(&label, ln, format!("invalid number '{tok}'"))
            })?;
            values.push(v);
        }
    }
    FacadePatch::from_values(values)
}
