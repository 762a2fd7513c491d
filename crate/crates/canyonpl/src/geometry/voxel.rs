//! 1 m cube grid over a street-frame cloud, with exact segment traversal.
//!
//! Cube assignment is half-open: point p lies in cube
//! (⌊px⌋, ⌊py⌋, ⌊pz⌋), so a coordinate exactly on a boundary belongs to
//! the higher cube. Traversal follows the incremental step algorithm
//! (per-axis next-boundary times); when a segment crosses an exact cube
//! corner the step order is the documented tie-break X, then Y, then Z.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::scene::{Frame, Point3, PointCloud};

/// Integer cube index.
pub type Cube = (i64, i64, i64);

/// Sparse per-cube point counts with a fixed 1 m edge.
#[derive(Debug, Clone)]
pub struct VoxelGrid {
    origin: Point3,
    counts: HashMap<Cube, u64>,
    total: u64,
}

impl VoxelGrid {
    /// Cube index of a point, relative to the grid origin.
    pub fn cube_of(&self, p: Point3) -> Cube {
        (
            (p.x - self.origin.x).floor() as i64,
            (p.y - self.origin.y).floor() as i64,
            (p.z - self.origin.z).floor() as i64,
        )
    }

    /// Stored count for one cube (0 when absent).
    pub fn count(&self, cube: Cube) -> u64 {
        self.counts.get(&cube).copied().unwrap_or(0)
    }

    /// Total indexed points; equals the sum of all cube counts.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of non-empty cubes.
    pub fn occupied_cubes(&self) -> usize {
        self.counts.len()
    }

    /// Ordered cubes the open segment (a, b) passes through.
    pub fn traverse_segment(&self, a: Point3, b: Point3) -> Result<Vec<Cube>> {
        traverse_unit_grid(a.sub(self.origin), b.sub(self.origin))
    }

    /// Sum of cube counts along the open segment (a, b).
    pub fn counts_along_segment(&self, a: Point3, b: Point3) -> Result<u64> {
        Ok(self
            .traverse_segment(a, b)?
            .iter()
            .map(|&c| self.count(c))
            .sum())
    }
}

/// Builds the grid (origin at the street-frame origin) from a
/// street-frame cloud.
pub fn build_voxel_grid(cloud: &PointCloud) -> Result<VoxelGrid> {
    if cloud.frame != Frame::Street {
        return Err(Error::invalid("voxel grid expects a street-frame cloud"));
    }
    let origin = Point3::new(0.0, 0.0, 0.0);
    let mut counts: HashMap<Cube, u64> = HashMap::new();
    for &p in &cloud.points {
        let cube = (p.x.floor() as i64, p.y.floor() as i64, p.z.floor() as i64);
        *counts.entry(cube).or_insert(0) += 1;
    }
    Ok(VoxelGrid {
        origin,
        counts,
        total: cloud.len() as u64,
    })
}

/// Points p with min ≤ p < max componentwise (half-open box).
pub fn count_in_box(cloud: &PointCloud, min: Point3, max: Point3) -> Result<usize> {
    if !(min.x < max.x && min.y < max.y && min.z < max.z) {
        return Err(Error::invalid(format!(
            "box must satisfy min < max componentwise, got {min:?} .. {max:?}"
        )));
    }
    Ok(cloud
        .points
        .iter()
        .filter(|p| {
            p.x >= min.x && p.x < max.x && p.y >= min.y && p.y < max.y && p.z >= min.z && p.z < max.z
        })
        .count())
}

/// Effective cube index at the start of the open segment: on an exact
/// boundary the segment immediately leaves toward the motion direction.
fn start_index(a: f64, d: f64) -> i64 {
    let f = a.floor();
    if a == f && d < 0.0 {
        f as i64 - 1
    } else {
        f as i64
    }
}

/// Effective cube index at the end of the open segment: an endpoint
/// exactly on a boundary is excluded, so positive motion never enters
/// the cube that starts there.
fn end_index(b: f64, d: f64) -> i64 {
    let f = b.floor();
    if b == f && d > 0.0 {
        f as i64 - 1
    } else {
        f as i64
    }
}

/// Ordered cubes the open segment (a, b) intersects, on the unit grid.
///
/// Exact incremental traversal: each iteration steps one cube across the
/// nearest boundary; equal boundary times step X before Y before Z.
pub fn traverse_unit_grid(a: Point3, b: Point3) -> Result<Vec<Cube>> {
    if a == b {
        return Err(Error::invalid("cannot traverse a degenerate segment"));
    }
    let d = b.sub(a);
    let start = (
        start_index(a.x, d.x),
        start_index(a.y, d.y),
        start_index(a.z, d.z),
    );
    let end = (end_index(b.x, d.x), end_index(b.y, d.y), end_index(b.z, d.z));

    let mut cur = [start.0, start.1, start.2];
    let goal = [end.0, end.1, end.2];
    let dir = [d.x, d.y, d.z];
    let pos = [a.x, a.y, a.z];

    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for ax in 0..3 {
        if dir[ax] > 0.0 {
            step[ax] = 1;
            t_max[ax] = (cur[ax] as f64 + 1.0 - pos[ax]) / dir[ax];
            t_delta[ax] = 1.0 / dir[ax];
        } else if dir[ax] < 0.0 {
            step[ax] = -1;
            t_max[ax] = (cur[ax] as f64 - pos[ax]) / dir[ax];
            t_delta[ax] = -1.0 / dir[ax];
        }
    }

    let bound = (goal[0] - cur[0]).unsigned_abs()
        + (goal[1] - cur[1]).unsigned_abs()
        + (goal[2] - cur[2]).unsigned_abs();
    let mut out = Vec::with_capacity(bound as usize + 1);
    out.push((cur[0], cur[1], cur[2]));
    for _ in 0..bound {
        // Nearest boundary; ties resolve in axis order X, Y, Z.
        let mut ax = 0;
        if t_max[1] < t_max[ax] {
            ax = 1;
        }
        if t_max[2] < t_max[ax] {
            ax = 2;
        }
        cur[ax] += step[ax];
        t_max[ax] += t_delta[ax];
        out.push((cur[0], cur[1], cur[2]));
        if cur == goal {
            break;
        }
    }
    if cur != goal {
        return Err(Error::invalid(format!(
            "traversal did not terminate: stopped at {cur:?}, goal {goal:?}"
        )));
    }
    Ok(out)
}
