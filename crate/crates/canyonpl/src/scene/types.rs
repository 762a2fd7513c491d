//! Core domain types: points, clouds, street metadata, links, datasets.

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

/// 3D point or vector, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dist(self, o: Point3) -> f64 {
        self.sub(o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// 2D point or direction, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Coordinate frame a cloud lives in. Operations refuse mixed frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// Survey coordinates as loaded from disk.
    World,
    /// Per-street frame: Rx ground at origin, street axis along +X.
    Street,
}

/// A set of 3D points tagged with its coordinate frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub frame: Frame,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>, frame: Frame) -> Self {
        PointCloud { points, frame }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One Tx-Rx measurement. Positions are in the street frame of the
/// owning street, where the Rx sits at (0, 0, rx_height).
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRecord {
    pub link_id: String,
    pub street_id: String,
    /// Tx position, street frame, meters.
    pub tx_position: Point3,
    /// Along-street Tx-Rx separation, meters.
    pub d1d: f64,
    /// Euclidean Tx-Rx separation, meters.
    pub d3d: f64,
    /// Measured path loss, dB.
    pub measured_pl: f64,
}

impl LinkRecord {
    /// Checks the per-link invariants (distances positive and ordered,
    /// within measurement extent, path loss finite).
    pub fn validate(&self) -> Result<()> {
        validate_id(&self.link_id, "link_id")?;
        validate_id(&self.street_id, "street_id")?;
        if !self.tx_position.is_finite() {
            return Err(Error::invalid(format!(
                "link {}: non-finite tx position",
                self.link_id
            )));
        }
        if !(self.d1d > 0.0) {
            return Err(Error::invalid(format!(
                "link {}: d1d must be > 0, got {}",
                self.link_id, self.d1d
            )));
        }
        if self.d3d < self.d1d {
            return Err(Error::invalid(format!(
                "link {}: d3d ({}) < d1d ({})",
                self.link_id, self.d3d, self.d1d
            )));
        }
        if !(self.d3d <= 500.0) {
            return Err(Error::invalid(format!(
                "link {}: d3d ({}) exceeds the 500 m measurement extent",
                self.link_id, self.d3d
            )));
        }
        if !self.measured_pl.is_finite() {
            return Err(Error::invalid(format!(
                "link {}: non-finite path loss",
                self.link_id
            )));
        }
        Ok(())
    }
}

/// Per-street metadata: canyon geometry plus the world-frame pose that
/// defines the street frame.
#[derive(Debug, Clone, PartialEq)]
pub struct StreetMeta {
    pub street_id: String,
    /// Street (canyon) width, meters.
    pub width: f64,
    /// Rx mount height above street ground, meters.
    pub rx_height: f64,
    /// True when buildings line both sides of the street.
    pub buildings_both_sides: bool,
    /// Rx position in world coordinates (at mount height).
    pub rx_world_position: Point3,
    /// Unit along-street direction in world XY.
    pub street_axis: Point2,
}

impl StreetMeta {
    pub fn validate(&self) -> Result<()> {
        validate_id(&self.street_id, "street_id")?;
        if !(self.width > 0.0) {
            return Err(Error::invalid(format!(
                "street {}: width must be > 0, got {}",
                self.street_id, self.width
            )));
        }
        if !(self.rx_height > 0.0) {
            return Err(Error::invalid(format!(
                "street {}: rx_height must be > 0, got {}",
                self.street_id, self.rx_height
            )));
        }
        if !self.rx_world_position.is_finite() || !self.street_axis.is_finite() {
            return Err(Error::invalid(format!(
                "street {}: non-finite pose",
                self.street_id
            )));
        }
        if (self.street_axis.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "street {}: street_axis norm {} is not 1 (tolerance 1e-9)",
                self.street_id,
                self.street_axis.norm()
            )));
        }
        Ok(())
    }
}

/// Extruded building: a simple 2D footprint polygon with uniform height.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingFootprint {
    /// Vertices in world XY, in boundary order, no closing duplicate.
    pub polygon: Vec<Point2>,
    /// Roof height above ground, meters.
    pub height: f64,
}

impl BuildingFootprint {
    pub fn validate(&self) -> Result<()> {
        if !(self.height > 0.0) {
            return Err(Error::invalid(format!(
                "footprint height must be > 0, got {}",
                self.height
            )));
        }
        if self.polygon.len() < 3 {
            return Err(Error::invalid(format!(
                "footprint needs >= 3 vertices, got {}",
                self.polygon.len()
            )));
        }
        if self.polygon.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("footprint has a non-finite vertex"));
        }
        if let Some((i, j)) = first_self_intersection(&self.polygon) {
            return Err(Error::invalid(format!(
                "self-intersecting footprint: edges {i} and {j} cross"
            )));
        }
        Ok(())
    }
}

/// Everything known about one street: metadata, its (world-frame) point
/// cloud, and its building footprints.
#[derive(Debug, Clone, PartialEq)]
pub struct StreetScene {
    pub meta: StreetMeta,
    pub cloud: PointCloud,
    pub footprints: Vec<BuildingFootprint>,
}

/// The full corpus: all streets and all links.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub streets: Vec<StreetScene>,
    pub links: Vec<LinkRecord>,
}

impl Dataset {
    /// Looks up a street scene by id.
    pub fn street(&self, street_id: &str) -> Option<&StreetScene> {
        self.streets.iter().find(|s| s.meta.street_id == street_id)
    }

    /// Links belonging to one street, in file order.
    pub fn links_for_street(&self, street_id: &str) -> Vec<&LinkRecord> {
        self.links
            .iter()
            .filter(|l| l.street_id == street_id)
            .collect()
    }

    /// Distinct street ids in the order links first reference them is not
    /// meaningful; this returns street ids in street-table order.
    pub fn street_ids(&self) -> Vec<&str> {
        self.streets
            .iter()
            .map(|s| s.meta.street_id.as_str())
            .collect()
    }

    /// Cross-record invariants: unique ids, every link resolving to a
    /// street, and per-record validity.
    pub fn validate(&self) -> Result<()> {
        let mut street_ids = HashSet::new();
        for s in &self.streets {
            s.meta.validate()?;
            for fp in &s.footprints {
                fp.validate()?;
            }
            if !street_ids.insert(s.meta.street_id.as_str()) {
                return Err(Error::invalid(format!(
                    "duplicate street_id {}",
                    s.meta.street_id
                )));
            }
        }
        let mut link_ids = HashSet::new();
        for l in &self.links {
            l.validate()?;
            if !link_ids.insert(l.link_id.as_str()) {
                return Err(Error::invalid(format!("duplicate link_id {}", l.link_id)));
            }
            if !street_ids.contains(l.street_id.as_str()) {
                return Err(Error::invalid(format!(
                    "link {} references unknown street_id {}",
                    l.link_id, l.street_id
                )));
            }
        }
        Ok(())
    }

    /// Saves the dataset under `dir` in the documented text layout.
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.validate()?;
        std::fs::create_dir_all(dir.join("clouds"))?;
        std::fs::create_dir_all(dir.join("footprints"))?;
        let metas: Vec<StreetMeta> = self.streets.iter().map(|s| s.meta.clone()).collect();
        super::io::save_streets(&dir.join("streets.csv"), &metas)?;
        super::io::save_links(&dir.join("links.csv"), &self.links)?;
        for s in &self.streets {
            super::io::save_pointcloud(
                &dir.join("clouds").join(format!("{}.xyz", s.meta.street_id)),
                &s.cloud,
            )?;
            super::io::save_footprints(
                &dir
                    .join("footprints")
                    .join(format!("{}.fpl", s.meta.street_id)),
                &s.footprints,
            )?;
        }
        Ok(())
    }

    /// Loads a dataset saved by [`Dataset::save`].
    pub fn load(dir: &Path) -> Result<Dataset> {
        let metas = super::io::load_streets(&dir.join("streets.csv"))?;
        let mut streets = Vec::with_capacity(metas.len());
        for meta in metas {
            let cloud = super::io::load_pointcloud(
                &dir.join("clouds").join(format!("{}.xyz", meta.street_id)),
            )?;
            let footprints = super::io::load_footprints(
                &dir
                    .join("footprints")
                    .join(format!("{}.fpl", meta.street_id)),
            )?;
            streets.push(StreetScene {
                meta,
                cloud,
                footprints,
            });
        }
        let street_metas: Vec<StreetMeta> = streets.iter().map(|s| s.meta.clone()).collect();
        let links = super::io::load_links(&dir.join("links.csv"), &street_metas)?;
        let ds = Dataset { streets, links };
        ds.validate()?;
        Ok(ds)
    }
}

/// Ids end up in file names and CSV cells, so keep them to one
/// unambiguous token.
fn validate_id(id: &str, what: &str) -> Result<()> {
    if id.is_empty() {
        return Err(Error::invalid(format!("{what} must be non-empty")));
    }
    if id
        .chars()
        .any(|c| c.is_whitespace() || c == ',' || c == '/' || c == '#')
    {
        return Err(Error::invalid(format!(
            "{what} '{id}' contains whitespace, ',', '/', or '#'"
        )));
    }
    Ok(())
}

// --- polygon simplicity ------------------------------------------------

/// Returns the first pair of edge indices that cross, if any. Adjacent
/// edges sharing a vertex are allowed unless they overlap collinearly.
pub(crate) fn first_self_intersection(poly: &[Point2]) -> Option<(usize, usize)> {
    let n = poly.len();
    for i in 0..n {
        let (a1, a2) = (poly[i], poly[(i + 1) % n]);
        if a1 == a2 {
            // Zero-length edge counts as degenerate.
            return Some((i, i));
        }
        for j in (i + 1)..n {
            let adjacent = j == (i + 1) % n || (j + 1) % n == i;
            let (b1, b2) = (poly[j], poly[(j + 1) % n]);
            if adjacent {
                if collinear_overlap(a1, a2, b1, b2) {
                    return Some((i, j));
                }
            } else if segments_intersect(a1, a2, b1, b2) {
                return Some((i, j));
            }
        }
    }
    None
}

fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching counts).
fn segments_intersect(a1: Point2, a2: Point2, b1: Point2, b2: Point2) -> bool {
    let d1 = cross(a1, a2, b1);
    let d2 = cross(a1, a2, b2);
    let d3 = cross(b1, b2, a1);
    let d4 = cross(b1, b2, a2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(a1, a2, b1))
        || (d2 == 0.0 && on_segment(a1, a2, b2))
        || (d3 == 0.0 && on_segment(b1, b2, a1))
        || (d4 == 0.0 && on_segment(b1, b2, a2))
}

/// True when two adjacent edges double back over each other.
fn collinear_overlap(a1: Point2, a2: Point2, b1: Point2, b2: Point2) -> bool {
    if cross(a1, a2, b1) != 0.0 || cross(a1, a2, b2) != 0.0 {
        return false;
    }
    // All four points collinear: the shared vertex is fine, overlap of
    // positive length is not. Project onto the dominant axis.
    let along = |p: Point2| {
        if (a2.x - a1.x).abs() >= (a2.y - a1.y).abs() {
            p.x
        } else {
            p.y
        }
    };
    let (lo_a, hi_a) = {
        let (s, e) = (along(a1), along(a2));
        (s.min(e), s.max(e))
    };
    let (lo_b, hi_b) = {
        let (s, e) = (along(b1), along(b2));
        (s.min(e), s.max(e))
    };
    let lo = lo_a.max(lo_b);
    let hi = hi_a.min(hi_b);
    hi > lo
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Vec<Point2> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ]
    }

    #[test]
    fn square_is_simple() {
        assert_eq!(first_self_intersection(&square()), None);
    }

    #[test]
    fn bow_tie_detected() {
        let poly = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        assert!(first_self_intersection(&poly).is_some());
    }

    #[test]
    fn spike_detected() {
        // Edge 1 doubles back along edge 0.
        let poly = vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
        ];
        assert!(first_self_intersection(&poly).is_some());
    }

    #[test]
    fn link_invariants() {
        let mut l = LinkRecord {
            link_id: "L1".into(),
            street_id: "S1".into(),
            tx_position: Point3::new(100.0, 5.0, 1.5),
            d1d: 100.0,
            d3d: 104.0,
            measured_pl: 120.0,
        };
        assert!(l.validate().is_ok());
        l.d3d = 99.0;
        assert!(l.validate().is_err(), "d3d < d1d must fail");
        l.d3d = 501.0;
        assert!(l.validate().is_err(), "d3d > 500 must fail");
    }

    #[test]
    fn street_axis_must_be_unit() {
        let mut m = StreetMeta {
            street_id: "S1".into(),
            width: 20.0,
            rx_height: 30.0,
            buildings_both_sides: true,
            rx_world_position: Point3::new(0.0, 0.0, 30.0),
            street_axis: Point2::new(1.0, 0.0),
        };
        assert!(m.validate().is_ok());
        m.street_axis = Point2::new(1.0, 1.0);
        assert!(m.validate().is_err());
    }

    #[test]
    fn dataset_rejects_duplicate_link_ids() {
        let meta = StreetMeta {
            street_id: "S1".into(),
            width: 20.0,
            rx_height: 30.0,
            buildings_both_sides: false,
            rx_world_position: Point3::new(0.0, 0.0, 30.0),
            street_axis: Point2::new(0.0, 1.0),
        };
        let link = LinkRecord {
            link_id: "L1".into(),
            street_id: "S1".into(),
            tx_position: Point3::new(50.0, 2.0, 1.5),
            d1d: 50.0,
            d3d: 58.0,
            measured_pl: 110.0,
        };
        let ds = Dataset {
            streets: vec![StreetScene {
                meta,
                cloud: PointCloud::new(vec![], Frame::World),
                footprints: vec![],
            }],
            links: vec![link.clone(), link],
        };
        let err = ds.validate().unwrap_err();
        assert!(
            err.to_string().contains("duplicate link_id L1"),
            "got: {err}"
        );
    }
}
