//! World-to-street frame transform.
//!
//! The street frame re-origins the world at the Rx ground point (the
//! point directly below the mounted Rx) and rotates about Z so the
//! street axis becomes +X. Z is unchanged, so street-frame Z is height
//! above the street ground and the Rx sits at (0, 0, rx_height).

use crate::error::{Error, Result};
use crate::scene::{Frame, Point2, Point3, PointCloud, StreetMeta};

/// Rigid motion between world and street frames for one street.
#[derive(Debug, Clone, Copy)]
pub struct StreetTransform {
    /// Rx ground point in world coordinates.
    origin: Point3,
    /// Unit along-street direction in world XY.
    axis: Point2,
}

impl StreetTransform {
    pub fn from_meta(meta: &StreetMeta) -> Self {
        StreetTransform {
            origin: Point3::new(
                meta.rx_world_position.x,
                meta.rx_world_position.y,
                meta.rx_world_position.z - meta.rx_height,
            ),
            axis: meta.street_axis,
        }
    }

    /// World point to street frame.
    pub fn to_street(&self, p: Point3) -> Point3 {
        let d = p.sub(self.origin);
        Point3::new(
            self.axis.x * d.x + self.axis.y * d.y,
            -self.axis.y * d.x + self.axis.x * d.y,
            d.z,
        )
    }

    /// Street-frame point back to world.
    pub fn to_world(&self, p: Point3) -> Point3 {
        Point3::new(
            self.origin.x + self.axis.x * p.x - self.axis.y * p.y,
            self.origin.y + self.axis.y * p.x + self.axis.x * p.y,
            self.origin.z + p.z,
        )
    }
}

/// Transforms a world-frame cloud into the street frame of `meta`.
pub fn to_street_frame(cloud: &PointCloud, meta: &StreetMeta) -> Result<PointCloud> {
    if cloud.frame != Frame::World {
        return Err(Error::invalid(
            "to_street_frame expects a world-frame cloud",
        ));
    }
    let t = StreetTransform::from_meta(meta);
    let points = cloud.points.iter().map(|&p| t.to_street(p)).collect();
    Ok(PointCloud::new(points, Frame::Street))
}
