//! Domain data model and scene input/output.
//!
//! A [`Dataset`] bundles per-street geometry ([`StreetScene`]) with the
//! measured links ([`LinkRecord`]). Everything is loaded from and saved to
//! plain UTF-8 text formats so fixtures stay inspectable:
//!
//! - `streets.csv` — one row of street metadata per street.
//! - `links.csv` — one row per Tx-Rx measurement.
//! - `clouds/<street_id>.xyz` — whitespace-separated point triples.
//! - `footprints/<street_id>.fpl` — `height; x1,y1 x2,y2 ...` per line.
//!
//! `#` starts a comment line in every format.

mod io;
mod types;

pub use io::{
    load_footprints, load_links, load_pointcloud, load_streets, save_footprints, save_links,
    save_pointcloud, save_streets,
};
pub use types::{
    BuildingFootprint, Dataset, Frame, LinkRecord, Point2, Point3, PointCloud, StreetMeta,
    StreetScene,
};
