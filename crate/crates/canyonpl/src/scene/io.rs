//! Text-format loaders and savers for the scene inputs.
//!
//! Every format is UTF-8, `#` starts a comment line, blank lines are
//! ignored, and floats are written with Rust's shortest round-trip
//! formatting so save → load is exact.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scene::types::{BuildingFootprint, LinkRecord, Point2, Point3, PointCloud, StreetMeta};
use crate::scene::Frame;

const LINKS_HEADER: &str = "link_id,street_id,tx_x,tx_y,tx_z,d1d,d3d,pl_db";
const STREETS_HEADER: &str = "street_id,width,rx_height,both_sides,rx_wx,rx_wy,rx_wz,axis_x,axis_y";

/// Stored d3d must agree with the value recomputed from geometry.
const D3D_TOLERANCE: f64 = 1e-6;

fn label_of(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Non-blank, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_f64(label: &str, line: usize, token: &str, what: &str) -> Result<f64> {
    let v: f64 = token
        .trim()
        .parse()
        .map_err(|_| Error::parse(label, line, format!("invalid number '{token}' for {what}")))?;
    if !v.is_finite() {
        return Err(Error::parse(
            label,
            line,
            format!("non-finite value '{token}' for {what}"),
        ));
    }
    Ok(v)
}

fn expect_header(label: &str, line: usize, got: &str, want: &str) -> Result<()> {
    if got != want {
        return Err(Error::parse(
            label,
            line,
            format!("expected header '{want}', got '{got}'"),
        ));
    }
    Ok(())
}

// --- streets ------------------------------------------------------------

/// Loads street metadata from a `streets.csv` file.
pub fn load_streets(path: &Path) -> Result<Vec<StreetMeta>> {
    let label = label_of(path);
    let text = fs::read_to_string(path)?;
    let mut lines = content_lines(&text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(&label, 1, "missing header"))?;
    expect_header(&label, hline, header, STREETS_HEADER)?;

    let mut out = Vec::new();
    for (ln, line) in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(Error::parse(
                &label,
                ln,
                format!("expected 9 fields, got {}", f.len()),
            ));
        }
        let both_sides = match f[3].trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::parse(
                    &label,
                    ln,
                    format!("both_sides must be 0 or 1, got '{other}'"),
                ))
            }
        };
        let meta = StreetMeta {
            street_id: f[0].trim().to_string(),
            width: parse_f64(&label, ln, f[1], "width")?,
            rx_height: parse_f64(&label, ln, f[2], "rx_height")?,
            buildings_both_sides: both_sides,
            rx_world_position: Point3::new(
                parse_f64(&label, ln, f[4], "rx_wx")?,
                parse_f64(&label, ln, f[5], "rx_wy")?,
                parse_f64(&label, ln, f[6], "rx_wz")?,
            ),
            street_axis: Point2::new(
                parse_f64(&label, ln, f[7], "axis_x")?,
                parse_f64(&label, ln, f[8], "axis_y")?,
            ),
        };
        meta.validate()
            .map_err(|e| Error::parse(&label, ln, e.to_string()))?;
        out.push(meta);
    }
    Ok(out)
}

/// Writes street metadata in the `streets.csv` format.
pub fn save_streets(path: &Path, streets: &[StreetMeta]) -> Result<()> {
    let mut s = String::new();
    s.push_str(STREETS_HEADER);
    s.push('\n');
    for m in streets {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            m.street_id,
            m.width,
            m.rx_height,
            u8::from(m.buildings_both_sides),
            m.rx_world_position.x,
            m.rx_world_position.y,
            m.rx_world_position.z,
            m.street_axis.x,
            m.street_axis.y,
        ));
    }
    fs::write(path, s)?;
    Ok(())
}

// --- links --------------------------------------------------------------

/// Loads links from a `links.csv` file, validating each row against the
/// street table: the street must exist and the stored d3d must match the
/// Tx-to-Rx distance recomputed with that street's rx_height.
pub fn load_links(path: &Path, streets: &[StreetMeta]) -> Result<Vec<LinkRecord>> {
    let label = label_of(path);
    let text = fs::read_to_string(path)?;
    let mut lines = content_lines(&text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(&label, 1, "missing header"))?;
    expect_header(&label, hline, header, LINKS_HEADER)?;

    let mut out: Vec<LinkRecord> = Vec::new();
    for (ln, line) in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(Error::parse(
                &label,
                ln,
                format!("expected 8 fields, got {}", f.len()),
            ));
        }
        let rec = LinkRecord {
            link_id: f[0].trim().to_string(),
            street_id: f[1].trim().to_string(),
            tx_position: Point3::new(
                parse_f64(&label, ln, f[2], "tx_x")?,
                parse_f64(&label, ln, f[3], "tx_y")?,
                parse_f64(&label, ln, f[4], "tx_z")?,
            ),
            d1d: parse_f64(&label, ln, f[5], "d1d")?,
            d3d: parse_f64(&label, ln, f[6], "d3d")?,
            measured_pl: parse_f64(&label, ln, f[7], "pl_db")?,
        };
        rec.validate()
            .map_err(|e| Error::parse(&label, ln, e.to_string()))?;
        if out.iter().any(|r| r.link_id == rec.link_id) {
            return Err(Error::parse(
                &label,
                ln,
                format!("duplicate link_id {}", rec.link_id),
            ));
        }
        let street = streets
            .iter()
            .find(|s| s.street_id == rec.street_id)
            .ok_or_else(|| {
                Error::parse(&label, ln, format!("unknown street_id {}", rec.street_id))
            })?;
        let rx = Point3::new(0.0, 0.0, street.rx_height);
        let d3d_check = rec.tx_position.dist(rx);
        if (d3d_check - rec.d3d).abs() > D3D_TOLERANCE {
            return Err(Error::parse(
                &label,
                ln,
                format!(
                    "d3d {} disagrees with recomputed {} (tolerance {})",
                    rec.d3d, d3d_check, D3D_TOLERANCE
                ),
            ));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Writes links in the `links.csv` format.
pub fn save_links(path: &Path, links: &[LinkRecord]) -> Result<()> {
    let mut s = String::new();
    s.push_str(LINKS_HEADER);
    s.push('\n');
    for l in links {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            l.link_id,
            l.street_id,
            l.tx_position.x,
            l.tx_position.y,
            l.tx_position.z,
            l.d1d,
            l.d3d,
            l.measured_pl,
        ));
    }
    fs::write(path, s)?;
    Ok(())
}

// --- point clouds -------------------------------------------------------

/// Loads a world-frame point cloud from whitespace-separated x y z lines.
pub fn load_pointcloud(path: &Path) -> Result<PointCloud> {
    let label = label_of(path);
    let text = fs::read_to_string(path)?;
    let mut points = Vec::new();
    for (ln, line) in content_lines(&text) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::parse(
                &label,
                ln,
                format!("expected 3 coordinates, got {}", toks.len()),
            ));
        }
        points.push(Point3::new(
            parse_f64(&label, ln, toks[0], "x")?,
            parse_f64(&label, ln, toks[1], "y")?,
            parse_f64(&label, ln, toks[2], "z")?,
        ));
    }
    Ok(PointCloud::new(points, Frame::World))
}

/// Writes a point cloud as x y z lines.
pub fn save_pointcloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut s = String::new();
    for p in &cloud.points {
        s.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
    }
    fs::write(path, s)?;
    Ok(())
}

// --- footprints ---------------------------------------------------------

/// Loads building footprints: one `height; x1,y1 x2,y2 ...` record per line.
pub fn load_footprints(path: &Path) -> Result<Vec<BuildingFootprint>> {
    let label = label_of(path);
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (ln, line) in content_lines(&text) {
        let (height_part, verts_part) = line.split_once(';').ok_or_else(|| {
            Error::parse(&label, ln, "expected 'height; x1,y1 x2,y2 ...' record")
        })?;
        let height = parse_f64(&label, ln, height_part, "height")?;
        let mut polygon = Vec::new();
        for tok in verts_part.split_whitespace() {
            let (xs, ys) = tok.split_once(',').ok_or_else(|| {
                Error::parse(&label, ln, format!("expected 'x,y' vertex, got '{tok}'"))
            })?;
            polygon.push(Point2::new(
                parse_f64(&label, ln, xs, "vertex x")?,
                parse_f64(&label, ln, ys, "vertex y")?,
            ));
        }
        let fp = BuildingFootprint { polygon, height };
        fp.validate()
            .map_err(|e| Error::parse(&label, ln, e.to_string()))?;
        out.push(fp);
    }
    Ok(out)
}

/// Writes building footprints in the `.fpl` format.
pub fn save_footprints(path: &Path, footprints: &[BuildingFootprint]) -> Result<()> {
    let mut s = String::new();
    for fp in footprints {
        s.push_str(&format!("{}", fp.height));
        s.push(';');
        for v in &fp.polygon {
            s.push_str(&format!(" {},{}", v.x, v.y));
        }
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}
