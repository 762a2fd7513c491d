//! Synthetic urban-canyon scenes with a known path-loss ground truth.
//!
//! The generator builds street scenes whose geometry and clutter
//! statistics match the spans observed in the measurement corpus
//! (street width 15-38 m, Rx mount height 15-54 m, 49-131 links per
//! street, clutter density roughly 0.5-5 points/m^3), then labels each
//! link with a path loss drawn from an explicit generative model:
//!
//! ```text
//! pl = a + 10 n log10(d3d)
//!        + beta_street * clutter_per_street
//!        + beta_link   * clutter_per_link
//!        + gamma_canyon * both_sides
//!        + Normal(0, noise_sigma^2)
//! ```
//!
//! Because the labels are linear in the extracted features (unless the
//! optional saturating distortion is enabled), a regression pipeline
//! that is wired correctly can recover the coefficients exactly at zero
//! noise; tests below pin that property.
//!
//! Street clutter is built from three object archetypes: trees
//! (ellipsoidal foliage blobs between roughly 2 and 9 m height, some
//! hugging the curb and some overhanging the sidewalk), lampposts
//! (thin vertical point columns), and parked vehicles (box-shaped
//! point blocks along the curb). Buildings line one or both facades as
//! rectangular extruded footprints. Links walk one sidewalk at 1.5 m
//! antenna height with log-uniform along-street distances, which keeps
//! the slope of the distance term well identified. Point densities are
//! denser than a survey scan of the same box would be, because the
//! desk-scale streets are an order of magnitude shorter; the per-link
//! clutter counts therefore run higher than the measured corpus even
//! when the per-street densities match it.

use crate::clutter::assemble_clutter;
use crate::error::{Error, Result};
use crate::geometry::{to_street_frame, StreetTransform};
use crate::scene::{
    BuildingFootprint, Dataset, Frame, LinkRecord, Point2, Point3, PointCloud, StreetMeta,
    StreetScene,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::TAU;

/// Nominal point count of one tree blob at `points_scale = 1`.
const TREE_POINTS: f64 = 250.0;
/// Nominal point count of one lamppost column at `points_scale = 1`.
const LAMP_POINTS: f64 = 25.0;
/// Nominal point count of one vehicle block at `points_scale = 1`.
const VEHICLE_POINTS: f64 = 80.0;
/// Shortest along-street Tx-Rx separation placed by the generator.
const LINK_MIN_X: f64 = 10.0;
/// Tx antenna height above ground, meters.
const TX_HEIGHT: f64 = 1.5;

/// Density of the three clutter archetypes, in objects per 100 m of
/// street, plus a global per-object point-count multiplier.
///
/// The realized clutter-per-street density is approximately
/// `(250 trees + 25 lampposts + 80 vehicles) * (length/100) *
/// points_scale / (length * width * rx_height)` points/m^3, which is
/// how [`SceneConfig::example`] tunes `points_scale` to land inside the
/// 0.5-5.0 band. Intensities are deliberately unbounded above so that
/// stress scenes can place one street far outside that band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClutterIntensity {
    pub trees_per_100m: f64,
    pub lampposts_per_100m: f64,
    pub vehicles_per_100m: f64,
    pub points_scale: f64,
}

impl ClutterIntensity {
    /// No clutter at all; streets generate empty point clouds.
    pub fn zero() -> Self {
        ClutterIntensity {
            trees_per_100m: 0.0,
            lampposts_per_100m: 0.0,
            vehicles_per_100m: 0.0,
            points_scale: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("trees_per_100m", self.trees_per_100m),
            ("lampposts_per_100m", self.lampposts_per_100m),
            ("vehicles_per_100m", self.vehicles_per_100m),
            ("points_scale", self.points_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!(
                    "clutter intensity {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Geometry and sampling plan for one synthetic street.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreetConfig {
    /// Street length along the canyon axis, meters (30-500).
    pub length: f64,
    /// Canyon width, meters (15-38).
    pub width: f64,
    /// Rx mount height, meters (15-54).
    pub rx_height: f64,
    /// Buildings on both facades (true) or only the +Y facade (false).
    pub both_sides: bool,
    pub intensity: ClutterIntensity,
    /// Number of Tx positions along the sidewalk (49-131).
    pub links: usize,
}

impl StreetConfig {
    /// Largest along-street Tx distance this street supports: bounded
    /// by the street end and by the 500 m limit on d3d.
    fn max_link_x(&self) -> f64 {
        let y = self.sidewalk_y();
        let dz = self.rx_height - TX_HEIGHT;
        let cap = (500.0_f64.powi(2) - y * y - dz * dz).max(0.0).sqrt();
        (self.length - 2.0).min(0.999 * cap)
    }

    /// Tx positions walk the +Y sidewalk, 2.8 m off the facade line:
    /// between the curb-side object bands, under the overhanging crowns.
    fn sidewalk_y(&self) -> f64 {
        self.width / 2.0 - 2.8
    }

    fn validate(&self, index: usize) -> Result<()> {
        let fail = |msg: String| Err(Error::invalid(format!("street {index}: {msg}")));
        if !(self.length >= 30.0 && self.length <= 500.0) {
            return fail(format!("length must be in [30, 500] m, got {}", self.length));
        }
        if !(self.width >= 15.0 && self.width <= 38.0) {
            return fail(format!("width must be in [15, 38] m, got {}", self.width));
        }
        if !(self.rx_height >= 15.0 && self.rx_height <= 54.0) {
            return fail(format!(
                "rx_height must be in [15, 54] m, got {}",
                self.rx_height
            ));
        }
        if !(49..=131).contains(&self.links) {
            return fail(format!("links must be in [49, 131], got {}", self.links));
        }
        self.intensity.validate().map_err(|e| {
            Error::invalid(format!("street {index}: {e}"))
        })?;
        if self.max_link_x() <= 1.5 * LINK_MIN_X {
            return fail(format!(
                "too short for link placement: longest feasible Tx distance {:.1} m",
                self.max_link_x()
            ));
        }
        Ok(())
    }
}

/// Full scene plan: one entry per street.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub streets: Vec<StreetConfig>,
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.streets.is_empty() {
            return Err(Error::invalid("scene config has no streets"));
        }
        for (i, s) in self.streets.iter().enumerate() {
            s.validate(i)?;
        }
        Ok(())
    }

    /// A documented ready-to-run plan of `n` diverse streets.
    ///
    /// Cycles through seven presets chosen so that width, Rx height,
    /// facade arrangement, and clutter level vary independently and the
    /// realized clutter-per-street densities spread across the 0.5-5.0
    /// points/m^3 band. `points_scale` is solved from the density
    /// formula on [`ClutterIntensity`].
    pub fn example(n: usize) -> SceneConfig {
        const LENGTH: [f64; 7] = [60.0, 50.0, 70.0, 55.0, 65.0, 45.0, 75.0];
        const WIDTH: [f64; 7] = [15.0, 22.0, 30.0, 38.0, 18.0, 26.0, 34.0];
        const HEIGHT: [f64; 7] = [15.0, 18.0, 24.0, 16.0, 20.0, 15.0, 22.0];
        const BOTH: [bool; 7] = [true, false, true, true, false, true, false];
        const LINKS: [usize; 7] = [60, 75, 90, 110, 50, 130, 83];
        const CPS_TARGET: [f64; 7] = [3.8, 2.2, 0.7, 1.3, 1.7, 4.6, 0.9];
        let streets = (0..n)
            .map(|i| {
                let k = i % 7;
                let intensity = tuned_intensity(LENGTH[k], WIDTH[k], HEIGHT[k], CPS_TARGET[k]);
                StreetConfig {
                    length: LENGTH[k],
                    width: WIDTH[k],
                    rx_height: HEIGHT[k],
                    both_sides: BOTH[k],
                    intensity,
                    links: LINKS[k],
                }
            })
            .collect();
        SceneConfig { streets }
    }
}

/// Solves `points_scale` so the realized clutter-per-street density
/// lands near `cps_target` for the given street dimensions.
pub fn tuned_intensity(length: f64, width: f64, rx_height: f64, cps_target: f64) -> ClutterIntensity {
    let trees = 14.0;
    let lamps = 8.0;
    let vehicles = 12.0;
    let base_points =
        (trees * TREE_POINTS + lamps * LAMP_POINTS + vehicles * VEHICLE_POINTS) * length / 100.0;
    // The street box integrates out to roughly the furthest link, ~2 m
    // shy of the street end plus the 2 m object margin on each side.
    let volume = (length - 4.0) * width * rx_height;
    ClutterIntensity {
        trees_per_100m: trees,
        lampposts_per_100m: lamps,
        vehicles_per_100m: vehicles,
        points_scale: cps_target * volume / base_points,
    }
}

/// Coefficients of the generative path-loss model.
///
/// `cps_saturation = Some(s)` replaces the linear street-clutter term
/// `beta_street * cps` with a saturating response: exactly linear up
/// to the knee `s`, then `s + s * tanh((cps - s) / s)` beyond it (C1
/// at the knee). It is off by default; enabling it leaves in-band
/// streets on the exact linear surface while making extrapolation to
/// out-of-range densities genuinely hard for linear models, which the
/// street-fold stress test relies on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthPL {
    /// Intercept, dB.
    pub a: f64,
    /// Path-loss exponent (enters as `10 n log10(d3d)`).
    pub n: f64,
    /// dB per unit clutter-per-street density (points/m^3).
    pub beta_street: f64,
    /// dB per clutter-per-link point count.
    pub beta_link: f64,
    /// dB added when buildings line both facades.
    pub gamma_canyon: f64,
    /// Shadowing standard deviation, dB.
    pub noise_sigma: f64,
    #[serde(default)]
    pub cps_saturation: Option<f64>,
}

impl Default for GroundTruthPL {
    /// Defaults mirror the measured-corpus fit: 46.9 dB intercept,
    /// exponent 3.1, 6.3 dB shadowing, plus moderate clutter terms.
    fn default() -> Self {
        GroundTruthPL {
            a: 46.9,
            n: 3.1,
            beta_street: 4.0,
            beta_link: 0.05,
            gamma_canyon: 2.0,
            noise_sigma: 6.3,
            cps_saturation: None,
        }
    }
}

impl GroundTruthPL {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a", self.a),
            ("n", self.n),
            ("beta_street", self.beta_street),
            ("beta_link", self.beta_link),
            ("gamma_canyon", self.gamma_canyon),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("ground truth {name} must be finite")));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid(format!(
                "noise_sigma must be finite and >= 0, got {}",
                self.noise_sigma
            )));
        }
        if let Some(s) = self.cps_saturation {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!(
                    "cps_saturation must be finite and > 0, got {s}"
                )));
            }
        }
        Ok(())
    }

    /// Street-clutter contribution in dB, saturated when configured.
    fn street_term(&self, cps: f64) -> f64 {
        match self.cps_saturation {
            None => self.beta_street * cps,
            Some(s) if cps <= s => self.beta_street * cps,
            Some(s) => self.beta_street * (s + s * ((cps - s) / s).tanh()),
        }
    }
}

/// Builds the complete scene for `config`: per-street world-frame point
/// clouds, building footprints, street poses, and link geometry. Path
/// losses are initialized to 0; [`generate_pl`] fills them in.
///
/// The same `(config, seed)` pair reproduces the scene bit for bit.
pub fn generate_scene(config: &SceneConfig, seed: u64) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut streets = Vec::with_capacity(config.streets.len());
    let mut links = Vec::new();

    for (i, sc) in config.streets.iter().enumerate() {
        let street_id = format!("s{i}");

        // World pose: random ground position and heading per street.
        let theta = rng.gen_range(0.0..TAU);
        let meta = StreetMeta {
            street_id: street_id.clone(),
            width: sc.width,
            rx_height: sc.rx_height,
            buildings_both_sides: sc.both_sides,
            rx_world_position: Point3::new(
                rng.gen_range(-1000.0..1000.0),
                rng.gen_range(-1000.0..1000.0),
                sc.rx_height,
            ),
            street_axis: Point2::new(theta.cos(), theta.sin()),
        };
        let t = StreetTransform::from_meta(&meta);

        let mut pts = Vec::new();
        scatter_trees(&mut rng, sc, &mut pts);
        scatter_lampposts(&mut rng, sc, &mut pts);
        scatter_vehicles(&mut rng, sc, &mut pts);
        let world_pts = pts.iter().map(|&p| t.to_world(p)).collect();

        let footprints = build_facades(&mut rng, sc, &t);

        for j in 0..sc.links {
            links.push(place_link(&mut rng, sc, &street_id, j));
        }

        streets.push(StreetScene {
            meta,
            cloud: PointCloud::new(world_pts, Frame::World),
            footprints,
        });
    }

    let dataset = Dataset { streets, links };
    dataset.validate()?;
    Ok(dataset)
}

/// Labels every link of `dataset` with a path loss drawn from `truth`.
///
/// Clutter features are measured from the raw (undenoised) street-frame
/// clouds, so at `noise_sigma = 0` and no saturation the labels are an
/// exact linear function of the assembled feature matrix. Deterministic
/// in `(dataset, truth, seed)`.
pub fn generate_pl(dataset: &mut Dataset, truth: &GroundTruthPL, seed: u64) -> Result<()> {
    truth.validate()?;
    let mut clouds = HashMap::new();
    for scene in &dataset.streets {
        clouds.insert(
            scene.meta.street_id.clone(),
            to_street_frame(&scene.cloud, &scene.meta)?,
        );
    }
    let (features, _) = assemble_clutter(dataset, &clouds)?;

    let noise = Normal::new(0.0, truth.noise_sigma)
        .map_err(|e| Error::invalid(format!("bad noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (i, link) in dataset.links.iter_mut().enumerate() {
        let log3d = features.get(i, 0);
        let cpl = features.get(i, 3);
        let cps = features.get(i, 4);
        let both = features.get(i, 6);
        link.measured_pl = truth.a
            + 10.0 * truth.n * log3d
            + truth.street_term(cps)
            + truth.beta_link * cpl
            + truth.gamma_canyon * both
            + noise.sample(&mut rng);
    }
    dataset.validate()
}

// --- object scatterers (street frame) ------------------------------------

fn object_count(per_100m: f64, length: f64) -> usize {
    (per_100m * length / 100.0).round() as usize
}

fn point_count(base: f64, scale: f64) -> usize {
    (base * scale).round() as usize
}

/// Trees either hug the curb line or overhang the sidewalk. Overhang
/// crowns start above antenna height, so a link's direct path threads
/// them near the Tx end without ever starting inside one.
fn scatter_trees(rng: &mut ChaCha8Rng, sc: &StreetConfig, pts: &mut Vec<Point3>) {
    let n_pts = point_count(TREE_POINTS, sc.intensity.points_scale);
    for _ in 0..object_count(sc.intensity.trees_per_100m, sc.length) {
        let cx = rng.gen_range(3.0..sc.length - 3.0);
        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let overhang = rng.gen_bool(0.35);
        let cy = if overhang {
            side * (sc.width / 2.0 - 2.8)
        } else {
            side * (sc.width / 2.0 - 1.2)
        };
        let cz = rng.gen_range(4.5..6.5);
        let rx = rng.gen_range(0.8..1.2);
        let ry = rng.gen_range(0.8..1.2);
        let rz = rng.gen_range(1.8..2.3);
        for _ in 0..n_pts {
            pts.push(sample_in_ellipsoid(rng, cx, cy, cz, rx, ry, rz));
        }
    }
}

fn scatter_lampposts(rng: &mut ChaCha8Rng, sc: &StreetConfig, pts: &mut Vec<Point3>) {
    let n_pts = point_count(LAMP_POINTS, sc.intensity.points_scale);
    for _ in 0..object_count(sc.intensity.lampposts_per_100m, sc.length) {
        let cx = rng.gen_range(3.0..sc.length - 3.0);
        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let cy = side * (sc.width / 2.0 - 2.2);
        for k in 0..n_pts {
            let frac = if n_pts > 1 { k as f64 / (n_pts - 1) as f64 } else { 0.0 };
            pts.push(Point3::new(
                cx + rng.gen_range(-0.05..0.05),
                cy + rng.gen_range(-0.05..0.05),
                0.1 + 6.0 * frac + rng.gen_range(-0.05..0.05),
            ));
        }
    }
}

fn scatter_vehicles(rng: &mut ChaCha8Rng, sc: &StreetConfig, pts: &mut Vec<Point3>) {
    let n_pts = point_count(VEHICLE_POINTS, sc.intensity.points_scale);
    for _ in 0..object_count(sc.intensity.vehicles_per_100m, sc.length) {
        let cx = rng.gen_range(5.0..sc.length - 5.0);
        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let cy = side * (sc.width / 2.0 - 4.2);
        for _ in 0..n_pts {
            pts.push(Point3::new(
                cx + rng.gen_range(-2.2..2.2),
                cy + rng.gen_range(-0.9..0.9),
                1.0 + rng.gen_range(-0.75..0.75),
            ));
        }
    }
}

/// Uniform sample inside an axis-aligned ellipsoid via rejection from
/// its bounding box; falls back to the center after 64 misses (the
/// acceptance rate is ~0.52, so that is unreachable in practice).
fn sample_in_ellipsoid(
    rng: &mut ChaCha8Rng,
    cx: f64,
    cy: f64,
    cz: f64,
    rx: f64,
    ry: f64,
    rz: f64,
) -> Point3 {
    for _ in 0..64 {
        let dx = rng.gen_range(-1.0..1.0);
        let dy = rng.gen_range(-1.0..1.0);
        let dz = rng.gen_range(-1.0..1.0);
        if dx * dx + dy * dy + dz * dz <= 1.0 {
            return Point3::new(cx + dx * rx, cy + dy * ry, cz + dz * rz);
        }
    }
    Point3::new(cx, cy, cz)
}

/// Rectangular building footprints along the facade lines, 12 m deep,
/// with cross-street gaps. World-frame corners via the street pose.
fn build_facades(rng: &mut ChaCha8Rng, sc: &StreetConfig, t: &StreetTransform) -> Vec<BuildingFootprint> {
    let mut out = Vec::new();
    let sides: &[f64] = if sc.both_sides { &[1.0, -1.0] } else { &[1.0] };
    for &side in sides {
        let y0 = side * (sc.width / 2.0);
        let y1 = side * (sc.width / 2.0 + 12.0);
        let mut cursor = rng.gen_range(0.0..6.0);
        while cursor + 10.0 < sc.length {
            let mut blen = rng.gen_range(15.0..40.0);
            if cursor + blen > sc.length {
                blen = sc.length - cursor;
            }
            let corners = [
                (cursor, y0),
                (cursor + blen, y0),
                (cursor + blen, y1),
                (cursor, y1),
            ];
            let polygon = corners
                .iter()
                .map(|&(x, y)| {
                    let w = t.to_world(Point3::new(x, y, 0.0));
                    Point2::new(w.x, w.y)
                })
                .collect();
            out.push(BuildingFootprint {
                polygon,
                height: rng.gen_range(11.0..60.0),
            });
            cursor += blen + rng.gen_range(3.0..10.0);
        }
    }
    out
}

/// One Tx position on the sidewalk with a log-uniform along-street
/// distance, so the distance decades are evenly covered.
fn place_link(rng: &mut ChaCha8Rng, sc: &StreetConfig, street_id: &str, j: usize) -> LinkRecord {
    let y = sc.sidewalk_y();
    let x_max = sc.max_link_x();
    let u = rng.gen_range(LINK_MIN_X.log10()..x_max.log10());
    let x = 10.0_f64.powf(u);
    let dz = sc.rx_height - TX_HEIGHT;
    LinkRecord {
        link_id: format!("{street_id}-l{j}"),
        street_id: street_id.to_string(),
        tx_position: Point3::new(x, y, TX_HEIGHT),
        d1d: x,
        d3d: (x * x + y * y + dz * dz).sqrt(),
        measured_pl: 0.0,
    }
}
