//! Versioned binary container for trained models.
//!
//! One layout serves both model families:
//!
//! ```text
//! offset  size  field
//! 0       8     magic  b"CANYONPL"
//! 8       4     format version, u32 little-endian
//! 12      1     kind   (1 = autoencoder, 2 = regressor)
//! 13      8     header length H, u64 little-endian
//! 21      H     header, JSON
//! 21+H    ...   kind-specific parameter payload
//! ```
//!
//! The autoencoder header carries variant, seed, training config, and the
//! fitted grid scaler; its payload is the flat parameter array as
//! little-endian f64 (count-prefixed). The regressor header is the whole
//! bundle (family tag, fitted model, feature scaler, column names) as
//! JSON with no trailing payload. Loads reject wrong magic, unknown
//! versions, kind mismatches, and any trailing bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ae::{AutoencoderModel, TrainConfig, Variant};
use crate::building::GridScaler;
use crate::clutter::StandardScaler;
use crate::error::{Error, Result};
use crate::regress::{ModelKind, TrainedModel};

/// File magic; also the first eight bytes of every model file.
pub const MAGIC: [u8; 8] = *b"CANYONPL";
/// Current container format version.
pub const FORMAT_VERSION: u32 = 1;

const KIND_AUTOENCODER: u8 = 1;
const KIND_REGRESSOR: u8 = 2;

fn kind_name(kind: u8) -> &'static str {
    match kind {
        KIND_AUTOENCODER => "autoencoder",
        KIND_REGRESSOR => "regressor",
        _ => "unknown",
    }
}

#[derive(Serialize, Deserialize)]
struct AeHeader {
    variant: Variant,
    seed: u64,
    config: TrainConfig,
    scaler: GridScaler,
    /// Expected parameter count, cross-checked against the payload.
    params: u64,
}

/// A fitted regression model with everything prediction needs: the
/// family tag, the feature scaler fitted on its training rows, and the
/// column names the model was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorBundle {
    pub kind: ModelKind,
    pub model: TrainedModel,
    pub scaler: StandardScaler,
    pub feature_names: Vec<String>,
}

fn encode_container(kind: u8, header: &[u8], payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(MAGIC.len() + 13 + header.len() + payload.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(kind);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(header);
    out.extend_from_slice(payload);
    out
}

/// Byte cursor with descriptive underrun errors.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let slice = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(slice)
            }
            None => Err(Error::invalid(format!(
                "model file truncated while reading {what}: need {n} bytes at offset {}, have {}",
                self.pos,
                self.bytes.len() - self.pos
            ))),
        }
    }

    fn take_u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn take_u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::invalid(format!(
                "model file has {} trailing bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Checks magic, version, and kind; returns a cursor at the header field.
fn open_container<'a>(bytes: &'a [u8], expect_kind: u8) -> Result<(Reader<'a>, Vec<u8>)> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(MAGIC.len(), "magic")?;
    if magic != MAGIC {
        return Err(Error::invalid("not a model file: bad magic"));
    }
    let version = r.take_u32("format version")?;
    if version != FORMAT_VERSION {
        return Err(Error::invalid(format!(
            "unsupported model format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let kind = r.take(1, "kind")?[0];
    if kind != expect_kind {
        return Err(Error::invalid(format!(
            "model file holds a {} model, expected a {} model",
            kind_name(kind),
            kind_name(expect_kind)
        )));
    }
    let header_len = r.take_u64("header length")? as usize;
    let header = r.take(header_len, "header")?.to_vec();
    Ok((r, header))
}

fn header_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    serde_json::to_vec(value)
        .map_err(|e| Error::invalid(format!("could not encode model header: {e}")))
}

fn parse_header<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<T> {
    serde_json::from_slice(bytes)
        .map_err(|e| Error::invalid(format!("could not decode model header: {e}")))
}

/// Saves a trained autoencoder: JSON header plus the flat parameter
/// array as little-endian f64.
pub fn save_autoencoder(model: &AutoencoderModel, path: &Path) -> Result<()> {
    let params = model.flat_params();
    let header = header_json(&AeHeader {
        variant: model.variant,
        seed: model.seed,
        config: model.config,
        scaler: model.scaler.clone(),
        params: params.len() as u64,
    })?;
    let mut payload = Vec::with_capacity(8 + params.len() * 8);
    payload.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in &params {
        payload.extend_from_slice(&p.to_le_bytes());
    }
    fs::write(path, encode_container(KIND_AUTOENCODER, &header, &payload))?;
    Ok(())
}

/// Loads an autoencoder saved by [`save_autoencoder`], rebuilding the
/// network for the stored variant and restoring every parameter.
pub fn load_autoencoder(path: &Path) -> Result<AutoencoderModel> {
    let bytes = fs::read(path)?;
    let (mut r, header) = open_container(&bytes, KIND_AUTOENCODER)?;
    let header: AeHeader = parse_header(&header)?;
    let count = r.take_u64("parameter count")? as usize;
    if count as u64 != header.params {
        return Err(Error::invalid(format!(
            "parameter count mismatch: header says {}, payload says {count}",
            header.params
        )));
    }
    let raw = r.take(count * 8, "parameters")?;
    r.finish()?;
    let params: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    AutoencoderModel::from_flat_params(
        header.variant,
        header.seed,
        header.config,
        header.scaler,
        &params,
    )
}

/// Saves a fitted regression bundle in the shared container format.
pub fn save_regressor(bundle: &RegressorBundle, path: &Path) -> Result<()> {
    let header = header_json(bundle)?;
    fs::write(path, encode_container(KIND_REGRESSOR, &header, &[]))?;
    Ok(())
}

/// Loads a bundle saved by [`save_regressor`].
pub fn load_regressor(path: &Path) -> Result<RegressorBundle> {
    let bytes = fs::read(path)?;
    let (r, header) = open_container(&bytes, KIND_REGRESSOR)?;
    r.finish()?;
    parse_header(&header)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::building::FacadePatch;
    use crate::matrix::Matrix;
    use crate::regress::fit_family;
    use crate::ae::train_autoencoder;

    fn training_patches() -> Vec<FacadePatch> {
        // Two gradient patches with distinct cell structure.
        let mut a = FacadePatch::zero();
        let mut b = FacadePatch::zero();
        for row in 0..40 {
            for col in 0..40 {
                a.set(row, col, (row as f64 * 1.3 + col as f64 * 0.4) % 17.0);
                b.set(row + 20, col, (row as f64 * 0.7 + col as f64 * 1.1) % 23.0);
            }
        }
        vec![a, b]
    }

    fn tiny_autoencoder() -> AutoencoderModel {
        let patches = training_patches();
        let scaler = GridScaler::fit(&patches).unwrap();
        let normalized: Vec<FacadePatch> = patches.iter().map(|p| scaler.normalize(p)).collect();
        let config = TrainConfig {
            epochs: 1,
            batch_size: 2,
            ..TrainConfig::default()
        };
        train_autoencoder(&normalized, scaler, Variant::Single, config, 40)
            .unwrap()
            .0
    }

    #[test]
    fn container_layout_is_pinned() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let bundle = lasso_bundle();
        save_regressor(&bundle, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], b"CANYONPL");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(bytes[12], 2); // regressor kind
        let header_len = u64::from_le_bytes(bytes[13..21].try_into().unwrap()) as usize;
        assert_eq!(bytes.len(), 21 + header_len);
    }

    fn lasso_bundle() -> RegressorBundle {
        let x = Matrix::from_rows(
            &(0..30)
                .map(|i| vec![i as f64 / 10.0, ((i * 7) % 13) as f64, (i % 2) as f64])
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let y: Vec<f64> = (0..30).map(|i| 5.0 + 2.0 * (i as f64 / 10.0)).collect();
        let scaler = StandardScaler::fit(&x).unwrap();
        let xs = scaler.transform(&x).unwrap();
        let model = fit_family(ModelKind::Lasso, &xs, &y, 3, &Default::default()).unwrap();
        RegressorBundle {
            kind: ModelKind::Lasso,
            model,
            scaler,
            feature_names: vec!["f0".into(), "f1".into(), "f2".into()],
        }
    }

    #[test]
    fn regressor_bundles_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let x = Matrix::from_rows(
            &(0..30)
                .map(|i| vec![i as f64 / 10.0, ((i * 11) % 7) as f64, (i % 3) as f64])
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let y: Vec<f64> = (0..30)
            .map(|i| 90.0 + 3.0 * (i as f64 / 10.0) + ((i * 11) % 7) as f64)
            .collect();
        let scaler = StandardScaler::fit(&x).unwrap();
        let xs = scaler.transform(&x).unwrap();
        for kind in ModelKind::ALL {
            let model = fit_family(kind, &xs, &y, 5, &Default::default()).unwrap();
            let bundle = RegressorBundle {
                kind,
                model,
                scaler: scaler.clone(),
                feature_names: vec!["a".into(), "b".into(), "c".into()],
            };
            let path = dir.path().join(format!("{}.bin", kind.name()));
            save_regressor(&bundle, &path).unwrap();
            let back = load_regressor(&path).unwrap();
            assert_eq!(back, bundle);
            // Identical predictions bit for bit.
            let before = bundle.model.predict(&xs).unwrap();
            let after = back.model.predict(&xs).unwrap();
            assert_eq!(before, after);
        }
    }

    #[test]
    fn autoencoder_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ae.bin");
        let model = tiny_autoencoder();
        save_autoencoder(&model, &path).unwrap();
        let back = load_autoencoder(&path).unwrap();
        assert_eq!(back.variant, model.variant);
        assert_eq!(back.seed, model.seed);
        assert_eq!(back.config, model.config);
        assert_eq!(back.scaler, model.scaler);
        assert_eq!(back.flat_params(), model.flat_params());
        // The restored network encodes identically.
        let probe = model.scaler.normalize(&training_patches()[0]);
        assert_eq!(back.encode(&probe).unwrap(), model.encode(&probe).unwrap());
    }

    #[test]
    fn loads_reject_corrupted_containers() {
        let dir = tempfile::tempdir().unwrap();
        let ae_path = dir.path().join("ae.bin");
        let rg_path = dir.path().join("rg.bin");
        save_autoencoder(&tiny_autoencoder(), &ae_path).unwrap();
        save_regressor(&lasso_bundle(), &rg_path).unwrap();

        // Kind mismatch in both directions.
        assert!(load_autoencoder(&rg_path).is_err());
        assert!(load_regressor(&ae_path).is_err());

        let good = fs::read(&ae_path).unwrap();

        let mut bad_magic = good.clone();
        bad_magic[0] ^= 0xff;
        fs::write(&ae_path, &bad_magic).unwrap();
        assert!(load_autoencoder(&ae_path).is_err());

        let mut bad_version = good.clone();
        bad_version[8] = 99;
        fs::write(&ae_path, &bad_version).unwrap();
        assert!(load_autoencoder(&ae_path).is_err());

        let truncated = &good[..good.len() / 2];
        fs::write(&ae_path, truncated).unwrap();
        assert!(load_autoencoder(&ae_path).is_err());

        let mut trailing = good.clone();
        trailing.push(0);
        fs::write(&ae_path, &trailing).unwrap();
        assert!(load_autoencoder(&ae_path).is_err());

        // Header/payload parameter-count disagreement.
        let mut short_params = good;
        let header_len = u64::from_le_bytes(short_params[13..21].try_into().unwrap()) as usize;
        let count_at = 21 + header_len;
        let count = u64::from_le_bytes(short_params[count_at..count_at + 8].try_into().unwrap());
        short_params[count_at..count_at + 8].copy_from_slice(&(count - 1).to_le_bytes());
        fs::write(&ae_path, &short_params).unwrap();
        assert!(load_autoencoder(&ae_path).is_err());
    }
}
