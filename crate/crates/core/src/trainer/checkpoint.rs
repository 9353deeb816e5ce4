use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PredictorKind, PredictorParams, TrainConfig};
use crate::error::{Error, Result};
use crate::kernel::{EncoderState, Phi, PhiKind};
use crate::viewfinder::ViewFinderSet;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GVTC";
pub const PREDICTOR_MAGIC: &[u8; 4] = b"GVTP";
pub const FORMAT_VERSION: u32 = 1;

/// Facts about the run that produced a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub dataset: String,
    pub num_features: usize,
    pub num_classes: usize,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_accuracy: Option<f64>,
}

/// A frozen encoder plus the configuration and metadata of its pretraining.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub encoder: EncoderState,
    pub config: TrainConfig,
    pub meta: TrainingMeta,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    /// Byte offset into the blob.
    offset: u64,
    len: u64,
}

#[derive(Serialize, Deserialize)]
struct PhiHeader {
    #[serde(flatten)]
    kind: PhiKind,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    finders: ViewFinderSet,
    phi: PhiHeader,
    pretrain_depth: usize,
    config: TrainConfig,
    meta: TrainingMeta,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
struct PredictorHeader {
    kind: PredictorKind,
    in_dim: usize,
    hidden: usize,
    classes: usize,
    depth: usize,
    tensors: Vec<TensorEntry>,
}

fn encode(magic: &[u8; 4], header: &impl Serialize, tensors: &[&[f64]]) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header).map_err(|e| Error::format("checkpoint header", e.to_string()))?;
    let blob_len: usize = tensors.iter().map(|t| t.len() * 4).sum();
    let mut out = Vec::with_capacity(16 + json.len() + blob_len);
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for t in tensors {
        for v in t.iter() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

fn entries(names: &[&str], tensors: &[&[f64]]) -> Vec<TensorEntry> {
    let mut offset = 0u64;
    names
        .iter()
        .zip(tensors)
        .map(|(name, t)| {
            let e = TensorEntry {
                name: name.to_string(),
                offset,
                len: t.len() as u64,
            };
            offset += t.len() as u64 * 4;
            e
        })
        .collect()
}

/// Splits a container into its JSON header and blob after checking magic and
/// version.
fn decode<'a>(bytes: &'a [u8], magic: &[u8; 4], context: &str) -> Result<(&'a [u8], &'a [u8])> {
    if bytes.len() < 16 {
        return Err(Error::format(context, "file shorter than its fixed header"));
    }
    if &bytes[..4] != magic {
        return Err(Error::format(
            context,
            format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&bytes[..4]),
                String::from_utf8_lossy(magic)
            ),
        ));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "{context}: format version {version}, this build reads {FORMAT_VERSION}"
        )));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let end = 16u64
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len() as u64)
        .ok_or_else(|| Error::format(context, "header length runs past end of file"))? as usize;
    Ok((&bytes[16..end], &bytes[end..]))
}

fn read_tensor(blob: &[u8], entry: &TensorEntry, expected: usize, context: &str) -> Result<Vec<f64>> {
    if entry.len as usize != expected {
        return Err(Error::format(
            context,
            format!(
                "tensor `{}` has {} values, expected {expected}",
                entry.name, entry.len
            ),
        ));
    }
    let start = entry.offset as usize;
    let end = start + expected * 4;
    if !entry.offset.is_multiple_of(4) || end > blob.len() {
        return Err(Error::format(
            context,
            format!("tensor `{}` lies outside the blob", entry.name),
        ));
    }
    let values: Vec<f64> = blob[start..end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{context}: tensor `{}`", entry.name)));
    }
    Ok(values)
}

fn check_blob_len(blob: &[u8], entries: &[TensorEntry], context: &str) -> Result<()> {
    let used: u64 = entries.iter().map(|e| e.len * 4).sum();
    if used != blob.len() as u64 {
        return Err(Error::format(
            context,
            format!("blob has {} bytes, tensors account for {used}", blob.len()),
        ));
    }
    Ok(())
}

fn find<'a>(entries: &'a [TensorEntry], name: &str, context: &str) -> Result<&'a TensorEntry> {
    entries
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::format(context, format!("no tensor named `{name}`")))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

impl Checkpoint {
    /// Serialized form. Parameters are stored as f32.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let tensors: [&[f64]; 1] = [self.encoder.phi.params()];
        let header = CheckpointHeader {
            finders: self.encoder.finders.clone(),
            phi: PhiHeader {
                kind: self.encoder.phi.kind(),
                dim: self.encoder.phi.dim(),
            },
            pretrain_depth: self.encoder.pretrain_depth,
            config: self.config.clone(),
            meta: self.meta.clone(),
            tensors: entries(&["phi"], &tensors),
        };
        encode(CHECKPOINT_MAGIC, &header, &tensors)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let ctx = "checkpoint";
        let (json, blob) = decode(bytes, CHECKPOINT_MAGIC, ctx)?;
        let header: CheckpointHeader =
            serde_json::from_slice(json).map_err(|e| Error::format(ctx, e.to_string()))?;
        check_blob_len(blob, &header.tensors, ctx)?;
        let count = Phi::num_params(header.phi.kind, header.phi.dim);
        let params = read_tensor(blob, find(&header.tensors, "phi", ctx)?, count, ctx)?;
        let phi = Phi::new(header.phi.kind, header.phi.dim, params)?;
        let encoder = EncoderState::new(header.finders, phi, header.pretrain_depth)?;
        Ok(Self {
            encoder,
            config: header.config,
            meta: header.meta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_bytes()?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// The same checkpoint with parameters rounded to what the file stores.
    pub fn rounded(&self) -> Self {
        let mut out = self.clone();
        for p in out.encoder.phi.params_mut() {
            *p = *p as f32 as f64;
        }
        out
    }
}

/// Writes an adapted predictor and the depth it reads from.
pub fn save_predictor(path: impl AsRef<Path>, predictor: &PredictorParams, depth: usize) -> Result<()> {
    let tensors: [&[f64]; 1] = [predictor.params()];
    let header = PredictorHeader {
        kind: predictor.kind(),
        in_dim: predictor.in_dim(),
        hidden: predictor.hidden(),
        classes: predictor.classes(),
        depth,
        tensors: entries(&["predictor"], &tensors),
    };
    write_file(path.as_ref(), &encode(PREDICTOR_MAGIC, &header, &tensors)?)
}

pub fn load_predictor(path: impl AsRef<Path>) -> Result<(PredictorParams, usize)> {
    let path = path.as_ref();
    let ctx = "predictor file";
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (json, blob) = decode(&bytes, PREDICTOR_MAGIC, ctx)?;
    let h: PredictorHeader = serde_json::from_slice(json).map_err(|e| Error::format(ctx, e.to_string()))?;
    check_blob_len(blob, &h.tensors, ctx)?;
    let count = PredictorParams::num_params(h.kind, h.in_dim, h.hidden, h.classes);
    let params = read_tensor(blob, find(&h.tensors, "predictor", ctx)?, count, ctx)?;
    Ok((
        PredictorParams::new(h.kind, h.in_dim, h.hidden, h.classes, params)?,
        h.depth,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::viewfinder::default_finder_set;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let finders = default_finder_set(2).unwrap();
        let kind = PhiKind::Mlp {
            depth: 2,
            activation: crate::kernel::Activation::Gelu,
        };
        let phi = Phi::glorot(kind, finders.len(), &mut rng).unwrap();
        Checkpoint {
            encoder: EncoderState::new(finders, phi, 4).unwrap(),
            config: TrainConfig::default(),
            meta: TrainingMeta {
                dataset: "toy".into(),
                num_features: 3,
                num_classes: 2,
                epochs_run: 10,
                best_epoch: 4,
                best_val_accuracy: Some(0.75),
            },
        }
        .rounded()
    }

    #[test]
    fn round_trip_is_exact_after_rounding() {
        let ck = sample();
        let bytes = ck.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"GVTC");
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn header_is_readable_json() {
        let bytes = sample().to_bytes().unwrap();
        let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let v: serde_json::Value = serde_json::from_slice(&bytes[16..16 + len]).unwrap();
        assert_eq!(v["finders"][0]["variant"], "identity");
        assert_eq!(v["phi"]["kind"], "mlp");
        assert_eq!(v["tensors"][0]["offset"], 0);
    }

    #[test]
    fn bad_magic_is_a_format_error() {
        let mut bytes = sample().to_bytes().unwrap();
        bytes[0] = b'X';
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn version_mismatch() {
        let mut bytes = sample().to_bytes().unwrap();
        bytes[4..8].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::Checkpoint(_))
        ));
    }

    #[test]
    fn truncated_blob() {
        let bytes = sample().to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 4]).is_err());
        assert!(Checkpoint::from_bytes(&bytes[..10]).is_err());
    }

    #[test]
    fn predictor_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.gvtp");
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut p = PredictorParams::glorot(PredictorKind::Mlp, 5, 3, 2, &mut rng).unwrap();
        for v in p.params_mut() {
            *v = *v as f32 as f64;
        }
        save_predictor(&path, &p, 3).unwrap();
        let (q, depth) = load_predictor(&path).unwrap();
        assert_eq!((q, depth), (p, 3));
    }
}
