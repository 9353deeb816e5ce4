//! Directory container:
//!
//! ```text
//! meta.json      {"num_nodes", "num_features", "num_classes", "name"}
//! edges.bin      "GVTE" u32 M, then M (u32, u32) pairs
//! features.bin   "GVTF" u32 N, u32 F, then N*F f32, row-major
//! labels.bin     "GVTL" u32 N, then N i32 (-1 = unlabeled)
//! splits.json    {"train": [...], "val": [...], "test": [...]}
//! ```
//!
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureMatrix, Graph, LabelVector, SplitSpec};
use crate::error::{Error, Result};

pub const EDGES_MAGIC: &[u8; 4] = b"GVTE";
pub const FEATURES_MAGIC: &[u8; 4] = b"GVTF";
pub const LABELS_MAGIC: &[u8; 4] = b"GVTL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub num_nodes: u64,
    pub num_features: u64,
    pub num_classes: u64,
    pub name: String,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    context: String,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], context: &Path) -> Self {
        Self {
            buf,
            pos: 0,
            context: context.display().to_string(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(&self.context, "unexpected end of file"));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != expected {
            return Err(Error::format(
                &self.context,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(expected)
                ),
            ));
        }
        Ok(())
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::format(
                &self.context,
                format!("{} trailing bytes", self.buf.len() - self.pos),
            ));
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}

fn shape_mismatch(what: &str, file: u64, meta: u64) -> Error {
    Error::Shape(format!("{what}: file says {file}, meta.json says {meta}"))
}

/// Loads and validates a dataset directory.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let meta: DatasetMeta = read_json(&dir.join("meta.json"))?;
    let n = meta.num_nodes as usize;

    let path = dir.join("edges.bin");
    let bytes = read(&path)?;
    let mut r = Reader::new(&bytes, &path);
    r.magic(EDGES_MAGIC)?;
    let m = r.u32()? as usize;
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let u = r.u32()? as usize;
        let v = r.u32()? as usize;
        edges.push((u, v));
    }
    r.finish()?;
    let graph = Graph::from_edges(n, edges)?;

    let path = dir.join("features.bin");
    let bytes = read(&path)?;
    let mut r = Reader::new(&bytes, &path);
    r.magic(FEATURES_MAGIC)?;
    let fn_ = r.u32()? as u64;
    let ff = r.u32()? as u64;
    if fn_ != meta.num_nodes {
        return Err(shape_mismatch("features.bin node count", fn_, meta.num_nodes));
    }
    if ff != meta.num_features {
        return Err(shape_mismatch(
            "features.bin feature count",
            ff,
            meta.num_features,
        ));
    }
    let count = (fn_ * ff) as usize;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(r.f32()? as f64);
    }
    r.finish()?;
    let features = FeatureMatrix::new(n, ff as usize, values)?;

    let path = dir.join("labels.bin");
    let bytes = read(&path)?;
    let mut r = Reader::new(&bytes, &path);
    r.magic(LABELS_MAGIC)?;
    let ln = r.u32()? as u64;
    if ln != meta.num_nodes {
        return Err(shape_mismatch("labels.bin node count", ln, meta.num_nodes));
    }
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        labels.push(r.i32()?);
    }
    r.finish()?;
    let labels = LabelVector::new(labels, meta.num_classes as usize)?;

    let splits: SplitSpec = read_json(&dir.join("splits.json"))?;
    Dataset::new(meta.name, graph, features, labels, splits)
}

/// Writes a dataset directory. Features are narrowed to f32.
pub fn save_dataset(ds: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let n = ds.graph.num_nodes();
    let meta = DatasetMeta {
        num_nodes: n as u64,
        num_features: ds.features.num_features() as u64,
        num_classes: ds.num_classes() as u64,
        name: ds.name.clone(),
    };
    write(
        &dir.join("meta.json"),
        serde_json::to_string_pretty(&meta).unwrap().as_bytes(),
    )?;

    let mut buf = Vec::with_capacity(8 + ds.graph.num_edges() * 8);
    buf.extend_from_slice(EDGES_MAGIC);
    buf.extend_from_slice(&(ds.graph.num_edges() as u32).to_le_bytes());
    for (u, v) in ds.graph.edges() {
        buf.extend_from_slice(&(u as u32).to_le_bytes());
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    write(&dir.join("edges.bin"), &buf)?;

    let mut buf = Vec::with_capacity(12 + ds.features.values().len() * 4);
    buf.extend_from_slice(FEATURES_MAGIC);
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&(ds.features.num_features() as u32).to_le_bytes());
    for &v in ds.features.values() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    write(&dir.join("features.bin"), &buf)?;

    let mut buf = Vec::with_capacity(8 + n * 4);
    buf.extend_from_slice(LABELS_MAGIC);
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    for &l in ds.labels.as_slice() {
        buf.extend_from_slice(&l.to_le_bytes());
    }
    write(&dir.join("labels.bin"), &buf)?;

    write(
        &dir.join("splits.json"),
        serde_json::to_string(&ds.splits).unwrap().as_bytes(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_dataset() -> Dataset {
        Dataset::new(
            "path3",
            Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap(),
            FeatureMatrix::from_rows(&[[1.0], [0.0], [2.0]]),
            LabelVector::new(vec![0, 1, 0], 2).unwrap(),
            SplitSpec {
                train: vec![0, 1],
                val: vec![2],
                test: vec![],
            },
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let ds = path_dataset();
        save_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back.graph, ds.graph);
        assert_eq!(back.features, ds.features);
        assert_eq!(back.labels, ds.labels);
        assert_eq!(back.splits, ds.splits);
        assert_eq!(back.name, "path3");
    }

    #[test]
    fn out_of_range_edge_file() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&path_dataset(), dir.path()).unwrap();
        let mut buf = EDGES_MAGIC.to_vec();
        buf.extend_from_slice(&1u32.to_le_bytes());
        buf.extend_from_slice(&0u32.to_le_bytes());
        buf.extend_from_slice(&5u32.to_le_bytes());
        fs::write(dir.path().join("edges.bin"), buf).unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { index: 5, .. }), "{err}");
    }

    #[test]
    fn missing_file_named() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&path_dataset(), dir.path()).unwrap();
        fs::remove_file(dir.path().join("labels.bin")).unwrap();
        match load_dataset(dir.path()).unwrap_err() {
            Error::MissingFile(p) => assert!(p.ends_with("labels.bin")),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn feature_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&path_dataset(), dir.path()).unwrap();
        let meta = r#"{"num_nodes":3,"num_features":2,"num_classes":2,"name":"x"}"#;
        fs::write(dir.path().join("meta.json"), meta).unwrap();
        assert!(matches!(load_dataset(dir.path()).unwrap_err(), Error::Shape(_)));
    }

    #[test]
    fn non_finite_feature_rejected() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&path_dataset(), dir.path()).unwrap();
        let mut buf = FEATURES_MAGIC.to_vec();
        buf.extend_from_slice(&3u32.to_le_bytes());
        buf.extend_from_slice(&1u32.to_le_bytes());
        for v in [1.0f32, f32::INFINITY, 0.0] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(dir.path().join("features.bin"), buf).unwrap();
        assert!(matches!(
            load_dataset(dir.path()).unwrap_err(),
            Error::NonFinite(_)
        ));
    }

    #[test]
    fn bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&path_dataset(), dir.path()).unwrap();
        fs::write(dir.path().join("labels.bin"), b"XXXX\x00\x00\x00\x00").unwrap();
        assert!(matches!(
            load_dataset(dir.path()).unwrap_err(),
            Error::Format { .. }
        ));
    }
}
