//! Graph storage: an immutable undirected CSR graph, dense node features,
//! labels, splits, and the on-disk dataset container.

mod container;
mod data;
mod permute;

pub use container::{load_dataset, save_dataset, DatasetMeta};
pub use data::{Dataset, LabelVector, SplitSpec};
pub use permute::{apply_permutation, PermutationSpec};

use crate::error::{Error, Result};

/// Undirected graph in compressed sparse row form.
///
/// Every edge is stored in both directions, rows are sorted and free of
/// duplicates, and self-loops are never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    row_offsets: Vec<usize>,
    col_indices: Vec<u32>,
    degrees: Vec<u32>,
}

impl Graph {
    /// Builds a graph from an edge list. Each undirected edge may appear in
    /// either orientation, any number of times; self-loops are dropped.
    pub fn from_edges<I>(num_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if num_nodes > u32::MAX as usize {
            return Err(Error::InvalidParameter(format!(
                "graph with {num_nodes} nodes exceeds u32 index space"
            )));
        }
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); num_nodes];
        for (u, v) in edges {
            for idx in [u, v] {
                if idx >= num_nodes {
                    return Err(Error::IndexOutOfRange {
                        what: "node",
                        index: idx as u64,
                        bound: num_nodes as u64,
                    });
                }
            }
            if u == v {
                continue;
            }
            adj[u].push(v as u32);
            adj[v].push(u as u32);
        }
        let mut row_offsets = Vec::with_capacity(num_nodes + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
            col_indices.extend_from_slice(row);
            row_offsets.push(col_indices.len());
        }
        Ok(Self::from_csr_unchecked(row_offsets, col_indices))
    }

    /// Builds a graph from CSR arrays, validating every invariant.
    pub fn from_csr(row_offsets: Vec<usize>, col_indices: Vec<u32>) -> Result<Self> {
        if row_offsets.first() != Some(&0) {
            return Err(Error::Shape("row_offsets must start at 0".into()));
        }
        if *row_offsets.last().unwrap() != col_indices.len() {
            return Err(Error::Shape(
                "last row offset must equal number of column indices".into(),
            ));
        }
        let n = row_offsets.len() - 1;
        for w in row_offsets.windows(2) {
            if w[0] > w[1] {
                return Err(Error::Shape("row_offsets must be non-decreasing".into()));
            }
        }
        let g = Self::from_csr_unchecked(row_offsets, col_indices);
        for u in 0..n {
            let row = g.neighbors(u);
            for (i, &v) in row.iter().enumerate() {
                if v as usize >= n {
                    return Err(Error::IndexOutOfRange {
                        what: "node",
                        index: v as u64,
                        bound: n as u64,
                    });
                }
                if v as usize == u {
                    return Err(Error::Shape(format!("self-loop at node {u}")));
                }
                if i > 0 && row[i - 1] >= v {
                    return Err(Error::Shape(format!("row {u} is not strictly increasing")));
                }
                if g.neighbors(v as usize).binary_search(&(u as u32)).is_err() {
                    return Err(Error::Shape(format!("edge ({u},{v}) has no reverse edge")));
                }
            }
        }
        Ok(g)
    }

    fn from_csr_unchecked(row_offsets: Vec<usize>, col_indices: Vec<u32>) -> Self {
        let degrees = row_offsets.windows(2).map(|w| (w[1] - w[0]) as u32).collect();
        Self {
            row_offsets,
            col_indices,
            degrees,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.degrees.len()
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.col_indices.len() / 2
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[u32] {
        &self.col_indices
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    #[inline]
    pub fn neighbors(&self, u: usize) -> &[u32] {
        &self.col_indices[self.row_offsets[u]..self.row_offsets[u + 1]]
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .map(move |&v| (u, v as usize))
                .filter(|&(u, v)| u < v)
        })
    }
}

/// Dense row-major `N x F` matrix of node features or representations.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    num_nodes: usize,
    num_features: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(num_nodes: usize, num_features: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_nodes * num_features {
            return Err(Error::Shape(format!(
                "feature buffer has {} values, expected {num_nodes}x{num_features}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "feature matrix at node {} feature {}",
                i / num_features.max(1),
                i % num_features.max(1)
            )));
        }
        Ok(Self {
            num_nodes,
            num_features,
            values,
        })
    }

    pub fn zeros(num_nodes: usize, num_features: usize) -> Self {
        Self {
            num_nodes,
            num_features,
            values: vec![0.0; num_nodes * num_features],
        }
    }

    /// Builds from nested rows; panics on ragged input. Meant for fixtures.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let f = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * f);
        for r in rows {
            assert_eq!(r.as_ref().len(), f, "ragged rows");
            values.extend_from_slice(r.as_ref());
        }
        Self {
            num_nodes: rows.len(),
            num_features: f,
            values,
        }
    }

    pub(crate) fn from_raw(num_nodes: usize, num_features: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), num_nodes * num_features);
        Self {
            num_nodes,
            num_features,
            values,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, n: usize, f: usize) -> f64 {
        self.values[n * self.num_features + f]
    }

    #[inline]
    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n * self.num_features..(n + 1) * self.num_features]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Largest absolute entrywise difference. Shapes must match.
    pub fn max_abs_diff(&self, other: &FeatureMatrix) -> f64 {
        assert_eq!(
            (self.num_nodes, self.num_features),
            (other.num_nodes, other.num_features)
        );
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Scales each row to unit L1 norm; all-zero rows stay zero.
    pub fn row_normalized(&self) -> FeatureMatrix {
        let mut out = self.clone();
        for row in out.values.chunks_mut(self.num_features.max(1)) {
            let s: f64 = row.iter().map(|v| v.abs()).sum();
            if s > 0.0 {
                row.iter_mut().for_each(|v| *v /= s);
            }
        }
        out
    }

    /// Keeps only the listed rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.num_features);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        Self::from_raw(rows.len(), self.num_features, values)
    }
}
