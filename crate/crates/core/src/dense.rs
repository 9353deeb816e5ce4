//! Dense reference operators for small graphs.
//!
//! Everything here builds `ν(A)` as an explicit `N x N` matrix and multiplies
//! it out. It shares no code with the sparse propagation path and serves as
//! the oracle for it.

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph};
use crate::viewfinder::ViewFinderSpec;

/// Node-count limit for dense construction.
pub const MAX_DENSE_NODES: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn adjacency(g: &Graph) -> Result<Self> {
        let n = g.num_nodes();
        if n > MAX_DENSE_NODES {
            return Err(Error::InvalidParameter(format!(
                "dense oracle limited to {MAX_DENSE_NODES} nodes, got {n}"
            )));
        }
        let mut m = Self::zeros(n);
        for (u, v) in g.edges() {
            m.data[u * n + v] = 1.0;
            m.data[v * n + u] = 1.0;
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Row sums of the matrix.
    pub fn row_sums(&self) -> Vec<f64> {
        self.data.chunks(self.n.max(1)).map(|r| r.iter().sum()).collect()
    }

    /// `D^{-p} M D^{-q}` using this matrix's own row sums as degrees, with
    /// `0^{-e}` taken as 0.
    pub fn degree_normalized(&self, p: f64, q: f64) -> Self {
        let d = self.row_sums();
        let pw = |deg: f64, e: f64| if deg == 0.0 { 0.0 } else { deg.powf(-e) };
        let n = self.n;
        let mut out = self.clone();
        for i in 0..n {
            for j in 0..n {
                out.data[i * n + j] *= pw(d[i], p) * pw(d[j], q);
            }
        }
        out
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::identity(self.n);
        for _ in 0..k {
            out = out.matmul(self);
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &DenseMatrix) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j];
            }
        }
        out
    }

    /// `M X`.
    pub fn apply(&self, x: &FeatureMatrix) -> FeatureMatrix {
        let (n, f) = (self.n, x.num_features());
        assert_eq!(x.num_nodes(), n);
        let mut out = vec![0.0; n * f];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..f {
                    out[i * f + j] += a * x.get(k, j);
                }
            }
        }
        FeatureMatrix::from_raw(n, f, out)
    }
}

/// `ν(A)` as a dense matrix.
pub fn dense_view_finder(spec: &ViewFinderSpec, g: &Graph) -> Result<DenseMatrix> {
    let a = DenseMatrix::adjacency(g)?;
    let n = a.dim();
    Ok(match *spec {
        ViewFinderSpec::Identity => DenseMatrix::identity(n),
        ViewFinderSpec::SelfAugmented => a.add(&DenseMatrix::identity(n)),
        ViewFinderSpec::NormalizedPower { p, q, k } => a.degree_normalized(p, q).pow(k),
        ViewFinderSpec::Chebyshev {
            order,
            estimate_lambda_max,
        } => {
            let lambda = if estimate_lambda_max {
                crate::viewfinder::estimate_lambda_max(g)
            } else {
                2.0
            };
            let lap = DenseMatrix::identity(n).add(&a.degree_normalized(0.5, 0.5).scaled(-1.0));
            let lt = lap
                .scaled(2.0 / lambda)
                .add(&DenseMatrix::identity(n).scaled(-1.0));
            let mut prev = DenseMatrix::identity(n);
            if order == 0 {
                return Ok(prev);
            }
            let mut cur = lt.clone();
            for _ in 2..=order {
                let next = lt.matmul(&cur).scaled(2.0).add(&prev.scaled(-1.0));
                prev = cur;
                cur = next;
            }
            cur
        }
        ViewFinderSpec::TruncatedDiffusion { alpha, truncation } => {
            let b = a.degree_normalized(1.0, 0.0);
            let mut acc = DenseMatrix::zeros(n);
            for j in 0..=truncation {
                acc = acc.add(&b.pow(j).scaled(alpha * (1.0 - alpha).powi(j as i32)));
            }
            acc
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_operators() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let rw = dense_view_finder(&ViewFinderSpec::random_walk(1), &g).unwrap();
        assert_eq!(rw.get(1, 0), 0.5);
        assert_eq!(rw.get(0, 1), 1.0);
        let x = FeatureMatrix::from_rows(&[[1.0], [0.0], [2.0]]);
        assert_eq!(rw.apply(&x).values(), &[0.0, 1.5, 0.0]);
        assert_eq!(rw.transpose().get(1, 0), 1.0);
    }
}
