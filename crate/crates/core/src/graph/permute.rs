use super::{FeatureMatrix, Graph};
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;

/// Node and feature relabelings. `node_perm[old] = new`, likewise for
/// features.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationSpec {
    pub node_perm: Vec<usize>,
    pub feature_perm: Vec<usize>,
}

fn check_bijection(perm: &[usize], what: &str) -> Result<()> {
    let mut seen = vec![false; perm.len()];
    for &p in perm {
        if p >= perm.len() || seen[p] {
            return Err(Error::InvalidParameter(format!("{what} is not a permutation")));
        }
        seen[p] = true;
    }
    Ok(())
}

impl PermutationSpec {
    pub fn new(node_perm: Vec<usize>, feature_perm: Vec<usize>) -> Result<Self> {
        check_bijection(&node_perm, "node_perm")?;
        check_bijection(&feature_perm, "feature_perm")?;
        Ok(Self {
            node_perm,
            feature_perm,
        })
    }

    pub fn identity(num_nodes: usize, num_features: usize) -> Self {
        Self {
            node_perm: (0..num_nodes).collect(),
            feature_perm: (0..num_features).collect(),
        }
    }

    pub fn random<R: Rng + ?Sized>(num_nodes: usize, num_features: usize, rng: &mut R) -> Self {
        let mut node_perm: Vec<usize> = (0..num_nodes).collect();
        let mut feature_perm: Vec<usize> = (0..num_features).collect();
        node_perm.shuffle(rng);
        feature_perm.shuffle(rng);
        Self {
            node_perm,
            feature_perm,
        }
    }

    pub fn inverse(&self) -> Self {
        let inv = |p: &[usize]| {
            let mut out = vec![0; p.len()];
            for (old, &new) in p.iter().enumerate() {
                out[new] = old;
            }
            out
        };
        Self {
            node_perm: inv(&self.node_perm),
            feature_perm: inv(&self.feature_perm),
        }
    }

    /// Node permutation only (features untouched).
    pub fn nodes_only(&self) -> Self {
        Self {
            node_perm: self.node_perm.clone(),
            feature_perm: (0..self.feature_perm.len()).collect(),
        }
    }

    /// Feature permutation only (nodes untouched).
    pub fn features_only(&self) -> Self {
        Self {
            node_perm: (0..self.node_perm.len()).collect(),
            feature_perm: self.feature_perm.clone(),
        }
    }

    /// `P M Q` for an `N x F` matrix.
    pub fn permute_matrix(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        let (n, f) = (m.num_nodes(), m.num_features());
        if self.node_perm.len() != n || self.feature_perm.len() != f {
            return Err(Error::Shape(format!(
                "permutation sizes ({}, {}) do not match matrix {n}x{f}",
                self.node_perm.len(),
                self.feature_perm.len()
            )));
        }
        let mut out = vec![0.0; n * f];
        for old_n in 0..n {
            let new_n = self.node_perm[old_n];
            let src = m.row(old_n);
            let dst = &mut out[new_n * f..(new_n + 1) * f];
            for (old_f, &v) in src.iter().enumerate() {
                dst[self.feature_perm[old_f]] = v;
            }
        }
        Ok(FeatureMatrix::from_raw(n, f, out))
    }

    /// `P A P^T`.
    pub fn permute_graph(&self, g: &Graph) -> Result<Graph> {
        if self.node_perm.len() != g.num_nodes() {
            return Err(Error::Shape(format!(
                "node permutation of size {} for graph with {} nodes",
                self.node_perm.len(),
                g.num_nodes()
            )));
        }
        let p = &self.node_perm;
        Graph::from_edges(g.num_nodes(), g.edges().map(|(u, v)| (p[u], p[v])))
    }
}

/// Relabels nodes and features: returns `(P A P^T, P X Q)`.
pub fn apply_permutation(
    g: &Graph,
    x: &FeatureMatrix,
    p: &PermutationSpec,
) -> Result<(Graph, FeatureMatrix)> {
    if x.num_nodes() != g.num_nodes() {
        return Err(Error::Shape("features and graph disagree on N".into()));
    }
    Ok((p.permute_graph(g)?, p.permute_matrix(x)?))
}
