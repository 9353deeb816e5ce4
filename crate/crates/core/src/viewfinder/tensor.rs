use super::propagate::{degree_scale, scaled_adjacency_apply};
use super::{propagate, propagate_transpose, ViewFinderSet, ViewFinderSpec};
use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph};

/// `N x F x C` node-feature-view tensor with the view axis innermost, so the
/// view vector of `(n, f)` is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewTensor {
    num_nodes: usize,
    num_features: usize,
    num_views: usize,
    values: Vec<f64>,
}

impl ViewTensor {
    /// Interleaves `C` propagated matrices of identical shape.
    pub fn from_slices(slices: &[FeatureMatrix]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::Shape("no views to stack".into()))?;
        let (n, f, c) = (first.num_nodes(), first.num_features(), slices.len());
        if slices.iter().any(|s| s.num_nodes() != n || s.num_features() != f) {
            return Err(Error::Shape("views differ in shape".into()));
        }
        let mut values = vec![0.0; n * f * c];
        for (cell, dst) in values.chunks_exact_mut(c).enumerate() {
            for (d, s) in dst.iter_mut().zip(slices) {
                *d = s.values()[cell];
            }
        }
        Ok(Self {
            num_nodes: n,
            num_features: f,
            num_views: c,
            values,
        })
    }

    pub(crate) fn from_raw(n: usize, f: usize, c: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), n * f * c);
        Self {
            num_nodes: n,
            num_features: f,
            num_views: c,
            values,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn num_views(&self) -> usize {
        self.num_views
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `v_{n,f}`
    #[inline]
    pub fn view_vector(&self, n: usize, f: usize) -> &[f64] {
        let start = (n * self.num_features + f) * self.num_views;
        &self.values[start..start + self.num_views]
    }

    /// The `N x F` matrix at view `c`.
    pub fn slice(&self, c: usize) -> FeatureMatrix {
        let values = self
            .values
            .iter()
            .skip(c)
            .step_by(self.num_views)
            .copied()
            .collect();
        FeatureMatrix::from_raw(self.num_nodes, self.num_features, values)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &ViewTensor) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Progress of one `(p, q)` normalized-power family while stacking.
struct PowerFamily {
    key: (u64, u64),
    /// Highest power computed so far.
    hops: u32,
    left: Vec<f64>,
    right: Vec<f64>,
    /// Index in the output of the slice holding that power.
    latest: Option<usize>,
}

/// Members `(k, view index)` of one `(p, q)` family in the adjoint pass.
struct AdjointFamily {
    key: (u64, u64),
    p: f64,
    q: f64,
    members: Vec<(u32, usize)>,
}

/// Each finder applied to `x`, in set order. Powers of the same normalized
/// operator share their lower-order prefix, which gives bit-identical
/// results to computing each one from scratch.
pub(crate) fn view_slices(set: &ViewFinderSet, g: &Graph, x: &FeatureMatrix) -> Result<Vec<FeatureMatrix>> {
    if x.num_nodes() != g.num_nodes() {
        return Err(Error::Shape(format!(
            "feature matrix has {} rows, graph has {} nodes",
            x.num_nodes(),
            g.num_nodes()
        )));
    }
    let f = x.num_features();
    let mut powers: Vec<PowerFamily> = Vec::new();
    let mut out: Vec<FeatureMatrix> = Vec::with_capacity(set.len());
    for spec in set.specs() {
        match *spec {
            ViewFinderSpec::NormalizedPower { p, q, k } => {
                let key = (p.to_bits(), q.to_bits());
                let pos = match powers.iter().position(|e| e.key == key && e.hops <= k) {
                    Some(i) => i,
                    None => {
                        powers.push(PowerFamily {
                            key,
                            hops: 0,
                            left: degree_scale(g, p),
                            right: degree_scale(g, q),
                            latest: None,
                        });
                        powers.len() - 1
                    }
                };
                let entry = &mut powers[pos];
                let mut cur: Option<Vec<f64>> = None;
                while entry.hops < k {
                    let src = match (&cur, entry.latest) {
                        (Some(v), _) => v.as_slice(),
                        (None, Some(i)) => out[i].values(),
                        (None, None) => x.values(),
                    };
                    cur = Some(scaled_adjacency_apply(g, &entry.left, &entry.right, src, f));
                    entry.hops += 1;
                }
                let values = match (cur, entry.latest) {
                    (Some(v), _) => v,
                    (None, Some(i)) => out[i].values().to_vec(),
                    (None, None) => x.values().to_vec(),
                };
                entry.latest = Some(out.len());
                out.push(FeatureMatrix::from_raw(x.num_nodes(), f, values));
            }
            _ => out.push(propagate(spec, g, x)?),
        }
    }
    Ok(out)
}

/// View stacking: `[ν_1(A)X, …, ν_C(A)X]` as an `N x F x C` tensor.
pub fn stack_views(set: &ViewFinderSet, g: &Graph, x: &FeatureMatrix) -> Result<ViewTensor> {
    ViewTensor::from_slices(&view_slices(set, g, x)?)
}

/// Adjoint of view stacking: `Σ_c ν_c(A)^T T[:, :, c]`.
///
/// Powers of one normalized operator are accumulated Horner-style, so a
/// family with hops `1..K` costs `K` sparse sweeps instead of `K(K+1)/2`.
pub fn stack_views_transpose(set: &ViewFinderSet, g: &Graph, t: &ViewTensor) -> Result<FeatureMatrix> {
    if t.num_views() != set.len() || t.num_nodes() != g.num_nodes() {
        return Err(Error::Shape(format!(
            "tensor with {} nodes and {} views does not match graph ({}) / finder set ({})",
            t.num_nodes(),
            t.num_views(),
            g.num_nodes(),
            set.len()
        )));
    }
    let (n, f) = (t.num_nodes(), t.num_features());
    let mut total = vec![0.0; n * f];
    let mut families: Vec<AdjointFamily> = Vec::new();
    for (c, spec) in set.specs().iter().enumerate() {
        match *spec {
            ViewFinderSpec::NormalizedPower { p, q, k } => {
                let key = (p.to_bits(), q.to_bits());
                match families.iter_mut().find(|e| e.key == key) {
                    Some(e) => e.members.push((k, c)),
                    None => families.push(AdjointFamily {
                        key,
                        p,
                        q,
                        members: vec![(k, c)],
                    }),
                }
            }
            _ => {
                let y = propagate_transpose(spec, g, &t.slice(c))?;
                total.iter_mut().zip(y.values()).for_each(|(a, b)| *a += b);
            }
        }
    }
    for AdjointFamily { p, q, members, .. } in families {
        // transpose of D^-p A D^-q is D^-q A D^-p
        let left = degree_scale(g, q);
        let right = degree_scale(g, p);
        let max_k = members.iter().map(|m| m.0).max().unwrap();
        let mut acc = vec![0.0; n * f];
        for hop in (1..=max_k).rev() {
            for &(k, c) in &members {
                if k == hop {
                    let s = t.slice(c);
                    acc.iter_mut().zip(s.values()).for_each(|(a, b)| *a += b);
                }
            }
            acc = scaled_adjacency_apply(g, &left, &right, &acc, f);
        }
        total.iter_mut().zip(&acc).for_each(|(a, b)| *a += b);
    }
    Ok(FeatureMatrix::from_raw(n, f, total))
}
