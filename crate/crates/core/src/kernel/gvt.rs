use std::hash::{Hash, Hasher};

use rayon::prelude::*;

use super::Phi;
use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph};
use crate::viewfinder::{stack_views, stack_views_transpose, ViewFinderSet, ViewTensor};

/// Cells per parallel work item. Per-chunk gradient buffers are merged in
/// chunk order, so results do not depend on the thread count.
const CELL_CHUNK: usize = 8192;

/// A frozen-able encoder: the finder set, `φ`, and the depth it was
/// pretrained at.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderState {
    pub finders: ViewFinderSet,
    pub phi: Phi,
    pub pretrain_depth: usize,
}

impl EncoderState {
    pub fn new(finders: ViewFinderSet, phi: Phi, pretrain_depth: usize) -> Result<Self> {
        if phi.dim() != finders.len() {
            return Err(Error::Shape(format!(
                "φ takes {} inputs but the finder set has {} views",
                phi.dim(),
                finders.len()
            )));
        }
        if pretrain_depth == 0 {
            return Err(Error::InvalidParameter("pretrain depth must be ≥ 1".into()));
        }
        Ok(Self {
            finders,
            phi,
            pretrain_depth,
        })
    }

    fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.finders.len().hash(&mut h);
        for p in self.phi.params() {
            p.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

/// Applies `φ` to every view vector of `t`.
pub fn apply_phi(phi: &Phi, t: &ViewTensor) -> Result<FeatureMatrix> {
    let c = t.num_views();
    if c != phi.dim() {
        return Err(Error::Shape(format!(
            "tensor has {c} views, φ expects {}",
            phi.dim()
        )));
    }
    let cells = t.num_nodes() * t.num_features();
    let mut out = vec![0.0; cells];
    out.par_chunks_mut(CELL_CHUNK)
        .enumerate()
        .for_each(|(chunk, dst)| {
            let mut ws = phi.workspace();
            let base = chunk * CELL_CHUNK;
            let src = &t.values()[base * c..(base + dst.len()) * c];
            for (o, v) in dst.iter_mut().zip(src.chunks_exact(c)) {
                *o = phi.eval_with(v, &mut ws);
            }
        });
    Ok(FeatureMatrix::from_raw(t.num_nodes(), t.num_features(), out))
}

/// `Ψ(X, A) = [φ(v_{n,f})]`.
pub fn gvt_forward(enc: &EncoderState, g: &Graph, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    let t = stack_views(&enc.finders, g, x)?;
    apply_phi(&enc.phi, &t)
}

/// Intermediate representations `Z^0 = X, Z^1, …, Z^L` of the recurrence.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub states: Vec<FeatureMatrix>,
    /// View tensors of `Z^0 … Z^{L-1}`, kept only when requested.
    pub views: Option<Vec<ViewTensor>>,
    fingerprint: u64,
}

impl ForwardTrace {
    pub fn depth(&self) -> usize {
        self.states.len() - 1
    }

    /// `Z^L`.
    pub fn output(&self) -> &FeatureMatrix {
        self.states.last().unwrap()
    }
}

/// `Z = Ψ(·, A | θ)^L (X)`, keeping every intermediate state.
pub fn rgvt_forward(enc: &EncoderState, g: &Graph, x: &FeatureMatrix, depth: usize) -> Result<ForwardTrace> {
    rgvt_forward_with(enc, g, x, depth, false)
}

/// As [`rgvt_forward`]; `cache_views` keeps the `L` view tensors so the
/// backward pass does not recompute them (memory `L·N·F·C`).
pub fn rgvt_forward_with(
    enc: &EncoderState,
    g: &Graph,
    x: &FeatureMatrix,
    depth: usize,
    cache_views: bool,
) -> Result<ForwardTrace> {
    if depth == 0 {
        return Err(Error::InvalidParameter("recurrent depth must be ≥ 1".into()));
    }
    let mut states = Vec::with_capacity(depth + 1);
    let mut views = cache_views.then(Vec::new);
    states.push(x.clone());
    for _ in 0..depth {
        let t = stack_views(&enc.finders, g, states.last().unwrap())?;
        let z = apply_phi(&enc.phi, &t)?;
        if let Some(v) = views.as_mut() {
            v.push(t);
        }
        states.push(z);
    }
    Ok(ForwardTrace {
        states,
        views,
        fingerprint: enc.fingerprint(),
    })
}

/// Gradients of a scalar loss with respect to `θ` and, optionally, `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub d_phi: Vec<f64>,
    pub d_input: Option<FeatureMatrix>,
}

/// Backpropagation through all `L` applications of the shared GVT, given
/// `∂loss/∂Z^L`. Returns gradients for `θ` and for `X`.
pub fn rgvt_backward(
    enc: &EncoderState,
    g: &Graph,
    trace: &ForwardTrace,
    d_out: &FeatureMatrix,
) -> Result<GradientBundle> {
    backward(enc, g, trace, d_out, true)
}

/// As [`rgvt_backward`] but skips the final adjoint propagation into `X`.
pub fn rgvt_backward_params(
    enc: &EncoderState,
    g: &Graph,
    trace: &ForwardTrace,
    d_out: &FeatureMatrix,
) -> Result<GradientBundle> {
    backward(enc, g, trace, d_out, false)
}

fn backward(
    enc: &EncoderState,
    g: &Graph,
    trace: &ForwardTrace,
    d_out: &FeatureMatrix,
    want_input: bool,
) -> Result<GradientBundle> {
    if trace.fingerprint != enc.fingerprint() {
        return Err(Error::InvalidParameter(
            "trace was produced by a different encoder".into(),
        ));
    }
    let out = trace.output();
    if (d_out.num_nodes(), d_out.num_features()) != (out.num_nodes(), out.num_features()) {
        return Err(Error::Shape(format!(
            "upstream gradient is {}x{}, output is {}x{}",
            d_out.num_nodes(),
            d_out.num_features(),
            out.num_nodes(),
            out.num_features()
        )));
    }
    if out.num_nodes() != g.num_nodes() {
        return Err(Error::Shape("trace and graph disagree on N".into()));
    }
    let phi = &enc.phi;
    let c = phi.dim();
    let np = phi.params().len();
    let mut d_phi = vec![0.0; np];
    let mut d_z = d_out.clone();
    let depth = trace.depth();
    for layer in (1..=depth).rev() {
        let recomputed;
        let t = match &trace.views {
            Some(v) => &v[layer - 1],
            None => {
                recomputed = stack_views(&enc.finders, g, &trace.states[layer - 1])?;
                &recomputed
            }
        };
        let cells = t.num_nodes() * t.num_features();
        let mut d_t = vec![0.0; cells * c];
        let upstream = d_z.values();
        let partials: Vec<Vec<f64>> = d_t
            .par_chunks_mut(CELL_CHUNK * c)
            .enumerate()
            .map(|(chunk, dst)| {
                let mut ws = phi.workspace();
                let mut local = vec![0.0; np];
                let base = chunk * CELL_CHUNK;
                for (i, dv) in dst.chunks_exact_mut(c).enumerate() {
                    let cell = base + i;
                    let up = upstream[cell];
                    if up == 0.0 {
                        continue;
                    }
                    let v = &t.values()[cell * c..(cell + 1) * c];
                    phi.eval_with(v, &mut ws);
                    phi.backward_with(v, up, &mut ws, &mut local, dv);
                }
                local
            })
            .collect();
        for local in partials {
            d_phi.iter_mut().zip(&local).for_each(|(a, b)| *a += b);
        }
        if layer > 1 || want_input {
            let d_t = ViewTensor::from_raw(t.num_nodes(), t.num_features(), c, d_t);
            d_z = stack_views_transpose(&enc.finders, g, &d_t)?;
        }
    }
    Ok(GradientBundle {
        d_phi,
        d_input: want_input.then_some(d_z),
    })
}
