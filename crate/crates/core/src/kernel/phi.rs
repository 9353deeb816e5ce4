use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Exact GELU, `x Φ(x)`.
#[inline]
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2))
}

/// `d/dx [x Φ(x)] = Φ(x) + x φ(x)`.
#[inline]
pub fn gelu_derivative(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2)) + x * FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Gelu,
    /// Ablation: removes the nonlinearity.
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => gelu(x),
            Activation::Identity => x,
        }
    }

    #[inline]
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => gelu_derivative(x),
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PhiKind {
    /// `gᵀv + b`
    Linear,
    /// `depth` layers of width `C`; all but the last use `activation`, and the
    /// last maps `C -> 1`.
    Mlp { depth: usize, activation: Activation },
}

/// The dimension-collapsing map `φ: R^C -> R` and its flat parameter vector.
///
/// Layout, per layer in order: weights `in x out` row-major, then biases.
/// A linear map `[g_0 .. g_{C-1}, b]` has the same layout as a depth-1 MLP.
#[derive(Debug, Clone, PartialEq)]
pub struct Phi {
    kind: PhiKind,
    dim: usize,
    params: Vec<f64>,
}

/// Scratch space for evaluating one view vector at a time.
#[derive(Debug, Clone)]
pub struct PhiWorkspace {
    pre: Vec<f64>,
    post: Vec<f64>,
    delta: Vec<f64>,
    delta_next: Vec<f64>,
}

impl Phi {
    pub fn num_params(kind: PhiKind, dim: usize) -> usize {
        match kind {
            PhiKind::Linear => dim + 1,
            PhiKind::Mlp { depth, .. } => (depth - 1) * (dim * dim + dim) + dim + 1,
        }
    }

    pub fn new(kind: PhiKind, dim: usize, params: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("φ input dimension must be ≥ 1".into()));
        }
        if let PhiKind::Mlp { depth, .. } = kind {
            if depth == 0 {
                return Err(Error::InvalidParameter("MLP depth must be ≥ 1".into()));
            }
        }
        let expected = Self::num_params(kind, dim);
        if params.len() != expected {
            return Err(Error::Shape(format!(
                "φ expects {expected} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("φ parameters".into()));
        }
        Ok(Self { kind, dim, params })
    }

    pub fn linear(weights: &[f64], bias: f64) -> Result<Self> {
        let mut params = weights.to_vec();
        params.push(bias);
        Self::new(PhiKind::Linear, weights.len(), params)
    }

    pub fn zeros(kind: PhiKind, dim: usize) -> Result<Self> {
        Self::new(kind, dim, vec![0.0; Self::num_params(kind, dim.max(1))])
    }

    /// Glorot-uniform weights, `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot<R: Rng + ?Sized>(kind: PhiKind, dim: usize, rng: &mut R) -> Result<Self> {
        let mut phi = Self::zeros(kind, dim)?;
        let depth = phi.depth();
        let mut offset = 0;
        for layer in 0..depth {
            let out = if layer + 1 == depth { 1 } else { dim };
            let bound = (6.0 / (dim + out) as f64).sqrt();
            for w in &mut phi.params[offset..offset + dim * out] {
                *w = rng.gen_range(-bound..bound);
            }
            offset += dim * out + out;
        }
        Ok(phi)
    }

    pub fn kind(&self) -> PhiKind {
        self.kind
    }

    /// Input dimension `C`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of affine layers (1 for linear).
    pub fn depth(&self) -> usize {
        match self.kind {
            PhiKind::Linear => 1,
            PhiKind::Mlp { depth, .. } => depth,
        }
    }

    fn activation(&self) -> Activation {
        match self.kind {
            PhiKind::Linear => Activation::Identity,
            PhiKind::Mlp { activation, .. } => activation,
        }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Same map with the activation swapped; parameters untouched.
    pub fn with_activation(&self, activation: Activation) -> Self {
        let kind = match self.kind {
            PhiKind::Linear => PhiKind::Linear,
            PhiKind::Mlp { depth, .. } => PhiKind::Mlp { depth, activation },
        };
        Self { kind, ..self.clone() }
    }

    pub fn workspace(&self) -> PhiWorkspace {
        let hidden = (self.depth() - 1) * self.dim;
        PhiWorkspace {
            pre: vec![0.0; hidden],
            post: vec![0.0; hidden],
            delta: vec![0.0; self.dim],
            delta_next: vec![0.0; self.dim],
        }
    }

    /// Evaluates `φ(v)`; `v` must have length `C`.
    #[inline]
    pub fn eval_with(&self, v: &[f64], ws: &mut PhiWorkspace) -> f64 {
        let c = self.dim;
        let depth = self.depth();
        let act = self.activation();
        let mut offset = 0;
        for layer in 0..depth - 1 {
            let w = &self.params[offset..offset + c * c];
            let b = &self.params[offset + c * c..offset + c * c + c];
            let (done, rest) = ws.post.split_at_mut(layer * c);
            let input: &[f64] = if layer == 0 { v } else { &done[(layer - 1) * c..] };
            let pre = &mut ws.pre[layer * c..(layer + 1) * c];
            pre.copy_from_slice(b);
            for (j, &xj) in input.iter().enumerate() {
                let row = &w[j * c..(j + 1) * c];
                for (p, wv) in pre.iter_mut().zip(row) {
                    *p += xj * wv;
                }
            }
            for (o, p) in rest[..c].iter_mut().zip(pre.iter()) {
                *o = act.apply(*p);
            }
            offset += c * c + c;
        }
        let input: &[f64] = if depth == 1 {
            v
        } else {
            &ws.post[(depth - 2) * c..(depth - 1) * c]
        };
        let w = &self.params[offset..offset + c];
        let b = self.params[offset + c];
        input.iter().zip(w).fold(b, |acc, (x, wv)| acc + x * wv)
    }

    /// Backpropagates `upstream = ∂loss/∂φ(v)` through one evaluation.
    /// Adds parameter gradients into `d_params` and writes `∂loss/∂v` into
    /// `d_v`. Must follow `eval_with(v, ws)` on the same workspace.
    #[inline]
    pub fn backward_with(
        &self,
        v: &[f64],
        upstream: f64,
        ws: &mut PhiWorkspace,
        d_params: &mut [f64],
        d_v: &mut [f64],
    ) {
        let c = self.dim;
        let depth = self.depth();
        let act = self.activation();
        let mut offset = (depth - 1) * (c * c + c);
        {
            let input: &[f64] = if depth == 1 {
                v
            } else {
                &ws.post[(depth - 2) * c..(depth - 1) * c]
            };
            let w = &self.params[offset..offset + c];
            for j in 0..c {
                d_params[offset + j] += upstream * input[j];
                ws.delta[j] = upstream * w[j];
            }
            d_params[offset + c] += upstream;
        }
        for layer in (0..depth - 1).rev() {
            offset -= c * c + c;
            let pre = &ws.pre[layer * c..(layer + 1) * c];
            for (d, p) in ws.delta.iter_mut().zip(pre) {
                *d *= act.derivative(*p);
            }
            let input: &[f64] = if layer == 0 {
                v
            } else {
                &ws.post[(layer - 1) * c..layer * c]
            };
            let w = &self.params[offset..offset + c * c];
            for j in 0..c {
                let row = &w[j * c..(j + 1) * c];
                let drow = &mut d_params[offset + j * c..offset + (j + 1) * c];
                let mut acc = 0.0;
                for o in 0..c {
                    drow[o] += input[j] * ws.delta[o];
                    acc += row[o] * ws.delta[o];
                }
                ws.delta_next[j] = acc;
            }
            for o in 0..c {
                d_params[offset + c * c + o] += ws.delta[o];
            }
            std::mem::swap(&mut ws.delta, &mut ws.delta_next);
        }
        d_v.copy_from_slice(&ws.delta);
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Shape(format!(
                "view vector has length {}, φ expects {}",
                v.len(),
                self.dim
            )));
        }
        Ok(())
    }
}

/// `φ(v)`.
pub fn phi_eval(phi: &Phi, v: &[f64]) -> Result<f64> {
    phi.check_dim(v)?;
    Ok(phi.eval_with(v, &mut phi.workspace()))
}

/// `∇_v φ(v)`, the local aggregation weights of the linearization at `v`.
pub fn local_gradient(phi: &Phi, v: &[f64]) -> Result<Vec<f64>> {
    phi.check_dim(v)?;
    let mut ws = phi.workspace();
    phi.eval_with(v, &mut ws);
    let mut scratch = vec![0.0; phi.params.len()];
    let mut grad = vec![0.0; phi.dim];
    phi.backward_with(v, 1.0, &mut ws, &mut scratch, &mut grad);
    Ok(grad)
}

/// Gradient of `φ(v)` with respect to the parameters.
pub fn param_gradient(phi: &Phi, v: &[f64]) -> Result<Vec<f64>> {
    phi.check_dim(v)?;
    let mut ws = phi.workspace();
    phi.eval_with(v, &mut ws);
    let mut grad = vec![0.0; phi.params.len()];
    let mut dv = vec![0.0; phi.dim];
    phi.backward_with(v, 1.0, &mut ws, &mut grad, &mut dv);
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn mlp(depth: usize) -> PhiKind {
        PhiKind::Mlp {
            depth,
            activation: Activation::Gelu,
        }
    }

    #[test]
    fn linear_selects_coordinate() {
        let phi = Phi::linear(&[0.0, 1.0, 0.0], 0.0).unwrap();
        assert_eq!(phi_eval(&phi, &[7.0, 1.5, 9.0]).unwrap(), 1.5);
    }

    #[test]
    fn zero_mlp_is_zero() {
        let phi = Phi::zeros(mlp(3), 4).unwrap();
        assert_eq!(phi_eval(&phi, &[1.0, -2.0, 3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(
            local_gradient(&phi, &[1.0, -2.0, 3.0, 4.0]).unwrap(),
            vec![0.0; 4]
        );
    }

    #[test]
    fn gelu_reference_value() {
        // independent erf from statrs
        let oracle = 0.5 * (1.0 + statrs::function::erf::erf(1.0 / 2f64.sqrt()));
        assert_abs_diff_eq!(gelu(1.0), oracle, epsilon = 1e-10);
        assert_abs_diff_eq!(gelu(1.0), 0.841345, epsilon = 1e-5);
        assert_eq!(gelu(0.0), 0.0);
    }

    #[test]
    fn gelu_derivative_matches_difference() {
        for &x in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert_abs_diff_eq!(gelu_derivative(x), fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn linear_gradient_is_weights() {
        let phi = Phi::linear(&[0.3, -1.0, 2.0], 0.5).unwrap();
        for v in [[0.0, 0.0, 0.0], [1.0, -4.0, 9.0]] {
            assert_eq!(local_gradient(&phi, &v).unwrap(), vec![0.3, -1.0, 2.0]);
        }
    }

    #[test]
    fn depth_one_identity_mlp_equals_linear() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let kind = PhiKind::Mlp {
            depth: 1,
            activation: Activation::Identity,
        };
        let m = Phi::glorot(kind, 5, &mut rng).unwrap();
        let l = Phi::new(PhiKind::Linear, 5, m.params().to_vec()).unwrap();
        let v = [0.1, -0.2, 3.0, 0.0, 1.7];
        assert_eq!(
            phi_eval(&m, &v).unwrap().to_bits(),
            phi_eval(&l, &v).unwrap().to_bits()
        );
    }

    #[test]
    fn mlp_gradients_match_central_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for depth in 1..=3 {
            let mut phi = Phi::glorot(mlp(depth), 4, &mut rng).unwrap();
            for p in phi.params_mut() {
                *p += rng.gen_range(-0.3..0.3);
            }
            let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let g = local_gradient(&phi, &v).unwrap();
            let h = 1e-5;
            for i in 0..4 {
                let mut a = v.clone();
                let mut b = v.clone();
                a[i] += h;
                b[i] -= h;
                let fd = (phi_eval(&phi, &a).unwrap() - phi_eval(&phi, &b).unwrap()) / (2.0 * h);
                let rel = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1e-8);
                assert!(rel <= 1e-6, "depth {depth} coord {i}: {} vs {fd}", g[i]);
            }
            let pg = param_gradient(&phi, &v).unwrap();
            for (i, &pgi) in pg.iter().enumerate() {
                let mut a = phi.clone();
                let mut b = phi.clone();
                a.params_mut()[i] += h;
                b.params_mut()[i] -= h;
                let fd = (phi_eval(&a, &v).unwrap() - phi_eval(&b, &v).unwrap()) / (2.0 * h);
                assert_abs_diff_eq!(pgi, fd, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let phi = Phi::linear(&[1.0, 2.0], 0.0).unwrap();
        assert!(phi_eval(&phi, &[1.0]).is_err());
        assert!(local_gradient(&phi, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn glorot_bounds_and_zero_bias() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let phi = Phi::glorot(mlp(2), 5, &mut rng).unwrap();
        let hidden_bound = (6.0f64 / 10.0).sqrt();
        assert!(phi.params()[..25].iter().all(|w| w.abs() <= hidden_bound));
        assert!(phi.params()[25..30].iter().all(|&b| b == 0.0));
        assert_eq!(*phi.params().last().unwrap(), 0.0);
        assert_eq!(phi.params().len(), Phi::num_params(mlp(2), 5));
    }
}
