use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::FeatureMatrix;
use crate::kernel::{gelu, gelu_derivative};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    Linear,
    Mlp,
}

impl std::str::FromStr for PredictorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(PredictorKind::Linear),
            "mlp" => Ok(PredictorKind::Mlp),
            other => Err(Error::InvalidParameter(format!(
                "unknown predictor `{other}` (expected linear or mlp)"
            ))),
        }
    }
}

/// A per-dataset classifier `f_k`: either `F -> classes` affine, or
/// `F -> H` with GELU followed by `H -> classes`.
///
/// Flat layout: `W1 (in x out1)`, `b1`, then for the MLP `W2 (H x classes)`, `b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorParams {
    kind: PredictorKind,
    in_dim: usize,
    hidden: usize,
    classes: usize,
    params: Vec<f64>,
}

/// Intermediate values kept between forward and backward.
#[derive(Debug, Clone)]
pub struct PredictorCache {
    pre: Vec<f64>,
}

impl PredictorParams {
    pub fn num_params(kind: PredictorKind, in_dim: usize, hidden: usize, classes: usize) -> usize {
        match kind {
            PredictorKind::Linear => in_dim * classes + classes,
            PredictorKind::Mlp => in_dim * hidden + hidden + hidden * classes + classes,
        }
    }

    pub fn new(
        kind: PredictorKind,
        in_dim: usize,
        hidden: usize,
        classes: usize,
        params: Vec<f64>,
    ) -> Result<Self> {
        if in_dim == 0 || classes == 0 || (kind == PredictorKind::Mlp && hidden == 0) {
            return Err(Error::InvalidParameter(format!(
                "predictor dims must be positive (in {in_dim}, hidden {hidden}, classes {classes})"
            )));
        }
        let hidden = if kind == PredictorKind::Linear { 0 } else { hidden };
        let expected = Self::num_params(kind, in_dim, hidden, classes);
        if params.len() != expected {
            return Err(Error::Shape(format!(
                "predictor expects {expected} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("predictor parameters".into()));
        }
        Ok(Self {
            kind,
            in_dim,
            hidden,
            classes,
            params,
        })
    }

    /// Glorot-uniform weights and zero biases.
    pub fn glorot<R: Rng + ?Sized>(
        kind: PredictorKind,
        in_dim: usize,
        hidden: usize,
        classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let hidden = if kind == PredictorKind::Linear { 0 } else { hidden };
        let mut p = Self::new(
            kind,
            in_dim,
            hidden,
            classes,
            vec![0.0; Self::num_params(kind, in_dim, hidden, classes)],
        )?;
        let layers: Vec<(usize, usize)> = match kind {
            PredictorKind::Linear => vec![(in_dim, classes)],
            PredictorKind::Mlp => vec![(in_dim, hidden), (hidden, classes)],
        };
        let mut offset = 0;
        for (fan_in, fan_out) in layers {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut p.params[offset..offset + fan_in * fan_out] {
                *w = rng.gen_range(-bound..bound);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(p)
    }

    pub fn kind(&self) -> PredictorKind {
        self.kind
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn first_width(&self) -> usize {
        match self.kind {
            PredictorKind::Linear => self.classes,
            PredictorKind::Mlp => self.hidden,
        }
    }

    fn check_input(&self, z: &FeatureMatrix, rows: &[usize]) -> Result<()> {
        if z.num_features() != self.in_dim {
            return Err(Error::Shape(format!(
                "predictor takes {} features, representation has {}",
                self.in_dim,
                z.num_features()
            )));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= z.num_nodes()) {
            return Err(Error::IndexOutOfRange {
                what: "node",
                index: bad as u64,
                bound: z.num_nodes() as u64,
            });
        }
        Ok(())
    }

    /// Logits for the selected rows, `rows.len() x classes` row-major.
    pub fn forward(&self, z: &FeatureMatrix, rows: &[usize]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(z, rows)?.0)
    }

    pub fn forward_cached(&self, z: &FeatureMatrix, rows: &[usize]) -> Result<(Vec<f64>, PredictorCache)> {
        self.check_input(z, rows)?;
        let (f, w1) = (self.in_dim, self.first_width());
        let (weights, rest) = self.params.split_at(f * w1);
        let bias = &rest[..w1];
        let mut pre = vec![0.0; rows.len() * w1];
        for (i, &r) in rows.iter().enumerate() {
            let out = &mut pre[i * w1..(i + 1) * w1];
            out.copy_from_slice(bias);
            for (x, wrow) in z.row(r).iter().zip(weights.chunks_exact(w1)) {
                if *x != 0.0 {
                    for (o, w) in out.iter_mut().zip(wrow) {
                        *o += x * w;
                    }
                }
            }
        }
        let logits = match self.kind {
            PredictorKind::Linear => pre.clone(),
            PredictorKind::Mlp => {
                let k = self.classes;
                let second = &rest[w1..];
                let (w2, b2) = second.split_at(w1 * k);
                let mut logits = vec![0.0; rows.len() * k];
                for (h, out) in pre.chunks_exact(w1).zip(logits.chunks_exact_mut(k)) {
                    out.copy_from_slice(b2);
                    for (hv, wrow) in h.iter().zip(w2.chunks_exact(k)) {
                        let a = gelu(*hv);
                        for (o, w) in out.iter_mut().zip(wrow) {
                            *o += a * w;
                        }
                    }
                }
                logits
            }
        };
        Ok((logits, PredictorCache { pre }))
    }

    /// Parameter gradient given `∂loss/∂logits`. When `d_input` is given it
    /// receives `∂loss/∂z` for the selected rows (accumulated, `N x F`).
    pub fn backward(
        &self,
        z: &FeatureMatrix,
        rows: &[usize],
        cache: &PredictorCache,
        d_logits: &[f64],
        mut d_input: Option<&mut FeatureMatrix>,
    ) -> Result<Vec<f64>> {
        self.check_input(z, rows)?;
        let (f, w1, k) = (self.in_dim, self.first_width(), self.classes);
        if d_logits.len() != rows.len() * k || cache.pre.len() != rows.len() * w1 {
            return Err(Error::Shape("predictor backward buffers".into()));
        }
        let mut grad = vec![0.0; self.params.len()];
        // gradient w.r.t. the first layer's pre-activations
        let d_pre: Vec<f64> = match self.kind {
            PredictorKind::Linear => d_logits.to_vec(),
            PredictorKind::Mlp => {
                let base = f * w1 + w1;
                let w2 = &self.params[base..base + w1 * k];
                let mut d_pre = vec![0.0; rows.len() * w1];
                let (gw2, gb2) = grad[base..].split_at_mut(w1 * k);
                for i in 0..rows.len() {
                    let h = &cache.pre[i * w1..(i + 1) * w1];
                    let dl = &d_logits[i * k..(i + 1) * k];
                    for (b, d) in gb2.iter_mut().zip(dl) {
                        *b += d;
                    }
                    for j in 0..w1 {
                        let a = gelu(h[j]);
                        let wrow = &w2[j * k..(j + 1) * k];
                        let grow = &mut gw2[j * k..(j + 1) * k];
                        let mut acc = 0.0;
                        for c in 0..k {
                            grow[c] += a * dl[c];
                            acc += wrow[c] * dl[c];
                        }
                        d_pre[i * w1 + j] = acc * gelu_derivative(h[j]);
                    }
                }
                d_pre
            }
        };
        let weights = &self.params[..f * w1];
        let (gw1, rest) = grad.split_at_mut(f * w1);
        let gb1 = &mut rest[..w1];
        for (i, &r) in rows.iter().enumerate() {
            let dp = &d_pre[i * w1..(i + 1) * w1];
            for (b, d) in gb1.iter_mut().zip(dp) {
                *b += d;
            }
            for (x, grow) in z.row(r).iter().zip(gw1.chunks_exact_mut(w1)) {
                if *x != 0.0 {
                    for (g, d) in grow.iter_mut().zip(dp) {
                        *g += x * d;
                    }
                }
            }
            if let Some(dz) = d_input.as_deref_mut() {
                let row = &mut dz.values_mut()[r * f..(r + 1) * f];
                for (o, wrow) in row.iter_mut().zip(weights.chunks_exact(w1)) {
                    *o += wrow.iter().zip(dp).map(|(w, d)| w * d).sum::<f64>();
                }
            }
        }
        Ok(grad)
    }
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::cross_entropy;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> FeatureMatrix {
        FeatureMatrix::from_rows(&[[0.5, -1.0, 2.0], [0.0, 0.3, -0.7], [1.2, 0.0, 0.1]])
    }

    #[test]
    fn linear_forward_by_hand() {
        // W = [[1,0],[0,1],[1,1]], b = [0.5, -0.5]
        let p = PredictorParams::new(
            PredictorKind::Linear,
            3,
            0,
            2,
            vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.5, -0.5],
        )
        .unwrap();
        let logits = p.forward(&toy(), &[0, 2]).unwrap();
        assert_eq!(logits, vec![3.0, 0.5, 1.8, -0.4]);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in [PredictorKind::Linear, PredictorKind::Mlp] {
            let p = PredictorParams::glorot(kind, 3, 4, 2, &mut rng).unwrap();
            let z = toy();
            let rows = [0, 1, 2];
            let labels = [1, 0, 1];
            let loss = |p: &PredictorParams, z: &FeatureMatrix| {
                cross_entropy(&p.forward(z, &rows).unwrap(), 2, &labels)
                    .unwrap()
                    .0
            };
            let (logits, cache) = p.forward_cached(&z, &rows).unwrap();
            let (_, dl) = cross_entropy(&logits, 2, &labels).unwrap();
            let mut dz = FeatureMatrix::zeros(3, 3);
            let g = p.backward(&z, &rows, &cache, &dl, Some(&mut dz)).unwrap();
            let h = 1e-6;
            for (i, &gi) in g.iter().enumerate() {
                let (mut a, mut b) = (p.clone(), p.clone());
                a.params_mut()[i] += h;
                b.params_mut()[i] -= h;
                let fd = (loss(&a, &z) - loss(&b, &z)) / (2.0 * h);
                assert_abs_diff_eq!(gi, fd, epsilon = 1e-7);
            }
            for i in 0..9 {
                let (mut a, mut b) = (z.clone(), z.clone());
                a.values_mut()[i] += h;
                b.values_mut()[i] -= h;
                let fd = (loss(&p, &a) - loss(&p, &b)) / (2.0 * h);
                assert_abs_diff_eq!(dz.values()[i], fd, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn input_width_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = PredictorParams::glorot(PredictorKind::Linear, 2, 0, 2, &mut rng).unwrap();
        assert!(p.forward(&toy(), &[0]).is_err());
    }

    #[test]
    fn parse_kind() {
        assert_eq!("mlp".parse::<PredictorKind>().unwrap(), PredictorKind::Mlp);
        assert!("gcn".parse::<PredictorKind>().is_err());
    }
}
