use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::equivariance::random_encoder;
use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph};
use crate::kernel::{rgvt_backward, rgvt_forward, EncoderState};
use crate::synthetic::{random_features, random_graph};

/// Bounds for random gradient-check configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradcheckBounds {
    pub max_hops: u32,
    pub max_phi_depth: usize,
    pub max_depth: usize,
    pub max_nodes: usize,
    pub max_features: usize,
}

impl Default for GradcheckBounds {
    fn default() -> Self {
        Self {
            max_hops: 3,
            max_phi_depth: 3,
            max_depth: 4,
            max_nodes: 8,
            max_features: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckCase {
    pub num_views: usize,
    pub phi_depth: usize,
    pub depth: usize,
    pub num_nodes: usize,
    pub num_features: usize,
    /// `‖analytic − numeric‖ / ‖numeric‖` over `θ`.
    pub param_rel_error: f64,
    /// Same over the input features.
    pub input_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub cases: Vec<GradcheckCase>,
    pub max_rel_error: f64,
}

fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = numeric.iter().map(|b| b * b).sum::<f64>().sqrt();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Compares BPTT gradients of `loss = Σ w ⊙ Z^L` against central
/// differences with step `h`, for `θ` and for `X`.
pub fn gradcheck(
    enc: &EncoderState,
    g: &Graph,
    x: &FeatureMatrix,
    depth: usize,
    weights: &FeatureMatrix,
    h: f64,
) -> Result<(f64, f64)> {
    if weights.num_nodes() != x.num_nodes() || weights.num_features() != x.num_features() {
        return Err(Error::Shape("loss weights must match the feature matrix".into()));
    }
    let loss = |enc: &EncoderState, x: &FeatureMatrix| -> Result<f64> {
        let z = rgvt_forward(enc, g, x, depth)?;
        Ok(z.output()
            .values()
            .iter()
            .zip(weights.values())
            .map(|(a, b)| a * b)
            .sum())
    };
    let trace = rgvt_forward(enc, g, x, depth)?;
    let grads = rgvt_backward(enc, g, &trace, weights)?;

    let mut numeric = Vec::with_capacity(enc.phi.params().len());
    for i in 0..enc.phi.params().len() {
        let (mut a, mut b) = (enc.clone(), enc.clone());
        a.phi.params_mut()[i] += h;
        b.phi.params_mut()[i] -= h;
        numeric.push((loss(&a, x)? - loss(&b, x)?) / (2.0 * h));
    }
    let param_err = rel_error(&grads.d_phi, &numeric);

    let mut numeric_x = Vec::with_capacity(x.values().len());
    for i in 0..x.values().len() {
        let (mut a, mut b) = (x.clone(), x.clone());
        a.values_mut()[i] += h;
        b.values_mut()[i] -= h;
        numeric_x.push((loss(enc, &a)? - loss(enc, &b)?) / (2.0 * h));
    }
    let d_input = grads.d_input.expect("input gradient requested");
    let input_err = rel_error(d_input.values(), &numeric_x);
    Ok((param_err, input_err))
}

/// `cases` random configurations within `bounds`.
pub fn gradcheck_suite(cases: usize, bounds: &GradcheckBounds, seed: u64) -> Result<GradcheckReport> {
    if cases == 0 {
        return Err(Error::InvalidParameter(
            "gradient check needs at least one case".into(),
        ));
    }
    let cases = (0..cases)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let hops = rng.gen_range(1..=bounds.max_hops.max(1));
            let phi_depth = rng.gen_range(1..=bounds.max_phi_depth.max(1));
            let depth = rng.gen_range(1..=bounds.max_depth.max(1));
            let n = rng.gen_range(2..=bounds.max_nodes.max(2));
            let f = rng.gen_range(1..=bounds.max_features.max(1));
            let enc = random_encoder(&mut rng, hops, phi_depth, depth)?;
            let m = rng.gen_range(1..=n * (n - 1) / 2);
            let g = random_graph(n, m, &mut rng)?;
            let x = random_features(n, f, &mut rng);
            let w = random_features(n, f, &mut rng);
            let (param_rel_error, input_rel_error) = gradcheck(&enc, &g, &x, depth, &w, 1e-5)?;
            Ok(GradcheckCase {
                num_views: enc.finders.len(),
                phi_depth,
                depth,
                num_nodes: n,
                num_features: f,
                param_rel_error,
                input_rel_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_rel_error = cases
        .iter()
        .map(|c| c.param_rel_error.max(c.input_rel_error))
        .fold(0.0, f64::max);
    Ok(GradcheckReport { cases, max_rel_error })
}
