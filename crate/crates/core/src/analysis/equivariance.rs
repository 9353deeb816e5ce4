use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph, PermutationSpec};
use crate::kernel::{gvt_forward, rgvt_forward, Activation, EncoderState, Phi, PhiKind};
use crate::synthetic::{random_features, random_graph};
use crate::viewfinder::default_finder_set;

/// Worst-case deviations from permutation equivariance over all trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceReport {
    pub trials: usize,
    /// `max |Ψ(PX, PAPᵀ) − PΨ(X, A)|`
    pub node_deviation: f64,
    /// `max |Ψ(XQ, A) − Ψ(X, A)Q|`
    pub feature_deviation: f64,
    /// `max |Ψ(PXQ, PAPᵀ) − PΨ(X, A)Q|`
    pub joint_deviation: f64,
}

impl EquivarianceReport {
    fn empty() -> Self {
        Self {
            trials: 0,
            node_deviation: 0.0,
            feature_deviation: 0.0,
            joint_deviation: 0.0,
        }
    }

    fn merge(self, other: Self) -> Self {
        Self {
            trials: self.trials + other.trials,
            node_deviation: self.node_deviation.max(other.node_deviation),
            feature_deviation: self.feature_deviation.max(other.feature_deviation),
            joint_deviation: self.joint_deviation.max(other.joint_deviation),
        }
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn one_trial<M>(
    map: &M,
    g: &Graph,
    x: &FeatureMatrix,
    base: &FeatureMatrix,
    perm: &PermutationSpec,
) -> Result<EquivarianceReport>
where
    M: Fn(&Graph, &FeatureMatrix) -> Result<FeatureMatrix>,
{
    let mut report = EquivarianceReport::empty();
    report.trials = 1;
    for (which, p) in [
        (0, perm.nodes_only()),
        (1, perm.features_only()),
        (2, perm.clone()),
    ] {
        let z = map(&p.permute_graph(g)?, &p.permute_matrix(x)?)?;
        let dev = z.max_abs_diff(&p.permute_matrix(base)?);
        match which {
            0 => report.node_deviation = dev,
            1 => report.feature_deviation = dev,
            _ => report.joint_deviation = dev,
        }
    }
    Ok(report)
}

/// Audits any map `(A, X) -> Z` with `trials` random permutation pairs.
pub fn equivariance_audit_with<M>(
    map: M,
    g: &Graph,
    x: &FeatureMatrix,
    trials: usize,
    seed: u64,
) -> Result<EquivarianceReport>
where
    M: Fn(&Graph, &FeatureMatrix) -> Result<FeatureMatrix> + Sync,
{
    if trials == 0 {
        return Err(Error::InvalidParameter(
            "equivariance audit needs at least one trial".into(),
        ));
    }
    let base = map(g, x)?;
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let perm = PermutationSpec::random(x.num_nodes(), x.num_features(), &mut rng);
            one_trial(&map, g, x, &base, &perm)
        })
        .try_reduce(EquivarianceReport::empty, |a, b| Ok(a.merge(b)))
}

/// Audits one GVT application of `enc`.
pub fn equivariance_audit(
    enc: &EncoderState,
    g: &Graph,
    x: &FeatureMatrix,
    trials: usize,
    seed: u64,
) -> Result<EquivarianceReport> {
    equivariance_audit_with(|g, x| gvt_forward(enc, g, x), g, x, trials, seed)
}

/// A deliberately broken map for negative controls: the GVT output with
/// feature column 0 added to every column. It still commutes with node
/// permutations but not with feature permutations.
pub fn pinned_feature_forward(enc: &EncoderState, g: &Graph, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    let mut z = gvt_forward(enc, g, x)?;
    let f = z.num_features();
    for row in z.values_mut().chunks_exact_mut(f) {
        let pinned = row[0];
        for v in row.iter_mut().skip(1) {
            *v += pinned;
        }
    }
    Ok(z)
}

/// Bounds for the randomized suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteBounds {
    pub max_nodes: usize,
    pub max_features: usize,
    /// Hop counts go up to this, so `C ≤ 2 * max_hops + 1`.
    pub max_hops: u32,
    pub max_phi_depth: usize,
    pub max_depth: usize,
}

impl Default for SuiteBounds {
    fn default() -> Self {
        Self {
            max_nodes: 50,
            max_features: 16,
            max_hops: 3,
            max_phi_depth: 3,
            max_depth: 1,
        }
    }
}

/// A random encoder with `φ` drawn from Glorot init and small random biases.
pub fn random_encoder<R: Rng + ?Sized>(
    rng: &mut R,
    hops: u32,
    phi_depth: usize,
    depth: usize,
) -> Result<EncoderState> {
    let finders = default_finder_set(hops)?;
    let kind = if phi_depth == 1 {
        PhiKind::Linear
    } else {
        PhiKind::Mlp {
            depth: phi_depth,
            activation: Activation::Gelu,
        }
    };
    let mut phi = Phi::glorot(kind, finders.len(), rng)?;
    for p in phi.params_mut().iter_mut().filter(|p| **p == 0.0) {
        *p = rng.gen_range(-0.5..0.5);
    }
    EncoderState::new(finders, phi, depth)
}

/// Random graphs, features, encoders and permutations, one of each per trial.
/// With `max_depth > 1` the audited map is the recurrent encoder at a random
/// depth.
pub fn equivariance_suite(trials: usize, bounds: &SuiteBounds, seed: u64) -> Result<EquivarianceReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter(
            "equivariance suite needs at least one trial".into(),
        ));
    }
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let n = rng.gen_range(2..=bounds.max_nodes.max(2));
            let f = rng.gen_range(1..=bounds.max_features.max(1));
            let max_edges = n * (n - 1) / 2;
            let m = rng.gen_range(0..=max_edges.min(3 * n));
            let g = random_graph(n, m, &mut rng)?;
            let x = random_features(n, f, &mut rng);
            let hops = rng.gen_range(1..=bounds.max_hops.max(1));
            let phi_depth = rng.gen_range(1..=bounds.max_phi_depth.max(1));
            let depth = rng.gen_range(1..=bounds.max_depth.max(1));
            let enc = random_encoder(&mut rng, hops, phi_depth, depth)?;
            let perm = PermutationSpec::random(n, f, &mut rng);
            let map = |g: &Graph, x: &FeatureMatrix| -> Result<FeatureMatrix> {
                Ok(rgvt_forward(&enc, g, x, depth)?.states.pop().unwrap())
            };
            let base = map(&g, &x)?;
            one_trial(&map, &g, &x, &base, &perm)
        })
        .try_reduce(EquivarianceReport::empty, |a, b| Ok(a.merge(b)))
}
