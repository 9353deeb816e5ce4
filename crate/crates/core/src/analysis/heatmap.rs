use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph};
use crate::kernel::{rgvt_forward, EncoderState};
use crate::viewfinder::stack_views;

/// Sampling settings for [`heatmap`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapConfig {
    pub depth: usize,
    pub num_nodes: usize,
    pub num_features: usize,
    pub seed: u64,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        Self {
            depth: 1,
            num_nodes: 64,
            num_features: 64,
            seed: 0,
        }
    }
}

/// Gradient of `φ` with respect to one view, over sampled node-feature pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub view: usize,
    pub view_label: String,
    pub depth: usize,
    pub nodes: Vec<usize>,
    pub features: Vec<usize>,
    /// `nodes.len() x features.len()`, row-major.
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.features.len() + j]
    }

    /// One header row of feature indices, then one row per sampled node.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node");
        for f in &self.features {
            write!(out, ",f{f}").unwrap();
        }
        out.push('\n');
        for (i, n) in self.nodes.iter().enumerate() {
            write!(out, "{n}").unwrap();
            for j in 0..self.features.len() {
                write!(out, ",{}", self.get(i, j)).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn sample_sorted(rng: &mut ChaCha8Rng, total: usize, count: usize, what: &str) -> Result<Vec<usize>> {
    if count == 0 || count > total {
        return Err(Error::InvalidParameter(format!(
            "cannot sample {count} {what} out of {total}"
        )));
    }
    let mut idx = rand::seq::index::sample(rng, total, count).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Samples nodes and features uniformly without replacement and returns one
/// heatmap per view.
pub fn heatmap(
    enc: &EncoderState,
    g: &Graph,
    x: &FeatureMatrix,
    cfg: &HeatmapConfig,
) -> Result<Vec<Heatmap>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let nodes = sample_sorted(&mut rng, x.num_nodes(), cfg.num_nodes, "nodes")?;
    let features = sample_sorted(&mut rng, x.num_features(), cfg.num_features, "features")?;
    heatmap_at(enc, g, x, cfg.depth, &nodes, &features)
}

/// As [`heatmap`] with explicit node and feature indices.
pub fn heatmap_at(
    enc: &EncoderState,
    g: &Graph,
    x: &FeatureMatrix,
    depth: usize,
    nodes: &[usize],
    features: &[usize],
) -> Result<Vec<Heatmap>> {
    if depth == 0 || depth > enc.pretrain_depth {
        return Err(Error::InvalidParameter(format!(
            "heatmap depth {depth} outside 1..={}",
            enc.pretrain_depth
        )));
    }
    for (list, bound, what) in [
        (nodes, x.num_nodes(), "node"),
        (features, x.num_features(), "feature"),
    ] {
        if let Some(&bad) = list.iter().find(|&&i| i >= bound) {
            return Err(Error::IndexOutOfRange {
                what,
                index: bad as u64,
                bound: bound as u64,
            });
        }
    }
    let input = if depth == 1 {
        x.clone()
    } else {
        rgvt_forward(enc, g, x, depth - 1)?.states.pop().unwrap()
    };
    let t = stack_views(&enc.finders, g, &input)?;
    let c = enc.finders.len();
    let mut ws = enc.phi.workspace();
    let mut grad = vec![0.0; c];
    let mut d_params = vec![0.0; enc.phi.params().len()];
    let mut values = vec![vec![0.0; nodes.len() * features.len()]; c];
    for (i, &n) in nodes.iter().enumerate() {
        for (j, &f) in features.iter().enumerate() {
            let v = t.view_vector(n, f);
            enc.phi.eval_with(v, &mut ws);
            enc.phi.backward_with(v, 1.0, &mut ws, &mut d_params, &mut grad);
            for (view, gv) in grad.iter().enumerate() {
                values[view][i * features.len() + j] = *gv;
            }
        }
    }
    if values.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("heatmap gradients".into()));
    }
    Ok(values
        .into_iter()
        .enumerate()
        .map(|(view, values)| Heatmap {
            view,
            view_label: enc.finders.specs()[view].label(),
            depth,
            nodes: nodes.to_vec(),
            features: features.to_vec(),
            values,
        })
        .collect())
}
