use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::equivariance::random_encoder;
use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph};
use crate::kernel::{apply_phi, EncoderState};
use crate::synthetic::{random_features, random_graph};
use crate::viewfinder::stack_views;

/// One synthetic workload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub num_nodes: usize,
    pub num_edges: usize,
    pub num_features: usize,
    pub hops: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    /// What was doubled relative to the base point.
    pub change: String,
    pub point: ScalingPoint,
    pub seconds: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub base: ScalingPoint,
    pub base_seconds: f64,
    pub rows: Vec<ScalingRow>,
}

impl ScalingReport {
    pub fn ratio(&self, change: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.change == change).map(|r| r.ratio)
    }
}

/// Wall time of `stack_views` followed by `φ`, minimum over `repeats`.
pub fn time_forward(enc: &EncoderState, g: &Graph, x: &FeatureMatrix, repeats: usize) -> Result<f64> {
    let mut best = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let t = stack_views(&enc.finders, g, x)?;
        let z = apply_phi(&enc.phi, &t)?;
        std::hint::black_box(&z);
        best = best.min(start.elapsed().as_secs_f64());
    }
    Ok(best)
}

fn workload(p: &ScalingPoint, phi_depth: usize, seed: u64) -> Result<(EncoderState, Graph, FeatureMatrix)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let enc = random_encoder(&mut rng, p.hops, phi_depth, 1)?;
    let g = random_graph(p.num_nodes, p.num_edges, &mut rng)?;
    let x = random_features(p.num_nodes, p.num_features, &mut rng);
    Ok((enc, g, x))
}

/// Times the base point and four doublings: edges (fixed `N`), nodes (fixed
/// average degree), features, and views (`K -> 2K` gives `C -> 4K + 1`).
///
/// All workloads are built first and then timed in `repeats` interleaved
/// rounds; each keeps its fastest round, so slow drift in machine load hits
/// the base and the variants alike.
pub fn scaling_probe(
    base: ScalingPoint,
    phi_depth: usize,
    repeats: usize,
    seed: u64,
) -> Result<ScalingReport> {
    if base.num_nodes < 2 || base.num_features == 0 || base.hops == 0 {
        return Err(Error::InvalidParameter(format!(
            "degenerate scaling point {base:?}"
        )));
    }
    let points = [
        ("base", base),
        (
            "edges",
            ScalingPoint {
                num_edges: base.num_edges * 2,
                ..base
            },
        ),
        (
            "nodes",
            ScalingPoint {
                num_nodes: base.num_nodes * 2,
                num_edges: base.num_edges * 2,
                ..base
            },
        ),
        (
            "features",
            ScalingPoint {
                num_features: base.num_features * 2,
                ..base
            },
        ),
        (
            "views",
            ScalingPoint {
                hops: base.hops * 2,
                ..base
            },
        ),
    ];
    let workloads = points
        .iter()
        .map(|(_, p)| workload(p, phi_depth, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut best = vec![f64::INFINITY; workloads.len()];
    for _ in 0..repeats.max(1) {
        for (b, (enc, g, x)) in best.iter_mut().zip(&workloads) {
            *b = b.min(time_forward(enc, g, x, 1)?);
        }
    }
    let base_seconds = best[0];
    let rows = points
        .iter()
        .zip(&best)
        .skip(1)
        .map(|((change, point), &seconds)| ScalingRow {
            change: change.to_string(),
            point: *point,
            seconds,
            ratio: seconds / base_seconds,
        })
        .collect();
    Ok(ScalingReport {
        base,
        base_seconds,
        rows,
    })
}
