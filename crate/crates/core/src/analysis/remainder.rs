use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Phi;

/// A scalar map on `R^C` with a gradient.
pub trait SmoothMap {
    fn dim(&self) -> usize;
    fn value(&self, v: &[f64]) -> f64;
    fn gradient(&self, v: &[f64]) -> Vec<f64>;
}

impl SmoothMap for Phi {
    fn dim(&self) -> usize {
        Phi::dim(self)
    }

    fn value(&self, v: &[f64]) -> f64 {
        self.eval_with(v, &mut self.workspace())
    }

    fn gradient(&self, v: &[f64]) -> Vec<f64> {
        crate::kernel::local_gradient(self, v).expect("dimension checked by caller")
    }
}

/// `φ(v) = vᵀv`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SquaredNorm(pub usize);

impl SmoothMap for SquaredNorm {
    fn dim(&self) -> usize {
        self.0
    }

    fn value(&self, v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum()
    }

    fn gradient(&self, v: &[f64]) -> Vec<f64> {
        v.iter().map(|x| 2.0 * x).collect()
    }
}

/// Linearization of a map around one point along one unit direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizationSample {
    pub point: Vec<f64>,
    pub direction: Vec<f64>,
    pub gradient: Vec<f64>,
    /// `b(v₀) = φ(v₀) − g(v₀)ᵀv₀`
    pub intercept: f64,
    /// `|R₂(v₀ + εd; v₀)|` per epsilon.
    pub remainders: Vec<f64>,
    /// Least-squares slope of `log|R₂|` against `log ε`; `None` when some
    /// remainder is exactly zero.
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizationReport {
    pub epsilons: Vec<f64>,
    pub samples: Vec<LinearizationSample>,
    /// Mean over samples with a defined slope.
    pub mean_slope: Option<f64>,
    pub max_remainder: f64,
    /// `max 2|R₂| / ε²`, an empirical curvature bound.
    pub curvature_estimate: f64,
}

fn fit_slope(epsilons: &[f64], remainders: &[f64]) -> Option<f64> {
    if remainders.contains(&0.0) {
        return None;
    }
    let xs: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = remainders.iter().map(|r| r.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

/// Remainders at explicit `(point, direction)` pairs. Directions are
/// normalised to unit length.
pub fn remainder_probe_at<M: SmoothMap>(
    map: &M,
    points: &[(Vec<f64>, Vec<f64>)],
    epsilons: &[f64],
) -> Result<LinearizationReport> {
    if epsilons.len() < 2 || epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::InvalidParameter(
            "need at least two positive epsilons".into(),
        ));
    }
    let c = map.dim();
    let mut samples = Vec::with_capacity(points.len());
    let mut curvature: f64 = 0.0;
    for (v0, d) in points {
        if v0.len() != c || d.len() != c {
            return Err(Error::Shape(format!(
                "probe point or direction is not length {c}"
            )));
        }
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidParameter("degenerate probe direction".into()));
        }
        let d: Vec<f64> = d.iter().map(|x| x / norm).collect();
        let f0 = map.value(v0);
        let g = map.gradient(v0);
        let slope_d: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        let intercept = f0 - g.iter().zip(v0).map(|(a, b)| a * b).sum::<f64>();
        let remainders: Vec<f64> = epsilons
            .iter()
            .map(|&e| {
                let v: Vec<f64> = v0.iter().zip(&d).map(|(a, b)| a + e * b).collect();
                (map.value(&v) - f0 - e * slope_d).abs()
            })
            .collect();
        for (r, e) in remainders.iter().zip(epsilons) {
            curvature = curvature.max(2.0 * r / (e * e));
        }
        samples.push(LinearizationSample {
            point: v0.clone(),
            direction: d,
            gradient: g,
            intercept,
            slope: fit_slope(epsilons, &remainders),
            remainders,
        });
    }
    let slopes: Vec<f64> = samples.iter().filter_map(|s| s.slope).collect();
    let mean_slope = (!slopes.is_empty()).then(|| slopes.iter().sum::<f64>() / slopes.len() as f64);
    let max_remainder = samples
        .iter()
        .flat_map(|s| s.remainders.iter().copied())
        .fold(0.0, f64::max);
    Ok(LinearizationReport {
        epsilons: epsilons.to_vec(),
        samples,
        mean_slope,
        max_remainder,
        curvature_estimate: curvature,
    })
}

/// Remainders at `samples` random standard-normal points and directions.
pub fn remainder_probe<M: SmoothMap>(
    map: &M,
    samples: usize,
    epsilons: &[f64],
    seed: u64,
) -> Result<LinearizationReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter(
            "remainder probe needs at least one sample".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = map.dim();
    let mut draw = || -> Vec<f64> { (0..c).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let points: Vec<(Vec<f64>, Vec<f64>)> = (0..samples).map(|_| (draw(), draw())).collect();
    remainder_probe_at(map, &points, epsilons)
}

/// `1e-1, 1e-2, 1e-3, 1e-4`
pub fn default_epsilons() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3, 1e-4]
}
