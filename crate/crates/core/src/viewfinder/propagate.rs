use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use super::ViewFinderSpec;
use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph};

/// Rows per parallel work item. Rows are independent, so chunking never
/// changes results.
const ROW_CHUNK: usize = 256;

/// `d^{-e}` per node, with zero-degree entries defined as 0.
pub(crate) fn degree_scale(g: &Graph, e: f64) -> Vec<f64> {
    g.degrees()
        .iter()
        .map(|&d| {
            if d == 0 {
                0.0
            } else if e == 0.0 {
                1.0
            } else if e == 0.5 {
                1.0 / (d as f64).sqrt()
            } else if e == 1.0 {
                1.0 / d as f64
            } else {
                (d as f64).powf(-e)
            }
        })
        .collect()
}

/// `out = diag(left) A diag(right) x`, one sparse sweep.
pub(crate) fn scaled_adjacency_apply(
    g: &Graph,
    left: &[f64],
    right: &[f64],
    x: &[f64],
    f: usize,
) -> Vec<f64> {
    let n = g.num_nodes();
    let mut out = vec![0.0; n * f];
    if f == 0 {
        return out;
    }
    out.par_chunks_mut(ROW_CHUNK * f)
        .enumerate()
        .for_each(|(chunk, rows)| {
            let first = chunk * ROW_CHUNK;
            for (i, acc) in rows.chunks_mut(f).enumerate() {
                let u = first + i;
                let lu = left[u];
                if lu == 0.0 {
                    continue;
                }
                for &v in g.neighbors(u) {
                    let v = v as usize;
                    let w = right[v];
                    if w == 0.0 {
                        continue;
                    }
                    let src = &x[v * f..(v + 1) * f];
                    for (a, s) in acc.iter_mut().zip(src) {
                        *a += w * s;
                    }
                }
                if lu != 1.0 {
                    acc.iter_mut().for_each(|a| *a *= lu);
                }
            }
        });
    out
}

/// Plain `A x` (no normalization).
fn adjacency_apply(g: &Graph, x: &[f64], f: usize) -> Vec<f64> {
    let ones = vec![1.0; g.num_nodes()];
    scaled_adjacency_apply(g, &ones, &ones, x, f)
}

fn check_shapes(g: &Graph, x: &FeatureMatrix) -> Result<()> {
    if x.num_nodes() != g.num_nodes() {
        return Err(Error::Shape(format!(
            "feature matrix has {} rows, graph has {} nodes",
            x.num_nodes(),
            g.num_nodes()
        )));
    }
    Ok(())
}

/// `ν(A) X`, computed matrix-free.
pub fn propagate(spec: &ViewFinderSpec, g: &Graph, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    apply(spec, g, x, false)
}

/// `ν(A)^T Y`. Used by the backward pass.
pub fn propagate_transpose(spec: &ViewFinderSpec, g: &Graph, y: &FeatureMatrix) -> Result<FeatureMatrix> {
    apply(spec, g, y, true)
}

fn apply(spec: &ViewFinderSpec, g: &Graph, x: &FeatureMatrix, transpose: bool) -> Result<FeatureMatrix> {
    spec.validate()?;
    check_shapes(g, x)?;
    let (n, f) = (x.num_nodes(), x.num_features());
    let values = match *spec {
        ViewFinderSpec::Identity => x.values().to_vec(),
        ViewFinderSpec::SelfAugmented => {
            let mut out = adjacency_apply(g, x.values(), f);
            out.iter_mut().zip(x.values()).for_each(|(o, v)| *o += v);
            out
        }
        ViewFinderSpec::NormalizedPower { p, q, k } => {
            // (D^-p A D^-q)^T = D^-q A D^-p since A is symmetric
            let (p, q) = if transpose { (q, p) } else { (p, q) };
            let left = degree_scale(g, p);
            let right = degree_scale(g, q);
            let mut cur = x.values().to_vec();
            for _ in 0..k {
                cur = scaled_adjacency_apply(g, &left, &right, &cur, f);
            }
            cur
        }
        // T_k(L̃) is symmetric, so the transpose is the operator itself
        ViewFinderSpec::Chebyshev {
            order,
            estimate_lambda_max,
        } => {
            let lambda = if estimate_lambda_max {
                estimate_lambda_max_impl(g, 100, 1e-6)
            } else {
                2.0
            };
            chebyshev(g, x.values(), f, order, lambda)
        }
        ViewFinderSpec::TruncatedDiffusion { alpha, truncation } => {
            let (p, q) = if transpose { (0.0, 1.0) } else { (1.0, 0.0) };
            let left = degree_scale(g, p);
            let right = degree_scale(g, q);
            let mut term = x.values().to_vec();
            let mut acc: Vec<f64> = term.iter().map(|v| alpha * v).collect();
            let mut coef = alpha;
            for _ in 0..truncation {
                term = scaled_adjacency_apply(g, &left, &right, &term, f);
                coef *= 1.0 - alpha;
                acc.iter_mut().zip(&term).for_each(|(a, t)| *a += coef * t);
            }
            acc
        }
    };
    Ok(FeatureMatrix::from_raw(n, f, values))
}

/// Chebyshev recurrence `T_0 = X`, `T_1 = L̃X`, `T_k = 2L̃T_{k-1} − T_{k-2}`.
fn chebyshev(g: &Graph, x: &[f64], f: usize, order: u32, lambda_max: f64) -> Vec<f64> {
    let s = degree_scale(g, 0.5);
    let scale = 2.0 / lambda_max;
    // L̃y = (2/λ)(y − Â_sym y) − y
    let l_tilde = |y: &[f64]| -> Vec<f64> {
        let ay = scaled_adjacency_apply(g, &s, &s, y, f);
        y.iter().zip(&ay).map(|(yv, av)| scale * (yv - av) - yv).collect()
    };
    if order == 0 {
        return x.to_vec();
    }
    let mut prev = x.to_vec();
    let mut cur = l_tilde(x);
    for _ in 2..=order {
        let lc = l_tilde(&cur);
        let next: Vec<f64> = lc.iter().zip(&prev).map(|(l, p)| 2.0 * l - p).collect();
        prev = std::mem::replace(&mut cur, next);
    }
    cur
}

/// Largest eigenvalue of `I − D^{-1/2} A D^{-1/2}` by power iteration from a
/// fixed-seed random start.
pub fn estimate_lambda_max(g: &Graph) -> f64 {
    estimate_lambda_max_impl(g, 100, 1e-6)
}

fn estimate_lambda_max_impl(g: &Graph, max_iter: usize, tol: f64) -> f64 {
    let n = g.num_nodes();
    if n == 0 {
        return 2.0;
    }
    let s = degree_scale(g, 0.5);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let av = scaled_adjacency_apply(g, &s, &s, &v, 1);
        let w: Vec<f64> = v.iter().zip(&av).map(|(a, b)| a - b).collect();
        let rq: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let nw = norm(&w);
        if nw == 0.0 {
            break;
        }
        v = w.into_iter().map(|x| x / nw).collect();
        let done = (rq - lambda).abs() < tol;
        lambda = rq;
        if done {
            break;
        }
    }
    if lambda > 0.0 {
        lambda
    } else {
        2.0
    }
}
