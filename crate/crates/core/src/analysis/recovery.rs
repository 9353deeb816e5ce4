use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph};
use crate::kernel::{gvt_forward, EncoderState, Phi};
use crate::synthetic::{random_features, random_graph};
use crate::viewfinder::{default_finder_set, ViewFinderSet, ViewFinderSpec};

/// Builds the target aggregation `p(A)` as a dense matrix.
pub type DenseTarget = Box<dyn Fn(&Graph) -> Result<DenseMatrix> + Send + Sync>;

/// A static aggregation and the linear-GVT coefficients claimed to produce it.
pub struct RecoveryRow {
    pub name: String,
    pub coefficients: Vec<(ViewFinderSpec, f64)>,
    pub target: DenseTarget,
}

impl std::fmt::Debug for RecoveryRow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RecoveryRow")
            .field("name", &self.name)
            .field("coefficients", &self.coefficients)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub name: String,
    pub max_error: f64,
}

/// Settings for the seven standard rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryParams {
    pub hops: u32,
    pub alpha: f64,
    /// `γ_0 ..= γ_K`
    pub gammas: Vec<f64>,
}

impl RecoveryParams {
    pub fn random(hops: u32, alpha: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            hops,
            alpha,
            gammas: (0..=hops).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    }
}

fn sym(g: &Graph) -> Result<DenseMatrix> {
    Ok(DenseMatrix::adjacency(g)?.degree_normalized(0.5, 0.5))
}

fn sym_power(k: u32) -> ViewFinderSpec {
    if k == 0 {
        ViewFinderSpec::Identity
    } else {
        ViewFinderSpec::symmetric(k)
    }
}

/// GCN, SAGE-mean, SGC, APPNP, S²GC, GCNII and GPRGNN.
///
/// The S²GC row puts weight `α` on the identity view, which is what its
/// aggregation `(1/K) Σ_k ((1−α) Â^k + α I)` expands to.
pub fn standard_rows(params: &RecoveryParams) -> Result<Vec<RecoveryRow>> {
    let k = params.hops;
    let a = params.alpha;
    if k == 0 || params.gammas.len() != k as usize + 1 {
        return Err(Error::InvalidParameter(format!(
            "recovery rows need K ≥ 1 and K + 1 gammas, got K = {k} with {}",
            params.gammas.len()
        )));
    }
    let gammas = params.gammas.clone();
    let gammas_target = gammas.clone();
    Ok(vec![
        RecoveryRow {
            name: "GCN".into(),
            coefficients: vec![(ViewFinderSpec::symmetric(1), 1.0)],
            target: Box::new(sym),
        },
        RecoveryRow {
            name: "SAGE-mean".into(),
            coefficients: vec![
                (ViewFinderSpec::Identity, 1.0),
                (ViewFinderSpec::random_walk(1), 1.0),
            ],
            target: Box::new(|g| {
                let a = DenseMatrix::adjacency(g)?;
                Ok(DenseMatrix::identity(a.dim()).add(&a.degree_normalized(1.0, 0.0)))
            }),
        },
        RecoveryRow {
            name: "SGC".into(),
            coefficients: vec![(ViewFinderSpec::symmetric(k), 1.0)],
            target: Box::new(move |g| Ok(sym(g)?.pow(k))),
        },
        RecoveryRow {
            name: "APPNP".into(),
            coefficients: (0..=k)
                .map(|j| (sym_power(j), (1.0 - a) * a.powi(j as i32)))
                .collect(),
            target: Box::new(move |g| {
                let s = sym(g)?;
                let mut acc = DenseMatrix::zeros(s.dim());
                for j in 0..=k {
                    acc = acc.add(&s.pow(j).scaled(a.powi(j as i32)));
                }
                Ok(acc.scaled(1.0 - a))
            }),
        },
        RecoveryRow {
            name: "S2GC".into(),
            coefficients: std::iter::once((ViewFinderSpec::Identity, a))
                .chain((1..=k).map(|j| (ViewFinderSpec::symmetric(j), (1.0 - a) / k as f64)))
                .collect(),
            target: Box::new(move |g| {
                let s = sym(g)?;
                let id = DenseMatrix::identity(s.dim());
                let mut acc = DenseMatrix::zeros(s.dim());
                for j in 1..=k {
                    acc = acc.add(&s.pow(j).scaled(1.0 - a).add(&id.scaled(a)));
                }
                Ok(acc.scaled(1.0 / k as f64))
            }),
        },
        RecoveryRow {
            name: "GCNII".into(),
            coefficients: vec![
                (ViewFinderSpec::symmetric(1), 1.0 - a),
                (ViewFinderSpec::Identity, a),
            ],
            target: Box::new(move |g| {
                let s = sym(g)?;
                Ok(s.scaled(1.0 - a).add(&DenseMatrix::identity(s.dim()).scaled(a)))
            }),
        },
        RecoveryRow {
            name: "GPRGNN".into(),
            coefficients: (0..=k).map(|j| (sym_power(j), gammas[j as usize])).collect(),
            target: Box::new(move |g| {
                let s = sym(g)?;
                let mut acc = DenseMatrix::zeros(s.dim());
                for (j, gamma) in gammas_target.iter().enumerate() {
                    acc = acc.add(&s.pow(j as u32).scaled(*gamma));
                }
                Ok(acc)
            }),
        },
    ])
}

/// Linear `φ` weights over `finders` that realise `row`.
pub fn row_weights(row: &RecoveryRow, finders: &ViewFinderSet) -> Result<Vec<f64>> {
    let mut g = vec![0.0; finders.len()];
    for (spec, coef) in &row.coefficients {
        let c = finders.position(spec).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "row {} needs view `{}`, which is not in the finder set",
                row.name,
                spec.label()
            ))
        })?;
        g[c] += coef;
    }
    Ok(g)
}

/// Max absolute difference between the linear GVT and `p(A)X` for each row.
pub fn recovery_check(
    rows: &[RecoveryRow],
    finders: &ViewFinderSet,
    g: &Graph,
    x: &FeatureMatrix,
) -> Result<Vec<RecoveryResult>> {
    rows.iter()
        .map(|row| {
            let phi = Phi::linear(&row_weights(row, finders)?, 0.0)?;
            let enc = EncoderState::new(finders.clone(), phi, 1)?;
            let z = gvt_forward(&enc, g, x)?;
            let oracle = (row.target)(g)?.apply(x);
            Ok(RecoveryResult {
                name: row.name.clone(),
                max_error: z.max_abs_diff(&oracle),
            })
        })
        .collect()
}

/// The standard rows (`K = 3`, `α = 0.1`, random `γ`) over `graphs` random
/// graphs with at most 30 nodes; reports the worst error per row.
pub fn recovery_suite(graphs: usize, seed: u64) -> Result<Vec<RecoveryResult>> {
    let params = RecoveryParams::random(3, 0.1, seed);
    let rows = standard_rows(&params)?;
    let finders = default_finder_set(params.hops)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut worst: Vec<RecoveryResult> = rows
        .iter()
        .map(|r| RecoveryResult {
            name: r.name.clone(),
            max_error: 0.0,
        })
        .collect();
    for _ in 0..graphs {
        let n = rng.gen_range(2..=30);
        let m = rng.gen_range(0..=(n * (n - 1) / 2).min(4 * n));
        let g = random_graph(n, m, &mut rng)?;
        let x = random_features(n, rng.gen_range(1..=8), &mut rng);
        for (w, r) in worst.iter_mut().zip(recovery_check(&rows, &finders, &g, &x)?) {
            w.max_error = w.max_error.max(r.max_error);
        }
    }
    Ok(worst)
}
