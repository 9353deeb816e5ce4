use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `n` (after dropping zero differences) that uses the exact null
/// distribution.
pub const EXACT_MAX_N: usize = 20;

/// Per-dataset accuracies of two methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedAccuracies {
    pub method_a: String,
    pub method_b: String,
    pub datasets: Vec<String>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl PairedAccuracies {
    pub fn new(
        method_a: impl Into<String>,
        method_b: impl Into<String>,
        datasets: Vec<String>,
        a: Vec<f64>,
        b: Vec<f64>,
    ) -> Result<Self> {
        if a.len() != b.len() || a.len() != datasets.len() {
            return Err(Error::Shape(format!(
                "{} datasets, {} and {} accuracies",
                datasets.len(),
                a.len(),
                b.len()
            )));
        }
        if let Some(v) = a.iter().chain(&b).find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!("accuracy {v} outside [0, 1]")));
        }
        Ok(Self {
            method_a: method_a.into(),
            method_b: method_b.into(),
            datasets,
            a,
            b,
        })
    }

    /// `a − b` per dataset.
    pub fn differences(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(x, y)| x - y).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PValueMethod {
    Exact,
    Normal,
    /// Every difference was zero.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Nonzero differences.
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(W⁺, W⁻)`
    pub statistic: f64,
    /// Two-sided.
    pub p_value: f64,
    pub method: PValueMethod,
}

/// Average ranks of `|d|`, 1-based, with tie groups sizes.
fn ranks(abs: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&i, &j| abs[i].total_cmp(&abs[j]));
    let mut ranks = vec![0.0; abs.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

struct Ranked {
    ranks: Vec<f64>,
    ties: Vec<usize>,
    w_plus: f64,
    w_minus: f64,
}

fn rank_differences(diffs: &[f64]) -> Result<Option<Ranked>> {
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("paired differences".into()));
    }
    let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    if nz.is_empty() {
        return Ok(None);
    }
    let abs: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = ranks(&abs);
    let w_plus = nz
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total = (nz.len() * (nz.len() + 1)) as f64 / 2.0;
    Ok(Some(Ranked {
        w_plus,
        w_minus: total - w_plus,
        ranks,
        ties,
    }))
}

fn degenerate() -> WilcoxonResult {
    WilcoxonResult {
        n: 0,
        w_plus: 0.0,
        w_minus: 0.0,
        statistic: 0.0,
        p_value: 1.0,
        method: PValueMethod::Degenerate,
    }
}

fn exact_p(r: &Ranked) -> f64 {
    // doubled ranks are integers even with averaged ties
    let doubled: Vec<usize> = r.ranks.iter().map(|x| (2.0 * x).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0f64; max + 1];
    counts[0] = 1.0;
    for &d in &doubled {
        for s in (d..=max).rev() {
            counts[s] += counts[s - d];
        }
    }
    let total = 2f64.powi(doubled.len() as i32);
    let obs = (2.0 * r.w_plus).round() as usize;
    let lower: f64 = counts[..=obs].iter().sum::<f64>() / total;
    let upper: f64 = counts[obs..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

fn normal_p(r: &Ranked) -> f64 {
    let n = r.ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let tie_term: f64 = r.ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((r.w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    // two-sided tail of the standard normal: 2(1 − Φ(z)) = erfc(z/√2)
    libm::erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

fn result(r: &Ranked, p_value: f64, method: PValueMethod) -> WilcoxonResult {
    WilcoxonResult {
        n: r.ranks.len(),
        w_plus: r.w_plus,
        w_minus: r.w_minus,
        statistic: r.w_plus.min(r.w_minus),
        p_value,
        method,
    }
}

/// Signed-rank test on paired differences: exact for `n ≤ 20`, normal
/// approximation with continuity correction above.
pub fn wilcoxon_differences(diffs: &[f64]) -> Result<WilcoxonResult> {
    match rank_differences(diffs)? {
        None => Ok(degenerate()),
        Some(r) if r.ranks.len() <= EXACT_MAX_N => Ok(result(&r, exact_p(&r), PValueMethod::Exact)),
        Some(r) => Ok(result(&r, normal_p(&r), PValueMethod::Normal)),
    }
}

/// Forces the exact null distribution regardless of `n`.
pub fn wilcoxon_exact(diffs: &[f64]) -> Result<WilcoxonResult> {
    match rank_differences(diffs)? {
        None => Ok(degenerate()),
        Some(r) => Ok(result(&r, exact_p(&r), PValueMethod::Exact)),
    }
}

/// Forces the normal approximation regardless of `n`.
pub fn wilcoxon_normal(diffs: &[f64]) -> Result<WilcoxonResult> {
    match rank_differences(diffs)? {
        None => Ok(degenerate()),
        Some(r) => Ok(result(&r, normal_p(&r), PValueMethod::Normal)),
    }
}

pub fn wilcoxon_signed_rank(pairs: &PairedAccuracies) -> Result<WilcoxonResult> {
    wilcoxon_differences(&pairs.differences())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Two-sided p by walking all 2ⁿ sign patterns.
    fn brute_force(diffs: &[f64]) -> f64 {
        let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
        let abs: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
        // average ranks by counting
        let rank: Vec<f64> = abs
            .iter()
            .map(|a| {
                let less = abs.iter().filter(|b| *b < a).count() as f64;
                let equal = abs.iter().filter(|b| *b == a).count() as f64;
                less + (equal + 1.0) / 2.0
            })
            .collect();
        let obs: f64 = nz
            .iter()
            .zip(&rank)
            .filter(|(d, _)| **d > 0.0)
            .map(|(_, r)| r)
            .sum();
        let n = nz.len();
        let (mut lo, mut hi) = (0u64, 0u64);
        for mask in 0u64..(1 << n) {
            let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| rank[i]).sum();
            if w <= obs + 1e-9 {
                lo += 1;
            }
            if w >= obs - 1e-9 {
                hi += 1;
            }
        }
        let total = (1u64 << n) as f64;
        (2.0 * (lo.min(hi) as f64) / total).min(1.0)
    }

    #[test]
    fn five_positive_differences() {
        let r = wilcoxon_differences(&[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        assert_eq!(r.w_minus, 0.0);
        assert_eq!(r.w_plus, 15.0);
        assert_eq!(r.method, PValueMethod::Exact);
        assert_abs_diff_eq!(r.p_value, 2.0 / 32.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.p_value, 0.0625, epsilon = 1e-15);
    }

    #[test]
    fn identical_inputs() {
        let pairs = PairedAccuracies::new(
            "a",
            "b",
            vec!["x".into(), "y".into()],
            vec![0.5, 0.7],
            vec![0.5, 0.7],
        )
        .unwrap();
        let r = wilcoxon_signed_rank(&pairs).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.method, PValueMethod::Degenerate);
    }

    #[test]
    fn exact_matches_enumeration_with_ties_and_zeros() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let n = rng.gen_range(1..=12);
            // coarse grid so ties and zeros happen
            let diffs: Vec<f64> = (0..n).map(|_| rng.gen_range(-3i32..=3) as f64 * 0.25).collect();
            let exact = wilcoxon_exact(&diffs).unwrap().p_value;
            if diffs.iter().all(|d| *d == 0.0) {
                assert_eq!(exact, 1.0);
            } else {
                assert_abs_diff_eq!(exact, brute_force(&diffs), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn ties_get_average_ranks() {
        let (r, t) = ranks(&[2.0, 1.0, 2.0, 3.0]);
        assert_eq!(r, vec![2.5, 1.0, 2.5, 4.0]);
        assert_eq!(t, vec![1, 2, 1]);
    }

    #[test]
    fn normal_agrees_with_exact_at_twenty() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let diffs: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.2)).collect();
            let e = wilcoxon_exact(&diffs).unwrap().p_value;
            let a = wilcoxon_normal(&diffs).unwrap().p_value;
            assert!((e - a).abs() <= 0.02, "exact {e} vs normal {a}");
        }
    }

    #[test]
    fn large_n_uses_normal() {
        let diffs: Vec<f64> = (1..=30).map(|i| i as f64 / 100.0).collect();
        let r = wilcoxon_differences(&diffs).unwrap();
        assert_eq!(r.method, PValueMethod::Normal);
        assert!(r.p_value < 1e-5);
    }

    #[test]
    fn pairs_are_validated() {
        assert!(PairedAccuracies::new("a", "b", vec!["x".into()], vec![1.2], vec![0.3]).is_err());
        assert!(PairedAccuracies::new("a", "b", vec![], vec![0.1], vec![]).is_err());
    }
}
