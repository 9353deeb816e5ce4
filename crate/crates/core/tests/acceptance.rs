//! Acceptance criteria, run sequentially so timings are not disturbed by
//! other tests. Prints one PASS/FAIL line per criterion and exits nonzero if
//! any fails.
//!
//! Dataset-backed criteria read converted directories named `cora`,
//! `citeseer` and `texas` from `$GVT_DATASETS`, falling back to the
//! workspace `datasets/` directory.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use gvt::analysis::{
    default_epsilons, equivariance_suite, gradcheck_suite, random_encoder, recovery_suite, remainder_probe,
    scaling_probe, wilcoxon_signed_rank, GradcheckBounds, PValueMethod, PairedAccuracies, ScalingPoint,
    SuiteBounds,
};
use gvt::graph::load_dataset;
use gvt::kernel::Phi;
use gvt::trainer::{adapt_with, pretrain, AdaptConfig, PredictorKind, TrainConfig};
use gvt::{Dataset, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
/// Test accuracy of a linear classifier on raw Cora features.
const CORA_LINEAR_BASELINE: f64 = 0.4860;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

fn datasets_root() -> PathBuf {
    std::env::var_os("GVT_DATASETS")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../datasets"))
}

fn load_named(name: &str) -> std::result::Result<Dataset, String> {
    let dir = datasets_root().join(name);
    if !dir.is_dir() {
        return Err(format!("dataset directory {} not found", dir.display()));
    }
    load_dataset(&dir)
        .map(|d| d.row_normalized())
        .map_err(|e| format!("{}: {e}", dir.display()))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn cora_config(seed: u64) -> TrainConfig {
    TrainConfig {
        hops: 2,
        phi_depth: 2,
        depth: 4,
        lr: 0.005,
        seed,
        ..TrainConfig::default()
    }
}

fn equivariance() -> Result<Outcome> {
    let start = Instant::now();
    let bounds = SuiteBounds::default();
    let rep = equivariance_suite(100, &bounds, 0)?;
    let secs = start.elapsed().as_secs_f64();
    let c_max = 2 * bounds.max_hops as usize + 1;
    let ok = rep.trials == 100
        && bounds.max_nodes <= 50
        && bounds.max_features <= 16
        && c_max <= 7
        && rep.node_deviation <= 1e-9
        && rep.feature_deviation == 0.0
        && secs < 30.0;
    Ok(Outcome::new(
        ok,
        format!(
            "trials={} node_dev={:.3e} feature_dev={:e} joint_dev={:.3e} time={secs:.2}s",
            rep.trials, rep.node_deviation, rep.feature_deviation, rep.joint_deviation
        ),
    ))
}

fn recovery() -> Result<Outcome> {
    let start = Instant::now();
    let rows = recovery_suite(10, 0)?;
    let secs = start.elapsed().as_secs_f64();
    let worst = rows.iter().map(|r| r.max_error).fold(0.0, f64::max);
    let ok = rows.len() == 7 && worst <= 1e-9 && secs < 10.0;
    let names: Vec<&str> = rows.iter().map(|r| r.name.as_str()).collect();
    Ok(Outcome::new(
        ok,
        format!(
            "rows={} [{}] max_error={worst:.3e} time={secs:.2}s",
            rows.len(),
            names.join(", ")
        ),
    ))
}

fn gradients() -> Result<Outcome> {
    let start = Instant::now();
    let bounds = GradcheckBounds::default();
    let rep = gradcheck_suite(20, &bounds, 0)?;
    let secs = start.elapsed().as_secs_f64();
    let shapes_ok = rep
        .cases
        .iter()
        .all(|c| c.num_views <= 7 && c.phi_depth <= 3 && c.depth <= 4);
    let ok = rep.cases.len() == 20 && shapes_ok && rep.max_rel_error <= 1e-5 && secs < 60.0;
    Ok(Outcome::new(
        ok,
        format!(
            "cases={} max_rel_error={:.3e} time={secs:.2}s",
            rep.cases.len(),
            rep.max_rel_error
        ),
    ))
}

fn remainder() -> Result<Outcome> {
    let eps = default_epsilons();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let enc = random_encoder(&mut rng, 2, 2, 1)?;
    let mlp = remainder_probe(&enc.phi, 20, &eps, 0)?;
    let slope = mlp.mean_slope.unwrap_or(f64::NAN);
    let weights: Vec<f64> = (0..enc.finders.len()).map(|i| 0.3 * i as f64 - 0.5).collect();
    let linear = remainder_probe(&Phi::linear(&weights, 0.1)?, 20, &eps, 0)?;
    let ok = mlp.samples.len() == 20 && (slope - 2.0).abs() <= 0.2 && linear.max_remainder <= 1e-12;
    Ok(Outcome::new(
        ok,
        format!(
            "samples={} mean_slope={slope:.4} linear_max_remainder={:.3e}",
            mlp.samples.len(),
            linear.max_remainder
        ),
    ))
}

fn training_floor() -> Result<Outcome> {
    let cora = match load_named("cora") {
        Ok(d) => d,
        Err(e) => return Ok(Outcome::new(false, e)),
    };
    let mut accs = Vec::new();
    let mut slowest: f64 = 0.0;
    for seed in SEEDS {
        let start = Instant::now();
        let run = pretrain(&cora_config(seed), &cora)?;
        slowest = slowest.max(start.elapsed().as_secs_f64());
        accs.push(run.test_accuracy.unwrap_or(0.0));
    }
    let m = mean(&accs);
    let floor_ok = m >= 0.70;
    let margin = m - CORA_LINEAR_BASELINE;
    let ok = floor_ok && margin >= 0.15 && slowest < 300.0;
    Ok(Outcome::new(
        ok,
        format!("mean_test={m:.4} margin_over_linear={margin:.4} per_seed={accs:.4?} slowest={slowest:.1}s"),
    ))
}

fn transfer() -> Result<Outcome> {
    let (cora, citeseer, texas) = match (load_named("cora"), load_named("citeseer"), load_named("texas")) {
        (Ok(a), Ok(b), Ok(c)) => (a, b, c),
        (a, b, c) => {
            let missing: Vec<String> = [a.err(), b.err(), c.err()].into_iter().flatten().collect();
            return Ok(Outcome::new(false, missing.join("; ")));
        }
    };
    let mut accs = Vec::new();
    let mut texas_ok = true;
    for seed in SEEDS {
        let cfg = cora_config(seed);
        let ckpt = pretrain(&cfg, &cora)?.checkpoint;
        let adapt_cfg = AdaptConfig::from(&cfg);
        let adapted = adapt_with(&ckpt, &citeseer, PredictorKind::Mlp, &adapt_cfg)?;
        accs.push(adapted.chosen().test_accuracy.unwrap_or(0.0));
        texas_ok &= adapt_with(&ckpt, &texas, PredictorKind::Mlp, &adapt_cfg).is_ok();
    }
    let m = mean(&accs);
    Ok(Outcome::new(
        m > 0.4974 && texas_ok,
        format!("citeseer_mean_test={m:.4} per_seed={accs:.4?} texas_completed={texas_ok}"),
    ))
}

fn ablation() -> Result<Outcome> {
    let (cora, citeseer) = match (load_named("cora"), load_named("citeseer")) {
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => {
            let missing: Vec<String> = [a.err(), b.err()].into_iter().flatten().collect();
            return Ok(Outcome::new(false, missing.join("; ")));
        }
    };
    let mut full = Vec::new();
    let mut flat = Vec::new();
    for seed in SEEDS {
        for (no_recurrence, out) in [(false, &mut full), (true, &mut flat)] {
            let cfg = TrainConfig {
                depth: 8,
                no_recurrence,
                ..cora_config(seed)
            };
            let ckpt = pretrain(&cfg, &cora)?.checkpoint;
            let adapted = adapt_with(&ckpt, &citeseer, PredictorKind::Mlp, &AdaptConfig::from(&cfg))?;
            out.push(adapted.chosen().val_accuracy);
        }
    }
    let (f, n) = (mean(&full), mean(&flat));
    Ok(Outcome::new(
        n < f,
        format!("val_chosen_L={f:.4} val_no_recurrence={n:.4}"),
    ))
}

fn scaling() -> Result<Outcome> {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [10_000, 20_000] {
        let base = ScalingPoint {
            num_nodes: n,
            num_edges: 50 * n,
            num_features: 64,
            hops: 2,
        };
        let rep = scaling_probe(base, 2, 7, 0)?;
        for change in ["edges", "features"] {
            let r = rep.ratio(change).unwrap_or(f64::NAN);
            ok &= (1.5..=3.0).contains(&r);
            parts.push(format!("N={n} {change}x2={r:.3}"));
        }
    }
    Ok(Outcome::new(ok, parts.join(" ")))
}

fn wilcoxon() -> Result<Outcome> {
    let names: Vec<String> = (0..5).map(|i| format!("d{i}")).collect();
    let a = vec![0.9, 0.8, 0.75, 0.7, 0.65];
    let b = vec![0.8, 0.75, 0.6, 0.68, 0.55];
    let positive = wilcoxon_signed_rank(&PairedAccuracies::new("a", "b", names.clone(), a.clone(), b)?)?;
    let same = wilcoxon_signed_rank(&PairedAccuracies::new("a", "b", names, a.clone(), a)?)?;
    let ok = positive.method == PValueMethod::Exact
        && (positive.p_value - 0.0625).abs() <= 1e-12
        && same.p_value == 1.0;
    Ok(Outcome::new(
        ok,
        format!(
            "all_positive_p={} ({:?}) identical_p={}",
            positive.p_value, positive.method, same.p_value
        ),
    ))
}

type Criterion = (&'static str, fn() -> Result<Outcome>);

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let criteria: [Criterion; 9] = [
        ("equivariance", equivariance),
        ("recovery", recovery),
        ("gradient exactness", gradients),
        ("linearization remainder", remainder),
        ("training floor (cora)", training_floor),
        ("inductive transfer (cora -> citeseer, texas)", transfer),
        ("recurrence ablation", ablation),
        ("complexity scaling", scaling),
        ("wilcoxon", wilcoxon),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = run().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        if !outcome.passed {
            failed += 1;
        }
        println!(
            "{} {name}: {}",
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
