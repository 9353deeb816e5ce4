use std::path::Path;
use std::time::Instant;

use clap::Parser;
use gvt::analysis::{
    default_epsilons, equivariance_audit_with, equivariance_suite, gradcheck_suite, heatmap,
    pinned_feature_forward, random_encoder, recovery_suite, remainder_probe, wilcoxon_signed_rank,
    HeatmapConfig, PairedAccuracies, SuiteBounds,
};
use gvt::graph::{load_dataset, save_dataset};
use gvt::kernel::Phi;
use gvt::synthetic::{csbm, hop_chain, path_fixture, random_features, random_graph, CsbmParams};
use gvt::trainer::{
    adapt_with, evaluate, grid_search, load_predictor, pretrain, save_predictor, AdaptConfig, Checkpoint,
    GridSpace, Split, TrainConfig,
};
use gvt::viewfinder::{default_finder_set, stack_views};
use gvt::Dataset;
use rand::SeedableRng;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, read_json, write_json, write_text, RunManifest};
use crate::{
    AdaptArgs, CheckArgs, Cli, Command, DataFlags, EvaluateArgs, GridArgs, HeatmapArgs, PretrainArgs,
    ReplayArgs, SplitArg, StackArgs, Suite, SynthArgs, SynthKind, TrainFlags, WilcoxonArgs,
};

pub fn run(cli: Cli, args: Vec<String>) -> CliResult<()> {
    let deterministic = cli.deterministic;
    match cli.command {
        Command::Pretrain(a) => cmd_pretrain(&a, &args, deterministic),
        Command::Adapt(a) => cmd_adapt(&a, &args),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Grid(a) => cmd_grid(&a, &args),
        Command::Check(a) => cmd_check(&a),
        Command::Stack(a) => cmd_stack(&a, &args),
        Command::Heatmap(a) => cmd_heatmap(&a, &args),
        Command::Wilcoxon(a) => cmd_wilcoxon(&a),
        Command::Replay(a) => cmd_replay(&a),
        Command::Synth(a) => cmd_synth(&a),
    }
}

fn load_data(flags: &DataFlags) -> CliResult<Dataset> {
    if !flags.data.is_dir() {
        return Err(CliError::usage(format!(
            "dataset directory not found: {}",
            flags.data.display()
        )));
    }
    let data = load_dataset(&flags.data)?;
    Ok(if flags.normalize {
        data.row_normalized()
    } else {
        data
    })
}

fn load_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    if !path.is_file() {
        return Err(CliError::usage(format!(
            "checkpoint not found: {}",
            path.display()
        )));
    }
    Ok(Checkpoint::load(path)?)
}

fn train_config(flags: &TrainFlags) -> CliResult<TrainConfig> {
    let mut cfg: TrainConfig = match &flags.config {
        Some(path) => read_json(path)?,
        None => TrainConfig::default(),
    };
    if let Some(v) = flags.hops {
        cfg.hops = v;
    }
    if let Some(v) = flags.phi_depth {
        cfg.phi_depth = v;
    }
    if let Some(v) = flags.depth {
        cfg.depth = v;
    }
    if let Some(v) = flags.lr {
        cfg.lr = v;
    }
    if let Some(v) = flags.epochs {
        cfg.max_epochs = v;
    }
    if let Some(v) = flags.patience {
        cfg.patience = v;
    }
    if let Some(v) = flags.seed {
        cfg.seed = v;
    }
    if let Some(v) = flags.predictor {
        cfg.predictor = v.into();
    }
    if let Some(v) = flags.hidden {
        cfg.hidden = v;
    }
    cfg.no_nonlinearity |= flags.no_nonlinearity;
    cfg.no_recurrence |= flags.no_recurrence;
    cfg.cache_views |= flags.cache_views;
    cfg.validate()?;
    Ok(cfg)
}

fn write_manifest(
    out: &Path,
    command: &str,
    args: &[String],
    config: serde_json::Value,
    datasets: Vec<&Path>,
    seeds: Vec<u64>,
) -> CliResult<()> {
    let manifest = RunManifest {
        command: command.to_string(),
        args: args.to_vec(),
        config,
        datasets: datasets.into_iter().map(Path::to_path_buf).collect(),
        seeds,
        out: out.to_path_buf(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    write_json(&out.join("manifest.json"), &manifest)
}

fn cmd_pretrain(a: &PretrainArgs, args: &[String], deterministic: bool) -> CliResult<()> {
    let cfg = train_config(&a.train)?;
    let data = load_data(&a.data)?;
    ensure_dir(&a.out)?;
    let start = Instant::now();
    let run = pretrain(&cfg, &data)?;
    let elapsed = start.elapsed().as_secs_f64();
    run.checkpoint.save(a.out.join("encoder.gvtc"))?;
    let meta = &run.checkpoint.meta;
    let mut metrics = json!({
        "dataset": data.name,
        "epochs_run": meta.epochs_run,
        "best_epoch": meta.best_epoch,
        "best_val_accuracy": meta.best_val_accuracy,
        "test_accuracy": run.test_accuracy,
        "history": run.history,
    });
    if !deterministic {
        metrics["wall_seconds"] = json!(elapsed);
    }
    write_json(&a.out.join("metrics.json"), &metrics)?;
    write_manifest(
        &a.out,
        "pretrain",
        args,
        serde_json::to_value(&cfg)?,
        vec![&a.data.data],
        vec![cfg.seed],
    )?;
    println!(
        "pretrained {} epochs, best val {:?} at epoch {}, test {:?}",
        meta.epochs_run, meta.best_val_accuracy, meta.best_epoch, run.test_accuracy
    );
    Ok(())
}

fn cmd_adapt(a: &AdaptArgs, args: &[String]) -> CliResult<()> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let data = load_data(&a.data)?;
    let mut cfg = AdaptConfig::from(&ckpt.config);
    if let Some(v) = a.lr {
        cfg.lr = v;
    }
    if let Some(v) = a.epochs {
        cfg.max_epochs = v;
    }
    if let Some(v) = a.patience {
        cfg.patience = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.hidden {
        cfg.hidden = v;
    }
    ensure_dir(&a.out)?;
    let adapted = adapt_with(&ckpt, &data, a.predictor.into(), &cfg)?;
    save_predictor(a.out.join("predictor.gvtp"), &adapted.predictor, adapted.depth)?;
    let report = json!({
        "dataset": data.name,
        "predictor": adapted.predictor.kind(),
        "chosen_depth": adapted.depth,
        "depths": adapted.reports,
    });
    write_json(&a.out.join("depths.json"), &report)?;
    write_manifest(
        &a.out,
        "adapt",
        args,
        serde_json::to_value(&cfg)?,
        vec![&a.data.data, &a.checkpoint],
        vec![cfg.seed],
    )?;
    let chosen = adapted.chosen();
    println!(
        "chosen depth {} (val {}, test {:?})",
        adapted.depth, chosen.val_accuracy, chosen.test_accuracy
    );
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs) -> CliResult<()> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let data = load_data(&a.data)?;
    let (predictor, depth) = load_predictor(&a.predictor_file)?;
    let split = match a.split {
        SplitArg::Train => Split::Train,
        SplitArg::Val => Split::Val,
        SplitArg::Test => Split::Test,
    };
    let acc = evaluate(&ckpt.encoder, &predictor, depth, &data, split)?;
    println!("{split:?} accuracy {acc}");
    if let Some(out) = &a.out {
        ensure_dir(out)?;
        write_json(
            &out.join("evaluation.json"),
            &json!({ "split": split, "depth": depth, "accuracy": acc }),
        )?;
    }
    Ok(())
}

fn cmd_grid(a: &GridArgs, args: &[String]) -> CliResult<()> {
    let base = train_config(&a.train)?;
    let space = if a.space == "standard" {
        GridSpace::standard()
    } else {
        read_json(Path::new(&a.space))?
    };
    let data = load_data(&a.data)?;
    ensure_dir(&a.out)?;
    let outcome = grid_search(&space, &base, &data)?;
    write_json(&a.out.join("grid.json"), &outcome)?;
    write_manifest(
        &a.out,
        "grid",
        args,
        json!({ "base": base, "space": space }),
        vec![&a.data.data],
        vec![base.seed],
    )?;
    println!("best config: {}", serde_json::to_string(&outcome.best)?);
    Ok(())
}

struct SuiteLine {
    name: String,
    passed: bool,
    detail: String,
}

fn check_equivariance(a: &CheckArgs) -> CliResult<SuiteLine> {
    if a.negative_control {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.seed);
        let enc = random_encoder(&mut rng, 2, 2, 1)?;
        let g = random_graph(30, 60, &mut rng)?;
        let x = random_features(30, 8, &mut rng);
        let rep = equivariance_audit_with(
            |g, x| pinned_feature_forward(&enc, g, x),
            &g,
            &x,
            a.trials.max(1),
            a.seed,
        )?;
        return Ok(SuiteLine {
            name: "equivariance (negative control)".into(),
            passed: rep.node_deviation <= 1e-9 && rep.feature_deviation == 0.0,
            detail: format!(
                "node={:e} feature={:e}",
                rep.node_deviation, rep.feature_deviation
            ),
        });
    }
    let rep = equivariance_suite(a.trials, &SuiteBounds::default(), a.seed)?;
    Ok(SuiteLine {
        name: "equivariance".into(),
        passed: rep.node_deviation <= 1e-9 && rep.joint_deviation <= 1e-9 && rep.feature_deviation == 0.0,
        detail: format!(
            "trials={} node={:e} feature={:e} joint={:e}",
            rep.trials, rep.node_deviation, rep.feature_deviation, rep.joint_deviation
        ),
    })
}

fn check_recovery(a: &CheckArgs) -> CliResult<Vec<SuiteLine>> {
    Ok(recovery_suite(10, a.seed)?
        .into_iter()
        .map(|r| SuiteLine {
            name: format!("recovery {}", r.name),
            passed: r.max_error <= 1e-9,
            detail: format!("max_error={:e}", r.max_error),
        })
        .collect())
}

fn check_remainder(a: &CheckArgs) -> CliResult<Vec<SuiteLine>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.seed);
    let enc = random_encoder(&mut rng, 2, 3, 1)?;
    let eps = default_epsilons();
    let mlp = remainder_probe(&enc.phi, 20, &eps, a.seed)?;
    let slope = mlp.mean_slope.unwrap_or(f64::NAN);
    let c = enc.finders.len();
    let weights: Vec<f64> = (0..c).map(|i| (i as f64 - 1.5) * 0.7).collect();
    let linear = remainder_probe(&Phi::linear(&weights, 0.2)?, 20, &eps, a.seed)?;
    Ok(vec![
        SuiteLine {
            name: "remainder mlp slope".into(),
            passed: (slope - 2.0).abs() <= 0.2,
            detail: format!("slope={slope:.4}"),
        },
        SuiteLine {
            name: "remainder linear".into(),
            passed: linear.max_remainder <= 1e-12,
            detail: format!("max={:e}", linear.max_remainder),
        },
    ])
}

fn check_gradients(a: &CheckArgs) -> CliResult<SuiteLine> {
    let rep = gradcheck_suite(20, &Default::default(), a.seed)?;
    Ok(SuiteLine {
        name: "gradcheck".into(),
        passed: rep.max_rel_error <= 1e-5,
        detail: format!("cases={} max_rel_error={:e}", rep.cases.len(), rep.max_rel_error),
    })
}

fn cmd_check(a: &CheckArgs) -> CliResult<()> {
    let all = a.suite == Suite::All;
    let mut lines = Vec::new();
    if all || a.suite == Suite::Equivariance {
        lines.push(check_equivariance(a)?);
    }
    if all || a.suite == Suite::Recovery {
        lines.extend(check_recovery(a)?);
    }
    if all || a.suite == Suite::Remainder {
        lines.extend(check_remainder(a)?);
    }
    if all || a.suite == Suite::Gradcheck {
        lines.push(check_gradients(a)?);
    }
    for l in &lines {
        println!(
            "{} {}: {}",
            if l.passed { "PASS" } else { "FAIL" },
            l.name,
            l.detail
        );
    }
    if let Some(out) = &a.out {
        ensure_dir(out)?;
        let report: Vec<_> = lines
            .iter()
            .map(|l| json!({ "name": l.name, "passed": l.passed, "detail": l.detail }))
            .collect();
        write_json(&out.join("check.json"), &report)?;
    }
    let failed = lines.iter().filter(|l| !l.passed).count();
    if failed > 0 {
        return Err(CliError::check(format!("{failed} check(s) failed")));
    }
    Ok(())
}

fn cmd_stack(a: &StackArgs, args: &[String]) -> CliResult<()> {
    let data = load_data(&a.data)?;
    let finders = default_finder_set(a.hops)?;
    let t = stack_views(&finders, &data.graph, &data.features)?;
    ensure_dir(&a.out)?;
    let mut w = csv::Writer::from_path(a.out.join("stack.csv"))?;
    let mut header = vec!["node".to_string(), "feature".to_string()];
    header.extend(finders.specs().iter().map(|s| s.label()));
    w.write_record(&header)?;
    for n in 0..t.num_nodes() {
        for f in 0..t.num_features() {
            let mut row = vec![n.to_string(), f.to_string()];
            row.extend(t.view_vector(n, f).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| CliError::io(e.to_string()))?;
    write_manifest(
        &a.out,
        "stack",
        args,
        serde_json::to_value(&finders)?,
        vec![&a.data.data],
        vec![],
    )?;
    println!(
        "{} x {} x {} tensor written",
        t.num_nodes(),
        t.num_features(),
        t.num_views()
    );
    Ok(())
}

fn parse_views(spec: &str, c: usize) -> CliResult<Vec<usize>> {
    if spec == "all" {
        return Ok((0..c).collect());
    }
    spec.split(',')
        .map(|s| {
            let v: usize = s
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("bad view index `{s}`")))?;
            if v >= c {
                return Err(CliError::usage(format!("view {v} out of range (C = {c})")));
            }
            Ok(v)
        })
        .collect()
}

fn cmd_heatmap(a: &HeatmapArgs, args: &[String]) -> CliResult<()> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let data = load_data(&a.data)?;
    let views = parse_views(&a.views, ckpt.encoder.finders.len())?;
    let cfg = HeatmapConfig {
        depth: a.depth,
        num_nodes: a.nodes,
        num_features: a.features,
        seed: a.seed,
    };
    let maps = heatmap(&ckpt.encoder, &data.graph, &data.features, &cfg)?;
    ensure_dir(&a.out)?;
    let mut summary = Vec::new();
    for m in maps.iter().filter(|m| views.contains(&m.view)) {
        let name = format!("heatmap_d{}_v{}.csv", m.depth, m.view);
        write_text(&a.out.join(&name), &m.to_csv())?;
        let min = m.values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = m.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        summary.push(json!({ "file": name, "view": m.view, "label": m.view_label, "min": min, "max": max }));
    }
    write_json(
        &a.out.join("heatmaps.json"),
        &json!({ "depth": a.depth, "nodes": maps[0].nodes, "features": maps[0].features, "views": summary }),
    )?;
    write_manifest(
        &a.out,
        "heatmap",
        args,
        serde_json::to_value(&cfg)?,
        vec![&a.data.data, &a.checkpoint],
        vec![a.seed],
    )?;
    println!("{} heatmaps written", summary.len());
    Ok(())
}

fn read_pairs(path: &Path) -> CliResult<PairedAccuracies> {
    if !path.is_file() {
        return Err(CliError::usage(format!(
            "pairs file not found: {}",
            path.display()
        )));
    }
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.len() != 3 {
        return Err(CliError::io(format!(
            "{}: expected 3 columns (dataset, method a, method b), found {}",
            path.display(),
            header.len()
        )));
    }
    let (mut names, mut a, mut b) = (Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::io(format!("{}: bad number `{s}`", path.display())))
        };
        names.push(rec[0].to_string());
        a.push(parse(&rec[1])?);
        b.push(parse(&rec[2])?);
    }
    Ok(PairedAccuracies::new(&header[1], &header[2], names, a, b)?)
}

fn cmd_wilcoxon(a: &WilcoxonArgs) -> CliResult<()> {
    let pairs = read_pairs(&a.pairs)?;
    let r = wilcoxon_signed_rank(&pairs)?;
    println!(
        "{} vs {}: n={} W+={} W-={} statistic={} p={} ({:?})",
        pairs.method_a, pairs.method_b, r.n, r.w_plus, r.w_minus, r.statistic, r.p_value, r.method
    );
    if let Some(out) = &a.out {
        ensure_dir(out)?;
        write_json(
            &out.join("wilcoxon.json"),
            &json!({ "method_a": pairs.method_a, "method_b": pairs.method_b, "result": r }),
        )?;
    }
    Ok(())
}

fn cmd_replay(a: &ReplayArgs) -> CliResult<()> {
    let manifest: RunManifest = read_json(&a.manifest)?;
    let mut args = manifest.args.clone();
    if let Some(out) = &a.out {
        let pos = args
            .iter()
            .position(|s| s == "--out")
            .ok_or_else(|| CliError::usage("recorded command has no --out"))?;
        args[pos + 1] = out.display().to_string();
    }
    let mut argv = vec!["gvt".to_string()];
    argv.extend(args.iter().cloned());
    let cli = Cli::try_parse_from(&argv).map_err(|e| CliError::usage(format!("manifest args: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(CliError::usage("a manifest cannot replay another replay"));
    }
    run(cli, args)
}

fn cmd_synth(a: &SynthArgs) -> CliResult<()> {
    let data = match a.kind {
        SynthKind::Csbm => {
            let p = CsbmParams {
                num_nodes: a.nodes,
                num_features: a.features,
                num_classes: a.classes,
                homophily: a.homophily,
                train_per_class: 20.min(a.nodes / (4 * a.classes.max(1))).max(1),
                num_val: 150.min(a.nodes / 4),
                ..CsbmParams::default()
            };
            csbm(&p, a.seed)?
        }
        SynthKind::HopChain => hop_chain(a.nodes, a.distance, 0.3, a.seed)?,
        SynthKind::Path => path_fixture(),
    };
    save_dataset(&data, &a.out)?;
    println!(
        "{}: {} nodes, {} edges, {} features, {} classes",
        data.name,
        data.graph.num_nodes(),
        data.graph.num_edges(),
        data.features.num_features(),
        data.num_classes()
    );
    Ok(())
}
