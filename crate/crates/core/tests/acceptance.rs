//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Set `EMOSHARE_BLESS=1` to rewrite the frozen end-to-end report.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use emoshare::json;
use emoshare::selection::{select_best, GRID_RESULT_EXTENSION};
use emoshare::svr::{primal_objective, train_svr_traced};
use emoshare::{
    align, fuse_mean, generate_synthetic, grid_search, spearman, GridResult, GridSpec, Holdout,
    PredictionMatrix, Scoring, SvrHyperparams, SyntheticSpec,
};
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: u64) -> Result<(), String> {
    check(elapsed.as_secs_f64() < limit_s as f64, || {
        format!("took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64())
    })
}

// ---------------------------------------------------------------- spearman

/// Rank by counting: 1 + #smaller + (#equal - 1) / 2.
fn oracle_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&u| u < v).count() as f64;
            let equal = x.iter().filter(|&&u| u == v).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

fn oracle_spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    let (rx, ry) = (oracle_ranks(x), oracle_ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

fn spearman_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = [-1.0, 0.0, 0.5, 2.0, 3.5];
    let (mut worst, mut no_ties, mut undefined) = (0.0f64, 0usize, 0usize);
    let pairs = 20_000;
    for _ in 0..pairs {
        let n = rng.random_range(2..=7);
        let x: Vec<f64> = (0..n).map(|_| grid[rng.random_range(0..5)]).collect();
        let y: Vec<f64> = (0..n).map(|_| grid[rng.random_range(0..5)]).collect();
        let got = spearman(&x, &y).map_err(|e| e.to_string())?;
        match (got, oracle_spearman(&x, &y)) {
            (None, None) => undefined += 1,
            (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
            (a, b) => return Err(format!("{x:?} {y:?}: got {a:?}, oracle {b:?}")),
        }
    }
    // Distinct values: the closed form applies.
    for _ in 0..pairs / 2 {
        let n = rng.random_range(2..=7);
        let mut x: Vec<f64> = (0..n).map(|i| i as f64 * 1.5 - 2.0).collect();
        let mut y = x.clone();
        x.shuffle(&mut rng);
        y.shuffle(&mut rng);
        let (rx, ry) = (oracle_ranks(&x), oracle_ranks(&y));
        let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
        let nf = n as f64;
        let closed = 1.0 - 6.0 * d2 / (nf * (nf * nf - 1.0));
        let got = spearman(&x, &y).map_err(|e| e.to_string())?.ok_or("undefined on distinct values")?;
        worst = worst.max((got - closed).abs());
        no_ties += 1;
    }
    check(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    within(start.elapsed(), 10)?;
    Ok(format!(
        "{pairs} grid pairs ({undefined} undefined on both sides) + {no_ties} tie-free pairs, max deviation {worst:.1e}, {:.2}s",
        start.elapsed().as_secs_f64()
    ))
}

// ------------------------------------------------------------------ solver

fn tiny_problem(rng: &mut ChaCha8Rng) -> (Array2<f64>, Array1<f64>, f64) {
    let n = rng.random_range(5..=30);
    let d = rng.random_range(1..=5);
    let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-3.0..3.0));
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let y = Array1::from_shape_fn(n, |i| {
        (0..d).map(|j| w[j] * x[[i, j]]).sum::<f64>() + 0.5 + rng.random_range(-0.3..0.3)
    });
    let c = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6][rng.random_range(0..5)];
    (x, y, c)
}

fn solver_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let base = SvrHyperparams::default();
    let mut worst = 0.0f64;
    for p in 0..25 {
        let (x, y, c) = tiny_problem(&mut rng);
        let run = |dual: bool, long: bool| {
            let hp = SvrHyperparams {
                c,
                dual,
                max_iter: if long { base.max_iter * 100 } else { base.max_iter },
                tol: if long { 1e-10 } else { base.tol },
                ..base
            };
            train_svr_traced(x.view(), y.view(), &hp).map_err(|e| format!("problem {p}: {e}"))
        };
        let (dual, dual_trace) = run(true, false)?;
        let (primal, primal_trace) = run(false, false)?;
        let (dual_long, _) = run(true, true)?;
        let (primal_long, _) = run(false, true)?;

        // Cross-path: each path is judged against the other path's long run.
        for (name, fit, oracle) in [
            ("dual", &dual, primal_long.objective),
            ("primal", &primal, dual_long.objective),
        ] {
            let f = primal_objective(x.view(), y.view(), &fit.weights, fit.intercept, c, 0.0);
            let rel = (f - oracle) / oracle.abs();
            worst = worst.max(rel.abs());
            check(rel.abs() <= 1e-3, || {
                format!("problem {p} (C={c:e}) {name}: F={f:e} oracle={oracle:e} rel={rel:e}")
            })?;
        }
        for w in dual_trace.windows(2) {
            check(w[1] >= w[0] - 1e-12 * w[1].abs(), || {
                format!("problem {p}: dual objective fell {} -> {}", w[0], w[1])
            })?;
        }
        for w in primal_trace.windows(2) {
            check(w[1] <= w[0], || {
                format!("problem {p}: primal objective rose {} -> {}", w[0], w[1])
            })?;
        }
    }
    within(start.elapsed(), 60)?;
    Ok(format!(
        "25 problems, both paths, worst relative gap to cross-path oracle {worst:.1e}, traces monotone, {:.2}s",
        start.elapsed().as_secs_f64()
    ))
}

// ------------------------------------------------------------------ fusion

fn random_set(rng: &mut ChaCha8Rng) -> Vec<PredictionMatrix> {
    let rows = rng.random_range(1..=12);
    let k = rng.random_range(1..=9);
    let ids: Vec<String> = (0..rows).map(|i| format!("s{i:02}")).collect();
    (0..k)
        .map(|m| {
            let values = Array2::from_shape_fn((rows, 9), |_| {
                // Mix of magnitudes and exact ties.
                match rng.random_range(0..4) {
                    0 => 0.25,
                    1 => rng.random_range(-1e3..1e3),
                    _ => rng.random_range(-1.0..1.0),
                }
            });
            PredictionMatrix::new(format!("m{m}"), ids.clone(), values).unwrap()
        })
        .collect()
}

fn fusion_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for s in 0..1000 {
        let set = random_set(&mut rng);
        let fused = fuse_mean(&set).map_err(|e| e.to_string())?;

        let mut shuffled = set.clone();
        shuffled.shuffle(&mut rng);
        check(fuse_mean(&shuffled).unwrap().values() == fused.values(), || {
            format!("set {s}: permutation changed the result")
        })?;

        for ((r, c), &v) in fused.values().indexed_iter() {
            let lo = set.iter().map(|p| p.values()[[r, c]]).fold(f64::INFINITY, f64::min);
            let hi = set.iter().map(|p| p.values()[[r, c]]).fold(f64::NEG_INFINITY, f64::max);
            check(lo <= v && v <= hi, || format!("set {s}: {v} outside [{lo}, {hi}]"))?;
        }

        let replicas: Vec<PredictionMatrix> = (0..rng.random_range(1..=9))
            .map(|i| set[0].clone().with_source_name(format!("r{i}")))
            .collect();
        check(fuse_mean(&replicas).unwrap().values() == set[0].values(), || {
            format!("set {s}: replicas not idempotent")
        })?;

        for alpha in [2.0, 0.5, -4.0, 0.125] {
            let scaled: Vec<PredictionMatrix> = set
                .iter()
                .map(|p| {
                    PredictionMatrix::new(p.source_name(), p.sample_ids().to_vec(), p.values() * alpha)
                        .unwrap()
                })
                .collect();
            let lhs = fuse_mean(&scaled).unwrap();
            check(*lhs.values() == fused.values() * alpha, || {
                format!("set {s}: fuse(alpha P) != alpha fuse(P) for alpha={alpha}")
            })?;
        }
    }
    Ok("1000 sets: permutation invariance, min/max bounds, replica idempotence, homogeneity under power-of-two scaling".into())
}

// ------------------------------------------------------------- end to end

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_emoshare"))
}

fn run(cmd: &mut Command) -> Result<String, String> {
    let out = cmd.output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "{:?} exited {:?}: {}",
            cmd,
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

const MODELS: usize = 9;

fn model_names() -> Vec<String> {
    (0..MODELS).map(emoshare::synth::synthetic_model_name).collect()
}

/// synth -> grid -> predict -> fuse -> evaluate -> report under `root`.
fn pipeline(root: &Path) -> Result<String, String> {
    let data = root.join("data");
    let out = root.join("run");
    run(bin().args(["synth", "--seed", "42", "--models", "9", "--noise", "0.3", "--out"]).arg(&data))?;

    let labels = data.join("labels.csv");
    let partition = data.join("partition.csv");
    let mut grid = bin();
    grid.arg("grid").arg("--out").arg(&out).arg("--labels").arg(&labels).arg("--partition").arg(&partition);
    for m in model_names() {
        grid.arg("--features")
            .arg(format!("{m}={}", data.join(format!("features_{m}.csv")).display()));
    }
    run(&mut grid)?;

    for s in ["nmae", "nmse"] {
        let mut preds = Vec::new();
        for m in model_names() {
            let bundle = out.join(&m).join(format!("{s}.svrbundle.json"));
            let pred = out.join("pred").join(s).join(format!("{m}.csv"));
            run(bin()
                .arg("predict")
                .arg("--bundle")
                .arg(&bundle)
                .arg("--features")
                .arg(data.join(format!("features_{m}.csv")))
                .arg("--partition")
                .arg(&partition)
                .args(["--split", "dev", "--out"])
                .arg(&pred))?;
            run(bin()
                .arg("evaluate")
                .arg("--predictions")
                .arg(&pred)
                .arg("--labels")
                .arg(&labels)
                .arg("--partition")
                .arg(&partition)
                .args(["--split", "dev", "--scoring", s, "--bundle"])
                .arg(&bundle)
                .arg("--out")
                .arg(out.join("eval").join(s).join(format!("{m}.evalreport.json"))))?;
            preds.push(pred);
        }
        let fused = out.join("fused").join(format!("{s}.csv"));
        run(bin().arg("fuse").args(&preds).arg("--out").arg(&fused))?;
        run(bin()
            .arg("evaluate")
            .arg("--predictions")
            .arg(&fused)
            .arg("--source")
            .arg(format!("fusion({})", model_names().join(",")))
            .arg("--labels")
            .arg(&labels)
            .arg("--partition")
            .arg(&partition)
            .args(["--split", "dev", "--scoring", s, "--out"])
            .arg(out.join("eval").join(s).join("fusion.evalreport.json")))?;
    }
    run(bin().arg("report").arg("--run-dir").arg(&out).arg("--out").arg(out.join("report.txt")))
}

fn golden_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/e2e_report.txt")
}

fn end_to_end(root: &Path) -> Outcome {
    let start = Instant::now();
    let report = pipeline(root)?;
    let elapsed = start.elapsed();
    within(elapsed, 300)?;

    let consolidated = emoshare::cli::Consolidated::from_dir(&root.join("run")).map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    for col in ["NMAE", "NMSE"] {
        let rho: BTreeMap<String, f64> = consolidated.mean_rho("dev", col);
        let (fused, singles): (Vec<_>, Vec<_>) = rho.iter().partition(|(k, _)| k.starts_with("fusion"));
        let fused = *fused.first().ok_or("no fusion report")?.1;
        let best_single = singles.iter().map(|(_, v)| **v).fold(f64::NEG_INFINITY, f64::max);
        check(singles.len() == MODELS, || format!("{col}: {} single-model rows", singles.len()))?;
        check(fused > best_single, || format!("{col}: fused {fused} <= best single {best_single}"))?;
        lines.push(format!("{col} fused {fused:.4} > best single {best_single:.4}"));
    }

    let golden = golden_path();
    if std::env::var_os("EMOSHARE_BLESS").is_some() {
        std::fs::create_dir_all(golden.parent().unwrap()).map_err(|e| e.to_string())?;
        std::fs::write(&golden, &report).map_err(|e| e.to_string())?;
        lines.push("golden report rewritten".into());
    } else {
        let frozen = std::fs::read_to_string(&golden).map_err(|e| format!("{}: {e}", golden.display()))?;
        check(frozen == report, || {
            format!("report differs from {}:\n{report}", golden.display())
        })?;
        lines.push("matches golden report".into());
    }
    Ok(format!("{}; {:.1}s", lines.join("; "), elapsed.as_secs_f64()))
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism(first: &Path, second: &Path) -> Outcome {
    pipeline(second)?;
    let (a, b) = (first.join("run"), second.join("run"));
    let (fa, fb) = (files_under(&a), files_under(&b));
    check(fa == fb, || "runs produced different file sets".into())?;
    let mut compared = 0;
    for rel in &fa {
        // Records absolute input and output paths.
        if rel == Path::new("effective_config.json") {
            continue;
        }
        let (x, y) = (std::fs::read(a.join(rel)).unwrap(), std::fs::read(b.join(rel)).unwrap());
        check(x == y, || format!("{} differs", rel.display()))?;
        compared += 1;
    }
    for rel in files_under(&first.join("data")) {
        check(
            std::fs::read(first.join("data").join(&rel)).unwrap()
                == std::fs::read(second.join("data").join(&rel)).unwrap(),
            || format!("data/{} differs", rel.display()),
        )?;
    }
    Ok(format!("{compared} bundles, grid results, predictions and reports byte-identical across two runs"))
}

fn grid_structure(root: &Path) -> Outcome {
    let mut n = 0;
    for m in model_names() {
        for s in Scoring::ALL {
            let path = root.join("run").join(&m).join(format!("{s}.{GRID_RESULT_EXTENSION}"));
            let r: GridResult = json::read(&path).map_err(|e| e.to_string())?;
            check(r.per_config.len() == 20, || format!("{m}/{s}: {} configs", r.per_config.len()))?;
            let scores: Vec<f64> = r.per_config.iter().map(|c| c.dev_score).collect();
            let argmax = select_best(&scores).ok_or("no finite score")?;
            let first_max = scores
                .iter()
                .position(|&v| v == scores.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .unwrap();
            check(argmax == first_max && argmax == r.best_index, || {
                format!("{m}/{s}: argmax {argmax}, first max {first_max}, recorded {}", r.best_index)
            })?;
            check(r.per_config[argmax].config == r.best_config, || format!("{m}/{s}: best_config mismatch"))?;
            n += 1;
        }
    }
    Ok(format!("{n} grid results with 20 configs each; recorded best equals argmax"))
}

// ------------------------------------------------------------- noiseless

fn noiseless() -> Outcome {
    let spec = SyntheticSpec {
        noise_scale: 0.0,
        n_models: 1,
        n_train: 500,
        ..SyntheticSpec::default()
    };
    let data = generate_synthetic(&spec).map_err(|e| e.to_string())?;
    let a = align(&data.features, &data.labels, &data.partition).map_err(|e| e.to_string())?;
    let holdout = Holdout {
        train_features: &a.train.features[0],
        train_labels: &a.train.labels,
        dev_features: &a.dev.features[0],
        dev_labels: &a.dev.labels,
    };
    let mut parts = Vec::new();
    for s in Scoring::ALL {
        let r = grid_search(holdout, &GridSpec::paper_grid(s), &SvrHyperparams::default())
            .map_err(|e| e.to_string())?;
        let rho = r.best().dev_spearman.ok_or("best config has no dev rho")?;
        check(rho >= 0.99, || format!("{s}: best {} dev rho {rho}", r.best_config.label()))?;
        parts.push(format!("{s} best {} dev rho {rho:.4}", r.best_config.label()));
    }
    Ok(format!("n_train 500, noise 0: {}", parts.join("; ")))
}

// ------------------------------------------------------------------- main

fn main() {
    let first = tempfile::tempdir().expect("tempdir");
    let second = tempfile::tempdir().expect("tempdir");

    let criteria: Vec<Criterion> = vec![
        ("spearman oracle equivalence", Box::new(spearman_oracle)),
        ("solver correctness", Box::new(solver_correctness)),
        ("fusion invariants", Box::new(fusion_invariants)),
        ("end-to-end fixture", Box::new(|| end_to_end(first.path()))),
        ("noiseless fixture", Box::new(noiseless)),
        ("determinism", Box::new(|| determinism(first.path(), second.path()))),
        ("grid structure", Box::new(|| grid_structure(first.path()))),
    ];

    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>())));
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {} failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
