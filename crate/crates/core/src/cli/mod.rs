//! The `emoshare` command line.
//!
//! Every command is a pure function of its inputs: rerunning it writes the
//! same bytes. Grid runs cache trained bundles under
//! `<out>/cache/<model>/<data fingerprint>/<config key>.svrbundle.json`,
//! so an interrupted or repeated grid only trains what is missing.

mod config;
mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

pub use config::{parse_c_value, parse_named_path, ConfigFile, GridAxes, RunConfig, ScoringChoice};
pub use report::{find_reports, Consolidated};

use crate::data::{
    align, load_feature_table, load_label_table, load_partition, normalize_label_rows,
    FeatureTable, LabelTable, Split,
};
use crate::error::{Error, Result};
use crate::fusion::{fuse_mean, PredictionMatrix};
use crate::json;
use crate::metrics::{evaluate, Provenance, REPORT_EXTENSION};
use crate::model::{predict, LinearModelBundle, BUNDLE_EXTENSION};
use crate::selection::{collect_result, train_configs, Holdout, Scoring, GRID_RESULT_EXTENSION};
use crate::svr::SvrHyperparams;
use crate::synth::{generate_synthetic, SyntheticSpec};

#[derive(Debug, Parser)]
#[command(name = "emoshare", version, about = "Emotion-share regression over embedding features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset: one feature CSV per model, labels and partition.
    Synth(SynthArgs),
    /// Grid-search per-emotion SVR bundles for every feature table.
    Grid(GridArgs),
    /// Predict one split with a trained bundle.
    Predict(PredictArgs),
    /// Average prediction CSVs elementwise.
    Fuse(FuseArgs),
    /// Per-emotion Spearman rho of predictions against labels.
    Evaluate(EvaluateArgs),
    /// Consolidate every evaluation report under a run directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    models: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 200)]
    train: usize,
    #[arg(long, default_value_t = 80)]
    dev: usize,
    #[arg(long, default_value_t = 80)]
    test: usize,
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// JSON run configuration; flags given here override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Feature table as NAME=PATH; repeat for every upstream model.
    #[arg(long = "features", value_parser = parse_named_path)]
    features: Vec<(String, PathBuf)>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    partition: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    scoring: Option<ScoringChoice>,
    /// Comma-separated C values.
    #[arg(long = "c-grid", value_delimiter = ',', value_parser = parse_c_value)]
    c_grid: Vec<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Solver seed for the dual coordinate order.
    #[arg(long)]
    seed: Option<u64>,
    /// Divide each label row by its maximum before training.
    #[arg(long = "normalize-labels")]
    normalize_labels: bool,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    partition: PathBuf,
    #[arg(long, default_value_t = Split::Dev)]
    split: Split,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FuseArgs {
    /// Prediction CSVs; source names are the file stems.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    partition: PathBuf,
    #[arg(long, default_value_t = Split::Dev)]
    split: Split,
    /// Report path; a plain-text table is written next to it.
    #[arg(long)]
    out: PathBuf,
    /// Source name recorded in the report (default: predictions file stem).
    #[arg(long)]
    source: Option<String>,
    /// Scoring metric the evaluated bundle was selected with.
    #[arg(long)]
    scoring: Option<Scoring>,
    /// Bundle that produced the predictions, recorded as provenance.
    #[arg(long)]
    bundle: Option<PathBuf>,
    #[arg(long = "normalize-labels")]
    normalize_labels: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long = "run-dir")]
    run_dir: PathBuf,
    /// Also write the table to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Entry point of the binary; returns the process exit code.
pub fn main() -> i32 {
    run_args(std::env::args_os())
}

pub fn run_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => cmd_synth(a),
        Command::Grid(a) => cmd_grid(resolve_run_config(a)?),
        Command::Predict(a) => cmd_predict(a),
        Command::Fuse(a) => cmd_fuse(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        n_train: a.train,
        n_dev: a.dev,
        n_test: a.test,
        n_models: a.models,
        dim: a.dim,
        noise_scale: a.noise,
        seed: a.seed,
    };
    spec.validate()?;
    let data = generate_synthetic(&spec)?;
    create_dir(&a.out)?;

    let mut written = Vec::new();
    for table in &data.features {
        let path = a.out.join(format!("features_{}.csv", table.model_name()));
        table.write_csv(&path)?;
        written.push(path);
    }
    let labels = a.out.join("labels.csv");
    data.labels.write_csv(&labels)?;
    written.push(labels);
    let partition = a.out.join("partition.csv");
    data.partition.write_csv(&partition)?;
    written.push(partition);

    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn resolve_run_config(a: GridArgs) -> Result<RunConfig> {
    let file = match &a.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let missing = |flag: &str| Error::invalid("arguments", format!("{flag} is required (flag or config file)"));

    let feature_paths = if a.features.is_empty() {
        file.feature_paths.unwrap_or_default()
    } else {
        let mut map = std::collections::BTreeMap::new();
        for (name, path) in a.features {
            if map.insert(name.clone(), path).is_some() {
                return Err(Error::invalid("arguments", format!("feature name '{name}' given twice")));
            }
        }
        map
    };

    let mut grid = file.grid.unwrap_or_default();
    if !a.c_grid.is_empty() {
        grid.c_values = a.c_grid;
    }

    let over = file.hp_base.unwrap_or_default();
    let defaults = SvrHyperparams::default();
    let hp_base = SvrHyperparams {
        epsilon: a.epsilon.or(over.epsilon).unwrap_or(defaults.epsilon),
        max_iter: a.max_iter.or(over.max_iter).unwrap_or(defaults.max_iter),
        tol: a.tol.or(over.tol).unwrap_or(defaults.tol),
        seed: a.seed.or(over.seed).unwrap_or(defaults.seed),
        ..defaults
    };

    let cfg = RunConfig {
        feature_paths,
        label_path: a.labels.or(file.label_path).ok_or_else(|| missing("--labels"))?,
        partition_path: a
            .partition
            .or(file.partition_path)
            .ok_or_else(|| missing("--partition"))?,
        output_dir: a.out.or(file.output_dir).ok_or_else(|| missing("--out"))?,
        grid,
        scoring: a.scoring.or(file.scoring).unwrap_or(ScoringChoice::Both),
        hp_base,
        normalize_labels: a.normalize_labels || file.normalize_labels.unwrap_or(false),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn load_labels(path: &Path, normalize: bool) -> Result<LabelTable> {
    let labels = load_label_table(path)?;
    if normalize {
        normalize_label_rows(&labels)
    } else {
        Ok(labels)
    }
}

/// Hash of exactly what training sees, so cached bundles follow the data.
fn data_fingerprint(features: &FeatureTable, labels: &LabelTable) -> String {
    let mut h = Sha256::new();
    for id in features.sample_ids() {
        h.update(id.as_bytes());
        h.update([0]);
    }
    h.update((features.dim() as u64).to_le_bytes());
    for v in features.values().iter().chain(labels.values().iter()) {
        h.update(v.to_bits().to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

fn cmd_grid(cfg: RunConfig) -> Result<()> {
    let out = cfg.output_dir.clone();
    create_dir(&out)?;
    json::write(&out.join("effective_config.json"), &cfg)?;

    let tables = cfg
        .feature_paths
        .iter()
        .map(|(name, path)| load_feature_table(path, name))
        .collect::<Result<Vec<_>>>()?;
    let labels = load_labels(&cfg.label_path, cfg.normalize_labels)?;
    let partition = load_partition(&cfg.partition_path)?;
    let data = align(&tables, &labels, &partition)?;

    let metrics = cfg.scoring.metrics();
    let configs = cfg.grid.spec(metrics[0]).configs();

    for (train, dev) in data.train.features.iter().zip(&data.dev.features) {
        let name = train.model_name();
        let holdout = Holdout {
            train_features: train,
            train_labels: &data.train.labels,
            dev_features: dev,
            dev_labels: &data.dev.labels,
        };
        let cache = out
            .join("cache")
            .join(name)
            .join(data_fingerprint(train, &data.train.labels));
        let cached = |key: &str| -> Option<LinearModelBundle> {
            LinearModelBundle::load(&cache.join(format!("{key}.{BUNDLE_EXTENSION}"))).ok()
        };
        let trained = train_configs(holdout, &configs, &cfg.hp_base, &cached)?;

        create_dir(&cache)?;
        for t in &trained {
            match &t.outcome {
                Ok(ev) => {
                    let path = cache.join(format!("{}.{BUNDLE_EXTENSION}", t.key));
                    if !path.exists() {
                        ev.bundle.save(&path)?;
                    }
                    let stalled = ev.bundle.training_meta.converged.iter().filter(|c| !**c).count();
                    if stalled > 0 {
                        eprintln!(
                            "warning: {name} {}: {stalled} of 9 regressors hit max_iter",
                            t.config.label()
                        );
                    }
                }
                Err(e) => eprintln!("warning: {name} {} failed: {e}", t.config.label()),
            }
        }

        let model_dir = out.join(name);
        create_dir(&model_dir)?;
        for &scoring in &metrics {
            let result = collect_result(name, &trained, scoring)?;
            json::write(
                &model_dir.join(format!("{scoring}.{GRID_RESULT_EXTENSION}")),
                &result,
            )?;
            result
                .best_bundle
                .save(&model_dir.join(format!("{scoring}.{BUNDLE_EXTENSION}")))?;
            let best = result.best();
            println!(
                "{name} {scoring}: best {} (dev score {:.6}, dev rho {:.4})",
                best.config.label(),
                best.dev_score,
                best.dev_spearman.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let bundle = LinearModelBundle::load(&a.bundle)?;
    let table = load_feature_table(&a.features, &bundle.model_name)?;
    let partition = load_partition(&a.partition)?;
    let ids = partition.ids_in(a.split);
    let rows = table.select(&ids)?;
    let pred = predict(&bundle, &rows)?;
    create_parent(&a.out)?;
    pred.write_csv(&a.out)?;
    println!("{}", a.out.display());
    Ok(())
}

/// File name without `.gz` and `.csv`.
fn source_stem(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let name = name.strip_suffix(".gz").unwrap_or(&name);
    name.strip_suffix(".csv").unwrap_or(name).to_string()
}

fn cmd_fuse(a: FuseArgs) -> Result<()> {
    let preds = a
        .inputs
        .iter()
        .map(|p| PredictionMatrix::load_csv(p, source_stem(p)))
        .collect::<Result<Vec<_>>>()?;
    let fused = fuse_mean(&preds)?;
    create_parent(&a.out)?;
    fused.write_csv(&a.out)?;
    println!("{} -> {}", fused.source_name(), a.out.display());
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let source = a.source.clone().unwrap_or_else(|| source_stem(&a.predictions));
    let pred = PredictionMatrix::load_csv(&a.predictions, source)?;
    let labels = load_labels(&a.labels, a.normalize_labels)?;
    let partition = load_partition(&a.partition)?;
    let ids = partition.ids_in(a.split);

    let position: std::collections::HashMap<&str, usize> = pred
        .sample_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let missing: Vec<&String> = ids.iter().filter(|id| !position.contains_key(id.as_str())).collect();
    if !missing.is_empty() || pred.len() != ids.len() {
        let shown: Vec<&String> = missing.iter().take(20).copied().collect();
        return Err(Error::Alignment(format!(
            "predictions '{}' do not cover exactly the {} split: {} rows for {} split ids, {} missing {:?}",
            a.predictions.display(),
            a.split,
            pred.len(),
            ids.len(),
            missing.len(),
            shown
        )));
    }
    let order: Vec<usize> = ids.iter().map(|id| position[id.as_str()]).collect();
    let pred = PredictionMatrix::new(
        pred.source_name(),
        ids.clone(),
        pred.values().select(ndarray::Axis(0), &order),
    )?;
    let labels = labels.select(&ids)?;

    let mut report = evaluate(&pred, &labels)?;
    report.provenance = Provenance {
        split: Some(a.split),
        scoring: a.scoring.map(|s| s.to_string()),
        config: match &a.bundle {
            Some(p) => {
                let b = LinearModelBundle::load(p)?;
                Some(format!(
                    "{}/{}/C={:e}",
                    b.scaler.kind(),
                    if b.hyperparams.dual { "dual" } else { "primal" },
                    b.hyperparams.c
                ))
            }
            None => None,
        },
    };

    if !a.out.to_string_lossy().ends_with(&format!(".{REPORT_EXTENSION}")) {
        eprintln!("warning: report files are found by the .{REPORT_EXTENSION} suffix");
    }
    create_parent(&a.out)?;
    json::write(&a.out, &report)?;
    let table = report.to_table();
    let txt = a.out.with_extension("txt");
    std::fs::write(&txt, &table).map_err(|e| Error::io(&txt, e))?;
    print!("{table}");
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let text = Consolidated::from_dir(&a.run_dir)?.to_text();
    if let Some(out) = &a.out {
        create_parent(out)?;
        std::fs::write(out, &text).map_err(|e| Error::io(out, e))?;
    }
    print!("{text}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems() {
        assert_eq!(source_stem(Path::new("a/m1.csv.gz")), "m1");
        assert_eq!(source_stem(Path::new("m2.csv")), "m2");
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_args(["emoshare", "synth", "--out", "/nonexistent/x", "--train", "0"]), 2);
        assert_eq!(run_args(["emoshare", "bogus"]), 2);
        assert_eq!(run_args(["emoshare", "grid", "--features", "m=x.csv"]), 2);
    }
}
