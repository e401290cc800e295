//! Exhaustive hyperparameter grid search scored on the development split.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{FeatureTable, LabelTable};
use crate::error::{Error, Result};
use crate::fusion::PredictionMatrix;
use crate::json::score_or_null;
use crate::metrics::evaluate;
use crate::model::{predict, train_bundle, LinearModelBundle};
use crate::scaler::ScalerKind;
use crate::svr::SvrHyperparams;

pub const GRID_RESULT_EXTENSION: &str = "gridresult.json";

/// Decade steps spanning the searched C range.
pub const DEFAULT_C_GRID: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scoring {
    Nmae,
    Nmse,
}

impl Scoring {
    pub const ALL: [Scoring; 2] = [Scoring::Nmae, Scoring::Nmse];

    pub fn as_str(self) -> &'static str {
        match self {
            Scoring::Nmae => "nmae",
            Scoring::Nmse => "nmse",
        }
    }
}

impl fmt::Display for Scoring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scoring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nmae" => Ok(Scoring::Nmae),
            "nmse" => Ok(Scoring::Nmse),
            _ => Err(Error::invalid("scoring", format!("unknown scoring '{s}'"))),
        }
    }
}

/// Negative mean absolute (NMAE) or squared (NMSE) error over every cell of
/// the n x 9 matrix. Higher is better; 0 is perfect.
pub fn score(pred: &PredictionMatrix, labels: &LabelTable, scoring: Scoring) -> Result<f64> {
    if pred.sample_ids() != labels.sample_ids() || pred.values().dim() != labels.values().dim() {
        return Err(Error::Shape(format!(
            "predictions '{}' ({} rows) do not align with labels ({} rows)",
            pred.source_name(),
            pred.len(),
            labels.len()
        )));
    }
    let cells = pred.values().len();
    if cells == 0 {
        return Err(Error::Shape("cannot score an empty prediction matrix".into()));
    }
    let total: f64 = pred
        .values()
        .iter()
        .zip(labels.values().iter())
        .map(|(p, l)| match scoring {
            Scoring::Nmae => (p - l).abs(),
            Scoring::Nmse => (p - l) * (p - l),
        })
        .sum();
    Ok(-total / cells as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "C_values")]
    pub c_values: Vec<f64>,
    pub dual_options: Vec<bool>,
    pub scaler_kinds: Vec<ScalerKind>,
    pub scoring: Scoring,
}

impl GridSpec {
    /// Scaler x dual x C decades, one scoring metric.
    pub fn paper_grid(scoring: Scoring) -> Self {
        GridSpec {
            c_values: DEFAULT_C_GRID.to_vec(),
            dual_options: vec![true, false],
            scaler_kinds: vec![ScalerKind::Standard, ScalerKind::MinMax],
            scoring,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c_values.is_empty() || self.dual_options.is_empty() || self.scaler_kinds.is_empty()
        {
            return Err(Error::invalid("grid", "every axis needs at least one value"));
        }
        if let Some(c) = self.c_values.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
            return Err(Error::invalid("grid", format!("C value {c} is not positive")));
        }
        Ok(())
    }

    /// Cartesian product in enumeration order: scaler, then dual, then C
    /// descending.
    pub fn configs(&self) -> Vec<GridConfig> {
        let mut cs = self.c_values.clone();
        cs.sort_by(|a, b| b.total_cmp(a));
        let mut out = Vec::with_capacity(cs.len() * self.dual_options.len() * self.scaler_kinds.len());
        for &scaler in &self.scaler_kinds {
            for &dual in &self.dual_options {
                for &c in &cs {
                    out.push(GridConfig { scaler, dual, c });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub scaler: ScalerKind,
    pub dual: bool,
    #[serde(rename = "C")]
    pub c: f64,
}

impl GridConfig {
    pub fn hyperparams(&self, base: &SvrHyperparams) -> SvrHyperparams {
        SvrHyperparams {
            c: self.c,
            dual: self.dual,
            ..*base
        }
    }

    /// Stable key of this config together with the solver settings it is
    /// trained with.
    pub fn key(&self, base: &SvrHyperparams) -> String {
        let hp = self.hyperparams(base);
        let text = format!(
            "scaler={};dual={};C={:e};eps={:e};max_iter={};tol={:e};seed={}",
            self.scaler, hp.dual, hp.c, hp.epsilon, hp.max_iter, hp.tol, hp.seed
        );
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }

    pub fn label(&self) -> String {
        format!("{}/{}/C={:e}", self.scaler, if self.dual { "dual" } else { "primal" }, self.c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigOutcome {
    pub index: usize,
    pub config: GridConfig,
    pub config_key: String,
    /// `null` in JSON (negative infinity in memory) when training failed.
    #[serde(with = "score_or_null")]
    pub dev_score: f64,
    pub dev_spearman: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub model_name: String,
    pub scoring: Scoring,
    pub per_config: Vec<ConfigOutcome>,
    pub best_index: usize,
    pub best_config: GridConfig,
    pub best_bundle: LinearModelBundle,
}

impl GridResult {
    pub fn best(&self) -> &ConfigOutcome {
        &self.per_config[self.best_index]
    }
}

/// A trained (or failed) config with both error metrics, shared by the
/// per-scoring selections.
#[derive(Debug, Clone)]
pub struct TrainedConfig {
    pub config: GridConfig,
    pub key: String,
    pub outcome: std::result::Result<Evaluated, String>,
}

#[derive(Debug, Clone)]
pub struct Evaluated {
    pub bundle: LinearModelBundle,
    pub dev_predictions: PredictionMatrix,
    pub nmae: f64,
    pub nmse: f64,
    pub dev_spearman: f64,
}

impl Evaluated {
    pub fn score(&self, scoring: Scoring) -> f64 {
        match scoring {
            Scoring::Nmae => self.nmae,
            Scoring::Nmse => self.nmse,
        }
    }
}

/// Train/dev features and labels for one upstream model.
#[derive(Debug, Clone, Copy)]
pub struct Holdout<'a> {
    pub train_features: &'a FeatureTable,
    pub train_labels: &'a LabelTable,
    pub dev_features: &'a FeatureTable,
    pub dev_labels: &'a LabelTable,
}

impl Holdout<'_> {
    fn check(&self) -> Result<()> {
        if self.train_features.is_empty() || self.dev_features.is_empty() {
            return Err(Error::invalid("grid search", "train and dev splits must be non-empty"));
        }
        Ok(())
    }
}

/// Trains and evaluates one config on the holdout.
pub fn evaluate_config(
    data: Holdout<'_>,
    config: GridConfig,
    hp_base: &SvrHyperparams,
) -> Result<Evaluated> {
    let bundle = train_bundle(
        data.train_features,
        data.train_labels,
        config.scaler,
        &config.hyperparams(hp_base),
    )?;
    assess(data, bundle)
}

fn assess(data: Holdout<'_>, bundle: LinearModelBundle) -> Result<Evaluated> {
    let dev_predictions = predict(&bundle, data.dev_features)?;
    let dev_spearman = if dev_predictions.len() >= 2 {
        evaluate(&dev_predictions, data.dev_labels)?.mean_rho
    } else {
        0.0
    };
    Ok(Evaluated {
        nmae: score(&dev_predictions, data.dev_labels, Scoring::Nmae)?,
        nmse: score(&dev_predictions, data.dev_labels, Scoring::Nmse)?,
        dev_spearman,
        bundle,
        dev_predictions,
    })
}

/// Runs every config of `configs` (in parallel) and keeps outcomes in
/// enumeration order. `lookup` may supply an already trained bundle by key.
pub fn train_configs(
    data: Holdout<'_>,
    configs: &[GridConfig],
    hp_base: &SvrHyperparams,
    lookup: &(dyn Fn(&str) -> Option<LinearModelBundle> + Sync),
) -> Result<Vec<TrainedConfig>> {
    data.check()?;
    hp_base.validate()?;
    Ok(configs
        .par_iter()
        .map(|&config| {
            let key = config.key(hp_base);
            let outcome = match lookup(&key) {
                Some(bundle) => assess(data, bundle),
                None => evaluate_config(data, config, hp_base),
            };
            TrainedConfig {
                config,
                key,
                outcome: outcome.map_err(|e| e.to_string()),
            }
        })
        .collect())
}

/// Argmax of `dev_score`; the first maximal entry wins ties.
pub fn select_best(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s == f64::NEG_INFINITY {
            continue;
        }
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Builds the result for one scoring metric from trained configs.
pub fn collect_result(
    model_name: &str,
    trained: &[TrainedConfig],
    scoring: Scoring,
) -> Result<GridResult> {
    let per_config: Vec<ConfigOutcome> = trained
        .iter()
        .enumerate()
        .map(|(index, t)| match &t.outcome {
            Ok(ev) => ConfigOutcome {
                index,
                config: t.config,
                config_key: t.key.clone(),
                dev_score: ev.score(scoring),
                dev_spearman: Some(ev.dev_spearman),
                error: None,
            },
            Err(e) => ConfigOutcome {
                index,
                config: t.config,
                config_key: t.key.clone(),
                dev_score: f64::NEG_INFINITY,
                dev_spearman: None,
                error: Some(e.clone()),
            },
        })
        .collect();
    let scores: Vec<f64> = per_config.iter().map(|c| c.dev_score).collect();
    let Some(best_index) = select_best(&scores) else {
        let first = trained
            .iter()
            .find_map(|t| t.outcome.as_ref().err().cloned())
            .unwrap_or_else(|| "empty grid".into());
        return Err(Error::Search(format!("{model_name}: {first}")));
    };
    let best = &trained[best_index];
    let bundle = best
        .outcome
        .as_ref()
        .expect("best config trained successfully")
        .bundle
        .clone();
    Ok(GridResult {
        model_name: model_name.to_string(),
        scoring,
        best_config: best.config,
        best_index,
        best_bundle: bundle,
        per_config,
    })
}

/// Trains a bundle per config of `grid`, scores each on dev with
/// `grid.scoring` and keeps the best. Dev Spearman is recorded for reporting
/// only; it never drives the selection.
pub fn grid_search(
    data: Holdout<'_>,
    grid: &GridSpec,
    hp_base: &SvrHyperparams,
) -> Result<GridResult> {
    grid.validate()?;
    let trained = train_configs(data, &grid.configs(), hp_base, &|_| None)?;
    collect_result(data.train_features.model_name(), &trained, grid.scoring)
}
