//! Per-emotion linear regressors bundled with their scaler.

use std::path::Path;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureTable, LabelTable, EMOTIONS, N_EMOTIONS};
use crate::error::{Error, Result};
use crate::fusion::PredictionMatrix;
use crate::json;
use crate::scaler::{fit_scaler, ScalerKind, ScalerParams};
use crate::svr::{train_svr, SvrHyperparams};

pub const BUNDLE_EXTENSION: &str = "svrbundle.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionModel {
    pub emotion: String,
    pub weights: Vec<f64>,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub n_train: usize,
    pub objective_value: Vec<f64>,
    pub iterations_used: Vec<usize>,
    pub converged: Vec<bool>,
}

/// Everything needed to predict the 9 emotion shares from one upstream
/// model's raw features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModelBundle {
    pub model_name: String,
    pub scaler: ScalerParams,
    pub per_emotion: Vec<EmotionModel>,
    pub hyperparams: SvrHyperparams,
    pub feature_dim: usize,
    pub training_meta: TrainingMeta,
}

impl LinearModelBundle {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid("model bundle", reason));
        if self.per_emotion.len() != N_EMOTIONS {
            return bad(format!("{} per-emotion entries, expected {N_EMOTIONS}", self.per_emotion.len()));
        }
        for (m, name) in self.per_emotion.iter().zip(EMOTIONS) {
            if m.emotion != name {
                return bad(format!("emotion '{}' where '{name}' was expected", m.emotion));
            }
            if m.weights.len() != self.feature_dim {
                return bad(format!(
                    "{name} has {} weights for feature_dim {}",
                    m.weights.len(),
                    self.feature_dim
                ));
            }
            if !m.intercept.is_finite() || m.weights.iter().any(|w| !w.is_finite()) {
                return bad(format!("{name} has non-finite parameters"));
            }
        }
        if self.scaler.dim() != self.feature_dim {
            return bad(format!(
                "scaler dimension {} differs from feature_dim {}",
                self.scaler.dim(),
                self.feature_dim
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        json::to_string(self).map_err(|e| Error::invalid("model bundle", e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let b: LinearModelBundle =
            serde_json::from_str(text).map_err(|e| Error::invalid("model bundle", e.to_string()))?;
        b.validate()?;
        Ok(b)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        json::write(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let b: LinearModelBundle = json::read(path)?;
        b.validate().map_err(|e| Error::load(path, e.to_string()))?;
        Ok(b)
    }
}

/// Fits the scaler on the training rows and one regressor per emotion.
pub fn train_bundle(
    features: &FeatureTable,
    labels: &LabelTable,
    scaler_kind: ScalerKind,
    hp: &SvrHyperparams,
) -> Result<LinearModelBundle> {
    if features.sample_ids() != labels.sample_ids() {
        return Err(Error::Alignment(format!(
            "feature table '{}' and labels are not row-aligned",
            features.model_name()
        )));
    }
    hp.validate()?;
    let scaler = fit_scaler(scaler_kind, features.values().view())?;
    let x = scaler.transform(features.values().view())?;
    let fits = (0..N_EMOTIONS)
        .into_par_iter()
        .map(|k| train_svr(x.view(), labels.values().column(k), hp))
        .collect::<Result<Vec<_>>>()?;

    let training_meta = TrainingMeta {
        n_train: features.len(),
        objective_value: fits.iter().map(|f| f.objective).collect(),
        iterations_used: fits.iter().map(|f| f.epochs).collect(),
        converged: fits.iter().map(|f| f.converged).collect(),
    };
    let per_emotion = fits
        .into_iter()
        .zip(EMOTIONS)
        .map(|(f, name)| EmotionModel {
            emotion: name.to_string(),
            weights: f.weights,
            intercept: f.intercept,
        })
        .collect();
    Ok(LinearModelBundle {
        model_name: features.model_name().to_string(),
        scaler,
        per_emotion,
        hyperparams: *hp,
        feature_dim: features.dim(),
        training_meta,
    })
}

/// Raw continuous predictions: no clipping, no row re-normalization.
pub fn predict(bundle: &LinearModelBundle, features: &FeatureTable) -> Result<PredictionMatrix> {
    if features.dim() != bundle.feature_dim {
        return Err(Error::Shape(format!(
            "bundle '{}' expects {} features, table '{}' has {}",
            bundle.model_name,
            bundle.feature_dim,
            features.model_name(),
            features.dim()
        )));
    }
    let x = bundle.scaler.transform(features.values().view())?;
    let mut weights = Array2::<f64>::zeros((bundle.feature_dim, N_EMOTIONS));
    for (k, m) in bundle.per_emotion.iter().enumerate() {
        weights.column_mut(k).assign(&ndarray::ArrayView1::from(&m.weights));
    }
    let mut values = x.dot(&weights);
    for (mut col, m) in values.axis_iter_mut(Axis(1)).zip(&bundle.per_emotion) {
        col += m.intercept;
    }
    PredictionMatrix::new(
        bundle.model_name.clone(),
        features.sample_ids().to_vec(),
        values,
    )
}
