//! Prediction matrices and arithmetic-mean late fusion.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::path::Path;

use ndarray::{Array2, Zip};

use crate::data::{check_emotion_header, emotion_header, read_matrix_csv, write_matrix_csv, N_EMOTIONS};
use crate::error::{Error, Result};

/// Continuous per-emotion predictions for a list of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    source_name: String,
    sample_ids: Vec<String>,
    values: Array2<f64>,
}

impl PredictionMatrix {
    pub fn new(
        source_name: impl Into<String>,
        sample_ids: Vec<String>,
        values: Array2<f64>,
    ) -> Result<Self> {
        if values.ncols() != N_EMOTIONS {
            return Err(Error::invalid(
                "prediction matrix",
                format!("expected {N_EMOTIONS} columns, got {}", values.ncols()),
            ));
        }
        if sample_ids.len() != values.nrows() {
            return Err(Error::invalid(
                "prediction matrix",
                format!("{} sample ids for {} rows", sample_ids.len(), values.nrows()),
            ));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = sample_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::invalid("prediction matrix", format!("duplicate sample_id '{dup}'")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("prediction matrix", "non-finite prediction"));
        }
        Ok(PredictionMatrix {
            source_name: source_name.into(),
            sample_ids,
            values,
        })
    }

    pub fn source_name(&self) -> &str {
        &self.source_name
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    pub fn with_source_name(mut self, name: impl Into<String>) -> Self {
        self.source_name = name.into();
        self
    }

    /// Same header as the label CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_matrix_csv(path, &emotion_header(), &self.sample_ids, &self.values)
    }

    pub fn load_csv(path: &Path, source_name: impl Into<String>) -> Result<Self> {
        let (ids, values) = read_matrix_csv(path, check_emotion_header)?;
        PredictionMatrix::new(source_name, ids, values).map_err(|e| Error::load(path, e.to_string()))
    }
}

/// Orders sources by name; equal names fall back to comparing magnitudes
/// so the order does not depend on the caller's ordering.
fn canonical_order(a: &PredictionMatrix, b: &PredictionMatrix) -> Ordering {
    a.source_name.cmp(&b.source_name).then_with(|| {
        a.values
            .iter()
            .zip(b.values.iter())
            .map(|(x, y)| x.abs().total_cmp(&y.abs()).then(x.total_cmp(y)))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Pairwise sum over a fixed binary tree.
fn tree_sum(items: &[&PredictionMatrix]) -> Array2<f64> {
    match items {
        [one] => one.values.clone(),
        _ => {
            let (left, right) = items.split_at(items.len() / 2);
            tree_sum(left) + tree_sum(right)
        }
    }
}

/// Elementwise arithmetic mean of predictions over identical samples.
///
/// Sources are summed in canonical name order so the result is bit-identical
/// for any input order. Each cell is clamped into the `[min, max]` of its
/// inputs to absorb the rounding of the final division.
pub fn fuse_mean(predictions: &[PredictionMatrix]) -> Result<PredictionMatrix> {
    let first = predictions
        .first()
        .ok_or_else(|| Error::Fusion("no prediction matrices to fuse".into()))?;
    for p in &predictions[1..] {
        if p.sample_ids != first.sample_ids {
            return Err(Error::Fusion(format!(
                "sources '{}' and '{}' cover different samples or orders",
                first.source_name, p.source_name
            )));
        }
        if p.values.dim() != first.values.dim() {
            return Err(Error::Fusion(format!(
                "sources '{}' and '{}' have different shapes",
                first.source_name, p.source_name
            )));
        }
    }

    let mut sorted: Vec<&PredictionMatrix> = predictions.iter().collect();
    sorted.sort_by(|a, b| canonical_order(a, b));

    let k = sorted.len() as f64;
    let mut mean = tree_sum(&sorted);
    mean.mapv_inplace(|s| s / k);

    let mut lo = first.values.clone();
    let mut hi = first.values.clone();
    for p in &predictions[1..] {
        Zip::from(&mut lo).and(&mut hi).and(&p.values).for_each(|l, h, &v| {
            *l = l.min(v);
            *h = h.max(v);
        });
    }
    Zip::from(&mut mean)
        .and(&lo)
        .and(&hi)
        .for_each(|m, &l, &h| *m = m.clamp(l, h));

    let names: Vec<&str> = sorted.iter().map(|p| p.source_name.as_str()).collect();
    PredictionMatrix::new(
        format!("fusion({})", names.join(",")),
        first.sample_ids.clone(),
        mean,
    )
    .map_err(|e| Error::Fusion(e.to_string()))
}
