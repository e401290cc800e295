//! Train-fitted feature scaling.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Divisors below this are replaced by 1.0.
pub const DEGENERATE_SPREAD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalerKind {
    Standard,
    #[serde(rename = "minmax")]
    MinMax,
}

impl ScalerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScalerKind::Standard => "standard",
            ScalerKind::MinMax => "minmax",
        }
    }
}

impl fmt::Display for ScalerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScalerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "standard" | "standardscaler" => Ok(ScalerKind::Standard),
            "minmax" | "minmaxscaler" => Ok(ScalerKind::MinMax),
            _ => Err(Error::invalid("scaler", format!("unknown scaler '{s}'"))),
        }
    }
}

/// Per-column statistics of the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScalerParams {
    Standard { mean: Vec<f64>, stddev: Vec<f64> },
    #[serde(rename = "minmax")]
    MinMax { min: Vec<f64>, max: Vec<f64> },
}

impl ScalerParams {
    pub fn kind(&self) -> ScalerKind {
        match self {
            ScalerParams::Standard { .. } => ScalerKind::Standard,
            ScalerParams::MinMax { .. } => ScalerKind::MinMax,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ScalerParams::Standard { mean, .. } => mean.len(),
            ScalerParams::MinMax { min, .. } => min.len(),
        }
    }

    /// Column offsets and divisors, degenerate spreads already replaced.
    fn affine(&self) -> (Vec<f64>, Vec<f64>) {
        let guard = |d: f64| if d < DEGENERATE_SPREAD { 1.0 } else { d };
        match self {
            ScalerParams::Standard { mean, stddev } => {
                (mean.clone(), stddev.iter().map(|&s| guard(s)).collect())
            }
            ScalerParams::MinMax { min, max } => (
                min.clone(),
                min.iter().zip(max).map(|(&lo, &hi)| guard(hi - lo)).collect(),
            ),
        }
    }

    /// Applies the fitted scaling. Values outside the training range are
    /// passed through unclipped.
    pub fn transform(&self, matrix: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if matrix.ncols() != self.dim() {
            return Err(Error::Shape(format!(
                "scaler fitted on {} columns, matrix has {}",
                self.dim(),
                matrix.ncols()
            )));
        }
        let (offset, divisor) = self.affine();
        let mut out = matrix.to_owned();
        for mut row in out.rows_mut() {
            for ((v, o), d) in row.iter_mut().zip(&offset).zip(&divisor) {
                *v = (*v - o) / d;
            }
        }
        Ok(out)
    }
}

/// Fits scaler statistics on training rows. Standard uses the population
/// standard deviation (divisor n).
pub fn fit_scaler(kind: ScalerKind, train: ArrayView2<'_, f64>) -> Result<ScalerParams> {
    let n = train.nrows();
    if n == 0 {
        return Err(Error::invalid("scaler fit", "training matrix has no rows"));
    }
    if train.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("scaler fit", "training matrix has non-finite values"));
    }
    Ok(match kind {
        ScalerKind::Standard => {
            let mut mean = Vec::with_capacity(train.ncols());
            let mut stddev = Vec::with_capacity(train.ncols());
            for col in train.axis_iter(Axis(1)) {
                let m = col.sum() / n as f64;
                let var = col.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / n as f64;
                mean.push(m);
                stddev.push(var.sqrt());
            }
            ScalerParams::Standard { mean, stddev }
        }
        ScalerKind::MinMax => {
            let min = train
                .axis_iter(Axis(1))
                .map(|c| c.fold(f64::INFINITY, |a, &b| a.min(b)))
                .collect();
            let max = train
                .axis_iter(Axis(1))
                .map(|c| c.fold(f64::NEG_INFINITY, |a, &b| a.max(b)))
                .collect();
            ScalerParams::MinMax { min, max }
        }
    })
}
