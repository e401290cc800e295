//! Spearman rank correlation and the per-emotion evaluation report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{LabelTable, Split, EMOTIONS};
use crate::error::{Error, Result};
use crate::fusion::PredictionMatrix;

pub const REPORT_EXTENSION: &str = "evalreport.json";

/// Fractional 1-based ranks; tied values share the mean of their positions.
pub fn rank_average(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of the average ranks. `Ok(None)` when either input
/// is constant (zero rank variance).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::Metric(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Metric(format!(
            "spearman needs at least 2 samples, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Metric("non-finite input".into()));
    }
    Ok(pearson(&rank_average(x), &rank_average(y)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionRho {
    pub emotion: String,
    /// `None` when undefined (constant predictions or labels).
    pub rho: Option<f64>,
}

/// What produced the predictions being evaluated.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub split: Option<Split>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scoring: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub source_name: String,
    pub n_samples: usize,
    pub per_emotion: Vec<EmotionRho>,
    /// Mean over the 9 emotions, undefined values counted as 0.0.
    pub mean_rho: f64,
    pub warnings: Vec<String>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl EvalReport {
    pub fn rho(&self, emotion: &str) -> Option<f64> {
        self.per_emotion
            .iter()
            .find(|e| e.emotion == emotion)
            .and_then(|e| e.rho)
    }

    /// Emotion rows x rho column.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} (n = {})", self.source_name, self.n_samples);
        let _ = writeln!(out, "{:<15} {:>8}", "Emotion", "rho");
        let _ = writeln!(out, "{}", "-".repeat(24));
        for e in &self.per_emotion {
            let cell = e.rho.map_or("undef".to_string(), |r| format!("{r:.4}"));
            let _ = writeln!(out, "{:<15} {:>8}", e.emotion, cell);
        }
        let _ = writeln!(out, "{}", "-".repeat(24));
        let _ = writeln!(out, "{:<15} {:>8.4}", "Mean", self.mean_rho);
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

/// Per-emotion Spearman correlation between predictions and labels.
pub fn evaluate(pred: &PredictionMatrix, labels: &LabelTable) -> Result<EvalReport> {
    if pred.sample_ids() != labels.sample_ids() {
        return Err(Error::Alignment(format!(
            "predictions '{}' and labels cover different samples or orders",
            pred.source_name()
        )));
    }
    if pred.len() < 2 {
        return Err(Error::Metric(format!(
            "evaluation needs at least 2 samples, got {}",
            pred.len()
        )));
    }
    let mut per_emotion = Vec::with_capacity(EMOTIONS.len());
    let mut warnings = Vec::new();
    for (k, name) in EMOTIONS.iter().enumerate() {
        let p = pred.values().column(k).to_vec();
        let l = labels.values().column(k).to_vec();
        let rho = spearman(&p, &l)?;
        if rho.is_none() {
            warnings.push(format!(
                "{name}: spearman undefined (constant predictions or labels), counted as 0.0"
            ));
        }
        per_emotion.push(EmotionRho {
            emotion: name.to_string(),
            rho,
        });
    }
    let mean_rho =
        per_emotion.iter().map(|e| e.rho.unwrap_or(0.0)).sum::<f64>() / EMOTIONS.len() as f64;
    Ok(EvalReport {
        source_name: pred.source_name().to_string(),
        n_samples: pred.len(),
        per_emotion,
        mean_rho,
        warnings,
        provenance: Provenance::default(),
    })
}
