use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scaler::ScalerKind;
use crate::selection::{GridSpec, Scoring, DEFAULT_C_GRID};
use crate::svr::SvrHyperparams;

/// Which scoring metrics a grid run selects with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScoringChoice {
    Nmae,
    Nmse,
    Both,
}

impl ScoringChoice {
    pub fn metrics(self) -> Vec<Scoring> {
        match self {
            ScoringChoice::Nmae => vec![Scoring::Nmae],
            ScoringChoice::Nmse => vec![Scoring::Nmse],
            ScoringChoice::Both => Scoring::ALL.to_vec(),
        }
    }
}

/// Grid axes shared by every scoring metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxes {
    #[serde(rename = "C_values")]
    pub c_values: Vec<f64>,
    pub dual_options: Vec<bool>,
    pub scaler_kinds: Vec<ScalerKind>,
}

impl Default for GridAxes {
    fn default() -> Self {
        GridAxes {
            c_values: DEFAULT_C_GRID.to_vec(),
            dual_options: vec![true, false],
            scaler_kinds: vec![ScalerKind::Standard, ScalerKind::MinMax],
        }
    }
}

impl GridAxes {
    pub fn spec(&self, scoring: Scoring) -> GridSpec {
        GridSpec {
            c_values: self.c_values.clone(),
            dual_options: self.dual_options.clone(),
            scaler_kinds: self.scaler_kinds.clone(),
            scoring,
        }
    }
}

/// Fully resolved settings of a grid run; echoed to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub feature_paths: BTreeMap<String, PathBuf>,
    pub label_path: PathBuf,
    pub partition_path: PathBuf,
    pub output_dir: PathBuf,
    pub grid: GridAxes,
    pub scoring: ScoringChoice,
    pub hp_base: SvrHyperparams,
    pub normalize_labels: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feature_paths.is_empty() {
            return Err(Error::invalid("run config", "at least one feature table is required"));
        }
        self.grid.spec(Scoring::Nmae).validate()?;
        self.hp_base.validate()
    }
}

/// Partial run settings as read from `--config`. Every field is optional;
/// command-line flags take precedence.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub feature_paths: Option<BTreeMap<String, PathBuf>>,
    pub label_path: Option<PathBuf>,
    pub partition_path: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub grid: Option<GridAxes>,
    pub scoring: Option<ScoringChoice>,
    pub hp_base: Option<HyperparamOverrides>,
    pub normalize_labels: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperparamOverrides {
    pub epsilon: Option<f64>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::invalid("config file", format!("{}: {e}", path.display())))
    }
}

/// Parses `NAME=PATH`.
pub fn parse_named_path(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_string(), PathBuf::from(path)))
        }
        _ => Err(format!("expected NAME=PATH, got '{s}'")),
    }
}

/// Parses one positive C value.
pub fn parse_c_value(t: &str) -> std::result::Result<f64, String> {
    let v: f64 = t.trim().parse().map_err(|_| format!("'{t}' is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("C value {v} is not positive"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_paths() {
        assert_eq!(
            parse_named_path("m1=a/b.csv").unwrap(),
            ("m1".to_string(), PathBuf::from("a/b.csv"))
        );
        assert!(parse_named_path("nope").is_err());
        assert!(parse_named_path("=x").is_err());
    }

    #[test]
    fn c_grid() {
        assert_eq!(parse_c_value(" 1e-2").unwrap(), 1e-2);
        assert!(parse_c_value("-1").is_err());
        assert!(parse_c_value("0").is_err());
        assert!(parse_c_value("x").is_err());
    }

    #[test]
    fn config_file_rejects_unknown_keys() {
        assert!(serde_json::from_str::<ConfigFile>(r#"{"bogus": 1}"#).is_err());
        let c: ConfigFile = serde_json::from_str(r#"{"scoring": "both", "hp_base": {"tol": 1e-3}}"#).unwrap();
        assert_eq!(c.scoring, Some(ScoringChoice::Both));
        assert_eq!(c.hp_base.unwrap().tol, Some(1e-3));
    }
}
