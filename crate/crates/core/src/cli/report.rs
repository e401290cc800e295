//! Consolidates evaluation reports found under a run directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::data::EMOTIONS;
use crate::error::{Error, Result};
use crate::json;
use crate::metrics::{EvalReport, REPORT_EXTENSION};

const UNSCORED: &str = "rho";

/// Every `*.evalreport.json` below `dir`, in path order.
pub fn find_reports(dir: &Path) -> Result<Vec<PathBuf>> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.is_dir() {
                walk(&path, out)?;
            } else if path
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(&format!(".{REPORT_EXTENSION}")))
            {
                out.push(path);
            }
        }
        Ok(())
    }
    if !dir.is_dir() {
        return Err(Error::NoRuns(dir.to_path_buf()));
    }
    let mut out = Vec::new();
    walk(dir, &mut out)?;
    out.sort();
    Ok(out)
}

fn is_fusion(source: &str) -> bool {
    source.starts_with("fusion")
}

fn display_name(source: &str) -> String {
    match source.strip_prefix("fusion(").and_then(|s| s.strip_suffix(')')) {
        Some(inner) => format!("fusion of {}", inner.split(',').count()),
        None => source.to_string(),
    }
}

fn scoring_column(r: &EvalReport) -> String {
    r.provenance
        .scoring
        .as_deref()
        .map_or(UNSCORED.to_string(), str::to_uppercase)
}

/// Reports of one split keyed by (source, scoring column).
#[derive(Debug, Default)]
struct Section {
    reports: BTreeMap<(String, String), EvalReport>,
}

impl Section {
    fn columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = self.reports.keys().map(|(_, c)| c.clone()).collect();
        cols.sort_by_key(|c| match c.as_str() {
            "NMSE" => (0, String::new()),
            "NMAE" => (1, String::new()),
            other => (2, other.to_string()),
        });
        cols.dedup();
        cols
    }

    fn sources(&self) -> Vec<String> {
        let mut rows: Vec<String> = self.reports.keys().map(|(s, _)| s.clone()).collect();
        rows.dedup();
        rows.sort_by_key(|s| (is_fusion(s), s.clone()));
        rows
    }

    /// Fusion reports when present, else the best report of each column.
    fn highlighted(&self) -> Vec<(&str, &EvalReport)> {
        let rank = |c: &str| self.columns().iter().position(|x| x == c);
        let mut fused: Vec<_> = self
            .reports
            .iter()
            .filter(|((s, _), _)| is_fusion(s))
            .map(|((_, c), r)| (c.as_str(), r))
            .collect();
        if !fused.is_empty() {
            fused.sort_by_key(|(c, r)| (rank(c), r.source_name.clone()));
            return fused;
        }
        self.columns()
            .into_iter()
            .filter_map(|col| {
                self.reports
                    .iter()
                    .filter(|((_, c), _)| *c == col)
                    .max_by(|a, b| a.1.mean_rho.total_cmp(&b.1.mean_rho))
                    .map(|((_, c), r)| (c.as_str(), r))
            })
            .collect()
    }
}

/// Model x scoring table of mean rho plus the per-emotion breakdown, per split.
#[derive(Debug, Default)]
pub struct Consolidated {
    sections: BTreeMap<String, Section>,
    pub warnings: Vec<String>,
}

impl Consolidated {
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let paths = find_reports(dir)?;
        if paths.is_empty() {
            return Err(Error::NoRuns(dir.to_path_buf()));
        }
        let mut out = Consolidated::default();
        for path in paths {
            let report: EvalReport = json::read(&path)?;
            let split = report
                .provenance
                .split
                .map_or("unspecified split".to_string(), |s| s.to_string());
            let key = (report.source_name.clone(), scoring_column(&report));
            let section = out.sections.entry(split.clone()).or_default();
            if section.reports.insert(key.clone(), report).is_some() {
                out.warnings.push(format!(
                    "{}: duplicate report for {} / {} on {split}; keeping the later path",
                    path.display(),
                    key.0,
                    key.1
                ));
            }
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let order = ["train", "dev", "test"];
        let mut splits: Vec<&String> = self.sections.keys().collect();
        splits.sort_by_key(|s| (order.iter().position(|o| o == s).unwrap_or(order.len()), s.to_string()));

        for split in splits {
            let section = &self.sections[split];
            let cols = section.columns();
            let rows = section.sources();
            let width = rows.iter().map(|r| display_name(r).len()).max().unwrap_or(0).max(15);

            let _ = writeln!(out, "Mean Spearman rho ({split})");
            let _ = write!(out, "{:<width$}", "Source");
            for c in &cols {
                let _ = write!(out, " {c:>8}");
            }
            let _ = writeln!(out);
            let _ = writeln!(out, "{}", "-".repeat(width + 9 * cols.len()));
            for src in &rows {
                let _ = write!(out, "{:<width$}", display_name(src));
                for c in &cols {
                    match section.reports.get(&(src.clone(), c.clone())) {
                        Some(r) => write!(out, " {:>8.4}", r.mean_rho),
                        None => write!(out, " {:>8}", "-"),
                    }
                    .ok();
                }
                let _ = writeln!(out);
            }
            let _ = writeln!(out);

            let shown = section.highlighted();
            let heads: Vec<String> = shown
                .iter()
                .map(|(c, r)| format!("{} {c}", display_name(&r.source_name)))
                .collect();
            let cw = heads.iter().map(String::len).max().unwrap_or(8).max(8);
            let _ = writeln!(out, "Per-emotion rho ({split})");
            let _ = write!(out, "{:<15}", "Emotion");
            for h in &heads {
                let _ = write!(out, " {h:>cw$}");
            }
            let _ = writeln!(out);
            let _ = writeln!(out, "{}", "-".repeat(15 + (cw + 1) * heads.len()));
            for e in EMOTIONS {
                let _ = write!(out, "{e:<15}");
                for (_, r) in &shown {
                    let cell = r.rho(e).map_or("undef".to_string(), |v| format!("{v:.4}"));
                    let _ = write!(out, " {cell:>cw$}");
                }
                let _ = writeln!(out);
            }
            let _ = writeln!(out);
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }

    /// Mean rho per source name for one split and scoring column.
    pub fn mean_rho(&self, split: &str, column: &str) -> BTreeMap<String, f64> {
        self.sections
            .get(split)
            .map(|s| {
                s.reports
                    .iter()
                    .filter(|((_, c), _)| c == column)
                    .map(|((src, _), r)| (src.clone(), r.mean_rho))
                    .collect()
            })
            .unwrap_or_default()
    }
}
