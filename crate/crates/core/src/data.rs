//! Feature, label and partition tables plus the alignment step that turns
//! them into per-split views.
//!
//! All tables are immutable once constructed. Loading keeps the file's row
//! order; [`align`] is where the canonical (lexicographic) order is imposed.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical emotion order. Every 9-column matrix in the crate uses it.
pub const EMOTIONS: [&str; 9] = [
    "Anger",
    "Boredom",
    "Calmness",
    "Concentration",
    "Determination",
    "Excitement",
    "Interest",
    "Sadness",
    "Tiredness",
];

pub const N_EMOTIONS: usize = EMOTIONS.len();

/// Slack allowed when checking label values against `[0, 1]`.
pub const LABEL_RANGE_SLACK: f64 = 1e-9;

/// Sample-indexed embedding features produced by one upstream model.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    model_name: String,
    sample_ids: Vec<String>,
    values: Array2<f64>,
}

impl FeatureTable {
    pub fn new(
        model_name: impl Into<String>,
        sample_ids: Vec<String>,
        values: Array2<f64>,
    ) -> Result<Self> {
        let model_name = model_name.into();
        if values.ncols() == 0 {
            return Err(Error::invalid("feature table", "feature dimension must be positive"));
        }
        check_ids(&sample_ids, values.nrows(), "feature table")?;
        if let Some(((r, c), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(
                "feature table",
                format!("non-finite value {v} for sample '{}' in column f{c}", sample_ids[r]),
            ));
        }
        Ok(FeatureTable {
            model_name,
            sample_ids,
            values,
        })
    }

    pub fn model_name(&self) -> &str {
        &self.model_name
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    /// Rows for `ids`, in that order. Every id must be present.
    pub fn select(&self, ids: &[String]) -> Result<FeatureTable> {
        let rows = row_indices(&self.sample_ids, ids, &self.model_name)?;
        Ok(FeatureTable {
            model_name: self.model_name.clone(),
            sample_ids: ids.to_vec(),
            values: self.values.select(Axis(0), &rows),
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut header = Vec::with_capacity(self.dim() + 1);
        header.push("sample_id".to_string());
        header.extend((0..self.dim()).map(|j| format!("f{j}")));
        write_matrix_csv(path, &header, &self.sample_ids, &self.values)
    }
}

/// Sample-indexed emotion shares, one column per entry of [`EMOTIONS`].
#[derive(Debug, Clone, PartialEq)]
pub struct LabelTable {
    sample_ids: Vec<String>,
    values: Array2<f64>,
}

impl LabelTable {
    /// Values must be finite and nonnegative. The `[0, 1]` range is checked
    /// on load; raw (un-normalized) shares are accepted here.
    pub fn new(sample_ids: Vec<String>, values: Array2<f64>) -> Result<Self> {
        if values.ncols() != N_EMOTIONS {
            return Err(Error::invalid(
                "label table",
                format!("expected {N_EMOTIONS} emotion columns, got {}", values.ncols()),
            ));
        }
        check_ids(&sample_ids, values.nrows(), "label table")?;
        if let Some(((r, c), v)) = values
            .indexed_iter()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::invalid(
                "label table",
                format!(
                    "value {v} for sample '{}' in column {} is not a finite nonnegative share",
                    sample_ids[r], EMOTIONS[c]
                ),
            ));
        }
        Ok(LabelTable { sample_ids, values })
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn emotions(&self) -> &'static [&'static str; N_EMOTIONS] {
        &EMOTIONS
    }

    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    pub fn select(&self, ids: &[String]) -> Result<LabelTable> {
        let rows = row_indices(&self.sample_ids, ids, "labels")?;
        Ok(LabelTable {
            sample_ids: ids.to_vec(),
            values: self.values.select(Axis(0), &rows),
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_matrix_csv(path, &emotion_header(), &self.sample_ids, &self.values)
    }
}

/// Divides every row by its maximum so the top emotion scores exactly 1.0.
pub fn normalize_label_rows(table: &LabelTable) -> Result<LabelTable> {
    let mut values = table.values.clone();
    for (row, id) in values.rows_mut().into_iter().zip(&table.sample_ids) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max <= 0.0 {
            return Err(Error::Normalization {
                sample_id: id.clone(),
            });
        }
        for v in row {
            *v /= max;
        }
    }
    Ok(LabelTable {
        sample_ids: table.sample_ids.clone(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid(
                "split",
                format!("'{other}' is not one of train, dev, test"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub split: Split,
    pub speaker_id: String,
}

/// Sample → (split, speaker) assignments.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PartitionMap {
    assignments: BTreeMap<String, Assignment>,
}

impl PartitionMap {
    /// Builds the map, rejecting duplicate sample ids. Speaker disjointness is
    /// checked separately by [`PartitionMap::check_speaker_disjoint`].
    pub fn from_rows(rows: impl IntoIterator<Item = (String, Split, String)>) -> Result<Self> {
        let mut assignments = BTreeMap::new();
        for (sample_id, split, speaker_id) in rows {
            if sample_id.is_empty() {
                return Err(Error::invalid("partition", "empty sample_id"));
            }
            if assignments
                .insert(sample_id.clone(), Assignment { split, speaker_id })
                .is_some()
            {
                return Err(Error::Partition(format!(
                    "sample '{sample_id}' is assigned more than once"
                )));
            }
        }
        Ok(PartitionMap { assignments })
    }

    pub fn get(&self, sample_id: &str) -> Option<&Assignment> {
        self.assignments.get(sample_id)
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Assignment)> {
        self.assignments.iter()
    }

    /// Sample ids of one split in lexicographic order.
    pub fn ids_in(&self, split: Split) -> Vec<String> {
        self.assignments
            .iter()
            .filter(|(_, a)| a.split == split)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn check_speaker_disjoint(&self) -> Result<()> {
        let mut seen: BTreeMap<&str, Split> = BTreeMap::new();
        for a in self.assignments.values() {
            match seen.get(a.speaker_id.as_str()) {
                Some(&prev) if prev != a.split => {
                    let (first, second) = if prev < a.split { (prev, a.split) } else { (a.split, prev) };
                    return Err(Error::Partition(format!(
                        "speaker '{}' appears in both {first} and {second}",
                        a.speaker_id
                    )));
                }
                Some(_) => {}
                None => {
                    seen.insert(&a.speaker_id, a.split);
                }
            }
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        let wrap = |e: csv::Error| Error::load(path, e.to_string());
        w.write_record(["sample_id", "split", "speaker_id"]).map_err(wrap)?;
        for (id, a) in &self.assignments {
            w.write_record([id.as_str(), a.split.as_str(), a.speaker_id.as_str()])
                .map_err(wrap)?;
        }
        finish_writer(w, path)
    }
}

/// One split with every table restricted to it, rows in canonical order.
#[derive(Debug, Clone)]
pub struct SplitView {
    pub split: Split,
    pub sample_ids: Vec<String>,
    pub features: Vec<FeatureTable>,
    pub labels: LabelTable,
}

#[derive(Debug, Clone)]
pub struct AlignedDataset {
    pub train: SplitView,
    pub dev: SplitView,
    pub test: SplitView,
}

impl AlignedDataset {
    pub fn split(&self, split: Split) -> &SplitView {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    pub fn model_names(&self) -> Vec<&str> {
        self.train.features.iter().map(|f| f.model_name()).collect()
    }
}

/// Restricts every table to each split, ordering rows lexicographically by
/// sample id. All tables must cover exactly the same sample universe.
pub fn align(
    features: &[FeatureTable],
    labels: &LabelTable,
    parts: &PartitionMap,
) -> Result<AlignedDataset> {
    let mut universe: BTreeSet<&str> = labels.sample_ids.iter().map(String::as_str).collect();
    for f in features {
        universe.extend(f.sample_ids.iter().map(String::as_str));
    }
    universe.extend(parts.assignments.keys().map(String::as_str));

    let mut problems = Vec::new();
    let mut report_missing = |name: &str, ids: &mut dyn Iterator<Item = &str>| {
        let present: HashSet<&str> = ids.collect();
        let missing: Vec<&str> = universe
            .iter()
            .copied()
            .filter(|id| !present.contains(id))
            .collect();
        if !missing.is_empty() {
            problems.push(format!("{name} is missing {}", quote_ids(&missing)));
        }
    };
    for f in features {
        report_missing(
            &format!("feature table '{}'", f.model_name),
            &mut f.sample_ids.iter().map(String::as_str),
        );
    }
    report_missing("label table", &mut labels.sample_ids.iter().map(String::as_str));
    report_missing("partition", &mut parts.assignments.keys().map(String::as_str));
    if !problems.is_empty() {
        return Err(Error::Alignment(problems.join("; ")));
    }
    parts.check_speaker_disjoint()?;

    let view = |split: Split| -> Result<SplitView> {
        let ids = parts.ids_in(split);
        Ok(SplitView {
            split,
            features: features
                .iter()
                .map(|f| f.select(&ids))
                .collect::<Result<_>>()?,
            labels: labels.select(&ids)?,
            sample_ids: ids,
        })
    };
    Ok(AlignedDataset {
        train: view(Split::Train)?,
        dev: view(Split::Dev)?,
        test: view(Split::Test)?,
    })
}

fn quote_ids(ids: &[&str]) -> String {
    const SHOWN: usize = 20;
    let mut s = ids
        .iter()
        .take(SHOWN)
        .map(|id| format!("\"{id}\""))
        .collect::<Vec<_>>()
        .join(", ");
    if ids.len() > SHOWN {
        s.push_str(&format!(" and {} more", ids.len() - SHOWN));
    }
    s
}

fn check_ids(ids: &[String], nrows: usize, what: &'static str) -> Result<()> {
    if ids.len() != nrows {
        return Err(Error::invalid(
            what,
            format!("{} sample ids for {nrows} rows", ids.len()),
        ));
    }
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if id.is_empty() {
            return Err(Error::invalid(what, "empty sample_id"));
        }
        if !seen.insert(id.as_str()) {
            return Err(Error::invalid(what, format!("duplicate sample_id '{id}'")));
        }
    }
    Ok(())
}

fn row_indices(have: &[String], want: &[String], table: &str) -> Result<Vec<usize>> {
    let index: BTreeMap<&str, usize> = have
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    want.iter()
        .map(|id| {
            index.get(id.as_str()).copied().ok_or_else(|| {
                Error::Alignment(format!("{table} is missing \"{id}\""))
            })
        })
        .collect()
}

pub(crate) fn emotion_header() -> Vec<String> {
    std::iter::once("sample_id")
        .chain(EMOTIONS)
        .map(str::to_string)
        .collect()
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

pub(crate) fn csv_reader(path: &Path) -> Result<csv::Reader<Box<dyn Read>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let inner: Box<dyn Read> = if is_gz(path) {
        Box::new(GzDecoder::new(BufReader::new(file)))
    } else {
        Box::new(BufReader::new(file))
    };
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(inner))
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<Box<dyn Write>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let inner: Box<dyn Write> = if is_gz(path) {
        // Fixed header fields keep gzip output byte-stable across runs.
        Box::new(GzEncoder::new(BufWriter::new(file), Compression::default()))
    } else {
        Box::new(BufWriter::new(file))
    };
    Ok(csv::Writer::from_writer(inner))
}

pub(crate) fn finish_writer(w: csv::Writer<Box<dyn Write>>, path: &Path) -> Result<()> {
    let mut inner = w
        .into_inner()
        .map_err(|e| Error::load(path, e.to_string()))?;
    inner.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_matrix_csv(
    path: &Path,
    header: &[String],
    ids: &[String],
    values: &Array2<f64>,
) -> Result<()> {
    let mut w = csv_writer(path)?;
    let wrap = |e: csv::Error| Error::load(path, e.to_string());
    w.write_record(header).map_err(wrap)?;
    let mut record = Vec::with_capacity(values.ncols() + 1);
    for (id, row) in ids.iter().zip(values.rows()) {
        record.clear();
        record.push(id.clone());
        record.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&record).map_err(wrap)?;
    }
    finish_writer(w, path)
}

/// Raw `(ids, matrix)` contents of a `sample_id,<columns...>` CSV. Errors name
/// the 1-based file line and the column.
pub(crate) fn read_matrix_csv(
    path: &Path,
    check_header: impl FnOnce(&[String]) -> Result<()>,
) -> Result<(Vec<String>, Array2<f64>)> {
    let mut reader = csv_reader(path)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::load(path, format!("unreadable header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.first().map(String::as_str) != Some("sample_id") {
        return Err(Error::load(path, "malformed header: first column must be 'sample_id'"));
    }
    check_header(&header).map_err(|e| match e {
        Error::Schema(reason) => Error::load(path, reason),
        other => other,
    })?;
    let ncols = header.len() - 1;

    let mut ids = Vec::new();
    let mut flat = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::load(path, format!("line {line}: {e}")))?;
        if record.len() != ncols + 1 {
            return Err(Error::load(
                path,
                format!(
                    "line {line}: ragged row with {} fields, header has {}",
                    record.len(),
                    ncols + 1
                ),
            ));
        }
        let id = record[0].trim().to_string();
        if id.is_empty() {
            return Err(Error::load(path, format!("line {line}: empty sample_id")));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::load(path, format!("line {line}: duplicate sample_id '{id}'")));
        }
        for (j, cell) in record.iter().skip(1).enumerate() {
            let column = &header[j + 1];
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::load(
                    path,
                    format!("line {line}, column '{column}': cannot parse '{cell}' as a number"),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::load(
                    path,
                    format!("line {line}, column '{column}': non-finite value '{cell}'"),
                ));
            }
            flat.push(v);
        }
        ids.push(id);
    }
    let values = Array2::from_shape_vec((ids.len(), ncols), flat)
        .expect("row lengths were checked against the header");
    Ok((ids, values))
}

/// Reads a feature CSV (`sample_id,f0,...,f{D-1}`, optionally gzip-compressed
/// when the path ends in `.gz`).
pub fn load_feature_table(path: &Path, model_name: &str) -> Result<FeatureTable> {
    let (ids, values) = read_matrix_csv(path, |header| {
        let dim = header.len() - 1;
        if dim == 0 {
            return Err(Error::Schema("malformed header: no feature columns".into()));
        }
        for (j, h) in header.iter().skip(1).enumerate() {
            if *h != format!("f{j}") {
                return Err(Error::Schema(format!(
                    "malformed header: column {} is '{h}', expected 'f{j}'",
                    j + 1
                )));
            }
        }
        Ok(())
    })?;
    FeatureTable::new(model_name, ids, values).map_err(|e| Error::load(path, e.to_string()))
}

/// Reads a label CSV whose header is `sample_id` followed by [`EMOTIONS`].
/// Values must lie in `[0, 1]`; rows are not normalized here.
pub fn load_label_table(path: &Path) -> Result<LabelTable> {
    let (ids, values) = read_matrix_csv(path, check_emotion_header)?;
    if let Some(((r, c), v)) = values
        .indexed_iter()
        .find(|(_, v)| **v < -LABEL_RANGE_SLACK || **v > 1.0 + LABEL_RANGE_SLACK)
    {
        return Err(Error::load(
            path,
            format!(
                "line {}, column '{}': value {v} outside [0, 1]",
                r + 2,
                EMOTIONS[c]
            ),
        ));
    }
    let values = values.mapv(|v| v.clamp(0.0, 1.0));
    LabelTable::new(ids, values).map_err(|e| Error::load(path, e.to_string()))
}

pub(crate) fn check_emotion_header(header: &[String]) -> Result<()> {
    let got: Vec<&str> = header.iter().skip(1).map(String::as_str).collect();
    if got != EMOTIONS {
        let missing: Vec<&str> = EMOTIONS
            .iter()
            .copied()
            .filter(|e| !got.contains(e))
            .collect();
        let detail = if missing.is_empty() {
            format!("got {got:?}")
        } else {
            format!("missing {missing:?}")
        };
        return Err(Error::Schema(format!(
            "schema error: emotion columns must be exactly {EMOTIONS:?} in order; {detail}"
        )));
    }
    Ok(())
}

/// Reads a partition CSV (`sample_id,split,speaker_id`).
pub fn load_partition(path: &Path) -> Result<PartitionMap> {
    let mut reader = csv_reader(path)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::load(path, format!("unreadable header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header != ["sample_id", "split", "speaker_id"] {
        return Err(Error::load(
            path,
            format!("malformed header {header:?}, expected sample_id,split,speaker_id"),
        ));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::load(path, format!("line {line}: {e}")))?;
        if record.len() != 3 {
            return Err(Error::load(path, format!("line {line}: expected 3 fields")));
        }
        let split: Split = record[1]
            .trim()
            .parse()
            .map_err(|e: Error| Error::load(path, format!("line {line}: {e}")))?;
        rows.push((record[0].trim().to_string(), split, record[2].trim().to_string()));
    }
    PartitionMap::from_rows(rows).map_err(|e| Error::load(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    const LABEL_HEADER: &str =
        "sample_id,Anger,Boredom,Calmness,Concentration,Determination,Excitement,Interest,Sadness,Tiredness";

    #[test]
    fn loads_feature_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "f.csv",
            "sample_id,f0,f1,f2,f3\na,1,2,3,4\nb,0.5,-1,2e-3,0\nc,0,0,0,1\n",
        );
        let t = load_feature_table(&p, "m").unwrap();
        assert_eq!(t.dim(), 4);
        assert_eq!(t.sample_ids(), ids(&["a", "b", "c"]));
        assert_eq!(t.values()[[1, 2]], 2e-3);
        assert_eq!(t.model_name(), "m");
    }

    #[test]
    fn feature_csv_errors() {
        let dir = tempfile::tempdir().unwrap();
        let dup = write(&dir, "d.csv", "sample_id,f0\ns1,1\ns1,2\n");
        let err = load_feature_table(&dup, "m").unwrap_err().to_string();
        assert!(err.contains("duplicate sample_id 's1'"), "{err}");

        let nan = write(&dir, "n.csv", "sample_id,f0,f1\ns1,1,2\ns2,NaN,2\n");
        let err = load_feature_table(&nan, "m").unwrap_err().to_string();
        assert!(err.contains("line 3, column 'f0'") && err.contains("non-finite"), "{err}");

        let ragged = write(&dir, "r.csv", "sample_id,f0,f1\ns1,1,2\ns2,1\n");
        let err = load_feature_table(&ragged, "m").unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("ragged"), "{err}");

        let header = write(&dir, "h.csv", "sample_id,f0,f2\ns1,1,2\n");
        let err = load_feature_table(&header, "m").unwrap_err().to_string();
        assert!(err.contains("malformed header"), "{err}");
    }

    #[test]
    fn header_only_feature_csv_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "e.csv", "sample_id,f0,f1\n");
        let t = load_feature_table(&p, "m").unwrap();
        assert!(t.is_empty());
        assert_eq!(t.dim(), 2);
    }

    #[test]
    fn gzip_feature_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = FeatureTable::new("m", ids(&["x", "y"]), array![[0.1, 1e-300], [-3.5, 7.0]])
            .unwrap();
        let p = dir.path().join("f.csv.gz");
        t.write_csv(&p).unwrap();
        assert_eq!(load_feature_table(&p, "m").unwrap(), t);
    }

    #[test]
    fn loads_label_csv() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!(
            "{LABEL_HEADER}\na,1,0,0.5,0,0,0,0,0,0\nb,0.2,0.4,1,0,0,0,0,0.1,0\n"
        );
        let t = load_label_table(&write(&dir, "l.csv", &body)).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.values()[[1, 2]], 1.0);
    }

    #[test]
    fn label_csv_errors() {
        let dir = tempfile::tempdir().unwrap();
        let short = LABEL_HEADER.trim_end_matches(",Tiredness");
        let p = write(&dir, "s.csv", &format!("{short}\na,1,0,0,0,0,0,0,0\n"));
        let err = load_label_table(&p).unwrap_err().to_string();
        assert!(err.contains("schema error") && err.contains("Tiredness"), "{err}");

        let p = write(&dir, "r.csv", &format!("{LABEL_HEADER}\na,1.3,0,0,0,0,0,0,0,0\n"));
        let err = load_label_table(&p).unwrap_err().to_string();
        assert!(err.contains("column 'Anger'") && err.contains("outside [0, 1]"), "{err}");
    }

    #[test]
    fn normalize_examples() {
        let t = LabelTable::new(
            ids(&["a", "b"]),
            array![
                [2.0, 4.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                [0.3, 1.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0]
            ],
        )
        .unwrap();
        let n = normalize_label_rows(&t).unwrap();
        assert_eq!(
            n.values().row(0).to_vec(),
            vec![0.5, 1.0, 0.25, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(n.values().row(1), t.values().row(1));

        let z = LabelTable::new(ids(&["zero"]), Array2::zeros((1, 9))).unwrap();
        match normalize_label_rows(&z) {
            Err(Error::Normalization { sample_id }) => assert_eq!(sample_id, "zero"),
            other => panic!("expected normalization error, got {other:?}"),
        }
    }

    fn tiny_partition(spk_for_s1: &str) -> PartitionMap {
        PartitionMap::from_rows(vec![
            ("s0".into(), Split::Train, "spk0".into()),
            ("s1".into(), Split::Train, spk_for_s1.into()),
            ("s2".into(), Split::Dev, "spk1".into()),
            ("s3".into(), Split::Test, "spk2".into()),
        ])
        .unwrap()
    }

    #[test]
    fn align_sorts_and_splits() {
        let f = FeatureTable::new(
            "m",
            ids(&["s3", "s1", "s0", "s2"]),
            array![[3.0], [1.0], [0.0], [2.0]],
        )
        .unwrap();
        let mut lv = Array2::zeros((4, 9));
        for i in 0..4 {
            lv[[i, 0]] = 1.0;
            lv[[i, 1]] = (i as f64) / 10.0;
        }
        let l = LabelTable::new(ids(&["s0", "s1", "s2", "s3"]), lv).unwrap();
        let a = align(&[f], &l, &tiny_partition("spk0")).unwrap();
        assert_eq!(a.train.sample_ids, ids(&["s0", "s1"]));
        assert_eq!(a.train.features[0].values().column(0).to_vec(), vec![0.0, 1.0]);
        assert_eq!(a.train.labels.values()[[1, 1]], 0.1);
        assert_eq!(a.dev.sample_ids, ids(&["s2"]));
        assert_eq!(a.test.features[0].values()[[0, 0]], 3.0);
    }

    #[test]
    fn align_rejects_shared_speaker() {
        let f = FeatureTable::new("m", ids(&["s0", "s1", "s2", "s3"]), Array2::zeros((4, 1)))
            .unwrap();
        let l = LabelTable::new(ids(&["s0", "s1", "s2", "s3"]), Array2::ones((4, 9))).unwrap();
        let err = align(&[f], &l, &tiny_partition("spk1")).unwrap_err();
        assert!(matches!(err, Error::Partition(_)));
        assert!(err.to_string().contains("spk1"));
    }

    #[test]
    fn partition_rejects_bad_split() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "p.csv", "sample_id,split,speaker_id\na,train,x\nb,valid,y\n");
        let err = load_partition(&p).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("valid"), "{err}");
    }
}
