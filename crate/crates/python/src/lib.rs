//! Python module `emoshare`: tables, training, prediction, fusion and
//! evaluation. Matrices cross the boundary as lists of row lists.

use std::path::PathBuf;

use ndarray::Array2;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use emoshare as core;
use emoshare::{selection, Split};

create_exception!(emoshare, EmoshareError, PyException);

fn err(e: core::Error) -> PyErr {
    match e {
        core::Error::Invalid { .. } => PyValueError::new_err(e.to_string()),
        core::Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => EmoshareError::new_err(other.to_string()),
    }
}

fn to_array(rows: Vec<Vec<f64>>, cols_if_empty: usize) -> PyResult<Array2<f64>> {
    let ncols = rows.first().map_or(cols_if_empty, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(PyValueError::new_err(format!(
            "row {i} has {} values, expected {ncols}",
            r.len()
        )));
    }
    let nrows = rows.len();
    Array2::from_shape_vec((nrows, ncols), rows.into_iter().flatten().collect())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn parse<T: std::str::FromStr>(s: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| PyValueError::new_err(e.to_string()))
}

#[pyclass(module = "emoshare", name = "FeatureTable", from_py_object)]
#[derive(Clone)]
struct FeatureTable(core::FeatureTable);

#[pymethods]
impl FeatureTable {
    #[new]
    #[pyo3(signature = (model_name, sample_ids, values, dim = None))]
    fn new(model_name: String, sample_ids: Vec<String>, values: Vec<Vec<f64>>, dim: Option<usize>) -> PyResult<Self> {
        let values = to_array(values, dim.unwrap_or(0))?;
        core::FeatureTable::new(model_name, sample_ids, values).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf, model_name: &str) -> PyResult<Self> {
        core::load_feature_table(&path, model_name).map(Self).map_err(err)
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        self.0.write_csv(&path).map_err(err)
    }

    #[getter]
    fn model_name(&self) -> String {
        self.0.model_name().to_string()
    }

    #[getter]
    fn sample_ids(&self) -> Vec<String> {
        self.0.sample_ids().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<Vec<f64>> {
        to_rows(self.0.values())
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("FeatureTable('{}', rows={}, dim={})", self.0.model_name(), self.0.len(), self.0.dim())
    }
}

#[pyclass(module = "emoshare", name = "LabelTable", from_py_object)]
#[derive(Clone)]
struct LabelTable(core::LabelTable);

#[pymethods]
impl LabelTable {
    #[new]
    fn new(sample_ids: Vec<String>, values: Vec<Vec<f64>>) -> PyResult<Self> {
        let values = to_array(values, core::N_EMOTIONS)?;
        core::LabelTable::new(sample_ids, values).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        core::load_label_table(&path).map(Self).map_err(err)
    }

    /// Each row divided by its maximum.
    fn normalized(&self) -> PyResult<Self> {
        core::normalize_label_rows(&self.0).map(Self).map_err(err)
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        self.0.write_csv(&path).map_err(err)
    }

    #[getter]
    fn sample_ids(&self) -> Vec<String> {
        self.0.sample_ids().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<Vec<f64>> {
        to_rows(self.0.values())
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(module = "emoshare", name = "PartitionMap", from_py_object)]
#[derive(Clone)]
struct PartitionMap(core::PartitionMap);

#[pymethods]
impl PartitionMap {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        core::load_partition(&path).map(Self).map_err(err)
    }

    /// Sample ids of `split` ("train", "dev" or "test") in canonical order.
    fn ids_in(&self, split: &str) -> PyResult<Vec<String>> {
        Ok(self.0.ids_in(parse::<Split>(split)?))
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        self.0.write_csv(&path).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(module = "emoshare", name = "SvrHyperparams", from_py_object)]
#[derive(Clone)]
struct SvrHyperparams(core::SvrHyperparams);

#[pymethods]
impl SvrHyperparams {
    #[new]
    #[pyo3(signature = (C = 1.0, dual = true, epsilon = 0.0, max_iter = None, tol = None, seed = None))]
    #[allow(non_snake_case)]
    fn new(C: f64, dual: bool, epsilon: f64, max_iter: Option<usize>, tol: Option<f64>, seed: Option<u64>) -> PyResult<Self> {
        let d = core::SvrHyperparams::default();
        let hp = core::SvrHyperparams {
            c: C,
            dual,
            epsilon,
            max_iter: max_iter.unwrap_or(d.max_iter),
            tol: tol.unwrap_or(d.tol),
            seed: seed.unwrap_or(d.seed),
        };
        hp.validate().map_err(err)?;
        Ok(Self(hp))
    }

    #[getter(C)]
    fn c(&self) -> f64 {
        self.0.c
    }

    #[getter]
    fn dual(&self) -> bool {
        self.0.dual
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.0.epsilon
    }

    #[getter]
    fn max_iter(&self) -> usize {
        self.0.max_iter
    }

    #[getter]
    fn tol(&self) -> f64 {
        self.0.tol
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }

    fn __repr__(&self) -> String {
        let h = &self.0;
        format!(
            "SvrHyperparams(C={:e}, dual={}, epsilon={}, max_iter={}, tol={:e}, seed={})",
            h.c,
            if h.dual { "True" } else { "False" },
            h.epsilon,
            h.max_iter,
            h.tol,
            h.seed
        )
    }
}

#[pyclass(module = "emoshare", name = "PredictionMatrix", from_py_object)]
#[derive(Clone)]
struct PredictionMatrix(core::PredictionMatrix);

#[pymethods]
impl PredictionMatrix {
    #[new]
    fn new(source_name: String, sample_ids: Vec<String>, values: Vec<Vec<f64>>) -> PyResult<Self> {
        let values = to_array(values, core::N_EMOTIONS)?;
        core::PredictionMatrix::new(source_name, sample_ids, values).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load_csv(path: PathBuf, source_name: String) -> PyResult<Self> {
        core::PredictionMatrix::load_csv(&path, source_name).map(Self).map_err(err)
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        self.0.write_csv(&path).map_err(err)
    }

    #[getter]
    fn source_name(&self) -> String {
        self.0.source_name().to_string()
    }

    #[getter]
    fn sample_ids(&self) -> Vec<String> {
        self.0.sample_ids().to_vec()
    }

    #[getter]
    fn values(&self) -> Vec<Vec<f64>> {
        to_rows(self.0.values())
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(module = "emoshare", name = "LinearModelBundle", from_py_object)]
#[derive(Clone)]
struct LinearModelBundle(core::LinearModelBundle);

#[pymethods]
impl LinearModelBundle {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        core::LinearModelBundle::load(&path).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        core::LinearModelBundle::from_json(text).map(Self).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(err)
    }

    fn predict(&self, features: &FeatureTable) -> PyResult<PredictionMatrix> {
        core::predict(&self.0, &features.0).map(PredictionMatrix).map_err(err)
    }

    #[getter]
    fn model_name(&self) -> String {
        self.0.model_name.clone()
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.0.feature_dim
    }

    #[getter]
    fn scaler(&self) -> &'static str {
        self.0.scaler.kind().as_str()
    }

    #[getter]
    fn hyperparams(&self) -> SvrHyperparams {
        SvrHyperparams(self.0.hyperparams)
    }

    /// Emotion name to (weights, intercept).
    fn coefficients<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for m in &self.0.per_emotion {
            d.set_item(&m.emotion, (m.weights.clone(), m.intercept))?;
        }
        Ok(d)
    }
}

#[pyclass(module = "emoshare", name = "EvalReport", from_py_object)]
#[derive(Clone)]
struct EvalReport(core::EvalReport);

#[pymethods]
impl EvalReport {
    #[getter]
    fn source_name(&self) -> String {
        self.0.source_name.clone()
    }

    #[getter]
    fn n_samples(&self) -> usize {
        self.0.n_samples
    }

    #[getter]
    fn mean_rho(&self) -> f64 {
        self.0.mean_rho
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.0.warnings.clone()
    }

    /// Emotion name to rho, `None` where undefined.
    fn per_emotion<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for e in &self.0.per_emotion {
            d.set_item(&e.emotion, e.rho)?;
        }
        Ok(d)
    }

    fn to_table(&self) -> String {
        self.0.to_table()
    }

    fn to_json(&self) -> PyResult<String> {
        core::json::to_string(&self.0).map_err(|e| EmoshareError::new_err(e.to_string()))
    }
}

fn config_dict<'py>(py: Python<'py>, c: &selection::GridConfig) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("scaler", c.scaler.as_str())?;
    d.set_item("dual", c.dual)?;
    d.set_item("C", c.c)?;
    Ok(d)
}

#[pyclass(module = "emoshare", name = "GridResult", from_py_object)]
#[derive(Clone)]
struct GridResult(core::GridResult);

#[pymethods]
impl GridResult {
    #[getter]
    fn model_name(&self) -> String {
        self.0.model_name.clone()
    }

    #[getter]
    fn scoring(&self) -> &'static str {
        self.0.scoring.as_str()
    }

    #[getter]
    fn best_index(&self) -> usize {
        self.0.best_index
    }

    #[getter]
    fn best_config<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        config_dict(py, &self.0.best_config)
    }

    #[getter]
    fn best_bundle(&self) -> LinearModelBundle {
        LinearModelBundle(self.0.best_bundle.clone())
    }

    /// One dict per config in enumeration order; failed configs score `-inf`.
    #[getter]
    fn per_config<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.0
            .per_config
            .iter()
            .map(|o| {
                let d = config_dict(py, &o.config)?;
                d.set_item("dev_score", o.dev_score)?;
                d.set_item("dev_spearman", o.dev_spearman)?;
                d.set_item("error", o.error.clone())?;
                Ok(d)
            })
            .collect()
    }

    fn to_json(&self) -> PyResult<String> {
        core::json::to_string(&self.0).map_err(|e| EmoshareError::new_err(e.to_string()))
    }
}

#[pyfunction]
fn spearman(x: Vec<f64>, y: Vec<f64>) -> PyResult<Option<f64>> {
    core::spearman(&x, &y).map_err(err)
}

#[pyfunction]
fn rank_average(x: Vec<f64>) -> Vec<f64> {
    core::rank_average(&x)
}

#[pyfunction]
fn fuse_mean(predictions: Vec<PredictionMatrix>) -> PyResult<PredictionMatrix> {
    let inner: Vec<core::PredictionMatrix> = predictions.into_iter().map(|p| p.0).collect();
    core::fuse_mean(&inner).map(PredictionMatrix).map_err(err)
}

#[pyfunction]
fn evaluate(predictions: &PredictionMatrix, labels: &LabelTable) -> PyResult<EvalReport> {
    core::evaluate(&predictions.0, &labels.0).map(EvalReport).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (features, labels, scaler = "standard", hyperparams = None))]
fn train_bundle(
    py: Python<'_>,
    features: &FeatureTable,
    labels: &LabelTable,
    scaler: &str,
    hyperparams: Option<SvrHyperparams>,
) -> PyResult<LinearModelBundle> {
    let kind: core::ScalerKind = parse(scaler)?;
    let hp = hyperparams.map_or_else(core::SvrHyperparams::default, |h| h.0);
    let (f, l) = (&features.0, &labels.0);
    py.detach(|| core::train_bundle(f, l, kind, &hp))
        .map(LinearModelBundle)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (train_features, train_labels, dev_features, dev_labels, scoring = "nmae", C_values = None, dual_options = None, scalers = None, hyperparams = None))]
#[allow(clippy::too_many_arguments, non_snake_case)]
fn grid_search(
    py: Python<'_>,
    train_features: &FeatureTable,
    train_labels: &LabelTable,
    dev_features: &FeatureTable,
    dev_labels: &LabelTable,
    scoring: &str,
    C_values: Option<Vec<f64>>,
    dual_options: Option<Vec<bool>>,
    scalers: Option<Vec<String>>,
    hyperparams: Option<SvrHyperparams>,
) -> PyResult<GridResult> {
    let mut grid = core::GridSpec::paper_grid(parse(scoring)?);
    if let Some(c) = C_values {
        grid.c_values = c;
    }
    if let Some(d) = dual_options {
        grid.dual_options = d;
    }
    if let Some(s) = scalers {
        grid.scaler_kinds = s.iter().map(|k| parse(k)).collect::<PyResult<_>>()?;
    }
    let hp = hyperparams.map_or_else(core::SvrHyperparams::default, |h| h.0);
    let holdout = core::Holdout {
        train_features: &train_features.0,
        train_labels: &train_labels.0,
        dev_features: &dev_features.0,
        dev_labels: &dev_labels.0,
    };
    py.detach(|| core::grid_search(holdout, &grid, &hp))
        .map(GridResult)
        .map_err(err)
}

/// Returns `(features, labels, partition)`.
#[pyfunction]
#[pyo3(signature = (seed = 42, n_models = 3, dim = 16, n_train = 200, n_dev = 80, n_test = 80, noise_scale = 0.3))]
fn generate_synthetic(
    seed: u64,
    n_models: usize,
    dim: usize,
    n_train: usize,
    n_dev: usize,
    n_test: usize,
    noise_scale: f64,
) -> PyResult<(Vec<FeatureTable>, LabelTable, PartitionMap)> {
    let spec = core::SyntheticSpec {
        n_train,
        n_dev,
        n_test,
        n_models,
        dim,
        noise_scale,
        seed,
    };
    let d = core::generate_synthetic(&spec).map_err(err)?;
    Ok((
        d.features.into_iter().map(FeatureTable).collect(),
        LabelTable(d.labels),
        PartitionMap(d.partition),
    ))
}

/// Split name to `(features, labels)`, rows in canonical order.
#[pyfunction]
fn align<'py>(
    py: Python<'py>,
    features: Vec<FeatureTable>,
    labels: &LabelTable,
    partition: &PartitionMap,
) -> PyResult<Bound<'py, PyDict>> {
    let tables: Vec<core::FeatureTable> = features.into_iter().map(|f| f.0).collect();
    let a = core::align(&tables, &labels.0, &partition.0).map_err(err)?;
    let d = PyDict::new(py);
    for view in [a.train, a.dev, a.test] {
        let feats: Vec<FeatureTable> = view.features.into_iter().map(FeatureTable).collect();
        d.set_item(view.split.as_str(), (feats, LabelTable(view.labels)))?;
    }
    Ok(d)
}

#[pymodule]
#[pyo3(name = "emoshare")]
fn emoshare_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("EmoshareError", m.py().get_type::<EmoshareError>())?;
    m.add("EMOTIONS", core::EMOTIONS.to_vec())?;
    m.add_class::<FeatureTable>()?;
    m.add_class::<LabelTable>()?;
    m.add_class::<PartitionMap>()?;
    m.add_class::<SvrHyperparams>()?;
    m.add_class::<PredictionMatrix>()?;
    m.add_class::<LinearModelBundle>()?;
    m.add_class::<EvalReport>()?;
    m.add_class::<GridResult>()?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(rank_average, m)?)?;
    m.add_function(wrap_pyfunction!(fuse_mean, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(train_bundle, m)?)?;
    m.add_function(wrap_pyfunction!(grid_search, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(align, m)?)?;
    Ok(())
}
