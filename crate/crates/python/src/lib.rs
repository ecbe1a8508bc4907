use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mibrv::brv::{featurize_all_with, FeaturizerBinding};
use mibrv::{dist, eval, io, svm, synthetic};
use mibrv::{Bag, BagLabel, DistParams, Normalization, OperatorId, ReferenceSet};

fn to_py(err: mibrv::Error) -> PyErr {
    match err {
        mibrv::Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn label_from_int(v: Option<i64>) -> PyResult<Option<BagLabel>> {
    match v {
        None => Ok(None),
        Some(1) => Ok(Some(BagLabel::Positive)),
        Some(-1) | Some(0) => Ok(Some(BagLabel::Negative)),
        Some(other) => Err(PyValueError::new_err(format!("label must be 1, -1 or 0, got {other}"))),
    }
}

fn label_to_int(l: BagLabel) -> i64 {
    match l {
        BagLabel::Positive => 1,
        BagLabel::Negative => -1,
    }
}

fn rows_bag(rows: Vec<Vec<f64>>) -> Bag {
    Bag::from_rows("", rows, None)
}

fn params(k: usize, ops: Vec<u8>) -> PyResult<DistParams> {
    let ops = ops
        .into_iter()
        .map(OperatorId::from_number)
        .collect::<mibrv::Result<Vec<_>>>()
        .map_err(to_py)?;
    DistParams::new(k, ops).map_err(to_py)
}

fn normalization(s: &str) -> PyResult<Normalization> {
    s.parse().map_err(to_py)
}

/// A validated multi-instance dataset.
#[pyclass(module = "mibrv_py", frozen)]
struct Dataset {
    inner: mibrv::Dataset,
}

#[pymethods]
impl Dataset {
    /// Builds a dataset from `(id, label, rows)` tuples; label is 1, -1 or None.
    #[new]
    fn new(bags: Vec<(String, Option<i64>, Vec<Vec<f64>>)>) -> PyResult<Self> {
        let bags = bags
            .into_iter()
            .map(|(id, label, rows)| Ok(Bag::from_rows(id, rows, label_from_int(label)?)))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Dataset {
            inner: mibrv::Dataset::new(bags).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(Dataset {
            inner: io::read_dataset_file(path).map_err(to_py)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (bags=100, dim=10, seed=7))]
    fn synthetic(bags: usize, dim: usize, seed: u64) -> PyResult<Self> {
        let cfg = synthetic::SyntheticConfig {
            bags,
            dim,
            seed,
            ..Default::default()
        };
        Ok(Dataset {
            inner: synthetic::generate(&cfg).map_err(to_py)?,
        })
    }

    fn write(&self, path: &str) -> PyResult<()> {
        let file = std::fs::File::create(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        io::write_dataset(&self.inner, file).map_err(to_py)
    }

    fn to_text(&self) -> PyResult<String> {
        let mut out = Vec::new();
        io::write_dataset(&self.inner, &mut out).map_err(to_py)?;
        String::from_utf8(out).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn ids(&self) -> Vec<String> {
        self.inner.bags().iter().map(|b| b.id().to_string()).collect()
    }

    fn labels(&self) -> Vec<Option<i64>> {
        self.inner.labels().into_iter().map(|l| l.map(label_to_int)).collect()
    }

    fn bag(&self, index: usize) -> PyResult<Vec<Vec<f64>>> {
        let bag = self
            .inner
            .bags()
            .get(index)
            .ok_or_else(|| PyValueError::new_err("bag index out of range"))?;
        Ok(bag.instances().iter().map(|i| i.features().to_vec()).collect())
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// A trained linear classifier over bag reference vectors.
#[pyclass(module = "mibrv_py", frozen)]
struct LinearModel {
    inner: svm::LinearModel,
}

#[pymethods]
impl LinearModel {
    #[staticmethod]
    #[pyo3(signature = (features, labels, c=1.0, tolerance=0.1, max_passes=1000, bias_scale=1.0, seed=0))]
    fn train(
        features: Vec<Vec<f64>>,
        labels: Vec<i64>,
        c: f64,
        tolerance: f64,
        max_passes: usize,
        bias_scale: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let labels = labels
            .into_iter()
            .map(|l| label_from_int(Some(l)).map(Option::unwrap))
            .collect::<PyResult<Vec<_>>>()?;
        let cfg = svm::SvmConfig {
            c,
            tolerance,
            max_passes,
            bias_scale,
            seed,
        };
        Ok(LinearModel {
            inner: svm::train(&features, &labels, &cfg).map_err(to_py)?,
        })
    }

    /// Trains on `dataset` with the dataset itself as the reference set.
    #[staticmethod]
    #[pyo3(signature = (dataset, k=2, ops=vec![1, 2, 3, 4, 5, 6], normalize="block", c=1.0, seed=0))]
    fn fit(dataset: &Dataset, k: usize, ops: Vec<u8>, normalize: &str, c: f64, seed: u64) -> PyResult<Self> {
        let p = params(k, ops)?;
        let norm = normalization(normalize)?;
        let ds = &dataset.inner;
        let refs = ReferenceSet::from_dataset(ds);
        let xs: Vec<Vec<f64>> = featurize_all_with(ds, &refs, &p, norm)
            .map_err(to_py)?
            .into_iter()
            .map(|v| v.into_values())
            .collect();
        let labels = ds.require_labels().map_err(to_py)?;
        let cfg = svm::SvmConfig {
            c,
            seed,
            ..Default::default()
        };
        let model = svm::train(&xs, &labels, &cfg).map_err(to_py)?;
        Ok(LinearModel {
            inner: model.with_featurizer(FeaturizerBinding::new(&refs, &p, norm)),
        })
    }

    /// Predicted labels for every bag of `dataset`, featurized against `refs`.
    fn predict_bags(&self, refs: &Dataset, dataset: &Dataset) -> PyResult<Vec<i64>> {
        let refs = ReferenceSet::from_dataset(&refs.inner);
        self.inner.check_references(&refs).map_err(to_py)?;
        let binding = self.inner.featurizer.as_ref().expect("checked above");
        let vectors =
            featurize_all_with(&dataset.inner, &refs, &binding.params, binding.normalization).map_err(to_py)?;
        vectors
            .iter()
            .map(|v| svm::predict(&self.inner, v.values()).map(label_to_int).map_err(to_py))
            .collect()
    }

    fn predict(&self, feature: Vec<f64>) -> PyResult<i64> {
        svm::predict(&self.inner, &feature).map(label_to_int).map_err(to_py)
    }

    fn decision_value(&self, feature: Vec<f64>) -> PyResult<f64> {
        svm::decision_value(&self.inner, &feature).map_err(to_py)
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights.clone()
    }

    #[getter]
    fn bias(&self) -> f64 {
        self.inner.bias
    }

    fn save(&self, path: &str) -> PyResult<()> {
        io::write_model_file(&self.inner, path).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(LinearModel {
            inner: io::read_model_file(path).map_err(to_py)?,
        })
    }
}

#[pyfunction]
fn euclidean(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    dist::euclidean(&a.into(), &b.into()).map_err(to_py)
}

#[pyfunction]
fn directed_hausdorff(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<f64> {
    dist::directed_hausdorff(&rows_bag(a), &rows_bag(b)).map_err(to_py)
}

#[pyfunction]
fn symmetric_hausdorff(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<f64> {
    dist::symmetric_hausdorff(&rows_bag(a), &rows_bag(b)).map_err(to_py)
}

/// Operator `op` (1..=6) averaged over `k` neighbors, from bag `a` to bag `b`.
#[pyfunction]
fn bar_operator(op: u8, k: usize, a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<f64> {
    let op = OperatorId::from_number(op).map_err(to_py)?;
    dist::bar_operator(op, k, &rows_bag(a), &rows_bag(b)).map_err(to_py)
}

#[pyfunction]
fn oracle_bar_operator(op: u8, k: usize, a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<f64> {
    let op = OperatorId::from_number(op).map_err(to_py)?;
    dist::oracle_bar_operator(op, k, &rows_bag(a), &rows_bag(b)).map_err(to_py)
}

/// Bag reference vectors of every bag in `dataset` against `refs`.
#[pyfunction]
#[pyo3(signature = (dataset, refs, k=2, ops=vec![1, 2, 3, 4, 5, 6], normalize="block"))]
fn featurize(dataset: &Dataset, refs: &Dataset, k: usize, ops: Vec<u8>, normalize: &str) -> PyResult<Vec<Vec<f64>>> {
    let refs = ReferenceSet::from_dataset(&refs.inner);
    let vectors =
        featurize_all_with(&dataset.inner, &refs, &params(k, ops)?, normalization(normalize)?).map_err(to_py)?;
    Ok(vectors.into_iter().map(|v| v.into_values()).collect())
}

/// Repeated stratified cross-validation; returns a dict with `mean`, `std`
/// and the `repeats x folds` accuracy matrix under `per_fold`.
#[pyfunction]
#[pyo3(signature = (dataset, k=2, ops=vec![1, 2, 3, 4, 5, 6], folds=10, repeats=10, seed=0, c=1.0, c_grid=None, normalize="block"))]
#[allow(clippy::too_many_arguments)]
fn cross_validate<'py>(
    py: Python<'py>,
    dataset: &Dataset,
    k: usize,
    ops: Vec<u8>,
    folds: usize,
    repeats: usize,
    seed: u64,
    c: f64,
    c_grid: Option<Vec<f64>>,
    normalize: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = eval::CvConfig {
        folds,
        repeats,
        seed,
        params: params(k, ops)?,
        normalization: normalization(normalize)?,
        svm: svm::SvmConfig {
            c,
            seed,
            ..Default::default()
        },
        c_grid,
        ..Default::default()
    };
    let report = eval::run_cv(&dataset.inner, &cfg).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("mean", report.mean_accuracy)?;
    out.set_item("std", report.std_accuracy)?;
    out.set_item("per_fold", report.per_fold_accuracy())?;
    out.set_item("report", report.to_text(false))?;
    Ok(out)
}

#[pymodule]
fn mibrv_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<LinearModel>()?;
    m.add_function(wrap_pyfunction!(euclidean, m)?)?;
    m.add_function(wrap_pyfunction!(directed_hausdorff, m)?)?;
    m.add_function(wrap_pyfunction!(symmetric_hausdorff, m)?)?;
    m.add_function(wrap_pyfunction!(bar_operator, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_bar_operator, m)?)?;
    m.add_function(wrap_pyfunction!(featurize, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    Ok(())
}
