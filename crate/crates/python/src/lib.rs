//! Python bindings. Build with `--features extension-module` and import the
//! resulting library as `mvtrust`.

use std::path::PathBuf;

use mvtrust::aggregation;
use mvtrust::data::{load_dataset, make_synthetic_fixture, write_dataset, FixtureSpec, MultiViewDataset, NoiseConfig};
use mvtrust::experiment::pipeline::sample_evidence;
use mvtrust::experiment::report::compute_metrics;
use mvtrust::experiment::{
    cmd_evaluate, cmd_oversample_retrain, cmd_train, run_pipeline, EvaluateOptions,
    ExperimentConfig,
};
use mvtrust::loss::{self, LossConfig};
use mvtrust::network::{self, Checkpoint, MultiViewModel, Optimizer, TrainConfig};
use mvtrust::opinion::{BaseRates, DirichletParams, Evidence, Opinion};
use mvtrust::oversample::{self, BalanceConfig, WeightScheme, WeightTransform};
use mvtrust::Error;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Divergence { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for mvtrust::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Any serializable value as plain Python objects.
fn to_python<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn base_rates(k: usize, rates: Option<Vec<f64>>) -> PyResult<BaseRates> {
    match rates {
        Some(r) => BaseRates::new(r).py(),
        None => BaseRates::uniform(k).py(),
    }
}

/// A subjective-logic opinion: beliefs, uncertainty and base rates.
#[pyclass(name = "Opinion", module = "mvtrust", skip_from_py_object, frozen)]
#[derive(Clone)]
struct PyOpinion(Opinion);

#[pymethods]
impl PyOpinion {
    #[new]
    #[pyo3(signature = (beliefs, uncertainty, base_rates=None))]
    fn new(beliefs: Vec<f64>, uncertainty: f64, base_rates: Option<Vec<f64>>) -> PyResult<Self> {
        let a = self::base_rates(beliefs.len(), base_rates)?;
        Ok(PyOpinion(Opinion::new(beliefs, uncertainty, a).py()?))
    }

    #[staticmethod]
    #[pyo3(signature = (evidence, base_rates=None))]
    fn from_evidence(evidence: Vec<f64>, base_rates: Option<Vec<f64>>) -> PyResult<Self> {
        let a = self::base_rates(evidence.len(), base_rates)?;
        let e = Evidence::new(evidence).py()?;
        Ok(PyOpinion(e.to_opinion(&a).py()?))
    }

    #[getter]
    fn beliefs(&self) -> Vec<f64> {
        self.0.beliefs().to_vec()
    }

    #[getter]
    fn uncertainty(&self) -> f64 {
        self.0.uncertainty()
    }

    #[getter]
    fn base_rates(&self) -> Vec<f64> {
        self.0.base_rates().rates().to_vec()
    }

    /// Projected class probabilities `b_k + a_k u`.
    fn project(&self) -> Vec<f64> {
        self.0.project().probs().to_vec()
    }

    fn to_evidence(&self) -> PyResult<Vec<f64>> {
        Ok(self.0.to_evidence().py()?.into_inner())
    }

    fn decision(&self) -> usize {
        self.0.decision()
    }

    fn __repr__(&self) -> String {
        format!("Opinion(beliefs={:?}, uncertainty={})", self.0.beliefs(), self.0.uncertainty())
    }
}

fn opinions(list: &[PyRef<'_, PyOpinion>]) -> Vec<Opinion> {
    list.iter().map(|o| o.0.clone()).collect()
}

/// Joint opinion of the views, folded in evidence space.
#[pyfunction]
fn aggregate_views(views: Vec<PyRef<'_, PyOpinion>>) -> PyResult<PyOpinion> {
    Ok(PyOpinion(aggregation::aggregate_views(&opinions(&views)).py()?.0))
}

/// Joint opinion of the views, folded with the opinion-space closed form.
#[pyfunction]
fn aggregate_views_opinion_space(views: Vec<PyRef<'_, PyOpinion>>) -> PyResult<PyOpinion> {
    Ok(PyOpinion(aggregation::aggregate_views_opinion_space(&opinions(&views)).py()?))
}

#[pyfunction]
fn fuse_weighted(a: PyRef<'_, PyOpinion>, gamma_a: f64, b: PyRef<'_, PyOpinion>, gamma_b: f64) -> PyResult<PyOpinion> {
    Ok(PyOpinion(aggregation::fuse_weighted_opinion(&a.0, gamma_a, &b.0, gamma_b).py()?))
}

#[pyfunction]
fn fold_evidence(evidences: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let e = evidences.into_iter().map(Evidence::new).collect::<mvtrust::Result<Vec<_>>>().py()?;
    Ok(aggregation::fold_evidence(&e).py()?.into_inner())
}

#[pyfunction]
fn loss_ace(alphas: Vec<f64>, label: usize) -> PyResult<f64> {
    loss::loss_ace(&DirichletParams::new(alphas).py()?, label).py()
}

#[pyfunction]
fn loss_kl(alphas: Vec<f64>, label: usize) -> PyResult<f64> {
    loss::loss_kl(&DirichletParams::new(alphas).py()?, label).py()
}

#[pyfunction]
#[pyo3(signature = (alphas, label, epoch=0, anneal_epochs=10))]
fn loss_total(alphas: Vec<f64>, label: usize, epoch: usize, anneal_epochs: usize) -> PyResult<f64> {
    let cfg = LossConfig::new(anneal_epochs, epoch).py()?;
    loss::loss_total(&DirichletParams::new(alphas).py()?, label, &cfg).py()
}

/// Gradient of the total loss with respect to the evidence.
#[pyfunction]
#[pyo3(signature = (evidence, label, epoch=0, anneal_epochs=10))]
fn loss_grad_evidence(evidence: Vec<f64>, label: usize, epoch: usize, anneal_epochs: usize) -> PyResult<Vec<f64>> {
    let cfg = LossConfig::new(anneal_epochs, epoch).py()?;
    loss::loss_grad_evidence(&Evidence::new(evidence).py()?, label, &cfg).py()
}

#[pyfunction]
fn uncertainty_entropy(opinion: PyRef<'_, PyOpinion>, label: usize) -> PyResult<f64> {
    oversample::uncertainty_entropy(&opinion.0, label).py()
}

#[pyfunction]
fn evidence_distance(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    oversample::evidence_distance(&Evidence::new(a).py()?, &Evidence::new(b).py()?).py()
}

/// Mixing weights from the center's and neighbors' uncertainty entropies.
#[pyfunction]
fn weights_from_entropies(entropies: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(oversample::weights_from_entropies(&entropies, WeightTransform::Inverse)
        .py()?
        .weights()
        .to_vec())
}

/// Labelled multi-view feature matrices.
#[pyclass(name = "Dataset", module = "mvtrust", skip_from_py_object, frozen)]
#[derive(Clone)]
struct PyDataset(MultiViewDataset);

#[pymethods]
impl PyDataset {
    /// Reads a dataset manifest.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyDataset(load_dataset(&path).py()?.0))
    }

    /// Gaussian blobs, `class_counts[k]` rows for class `k`.
    #[staticmethod]
    #[pyo3(signature = (view_dims, class_counts, separation=2.0, seed=0))]
    fn fixture(view_dims: Vec<usize>, class_counts: Vec<usize>, separation: f64, seed: u64) -> PyResult<Self> {
        let spec = FixtureSpec {
            num_classes: class_counts.len(),
            view_dims,
            class_counts,
            separation,
            seed,
        };
        Ok(PyDataset(make_synthetic_fixture(&spec).py()?))
    }

    /// Writes the dataset in manifest form; returns the manifest path.
    fn write(&self, dir: PathBuf, stem: &str) -> PyResult<PathBuf> {
        write_dataset(&dir, stem, &self.0, None).py()
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name().to_string()
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.0.num_classes()
    }

    #[getter]
    fn view_dims(&self) -> Vec<usize> {
        self.0.view_dims()
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.0.labels().to_vec()
    }

    fn class_counts(&self) -> Vec<usize> {
        self.0.class_counts()
    }

    /// Rows of view `v` as lists.
    fn view(&self, v: usize) -> PyResult<Vec<Vec<f64>>> {
        if v >= self.0.num_views() {
            return Err(PyValueError::new_err(format!("view {v} out of range")));
        }
        let m = self.0.view(v);
        Ok((0..m.rows()).map(|i| m.row(i).to_vec()).collect())
    }

    /// The views of sample `i`.
    fn sample(&self, i: usize) -> PyResult<Vec<Vec<f64>>> {
        if i >= self.0.len() {
            return Err(PyValueError::new_err(format!("sample {i} out of range")));
        }
        Ok(self.0.sample(i).into_iter().map(<[f64]>::to_vec).collect())
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(name={:?}, rows={}, K={}, view_dims={:?})",
            self.0.name(),
            self.0.len(),
            self.0.num_classes(),
            self.0.view_dims()
        )
    }
}

/// One evidential network per view.
#[pyclass(name = "Model", module = "mvtrust", skip_from_py_object)]
#[derive(Clone)]
struct PyModel(MultiViewModel);

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (view_dims, num_classes, hidden=64, seed=0))]
    fn new(view_dims: Vec<usize>, num_classes: usize, hidden: usize, seed: u64) -> PyResult<Self> {
        Ok(PyModel(MultiViewModel::init(&view_dims, hidden, num_classes, seed).py()?))
    }

    #[staticmethod]
    fn load_checkpoint(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel(Checkpoint::load(&path).py()?.model().py()?))
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.0.num_classes()
    }

    #[getter]
    fn view_dims(&self) -> Vec<usize> {
        self.0.view_dims()
    }

    /// Trains in place with Adam; returns the per-epoch mean loss.
    #[pyo3(signature = (dataset, epochs=200, batch_size=64, learning_rate=1e-3, seed=0))]
    fn train(
        &mut self,
        dataset: PyRef<'_, PyDataset>,
        epochs: usize,
        batch_size: usize,
        learning_rate: f64,
        seed: u64,
    ) -> PyResult<Vec<f64>> {
        let cfg = TrainConfig {
            epochs,
            batch_size,
            optimizer: Optimizer::adam(learning_rate),
            ..TrainConfig::default()
        };
        Ok(network::train(&mut self.0, &dataset.0, &cfg, seed).py()?.loss_history)
    }

    /// Decision, joint opinion, joint evidence and per-view opinions for one sample.
    fn predict<'py>(&self, py: Python<'py>, views: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
        let refs: Vec<&[f64]> = views.iter().map(Vec::as_slice).collect();
        let p = self.0.predict(&refs).py()?;
        let out = PyDict::new(py);
        out.set_item("decision", p.decision)?;
        out.set_item("uncertainty", p.joint.uncertainty())?;
        out.set_item("joint_evidence", p.joint_evidence.into_inner())?;
        out.set_item("joint", PyOpinion(p.joint))?;
        out.set_item("per_view", p.per_view.into_iter().map(PyOpinion).collect::<Vec<_>>())?;
        Ok(out)
    }

    /// Accuracy and uncertainty metrics on `dataset`. Head/medium/tail groups
    /// come from `train_counts` (the dataset's own counts when omitted).
    #[pyo3(signature = (dataset, train_counts=None))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        dataset: PyRef<'_, PyDataset>,
        train_counts: Option<Vec<usize>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let counts = train_counts.unwrap_or_else(|| dataset.0.class_counts());
        let metrics = compute_metrics(&self.0, &dataset.0, &counts).py()?;
        to_python(py, &metrics)
    }
}

/// Balances every class with pseudo-samples built from `model`'s evidence.
/// Returns the augmented dataset and the pseudo-sample count per class.
#[pyfunction]
#[pyo3(signature = (dataset, model, neighbors=3, random_weights=false, seed=0, target=None))]
fn oversample_dataset(
    dataset: PyRef<'_, PyDataset>,
    model: PyRef<'_, PyModel>,
    neighbors: usize,
    random_weights: bool,
    seed: u64,
    target: Option<usize>,
) -> PyResult<(PyDataset, Vec<usize>)> {
    let evidence = sample_evidence(&model.0, &dataset.0).py()?;
    let cfg = BalanceConfig {
        neighbors,
        transform: WeightTransform::Inverse,
        scheme: if random_weights { WeightScheme::Random } else { WeightScheme::Uncertainty },
        seed,
    };
    let report = oversample::balance_all(&dataset.0, &evidence, model.0.base_rates(), &cfg, target).py()?;
    let augmented = oversample::augment(&dataset.0, &report.samples).py()?;
    Ok((PyDataset(augmented), report.pseudo_counts))
}

/// Experiment settings; every field has a default.
#[pyclass(name = "ExperimentConfig", module = "mvtrust", skip_from_py_object, frozen)]
#[derive(Clone)]
struct PyConfig(ExperimentConfig);

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (toml=""))]
    fn new(toml: &str) -> PyResult<Self> {
        Ok(PyConfig(ExperimentConfig::from_toml_str(toml).py()?))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyConfig(ExperimentConfig::load(&path).py()?))
    }

    fn hash(&self) -> String {
        self.0.hash()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_python(py, &self.0)
    }
}

/// Runs the whole pipeline in memory; returns the phase reports.
#[pyfunction]
fn run_experiment<'py>(
    py: Python<'py>,
    config: PyRef<'_, PyConfig>,
    dataset: PyRef<'_, PyDataset>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = &config.0;
    let run = run_pipeline(cfg, &dataset.0).py()?;
    to_python(py, &run.evaluate(&cfg.noise, cfg.seed).py()?)
}

/// `train` command; returns the report.
#[pyfunction]
fn train<'py>(py: Python<'py>, config: PyRef<'_, PyConfig>, out_dir: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    to_python(py, &cmd_train(&config.0, &out_dir).py()?.report)
}

/// `oversample-retrain` command; returns the report.
#[pyfunction]
fn oversample_retrain<'py>(
    py: Python<'py>,
    config: PyRef<'_, PyConfig>,
    checkpoint: PathBuf,
    out_dir: PathBuf,
) -> PyResult<Bound<'py, PyAny>> {
    to_python(py, &cmd_oversample_retrain(&config.0, &checkpoint, &out_dir).py()?.report)
}

/// `evaluate` command with optional Gaussian (`sigma`) or conflictive (`fraction`) noise.
#[pyfunction]
#[pyo3(signature = (checkpoint, out_dir, sigma=None, fraction=None))]
fn evaluate<'py>(
    py: Python<'py>,
    checkpoint: PathBuf,
    out_dir: PathBuf,
    sigma: Option<f64>,
    fraction: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let noise = match (sigma, fraction) {
        (None, None) => NoiseConfig::None,
        (Some(sigma), None) => NoiseConfig::Gaussian { sigma },
        (None, Some(fraction)) => NoiseConfig::Conflictive { fraction },
        _ => return Err(PyValueError::new_err("give sigma or fraction, not both")),
    };
    let opts = EvaluateOptions {
        noise,
        ..EvaluateOptions::default()
    };
    to_python(py, &cmd_evaluate(&checkpoint, &opts, &out_dir).py()?.report)
}

#[pymodule]
#[pyo3(name = "mvtrust")]
fn mvtrust_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyOpinion>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(aggregate_views, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate_views_opinion_space, m)?)?;
    m.add_function(wrap_pyfunction!(fuse_weighted, m)?)?;
    m.add_function(wrap_pyfunction!(fold_evidence, m)?)?;
    m.add_function(wrap_pyfunction!(loss_ace, m)?)?;
    m.add_function(wrap_pyfunction!(loss_kl, m)?)?;
    m.add_function(wrap_pyfunction!(loss_total, m)?)?;
    m.add_function(wrap_pyfunction!(loss_grad_evidence, m)?)?;
    m.add_function(wrap_pyfunction!(uncertainty_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(evidence_distance, m)?)?;
    m.add_function(wrap_pyfunction!(weights_from_entropies, m)?)?;
    m.add_function(wrap_pyfunction!(oversample_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(oversample_retrain, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
