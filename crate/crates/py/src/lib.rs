//! Python bindings for `cfolab_core`.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cfolab_core::analysis;
use cfolab_core::channel::{self, ChannelProfile, ChannelRealization, ReceivedFrame};
use cfolab_core::estimator::{self, EstimatorParams, MlGrid};
use cfolab_core::harness::{self, ExperimentSpec, ResultRow};
use cfolab_core::{CfoError, RandomSource, C64};

fn err(e: CfoError) -> PyErr {
    match e {
        CfoError::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

#[pyclass(name = "SystemConfig", module = "cfolab", from_py_object)]
#[derive(Clone)]
struct PySystemConfig {
    inner: cfolab_core::SystemConfig,
}

#[pymethods]
impl PySystemConfig {
    #[new]
    #[pyo3(signature = (n, p, n_t, n_r, n_g, channel_len, offsets, chu_root=1))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n: usize,
        p: usize,
        n_t: usize,
        n_r: usize,
        n_g: usize,
        channel_len: usize,
        offsets: Vec<usize>,
        chu_root: usize,
    ) -> PyResult<Self> {
        let inner = cfolab_core::SystemConfig { n, p, n_t, n_r, n_g, channel_len, offsets, chu_root };
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    /// N = 1024, P = 64, N_r = 2, N_g = 80, L = 75 with the given lattice offsets.
    #[staticmethod]
    fn reference(offsets: Vec<usize>) -> Self {
        Self { inner: cfolab_core::SystemConfig::reference(&offsets) }
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }
    #[getter]
    fn p(&self) -> usize {
        self.inner.p
    }
    #[getter]
    fn n_t(&self) -> usize {
        self.inner.n_t
    }
    #[getter]
    fn n_r(&self) -> usize {
        self.inner.n_r
    }
    #[getter]
    fn n_g(&self) -> usize {
        self.inner.n_g
    }
    #[getter]
    fn channel_len(&self) -> usize {
        self.inner.channel_len
    }
    #[getter]
    fn offsets(&self) -> Vec<usize> {
        self.inner.offsets.clone()
    }
    #[getter]
    fn q(&self) -> usize {
        self.inner.q()
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "SystemConfig(n={}, p={}, n_t={}, n_r={}, n_g={}, channel_len={}, offsets={:?}, chu_root={})",
            c.n, c.p, c.n_t, c.n_r, c.n_g, c.channel_len, c.offsets, c.chu_root
        )
    }
}

#[pyclass(name = "TrainingSet", module = "cfolab", from_py_object)]
#[derive(Clone)]
struct PyTrainingSet {
    inner: cfolab_core::TrainingSet,
}

#[pymethods]
impl PyTrainingSet {
    #[staticmethod]
    fn cbts(cfg: &PySystemConfig) -> PyResult<Self> {
        cfolab_core::TrainingSet::cbts(&cfg.inner).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (cfg, seed, stream=0))]
    fn random(cfg: &PySystemConfig, seed: u64, stream: u64) -> PyResult<Self> {
        let mut rng = RandomSource::new(seed, stream);
        cfolab_core::TrainingSet::random(&cfg.inner, &mut rng)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    #[getter]
    fn kind(&self) -> String {
        self.inner.kind.to_string()
    }
    #[getter]
    fn freq_pilots(&self) -> Vec<Vec<C64>> {
        self.inner.freq_pilots.clone()
    }
    #[getter]
    fn time_sequences(&self) -> Vec<Vec<C64>> {
        self.inner.time_sequences.clone()
    }
}

#[pyclass(name = "Channel", module = "cfolab", from_py_object)]
#[derive(Clone)]
struct PyChannel {
    inner: ChannelRealization,
}

#[pymethods]
impl PyChannel {
    /// Tap vector for receive antenna `nu` and transmit antenna `mu`.
    fn taps(&self, nu: usize, mu: usize) -> PyResult<Vec<C64>> {
        if nu >= self.inner.n_r || mu >= self.inner.n_t {
            return Err(PyValueError::new_err("antenna index out of range"));
        }
        Ok(self.inner.tap(nu, mu).to_vec())
    }

    #[getter]
    fn energy(&self) -> f64 {
        self.inner.energy()
    }
}

#[pyclass(name = "Frame", module = "cfolab", from_py_object)]
#[derive(Clone)]
struct PyFrame {
    inner: ReceivedFrame,
}

#[pymethods]
impl PyFrame {
    #[getter]
    fn y(&self) -> Vec<Vec<C64>> {
        self.inner.y.clone()
    }
    #[getter]
    fn true_epsilon(&self) -> f64 {
        self.inner.true_epsilon
    }
    #[getter]
    fn noise_variance(&self) -> f64 {
        self.inner.noise_variance
    }
    #[getter]
    fn signal_power(&self) -> f64 {
        self.inner.signal_power
    }
}

fn profile_from(delays: Option<Vec<usize>>, powers_db: Option<Vec<f64>>) -> PyResult<ChannelProfile> {
    match (delays, powers_db) {
        (None, None) => Ok(ChannelProfile::reference()),
        (Some(delays), Some(powers_db)) => Ok(ChannelProfile { delays, powers_db }),
        _ => Err(PyValueError::new_err("give both delays and powers_db, or neither")),
    }
}

/// Rayleigh draw on the given profile (the six-tap reference profile by default).
#[pyfunction]
#[pyo3(signature = (cfg, seed, stream=0, delays=None, powers_db=None))]
fn draw_channel(
    cfg: &PySystemConfig,
    seed: u64,
    stream: u64,
    delays: Option<Vec<usize>>,
    powers_db: Option<Vec<f64>>,
) -> PyResult<PyChannel> {
    let profile = profile_from(delays, powers_db)?;
    let mut rng = RandomSource::new(seed, stream);
    channel::draw_channel(&profile, &cfg.inner, &mut rng)
        .map(|inner| PyChannel { inner })
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (training, chan, epsilon, noise_variance, cfg, seed=0, stream=0))]
fn transmit_receive(
    training: &PyTrainingSet,
    chan: &PyChannel,
    epsilon: f64,
    noise_variance: f64,
    cfg: &PySystemConfig,
    seed: u64,
    stream: u64,
) -> PyResult<PyFrame> {
    let mut rng = RandomSource::new(seed, stream);
    channel::transmit_receive(&training.inner, &chan.inner, epsilon, noise_variance, &cfg.inner, &mut rng)
        .map(|inner| PyFrame { inner })
        .map_err(err)
}

#[pyfunction]
fn model_receive(training: &PyTrainingSet, chan: &PyChannel, epsilon: f64, cfg: &PySystemConfig) -> PyResult<PyFrame> {
    channel::model_receive(&training.inner, &chan.inner, epsilon, &cfg.inner)
        .map(|inner| PyFrame { inner })
        .map_err(err)
}

fn estimate_dict<'py>(py: Python<'py>, est: &estimator::CfoEstimate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("epsilon_hat", est.epsilon_hat)?;
    d.set_item("kappa", est.kappa)?;
    d.set_item("candidates", est.candidates.clone())?;
    d.set_item("scores", est.scores.clone())?;
    Ok(d)
}

/// Diagonal sums `c_q` of the folded sample correlation.
#[pyfunction]
fn correlation_sums(frame: &PyFrame, cfg: &PySystemConfig) -> PyResult<Vec<C64>> {
    estimator::stack(&frame.inner, &cfg.inner).map(|sf| sf.c).map_err(err)
}

#[pyfunction]
fn estimate_simplified<'py>(
    py: Python<'py>,
    frame: &PyFrame,
    cfg: &PySystemConfig,
    iota: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let sf = estimator::stack(&frame.inner, &cfg.inner).map_err(err)?;
    let params = EstimatorParams { iota, grid: MlGrid::default() };
    let est = estimator::estimate_simplified(&sf, &params, &cfg.inner).map_err(err)?;
    estimate_dict(py, &est)
}

#[pyfunction]
#[pyo3(signature = (frame, cfg, coarse=0.05, fine=1e-4))]
fn estimate_ml_grid<'py>(
    py: Python<'py>,
    frame: &PyFrame,
    cfg: &PySystemConfig,
    coarse: f64,
    fine: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let sf = estimator::stack(&frame.inner, &cfg.inner).map_err(err)?;
    let est = estimator::estimate_ml_grid(&sf, &cfg.inner, MlGrid { coarse, fine }).map_err(err)?;
    estimate_dict(py, &est)
}

#[pyfunction]
fn rho(iota: usize, cfg: &PySystemConfig) -> PyResult<f64> {
    analysis::rho(iota, &cfg.inner).map_err(err)
}

#[pyfunction]
fn mse_formula(gamma: f64, iota: usize, cfg: &PySystemConfig) -> PyResult<f64> {
    analysis::mse_formula(gamma, iota, &cfg.inner).map_err(err)
}

#[pyfunction]
fn gamma_from_snr_db(snr_db: f64, cfg: &PySystemConfig) -> f64 {
    analysis::gamma_from_snr_db(snr_db, &cfg.inner)
}

/// `(optimal, degenerate, listing)` where `listing` pairs each usable ι with its MSE.
type IotaTable = (Vec<usize>, Vec<usize>, Vec<(usize, f64)>);

#[pyfunction]
fn optimal_iota(gamma: f64, cfg: &PySystemConfig) -> PyResult<IotaTable> {
    let o = analysis::optimal_iota(gamma, &cfg.inner).map_err(err)?;
    Ok((o.optimal, o.degenerate, o.listing))
}

/// Channel-averaged bound for the Chu-based training at each SNR point.
#[pyfunction]
#[pyo3(signature = (cfg, snr_db, n_draws=500, seed=42))]
fn emcb(py: Python<'_>, cfg: &PySystemConfig, snr_db: Vec<f64>, n_draws: usize, seed: u64) -> PyResult<Vec<f64>> {
    let cfg = cfg.inner.clone();
    py.detach(move || {
        let ts = cfolab_core::TrainingSet::cbts(&cfg)?;
        analysis::emcb(&cfg, &ChannelProfile::reference(), &ts, &snr_db, n_draws, seed).map(|r| r.bound)
    })
    .map_err(err)
}

fn csv(rows: &[ResultRow]) -> PyResult<String> {
    let mut buf = Vec::new();
    harness::write_csv(rows, &mut buf).map_err(err)?;
    String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn spec_from(spec_json: Option<&str>, preset: Option<&str>) -> PyResult<ExperimentSpec> {
    match (spec_json, preset) {
        (Some(text), None) => ExperimentSpec::from_json(text).map_err(err),
        (None, Some(name)) => Ok(ExperimentSpec::preset(name.parse().map_err(err)?)),
        _ => Err(PyValueError::new_err("give exactly one of spec_json or preset")),
    }
}

/// Runs an experiment and returns the CSV text.
///
/// `kind` is one of `mse-vs-snr`, `mse-vs-iota`, `emcb` or `bench`.
#[pyfunction]
#[pyo3(signature = (kind, spec_json=None, preset=None))]
fn run_experiment(py: Python<'_>, kind: &str, spec_json: Option<&str>, preset: Option<&str>) -> PyResult<String> {
    let spec = spec_from(spec_json, preset)?;
    let rows = py
        .detach(|| match kind {
            "mse-vs-snr" => harness::run_with_bound(&spec),
            "mse-vs-iota" => harness::run_mse_vs_iota(&spec),
            "emcb" => harness::run_emcb(&spec).map(|(_, rows)| rows),
            "bench" => harness::run_bench(&spec).map(|r| r.rows()),
            other => Err(CfoError::Config(format!("unknown experiment `{other}`"))),
        })
        .map_err(err)?;
    csv(&rows)
}

#[pymodule]
fn cfolab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystemConfig>()?;
    m.add_class::<PyTrainingSet>()?;
    m.add_class::<PyChannel>()?;
    m.add_class::<PyFrame>()?;
    m.add_function(wrap_pyfunction!(draw_channel, m)?)?;
    m.add_function(wrap_pyfunction!(transmit_receive, m)?)?;
    m.add_function(wrap_pyfunction!(model_receive, m)?)?;
    m.add_function(wrap_pyfunction!(correlation_sums, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_simplified, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_ml_grid, m)?)?;
    m.add_function(wrap_pyfunction!(rho, m)?)?;
    m.add_function(wrap_pyfunction!(mse_formula, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_from_snr_db, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_iota, m)?)?;
    m.add_function(wrap_pyfunction!(emcb, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("CSV_HEADER", harness::CSV_HEADER)?;
    Ok(())
}
