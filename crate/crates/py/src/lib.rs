//! Python bindings: `import ddn`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ddn_core::fusion::{self, FusionMapQuery};
use ddn_core::sim::{self, NetworkConfig, Protocol, System};
use ddn_core::{single, verify, DdnError, LinePosition, ObservationModel};

fn err(e: DdnError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn position(x: Option<f64>) -> LinePosition {
    match x {
        Some(x) if x.is_finite() => LinePosition::Finite(x),
        _ => LinePosition::Infinite,
    }
}

#[pyclass(name = "OperatingPoint", get_all, frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyOperatingPoint {
    p_f: f64,
    p_m: f64,
}

#[pymethods]
impl PyOperatingPoint {
    #[new]
    fn new(p_f: f64, p_m: f64) -> PyResult<Self> {
        let op = ddn_core::OperatingPoint::new(p_f, p_m).map_err(err)?;
        Ok(op.into())
    }

    fn __repr__(&self) -> String {
        format!("OperatingPoint(p_f={}, p_m={})", self.p_f, self.p_m)
    }
}

impl From<ddn_core::OperatingPoint> for PyOperatingPoint {
    fn from(op: ddn_core::OperatingPoint) -> Self {
        Self {
            p_f: op.p_f,
            p_m: op.p_m,
        }
    }
}

impl From<PyOperatingPoint> for ddn_core::OperatingPoint {
    fn from(op: PyOperatingPoint) -> Self {
        Self {
            p_f: op.p_f,
            p_m: op.p_m,
        }
    }
}

#[pyclass(name = "ButterflyRegion", frozen)]
struct PyButterflyRegion(ddn_core::ButterflyRegion);

#[pymethods]
impl PyButterflyRegion {
    #[new]
    fn new(theta: f64) -> PyResult<Self> {
        Ok(Self(ddn_core::ButterflyRegion::new(theta).map_err(err)?))
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.0.theta()
    }

    #[getter]
    fn theta_hat(&self) -> f64 {
        self.0.theta_hat()
    }

    fn contains(&self, p_f: f64, p_m: f64) -> bool {
        self.0.contains(ddn_core::OperatingPoint { p_f, p_m })
    }

    fn area(&self) -> f64 {
        self.0.area()
    }
}

#[pyclass(name = "GaussianShiftModel", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGaussianShiftModel(ddn_core::GaussianShiftModel);

#[pymethods]
impl PyGaussianShiftModel {
    #[new]
    fn new(mu: f64) -> PyResult<Self> {
        Ok(Self(ddn_core::GaussianShiftModel::new(mu).map_err(err)?))
    }

    #[staticmethod]
    fn from_theta(theta: f64) -> PyResult<Self> {
        Ok(Self(ddn_core::GaussianShiftModel::from_theta(theta).map_err(err)?))
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.0.mu()
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.0.theta()
    }

    #[getter]
    fn lrt_threshold(&self) -> f64 {
        self.0.lrt_threshold()
    }

    fn operating_point(&self) -> PyOperatingPoint {
        self.0.operating_point().into()
    }

    fn point_at_ratio(&self, ratio: f64) -> PyResult<PyOperatingPoint> {
        Ok(self.0.point_at_ratio(ratio).map_err(err)?.into())
    }
}

#[pyclass(name = "FusionRule", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyFusionRule(ddn_core::FusionRule);

#[pymethods]
impl PyFusionRule {
    #[new]
    #[pyo3(signature = (sensors, threshold, tie_prob = 0.0))]
    fn new(sensors: u64, threshold: u64, tie_prob: f64) -> PyResult<Self> {
        Ok(Self(ddn_core::FusionRule::new(sensors, threshold, tie_prob).map_err(err)?))
    }

    #[staticmethod]
    fn majority(sensors: u64) -> PyResult<Self> {
        Ok(Self(ddn_core::FusionRule::majority(sensors).map_err(err)?))
    }

    #[getter]
    fn sensors(&self) -> u64 {
        self.0.sensors()
    }

    #[getter]
    fn threshold(&self) -> u64 {
        self.0.threshold()
    }

    fn system_pf(&self, p_f: f64) -> PyResult<f64> {
        self.0.system_pf(p_f).map_err(err)
    }

    fn system_pm(&self, p_m: f64) -> PyResult<f64> {
        self.0.system_pm(p_m).map_err(err)
    }
}

#[pyclass(name = "WfLossReport", get_all, frozen)]
struct PyWfLossReport {
    theta: f64,
    sensors: u64,
    wof_error: f64,
    wf_error: f64,
    loss: f64,
    best_k: u64,
    best_point: PyOperatingPoint,
    verified: Option<bool>,
}

#[pyclass(name = "TrialStats", get_all, frozen)]
struct PyTrialStats {
    false_alarms: u64,
    misses: u64,
    trials_h0: u64,
    trials_h1: u64,
    est_pf: f64,
    est_pm: f64,
    stderr_pf: f64,
    stderr_pm: f64,
    fallbacks: u64,
}

#[pyclass(name = "Claim", get_all, frozen)]
struct PyClaim {
    name: String,
    grid: String,
    tolerance: f64,
    passed: bool,
    detail: String,
}

#[pyfunction]
fn binom_tail_ge(sensors: u64, j: i64, p: f64) -> PyResult<f64> {
    ddn_core::binom_tail_ge(sensors, j, p).map_err(err)
}

#[pyfunction]
fn consensus_pf(sensors: u64, p_f: f64) -> PyResult<f64> {
    ddn_core::consensus_pf(sensors, p_f).map_err(err)
}

#[pyfunction]
fn consensus_error(sensors: u64, theta: f64) -> PyResult<f64> {
    ddn_core::consensus_error(sensors, theta).map_err(err)
}

#[pyfunction]
fn sup_single_loss(theta: f64) -> PyResult<f64> {
    ddn_core::sup_single_loss(theta).map_err(err)
}

#[pyfunction]
fn max_single_loss() -> (f64, f64) {
    ddn_core::max_single_loss()
}

#[pyfunction]
fn butterfly_area(theta: f64) -> PyResult<f64> {
    ddn_core::butterfly_area(theta).map_err(err)
}

#[pyfunction]
fn prob_zero_loss(theta: f64) -> PyResult<f64> {
    ddn_core::prob_zero_loss(theta).map_err(err)
}

/// Consensus loss at position `x` on l1; `None` or `inf` is the endpoint.
#[pyfunction]
#[pyo3(signature = (sensors, theta, x = None))]
fn multi_loss(sensors: u64, theta: f64, x: Option<f64>) -> PyResult<f64> {
    ddn_core::multi_loss(sensors, theta, position(x)).map_err(err)
}

/// `(x, loss)` maximizing the consensus loss; `x` is `inf` at the endpoint.
#[pyfunction]
fn optimize_multi_loss_x(sensors: u64, theta: f64) -> PyResult<(f64, f64)> {
    let (p, loss) = ddn_core::optimize_multi_loss_x(sensors, theta).map_err(err)?;
    let x = match p {
        LinePosition::Finite(x) => x,
        LinePosition::Infinite => f64::INFINITY,
    };
    Ok((x, loss))
}

#[pyfunction]
fn multi_loss_inf_crossover(sensors: u64) -> PyResult<Option<f64>> {
    single::multi_loss_inf_crossover(sensors).map_err(err)
}

#[pyfunction]
fn pf_fusion(p_f: f64, sensors: u64, k: u64) -> PyResult<f64> {
    fusion::pf_fusion(p_f, sensors, k).map_err(err)
}

#[pyfunction]
fn pm_fusion(p_m: f64, sensors: u64, k: u64) -> PyResult<f64> {
    fusion::pm_fusion(p_m, sensors, k).map_err(err)
}

#[pyfunction]
fn h_map(sensors: u64, k: u64, p_f: f64) -> PyResult<f64> {
    let q = FusionMapQuery::new(sensors, k, p_f).map_err(err)?;
    fusion::h_map(q).map_err(err)
}

/// `(x_m, operating point)` where the robust curve of threshold `k` meets l1.
#[pyfunction]
fn intersect_l1(sensors: u64, k: u64, theta: f64) -> PyResult<(f64, PyOperatingPoint)> {
    let hit = fusion::intersect_l1(sensors, k, theta).map_err(err)?;
    Ok((hit.x_m, hit.point.into()))
}

#[pyfunction]
fn error_gap(sensors: u64, k: u64, theta: f64) -> PyResult<f64> {
    fusion::error_gap(sensors, k, theta).map_err(err)
}

#[pyfunction]
fn max_wf_loss(sensors: u64, theta: f64) -> PyResult<PyWfLossReport> {
    let r = fusion::max_wf_loss(sensors, theta).map_err(err)?;
    Ok(PyWfLossReport {
        theta: r.theta,
        sensors: r.sensors,
        wof_error: r.wof_error,
        wf_error: r.wf_error,
        loss: r.loss,
        best_k: r.best_k,
        best_point: r.best_point.into(),
        verified: r.verified,
    })
}

#[pyfunction]
fn sup_wf_loss(sensors: u64) -> PyResult<(f64, f64)> {
    fusion::sup_wf_loss(sensors).map_err(err)
}

#[pyfunction]
fn equivalent_sensor_count(k2: u64, theta: f64) -> PyResult<u64> {
    fusion::equivalent_sensor_count(k2, theta).map_err(err)
}

/// `(condition_holds, product_error)` for the OR rule over l1 points.
#[pyfunction]
fn nonidentical_product_check(points: Vec<(f64, f64)>, theta: f64) -> PyResult<(bool, f64)> {
    let pts: Vec<_> = points
        .into_iter()
        .map(|(p_f, p_m)| ddn_core::OperatingPoint { p_f, p_m })
        .collect();
    let c = fusion::nonidentical_product_check(&pts, theta).map_err(err)?;
    Ok((c.condition_holds, c.product_error))
}

/// Monte Carlo estimate on a ring; `k` selects the fusion-center rule
/// (`None` runs the consensus network).
#[pyfunction]
#[pyo3(signature = (model, sensors, trials, seed, k = None, flooding = false))]
fn estimate_errors(
    py: Python<'_>,
    model: &PyGaussianShiftModel,
    sensors: usize,
    trials: u64,
    seed: u64,
    k: Option<u64>,
    flooding: bool,
) -> PyResult<PyTrialStats> {
    let mut cfg = NetworkConfig::ring(sensors, seed, trials).map_err(err)?;
    if flooding {
        cfg.protocol = Protocol::VoteFlooding;
    }
    let system = match k {
        Some(k) => System::Wf(ddn_core::FusionRule::counting(sensors as u64, k).map_err(err)?),
        None => System::Wof,
    };
    let m = model.0;
    let s = py
        .detach(move || sim::estimate_errors(&m, &cfg, system))
        .map_err(err)?;
    Ok(PyTrialStats {
        false_alarms: s.false_alarms,
        misses: s.misses,
        trials_h0: s.trials_h0,
        trials_h1: s.trials_h1,
        est_pf: s.est_pf,
        est_pm: s.est_pm,
        stderr_pf: s.stderr_pf,
        stderr_pm: s.stderr_pm,
        fallbacks: s.fallbacks,
    })
}

#[pyfunction]
#[pyo3(signature = (suite = "all"))]
fn run_suite(suite: &str) -> PyResult<Vec<PyClaim>> {
    let s: verify::Suite = suite.parse().map_err(PyValueError::new_err)?;
    Ok(verify::run_suite(s)
        .into_iter()
        .map(|c| PyClaim {
            name: c.name.to_string(),
            grid: c.grid,
            tolerance: c.tolerance,
            passed: c.passed,
            detail: c.detail,
        })
        .collect())
}

#[pymodule]
fn ddn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyOperatingPoint>()?;
    m.add_class::<PyButterflyRegion>()?;
    m.add_class::<PyGaussianShiftModel>()?;
    m.add_class::<PyFusionRule>()?;
    m.add_class::<PyWfLossReport>()?;
    m.add_class::<PyTrialStats>()?;
    m.add_class::<PyClaim>()?;
    m.add_function(wrap_pyfunction!(binom_tail_ge, m)?)?;
    m.add_function(wrap_pyfunction!(consensus_pf, m)?)?;
    m.add_function(wrap_pyfunction!(consensus_error, m)?)?;
    m.add_function(wrap_pyfunction!(sup_single_loss, m)?)?;
    m.add_function(wrap_pyfunction!(max_single_loss, m)?)?;
    m.add_function(wrap_pyfunction!(butterfly_area, m)?)?;
    m.add_function(wrap_pyfunction!(prob_zero_loss, m)?)?;
    m.add_function(wrap_pyfunction!(multi_loss, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_multi_loss_x, m)?)?;
    m.add_function(wrap_pyfunction!(multi_loss_inf_crossover, m)?)?;
    m.add_function(wrap_pyfunction!(pf_fusion, m)?)?;
    m.add_function(wrap_pyfunction!(pm_fusion, m)?)?;
    m.add_function(wrap_pyfunction!(h_map, m)?)?;
    m.add_function(wrap_pyfunction!(intersect_l1, m)?)?;
    m.add_function(wrap_pyfunction!(error_gap, m)?)?;
    m.add_function(wrap_pyfunction!(max_wf_loss, m)?)?;
    m.add_function(wrap_pyfunction!(sup_wf_loss, m)?)?;
    m.add_function(wrap_pyfunction!(equivalent_sensor_count, m)?)?;
    m.add_function(wrap_pyfunction!(nonidentical_product_check, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_errors, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    Ok(())
}
