//! Python bindings: catalog access, simulation, limit cycles, sweeps and
//! verification. Structured results are returned as plain dicts and lists.

use hlb::catalog::{self, CatalogEntry};
use hlb::cli::{portrait_record, TrajectoryRecord};
use hlb::cycles::LimitCycle;
use hlb::integrate::{flow, FlowOptions, ModeState};
use hlb::pwsys::SystemDef;
use hlb::scaling::{self, SweepOptions, SweepRow};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(hlb_py, HlbError, PyValueError);

fn err(e: impl std::fmt::Display) -> PyErr {
    HlbError::new_err(e.to_string())
}

/// Convert any serializable value through JSON into native Python objects.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn lookup(id: &str) -> PyResult<CatalogEntry> {
    catalog::entry(id).map_err(err)
}

/// Catalog metadata for every entry.
#[pyfunction]
fn list_entries(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    let infos: Vec<_> = catalog::entries().iter().map(CatalogEntry::info).collect();
    to_py(py, &infos)
}

/// Limit cycle of a catalog entry at one parameter value.
#[pyclass(frozen, module = "hlb_py")]
struct Cycle {
    inner: LimitCycle,
}

#[pymethods]
impl Cycle {
    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }
    #[getter]
    fn period(&self) -> f64 {
        self.inner.period
    }
    #[getter]
    fn amplitude(&self) -> f64 {
        self.inner.amplitude
    }
    #[getter]
    fn x_max(&self) -> f64 {
        self.inner.x_max
    }
    #[getter]
    fn multiplier(&self) -> f64 {
        self.inner.multiplier
    }
    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }
    #[getter]
    fn stable(&self) -> bool {
        self.inner.is_stable()
    }
    #[getter]
    fn sliding_segment(&self) -> bool {
        self.inner.has_sliding()
    }
    #[getter]
    fn point(&self) -> (f64, f64) {
        (self.inner.point[0], self.inner.point[1])
    }
    /// Sampled orbit as `{"t", "x", "y", "piece", "sliding"}` columns.
    fn orbit<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let c = &self.inner;
        let rec = TrajectoryRecord {
            seed: c.point,
            t: c.samples.iter().map(|p| p.t).collect(),
            x: c.samples.iter().map(|p| p.x).collect(),
            y: c.samples.iter().map(|p| p.y).collect(),
            piece: c.samples.iter().map(|p| p.piece).collect(),
            sliding: c.samples.iter().map(|p| p.sliding).collect(),
        };
        to_py(py, &rec)
    }
    fn events<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.events)
    }
    fn __repr__(&self) -> String {
        format!(
            "Cycle(mu={}, amplitude={:.6e}, period={:.6e}, multiplier={:.4}, converged={})",
            self.inner.mu, self.inner.amplitude, self.inner.period, self.inner.multiplier, self.inner.converged
        )
    }
}

/// A catalog system instantiated at a fixed `mu`.
#[pyclass(frozen, module = "hlb_py")]
struct System {
    entry: CatalogEntry,
    sys: SystemDef,
    mu: f64,
}

#[pymethods]
impl System {
    #[new]
    fn new(id: &str, mu: f64) -> PyResult<Self> {
        let entry = lookup(id)?;
        let sys = entry.build(mu).map_err(err)?;
        Ok(System { entry, sys, mu })
    }
    #[getter]
    fn id(&self) -> &str {
        self.entry.id
    }
    #[getter]
    fn mu(&self) -> f64 {
        self.mu
    }
    #[getter]
    fn switching(&self) -> &'static str {
        self.sys.switching().label()
    }
    #[getter]
    fn n_pieces(&self) -> usize {
        self.sys.pieces().len()
    }
    #[getter]
    fn seed_point(&self) -> (f64, f64) {
        let p = self.entry.seed_point(self.mu.abs());
        (p[0], p[1])
    }
    /// Vector field of piece `piece` at `(x, y)`.
    fn rhs(&self, piece: usize, x: f64, y: f64) -> PyResult<(f64, f64)> {
        let f = hlb::pwsys::evaluate_field(&self.sys, piece, x, y, self.mu).map_err(err)?;
        Ok((f[0], f[1]))
    }
    /// Integrate from `(x, y)` (default: the entry seed) up to `t_end`.
    #[pyo3(signature = (t_end, x=None, y=None, rtol=1e-10))]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        t_end: f64,
        x: Option<f64>,
        y: Option<f64>,
        rtol: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let s = self.entry.seed_point(self.mu.abs());
        let z0 = [x.unwrap_or(s[0]), y.unwrap_or(s[1])];
        let init = ModeState::initial(&self.sys, z0[0], z0[1], self.mu).map_err(err)?;
        let opts = FlowOptions { rtol, h_max: self.entry.period_scale(self.mu.abs()) / 50.0, ..Default::default() };
        let traj = py.detach(|| flow(&self.sys, &init, self.mu, t_end, &opts)).map_err(err)?;
        let out = pyo3::types::PyDict::new(py);
        out.set_item("trajectory", to_py(py, &TrajectoryRecord::from_trajectory(z0, &traj))?)?;
        out.set_item("events", to_py(py, &traj.events)?)?;
        out.set_item("status", to_py(py, &traj.status)?)?;
        Ok(out.into_any())
    }
    /// Locate the limit cycle, optionally from a given seed point.
    #[pyo3(signature = (seed=None))]
    fn find_cycle(&self, py: Python<'_>, seed: Option<(f64, f64)>) -> PyResult<Cycle> {
        let seed = seed.map(|(x, y)| [x, y]);
        let inner = py.detach(|| scaling::compute_cycle(&self.entry, self.mu, seed)).map_err(err)?;
        Ok(Cycle { inner })
    }
    fn __repr__(&self) -> String {
        format!("System(id={:?}, mu={}, switching={:?})", self.entry.id, self.mu, self.switching())
    }
}

/// Sweep `mu` over a log grid (default: the entry's grid).
#[pyfunction]
#[pyo3(signature = (id, mu_min=None, mu_max=None, points=None, parallel=false, seed=None))]
fn sweep<'py>(
    py: Python<'py>,
    id: &str,
    mu_min: Option<f64>,
    mu_max: Option<f64>,
    points: Option<usize>,
    parallel: bool,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let entry = lookup(id)?;
    let (lo, hi, n) = entry.mu_sweep;
    let grid = catalog::log_grid(mu_min.unwrap_or(lo), mu_max.unwrap_or(hi), points.unwrap_or(n));
    let opts = SweepOptions { parallel, rng_seed: seed };
    let rows = py.detach(|| scaling::sweep_mu(&entry, &grid, opts)).map_err(err)?;
    to_py(py, &rows)
}

/// Log-log fit of amplitude and period against `mu`.
#[pyfunction]
fn fit<'py>(py: Python<'py>, mu: Vec<f64>, amplitude: Vec<f64>, period: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    if mu.len() != amplitude.len() || mu.len() != period.len() {
        return Err(err("mu, amplitude and period must have equal lengths"));
    }
    let rows: Vec<SweepRow> = mu
        .iter()
        .zip(&amplitude)
        .zip(&period)
        .map(|((&mu, &amplitude), &period)| SweepRow {
            mu,
            amplitude,
            period,
            x_max: f64::NAN,
            multiplier: f64::NAN,
            converged: true,
        })
        .collect();
    to_py(py, &scaling::fit_exponents(&rows).map_err(err)?)
}

/// Verification report of one entry.
#[pyfunction]
#[pyo3(signature = (id, tol=0.05, parallel=false, seed=None))]
fn verify<'py>(py: Python<'py>, id: &str, tol: f64, parallel: bool, seed: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
    let opts = SweepOptions { parallel, rng_seed: seed };
    let report = py.detach(|| scaling::verify_entry(id, tol, tol, opts)).map_err(err)?;
    to_py(py, &report)
}

/// Phase-portrait record of an entry at one parameter value.
#[pyfunction]
#[pyo3(signature = (id, mu, t_end=None, seed=None))]
fn portrait<'py>(py: Python<'py>, id: &str, mu: f64, t_end: Option<f64>, seed: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
    let entry = lookup(id)?;
    let rec = py.detach(|| portrait_record(&entry, mu, t_end, seed)).map_err(err)?;
    to_py(py, &rec)
}

#[pymodule]
fn hlb_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HlbError", m.py().get_type::<HlbError>())?;
    m.add_class::<System>()?;
    m.add_class::<Cycle>()?;
    m.add_function(wrap_pyfunction!(list_entries, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(portrait, m)?)?;
    Ok(())
}
