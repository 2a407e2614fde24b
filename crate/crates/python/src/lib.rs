//! Python bindings. Results come back as plain dicts and lists mirroring the
//! JSON emitted by the `pvbs` command-line tool.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;
use serde_json::Value;

use pvbs_core::analytic::{ground_state_vector, GroundKind};
use pvbs_core::fock::{enumerate_sector, SectorLabel};
use pvbs_core::lattice::parse_volume_spec;
use pvbs_core::martingale::{certify as run_certify, verify_condition_iii, CertifyOptions, NormOptions};
use pvbs_core::model::{c_tilde as tilde_c, choose_ell as pick_ell, classify_zd, epsilon_ell, select_tilt};
use pvbs_core::operators::{assemble_sector_hamiltonian, edge_projection_block};
use pvbs_core::spectra::{gapless_scaling as scaling_rows, total_gap as run_total_gap, GapOptions, LanczosOptions};
use pvbs_core::{defaults, PvbsError, TiltScheme, VolumeFamilySpec};

create_exception!(pvbs, PvbsException, PyException, "Base class for pvbs errors.");
create_exception!(pvbs, BudgetError, PvbsException, "A dimension cap, iteration limit or ell cap was hit.");

fn err(e: PvbsError) -> PyErr {
    if e.is_budget() {
        BudgetError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn value_to_py(py: Python<'_>, v: &Value) -> PyResult<PyObject> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_py(py),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.into_py(py),
            (None, Some(u)) => u.into_py(py),
            _ => n.as_f64().unwrap_or(f64::NAN).into_py(py),
        },
        Value::String(s) => s.into_py(py),
        Value::Array(a) => {
            let items = a.iter().map(|x| value_to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new_bound(py, items).into_py(py)
        }
        Value::Object(m) => {
            let d = PyDict::new_bound(py);
            for (k, x) in m {
                d.set_item(k, value_to_py(py, x)?)?;
            }
            d.into_py(py)
        }
    })
}

fn to_py(py: Python<'_>, v: &impl Serialize) -> PyResult<PyObject> {
    let v = serde_json::to_value(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    value_to_py(py, &v)
}

/// Decimal strings keep "1" exact; floats are formatted at full precision first.
fn decimal_text(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(s) = obj.extract::<String>() {
        return Ok(s);
    }
    if let Ok(x) = obj.extract::<f64>() {
        return Ok(format!("{x:?}"));
    }
    let xs: Vec<f64> = obj.extract()?;
    Ok(xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(","))
}

/// Hopping parameters of both species.
///
/// Each argument is a comma-separated decimal string, a float, or a list of floats.
/// With `dim`, a single value is broadcast to every direction.
#[pyclass(frozen, name = "Params")]
#[derive(Clone)]
struct PyParams(pvbs_core::Params);

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (lambda_a, lambda_b, dim=None))]
    fn new(lambda_a: &Bound<'_, PyAny>, lambda_b: &Bound<'_, PyAny>, dim: Option<usize>) -> PyResult<Self> {
        let p = pvbs_core::Params::parse(&decimal_text(lambda_a)?, &decimal_text(lambda_b)?, dim).map_err(err)?;
        Ok(PyParams(p))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn lambda_a(&self) -> Vec<f64> {
        self.0.lambda(pvbs_core::Species::A).to_vec()
    }

    #[getter]
    fn lambda_b(&self) -> Vec<f64> {
        self.0.lambda(pvbs_core::Species::B).to_vec()
    }

    /// "gapped" or "gapless" on Z^d.
    fn classify(&self) -> &'static str {
        match classify_zd(&self.0) {
            pvbs_core::GapClass::Gapped => "gapped",
            pvbs_core::GapClass::Gapless => "gapless",
            pvbs_core::GapClass::ConjecturedGapped => "conjectured_gapped",
        }
    }

    fn __repr__(&self) -> String {
        format!("Params(lambda_a={:?}, lambda_b={:?})", self.lambda_a(), self.lambda_b())
    }
}

/// A finite lattice volume built from a spec such as "box:2x3" or "case2:L=3,3".
#[pyclass(frozen, name = "Volume")]
struct PyVolume(pvbs_core::Volume);

#[pymethods]
impl PyVolume {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(PyVolume(parse_volume_spec(spec).map_err(err)?))
    }

    #[getter]
    fn label(&self) -> &str {
        self.0.label()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    /// Sites in canonical (lexicographic) order.
    fn sites(&self) -> Vec<Vec<i64>> {
        self.0.sites().iter().map(|s| s.coords().to_vec()).collect()
    }

    fn is_connected(&self) -> bool {
        self.0.is_connected()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Volume('{}', sites={})", self.0.label(), self.0.len())
    }
}

fn gap_opts(budget: Option<u128>, dense_cap: Option<usize>, seed: Option<u64>) -> GapOptions {
    let base = GapOptions::default();
    GapOptions {
        sector_cap: budget.unwrap_or(base.sector_cap),
        dense_switch: dense_cap.unwrap_or(base.dense_switch),
        lanczos: LanczosOptions {
            seed: seed.unwrap_or(defaults::SEED),
            ..base.lanczos
        },
        ..base
    }
}

/// Sector-resolved spectrum and total gap, as the `gap` command reports it.
#[pyfunction]
#[pyo3(signature = (volume, params, budget=None, dense_cap=None, seed=None))]
fn total_gap(
    py: Python<'_>,
    volume: &PyVolume,
    params: &PyParams,
    budget: Option<u128>,
    dense_cap: Option<usize>,
    seed: Option<u64>,
) -> PyResult<PyObject> {
    let opts = gap_opts(budget, dense_cap, seed);
    let report = py.allow_threads(|| run_total_gap(&volume.0, &params.0, &opts)).map_err(err)?;
    to_py(py, &report)
}

/// Martingale-method gap certificate.
#[pyfunction]
#[pyo3(signature = (params, eta=defaults::ETA, ell_cap=defaults::ELL_CAP, budget=defaults::SECTOR_CAP, seed=defaults::SEED))]
fn certify(py: Python<'_>, params: &PyParams, eta: f64, ell_cap: usize, budget: u128, seed: u64) -> PyResult<PyObject> {
    let opts = CertifyOptions {
        eta,
        ell_cap,
        budget,
        norm: NormOptions { seed, ..NormOptions::default() },
        gap: gap_opts(Some(budget), None, Some(seed)),
    };
    let cert = py.allow_threads(|| run_certify(&params.0, &opts)).map_err(err)?;
    to_py(py, &cert)
}

fn scheme(params: &PyParams, eta: f64) -> PyResult<TiltScheme> {
    select_tilt(&params.0, eta).map_err(err)
}

/// The tilted geometry and effective parameters chosen for `params`.
#[pyfunction]
#[pyo3(signature = (params, eta=defaults::ETA))]
fn tilt(py: Python<'_>, params: &PyParams, eta: f64) -> PyResult<PyObject> {
    to_py(py, &scheme(params, eta)?)
}

/// Smallest admissible slab length and its epsilon.
#[pyfunction]
#[pyo3(signature = (params, eta=defaults::ETA, cap=defaults::ELL_CAP))]
fn choose_ell(params: &PyParams, eta: f64, cap: usize) -> PyResult<(usize, f64)> {
    pick_ell(&scheme(params, eta)?, cap).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (params, eta=defaults::ETA))]
fn c_tilde(params: &PyParams, eta: f64) -> PyResult<f64> {
    Ok(tilde_c(&scheme(params, eta)?))
}

#[pyfunction]
#[pyo3(signature = (params, ell, eta=defaults::ETA))]
fn epsilon(params: &PyParams, ell: usize, eta: f64) -> PyResult<f64> {
    Ok(epsilon_ell(&scheme(params, eta)?, ell))
}

/// The 9x9 two-site interaction, local index `3 * left + right` with 0 = empty, 1 = a, 2 = b.
#[pyfunction]
fn edge_projection(lambda_a: f64, lambda_b: f64) -> PyResult<Vec<Vec<f64>>> {
    let h = edge_projection_block(lambda_a, lambda_b).map_err(err)?;
    Ok((0..9).map(|r| (0..9).map(|c| h[(r, c)]).collect()).collect())
}

fn kind_from(name: &str) -> PyResult<GroundKind> {
    Ok(match name {
        "vac" | "0" => GroundKind::Vac,
        "a" => GroundKind::A,
        "b" => GroundKind::B,
        "ab" => GroundKind::Ab,
        _ => return Err(PyValueError::new_err(format!("unknown ground state '{name}' (vac, a, b, ab)"))),
    })
}

/// Closed-form ground state as `(configurations, amplitudes)`, one glyph per site.
#[pyfunction]
fn ground_state(volume: &PyVolume, params: &PyParams, kind: &str) -> PyResult<(Vec<String>, Vec<f64>)> {
    let kind = kind_from(kind)?;
    let basis = enumerate_sector(&volume.0, kind.sector()).map_err(err)?;
    let psi = ground_state_vector(&volume.0, &params.0, kind, &basis).map_err(err)?;
    let n = basis.n_sites();
    Ok((basis.states().iter().map(|c| c.render(n)).collect(), psi))
}

/// Hamiltonian block of sector `(n_a, n_b)` as `(configurations, [(row, col, value)])`
/// with the upper triangle only.
#[pyfunction]
fn sector_hamiltonian(
    volume: &PyVolume,
    params: &PyParams,
    n_a: usize,
    n_b: usize,
) -> PyResult<(Vec<String>, Vec<(usize, usize, f64)>)> {
    let basis = enumerate_sector(&volume.0, SectorLabel::new(n_a, n_b)).map_err(err)?;
    let h = assemble_sector_hamiltonian(&volume.0, &params.0, &basis).map_err(err)?;
    let n = basis.n_sites();
    Ok((basis.states().iter().map(|c| c.render(n)).collect(), h.upper_entries()))
}

/// Measured `||G_slab E_n||` against the projection bound, on a family of
/// tilted boxes with the given transverse extent.
#[pyfunction]
#[pyo3(signature = (params, n, ell, direction=1, transverse=2, eta=defaults::ETA))]
fn verify_projection(
    py: Python<'_>,
    params: &PyParams,
    n: usize,
    ell: usize,
    direction: usize,
    transverse: usize,
    eta: f64,
) -> PyResult<PyObject> {
    let t = scheme(params, eta)?;
    let d = t.dim();
    if direction == 0 || direction > d {
        return Err(PyValueError::new_err(format!("direction must lie in 1..={d}")));
    }
    let mut extents = vec![transverse; d];
    extents[direction - 1] = n + 1;
    let fam = VolumeFamilySpec::new(t.geometry.clone(), extents, direction - 1, 0, n + 1).map_err(err)?;
    let report = py
        .allow_threads(|| verify_condition_iii(&t, &fam, n, ell, &params.0, &NormOptions::default()))
        .map_err(err)?;
    to_py(py, &report)
}

/// Trial energies and numeric gaps on boxes of the given sides, for gapless parameters.
#[pyfunction]
#[pyo3(signature = (params, sizes, numeric_cap=6561))]
fn gapless_scaling(py: Python<'_>, params: &PyParams, sizes: Vec<usize>, numeric_cap: u128) -> PyResult<PyObject> {
    let rows = py
        .allow_threads(|| scaling_rows(&params.0, &sizes, numeric_cap, &GapOptions::default()))
        .map_err(err)?;
    to_py(py, &rows)
}

#[pymodule]
pub fn pvbs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", pvbs_core::VERSION)?;
    m.add("PvbsError", m.py().get_type_bound::<PvbsException>())?;
    m.add("BudgetError", m.py().get_type_bound::<BudgetError>())?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyVolume>()?;
    m.add_function(wrap_pyfunction!(total_gap, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(tilt, m)?)?;
    m.add_function(wrap_pyfunction!(choose_ell, m)?)?;
    m.add_function(wrap_pyfunction!(c_tilde, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(edge_projection, m)?)?;
    m.add_function(wrap_pyfunction!(ground_state, m)?)?;
    m.add_function(wrap_pyfunction!(sector_hamiltonian, m)?)?;
    m.add_function(wrap_pyfunction!(verify_projection, m)?)?;
    m.add_function(wrap_pyfunction!(gapless_scaling, m)?)?;
    Ok(())
}
