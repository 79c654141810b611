use modelkit_core::decider::{cross_validate, decide_multipliers, DecideConfig, MifPair};
use modelkit_core::density::{estimate_density_bracket, DiscreteSequence};
use modelkit_core::hilbert::{hilbert_transform, registry, PVSchedule};
use modelkit_core::inner::{
    arg_on_line, blaschke_condition_sum, derivative_modulus_on_line, eval_inner, phase_alpha, reproducing_kernel,
    ArithFamily, BlaschkeData, InnerFunctionSpec, KernelSource, TruncationSchedule,
};
use modelkit_core::toeplitz::{
    kernel_triviality_probe, lemma1_construct, multiplier_residual, seeded_points, MultiplierSpec, ProbeConfig,
    SymbolFactor, ToeplitzSymbol, WeightedZero,
};
use modelkit_core::{ComplexPoint, Error};
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;
use serde_json::Value;

create_exception!(modelkit, ModelkitError, PyValueError);

fn err(e: Error) -> PyErr {
    ModelkitError::new_err((e.kind(), e.to_string()))
}

fn point(z: Complex64) -> ComplexPoint {
    ComplexPoint::new(z.re, z.im)
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(a) => {
            let list = PyList::empty(py);
            for x in a {
                list.append(to_py(py, x)?)?;
            }
            list.into_any()
        }
        Value::Object(o) => {
            let d = PyDict::new(py);
            for (k, x) in o {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn dump<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let value = serde_json::to_value(v).map_err(|e| err(e.into()))?;
    to_py(py, &value)
}

/// Meromorphic inner function `C exp(i a z) B(z)`.
#[pyclass(name = "InnerFunction", module = "modelkit", frozen, from_py_object)]
#[derive(Clone)]
struct PyInner {
    spec: InnerFunctionSpec,
}

#[pymethods]
impl PyInner {
    #[new]
    #[pyo3(signature = (mass=0.0, zeros=None, constant=Complex64::new(1.0, 0.0)))]
    fn new(mass: f64, zeros: Option<Vec<Complex64>>, constant: Complex64) -> PyResult<Self> {
        let data = BlaschkeData::explicit(zeros.unwrap_or_default()).map_err(err)?;
        let spec = InnerFunctionSpec::new(mass, constant, data).map_err(err)?;
        Ok(Self { spec })
    }

    #[staticmethod]
    fn singular(mass: f64) -> PyResult<Self> {
        let spec = InnerFunctionSpec::singular(mass);
        spec.validate().map_err(err)?;
        Ok(Self { spec })
    }

    #[staticmethod]
    fn b_i() -> Self {
        Self { spec: InnerFunctionSpec::b_i() }
    }

    /// Zeros `alpha n + i beta`, `nmin <= n <= nmax`; a missing bound is infinite.
    #[staticmethod]
    #[pyo3(signature = (mass, alpha, beta, nmin=None, nmax=None))]
    fn arith(mass: f64, alpha: f64, beta: f64, nmin: Option<i64>, nmax: Option<i64>) -> PyResult<Self> {
        let spec = InnerFunctionSpec::arith(mass, ArithFamily { alpha, beta, nmin, nmax }).map_err(err)?;
        Ok(Self { spec })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec: InnerFunctionSpec = serde_json::from_str(text).map_err(|e| err(e.into()))?;
        spec.validate().map_err(err)?;
        Ok(Self { spec })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.spec).map_err(|e| err(e.into()))
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.spec.mass
    }

    fn is_finite_blaschke_product(&self) -> bool {
        self.spec.is_finite_blaschke_product()
    }

    fn __mul__(&self, other: &PyInner) -> PyResult<Self> {
        Ok(Self { spec: self.spec.product(&other.spec).map_err(err)? })
    }

    /// Returns `(value, truncation_error_bound, terms_used)`.
    fn __call__(&self, z: Complex64) -> PyResult<(Complex64, f64, usize)> {
        let r = eval_inner(&self.spec, point(z), &TruncationSchedule::default()).map_err(err)?;
        Ok((r.c64(), r.truncation_error_bound, r.terms_used))
    }

    fn arg_on_line(&self, grid: Vec<f64>) -> PyResult<Vec<f64>> {
        arg_on_line(&self.spec, &grid, &TruncationSchedule::default()).map_err(err)
    }

    fn derivative_modulus(&self, grid: Vec<f64>) -> PyResult<Vec<f64>> {
        derivative_modulus_on_line(&self.spec, &grid, &TruncationSchedule::default()).map_err(err)
    }

    /// Reproducing kernel of the model space at `lam`, evaluated at `z`.
    fn kernel(&self, lam: Complex64, z: Complex64) -> PyResult<Complex64> {
        let k = reproducing_kernel(KernelSource::Model(&self.spec), point(lam), point(z), &TruncationSchedule::default())
            .map_err(err)?;
        Ok(k.to_c64())
    }

    fn __repr__(&self) -> String {
        format!("InnerFunction({})", serde_json::to_string(&self.spec).unwrap_or_default())
    }
}

#[pyfunction]
fn hardy_kernel(lam: Complex64, z: Complex64) -> PyResult<Complex64> {
    let k = reproducing_kernel(KernelSource::Hardy, point(lam), point(z), &TruncationSchedule::default()).map_err(err)?;
    Ok(k.to_c64())
}

#[pyfunction(name = "phase_alpha")]
fn py_phase_alpha(w: Complex64) -> PyResult<f64> {
    phase_alpha(point(w)).map_err(err)
}

#[pyfunction(name = "blaschke_condition_sum")]
fn py_blaschke_condition_sum(zeros: Vec<Complex64>) -> PyResult<(Vec<f64>, bool)> {
    let pts: Vec<ComplexPoint> = zeros.into_iter().map(point).collect();
    blaschke_condition_sum(&pts, &TruncationSchedule::blaschke_default()).map_err(err)
}

/// Density bracket of an explicit point list or of the progression `alpha n + i beta`.
#[pyfunction]
#[pyo3(signature = (points=None, alpha=None, beta=1.0, nmin=None, nmax=None))]
fn density<'py>(
    py: Python<'py>,
    points: Option<Vec<Complex64>>,
    alpha: Option<f64>,
    beta: f64,
    nmin: Option<i64>,
    nmax: Option<i64>,
) -> PyResult<Bound<'py, PyAny>> {
    let seq = match (points, alpha) {
        (Some(p), None) => DiscreteSequence::from_points(p.into_iter().map(point).collect()),
        (None, Some(alpha)) => DiscreteSequence::from_family(ArithFamily { alpha, beta, nmin, nmax }),
        _ => return Err(PyValueError::new_err("give either points or alpha")),
    }
    .map_err(err)?;
    let est = py.detach(|| estimate_density_bracket(&seq, None, None)).map_err(err)?;
    dump(py, &est)
}

/// Conjugate function of a registered weight (`poisson`, `gaussian`, ...).
#[pyfunction]
fn hilbert(name: &str, x: f64) -> PyResult<(f64, f64)> {
    let h = registry(name).ok_or_else(|| PyValueError::new_err(format!("unknown function {name}")))?;
    let v = hilbert_transform(&h, x, &PVSchedule::default()).map_err(err)?;
    Ok((v.value, v.richardson_error))
}

#[pyfunction]
#[pyo3(signature = (u, v, cross_check=false))]
fn decide<'py>(py: Python<'py>, u: &PyInner, v: &PyInner, cross_check: bool) -> PyResult<Bound<'py, PyAny>> {
    let pair = MifPair::new(u.spec.clone(), v.spec.clone()).map_err(err)?;
    let out = py
        .detach(|| -> modelkit_core::Result<Value> {
            let cert = decide_multipliers(&pair, &DecideConfig::default())?;
            let mut doc = serde_json::json!({ "certificate": serde_json::to_value(&cert)? });
            if cross_check {
                let report = cross_validate(&pair, &cert, &ProbeConfig::default())?;
                doc["cross_validation"] = serde_json::to_value(&report)?;
            }
            Ok(doc)
        })
        .map_err(err)?;
    to_py(py, &out)
}

/// Kernel probe for the symbol `prod f_k^{e_k}`, `e_k = +1` or `-1` (conjugate).
#[pyfunction]
fn probe<'py>(py: Python<'py>, factors: Vec<(PyInner, i8)>) -> PyResult<Bound<'py, PyAny>> {
    let sym = ToeplitzSymbol::new(
        factors.into_iter().map(|(f, exponent)| SymbolFactor { spec: f.spec, exponent }).collect(),
    )
    .map_err(err)?;
    let report = py.detach(|| kernel_triviality_probe(&sym, &ProbeConfig::default())).map_err(err)?;
    dump(py, &report)
}

/// Unit-norm element of `K_theta` vanishing at `zeros` (pairs of point and multiplicity).
#[pyfunction]
#[pyo3(signature = (theta, zeros, tolerance=1e-8, seed=0))]
fn lemma1<'py>(
    py: Python<'py>,
    theta: &PyInner,
    zeros: Vec<(Complex64, u32)>,
    tolerance: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let zs: Vec<WeightedZero> = zeros.into_iter().map(|(z, m)| WeightedZero { at: point(z), multiplicity: m }).collect();
    let level = TruncationSchedule::default().final_level();
    let el = lemma1_construct(&theta.spec, &zs, tolerance, seed, level, None).map_err(err)?;
    dump(py, &el)
}

/// Residuals of `phi k_mu^U` from `K_V`, with `phi` the kernel of `K_space` at `phi_at`.
#[pyfunction]
#[pyo3(signature = (u, v, phi_at, phi_space=None, points=None, count=10, seed=0))]
fn multiplier_residuals(
    py: Python<'_>,
    u: &PyInner,
    v: &PyInner,
    phi_at: Complex64,
    phi_space: Option<&PyInner>,
    points: Option<Vec<Complex64>>,
    count: usize,
    seed: u64,
) -> PyResult<Vec<f64>> {
    let level = TruncationSchedule::default().final_level();
    let phi = MultiplierSpec::Kernel { spec: phi_space.map(|p| p.spec.clone()), at: point(phi_at) }
        .to_exprational(level)
        .map_err(err)?;
    let pts = match points {
        Some(p) => p.into_iter().map(point).collect(),
        None => seeded_points(seed, count),
    };
    py.detach(|| multiplier_residual(&u.spec, &v.spec, &phi, &pts, level)).map_err(err)
}

#[pymodule]
fn modelkit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ModelkitError", m.py().get_type::<ModelkitError>())?;
    m.add_class::<PyInner>()?;
    m.add_function(wrap_pyfunction!(hardy_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(py_phase_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(py_blaschke_condition_sum, m)?)?;
    m.add_function(wrap_pyfunction!(density, m)?)?;
    m.add_function(wrap_pyfunction!(hilbert, m)?)?;
    m.add_function(wrap_pyfunction!(decide, m)?)?;
    m.add_function(wrap_pyfunction!(probe, m)?)?;
    m.add_function(wrap_pyfunction!(lemma1, m)?)?;
    m.add_function(wrap_pyfunction!(multiplier_residuals, m)?)?;
    Ok(())
}
