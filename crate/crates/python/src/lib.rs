//! Python bindings for `carleson-core`.
//!
//! Points are Python `complex` numbers, weights use the same spec strings as
//! the command line (`lebesgue`, `radial-power:1`, `product:a,b`, `grid:path`),
//! and the full pipeline report comes back as JSON text.

use carleson_core::dirichlet::{
    self, AnalyticPolynomial, CarlesonMethod, CarlesonOptions, PipelineOptions,
};
use carleson_core::geometry::{self, Arc, DyadicIndex};
use carleson_core::measures::{self, DEFAULT_REVERSE_DOUBLING_MARGIN};
use carleson_core::operators::{self, DiscreteMeasure, KernelSpec};
use carleson_core::{Complex64, Error};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn index_tuple(idx: DyadicIndex) -> (String, u32, u64) {
    (idx.grid.label().to_string(), idx.level, idx.position)
}

fn kernel_spec(kind: &str, alpha: f64) -> PyResult<KernelSpec> {
    match kind {
        "dirichlet" => Ok(KernelSpec::Dirichlet),
        "k-alpha" => KernelSpec::k_alpha(alpha).map_err(py_err),
        other => Err(PyValueError::new_err(format!(
            "unknown kernel `{other}`, expected `dirichlet` or `k-alpha`"
        ))),
    }
}

/// A weight on the unit disk, parsed from a spec string.
#[pyclass(name = "Weight", frozen)]
struct PyWeight {
    inner: measures::Weight,
}

#[pymethods]
impl PyWeight {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(PyWeight {
            inner: spec.parse().map_err(py_err)?,
        })
    }

    fn density(&self, z: Complex64) -> f64 {
        self.inner.density(z)
    }

    fn is_finite(&self) -> bool {
        self.inner.is_finite()
    }

    fn is_radial(&self) -> bool {
        self.inner.is_radial()
    }

    fn __repr__(&self) -> String {
        format!("Weight('{}')", self.inner)
    }
}

/// `(delta_hat, verdict)` of the reverse-doubling test up to `depth`.
#[pyfunction]
#[pyo3(signature = (weight, depth = 12, random_arcs = 256, quad_depth = None, seed = 7))]
fn reverse_doubling(
    weight: &PyWeight,
    depth: u32,
    random_arcs: usize,
    quad_depth: Option<u32>,
    seed: u64,
) -> PyResult<(f64, bool)> {
    let quad = if weight.inner.is_radial() {
        None
    } else {
        Some(measures::build_quadrature(quad_depth.unwrap_or(depth + 1), 8).map_err(py_err)?)
    };
    let r = measures::reverse_doubling_report(
        &weight.inner,
        depth,
        random_arcs,
        quad.as_ref(),
        DEFAULT_REVERSE_DOUBLING_MARGIN,
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
    .map_err(py_err)?;
    Ok((r.delta_hat, r.verdict))
}

/// Shortest dyadic arc of either grid covering the arc `[start, start + 2π length)`,
/// as `(grid, level, position)`.
#[pyfunction]
fn mei_cover(start: f64, length: f64) -> PyResult<(String, u32, u64)> {
    let arc = Arc::new(start, length).map_err(py_err)?;
    Ok(index_tuple(geometry::mei_cover(&arc)))
}

/// Box joining two points, as `(grid, level, position, |1 - z w̄| / area^(1/2))`.
#[pyfunction]
fn bridge_box(z: Complex64, w: Complex64) -> PyResult<(String, u32, u64, f64)> {
    let b = geometry::bridge_box(z, w).map_err(py_err)?;
    let (g, level, pos) = index_tuple(b.index);
    Ok((g, level, pos, b.ratio))
}

#[pyfunction]
#[pyo3(signature = (kind, z, w, alpha = 1.0))]
fn kernel_eval(kind: &str, z: Complex64, w: Complex64, alpha: f64) -> PyResult<Complex64> {
    operators::eval_kernel(&kernel_spec(kind, alpha)?, z, w).map_err(py_err)
}

/// Norm of `f ↦ Σ_j k(z_i, z_j) f_j m_j` on `L²(Σ m_j δ_{z_j})`.
#[pyfunction]
#[pyo3(signature = (points, masses, kind = "dirichlet", alpha = 1.0))]
fn operator_norm(points: Vec<Complex64>, masses: Vec<f64>, kind: &str, alpha: f64) -> PyResult<f64> {
    if points.len() != masses.len() {
        return Err(PyValueError::new_err("points and masses differ in length"));
    }
    let m = DiscreteMeasure::new(points.into_iter().zip(masses).collect()).map_err(py_err)?;
    let a = operators::assemble_operator(&kernel_spec(kind, alpha)?, &m);
    if a.dim() <= operators::DENSE_ORACLE_LIMIT {
        Ok(operators::dense_operator_norm(&a))
    } else {
        Ok(operators::operator_norm(&a).value)
    }
}

/// `|a_0|² + Σ n |a_n|²` for the polynomial with coefficients `coeffs`.
#[pyfunction]
fn dirichlet_norm(coeffs: Vec<Complex64>) -> PyResult<f64> {
    let p = AnalyticPolynomial::new(coeffs).map_err(py_err)?;
    Ok(dirichlet::dirichlet_norm(&p))
}

/// `(estimate, verdict)` for the Carleson constant of the weight.
#[pyfunction]
#[pyo3(signature = (weight, method = "operator-norm", seed = 7))]
fn carleson_constant(weight: &PyWeight, method: &str, seed: u64) -> PyResult<(f64, bool)> {
    let method = match method {
        "operator-norm" => CarlesonMethod::OperatorNorm,
        "polynomial-sampling" => CarlesonMethod::PolynomialSampling,
        other => return Err(PyValueError::new_err(format!("unknown method `{other}`"))),
    };
    let opts = CarlesonOptions {
        seed,
        ..CarlesonOptions::default()
    };
    let v = dirichlet::carleson_constant(&weight.inner, method, &opts).map_err(py_err)?;
    Ok((v.constant_estimate, v.verdict))
}

/// Runs the full pipeline and returns its report as JSON.
#[pyfunction]
#[pyo3(signature = (weight, seed = 7))]
fn certify(py: Python<'_>, weight: &PyWeight, seed: u64) -> PyResult<String> {
    let opts = PipelineOptions {
        seed,
        ..PipelineOptions::default()
    };
    let w = weight.inner.clone();
    let report = py.detach(move || dirichlet::theorem_pipeline(&w, &opts));
    serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn carleson_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyWeight>()?;
    m.add_function(wrap_pyfunction!(reverse_doubling, m)?)?;
    m.add_function(wrap_pyfunction!(mei_cover, m)?)?;
    m.add_function(wrap_pyfunction!(bridge_box, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_eval, m)?)?;
    m.add_function(wrap_pyfunction!(operator_norm, m)?)?;
    m.add_function(wrap_pyfunction!(dirichlet_norm, m)?)?;
    m.add_function(wrap_pyfunction!(carleson_constant, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    Ok(())
}
