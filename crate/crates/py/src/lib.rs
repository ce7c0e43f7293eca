//! Python bindings. Complex numbers map to Python `complex`, matrices to
//! lists of rows, rays to multiples of π.

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use stokes_core::liealg::{GradedElement, GradedSystem, Kind, Ray};
use stokes_core::stokes::{self, TruncationPolicy};
use stokes_core::transforms::{make_j_over, Transform};
use stokes_core::{oracle, trees, CMat, Error, C64};

create_exception!(stokes_py, NonGenericError, PyValueError);
create_exception!(stokes_py, NotConvergedError, PyRuntimeError);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::NonGeneric(_) => NonGenericError::new_err(e.to_string()),
        Error::NotConverged { .. } => NotConvergedError::new_err(e.to_string()),
        Error::Invalid(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_mat(rows: &[Vec<C64>]) -> PyResult<CMat> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square and nonempty"));
    }
    Ok(CMat::from_fn(n, n, |i, j| rows[i][j]))
}

fn from_mat(m: &CMat) -> Vec<Vec<C64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn system(eigenvalues: &[C64], multiplicities: Option<Vec<usize>>) -> PyResult<GradedSystem> {
    let mult = multiplicities.unwrap_or_else(|| vec![1; eigenvalues.len()]);
    GradedSystem::new(eigenvalues, &mult).map_err(py_err)
}

fn element(sys: &GradedSystem, rows: &[Vec<C64>], kind: Kind) -> PyResult<GradedElement> {
    let m = to_mat(rows)?;
    if m.nrows() != sys.dim() {
        return Err(PyValueError::new_err(format!("element must be {0}×{0}", sys.dim())));
    }
    Ok(GradedElement::from_matrix(sys, &m, kind))
}

fn policy(order: usize, tol: f64, check_convergence: bool) -> PyResult<TruncationPolicy> {
    let p = TruncationPolicy::new(order, tol).map_err(py_err)?;
    Ok(if check_convergence { p.checked() } else { p })
}

/// Evaluates `M`, `L`, `J`, `Q` or `Qtilde` at a tuple.
#[pyfunction]
#[pyo3(signature = (name, z, ray = 0.0, tol = 1e-10))]
fn mlog(name: &str, z: Vec<C64>, ray: f64, tol: f64) -> PyResult<C64> {
    let t = match name {
        "M" => Transform::m(tol),
        "L" => Transform::l(tol),
        "J" => make_j_over(&Transform::l(tol)),
        "Q" => Transform::q(ray, tol),
        "Qtilde" => Transform::qtilde(ray, tol),
        _ => return Err(PyValueError::new_err(format!("unknown family {name}"))),
    };
    t.eval(&z).map_err(py_err)
}

#[pyfunction]
fn tree_count(leaves: usize) -> PyResult<u64> {
    if leaves == 0 || leaves > trees::MAX_LEAVES {
        return Err(PyValueError::new_err(format!(
            "leaves must be in 1..={}",
            trees::MAX_LEAVES
        )));
    }
    Ok(trees::count(leaves))
}

#[pyfunction]
fn plane_trees(leaves: usize) -> PyResult<Vec<String>> {
    Ok(trees::enumerate(leaves)
        .map_err(py_err)?
        .iter()
        .map(|t| t.to_string())
        .collect())
}

#[pyfunction]
#[pyo3(signature = (eigenvalues, multiplicities = None))]
fn stokes_rays(eigenvalues: Vec<C64>, multiplicities: Option<Vec<usize>>) -> PyResult<Vec<f64>> {
    let sys = system(&eigenvalues, multiplicities)?;
    Ok(sys.stokes_rays().map_err(py_err)?.iter().map(|r| r.angle).collect())
}

/// `ε = S(f)` as a full matrix.
#[pyfunction]
#[pyo3(signature = (eigenvalues, f, multiplicities = None, order = 8, tol = 1e-10, check_convergence = false))]
fn stokes_map(
    eigenvalues: Vec<C64>,
    f: Vec<Vec<C64>>,
    multiplicities: Option<Vec<usize>>,
    order: usize,
    tol: f64,
    check_convergence: bool,
) -> PyResult<Vec<Vec<C64>>> {
    let sys = system(&eigenvalues, multiplicities)?;
    let f = element(&sys, &f, Kind::F)?;
    let eps = stokes::stokes_map(&sys, &f, &policy(order, tol, check_convergence)?).map_err(py_err)?;
    Ok(from_mat(&eps.to_matrix()))
}

#[pyfunction]
#[pyo3(signature = (eigenvalues, eps, multiplicities = None, order = 8, tol = 1e-10, check_convergence = false))]
fn stokes_inverse(
    eigenvalues: Vec<C64>,
    eps: Vec<Vec<C64>>,
    multiplicities: Option<Vec<usize>>,
    order: usize,
    tol: f64,
    check_convergence: bool,
) -> PyResult<Vec<Vec<C64>>> {
    let sys = system(&eigenvalues, multiplicities)?;
    let eps = element(&sys, &eps, Kind::Epsilon)?;
    let f = stokes::stokes_inverse(&sys, &eps, &policy(order, tol, check_convergence)?).map_err(py_err)?;
    Ok(from_mat(&f.to_matrix()))
}

/// Stokes factor on `ray`; `method` is `"series"` or `"numeric"`.
#[pyfunction]
#[pyo3(signature = (eigenvalues, f, ray, multiplicities = None, order = 8, tol = 1e-10, method = "series"))]
fn stokes_factor(
    eigenvalues: Vec<C64>,
    f: Vec<Vec<C64>>,
    ray: f64,
    multiplicities: Option<Vec<usize>>,
    order: usize,
    tol: f64,
    method: &str,
) -> PyResult<Vec<Vec<C64>>> {
    let sys = system(&eigenvalues, multiplicities)?;
    let f = element(&sys, &f, Kind::F)?;
    let r = Ray::new(ray);
    let s = match method {
        "series" => stokes::stokes_factor_matrix(&sys, &f, &r, &policy(order, tol, false)?).map_err(py_err)?,
        "numeric" => {
            let irr = oracle::IrregularSystem::from_element(sys, &f).map_err(py_err)?;
            oracle::stokes_factor_numeric(&irr, &r, None, tol)
                .map_err(py_err)?
                .laplace
        }
        _ => return Err(PyValueError::new_err(format!("unknown method {method}"))),
    };
    Ok(from_mat(&s))
}

/// Stokes multipliers `(S_+, S_-)` for an admissible ray; `method` is
/// `"series"` or `"factors"`.
#[pyfunction]
#[pyo3(signature = (eigenvalues, f, ray, multiplicities = None, order = 8, tol = 1e-10, method = "series"))]
#[allow(clippy::type_complexity)]
fn multipliers(
    eigenvalues: Vec<C64>,
    f: Vec<Vec<C64>>,
    ray: f64,
    multiplicities: Option<Vec<usize>>,
    order: usize,
    tol: f64,
    method: &str,
) -> PyResult<(Vec<Vec<C64>>, Vec<Vec<C64>>)> {
    let sys = system(&eigenvalues, multiplicities)?;
    let f = element(&sys, &f, Kind::F)?;
    let r = Ray::new(ray);
    let p = policy(order, tol, false)?;
    let m = match method {
        "series" => stokes::multipliers_series(&sys, &f, &r, &p),
        "factors" => stokes::multipliers_from_factors(&sys, &f, &r, &p),
        _ => return Err(PyValueError::new_err(format!("unknown method {method}"))),
    }
    .map_err(py_err)?;
    Ok((from_mat(&m.plus), from_mat(&m.minus)))
}

/// Transports `f` along a piecewise-linear path of eigenvalue tuples.
#[pyfunction]
#[pyo3(signature = (path, f, multiplicities = None, steps = 1, tol = 1e-12))]
fn isomonodromy_flow(
    path: Vec<Vec<C64>>,
    f: Vec<Vec<C64>>,
    multiplicities: Option<Vec<usize>>,
    steps: usize,
    tol: f64,
) -> PyResult<Vec<Vec<C64>>> {
    let first = path.first().ok_or_else(|| PyValueError::new_err("path is empty"))?;
    let sys = system(first, multiplicities)?;
    let f = element(&sys, &f, Kind::F)?;
    let g = oracle::isomonodromy_flow(&sys, &f, &path, steps, tol).map_err(py_err)?;
    Ok(from_mat(&g.to_matrix()))
}

#[pymodule]
fn stokes_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NonGenericError", m.py().get_type::<NonGenericError>())?;
    m.add("NotConvergedError", m.py().get_type::<NotConvergedError>())?;
    m.add_function(wrap_pyfunction!(mlog, m)?)?;
    m.add_function(wrap_pyfunction!(tree_count, m)?)?;
    m.add_function(wrap_pyfunction!(plane_trees, m)?)?;
    m.add_function(wrap_pyfunction!(stokes_rays, m)?)?;
    m.add_function(wrap_pyfunction!(stokes_map, m)?)?;
    m.add_function(wrap_pyfunction!(stokes_inverse, m)?)?;
    m.add_function(wrap_pyfunction!(stokes_factor, m)?)?;
    m.add_function(wrap_pyfunction!(multipliers, m)?)?;
    m.add_function(wrap_pyfunction!(isomonodromy_flow, m)?)?;
    Ok(())
}
