//! Python bindings: convergence studies and the 1-D building blocks.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mlhp::io::StudyRecord;
use mlhp::problems::{CornerProblem, Grading};
use mlhp::study::{run_corner_study, run_transient_study, CornerConfig, TransientConfig};
use mlhp::Space;

fn value_error(e: mlhp::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_space(name: &str) -> PyResult<Space> {
    match name {
        "tensor" => Ok(Space::Tensor),
        "trunk" => Ok(Space::Trunk),
        other => Err(PyValueError::new_err(format!("unknown space '{other}'"))),
    }
}

fn parse_grading(name: &str) -> PyResult<Grading> {
    match name {
        "uniform" => Ok(Grading::Uniform),
        "linear" => Ok(Grading::Linear),
        other => Err(PyValueError::new_err(format!("unknown grading '{other}'"))),
    }
}

fn record_dict<'py>(py: Python<'py>, record: &StudyRecord) -> PyResult<Bound<'py, PyDict>> {
    let dict = PyDict::new(py);
    dict.set_item("study", &record.study)?;
    dict.set_item("index", record.index)?;
    dict.set_item("n_dofs", record.n_dofs)?;
    dict.set_item("nnz", record.nnz)?;
    dict.set_item("cg_iters", record.cg_iters)?;
    dict.set_item("err_energy", record.err_energy)?;
    dict.set_item("err_l2", record.err_l2)?;
    dict.set_item("t_mesh_basis_s", record.t_mesh_basis_s)?;
    dict.set_item("t_assembly_s", record.t_assembly_s)?;
    dict.set_item("t_solve_s", record.t_solve_s)?;
    Ok(dict)
}

/// Values (k = 0) or derivatives (k = 1) of I_0..I_p at r.
#[pyfunction]
#[pyo3(signature = (r, p, k = 0))]
fn integrated_legendre(r: f64, p: usize, k: usize) -> PyResult<Vec<f64>> {
    mlhp::polynomials::integrated_legendre(r, p, k)
        .map(|batch| batch.values)
        .map_err(value_error)
}

/// Points and weights of the n-point rule on [-1, 1].
#[pyfunction]
fn gauss_legendre(n: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let rule = mlhp::polynomials::gauss_legendre_rule(n).map_err(value_error)?;
    Ok((rule.points.clone(), rule.weights.clone()))
}

#[pyfunction]
fn corner_leaf_count(dim: usize, depth: usize) -> PyResult<usize> {
    let problem = CornerProblem::new(dim, depth, Grading::Uniform).map_err(value_error)?;
    Ok(problem.mesh().map_err(value_error)?.n_leaves())
}

/// Rows of the corner-singularity study as dicts.
#[pyfunction]
#[pyo3(signature = (dim = 2, levels = 5, grading = "uniform", space = "tensor", tol = 1e-10))]
fn corner_study<'py>(
    py: Python<'py>,
    dim: usize,
    levels: usize,
    grading: &str,
    space: &str,
    tol: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let config = CornerConfig {
        dim,
        max_depth: levels,
        grading: parse_grading(grading)?,
        space: parse_space(space)?,
        tol,
        ..CornerConfig::default()
    };
    let records = run_corner_study(&config, &mut |_| Ok(())).map_err(value_error)?;
    records.iter().map(|r| record_dict(py, r)).collect()
}

/// Per-step rows plus the space-time L2 error of the moving-source study.
#[pyfunction]
#[pyo3(signature = (dim = 2, steps = 32, theta = 0.5, depth = 3, degree = 4))]
fn transient_study<'py>(
    py: Python<'py>,
    dim: usize,
    steps: usize,
    theta: f64,
    depth: usize,
    degree: usize,
) -> PyResult<(Vec<Bound<'py, PyDict>>, f64)> {
    let mut config = TransientConfig::default_for(dim);
    config.steps = steps;
    config.theta = theta;
    config.depth = depth;
    config.degree = degree;
    let outcome = run_transient_study(&config, None, &mut |_| Ok(())).map_err(value_error)?;
    let rows = outcome
        .records
        .iter()
        .map(|r| record_dict(py, r))
        .collect::<PyResult<Vec<_>>>()?;
    Ok((rows, outcome.space_time_error))
}

#[pymodule]
fn pymlhp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(integrated_legendre, m)?)?;
    m.add_function(wrap_pyfunction!(gauss_legendre, m)?)?;
    m.add_function(wrap_pyfunction!(corner_leaf_count, m)?)?;
    m.add_function(wrap_pyfunction!(corner_study, m)?)?;
    m.add_function(wrap_pyfunction!(transient_study, m)?)?;
    Ok(())
}
