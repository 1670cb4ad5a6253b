use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use infera_core as core;
use infera_core::{ising, InferaError, PrivacyBudget};

create_exception!(infera, InferaException, PyValueError);

fn to_py(e: InferaError) -> PyErr {
    InferaException::new_err(e.to_string())
}

fn budget(eps: Vec<f64>, n: usize) -> PyResult<PrivacyBudget> {
    let b = if eps.len() == 1 && n > 1 { PrivacyBudget::uniform(n, eps[0]) } else { PrivacyBudget::new(eps) };
    b.map_err(to_py)
}

/// Dense prior over `alphabet^n` databases, coordinate 0 least significant.
#[pyclass(name = "JointDistribution", frozen)]
pub struct PyJointDistribution {
    inner: core::JointDistribution,
}

fn wrap(d: core::Result<core::JointDistribution>) -> PyResult<PyJointDistribution> {
    d.map(|inner| PyJointDistribution { inner }).map_err(to_py)
}

#[pymethods]
impl PyJointDistribution {
    #[staticmethod]
    fn from_dense(n: usize, alphabet: usize, probs: Vec<f64>) -> PyResult<Self> {
        wrap(core::JointDistribution::from_dense(n, alphabet, probs))
    }

    #[staticmethod]
    fn product(marginals: Vec<Vec<f64>>) -> PyResult<Self> {
        wrap(core::JointDistribution::product(&marginals))
    }

    #[staticmethod]
    #[pyo3(signature = (n, p_one = 0.5))]
    fn perfectly_correlated(n: usize, p_one: f64) -> PyResult<Self> {
        wrap(core::JointDistribution::perfectly_correlated(n, p_one))
    }

    #[staticmethod]
    fn parity_constrained(r: usize, s: usize) -> PyResult<Self> {
        wrap(core::JointDistribution::parity_constrained(r, s))
    }

    #[staticmethod]
    #[pyo3(signature = (d, depth, j, h0 = 0.0))]
    fn ising_tree(d: usize, depth: usize, j: f64, h0: f64) -> PyResult<Self> {
        let model = core::IsingTreeModel::new(d, depth, j, h0).map_err(to_py)?;
        wrap(ising::ising_tree_distribution(&model))
    }

    /// Parse the CLI's distribution JSON (dense table or generator).
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        wrap(core::cli::parse_distribution(text))
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn alphabet(&self) -> usize {
        self.inner.alphabet()
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.inner.probs().to_vec()
    }

    fn marginal(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.n() {
            return Err(to_py(InferaError::InvalidParameter(format!("coordinate {i} out of range"))));
        }
        Ok(self.inner.marginal(i))
    }

    fn prior_odds(&self, a: usize) -> PyResult<f64> {
        self.inner.prior_odds(a).map_err(to_py)
    }

    /// `(affiliated, witness_pair_or_None)`.
    fn is_positively_affiliated(&self) -> PyResult<(bool, Option<(usize, usize)>)> {
        let c = self.inner.is_positively_affiliated().map_err(to_py)?;
        Ok((c.affiliated, c.witness))
    }

    fn is_pairwise_positively_correlated(&self) -> PyResult<bool> {
        self.inner.is_pairwise_positively_correlated().map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("JointDistribution(n={}, alphabet={})", self.inner.n(), self.inner.alphabet())
    }
}

/// Exact worst-case ν with its optimal event profile.
#[pyclass(name = "NuCertificate", frozen)]
pub struct PyNuCertificate {
    #[pyo3(get)]
    nu: f64,
    #[pyo3(get)]
    direction: (usize, usize),
    #[pyo3(get)]
    witness: Vec<f64>,
    #[pyo3(get)]
    lp_objective: f64,
    #[pyo3(get)]
    directional: (f64, f64),
    #[pyo3(get)]
    iterations: usize,
}

#[pymethods]
impl PyNuCertificate {
    fn __repr__(&self) -> String {
        format!("NuCertificate(nu={}, direction={:?})", self.nu, self.direction)
    }
}

/// Influence matrix plus the bounds it implies, when they exist.
#[pyclass(name = "InfluenceBound", frozen)]
pub struct PyInfluenceBound {
    #[pyo3(get)]
    gamma: Vec<Vec<f64>>,
    #[pyo3(get)]
    spectral_norm: Option<f64>,
    #[pyo3(get)]
    unbounded: bool,
    #[pyo3(get)]
    phi: Option<Vec<Vec<f64>>>,
    #[pyo3(get)]
    nu_bound: Option<Vec<f64>>,
    #[pyo3(get)]
    delta: Option<f64>,
    #[pyo3(get)]
    nu_delta_bound: Option<Vec<f64>>,
}

/// Fixed point `x(J, h)` of the tree recursion.
#[pyclass(name = "BetheSolution", frozen)]
pub struct PyBetheSolution {
    #[pyo3(get)]
    x_fixed: f64,
    #[pyo3(get)]
    ln_x: f64,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    branch: i8,
}

#[pymethods]
impl PyBetheSolution {
    fn __repr__(&self) -> String {
        format!("BetheSolution(x_fixed={}, iterations={})", self.x_fixed, self.iterations)
    }
}

/// ν over all ε-DP mechanisms by linear programming. A single ε is applied
/// to every individual.
#[pyfunction]
fn nu_exact(dist: &PyJointDistribution, eps: Vec<f64>, a: usize) -> PyResult<PyNuCertificate> {
    let b = budget(eps, dist.inner.n())?;
    let c = core::nu_exact(&dist.inner, &b, a).map_err(to_py)?;
    Ok(PyNuCertificate {
        nu: c.nu,
        direction: c.direction,
        witness: c.witness.values().to_vec(),
        lp_objective: c.lp_objective,
        directional: (c.directional[0], c.directional[1]),
        iterations: c.iterations,
    })
}

/// Closed-form ν for positively affiliated priors; `(nu, winning_z, warning)`.
#[pyfunction]
#[pyo3(signature = (dist, eps, a, force = false))]
fn nu_closed_form(dist: &PyJointDistribution, eps: Vec<f64>, a: usize, force: bool) -> PyResult<(f64, usize, Option<String>)> {
    let b = budget(eps, dist.inner.n())?;
    let r = core::nu_closed_form(&dist.inner, &b, a, force).map_err(to_py)?;
    Ok((r.nu, r.winning_z, r.warning))
}

/// ν from magnetizations under the fields `±ε/2`.
#[pyfunction]
fn nu_gibbs(dist: &PyJointDistribution, eps: Vec<f64>, site: usize) -> PyResult<f64> {
    let b = budget(eps, dist.inner.n())?;
    ising::nu_gibbs(&dist.inner, &b, site).map_err(to_py)
}

/// ν of a single-event mechanism given by its profile `m(x)`.
#[pyfunction]
fn profile_nu(dist: &PyJointDistribution, m: Vec<f64>, a: usize) -> PyResult<f64> {
    let p = core::EventProfile::new(dist.inner.n(), dist.inner.alphabet(), m).map_err(to_py)?;
    core::mechanism_nu(&dist.inner, &core::Mechanism::Profile(p), a).map_err(to_py)
}

/// Per-individual ε of a binary event profile.
#[pyfunction]
fn dp_audit(m: Vec<f64>) -> PyResult<Vec<f64>> {
    let p = core::EventProfile::binary(m).map_err(to_py)?;
    Ok(core::dp_audit(&p).as_slice().to_vec())
}

#[pyfunction]
fn influence_bound(dist: &PyJointDistribution, eps: Vec<f64>) -> PyResult<PyInfluenceBound> {
    let b = budget(eps, dist.inner.n())?;
    let inf = core::influence_matrix(&dist.inner).map_err(to_py)?;
    let bound = match core::dobrushin_bounds(&inf, &b) {
        Ok(bound) => Some(bound),
        Err(InferaError::Unbounded | InferaError::SpectralNormTooLarge(_)) => None,
        Err(e) => return Err(to_py(e)),
    };
    Ok(PyInfluenceBound {
        gamma: inf.gamma,
        spectral_norm: inf.spectral_norm,
        unbounded: inf.unbounded,
        phi: bound.as_ref().map(|b| b.phi.clone()),
        nu_bound: bound.as_ref().map(|b| b.nu_bound.clone()),
        delta: bound.as_ref().and_then(|b| b.delta),
        nu_delta_bound: bound.and_then(|b| b.nu_delta_bound),
    })
}

#[pyfunction]
fn bethe_fixed_point(j: f64, h: f64, d: usize) -> PyResult<PyBetheSolution> {
    let s = ising::bethe_fixed_point(j, h, d).map_err(to_py)?;
    Ok(PyBetheSolution { x_fixed: s.x_fixed, ln_x: s.ln_x, iterations: s.iterations, converged: s.converged, branch: s.branch })
}

#[pyfunction]
fn nu_bethe_limit(j: f64, eps: f64, d: usize) -> PyResult<f64> {
    ising::nu_bethe_limit(j, eps, d).map_err(to_py)
}

#[pyfunction]
fn critical_coupling(d: usize) -> PyResult<f64> {
    ising::critical_coupling(d).map_err(to_py)
}

#[pyfunction]
fn enforceable_epsilon(target_nu: f64, j: f64, d: usize) -> PyResult<Option<f64>> {
    ising::enforceable_epsilon(target_nu, j, d).map_err(to_py)
}

#[pyfunction]
fn sensitivity_profile(j: f64, h0: f64, d: usize, eps: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
    ising::sensitivity_profile(j, h0, d, &eps).map_err(to_py)
}

#[pyfunction]
fn magnetization_exact(dist: &PyJointDistribution, site: usize, field_offset: f64) -> PyResult<f64> {
    ising::magnetization_exact(&dist.inner, site, field_offset).map_err(to_py)
}

#[pymodule]
fn infera(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("InferaException", m.py().get_type::<InferaException>())?;
    m.add_class::<PyJointDistribution>()?;
    m.add_class::<PyNuCertificate>()?;
    m.add_class::<PyInfluenceBound>()?;
    m.add_class::<PyBetheSolution>()?;
    m.add_function(wrap_pyfunction!(nu_exact, m)?)?;
    m.add_function(wrap_pyfunction!(nu_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(nu_gibbs, m)?)?;
    m.add_function(wrap_pyfunction!(profile_nu, m)?)?;
    m.add_function(wrap_pyfunction!(dp_audit, m)?)?;
    m.add_function(wrap_pyfunction!(influence_bound, m)?)?;
    m.add_function(wrap_pyfunction!(bethe_fixed_point, m)?)?;
    m.add_function(wrap_pyfunction!(nu_bethe_limit, m)?)?;
    m.add_function(wrap_pyfunction!(critical_coupling, m)?)?;
    m.add_function(wrap_pyfunction!(enforceable_epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(sensitivity_profile, m)?)?;
    m.add_function(wrap_pyfunction!(magnetization_exact, m)?)?;
    Ok(())
}
