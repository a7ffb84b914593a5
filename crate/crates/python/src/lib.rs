//! Python bindings. Matrices cross the boundary as lists of rows.

use detperturb::brownian::{sample_path, superadditivity_gap, GaussianConvention, GridSpec, SuperaddReport};
use detperturb::inequalities::{fischer_gap as fischer_gap_impl, theorem_gap as theorem_gap_impl};
use detperturb::suites::{verify as verify_impl, Suite};
use detperturb::{
    BlockPartition, Error, GapReport, GenConfig, SpdMatrix, SymMatrix, TheoremInstance, Variant, Verdict,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

type Rows = Vec<Vec<f64>>;

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn sym(rows: Rows) -> PyResult<SymMatrix> {
    let n = rows.len();
    if let Some(bad) = rows.iter().position(|r| r.len() != n) {
        return Err(PyValueError::new_err(format!("row {bad} has length {}, expected {n}", rows[bad].len())));
    }
    SymMatrix::new(n, rows.into_iter().flatten().collect()).map_err(err)
}

fn spd(rows: Rows) -> PyResult<SpdMatrix> {
    detperturb::cholesky(&sym(rows)?).map_err(err)
}

fn variant(name: &str) -> PyResult<Variant> {
    match name {
        "theorem1" | "theorem1-general" => Ok(Variant::Theorem1),
        "theorem2" | "theorem2-general" => Ok(Variant::Theorem2),
        other => Err(PyValueError::new_err(format!("unknown variant '{other}'"))),
    }
}

fn config(seed: u64, max_dim: usize, max_blocks: usize) -> PyResult<GenConfig> {
    let cfg = GenConfig { max_dim, max_blocks, ..GenConfig::with_seed(seed) };
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

/// Signed log-determinant gap; non-negative means the inequality holds.
#[pyclass(name = "GapReport", frozen)]
pub struct PyGapReport {
    inner: GapReport,
}

#[pymethods]
impl PyGapReport {
    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }
    #[getter]
    fn lhs_log(&self) -> f64 {
        self.inner.lhs_log
    }
    #[getter]
    fn rhs_log(&self) -> f64 {
        self.inner.rhs_log
    }
    #[getter]
    fn gap(&self) -> f64 {
        self.inner.gap
    }
    #[getter]
    fn tol(&self) -> f64 {
        self.inner.tol
    }
    #[getter]
    fn alt_gap(&self) -> Option<f64> {
        self.inner.alt_gap
    }
    /// `"holds"`, `"violated"` or `"skipped"`.
    #[getter]
    fn verdict(&self) -> &'static str {
        match self.inner.verdict {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
            Verdict::Skipped => "skipped",
        }
    }
    fn holds(&self) -> bool {
        self.inner.holds()
    }
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }
    fn __repr__(&self) -> String {
        format!("GapReport(name={:?}, gap={:e}, verdict={})", self.inner.name, self.inner.gap, self.verdict())
    }
}

fn wrap(r: GapReport) -> PyGapReport {
    PyGapReport { inner: r }
}

#[pyfunction]
fn log_det(a: Rows) -> PyResult<f64> {
    Ok(spd(a)?.log_det())
}

/// Lower-triangular Cholesky factor.
#[pyfunction]
fn cholesky(a: Rows) -> PyResult<Rows> {
    let f = spd(a)?;
    let l = f.chol_factor();
    Ok((0..l.rows()).map(|i| (0..l.cols()).map(|j| l.get(i, j)).collect()).collect())
}

#[pyfunction]
fn inverse(a: Rows) -> PyResult<Rows> {
    Ok(spd(a)?.inverse().to_rows())
}

/// `(eigenvalues descending, eigenvector columns as rows of Q)`.
#[pyfunction]
fn sym_eigen(a: Rows) -> PyResult<(Vec<f64>, Rows)> {
    let e = detperturb::sym_eigen(&sym(a)?).map_err(err)?;
    let q = &e.q;
    Ok((e.lambda.clone(), (0..q.rows()).map(|i| (0..q.cols()).map(|j| q.get(i, j)).collect()).collect()))
}

#[pyfunction]
fn spd_sqrt(a: Rows) -> PyResult<Rows> {
    Ok(detperturb::spd_sqrt(&spd(a)?).map_err(err)?.matrix().to_rows())
}

/// `(λ_min(A − B), ‖A − B‖_max)`; `A ≥ B` iff the first entry is ≥ 0.
#[pyfunction]
fn loewner(a: Rows, b: Rows) -> PyResult<(f64, f64)> {
    let ev = detperturb::loewner_cmp(&sym(a)?, &sym(b)?).map_err(err)?;
    Ok((ev.min_eig, ev.diff_max))
}

#[pyfunction]
fn schur_complement(m: Rows, split: usize) -> PyResult<Rows> {
    Ok(detperturb::schur_complement(&spd(m)?, split).map_err(err)?.to_rows())
}

#[pyfunction]
fn block_inverse(m: Rows, split: usize) -> PyResult<Rows> {
    Ok(detperturb::block_inverse_2x2(&spd(m)?, split).map_err(err)?.to_rows())
}

/// Fischer, Woodbury and Sylvester residuals as a dict; `woodbury` is
/// `None` when the bottom-right Schur complement is not positive definite.
#[pyfunction]
#[pyo3(signature = (m, split, aux=None))]
fn identity_residuals<'py>(py: Python<'py>, m: Rows, split: usize, aux: Option<Rows>) -> PyResult<Bound<'py, PyDict>> {
    let aux = aux.map(sym).transpose()?;
    let r = detperturb::identity_residuals(&spd(m)?, split, aux.as_ref()).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("fischer", r.fischer)?;
    d.set_item("fischer_scale", r.fischer_scale)?;
    d.set_item("woodbury", r.woodbury)?;
    d.set_item("woodbury_scale", r.woodbury_scale)?;
    d.set_item("sylvester", r.sylvester)?;
    d.set_item("sylvester_scale", r.sylvester_scale)?;
    Ok(d)
}

/// `log det(C + D) − log det C`.
#[pyfunction]
fn log_ratio(c: Rows, d: Rows) -> PyResult<f64> {
    detperturb::log_ratio(&spd(c)?, &sym(d)?).map_err(err)
}

/// Block-diagonal perturbation gap for `C` and SPD blocks `ds`.
#[pyfunction]
#[pyo3(signature = (c, ds, variant="theorem1"))]
fn theorem_gap(c: Rows, ds: Vec<Rows>, variant: &str) -> PyResult<PyGapReport> {
    let ds = ds.into_iter().map(spd).collect::<PyResult<Vec<_>>>()?;
    let p = BlockPartition::new(ds.iter().map(SpdMatrix::n).collect()).map_err(err)?;
    let inst = TheoremInstance::new(spd(c)?, p, ds).map_err(err)?;
    theorem_gap_impl(&inst, self::variant(variant)?).map(wrap).map_err(err)
}

/// Same gap with a full SPD `D` in place of the block-diagonal one.
#[pyfunction]
#[pyo3(signature = (c, d, partition, variant="theorem1"))]
fn generalized_gap(c: Rows, d: Rows, partition: Vec<usize>, variant: &str) -> PyResult<PyGapReport> {
    let p = BlockPartition::new(partition).map_err(err)?;
    detperturb::generalized_gap(&spd(c)?, &spd(d)?, &p, self::variant(variant)?).map(wrap).map_err(err)
}

#[pyfunction]
fn lemma_gap(u: Rows, v: Rows, d: Rows) -> PyResult<PyGapReport> {
    detperturb::lemma_gap(&spd(u)?, &spd(v)?, &sym(d)?).map(wrap).map_err(err)
}

#[pyfunction]
fn grothendieck_gap(a: Rows, b: Rows) -> PyResult<PyGapReport> {
    detperturb::grothendieck_gap(&sym(a)?, &sym(b)?).map(wrap).map_err(err)
}

/// `(determinant report, inverse-order report)` for `B` and `B + W`.
#[pyfunction]
fn weyl_gap(b: Rows, w: Rows) -> PyResult<(PyGapReport, PyGapReport)> {
    let r = detperturb::weyl_gap(&spd(b)?, &sym(w)?).map_err(err)?;
    Ok((wrap(r.det), wrap(r.inverse)))
}

#[pyfunction]
fn fischer_gap(m: Rows, split: usize) -> PyResult<PyGapReport> {
    fischer_gap_impl(&spd(m)?, split).map(wrap).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (dim, seed=0, substream=0))]
fn random_spd(dim: usize, seed: u64, substream: u64) -> PyResult<Rows> {
    let cfg = config(seed, 64, 1)?;
    Ok(detperturb::random_spd(dim, substream, &cfg).map_err(err)?.matrix().to_rows())
}

/// Random search for a violation of the full-`D` generalization.
#[pyfunction]
#[pyo3(signature = (target, seed=0, max_trials=100_000, use_seeds=true, max_dim=32, max_blocks=5))]
fn search_counterexample<'py>(
    py: Python<'py>,
    target: &str,
    seed: u64,
    max_trials: u64,
    use_seeds: bool,
    max_dim: usize,
    max_blocks: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(seed, max_dim, max_blocks)?;
    let res = detperturb::search_counterexample(variant(target)?, &cfg, max_trials, use_seeds).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("found", res.found)?;
    d.set_item("gap", res.gap)?;
    d.set_item("trials_used", res.trials_used)?;
    if let Some((c, dm, p)) = &res.instance {
        d.set_item("c", c.to_rows())?;
        d.set_item("d", dm.to_rows())?;
        d.set_item("partition", p.sizes().to_vec())?;
    }
    d.set_item("report", res.report.map(wrap))?;
    Ok(d)
}

/// Per-path super-additivity of the discretized Brownian functional.
#[pyclass(name = "SuperaddReport", frozen, get_all)]
pub struct PySuperaddReport {
    f_full: f64,
    f_1: f64,
    f_2: f64,
    gap: f64,
    tol: f64,
    cross_check: f64,
    holds: bool,
}

impl From<SuperaddReport> for PySuperaddReport {
    fn from(r: SuperaddReport) -> Self {
        Self {
            f_full: r.f_full,
            f_1: r.f_1,
            f_2: r.f_2,
            gap: r.gap,
            tol: r.tol,
            cross_check: r.cross_check,
            holds: r.verdict == Verdict::Holds,
        }
    }
}

#[pyfunction]
#[pyo3(signature = (t1=1.0, t2=1.0, n=16, m=16, seed=0, path=0, convention="standard", lambda_scale=1.0))]
#[allow(clippy::too_many_arguments)]
fn superadditivity(
    t1: f64,
    t2: f64,
    n: usize,
    m: usize,
    seed: u64,
    path: u64,
    convention: &str,
    lambda_scale: f64,
) -> PyResult<PySuperaddReport> {
    let conv = match convention {
        "standard" => GaussianConvention::Standard,
        "unhalved" => GaussianConvention::Unhalved,
        other => return Err(PyValueError::new_err(format!("unknown convention '{other}'"))),
    };
    let grid = GridSpec::new(t1, t2, n, m).and_then(|g| g.with_lambda_scale(lambda_scale)).map_err(err)?;
    let p = sample_path(&grid, seed, path).map_err(err)?;
    superadditivity_gap(&p, conv).map(Into::into).map_err(err)
}

/// Runs a verification suite and returns the JSON report.
#[pyfunction]
#[pyo3(signature = (suite="all", trials=1000, seed=0, max_dim=32, max_blocks=5, tol=1e-9))]
fn verify(suite: &str, trials: u64, seed: u64, max_dim: usize, max_blocks: usize, tol: f64) -> PyResult<String> {
    let cfg = config(seed, max_dim, max_blocks)?;
    let suites = if suite == "all" { Suite::ALL.to_vec() } else { vec![suite.parse::<Suite>().map_err(err)?] };
    let (report, _) = verify_impl(&suites, suite, &cfg, trials, tol).map_err(err)?;
    Ok(report.to_json_without_clock())
}

#[pymodule]
fn pydetperturb(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGapReport>()?;
    m.add_class::<PySuperaddReport>()?;
    m.add_function(wrap_pyfunction!(log_det, m)?)?;
    m.add_function(wrap_pyfunction!(cholesky, m)?)?;
    m.add_function(wrap_pyfunction!(inverse, m)?)?;
    m.add_function(wrap_pyfunction!(sym_eigen, m)?)?;
    m.add_function(wrap_pyfunction!(spd_sqrt, m)?)?;
    m.add_function(wrap_pyfunction!(loewner, m)?)?;
    m.add_function(wrap_pyfunction!(schur_complement, m)?)?;
    m.add_function(wrap_pyfunction!(block_inverse, m)?)?;
    m.add_function(wrap_pyfunction!(identity_residuals, m)?)?;
    m.add_function(wrap_pyfunction!(log_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(theorem_gap, m)?)?;
    m.add_function(wrap_pyfunction!(generalized_gap, m)?)?;
    m.add_function(wrap_pyfunction!(lemma_gap, m)?)?;
    m.add_function(wrap_pyfunction!(grothendieck_gap, m)?)?;
    m.add_function(wrap_pyfunction!(weyl_gap, m)?)?;
    m.add_function(wrap_pyfunction!(fischer_gap, m)?)?;
    m.add_function(wrap_pyfunction!(random_spd, m)?)?;
    m.add_function(wrap_pyfunction!(search_counterexample, m)?)?;
    m.add_function(wrap_pyfunction!(superadditivity, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
