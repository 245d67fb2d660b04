//! Python bindings: expression matrices, priors, the all-pairs sweep,
//! single-design posteriors, Ward clustering, enrichment and the simulator.

use std::collections::BTreeSet;
use std::path::PathBuf;

use leadlag_core::cluster::{cut, ward_cluster, CutMode, WardConvention};
use leadlag_core::enrich::{bh_adjust, enrich_clusters, hypergeom_upper_tail, AnnotationSets};
use leadlag_core::kv::KeyValues;
use leadlag_core::pairwise::{compute_all, PairMetrics, PairwiseConfig};
use leadlag_core::regress::{
    bayes_factor, bayesian_r2, ols_fit, optimal_g, posterior_with_ols, DesignPair, GBounds, Hyperpriors, ModelVariant,
};
use leadlag_core::simulate::{simulate_cohort, CohortSpec};
use leadlag_core::timeseries::{cumulative_integral, fit_spline};
use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: leadlag_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn association(s: &str) -> PyResult<leadlag_core::Association> {
    s.parse().map_err(PyValueError::new_err)
}

#[pyclass(frozen, skip_from_py_object, module = "leadlag")]
#[derive(Clone)]
struct ExpressionMatrix(leadlag_core::ExpressionMatrix);

#[pymethods]
impl ExpressionMatrix {
    #[new]
    fn new(gene_ids: Vec<String>, rows: Vec<Vec<f64>>, times: Vec<f64>) -> PyResult<Self> {
        let grid = leadlag_core::TimeGrid::new(times).map_err(err)?;
        leadlag_core::ExpressionMatrix::from_rows(gene_ids, &rows, grid)
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        leadlag_core::ExpressionMatrix::load(&path).map(Self).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(err)
    }

    #[getter]
    fn gene_ids(&self) -> Vec<String> {
        self.0.gene_ids().to_vec()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.grid().times().to_vec()
    }

    fn row(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.0.n_genes() {
            return Err(PyValueError::new_err(format!("row {i} out of range")));
        }
        Ok(self.0.row(i).to_vec())
    }

    fn __len__(&self) -> usize {
        self.0.n_genes()
    }

    fn __repr__(&self) -> String {
        format!("ExpressionMatrix({} genes x {} times)", self.0.n_genes(), self.0.n_times())
    }
}

/// Ternary prior; cells are the strings "1", "0" and "NA".
#[pyclass(skip_from_py_object, module = "leadlag")]
#[derive(Clone)]
struct PriorAdjacency(leadlag_core::PriorAdjacency);

#[pymethods]
impl PriorAdjacency {
    #[staticmethod]
    fn unknown(gene_ids: Vec<String>) -> Self {
        Self(leadlag_core::PriorAdjacency::unknown(gene_ids))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        leadlag_core::PriorAdjacency::load(&path).map(Self).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(err)
    }

    #[getter]
    fn gene_ids(&self) -> Vec<String> {
        self.0.gene_ids().to_vec()
    }

    fn get(&self, i: usize, j: usize) -> PyResult<&'static str> {
        self.0.lookup(i, j).map(|w| w.as_str()).map_err(err)
    }

    fn set(&mut self, i: usize, j: usize, value: &str) -> PyResult<()> {
        let n = self.0.len();
        if i >= n || j >= n {
            return Err(PyValueError::new_err(format!("index out of range for {n} genes")));
        }
        self.0.set(i, j, association(value)?);
        Ok(())
    }

    fn count(&self, value: &str) -> PyResult<usize> {
        Ok(self.0.count(association(value)?))
    }
}

#[pyclass(frozen, skip_from_py_object, module = "leadlag")]
#[derive(Clone)]
struct SimilarityMatrix(leadlag_core::SimilarityMatrix);

#[pymethods]
impl SimilarityMatrix {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        leadlag_core::SimilarityMatrix::load(&path).map(Self).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(err)
    }

    #[getter]
    fn gene_ids(&self) -> Vec<String> {
        self.0.gene_ids().to_vec()
    }

    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        let n = self.0.len();
        if i >= n || j >= n {
            return Err(PyValueError::new_err(format!("index out of range for {n} genes")));
        }
        Ok(self.0.get(i, j))
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        (0..self.0.len()).map(|i| self.0.row(i).to_vec()).collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// One unordered pair of the sweep; `ij` is gene `i` regressed on gene `j`.
#[pyclass(frozen, get_all, module = "leadlag")]
struct Pair {
    i: usize,
    j: usize,
    gene_i: String,
    gene_j: String,
    llr2_ij: f64,
    llr2_ji: f64,
    llr2_sym: f64,
    llr2_other: f64,
    llr2_own_i: f64,
    llr2_own_j: f64,
    diff_ij: f64,
    ols_r2_ij: f64,
    ols_r2_ji: f64,
    g_used: f64,
    w_status: &'static str,
    bf_log10: f64,
    flags: String,
}

impl Pair {
    fn new(p: &PairMetrics, ids: &[String]) -> Self {
        Self {
            i: p.i,
            j: p.j,
            gene_i: ids[p.i].clone(),
            gene_j: ids[p.j].clone(),
            llr2_ij: p.llr2_ij,
            llr2_ji: p.llr2_ji,
            llr2_sym: p.llr2_sym(),
            llr2_other: p.llr2_other,
            llr2_own_i: p.llr2_own_i,
            llr2_own_j: p.llr2_own_j,
            diff_ij: p.diff_ij,
            ols_r2_ij: p.ols_r2_ij,
            ols_r2_ji: p.ols_r2_ji,
            g_used: p.g_used,
            w_status: p.w_status.as_str(),
            bf_log10: p.bf_log10,
            flags: p.flags.label(),
        }
    }
}

#[pymethods]
impl Pair {
    fn __repr__(&self) -> String {
        format!("Pair({}, {}, llr2_sym={:.4})", self.gene_i, self.gene_j, self.llr2_sym)
    }
}

/// All-pairs sweep. Returns the similarity matrix and one `Pair` per `i < j`.
#[pyfunction]
#[pyo3(signature = (matrix, prior=None, adaptive_xi=false, workers=0))]
fn compute_pairs(
    py: Python<'_>,
    matrix: &ExpressionMatrix,
    prior: Option<&PriorAdjacency>,
    adaptive_xi: bool,
    workers: usize,
) -> PyResult<(SimilarityMatrix, Vec<Pair>)> {
    let config = PairwiseConfig {
        adaptive_xi,
        workers,
        ..PairwiseConfig::default()
    };
    let sweep = py
        .detach(|| compute_all(&matrix.0, prior.map(|p| &p.0), &config))
        .map_err(err)?;
    let ids = matrix.0.gene_ids();
    let pairs = sweep.pairs.iter().map(|p| Pair::new(p, ids)).collect();
    Ok((SimilarityMatrix(sweep.similarity), pairs))
}

/// Cumulative integral from the first time point of the spline through `values`.
#[pyfunction]
fn spline_integral(values: Vec<f64>, times: Vec<f64>) -> PyResult<Vec<f64>> {
    let grid = leadlag_core::TimeGrid::new(times).map_err(err)?;
    let spline = fit_spline(&values, &grid).map_err(err)?;
    Ok(cumulative_integral(&spline))
}

/// g-prior posterior for one design given as rows of `x` (3 or 5 columns,
/// intercept last). With `g=None` the risk-minimising g is used.
#[pyfunction]
#[pyo3(signature = (x, y, beta0, g=None, p_cov=4))]
fn fit_posterior(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    beta0: Vec<f64>,
    g: Option<f64>,
    p_cov: usize,
) -> PyResult<Py<pyo3::types::PyDict>> {
    let n = x.len();
    let p = x.first().map_or(0, Vec::len);
    if x.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("ragged design rows"));
    }
    let variant = match p {
        5 => ModelVariant::Full,
        3 => ModelVariant::Other,
        _ => return Err(PyValueError::new_err(format!("design needs 3 or 5 columns, got {p}"))),
    };
    let xm = DMatrix::from_fn(n, p, |r, c| x[r][c]);
    let d = DesignPair::new(xm, DVector::from_vec(y), variant).map_err(err)?;
    let beta0 = DVector::from_vec(beta0);
    if beta0.len() != p {
        return Err(PyValueError::new_err(format!("beta0 needs {p} entries")));
    }
    let ols = ols_fit(&d);
    let g = match g {
        Some(g) => g,
        None => optimal_g(&d, &beta0, &ols, &GBounds::default()).g,
    };
    let fit = posterior_with_ols(&d, &ols, &beta0, g, Hyperpriors::default()).map_err(err)?;
    let r2 = bayesian_r2(&fit, d.y());
    let bf = bayes_factor(r2.value, g, n, p_cov).map_err(err)?;

    let out = pyo3::types::PyDict::new(py);
    out.set_item("g", g)?;
    out.set_item("beta_star", fit.beta_star.as_slice().to_vec())?;
    let v: Vec<Vec<f64>> = (0..p).map(|r| (0..p).map(|c| fit.v_star[(r, c)]).collect()).collect();
    out.set_item("v_star", v)?;
    out.set_item("a_star", fit.a_star)?;
    out.set_item("b_star", fit.b_star)?;
    out.set_item("r2", r2.value)?;
    out.set_item("log10_bf", bf.log10)?;
    out.set_item("rank_deficient", fit.rank_deficient)?;
    Ok(out.unbind())
}

/// Ward clustering cut into `k` clusters; returns one label per gene.
#[pyfunction]
#[pyo3(signature = (similarity, k, convention="squared"))]
fn ward_clusters(similarity: &SimilarityMatrix, k: usize, convention: &str) -> PyResult<Vec<usize>> {
    let convention: WardConvention = convention.parse().map_err(err)?;
    let dend = ward_cluster(&similarity.0, convention).map_err(err)?;
    let assignment = cut(&dend, CutMode::Clusters(k)).map_err(err)?;
    Ok(assignment.labels().to_vec())
}

/// `P(X ≥ k)` for a hypergeometric draw.
#[pyfunction]
fn hypergeom_tail(k: u64, population: u64, successes: u64, draws: u64) -> PyResult<f64> {
    hypergeom_upper_tail(k, population, successes, draws).map_err(err)
}

#[pyfunction]
fn benjamini_hochberg(pvals: Vec<f64>) -> PyResult<Vec<f64>> {
    bh_adjust(&pvals).map_err(err)
}

/// Enrichment of `(term, gene)` memberships in each cluster. Rows are
/// `(cluster, term, k, pval, padj, significant)`.
type EnrichRow = (usize, String, usize, f64, f64, bool);

#[pyfunction]
#[pyo3(signature = (gene_ids, labels, memberships, alpha=0.05))]
fn enrich(
    gene_ids: Vec<String>,
    labels: Vec<usize>,
    memberships: Vec<(String, String)>,
    alpha: f64,
) -> PyResult<Vec<EnrichRow>> {
    let assignment = leadlag_core::cluster::ClusterAssignment::from_groups(gene_ids, &labels).map_err(err)?;
    let universe: BTreeSet<String> = assignment.gene_ids().iter().cloned().collect();
    let sets = AnnotationSets::new(memberships, None).map_err(err)?.restricted_to(&universe);
    let rows = enrich_clusters(&assignment, &sets, alpha).map_err(err)?;
    Ok(rows
        .into_iter()
        .map(|r| (r.cluster, r.term, r.k, r.pval, r.padj, r.significant))
        .collect())
}

/// Simulates a cohort from `key = value` spec text; returns the expression
/// matrix and the true prior.
#[pyfunction]
#[pyo3(signature = (spec, seed=None))]
fn simulate(py: Python<'_>, spec: &str, seed: Option<u64>) -> PyResult<(ExpressionMatrix, PriorAdjacency)> {
    let mut kv = KeyValues::parse(spec, std::path::Path::new("<spec>")).map_err(err)?;
    if let Some(s) = seed {
        kv.set("seed", &s.to_string()).map_err(err)?;
    }
    let spec = CohortSpec::from_kv(&kv).map_err(err)?;
    let (m, truth) = py.detach(|| simulate_cohort(&spec)).map_err(err)?;
    Ok((ExpressionMatrix(m), PriorAdjacency(truth)))
}

#[pymodule]
fn leadlag(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ExpressionMatrix>()?;
    m.add_class::<PriorAdjacency>()?;
    m.add_class::<SimilarityMatrix>()?;
    m.add_class::<Pair>()?;
    m.add_function(wrap_pyfunction!(compute_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(spline_integral, m)?)?;
    m.add_function(wrap_pyfunction!(fit_posterior, m)?)?;
    m.add_function(wrap_pyfunction!(ward_clusters, m)?)?;
    m.add_function(wrap_pyfunction!(hypergeom_tail, m)?)?;
    m.add_function(wrap_pyfunction!(benjamini_hochberg, m)?)?;
    m.add_function(wrap_pyfunction!(enrich, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
