//! All-pairs sweep: per-pair lead-lag metrics under the g-prior, the
//! symmetrized similarity matrix and percentile thresholds.

use std::io::Write;

use bitflags::bitflags;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prior::{Association, PriorAdjacency};
use crate::regress::{
    bayes_factor, bayesian_r2, build_design, classic_r2, ols_fit, optimal_g, optimal_g_xi, posterior_with_ols,
    prior_mean, select_g, GBounds, Hyperpriors, ModelVariant, DEFAULT_P_COV,
};
use crate::similarity::SimilarityMatrix;
use crate::timeseries::{cumulative_integral, fit_spline, ExpressionMatrix};

/// Default cut-off on the Bayesian LLR² (95th percentile in the reference cohort).
pub const BAYES_THRESHOLD: f64 = 0.76;
/// Default cut-off on the least-squares LLR² (95th percentile in the reference cohort).
pub const OLS_THRESHOLD: f64 = 0.96;
/// Default edge threshold for association networks.
pub const NETWORK_THRESHOLD: f64 = 0.9;

bitflags! {
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct PairFlags: u8 {
        /// A constant series; metrics are defined as 0.
        const DEGENERATE = 1;
        /// Some design had dependent columns (minimum-norm fit used).
        const RANK_DEFICIENT = 1 << 1;
        /// A least-squares fit was exact, so `g` sits at the cap.
        const PERFECT_FIT = 1 << 2;
        /// The closed-form `g*` was pulled into the configured bounds.
        const CLAMPED = 1 << 3;
    }
}

impl PairFlags {
    /// `|`-joined lowercase names, `-` when empty.
    pub fn label(self) -> String {
        if self.is_empty() {
            return "-".into();
        }
        self.iter_names()
            .map(|(name, _)| name.to_ascii_lowercase())
            .collect::<Vec<_>>()
            .join("|")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseConfig {
    pub hyper: Hyperpriors,
    pub g_bounds: GBounds,
    /// Fit the prior-mean scale ξ jointly with `g` for associated pairs.
    pub adaptive_xi: bool,
    /// Covariate count used by the Bayes factor.
    pub p_cov: usize,
    /// Worker threads for the sweep; 0 uses all available cores.
    pub workers: usize,
}

impl Default for PairwiseConfig {
    fn default() -> Self {
        Self {
            hyper: Hyperpriors::default(),
            g_bounds: GBounds::default(),
            adaptive_xi: false,
            p_cov: DEFAULT_P_COV,
            workers: 0,
        }
    }
}

impl PairwiseConfig {
    pub fn validate(&self) -> Result<()> {
        self.g_bounds.validate()?;
        if !(self.hyper.a > 0.0 && self.hyper.b > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "hyperpriors must be positive, got a = {}, b = {}",
                self.hyper.a, self.hyper.b
            )));
        }
        Ok(())
    }
}

/// Metrics for one unordered pair `i < j`. `ij` means gene `i` regressed on
/// gene `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMetrics {
    pub i: usize,
    pub j: usize,
    pub llr2_ij: f64,
    pub llr2_ji: f64,
    /// Partner-only sub-model, `i` on `j`.
    pub llr2_other: f64,
    pub llr2_own_i: f64,
    pub llr2_own_j: f64,
    /// `llr2_ij − llr2_own_i`
    pub diff_ij: f64,
    /// Least-squares LLR² in each direction.
    pub ols_r2_ij: f64,
    pub ols_r2_ji: f64,
    /// `g` of the full model, `i` on `j`.
    pub g_used: f64,
    pub w_status: Association,
    /// log₁₀ Bayes factor of the full model `i` on `j` against intercept-only.
    pub bf_log10: f64,
    pub flags: PairFlags,
}

impl PairMetrics {
    pub fn llr2_sym(&self) -> f64 {
        symmetrize(self.llr2_ij, self.llr2_ji)
    }

    pub fn ols_r2_sym(&self) -> f64 {
        symmetrize(self.ols_r2_ij, self.ols_r2_ji)
    }
}

/// Spline integrals for every gene, computed once and shared by all pairs.
#[derive(Debug, Clone)]
pub struct PreparedCohort<'a> {
    matrix: &'a ExpressionMatrix,
    integrals: Vec<Vec<f64>>,
    constant: Vec<bool>,
    spline_fits: usize,
}

impl<'a> PreparedCohort<'a> {
    pub fn new(matrix: &'a ExpressionMatrix) -> Result<Self> {
        let mut integrals = Vec::with_capacity(matrix.n_genes());
        for i in 0..matrix.n_genes() {
            let spline = fit_spline(matrix.row(i), matrix.grid())?;
            integrals.push(cumulative_integral(&spline));
        }
        Ok(Self {
            matrix,
            spline_fits: integrals.len(),
            integrals,
            constant: matrix.constant_rows(),
        })
    }

    pub fn matrix(&self) -> &ExpressionMatrix {
        self.matrix
    }

    pub fn integral(&self, i: usize) -> &[f64] {
        &self.integrals[i]
    }

    /// Number of spline fits performed (one per gene).
    pub fn spline_fits(&self) -> usize {
        self.spline_fits
    }
}

#[derive(Debug, Clone, Copy)]
struct Directed {
    r2: f64,
    ols_r2: f64,
    g: f64,
    bf_log10: f64,
    flags: PairFlags,
}

impl Directed {
    const DEGENERATE: Directed = Directed {
        r2: 0.0,
        ols_r2: 0.0,
        g: 1.0,
        bf_log10: 0.0,
        flags: PairFlags::DEGENERATE,
    };
}

fn fit_directed(
    cohort: &PreparedCohort,
    resp: usize,
    partner: usize,
    w: Association,
    variant: ModelVariant,
    config: &PairwiseConfig,
) -> Result<Directed> {
    let m = cohort.matrix;
    let d = build_design(
        m.row(resp),
        m.row(partner),
        cohort.integral(resp),
        cohort.integral(partner),
        m.grid(),
        variant,
    )?;
    let ols = ols_fit(&d);
    let adaptive = config.adaptive_xi && w == Association::Associated && variant == ModelVariant::Full;
    let (beta0, gs) = if adaptive {
        let (xi, gs) = optimal_g_xi(&d, &ols, &config.g_bounds)?;
        (prior_mean(w, variant, Some(xi)), gs)
    } else {
        let beta0 = prior_mean(w, variant, None);
        let gs = optimal_g(&d, &beta0, &ols, &config.g_bounds);
        (beta0, gs)
    };
    let g = select_g(w, gs.g);
    let fit = posterior_with_ols(&d, &ols, &beta0, g, config.hyper)?;
    let r2 = bayesian_r2(&fit, d.y());
    let ols_r2 = classic_r2(&d, &ols.fitted);

    let mut flags = PairFlags::empty();
    flags.set(PairFlags::DEGENERATE, r2.degenerate);
    flags.set(PairFlags::RANK_DEFICIENT, ols.rank_deficient());
    if w != Association::Unlikely {
        flags.set(PairFlags::PERFECT_FIT, gs.perfect_fit);
        flags.set(PairFlags::CLAMPED, !gs.perfect_fit && gs.clamped());
    }
    let bf_log10 = if variant == ModelVariant::Full {
        bayes_factor(ols_r2.value, g, d.n(), config.p_cov)?.log10
    } else {
        0.0
    };
    Ok(Directed {
        r2: r2.value,
        ols_r2: ols_r2.value,
        g,
        bf_log10,
        flags,
    })
}

/// Autoregressive sub-model for one gene. The prior mean is zero whatever the
/// pair, and `g` is its clamped SURE optimum.
fn fit_own(cohort: &PreparedCohort, i: usize, config: &PairwiseConfig) -> Directed {
    if cohort.constant[i] {
        return Directed::DEGENERATE;
    }
    match fit_directed(cohort, i, i, Association::Unknown, ModelVariant::Own, config) {
        Ok(d) => d,
        Err(e) => {
            log::debug!("own-past model for gene {i} failed: {e}");
            Directed::DEGENERATE
        }
    }
}

fn pair_metrics(
    cohort: &PreparedCohort,
    i: usize,
    j: usize,
    w: Association,
    own_i: Directed,
    own_j: Directed,
    config: &PairwiseConfig,
) -> PairMetrics {
    let cross = || -> Result<(Directed, Directed, Directed)> {
        Ok((
            fit_directed(cohort, i, j, w, ModelVariant::Full, config)?,
            fit_directed(cohort, j, i, w, ModelVariant::Full, config)?,
            fit_directed(cohort, i, j, w, ModelVariant::Other, config)?,
        ))
    };
    let (ij, ji, other) = if cohort.constant[i] || cohort.constant[j] {
        (Directed::DEGENERATE, Directed::DEGENERATE, Directed::DEGENERATE)
    } else {
        cross().unwrap_or_else(|e| {
            log::debug!("pair ({i}, {j}) failed: {e}");
            (Directed::DEGENERATE, Directed::DEGENERATE, Directed::DEGENERATE)
        })
    };
    PairMetrics {
        i,
        j,
        llr2_ij: ij.r2,
        llr2_ji: ji.r2,
        llr2_other: other.r2,
        llr2_own_i: own_i.r2,
        llr2_own_j: own_j.r2,
        diff_ij: ij.r2 - own_i.r2,
        ols_r2_ij: ij.ols_r2,
        ols_r2_ji: ji.ols_r2,
        g_used: ij.g,
        w_status: w,
        bf_log10: ij.bf_log10,
        flags: ij.flags | ji.flags | other.flags | own_i.flags | own_j.flags,
    }
}

/// Metrics for a single pair `i < j` (or `i > j`, swapped into order).
pub fn compute_pair(
    i: usize,
    j: usize,
    cohort: &PreparedCohort,
    prior: &PriorAdjacency,
    config: &PairwiseConfig,
) -> Result<PairMetrics> {
    config.validate()?;
    let n = cohort.matrix.n_genes();
    if i == j {
        return Err(Error::InvalidArgument(format!("pair needs two distinct genes, got ({i}, {j})")));
    }
    for idx in [i, j] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, len: n });
        }
    }
    if prior.len() != n {
        return Err(Error::LengthMismatch {
            what: "prior adjacency",
            expected: n,
            got: prior.len(),
        });
    }
    let (i, j) = (i.min(j), i.max(j));
    let w = prior.get(i, j);
    let (own_i, own_j) = (fit_own(cohort, i, config), fit_own(cohort, j, config));
    Ok(pair_metrics(cohort, i, j, w, own_i, own_j, config))
}

/// Output of [`compute_all`].
#[derive(Debug, Clone)]
pub struct SweepResult {
    /// `S_ij = max(llr2_ij, llr2_ji)`, unit diagonal.
    pub similarity: SimilarityMatrix,
    /// One record per `i < j`, in lexicographic order.
    pub pairs: Vec<PairMetrics>,
    pub spline_fits: usize,
}

/// Evaluates every unordered pair. A missing prior treats every pair as
/// unknown. Results do not depend on the worker count.
pub fn compute_all(
    matrix: &ExpressionMatrix,
    prior: Option<&PriorAdjacency>,
    config: &PairwiseConfig,
) -> Result<SweepResult> {
    config.validate()?;
    let n = matrix.n_genes();
    let prior = match prior {
        Some(p) => p.aligned_to(matrix.gene_ids())?,
        None => PriorAdjacency::unknown(matrix.gene_ids().to_vec()),
    };
    let cohort = PreparedCohort::new(matrix)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;

    let index: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let pairs = pool.install(|| {
        let own: Vec<Directed> = (0..n).into_par_iter().map(|i| fit_own(&cohort, i, config)).collect();
        index
            .par_iter()
            .map(|&(i, j)| pair_metrics(&cohort, i, j, prior.get(i, j), own[i], own[j], config))
            .collect::<Vec<_>>()
    });

    let mut k = 0;
    let similarity = SimilarityMatrix::from_upper(matrix.gene_ids().to_vec(), |_, _| {
        let v = pairs[k].llr2_sym();
        k += 1;
        v
    });
    Ok(SweepResult {
        similarity,
        pairs,
        spline_fits: cohort.spline_fits,
    })
}

/// Symmetric similarity from the two directed R² values.
pub fn symmetrize(llr2_ij: f64, llr2_ji: f64) -> f64 {
    llr2_ij.max(llr2_ji)
}

/// Percentile with linear interpolation between adjacent order statistics
/// (rank `h = (m − 1) q`).
pub fn percentile_threshold(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("percentile of an empty sample".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("quantile must lie in [0, 1], got {q}")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("percentile sample contains NaN".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        return Ok(sorted[lo]);
    }
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

pub const PAIR_TSV_COLUMNS: [&str; 13] = [
    "gene_i",
    "gene_j",
    "llr2_ij",
    "llr2_ji",
    "llr2_sym",
    "llr2_other",
    "llr2_own_i",
    "llr2_own_j",
    "diff_ij",
    "g_used",
    "w_status",
    "bf_log10",
    "flags",
];

/// Tab-separated metrics table with a header row.
pub fn write_pair_tsv<W: Write>(mut writer: W, gene_ids: &[String], pairs: &[PairMetrics]) -> Result<()> {
    writeln!(writer, "{}", PAIR_TSV_COLUMNS.join("\t"))?;
    for p in pairs {
        writeln!(
            writer,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            gene_ids[p.i],
            gene_ids[p.j],
            p.llr2_ij,
            p.llr2_ji,
            p.llr2_sym(),
            p.llr2_other,
            p.llr2_own_i,
            p.llr2_own_j,
            p.diff_ij,
            p.g_used,
            p.w_status,
            p.bf_log10,
            p.flags.label()
        )?;
    }
    writer.flush()?;
    Ok(())
}
