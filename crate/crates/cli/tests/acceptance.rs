//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; exits non-zero if any criterion fails.
//!
//!     cargo test --release -p leadlag-cli --test acceptance

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use leadlag_core::cluster::{ward_from_distances, Dendrogram, WardConvention};
use leadlag_core::enrich::{bh_adjust, hypergeom_upper_tail};
use leadlag_core::pairwise::{compute_all, PairMetrics, PairwiseConfig};
use leadlag_core::regress::{
    bayes_factor, bayesian_r2, ols_fit, optimal_g, optimal_g_xi, posterior, sure, DesignPair, GBounds, Hyperpriors,
    ModelVariant,
};
use leadlag_core::simulate::{simulate_cohort, RandomCohort};
use leadlag_core::timeseries::{cumulative_integral, fit_spline};
use leadlag_core::{Association, PriorAdjacency, TimeGrid};
use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------- oracles

/// Risk estimate recomputed from scratch: OLS through the normal equations
/// (Cholesky), then `‖Y − Xβ*‖² + (2gp/(1+g) − n) σ̂²`.
struct SureOracle {
    x: DMatrix<f64>,
    y: DVector<f64>,
    beta_hat: DVector<f64>,
    sigma2: f64,
}

impl SureOracle {
    fn new(x: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        let xtx = x.transpose() * x;
        let beta_hat = xtx.cholesky().expect("full rank").solve(&(x.transpose() * y));
        let (n, p) = x.shape();
        let sigma2 = (y - x * &beta_hat).norm_squared() / (n - p) as f64;
        Self {
            x: x.clone(),
            y: y.clone(),
            beta_hat,
            sigma2,
        }
    }

    fn eval(&self, g: f64, beta0: &DVector<f64>) -> f64 {
        let (n, p) = self.x.shape();
        let beta = (beta0 + g * &self.beta_hat) / (1.0 + g);
        (&self.y - &self.x * beta).norm_squared() + (2.0 * g * p as f64 / (1.0 + g) - n as f64) * self.sigma2
    }
}

fn log_grid(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..m).map(|k| (a + (b - a) * k as f64 / (m - 1) as f64).exp()).collect()
}

fn argmin(v: &[f64]) -> usize {
    (1..v.len()).fold(0, |best, k| if v[k] < v[best] { k } else { best })
}

fn random_design(rng: &mut ChaCha8Rng, n: usize, p: usize, x_scale: f64, y_scale: f64) -> DesignPair {
    let x = DMatrix::from_fn(n, p, |_, c| if c == p - 1 { 1.0 } else { x_scale * rng.random_range(-1.0..1.0) });
    let beta = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0) * y_scale / x_scale.max(1.0));
    let noise = 10f64.powf(rng.random_range(-1.5..0.5)) * y_scale;
    let y = &x * beta + DVector::from_fn(n, |_, _| noise * rng.sample::<f64, _>(StandardNormal));
    let variant = if p == 5 { ModelVariant::Full } else { ModelVariant::Other };
    DesignPair::new(x, y, variant).unwrap()
}

fn binomials(max: usize) -> Vec<Vec<BigUint>> {
    let mut c = vec![vec![BigUint::zero(); max + 1]; max + 1];
    for n in 0..=max {
        c[n][0] = BigUint::one();
        for k in 1..=n {
            c[n][k] = &c[n - 1][k - 1] + &c[n - 1][k];
        }
    }
    c
}

/// Ward merge sequence by exhaustive search over all cluster pairs, using the
/// within-cluster error sum of squares written in terms of dissimilarities.
fn ward_oracle(dist: &[f64], n: usize) -> Vec<(BTreeSet<usize>, BTreeSet<usize>, f64)> {
    let ess = |c: &BTreeSet<usize>| {
        let mut s = 0.0;
        for &a in c {
            for &b in c {
                s += dist[a * n + b] * dist[a * n + b];
            }
        }
        s / (2.0 * c.len() as f64)
    };
    let mut clusters: Vec<BTreeSet<usize>> = (0..n).map(|i| BTreeSet::from([i])).collect();
    let mut out = Vec::new();
    while clusters.len() > 1 {
        clusters.sort_by_key(|c| *c.first().unwrap());
        let mut best = (0, 0, f64::INFINITY);
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let union = clusters[a].union(&clusters[b]).copied().collect();
                let delta = ess(&union) - ess(&clusters[a]) - ess(&clusters[b]);
                if delta < best.2 {
                    best = (a, b, delta);
                }
            }
        }
        let (a, b, delta) = best;
        let cb = clusters.remove(b);
        let ca = clusters[a].clone();
        clusters[a].extend(cb.iter().copied());
        out.push((ca, cb, 2.0 * delta));
    }
    out
}

/// Same, for points in the plane: ESS about the centroid.
fn ward_oracle_points(pts: &[[f64; 3]]) -> Vec<(BTreeSet<usize>, BTreeSet<usize>, f64)> {
    let ess = |c: &BTreeSet<usize>| {
        let m = c.len() as f64;
        let mut centroid = [0.0; 3];
        for &i in c {
            for d in 0..3 {
                centroid[d] += pts[i][d] / m;
            }
        }
        c.iter()
            .map(|&i| (0..3).map(|d| (pts[i][d] - centroid[d]).powi(2)).sum::<f64>())
            .sum::<f64>()
    };
    let mut clusters: Vec<BTreeSet<usize>> = (0..pts.len()).map(|i| BTreeSet::from([i])).collect();
    let mut out = Vec::new();
    while clusters.len() > 1 {
        clusters.sort_by_key(|c| *c.first().unwrap());
        let mut best = (0, 0, f64::INFINITY);
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let union = clusters[a].union(&clusters[b]).copied().collect();
                let delta = ess(&union) - ess(&clusters[a]) - ess(&clusters[b]);
                if delta < best.2 {
                    best = (a, b, delta);
                }
            }
        }
        let (a, b, delta) = best;
        let cb = clusters.remove(b);
        let ca = clusters[a].clone();
        clusters[a].extend(cb.iter().copied());
        out.push((ca, cb, 2.0 * delta));
    }
    out
}

fn leaves(d: &Dendrogram, node: usize) -> BTreeSet<usize> {
    let n = d.n_leaves();
    if node < n {
        return BTreeSet::from([node]);
    }
    let m = &d.merges[node - n];
    let mut s = leaves(d, m.left);
    s.extend(leaves(d, m.right));
    s
}

fn merges_match(dend: &Dendrogram, oracle: &[(BTreeSet<usize>, BTreeSet<usize>, f64)], tol: f64) -> bool {
    dend.merges.len() == oracle.len()
        && dend.merges.iter().zip(oracle).all(|(m, (a, b, h))| {
            let (l, r) = (leaves(dend, m.left), leaves(dend, m.right));
            ((l == *a && r == *b) || (l == *b && r == *a)) && (m.height - h).abs() <= tol * h.abs().max(1e-300)
        })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Linear interpolation between order statistics at rank (m − 1) q.
fn quantile(v: &mut [f64], q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

// --------------------------------------------------------------- criteria

fn c1_closed_form_shrinkage() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let grid = log_grid(1e-6, 1e6, 2000);
    let bounds = GBounds::default();
    let (mut checked, mut failed, mut sure_mismatch) = (0, 0, 0);
    for inst in 0..100 {
        let n = rng.random_range(8..=30);
        let p = if inst % 2 == 0 { 5 } else { 3 };
        let d = random_design(&mut rng, n, p, 1.0, 1.0);
        let beta0 = if rng.random_bool(0.5) {
            DVector::zeros(p)
        } else {
            DVector::from_fn(p, |k, _| if k < 2 { 1.0 } else { 0.0 })
        };
        let ols = ols_fit(&d);
        let gs = optimal_g(&d, &beta0, &ols, &bounds);
        let oracle = SureOracle::new(d.x(), d.y());
        for &g in &[1e-3, 1.0, 1e3] {
            let (a, b) = (sure(g, &d, &beta0, &ols), oracle.eval(g, &beta0));
            if (a - b).abs() > 1e-9 * (1.0 + b.abs()) {
                sure_mismatch += 1;
            }
        }
        if !(gs.unclamped > grid[0] && gs.unclamped < grid[grid.len() - 1]) {
            continue;
        }
        let values: Vec<f64> = grid.iter().map(|&g| oracle.eval(g, &beta0)).collect();
        let k = argmin(&values);
        let lo = grid[k.saturating_sub(1)];
        let hi = grid[(k + 1).min(grid.len() - 1)];
        checked += 1;
        if !(lo <= gs.g && gs.g <= hi) {
            failed += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        failed == 0 && sure_mismatch == 0 && checked > 0 && t < Duration::from_secs(10),
        format!("{checked} interior instances, {failed} off-grid, {sure_mismatch} risk mismatches, {t:.2?}"),
    )
}

fn c2_adaptive_prior() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let xi_grid: Vec<f64> = (0..200).map(|k| -3.0 + 6.0 * k as f64 / 199.0).collect();
    let xi_step = xi_grid[1] - xi_grid[0];
    let g_grid = log_grid(1e-4, 1e4, 200);
    let bounds = GBounds::default();
    let (mut checked, mut failed) = (0, 0);
    for _ in 0..100 {
        let n = rng.random_range(8..=30);
        let x = DMatrix::from_fn(n, 5, |_, c| if c == 4 { 1.0 } else { rng.random_range(-1.0..1.0) });
        let xi_true = rng.random_range(-2.0..2.0);
        let beta = DVector::from_fn(5, |k, _| if k < 2 { xi_true + rng.random_range(-0.5..0.5) } else { rng.random_range(-1.0..1.0) });
        let noise = 10f64.powf(rng.random_range(-1.0..0.3));
        let y = &x * beta + DVector::from_fn(n, |_, _| noise * rng.sample::<f64, _>(StandardNormal));
        let d = DesignPair::new(x, y, ModelVariant::Full).unwrap();
        let ols = ols_fit(&d);
        let (xi, gs) = optimal_g_xi(&d, &ols, &bounds).unwrap();
        if !(xi > xi_grid[0] && xi < xi_grid[199] && gs.unclamped > g_grid[0] && gs.unclamped < g_grid[199]) {
            continue;
        }
        let oracle = SureOracle::new(d.x(), d.y());
        let mut best = (0, 0, f64::INFINITY);
        for (a, &x) in xi_grid.iter().enumerate() {
            let beta0 = DVector::from_vec(vec![x, x, 0.0, 0.0, 0.0]);
            for (b, &g) in g_grid.iter().enumerate() {
                let v = oracle.eval(g, &beta0);
                if v < best.2 {
                    best = (a, b, v);
                }
            }
        }
        let (a, b, _) = best;
        checked += 1;
        let xi_ok = (xi_grid[a] - xi).abs() <= xi_step;
        let g_ok = g_grid[b.saturating_sub(1)] <= gs.g && gs.g <= g_grid[(b + 1).min(199)];
        if !(xi_ok && g_ok) {
            failed += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        failed == 0 && checked > 0 && t < Duration::from_secs(60),
        format!("{checked} interior instances, {failed} off-grid, {t:.2?}"),
    )
}

fn c3_sure_unbiased() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 10;
    let x = DMatrix::from_fn(n, 3, |_, c| if c == 2 { 1.0 } else { rng.random_range(-1.0..1.0) });
    let beta = DVector::from_vec(vec![0.8, -0.5, 0.3]);
    let mean = &x * &beta;
    let (sigma, g) = (0.6, 1.5);
    let beta0 = DVector::from_vec(vec![1.0, 1.0, 0.0]);
    let draws = 100_000;
    let mut diffs = Vec::with_capacity(draws);
    let (mut sum_d, mut sum_l) = (0.0, 0.0);
    for _ in 0..draws {
        let y = &mean + DVector::from_fn(n, |_, _| sigma * rng.sample::<f64, _>(StandardNormal));
        let d = DesignPair::new(x.clone(), y, ModelVariant::Other).unwrap();
        let ols = ols_fit(&d);
        let delta = sure(g, &d, &beta0, &ols);
        let fit = posterior(&d, &beta0, g, Hyperpriors::default()).unwrap();
        let loss = (&fit.fitted - &mean).norm_squared();
        sum_d += delta;
        sum_l += loss;
        diffs.push(delta - loss);
    }
    let m = draws as f64;
    let md = diffs.iter().sum::<f64>() / m;
    let se = (diffs.iter().map(|v| (v - md).powi(2)).sum::<f64>() / (m - 1.0)).sqrt() / m.sqrt();
    let gap = (sum_d / m - sum_l / m).abs();
    outcome(
        gap < 3.0 * se,
        format!("mean risk estimate {:.6}, mean loss {:.6}, |gap| = {:.2} SE", sum_d / m, sum_l / m, gap / se),
    )
}

fn c4_posterior_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_beta, mut worst_v) = (0.0f64, 0.0f64);
    let (mut r2_bad, mut a_bad) = (0, 0);
    for inst in 0..10_000 {
        let n = rng.random_range(7..=40);
        let p = if inst % 2 == 0 { 5 } else { 3 };
        let x_scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let y_scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let d = random_design(&mut rng, n, p, x_scale, y_scale);
        let beta0 = DVector::from_fn(p, |_, _| rng.random_range(-2.0..2.0));
        let g = 10f64.powf(rng.random_range(-6.0..6.0));
        let hyper = Hyperpriors {
            a: 10f64.powf(rng.random_range(-3.0..1.0)),
            b: 10f64.powf(rng.random_range(-3.0..1.0)),
        };
        let fit = posterior(&d, &beta0, g, hyper).unwrap();
        for k in 0..p {
            let rhs = (beta0[k] + g * fit.beta_ols[k]) / (1.0 + g);
            let scale = (beta0[k].abs() + g * fit.beta_ols[k].abs()) / (1.0 + g);
            worst_beta = worst_beta.max((fit.beta_star[k] - rhs).abs() / scale.max(1e-300));
        }
        // (XᵀX)⁻¹ = R⁻¹R⁻ᵀ from a Householder QR of X.
        let r_inv = d.x().clone().qr().r().try_inverse().expect("full rank");
        let xtx_inv = &r_inv * r_inv.transpose();
        let expected = xtx_inv * (g / (1.0 + g));
        let norm = expected.amax();
        worst_v = worst_v.max((&fit.v_star - &expected).amax() / norm);
        let r2 = bayesian_r2(&fit, d.y()).value;
        if !(0.0..=1.0).contains(&r2) {
            r2_bad += 1;
        }
        if fit.a_star != hyper.a + n as f64 / 2.0 {
            a_bad += 1;
        }
    }
    outcome(
        worst_beta <= 1e-10 && worst_v <= 1e-10 && r2_bad == 0 && a_bad == 0,
        format!(
            "10000 instances: max rel. error β* {worst_beta:.1e}, V* {worst_v:.1e}; R² outside [0,1]: {r2_bad}; a* mismatches: {a_bad}"
        ),
    )
}

fn c5_bayes_factor() -> Outcome {
    let zero = bayes_factor(0.0, 1.0, 17, 4).unwrap().value;
    let one = bayes_factor(1.0, 1.0, 17, 4).unwrap().value;
    let near = bayes_factor(1.0 - 1e-15, 1.0, 17, 4).unwrap().value;
    let pass = (zero - 0.25).abs() <= 1e-12 && (one - 64.0).abs() <= 1e-12 && (near - 64.0).abs() <= 1e-9;
    outcome(pass, format!("BF(0) = {zero}, BF(1) = {one}, BF(1 − 1e-15) = {near}"))
}

fn c6_spline_integrals() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for inst in 0..200 {
        let n = rng.random_range(4..=30);
        let mut t = rng.random_range(-5.0..5.0);
        let mut times = Vec::with_capacity(n);
        for _ in 0..n {
            times.push(t);
            t += rng.random_range(0.1..3.0);
        }
        let grid = TimeGrid::new(times.clone()).unwrap();
        let c: [f64; 4] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        let c = if inst % 2 == 0 { [c[0], c[1], 0.0, 0.0] } else { c };
        let poly = |t: f64| c[0] + c[1] * t + c[2] * t * t + c[3] * t * t * t;
        let anti = |t: f64| c[0] * t + c[1] * t * t / 2.0 + c[2] * t.powi(3) / 3.0 + c[3] * t.powi(4) / 4.0;
        let values: Vec<f64> = times.iter().map(|&t| poly(t)).collect();
        let integral = cumulative_integral(&fit_spline(&values, &grid).unwrap());
        let exact: Vec<f64> = times.iter().map(|&t| anti(t) - anti(times[0])).collect();
        let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, e) in integral.iter().zip(&exact) {
            worst = worst.max((a - e).abs() / scale);
        }
    }
    outcome(worst <= 1e-9, format!("200 linear/cubic series, max error relative to the integral's range {worst:.1e}"))
}

fn c7_ward() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut ok_general, mut ok_points) = (0, 0);
    for _ in 0..50 {
        let n = rng.random_range(2..=8);
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = rng.random_range(0.0..1.0);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        let ids: Vec<String> = (0..n).map(|i| format!("g{i}")).collect();
        let dend = ward_from_distances(ids, &d, WardConvention::Squared).unwrap();
        if merges_match(&dend, &ward_oracle(&d, n), 1e-12) {
            ok_general += 1;
        }
    }
    for _ in 0..50 {
        let n = rng.random_range(2..=8);
        let pts: Vec<[f64; 3]> = (0..n).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = (0..3).map(|k| (pts[i][k] - pts[j][k]).powi(2)).sum::<f64>().sqrt();
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                d[j * n + i] = d[i * n + j];
            }
        }
        let ids: Vec<String> = (0..n).map(|i| format!("g{i}")).collect();
        let dend = ward_from_distances(ids, &d, WardConvention::Squared).unwrap();
        if merges_match(&dend, &ward_oracle_points(&pts), 1e-10) {
            ok_points += 1;
        }
    }
    outcome(
        ok_general == 50 && ok_points == 50,
        format!("{ok_general}/50 random dissimilarity matrices, {ok_points}/50 point clouds match the exhaustive search"),
    )
}

fn c8_enrichment() -> Outcome {
    let c = binomials(50);
    let mut worst = 0.0f64;
    let mut count = 0usize;
    for big_n in 1..=50usize {
        let total = &c[big_n];
        for big_k in 0..=big_n {
            for n in 0..=big_n {
                let lo = (n + big_k).saturating_sub(big_n);
                let hi = big_k.min(n);
                let denom = total[n].to_f64().unwrap();
                let mut tail = BigUint::zero();
                for k in (0..=hi + 1).rev() {
                    if k <= hi && k >= lo {
                        tail += &c[big_k][k] * &c[big_n - big_k][n - k];
                    }
                    let exact = if k <= lo { 1.0 } else { tail.to_f64().unwrap() / denom };
                    let got = hypergeom_upper_tail(k as u64, big_n as u64, big_k as u64, n as u64).unwrap();
                    let err = if exact == 0.0 { got.abs() } else { (got - exact).abs() / exact };
                    worst = worst.max(err);
                    count += 1;
                }
            }
        }
    }
    let q = bh_adjust(&[0.01, 0.02, 0.04]).unwrap();
    let bh_ok = q.iter().zip([0.03, 0.03, 0.04]).all(|(a, b)| (a - b).abs() <= 1e-15);
    outcome(
        worst <= 1e-12 && bh_ok,
        format!("{count} tail probabilities, max rel. error {worst:.1e}; BH {q:?}"),
    )
}

fn pair_lookup(pairs: &[PairMetrics]) -> HashMap<(usize, usize), &PairMetrics> {
    pairs.iter().map(|p| ((p.i, p.j), p)).collect()
}

fn c9_recovery() -> Outcome {
    let start = Instant::now();
    let grid = TimeGrid::new((0..17).map(|k| k as f64 * 0.5).collect()).unwrap();
    let random = RandomCohort {
        groups: 20,
        group_size: 2,
        independent_pairs: 20,
        noise_sd: 0.1,
    };
    let config = PairwiseConfig::default();
    let (mut wins_a, mut wins_b) = (0, 0);
    for cohort in 0..50u64 {
        let spec = random.generate(grid.clone(), 9000 + cohort).unwrap();
        let (matrix, _) = simulate_cohort(&spec).unwrap();
        let co: Vec<(usize, usize)> = (0..20).map(|g| (2 * g, 2 * g + 1)).collect();
        let ind: Vec<(usize, usize)> = (0..20).map(|p| (40 + 2 * p, 41 + 2 * p)).collect();

        let sweep = compute_all(&matrix, None, &config).unwrap();
        let look = pair_lookup(&sweep.pairs);
        let mut co_vals: Vec<f64> = co.iter().map(|k| look[k].llr2_sym()).collect();
        let mut ind_vals: Vec<f64> = ind.iter().map(|k| look[k].llr2_sym()).collect();
        if median(&mut co_vals) > median(&mut ind_vals) {
            wins_a += 1;
        }

        let mut prior = PriorAdjacency::unknown(matrix.gene_ids().to_vec());
        for &(i, j) in &ind {
            prior.set(i, j, Association::Unlikely);
        }
        let sweep = compute_all(&matrix, Some(&prior), &config).unwrap();
        let look = pair_lookup(&sweep.pairs);
        let mut bayes: Vec<f64> = ind.iter().map(|k| look[k].llr2_sym()).collect();
        let mut classic: Vec<f64> = ind.iter().map(|k| look[k].ols_r2_sym()).collect();
        if quantile(&mut bayes, 0.95) < quantile(&mut classic, 0.95) {
            wins_b += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        wins_a >= 48 && wins_b >= 48 && t < Duration::from_secs(300),
        format!("(a) {wins_a}/50 cohorts, (b) {wins_b}/50 cohorts, {t:.2?}"),
    )
}

fn leadlag(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_leadlag"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn c10_performance() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let grid = TimeGrid::new((0..17).map(|k| k as f64 * 0.5).collect()).unwrap();
    let random = RandomCohort {
        groups: 100,
        group_size: 6,
        independent_pairs: 200,
        noise_sd: 0.1,
    };
    let (matrix, truth) = simulate_cohort(&random.generate(grid, 10).unwrap()).unwrap();
    matrix.save(&dir.path().join("expression.csv")).unwrap();
    // Half of the true pairs are known, which exercises every prior branch.
    let mut prior = PriorAdjacency::unknown(matrix.gene_ids().to_vec());
    for i in 0..matrix.n_genes() {
        for j in (i + 1)..matrix.n_genes() {
            if (i + j) % 2 == 0 {
                prior.set(i, j, truth.get(i, j));
            }
        }
    }
    prior.save(&dir.path().join("prior_in.csv")).unwrap();

    let run = |workers: &str, out: &str| {
        let start = Instant::now();
        let o = leadlag(
            &[
                "compute",
                "--paths.expression",
                "expression.csv",
                "--paths.prior",
                "prior_in.csv",
                "--paths.output",
                out,
                "--workers",
                workers,
            ],
            dir.path(),
        );
        (o.status.success(), start.elapsed())
    };
    let (ok8, t8) = run("8", "w8");
    let (ok3, t3) = run("3", "w3");
    let read = |out: &str, f: &str| fs::read(dir.path().join(out).join(f)).unwrap_or_default();
    let rows = read("w8", "pair_metrics.tsv").iter().filter(|&&b| b == b'\n').count().saturating_sub(1);
    let identical = read("w8", "pair_metrics.tsv") == read("w3", "pair_metrics.tsv")
        && read("w8", "similarity.csv") == read("w3", "similarity.csv");
    outcome(
        ok8 && ok3 && rows == 499_500 && identical && t8 < Duration::from_secs(300),
        format!(
            "N = 1000, {rows} pair rows; 8 workers {t8:.2?}, 3 workers {t3:.2?}; outputs identical: {identical} ({} cores available)",
            std::thread::available_parallelism().map_or(1, |n| n.get())
        ),
    )
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let p = dir.path();
    fs::write(
        p.join("cohort.kv"),
        "seed = 21\ngrid.points = 13\nrandom.groups = 5\nrandom.group_size = 4\nrandom.independent_pairs = 5\nrandom.noise_sd = 0.15\n",
    )
    .unwrap();
    let mut scores = String::from("gene_a,gene_b,score\n");
    let mut terms = String::from("term\tgene\n");
    for g in 0..5 {
        scores.push_str(&format!("s{g}_0,s{g}_1,0.9\ns{g}_2,s{g}_3,NA\n"));
        for m in 0..4 {
            terms.push_str(&format!("T{g}\ts{g}_{m}\n"));
        }
    }
    scores.push_str("i0a,i0b,0.1\n");
    fs::write(p.join("scores.csv"), scores).unwrap();
    fs::write(p.join("terms.tsv"), terms).unwrap();
    fs::write(
        p.join("run.kv"),
        "paths.cohort = cohort.kv\npaths.scores = scores.csv\npaths.annotations = terms.tsv\ncut.k = 5\nnetwork.seeds = s0_0\nmodel.adaptive_xi = true\n",
    )
    .unwrap();
    let a = leadlag(&["run", "--config", "run.kv", "--paths.output", "a"], p);
    let b = leadlag(&["run", "--config", "run.kv", "--paths.output", "b", "--workers", "2"], p);
    if !(a.status.success() && b.status.success()) {
        return outcome(false, format!("pipeline failed: {}", String::from_utf8_lossy(&a.stderr)));
    }
    let mut names: Vec<String> = fs::read_dir(p.join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let differing: Vec<&String> = names
        .iter()
        .filter(|n| fs::read(p.join("a").join(n)).ok() != fs::read(p.join("b").join(n)).ok())
        .collect();
    outcome(
        differing.is_empty() && names.len() >= 12,
        format!("{} files compared ({}), differing: {differing:?}", names.len(), names.join(" ")),
    )
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("closed-form shrinkage vs grid search", c1_closed_form_shrinkage),
        ("adaptive prior mean vs 2-D grid search", c2_adaptive_prior),
        ("risk estimate unbiasedness", c3_sure_unbiased),
        ("posterior identities", c4_posterior_identities),
        ("Bayes factor spot values", c5_bayes_factor),
        ("spline integral oracle", c6_spline_integrals),
        ("Ward merge oracle", c7_ward),
        ("hypergeometric and BH oracle", c8_enrichment),
        ("recovery on synthetic cohorts", c9_recovery),
        ("performance anchor and worker invariance", c10_performance),
        ("end-to-end determinism", c11_determinism),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.contains(&(k + 1)) {
            continue;
        }
        let o = f();
        if !o.pass {
            failures += 1;
        }
        println!("{} {:>2}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, k + 1, o.detail);
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
