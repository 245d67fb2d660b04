//! Synthetic cohorts from the coupled linear ODEs
//!
//! ```text
//! dm/dt = α p(t) + β − κ m
//! ```
//!
//! integrated with fixed-step RK4. Genes sharing a regulatory signal `p(t)`
//! form a group; measurement noise is added to the samples afterwards.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kv::{split_list, KeyValues};
use crate::prior::{Association, PriorAdjacency};
use crate::timeseries::{ExpressionMatrix, TimeGrid};

/// Substeps per grid span used unless configured otherwise.
pub const DEFAULT_SUBSTEPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneDynamics {
    /// Response to the regulatory signal.
    pub alpha: f64,
    /// Constant drift.
    pub beta: f64,
    /// Decay rate, ≥ 0.
    pub kappa: f64,
    /// Standard deviation of the additive measurement noise.
    pub noise_sd: f64,
    /// `m(t₁)`.
    pub initial: f64,
}

impl Default for GeneDynamics {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.0,
            kappa: 0.5,
            noise_sd: 0.0,
            initial: 0.0,
        }
    }
}

impl GeneDynamics {
    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.beta, self.kappa, self.noise_sd, self.initial];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gene dynamics {self:?}")));
        }
        if self.kappa < 0.0 || self.noise_sd < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "kappa and noise_sd must be non-negative, got {} and {}",
                self.kappa, self.noise_sd
            )));
        }
        Ok(())
    }
}

/// Regulatory signal `p(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalSpec {
    /// Zero before `onset`, then `height · e^(−decay (t − onset))`.
    Pulse { height: f64, onset: f64, decay: f64 },
    /// `amplitude · sin(2π t / period + phase)`.
    Sinusoid { amplitude: f64, period: f64, phase: f64 },
    /// Linear between `(t, value)` knots, flat outside them.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
    /// `p ≡ 0`.
    Zero,
}

impl SignalSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Self::Pulse { height, onset, decay } => [height, onset, decay].iter().all(|v| v.is_finite()) && *decay >= 0.0,
            Self::Sinusoid {
                amplitude,
                period,
                phase,
            } => [amplitude, period, phase].iter().all(|v| v.is_finite()) && *period > 0.0,
            Self::PiecewiseLinear { knots } => {
                !knots.is_empty()
                    && knots.iter().all(|(t, v)| t.is_finite() && v.is_finite())
                    && knots.windows(2).all(|w| w[1].0 > w[0].0)
            }
            Self::Zero => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid signal {self:?}")))
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Pulse { height, onset, decay } => {
                if t < *onset {
                    0.0
                } else {
                    height * (-decay * (t - onset)).exp()
                }
            }
            Self::Sinusoid {
                amplitude,
                period,
                phase,
            } => amplitude * (2.0 * PI * t / period + phase).sin(),
            Self::PiecewiseLinear { knots } => {
                let first = knots[0];
                let last = knots[knots.len() - 1];
                if t <= first.0 {
                    return first.1;
                }
                if t >= last.0 {
                    return last.1;
                }
                let k = knots.partition_point(|(kt, _)| *kt <= t) - 1;
                let (t0, v0) = knots[k];
                let (t1, v1) = knots[k + 1];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
            Self::Zero => 0.0,
        }
    }
}

impl FromStr for SignalSpec {
    type Err = Error;

    /// `pulse(height, onset, decay)`, `sinusoid(amplitude, period, phase)`,
    /// `linear(t:v, t:v, …)` or `zero`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "zero" {
            return Ok(Self::Zero);
        }
        let bad = || Error::InvalidArgument(format!("cannot parse signal `{s}`"));
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let args = rest.strip_suffix(')').ok_or_else(bad)?;
        let parts: Vec<&str> = args.split(',').map(str::trim).filter(|a| !a.is_empty()).collect();
        let nums = || -> Result<Vec<f64>> { parts.iter().map(|p| p.parse::<f64>().map_err(|_| bad())).collect() };
        let spec = match name.trim() {
            "pulse" => match nums()?.as_slice() {
                &[height, onset, decay] => Self::Pulse { height, onset, decay },
                _ => return Err(bad()),
            },
            "sinusoid" => match nums()?.as_slice() {
                &[amplitude, period, phase] => Self::Sinusoid {
                    amplitude,
                    period,
                    phase,
                },
                _ => return Err(bad()),
            },
            "linear" => {
                let knots = parts
                    .iter()
                    .map(|p| {
                        let (t, v) = p.split_once(':').ok_or_else(bad)?;
                        Ok((t.trim().parse().map_err(|_| bad())?, v.trim().parse().map_err(|_| bad())?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::PiecewiseLinear { knots }
            }
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Noise-free trajectory of one gene at the grid times. Each grid interval is
/// split into equal RK4 substeps no longer than `span / substeps`.
pub fn integrate(dynamics: &GeneDynamics, signal: &SignalSpec, grid: &TimeGrid, substeps: usize) -> Vec<f64> {
    let h_max = grid.span() / substeps.max(1) as f64;
    let f = |t: f64, m: f64| dynamics.alpha * signal.eval(t) + dynamics.beta - dynamics.kappa * m;
    let times = grid.times();
    let mut out = Vec::with_capacity(times.len());
    let mut m = dynamics.initial;
    out.push(m);
    for w in times.windows(2) {
        let steps = ((w[1] - w[0]) / h_max).ceil().max(1.0) as usize;
        let h = (w[1] - w[0]) / steps as f64;
        for s in 0..steps {
            let t = w[0] + s as f64 * h;
            let k1 = f(t, m);
            let k2 = f(t + h / 2.0, m + h / 2.0 * k1);
            let k3 = f(t + h / 2.0, m + h / 2.0 * k2);
            let k4 = f(t + h, m + h * k3);
            m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        out.push(m);
    }
    out
}

/// Integrates one gene and adds `N(0, noise_sd²)` to each sample.
pub fn simulate_gene(dynamics: &GeneDynamics, signal: &SignalSpec, grid: &TimeGrid, seed: u64) -> Result<Vec<f64>> {
    simulate_gene_with(dynamics, signal, grid, seed, DEFAULT_SUBSTEPS)
}

pub fn simulate_gene_with(
    dynamics: &GeneDynamics,
    signal: &SignalSpec,
    grid: &TimeGrid,
    seed: u64,
    substeps: usize,
) -> Result<Vec<f64>> {
    dynamics.validate()?;
    signal.validate()?;
    let mut v = integrate(dynamics, signal, grid, substeps);
    if dynamics.noise_sd > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, dynamics.noise_sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for x in &mut v {
            *x += normal.sample(&mut rng);
        }
    }
    Ok(v)
}

/// SplitMix64 finalizer applied to `seed` and the gene index, so each gene's
/// noise stream is independent of evaluation order.
pub fn gene_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul((index as u64).wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimGene {
    pub name: String,
    pub dynamics: GeneDynamics,
}

/// Genes driven by one shared signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalGroup {
    pub name: String,
    pub signal: SignalSpec,
    pub genes: Vec<SimGene>,
}

/// A gene with its own private signal.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentGene {
    pub gene: SimGene,
    pub signal: SignalSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortSpec {
    pub grid: TimeGrid,
    pub groups: Vec<SignalGroup>,
    pub independent: Vec<IndependentGene>,
    pub seed: u64,
    pub substeps: usize,
}

impl CohortSpec {
    /// Gene names in output order: groups first, then independent genes.
    pub fn gene_names(&self) -> Vec<String> {
        self.groups
            .iter()
            .flat_map(|g| g.genes.iter().map(|s| s.name.clone()))
            .chain(self.independent.iter().map(|i| i.gene.name.clone()))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for name in self.gene_names() {
            if !seen.insert(name.clone()) {
                return Err(Error::InvalidArgument(format!("duplicate gene name `{name}`")));
            }
        }
        if seen.len() < 2 {
            return Err(Error::InvalidArgument("a cohort needs at least 2 genes".into()));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidArgument("substeps must be positive".into()));
        }
        for g in &self.groups {
            g.signal.validate()?;
            for s in &g.genes {
                s.dynamics.validate()?;
            }
        }
        for i in &self.independent {
            i.signal.validate()?;
            i.gene.dynamics.validate()?;
        }
        Ok(())
    }

    /// Reads a cohort from key-value text:
    ///
    /// ```text
    /// seed = 7
    /// grid = 0, 0.5, 1, 1.5, 2        # or grid.start / grid.end / grid.points
    /// substeps = 1000
    /// group.<g>.signal = sinusoid(1.0, 6.0, 0.0)
    /// group.<g>.genes = a, b
    /// independent.genes = x
    /// gene.<name>.signal = pulse(1.0, 2.0, 0.5)   # independent genes only
    /// gene.<name>.alpha = 1.5                     # also beta, kappa, noise_sd, initial
    /// defaults.noise_sd = 0.1                     # same fields, for every gene
    /// random.groups = 3                           # generated genes, see RandomCohort
    /// ```
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        const FIELDS: [&str; 5] = ["alpha", "beta", "kappa", "noise_sd", "initial"];
        const RANDOM: [&str; 5] = ["groups", "group_size", "independent_pairs", "noise_sd", "span"];
        for key in kv.keys() {
            let parts: Vec<&str> = key.split('.').collect();
            let known = match parts.as_slice() {
                ["seed"] | ["grid"] | ["substeps"] => true,
                ["grid", "start" | "end" | "points"] => true,
                ["group", _, "signal" | "genes"] => true,
                ["independent", "genes"] => true,
                ["gene", _, "signal"] => true,
                ["gene", _, f] | ["defaults", f] => FIELDS.contains(f),
                ["random", f] => RANDOM.contains(f),
                _ => false,
            };
            if !known {
                return Err(kv.error(key, "unknown cohort key"));
            }
        }

        let seed = kv.parsed_or("seed", 0u64)?;
        let substeps = kv.parsed_or("substeps", DEFAULT_SUBSTEPS)?;
        let grid = if let Some(list) = kv.get("grid") {
            let times = split_list(list)
                .iter()
                .map(|t| t.parse::<f64>().map_err(|_| kv.error("grid", format!("bad time `{t}`"))))
                .collect::<Result<Vec<_>>>()?;
            TimeGrid::new(times).map_err(|e| kv.error("grid", e))?
        } else {
            let start = kv.parsed_or("grid.start", 0.0)?;
            let end = kv.parsed_or("grid.end", 8.0)?;
            let points: usize = kv.parsed_or("grid.points", 17)?;
            if points < 2 {
                return Err(kv.error("grid.points", "need at least 2 points"));
            }
            let times = (0..points)
                .map(|k| start + (end - start) * k as f64 / (points - 1) as f64)
                .collect();
            TimeGrid::new(times).map_err(|e| kv.error("grid.points", e))?
        };

        let mut defaults = GeneDynamics::default();
        let mut overrides: BTreeMap<String, GeneDynamics> = BTreeMap::new();
        let set_field = |d: &mut GeneDynamics, key: &str, field: &str| -> Result<()> {
            let v: f64 = kv.parsed(key)?.expect("key present");
            match field {
                "alpha" => d.alpha = v,
                "beta" => d.beta = v,
                "kappa" => d.kappa = v,
                "noise_sd" => d.noise_sd = v,
                _ => d.initial = v,
            }
            Ok(())
        };
        for f in FIELDS {
            let key = format!("defaults.{f}");
            if kv.get(&key).is_some() {
                set_field(&mut defaults, &key, f)?;
            }
        }
        let signal_of = |key: &str| -> Result<SignalSpec> {
            kv.get(key)
                .expect("key present")
                .parse()
                .map_err(|e: Error| kv.error(key, e))
        };
        let dynamics_of = |name: &str, overrides: &mut BTreeMap<String, GeneDynamics>| -> Result<GeneDynamics> {
            let mut d = defaults;
            for f in FIELDS {
                let key = format!("gene.{name}.{f}");
                if kv.get(&key).is_some() {
                    let v: f64 = kv.parsed(&key)?.expect("key present");
                    match f {
                        "alpha" => d.alpha = v,
                        "beta" => d.beta = v,
                        "kappa" => d.kappa = v,
                        "noise_sd" => d.noise_sd = v,
                        _ => d.initial = v,
                    }
                }
            }
            d.validate().map_err(|e| kv.error(&format!("gene.{name}"), e))?;
            overrides.insert(name.to_string(), d);
            Ok(d)
        };

        let group_names: Vec<String> = kv
            .keys()
            .filter_map(|k| k.strip_prefix("group.").and_then(|r| r.split_once('.')).map(|(g, _)| g.to_string()))
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut groups = Vec::new();
        for g in group_names {
            let sig_key = format!("group.{g}.signal");
            let genes_key = format!("group.{g}.genes");
            if kv.get(&sig_key).is_none() {
                return Err(kv.error(&genes_key, format!("group `{g}` has no `{sig_key}`")));
            }
            let names = kv
                .list(&genes_key)
                .ok_or_else(|| kv.error(&sig_key, format!("group `{g}` has no `{genes_key}`")))?;
            let genes = names
                .iter()
                .map(|n| {
                    Ok(SimGene {
                        name: n.clone(),
                        dynamics: dynamics_of(n, &mut overrides)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            groups.push(SignalGroup {
                name: g,
                signal: signal_of(&sig_key)?,
                genes,
            });
        }
        let mut independent = Vec::new();
        for n in kv.list("independent.genes").unwrap_or_default() {
            let sig_key = format!("gene.{n}.signal");
            let signal = if kv.get(&sig_key).is_some() {
                signal_of(&sig_key)?
            } else {
                SignalSpec::Zero
            };
            independent.push(IndependentGene {
                gene: SimGene {
                    name: n.clone(),
                    dynamics: dynamics_of(&n, &mut overrides)?,
                },
                signal,
            });
        }
        for key in kv.keys() {
            if let Some(name) = key.strip_prefix("gene.").and_then(|r| r.rsplit_once('.')).map(|(n, _)| n) {
                if !overrides.contains_key(name) {
                    return Err(kv.error(key, format!("gene `{name}` is not listed in any group")));
                }
            }
            if key.starts_with("gene.") && key.ends_with(".signal") {
                let name = &key["gene.".len()..key.len() - ".signal".len()];
                if !independent.iter().any(|i| i.gene.name == name) {
                    return Err(kv.error(key, "only independent genes take a private signal"));
                }
            }
        }

        let mut spec = Self {
            grid,
            groups,
            independent,
            seed,
            substeps,
        };
        if kv.keys().any(|k| k.starts_with("random.")) {
            let random = RandomCohort {
                groups: kv.parsed_or("random.groups", 0)?,
                group_size: kv.parsed_or("random.group_size", 2)?,
                independent_pairs: kv.parsed_or("random.independent_pairs", 0)?,
                noise_sd: kv.parsed_or("random.noise_sd", defaults.noise_sd)?,
            };
            let extra = random.generate(spec.grid.clone(), seed)?;
            spec.groups.extend(extra.groups);
            spec.independent.extend(extra.independent);
        }
        spec.validate().map_err(|e| Error::InvalidArgument(format!("{}: {e}", kv.origin().display())))?;
        Ok(spec)
    }
}

/// Generator for benchmark cohorts: `groups` shared-signal groups of
/// `group_size` genes, plus `independent_pairs` pairs of genes with private
/// signals and a drift in the same direction. Apart from the signal sharing,
/// both kinds of gene draw their rates from the same ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomCohort {
    pub groups: usize,
    pub group_size: usize,
    pub independent_pairs: usize,
    pub noise_sd: f64,
}

fn random_signal(rng: &mut ChaCha8Rng, t0: f64, span: f64) -> SignalSpec {
    if rng.random_bool(0.5) {
        SignalSpec::Sinusoid {
            amplitude: rng.random_range(1.0..2.0),
            period: span * rng.random_range(0.4..1.2),
            phase: rng.random_range(0.0..2.0 * PI),
        }
    } else {
        SignalSpec::Pulse {
            height: rng.random_range(2.0..4.0),
            onset: t0 + span * rng.random_range(0.1..0.5),
            decay: rng.random_range(0.3..1.5) / span * 4.0,
        }
    }
}

impl RandomCohort {
    /// Names are `s<group>_<member>` for grouped genes and `i<pair>a` /
    /// `i<pair>b` for independent ones.
    pub fn generate(&self, grid: TimeGrid, seed: u64) -> Result<CohortSpec> {
        let mut rng = ChaCha8Rng::seed_from_u64(gene_seed(seed, usize::MAX));
        let (t0, span) = (grid.start(), grid.span());
        let mut groups = Vec::with_capacity(self.groups);
        for g in 0..self.groups {
            let signal = random_signal(&mut rng, t0, span);
            let genes = (0..self.group_size)
                .map(|m| SimGene {
                    name: format!("s{g}_{m}"),
                    dynamics: GeneDynamics {
                        alpha: rng.random_range(0.6..1.6) * if rng.random_bool(0.25) { -1.0 } else { 1.0 },
                        beta: rng.random_range(-0.2..0.2),
                        kappa: rng.random_range(0.2..1.0),
                        noise_sd: self.noise_sd,
                        initial: rng.random_range(-0.5..0.5),
                    },
                })
                .collect();
            groups.push(SignalGroup {
                name: format!("s{g}"),
                signal,
                genes,
            });
        }
        let mut independent = Vec::with_capacity(2 * self.independent_pairs);
        for p in 0..self.independent_pairs {
            let drift = rng.random_range(0.1..0.3) * if rng.random_bool(0.5) { -1.0 } else { 1.0 };
            for side in ["a", "b"] {
                let signal = random_signal(&mut rng, t0, span);
                independent.push(IndependentGene {
                    gene: SimGene {
                        name: format!("i{p}{side}"),
                        dynamics: GeneDynamics {
                            alpha: rng.random_range(0.6..1.6),
                            beta: drift * rng.random_range(0.8..1.2),
                            kappa: rng.random_range(0.2..1.0),
                            noise_sd: self.noise_sd,
                            initial: rng.random_range(-0.5..0.5),
                        },
                    },
                    signal,
                });
            }
        }
        Ok(CohortSpec {
            grid,
            groups,
            independent,
            seed,
            substeps: DEFAULT_SUBSTEPS,
        })
    }
}

/// Simulates every gene and returns the expression matrix with the true
/// association matrix (associated within a group, unlikely otherwise).
pub fn simulate_cohort(spec: &CohortSpec) -> Result<(ExpressionMatrix, PriorAdjacency)> {
    spec.validate()?;
    let jobs: Vec<(&GeneDynamics, &SignalSpec)> = spec
        .groups
        .iter()
        .flat_map(|g| g.genes.iter().map(move |s| (&s.dynamics, &g.signal)))
        .chain(spec.independent.iter().map(|i| (&i.gene.dynamics, &i.signal)))
        .collect();
    let rows = jobs
        .par_iter()
        .enumerate()
        .map(|(k, (d, s))| simulate_gene_with(d, s, &spec.grid, gene_seed(spec.seed, k), spec.substeps))
        .collect::<Result<Vec<_>>>()?;
    let names = spec.gene_names();
    let matrix = ExpressionMatrix::from_rows(names.clone(), &rows, spec.grid.clone())?;

    let mut truth = PriorAdjacency::filled(names, Association::Unlikely);
    let mut offset = 0;
    for g in &spec.groups {
        for a in 0..g.genes.len() {
            for b in (a + 1)..g.genes.len() {
                truth.set(offset + a, offset + b, Association::Associated);
            }
        }
        offset += g.genes.len();
    }
    Ok((matrix, truth))
}
