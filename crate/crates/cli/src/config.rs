use std::path::{Path, PathBuf};

use leadlag_core::cluster::{CutMode, WardConvention};
use leadlag_core::kv::KeyValues;
use leadlag_core::pairwise::PairwiseConfig;
use leadlag_core::prior::PriorThresholds;
use leadlag_core::regress::{GBounds, Hyperpriors};

use crate::CliError;

pub struct KeySpec {
    pub key: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn key(key: &'static str, default: Option<&'static str>, help: &'static str) -> KeySpec {
    KeySpec { key, default, help }
}

/// Every run-config key. Each one is also a `--<key>` flag.
pub const KEYS: &[KeySpec] = &[
    key("paths.output", Some("out"), "directory for all generated files"),
    key("paths.cohort", None, "cohort spec for `simulate`"),
    key("paths.expression", None, "expression CSV (defaults to <output>/expression.csv)"),
    key("paths.prior", None, "dense prior CSV with cells 1/0/NA"),
    key("paths.scores", None, "association score CSV gene_a,gene_b,score"),
    key("paths.database", None, "genes covered by the score source, one per line"),
    key("paths.replicate_corr", None, "dense replicate-correlation CSV"),
    key("paths.annotations", None, "term/gene annotation table for `enrich`"),
    key("threshold.score", Some("0.5"), "scores above this make a pair associated"),
    key("threshold.corr", Some("0.8"), "replicate correlation above this makes an unscored pair associated"),
    key("threshold.network", Some("0.9"), "similarity above this becomes an edge"),
    key("threshold.alpha", Some("0.05"), "adjusted p-value cutoff for enrichment"),
    key("threshold.fold_change", Some("2.0"), "minimum peak |value| kept by the fold-change filter"),
    key("filter.fold_change", Some("false"), "apply the fold-change filter before `compute`"),
    key("cut.mode", Some("k"), "`k` (cluster count) or `height`"),
    key("cut.k", Some("12"), "number of clusters when cut.mode = k"),
    key("cut.height", None, "merge height cutoff when cut.mode = height"),
    key("ward.convention", Some("squared"), "`squared` or `unsquared` dissimilarities"),
    key("hyper.a", Some("0.001"), "inverse-gamma shape hyperprior"),
    key("hyper.b", Some("0.001"), "inverse-gamma scale hyperprior"),
    key("g.floor", Some("1e-6"), "lower clamp for the shrinkage factor g"),
    key("g.cap", Some("1e12"), "upper clamp for the shrinkage factor g"),
    key("model.adaptive_xi", Some("false"), "fit the prior-mean scale for associated pairs"),
    key("model.p_cov", Some("4"), "covariate count in the Bayes factor"),
    key("network.dot", Some("true"), "also write network.dot"),
    key("network.seeds", None, "genes whose neighbourhood is written to neighborhood.tsv"),
    key("seed", None, "overrides the cohort seed"),
    key("workers", Some("auto"), "worker threads for `compute` (auto = all cores)"),
];

pub fn spec(key: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.key == key)
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub output: PathBuf,
    pub cohort: Option<PathBuf>,
    pub expression: PathBuf,
    pub prior: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub database: Option<PathBuf>,
    pub replicate_corr: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub prior_thresholds: PriorThresholds,
    pub network_threshold: f64,
    pub alpha: f64,
    pub fold_change: Option<f64>,
    pub cut: CutMode,
    pub ward: WardConvention,
    pub pairwise: PairwiseConfig,
    pub dot: bool,
    pub seeds: Vec<String>,
    pub seed: Option<u64>,
}

fn value<T: std::str::FromStr>(kv: &KeyValues, key: &str) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    let raw = kv.get(key).or_else(|| spec(key).and_then(|s| s.default));
    match raw {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|e| CliError::Usage(kv.error(key, format!("cannot parse `{v}`: {e}")).to_string())),
    }
}

fn required<T: std::str::FromStr>(kv: &KeyValues, key: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value(kv, key)?.ok_or_else(|| CliError::Usage(format!("`{key}` is required")))
}

fn in_unit(kv: &KeyValues, key: &str) -> Result<f64, CliError> {
    let v: f64 = required(kv, key)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(CliError::Usage(kv.error(key, format!("must lie in (0, 1), got {v}")).to_string()))
    }
}

impl RunConfig {
    pub fn from_kv(kv: &KeyValues) -> Result<Self, CliError> {
        if let Some(k) = kv.keys().find(|k| spec(k).is_none()) {
            return Err(CliError::Usage(kv.error(k, "unknown config key").to_string()));
        }
        let output: PathBuf = required(kv, "paths.output")?;
        let expression = value(kv, "paths.expression")?.unwrap_or_else(|| output.join("expression.csv"));

        let fold_change = required::<f64>(kv, "threshold.fold_change")?;
        if !(fold_change > 0.0 && fold_change.is_finite()) {
            return Err(CliError::Usage(
                kv.error("threshold.fold_change", "must be positive").to_string(),
            ));
        }
        let cut = match required::<String>(kv, "cut.mode")?.as_str() {
            "k" => {
                let k: usize = required(kv, "cut.k")?;
                if k == 0 {
                    return Err(CliError::Usage(kv.error("cut.k", "must be at least 1").to_string()));
                }
                CutMode::Clusters(k)
            }
            "height" => {
                let h: f64 = value(kv, "cut.height")?
                    .ok_or_else(|| CliError::Usage("`cut.height` is required when cut.mode = height".into()))?;
                if !h.is_finite() {
                    return Err(CliError::Usage(kv.error("cut.height", "must be finite").to_string()));
                }
                CutMode::Height(h)
            }
            other => {
                return Err(CliError::Usage(
                    kv.error("cut.mode", format!("expected `k` or `height`, got `{other}`")).to_string(),
                ))
            }
        };

        let workers = match required::<String>(kv, "workers")?.as_str() {
            "auto" => 0,
            w => match w.parse::<usize>() {
                Ok(n) if n >= 1 => n,
                _ => {
                    return Err(CliError::Usage(
                        kv.error("workers", format!("expected `auto` or a count ≥ 1, got `{w}`")).to_string(),
                    ))
                }
            },
        };
        let pairwise = PairwiseConfig {
            hyper: Hyperpriors {
                a: required(kv, "hyper.a")?,
                b: required(kv, "hyper.b")?,
            },
            g_bounds: GBounds {
                floor: required(kv, "g.floor")?,
                cap: required(kv, "g.cap")?,
            },
            adaptive_xi: required(kv, "model.adaptive_xi")?,
            p_cov: required(kv, "model.p_cov")?,
            workers,
        };
        pairwise.validate().map_err(|e| CliError::Usage(e.to_string()))?;

        let config = Self {
            cohort: value(kv, "paths.cohort")?,
            expression,
            prior: value(kv, "paths.prior")?,
            scores: value(kv, "paths.scores")?,
            database: value(kv, "paths.database")?,
            replicate_corr: value(kv, "paths.replicate_corr")?,
            annotations: value(kv, "paths.annotations")?,
            prior_thresholds: PriorThresholds {
                score: in_unit(kv, "threshold.score")?,
                replicate_corr: in_unit(kv, "threshold.corr")?,
            },
            network_threshold: in_unit(kv, "threshold.network")?,
            alpha: in_unit(kv, "threshold.alpha")?,
            fold_change: required::<bool>(kv, "filter.fold_change")?.then_some(fold_change),
            cut,
            ward: required::<String>(kv, "ward.convention")?
                .parse()
                .map_err(|e| CliError::Usage(kv.error("ward.convention", e).to_string()))?,
            pairwise,
            dot: required(kv, "network.dot")?,
            seeds: kv.list("network.seeds").unwrap_or_default(),
            seed: value(kv, "seed")?,
            output,
        };
        Ok(config)
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.output.join(name)
    }
}

/// Reads the config file (if any) and applies command-line overrides.
pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig, CliError> {
    let mut kv = match path {
        Some(p) => KeyValues::load(p).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?,
        None => KeyValues::default(),
    };
    for (k, v) in overrides {
        kv.set(k, v).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    RunConfig::from_kv(&kv)
}
