use std::collections::{BTreeSet, HashSet};
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use leadlag_core::cluster::{cut, ward_cluster, ClusterAssignment};
use leadlag_core::enrich::{enrich_clusters, write_enrichment_csv, AnnotationSets};
use leadlag_core::kv::KeyValues;
use leadlag_core::network::{build_network, degree_report, neighborhood, write_degree_tsv};
use leadlag_core::pairwise::{compute_all, write_pair_tsv};
use leadlag_core::prior::{build_prior, read_replicate_corr, ScoreTable};
use leadlag_core::simulate::{simulate_cohort, CohortSpec};
use leadlag_core::timeseries::fold_change_filter;
use leadlag_core::{ExpressionMatrix, PriorAdjacency, SimilarityMatrix};
use log::{info, warn};

use crate::config::RunConfig;
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn ensure_output(config: &RunConfig) -> Result<()> {
    fs::create_dir_all(&config.output)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", config.output.display())))
}

fn input(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{what} {} not found", path.display())))
    }
}

fn upstream(path: &Path, stage: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{} not found; run `{stage}` first", path.display())))
    }
}

pub fn simulate(config: &RunConfig) -> Result<()> {
    let path = config
        .cohort
        .as_ref()
        .ok_or_else(|| CliError::Usage("`simulate` needs `paths.cohort`".into()))?;
    input(path, "cohort spec")?;
    let mut kv = KeyValues::load(path)?;
    if let Some(seed) = config.seed {
        kv.set("seed", &seed.to_string())?;
    }
    let spec = CohortSpec::from_kv(&kv)?;
    let start = Instant::now();
    let (matrix, truth) = simulate_cohort(&spec)?;
    ensure_output(config)?;
    matrix.save(&config.out("expression.csv"))?;
    truth.save(&config.out("truth_prior.csv"))?;
    info!(
        "simulated {} genes x {} time points in {:.2?}",
        matrix.n_genes(),
        matrix.n_times(),
        start.elapsed()
    );
    Ok(())
}

fn load_prior(config: &RunConfig, matrix: &ExpressionMatrix) -> Result<Option<PriorAdjacency>> {
    if let Some(p) = &config.prior {
        input(p, "prior")?;
        let prior = PriorAdjacency::load(p)?;
        let missing: Vec<&String> = matrix
            .gene_ids()
            .iter()
            .filter(|g| !prior.gene_ids().contains(g))
            .collect();
        if !missing.is_empty() {
            return Err(CliError::Data(format!(
                "{} genes of the expression matrix are missing from {} (first: `{}`)",
                missing.len(),
                p.display(),
                missing[0]
            )));
        }
        return Ok(Some(prior.aligned_to(matrix.gene_ids())?));
    }
    if let Some(s) = &config.scores {
        input(s, "score table")?;
        let database = match &config.database {
            Some(d) => {
                input(d, "database list")?;
                Some(ScoreTable::read_database(File::open(d)?)?)
            }
            None => None,
        };
        let scores = ScoreTable::read_scores(File::open(s)?, s, database)?;
        let corr = match &config.replicate_corr {
            Some(c) => {
                input(c, "replicate correlation")?;
                Some(read_replicate_corr(File::open(c)?, c, matrix.gene_ids())?)
            }
            None => None,
        };
        let prior = build_prior(&scores, matrix.gene_ids(), corr.as_deref(), config.prior_thresholds)?;
        return Ok(Some(prior));
    }
    warn!("no prior given (paths.prior / paths.scores); every pair is treated as unknown");
    Ok(None)
}

pub fn compute(config: &RunConfig) -> Result<()> {
    input(&config.expression, "expression matrix")?;
    let mut matrix = ExpressionMatrix::load(&config.expression)?;
    if let Some(t) = config.fold_change {
        let keep: HashSet<String> = fold_change_filter(&matrix, t)?.into_iter().collect();
        info!("fold-change filter at {t}: kept {} of {} genes", keep.len(), matrix.n_genes());
        matrix = matrix.subset(&keep)?;
    }
    let prior = load_prior(config, &matrix)?;
    let prior = prior.unwrap_or_else(|| PriorAdjacency::unknown(matrix.gene_ids().to_vec()));

    let start = Instant::now();
    let sweep = compute_all(&matrix, Some(&prior), &config.pairwise)?;
    let elapsed = start.elapsed();
    let n_pairs = sweep.pairs.len();
    info!(
        "{} genes, {n_pairs} pairs, {} spline fits in {:.2?} ({:.0} pairs/s)",
        matrix.n_genes(),
        sweep.spline_fits,
        elapsed,
        n_pairs as f64 / elapsed.as_secs_f64().max(1e-9)
    );

    ensure_output(config)?;
    sweep.similarity.save(&config.out("similarity.csv"))?;
    write_pair_tsv(create(&config.out("pair_metrics.tsv"))?, matrix.gene_ids(), &sweep.pairs)?;
    prior.save(&config.out("prior.csv"))?;
    Ok(())
}

pub fn cluster(config: &RunConfig) -> Result<()> {
    let sim_path = config.out("similarity.csv");
    upstream(&sim_path, "compute")?;
    let s = SimilarityMatrix::load(&sim_path)?;
    let dend = ward_cluster(&s, config.ward)?;
    let assignment = cut(&dend, config.cut)?;
    dend.save(&config.out("dendrogram.json"))?;
    assignment.save(&config.out("clusters.csv"))?;
    info!("{} genes in {} clusters", s.len(), assignment.n_clusters());
    Ok(())
}

pub fn network(config: &RunConfig) -> Result<()> {
    let sim_path = config.out("similarity.csv");
    upstream(&sim_path, "compute")?;
    let s = SimilarityMatrix::load(&sim_path)?;
    let prior_path = config.out("prior.csv");
    let prior = if prior_path.exists() {
        PriorAdjacency::load(&prior_path)?
    } else {
        warn!("{} not found; classifying every edge as novel", prior_path.display());
        PriorAdjacency::unknown(s.gene_ids().to_vec())
    };
    let net = build_network(&s, &prior, config.network_threshold)?;
    net.write_tsv(create(&config.out("edges.tsv"))?)?;
    write_degree_tsv(create(&config.out("degrees.tsv"))?, &degree_report(&net))?;
    if config.dot {
        net.write_dot(create(&config.out("network.dot"))?)?;
    }
    if !config.seeds.is_empty() {
        let sub = neighborhood(&net, &config.seeds)?;
        sub.write_tsv(create(&config.out("neighborhood.tsv"))?)?;
    }
    info!("{} edges above {}", net.edges().len(), config.network_threshold);
    Ok(())
}

pub fn enrich(config: &RunConfig) -> Result<()> {
    let path = config
        .annotations
        .as_ref()
        .ok_or_else(|| CliError::Usage("`enrich` needs `paths.annotations`".into()))?;
    let clusters_path = config.out("clusters.csv");
    upstream(&clusters_path, "cluster")?;
    let assignment = ClusterAssignment::load(&clusters_path)?;
    let universe: BTreeSet<String> = assignment.gene_ids().iter().cloned().collect();
    input(path, "annotation table")?;
    let annotations = AnnotationSets::load(path)?.restricted_to(&universe);
    let rows = enrich_clusters(&assignment, &annotations, config.alpha)?;
    write_enrichment_csv(create(&config.out("enrichment.csv"))?, &rows)?;
    info!(
        "{} cluster/term tests, {} significant at {}",
        rows.len(),
        rows.iter().filter(|r| r.significant).count(),
        config.alpha
    );
    Ok(())
}

/// All stages in order; `simulate` only with a cohort, `enrich` only with annotations.
pub fn run_all(config: &RunConfig) -> Result<()> {
    if config.cohort.is_some() {
        simulate(config)?;
    }
    compute(config)?;
    cluster(config)?;
    network(config)?;
    if config.annotations.is_some() {
        enrich(config)?;
    }
    Ok(())
}
