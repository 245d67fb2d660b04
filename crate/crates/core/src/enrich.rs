//! Over-representation of annotation terms in clusters.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use statrs::function::gamma::ln_gamma;

use crate::cluster::ClusterAssignment;
use crate::error::{Error, Result};

/// Term → member genes, over a gene universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationSets {
    terms: BTreeMap<String, BTreeSet<String>>,
    universe: BTreeSet<String>,
}

impl AnnotationSets {
    /// Builds sets from `(term, gene)` memberships. Without an explicit
    /// universe, it is the union of all annotated genes.
    pub fn new<I>(memberships: I, universe: Option<BTreeSet<String>>) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut terms: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (t, g) in memberships {
            terms.entry(t).or_default().insert(g);
        }
        let universe = match universe {
            Some(u) => {
                for (t, genes) in &terms {
                    if let Some(g) = genes.iter().find(|g| !u.contains(*g)) {
                        return Err(Error::GeneMismatch(format!(
                            "term `{t}` lists gene `{g}` outside the universe"
                        )));
                    }
                }
                u
            }
            None => terms.values().flatten().cloned().collect(),
        };
        Ok(Self { terms, universe })
    }

    /// Same terms intersected with a new universe; terms left empty are dropped.
    pub fn restricted_to(&self, universe: &BTreeSet<String>) -> Self {
        let terms = self
            .terms
            .iter()
            .filter_map(|(t, genes)| {
                let kept: BTreeSet<String> = genes.intersection(universe).cloned().collect();
                (!kept.is_empty()).then(|| (t.clone(), kept))
            })
            .collect();
        Self {
            terms,
            universe: universe.clone(),
        }
    }

    pub fn terms(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.terms
    }

    pub fn universe(&self) -> &BTreeSet<String> {
        &self.universe
    }

    /// Two columns `term` and `gene`, one membership per row, with a header.
    /// Tab-separated; a comma-separated file is accepted too.
    pub fn read_tsv<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        let sep = if header.contains('\t') { '\t' } else { ',' };
        let cols: Vec<&str> = header.split(sep).map(str::trim).collect();
        if cols != ["term", "gene"] {
            return Err(Error::parse(origin, 1, "expected header `term<TAB>gene`"));
        }
        let mut pairs = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(sep).map(str::trim).collect();
            if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
                return Err(Error::parse(origin, k + 2, "expected two non-empty fields: term, gene"));
            }
            pairs.push((fields[0].to_string(), fields[1].to_string()));
        }
        Self::new(pairs, None)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_tsv(std::fs::File::open(path)?, path)
    }
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `P(X ≥ k)` for `X ~ Hypergeometric(population, successes, draws)`.
///
/// The first tail term comes from log-gamma binomials; the rest follow by the
/// pmf ratio `p(i+1)/p(i) = (K − i)(n − i) / ((i + 1)(N − K − n + i + 1))`.
pub fn hypergeom_upper_tail(k: u64, population: u64, successes: u64, draws: u64) -> Result<f64> {
    if successes > population || draws > population {
        return Err(Error::InvalidArgument(format!(
            "hypergeometric needs successes and draws ≤ population, got K = {successes}, n = {draws}, N = {population}"
        )));
    }
    let lo = (draws + successes).saturating_sub(population);
    let hi = successes.min(draws);
    if k <= lo {
        return Ok(1.0);
    }
    if k > hi {
        return Ok(0.0);
    }
    let (nn, kk, n) = (population as f64, successes as f64, draws as f64);
    let ln_first = ln_choose(successes, k) + ln_choose(population - successes, draws - k) - ln_choose(population, draws);
    let mut term = 1.0;
    let mut sum = 1.0;
    for i in k..hi {
        let i = i as f64;
        term *= (kk - i) * (n - i) / ((i + 1.0) * (nn - kk - n + i + 1.0));
        sum += term;
    }
    Ok((ln_first.exp() * sum).min(1.0))
}

/// Upper-tail p-value of the overlap between a cluster and a term.
pub fn hypergeom_test(cluster: &HashSet<String>, term: &HashSet<String>, universe: &HashSet<String>) -> Result<f64> {
    if universe.is_empty() {
        return Err(Error::InvalidArgument("empty gene universe".into()));
    }
    for (what, set) in [("cluster", cluster), ("term", term)] {
        if let Some(g) = set.iter().find(|g| !universe.contains(*g)) {
            return Err(Error::GeneMismatch(format!("{what} gene `{g}` is outside the universe")));
        }
    }
    let k = cluster.intersection(term).count() as u64;
    hypergeom_upper_tail(k, universe.len() as u64, term.len() as u64, cluster.len() as u64)
}

/// Benjamini–Hochberg step-up adjustment, returned in input order.
pub fn bh_adjust(pvals: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidArgument(format!("p-value out of [0, 1]: {p}")));
    }
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvals[a].total_cmp(&pvals[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; m];
    let mut running = 1.0f64;
    for rank in (0..m).rev() {
        let idx = order[rank];
        // m/i ≥ 1 survives rounding, so the adjusted value never drops below p
        running = running.min(pvals[idx] * (m as f64 / (rank + 1) as f64));
        out[idx] = running;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnrichmentRow {
    pub cluster: usize,
    pub term: String,
    pub k: usize,
    pub term_size: usize,
    pub cluster_size: usize,
    pub universe_size: usize,
    pub pval: f64,
    pub padj: f64,
    pub significant: bool,
}

/// Tests every term sharing at least one gene with a cluster; p-values are
/// adjusted within each cluster. Rows come sorted by adjusted p, then
/// cluster, raw p and term.
pub fn enrich_clusters(
    assignment: &ClusterAssignment,
    annotations: &AnnotationSets,
    alpha: f64,
) -> Result<Vec<EnrichmentRow>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let universe = annotations.universe();
    if let Some(g) = assignment.gene_ids().iter().find(|g| !universe.contains(*g)) {
        return Err(Error::GeneMismatch(format!("clustered gene `{g}` is outside the annotation universe")));
    }
    let big_n = universe.len() as u64;
    let mut rows = Vec::new();
    for (c, members) in assignment.clusters().into_iter().enumerate() {
        let members: BTreeSet<String> = members.into_iter().collect();
        let mut tested = Vec::new();
        for (term, genes) in annotations.terms() {
            let k = members.intersection(genes).count();
            if k == 0 {
                continue;
            }
            let p = hypergeom_upper_tail(k as u64, big_n, genes.len() as u64, members.len() as u64)?;
            tested.push((term, k, genes.len(), p));
        }
        let padj = bh_adjust(&tested.iter().map(|t| t.3).collect::<Vec<_>>())?;
        for ((term, k, size, p), q) in tested.into_iter().zip(padj) {
            rows.push(EnrichmentRow {
                cluster: c + 1,
                term: term.clone(),
                k,
                term_size: size,
                cluster_size: members.len(),
                universe_size: universe.len(),
                pval: p,
                padj: q,
                significant: q < alpha,
            });
        }
    }
    rows.sort_by(|a, b| {
        a.padj
            .total_cmp(&b.padj)
            .then(a.cluster.cmp(&b.cluster))
            .then(a.pval.total_cmp(&b.pval))
            .then(a.term.cmp(&b.term))
    });
    Ok(rows)
}

pub fn write_enrichment_csv<W: Write>(writer: W, rows: &[EnrichmentRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "cluster",
        "term",
        "k",
        "term_size",
        "cluster_size",
        "universe_size",
        "pval",
        "padj",
        "significant",
    ])?;
    for r in rows {
        w.write_record([
            r.cluster.to_string(),
            r.term.clone(),
            r.k.to_string(),
            r.term_size.to_string(),
            r.cluster_size.to_string(),
            r.universe_size.to_string(),
            r.pval.to_string(),
            r.padj.to_string(),
            r.significant.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use num_traits::{One, ToPrimitive, Zero};
    use proptest::prelude::*;

    fn binom(n: u64, k: u64) -> BigUint {
        let mut r = BigUint::one();
        for i in 0..k {
            r = r * BigUint::from(n - i) / BigUint::from(i + 1);
        }
        r
    }

    /// Exact tail as a ratio of big integers, reduced to f64 at the end.
    fn exact_tail(k: u64, nn: u64, kk: u64, n: u64) -> f64 {
        let mut num = BigUint::zero();
        for i in k..=kk.min(n) {
            if n - i <= nn - kk {
                num += binom(kk, i) * binom(nn - kk, n - i);
            }
        }
        let den = binom(nn, n);
        // scale to keep 60+ significant bits before the float conversion
        let shift = 200u64;
        let q = (num << shift) / den;
        q.to_f64().unwrap() / 2f64.powi(shift as i32)
    }

    fn set(v: &[&str]) -> HashSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn textbook_example() {
        let p = hypergeom_upper_tail(4, 10, 4, 5).unwrap();
        assert!((p - 6.0 / 252.0).abs() < 1e-15);
        assert_eq!(hypergeom_upper_tail(0, 10, 4, 5).unwrap(), 1.0);
        // term = universe: every draw is a success
        assert_eq!(hypergeom_upper_tail(5, 10, 10, 5).unwrap(), 1.0);
    }

    #[test]
    fn set_interface() {
        let universe: HashSet<String> = (0..10).map(|i| format!("g{i}")).collect();
        let cluster = set(&["g0", "g1", "g2", "g3", "g4"]);
        let term = set(&["g0", "g1", "g2", "g3"]);
        assert!((hypergeom_test(&cluster, &term, &universe).unwrap() - 6.0 / 252.0).abs() < 1e-15);
        assert!(hypergeom_test(&cluster, &term, &HashSet::new()).is_err());
        assert!(hypergeom_test(&set(&["zz"]), &term, &universe).is_err());
    }

    #[test]
    fn matches_exact_enumeration() {
        for nn in 1..=50u64 {
            for kk in 0..=nn {
                for n in (0..=nn).step_by(3) {
                    for k in 0..=kk.min(n) {
                        let p = hypergeom_upper_tail(k, nn, kk, n).unwrap();
                        let e = exact_tail(k, nn, kk, n);
                        assert!(((p - e) / e).abs() < 1e-12, "N={nn} K={kk} n={n} k={k}: {p} vs {e}");
                    }
                }
            }
        }
    }

    #[test]
    fn bh_examples() {
        let q = bh_adjust(&[0.01, 0.02, 0.04]).unwrap();
        for (a, b) in q.iter().zip([0.03, 0.03, 0.04]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(bh_adjust(&[0.2]).unwrap(), vec![0.2]);
        assert_eq!(bh_adjust(&[0.3; 4]).unwrap(), vec![0.3; 4]);
        assert!(bh_adjust(&[1.2]).is_err());
        assert!(bh_adjust(&[]).unwrap().is_empty());
    }

    #[test]
    fn cluster_report() {
        let genes: Vec<String> = (0..40).map(|i| format!("g{i}")).collect();
        let groups: Vec<usize> = (0..40).map(|i| if i < 8 { 0 } else { 1 + i % 3 }).collect();
        let a = ClusterAssignment::from_groups(genes.clone(), &groups).unwrap();
        let mut pairs: Vec<(String, String)> = genes[..8].iter().map(|g| ("T1".to_string(), g.clone())).collect();
        pairs.extend([0, 9, 17, 25, 33].iter().map(|&i| ("T2".to_string(), genes[i].clone())));
        pairs.extend([11, 20].iter().map(|&i| ("T3".to_string(), genes[i].clone())));
        let ann = AnnotationSets::new(pairs, Some(genes.iter().cloned().collect())).unwrap();
        let rows = enrich_clusters(&a, &ann, 0.05).unwrap();
        assert!(rows.windows(2).all(|w| w[0].padj <= w[1].padj));
        let top = &rows[0];
        assert_eq!((top.cluster, top.term.as_str(), top.k), (1, "T1", 8));
        assert!(top.significant);
        let c1: Vec<&EnrichmentRow> = rows.iter().filter(|r| r.cluster == 1).collect();
        assert_eq!(c1[0].term, "T1");

        let mut buf = Vec::new();
        write_enrichment_csv(&mut buf, &rows).unwrap();
        assert!(buf.starts_with(b"cluster,term,k,term_size,cluster_size,universe_size,pval,padj,significant\n"));
    }

    #[test]
    fn no_overlap_no_significance() {
        let genes: Vec<String> = (0..6).map(|i| format!("g{i}")).collect();
        let a = ClusterAssignment::from_groups(genes[..3].to_vec(), &[0, 0, 1]).unwrap();
        let ann = AnnotationSets::new(
            vec![("T".to_string(), "g5".to_string())],
            Some(genes.iter().cloned().collect()),
        )
        .unwrap();
        assert!(enrich_clusters(&a, &ann, 0.05).unwrap().iter().all(|r| !r.significant));
    }

    #[test]
    fn annotation_parsing() {
        let text = "term\tgene\nT1\ta\nT1\tb\nT2\tb\n";
        let ann = AnnotationSets::read_tsv(text.as_bytes(), Path::new("a.tsv")).unwrap();
        assert_eq!(ann.terms().len(), 2);
        assert_eq!(ann.universe().len(), 2);
        let csv = "term,gene\nT1,a\n";
        assert_eq!(AnnotationSets::read_tsv(csv.as_bytes(), Path::new("a.csv")).unwrap().terms().len(), 1);
        let err = AnnotationSets::read_tsv("term\tgene\nT1\n".as_bytes(), Path::new("a.tsv")).unwrap_err();
        assert!(err.to_string().contains("a.tsv:2"));
        let restricted = ann.restricted_to(&["a".to_string()].into_iter().collect());
        assert_eq!(restricted.terms().len(), 1);
    }

    proptest! {
        #[test]
        fn bh_properties(p in proptest::collection::vec(0.0f64..=1.0, 1..60)) {
            let q = bh_adjust(&p).unwrap();
            for i in 0..p.len() {
                prop_assert!(q[i] >= p[i] && q[i] <= 1.0);
                for j in 0..p.len() {
                    if p[i] < p[j] {
                        prop_assert!(q[i] <= q[j]);
                    }
                }
            }
        }
    }
}
