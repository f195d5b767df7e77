//! Per-gene differential-expression evidence: a moderated-t procedure on
//! transformed values, a negative-binomial Wald test on counts, gene-level
//! ranking statistics and Benjamini-Hochberg adjustment.

use crate::corpus::ConditionLabels;
use crate::error::{AuditError, Result};
use crate::preprocess::{median, size_factors, TransformedMatrix};
use crate::special::{normal_sf, t_two_sided_p};
use crate::corpus::CountMatrix;
use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

/// The two differential-expression procedures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeMethod {
    ModeratedT,
    NbWald,
}

impl DeMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            DeMethod::ModeratedT => "moderated-t",
            DeMethod::NbWald => "nb-wald",
        }
    }
}

/// One gene's differential-expression evidence.
#[derive(Debug, Clone)]
pub struct DeRow {
    pub gene: String,
    pub log2_fold_change: f64,
    pub statistic: f64,
    pub raw_p: f64,
    pub adjusted_p: f64,
}

/// Per-gene table in matrix row order.
#[derive(Debug, Clone)]
pub struct DeTable {
    rows: Vec<DeRow>,
    method: DeMethod,
    index: HashMap<String, usize>,
}

impl DeTable {
    fn new(rows: Vec<DeRow>, method: DeMethod) -> Self {
        let index = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r.gene.clone(), i))
            .collect();
        DeTable { rows, method, index }
    }

    pub fn rows(&self) -> &[DeRow] {
        &self.rows
    }

    pub fn method(&self) -> DeMethod {
        self.method
    }

    pub fn get(&self, gene: &str) -> Option<&DeRow> {
        self.index.get(gene).map(|&i| &self.rows[i])
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("gene_id\tlog2_fold_change\tstatistic\traw_p\tadjusted_p\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                r.gene, r.log2_fold_change, r.statistic, r.raw_p, r.adjusted_p
            );
        }
        out
    }
}

/// Gene-level ranking statistics computed directly from expression values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankingStat {
    SignalToNoise,
    TStatistic,
    DiffOfClasses,
}

impl RankingStat {
    pub fn tag(&self) -> &'static str {
        match self {
            RankingStat::SignalToNoise => "signal-to-noise",
            RankingStat::TStatistic => "t-statistic",
            RankingStat::DiffOfClasses => "diff-of-classes",
        }
    }
}

/// Provenance of a ranked list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatTag {
    SignalToNoise,
    TStatistic,
    DiffOfClasses,
    DeDerived,
}

/// Genes ordered by descending statistic, ties broken by gene id.
#[derive(Debug, Clone)]
pub struct RankedList {
    genes: Vec<String>,
    stats: Vec<f64>,
    tag: StatTag,
}

impl RankedList {
    fn sorted(mut pairs: Vec<(String, f64)>, tag: StatTag) -> Self {
        pairs.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        let (genes, stats) = pairs.into_iter().unzip();
        RankedList { genes, stats, tag }
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn genes(&self) -> &[String] {
        &self.genes
    }

    pub fn stats(&self) -> &[f64] {
        &self.stats
    }

    pub fn tag(&self) -> StatTag {
        self.tag
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("gene_id\tstatistic\n");
        for (g, s) in self.genes.iter().zip(&self.stats) {
            let _ = writeln!(out, "{g}\t{s}");
        }
        out
    }
}

fn group_mean(row: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| row[i]).sum::<f64>() / idx.len() as f64
}

fn group_sse(row: &[f64], idx: &[usize], mean: f64) -> f64 {
    idx.iter().map(|&i| (row[i] - mean).powi(2)).sum()
}

pub(crate) fn shrink_variance(d0: f64, s02: f64, dg: f64, sg2: f64) -> f64 {
    (d0 * s02 + dg * sg2) / (d0 + dg)
}

const MODERATION_PRIOR_DF: f64 = 4.0;

fn check_design(labels: &ConditionLabels) -> Result<(Vec<usize>, Vec<usize>)> {
    let (g1, g2) = labels.group_indices();
    if g1.len() < 2 || g2.len() < 2 {
        return Err(AuditError::DegenerateDesign);
    }
    Ok((g1, g2))
}

/// Moderated t-test on transformed expression values.
///
/// The per-gene residual variance is shrunk toward the median variance with
/// a fixed prior of 4 degrees of freedom; p-values come from a t
/// distribution with `4 + n - 2` degrees of freedom.
pub fn moderated_t(values: &TransformedMatrix, labels: &ConditionLabels) -> Result<DeTable> {
    assert_eq!(values.n_samples(), labels.n_samples());
    let (g1, g2) = check_design(labels)?;
    let n = labels.n_samples() as f64;
    let dg = n - 2.0;

    let mut deltas = Vec::with_capacity(values.n_genes());
    let mut variances = Vec::with_capacity(values.n_genes());
    for g in 0..values.n_genes() {
        let row = values.row(g);
        let m1 = group_mean(row, &g1);
        let m2 = group_mean(row, &g2);
        let sse = group_sse(row, &g1, m1) + group_sse(row, &g2, m2);
        deltas.push(m2 - m1);
        variances.push(sse / dg);
    }
    let s02 = median(&variances);
    let inv_n = 1.0 / g1.len() as f64 + 1.0 / g2.len() as f64;
    let df = MODERATION_PRIOR_DF + dg;

    let mut raw_ps = Vec::with_capacity(values.n_genes());
    let mut stats = Vec::with_capacity(values.n_genes());
    for g in 0..values.n_genes() {
        let shrunk = shrink_variance(MODERATION_PRIOR_DF, s02, dg, variances[g]);
        let se = (shrunk * inv_n).sqrt().max(1e-150);
        let t = if deltas[g] == 0.0 { 0.0 } else { deltas[g] / se };
        stats.push(t);
        raw_ps.push(t_two_sided_p(t, df));
    }
    let adjusted = bh_adjust(&raw_ps)?;
    let rows = (0..values.n_genes())
        .map(|g| DeRow {
            gene: values.gene_ids()[g].clone(),
            log2_fold_change: deltas[g],
            statistic: stats[g],
            raw_p: raw_ps[g],
            adjusted_p: adjusted[g],
        })
        .collect();
    Ok(DeTable::new(rows, DeMethod::ModeratedT))
}

pub(crate) fn raw_dispersion(pooled_var: f64, overall_mean: f64) -> f64 {
    if overall_mean <= 0.0 {
        return 1e-8;
    }
    ((pooled_var - overall_mean) / (overall_mean * overall_mean)).max(1e-8)
}

/// Negative-binomial Wald test on size-factor-normalised counts.
pub fn nb_wald(matrix: &CountMatrix, labels: &ConditionLabels) -> Result<DeTable> {
    assert_eq!(matrix.n_samples(), labels.n_samples());
    let (g1, g2) = check_design(labels)?;
    let factors = size_factors(matrix)?;
    let n = matrix.n_samples() as f64;
    let ln2_sq = std::f64::consts::LN_2 * std::f64::consts::LN_2;

    let mut m1s = Vec::with_capacity(matrix.n_genes());
    let mut m2s = Vec::with_capacity(matrix.n_genes());
    let mut alphas = Vec::with_capacity(matrix.n_genes());
    for g in 0..matrix.n_genes() {
        let q: Vec<f64> = (0..matrix.n_samples())
            .map(|s| matrix.count(g, s) as f64 / factors[s])
            .collect();
        let m1 = group_mean(&q, &g1);
        let m2 = group_mean(&q, &g2);
        let pooled_var = (group_sse(&q, &g1, m1) + group_sse(&q, &g2, m2)) / (n - 2.0);
        let overall = (g1.len() as f64 * m1 + g2.len() as f64 * m2) / n;
        m1s.push(m1);
        m2s.push(m2);
        alphas.push(raw_dispersion(pooled_var, overall));
    }
    let alpha_median = median(&alphas);

    let mut raw_ps = Vec::with_capacity(matrix.n_genes());
    let mut stats = Vec::with_capacity(matrix.n_genes());
    let mut lfcs = Vec::with_capacity(matrix.n_genes());
    for g in 0..matrix.n_genes() {
        let shrunk = 0.5 * (alphas[g] + alpha_median);
        let lfc = ((m2s[g] + 0.5) / (m1s[g] + 0.5)).log2();
        let v1 = (1.0 / (m1s[g] + 0.5) + shrunk) / (g1.len() as f64 * ln2_sq);
        let v2 = (1.0 / (m2s[g] + 0.5) + shrunk) / (g2.len() as f64 * ln2_sq);
        let z = if lfc == 0.0 { 0.0 } else { lfc / (v1 + v2).sqrt() };
        lfcs.push(lfc);
        stats.push(z);
        raw_ps.push((2.0 * normal_sf(z.abs())).min(1.0));
    }
    let adjusted = bh_adjust(&raw_ps)?;
    let rows = (0..matrix.n_genes())
        .map(|g| DeRow {
            gene: matrix.gene_ids()[g].clone(),
            log2_fold_change: lfcs[g],
            statistic: stats[g],
            raw_p: raw_ps[g],
            adjusted_p: adjusted[g],
        })
        .collect();
    Ok(DeTable::new(rows, DeMethod::NbWald))
}

/// Benjamini-Hochberg step-up adjustment; output in input order.
pub fn bh_adjust(p: &[f64]) -> Result<Vec<f64>> {
    for &v in p {
        if !(0.0..=1.0).contains(&v) {
            return Err(AuditError::InvalidP(v));
        }
    }
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap());
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0_f64;
    for i in (0..m).rev() {
        let rank = (i + 1) as f64;
        let candidate = (m as f64 * p[order[i]] / rank).min(1.0);
        running = running.min(candidate);
        adjusted[order[i]] = running;
    }
    Ok(adjusted)
}

/// Compute a ranked gene list from expression values.
pub fn ranking_stat(
    values: &TransformedMatrix,
    labels: &ConditionLabels,
    stat: RankingStat,
) -> Result<RankedList> {
    assert_eq!(values.n_samples(), labels.n_samples());
    let (g1, g2) = labels.group_indices();
    if matches!(stat, RankingStat::SignalToNoise | RankingStat::TStatistic)
        && (g1.len() < 2 || g2.len() < 2)
    {
        return Err(AuditError::DegenerateDesign);
    }
    let pairs: Vec<(String, f64)> = (0..values.n_genes())
        .map(|g| {
            let row = values.row(g);
            let m1 = group_mean(row, &g1);
            let m2 = group_mean(row, &g2);
            let value = match stat {
                RankingStat::DiffOfClasses => m1 - m2,
                RankingStat::SignalToNoise => {
                    let s1 = (group_sse(row, &g1, m1) / (g1.len() as f64 - 1.0)).sqrt();
                    let s2 = (group_sse(row, &g2, m2) / (g2.len() as f64 - 1.0)).sqrt();
                    let s1 = s1.max(0.2 * m1.abs()).max(1e-8);
                    let s2 = s2.max(0.2 * m2.abs()).max(1e-8);
                    (m1 - m2) / (s1 + s2)
                }
                RankingStat::TStatistic => {
                    let v1 = group_sse(row, &g1, m1) / (g1.len() as f64 - 1.0);
                    let v2 = group_sse(row, &g2, m2) / (g2.len() as f64 - 1.0);
                    let denom = (v1 / g1.len() as f64 + v2 / g2.len() as f64)
                        .sqrt()
                        .max(1e-8);
                    (m1 - m2) / denom
                }
            };
            (values.gene_ids()[g].clone(), value)
        })
        .collect();
    let tag = match stat {
        RankingStat::SignalToNoise => StatTag::SignalToNoise,
        RankingStat::TStatistic => StatTag::TStatistic,
        RankingStat::DiffOfClasses => StatTag::DiffOfClasses,
    };
    Ok(RankedList::sorted(pairs, tag))
}

/// Ranked list from a DE table: sign(LFC) * -log10(p), p floored at 1e-300.
pub fn ranked_from_de(table: &DeTable) -> RankedList {
    let pairs: Vec<(String, f64)> = table
        .rows()
        .iter()
        .map(|r| {
            let sign = if r.log2_fold_change > 0.0 {
                1.0
            } else if r.log2_fold_change < 0.0 {
                -1.0
            } else {
                0.0
            };
            let value = sign * -(r.raw_p.max(1e-300).log10());
            (r.gene.clone(), value)
        })
        .collect();
    RankedList::sorted(pairs, StatTag::DeDerived)
}

/// Genes significant at the given adjusted-p cutoff (strict `<`).
pub fn de_gene_list(table: &DeTable, alpha: f64) -> BTreeSet<String> {
    assert!(alpha > 0.0 && alpha < 1.0);
    table
        .rows()
        .iter()
        .filter(|r| r.adjusted_p < alpha)
        .map(|r| r.gene.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::TransformMethod;
    use proptest::prelude::*;

    fn transformed(rows: &[(&str, &[f64])], samples: usize) -> TransformedMatrix {
        let gene_ids = rows.iter().map(|(id, _)| id.to_string()).collect();
        let values: Vec<f64> = rows.iter().flat_map(|(_, r)| r.iter().copied()).collect();
        TransformedMatrix::new(
            gene_ids,
            (0..samples).map(|i| format!("s{i}")).collect(),
            values,
            TransformMethod::LogCpm,
        )
    }

    fn labels(assignment: &[&str]) -> ConditionLabels {
        ConditionLabels::from_assignment(assignment.iter().map(|s| s.to_string()).collect())
            .unwrap()
    }

    #[test]
    fn shrinkage_formula() {
        assert_eq!(shrink_variance(4.0, 1.0, 2.0, 4.0), 2.0);
    }

    #[test]
    fn equal_group_means_give_unit_p() {
        let m = transformed(
            &[("flat", &[1.0, 2.0, 1.0, 2.0]), ("var", &[0.0, 1.0, 3.0, 5.0])],
            4,
        );
        let l = labels(&["A", "A", "B", "B"]);
        let t = moderated_t(&m, &l).unwrap();
        let flat = t.get("flat").unwrap();
        assert_eq!(flat.statistic, 0.0);
        assert_eq!(flat.raw_p, 1.0);
    }

    #[test]
    fn single_sample_group_is_degenerate() {
        let m = transformed(&[("g", &[1.0, 2.0, 3.0])], 3);
        let l = labels(&["A", "B", "B"]);
        assert!(matches!(
            moderated_t(&m, &l),
            Err(AuditError::DegenerateDesign)
        ));
        assert!(matches!(
            ranking_stat(&m, &l, RankingStat::SignalToNoise),
            Err(AuditError::DegenerateDesign)
        ));
    }

    fn count_matrix(rows: &[(&str, &[u64])], samples: usize) -> CountMatrix {
        let gene_ids = rows.iter().map(|(id, _)| id.to_string()).collect();
        let counts = rows.iter().flat_map(|(_, r)| r.iter().copied()).collect();
        CountMatrix::new(
            gene_ids,
            (0..samples).map(|i| format!("s{i}")).collect(),
            counts,
            None,
        )
        .unwrap()
    }

    #[test]
    fn nb_wald_symmetric_gene_has_unit_p() {
        // columns mirror across the group boundary, so normalised group
        // means are exactly equal for every gene
        let m = count_matrix(
            &[
                ("flat", &[10, 12, 12, 10]),
                ("big", &[20, 24, 24, 20]),
                ("r", &[7, 7, 7, 7]),
            ],
            4,
        );
        let l = labels(&["A", "A", "B", "B"]);
        let t = nb_wald(&m, &l).unwrap();
        let flat = t.get("flat").unwrap();
        assert_eq!(flat.log2_fold_change, 0.0);
        assert_eq!(flat.raw_p, 1.0);
    }

    #[test]
    fn nb_wald_detects_fold_change_direction() {
        let m = count_matrix(
            &[("up", &[5, 5, 40, 40]), ("down", &[40, 40, 5, 5]), ("r", &[9, 9, 9, 9])],
            4,
        );
        let l = labels(&["A", "A", "B", "B"]);
        let t = nb_wald(&m, &l).unwrap();
        assert!(t.get("up").unwrap().log2_fold_change > 0.0);
        assert!(t.get("down").unwrap().log2_fold_change < 0.0);
    }

    #[test]
    fn dispersion_floors_underdispersed_genes() {
        assert_eq!(raw_dispersion(1.0, 2.0), 1e-8);
        assert_eq!(raw_dispersion(0.0, 0.0), 1e-8);
        assert!((raw_dispersion(6.0, 2.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nb_wald_poisson_null_calibration() {
        // Poisson data are NB with zero dispersion; the Wald p-values
        // should be roughly uniform, slightly conservative.
        use rand::SeedableRng;
        use rand_distr::{Distribution, Poisson};
        let mut fractions = Vec::new();
        for seed in 0..50u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let pois = Poisson::new(50.0).unwrap();
            let rows: Vec<(String, Vec<u64>)> = (0..500)
                .map(|g| {
                    (
                        format!("g{g}"),
                        (0..10).map(|_| pois.sample(&mut rng) as u64).collect(),
                    )
                })
                .collect();
            let gene_ids: Vec<String> = rows.iter().map(|(id, _)| id.clone()).collect();
            let counts: Vec<u64> = rows.iter().flat_map(|(_, r)| r.iter().copied()).collect();
            let m = CountMatrix::new(
                gene_ids,
                (0..10).map(|i| format!("s{i}")).collect(),
                counts,
                None,
            )
            .unwrap();
            let l = labels(&["A", "A", "A", "A", "A", "B", "B", "B", "B", "B"]);
            let t = nb_wald(&m, &l).unwrap();
            let hits = t.rows().iter().filter(|r| r.raw_p < 0.05).count();
            fractions.push(hits as f64 / 500.0);
        }
        let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
        assert!(
            (0.02..=0.09).contains(&mean),
            "null rejection rate {mean} outside [0.02, 0.09]"
        );
    }

    #[test]
    fn bh_worked_examples() {
        let adj = bh_adjust(&[0.01, 0.02, 0.03, 0.04]).unwrap();
        assert_eq!(adj, vec![0.04, 0.04, 0.04, 0.04]);
        assert_eq!(bh_adjust(&[1.0, 1.0, 1.0]).unwrap(), vec![1.0, 1.0, 1.0]);
        assert_eq!(bh_adjust(&[0.3]).unwrap(), vec![0.3]);
        assert!(matches!(
            bh_adjust(&[0.5, 1.5]),
            Err(AuditError::InvalidP(_))
        ));
    }

    /// Quadratic-time reference for the step-up adjustment.
    pub(crate) fn bh_reference(p: &[f64]) -> Vec<f64> {
        let m = p.len();
        let mut sorted: Vec<f64> = p.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        p.iter()
            .map(|&v| {
                let mut best = 1.0_f64;
                for (j, &pj) in sorted.iter().enumerate() {
                    if pj >= v {
                        best = best.min((m as f64 * pj / (j + 1) as f64).min(1.0));
                    }
                }
                best
            })
            .collect()
    }

    #[test]
    fn ranking_stat_examples() {
        // group means (2, 1), sample sds (0.5, 0.5) -> SNR exactly 1
        let m = transformed(&[("g", &[1.5, 2.0, 2.5, 0.5, 1.0, 1.5])], 6);
        let l = labels(&["A", "A", "A", "B", "B", "B"]);
        let r = ranking_stat(&m, &l, RankingStat::SignalToNoise).unwrap();
        assert!((r.stats()[0] - 1.0).abs() < 1e-12);

        let d = ranking_stat(&m, &l, RankingStat::DiffOfClasses).unwrap();
        assert!((d.stats()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn snr_floor_prevents_division_by_zero() {
        let m = transformed(&[("g", &[1.0, 1.0, 0.0, 0.0])], 4);
        let l = labels(&["A", "A", "B", "B"]);
        let r = ranking_stat(&m, &l, RankingStat::SignalToNoise).unwrap();
        assert!((r.stats()[0] - 5.0).abs() < 1e-5);
        assert!(r.stats()[0].is_finite());
    }

    #[test]
    fn equal_means_diff_of_classes_zero() {
        let m = transformed(&[("g", &[1.0, 3.0, 3.0, 1.0])], 4);
        let l = labels(&["A", "A", "B", "B"]);
        let r = ranking_stat(&m, &l, RankingStat::DiffOfClasses).unwrap();
        assert_eq!(r.stats()[0], 0.0);
    }

    fn de_table_for(lfc: f64, p: f64) -> DeTable {
        DeTable::new(
            vec![DeRow {
                gene: "g".into(),
                log2_fold_change: lfc,
                statistic: 0.0,
                raw_p: p,
                adjusted_p: p,
            }],
            DeMethod::NbWald,
        )
    }

    #[test]
    fn de_derived_statistic() {
        assert!((ranked_from_de(&de_table_for(2.0, 0.01)).stats()[0] - 2.0).abs() < 1e-12);
        assert!((ranked_from_de(&de_table_for(-2.0, 0.01)).stats()[0] + 2.0).abs() < 1e-12);
        assert_eq!(ranked_from_de(&de_table_for(3.0, 1.0)).stats()[0], 0.0);
    }

    #[test]
    fn de_gene_list_threshold_is_strict() {
        let t = DeTable::new(
            vec![
                DeRow {
                    gene: "a".into(),
                    log2_fold_change: 1.0,
                    statistic: 0.0,
                    raw_p: 0.001,
                    adjusted_p: 0.01,
                },
                DeRow {
                    gene: "b".into(),
                    log2_fold_change: 1.0,
                    statistic: 0.0,
                    raw_p: 0.02,
                    adjusted_p: 0.2,
                },
                DeRow {
                    gene: "c".into(),
                    log2_fold_change: 1.0,
                    statistic: 0.0,
                    raw_p: 0.01,
                    adjusted_p: 0.05,
                },
            ],
            DeMethod::NbWald,
        );
        let list = de_gene_list(&t, 0.05);
        assert!(list.contains("a"));
        assert!(!list.contains("b"));
        assert!(!list.contains("c"), "adjusted p exactly at alpha is excluded");
    }

    #[test]
    fn label_swap_negates_effects() {
        let m = transformed(
            &[
                ("g1", &[1.0, 2.0, 4.0, 6.0, 3.0, 2.0]),
                ("g2", &[5.0, 4.0, 4.5, 1.0, 2.0, 1.5]),
            ],
            6,
        );
        let fwd = labels(&["A", "A", "A", "B", "B", "B"]);
        let swapped = labels(&["B", "B", "B", "A", "A", "A"]);
        let t1 = moderated_t(&m, &fwd).unwrap();
        let t2 = moderated_t(&m, &swapped).unwrap();
        for (a, b) in t1.rows().iter().zip(t2.rows()) {
            assert!((a.log2_fold_change + b.log2_fold_change).abs() < 1e-12);
            assert!((a.raw_p - b.raw_p).abs() < 1e-12);
        }

        let counts = count_matrix(
            &[("g1", &[10, 12, 14, 30, 28, 33]), ("g2", &[9, 9, 9, 9, 9, 9])],
            6,
        );
        let t1 = nb_wald(&counts, &fwd).unwrap();
        let t2 = nb_wald(&counts, &swapped).unwrap();
        for (a, b) in t1.rows().iter().zip(t2.rows()) {
            assert!((a.log2_fold_change + b.log2_fold_change).abs() < 1e-12);
            assert!((a.raw_p - b.raw_p).abs() < 1e-12);
        }
    }

    #[test]
    fn permuted_labels_balance_statistic_signs() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let m = transformed(&[("g", &[3.1, 0.2, 1.4, 2.8, 0.9, 2.2, 1.7, 0.4])], 8);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut assignment: Vec<&str> = vec!["A", "A", "A", "A", "B", "B", "B", "B"];
        let mut sign_sum = 0.0;
        let n_perm = 200;
        for _ in 0..n_perm {
            assignment.shuffle(&mut rng);
            let l = labels(&assignment);
            let r = ranking_stat(&m, &l, RankingStat::DiffOfClasses).unwrap();
            sign_sum += r.stats()[0].signum();
        }
        let mean_sign = sign_sum / n_perm as f64;
        assert!(
            mean_sign.abs() <= 0.3,
            "mean sign {mean_sign} outside [-0.3, 0.3]"
        );
    }

    proptest! {
        #[test]
        fn bh_matches_reference_exactly(ps in proptest::collection::vec(0.0f64..=1.0, 1..200)) {
            let fast = bh_adjust(&ps).unwrap();
            let slow = bh_reference(&ps);
            prop_assert_eq!(fast, slow);
        }

        #[test]
        fn bh_monotone_on_sorted_input(mut ps in proptest::collection::vec(0.0f64..=1.0, 1..100)) {
            ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let adj = bh_adjust(&ps).unwrap();
            for w in adj.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
        }

        #[test]
        fn ranking_invariant_under_row_permutation(seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n_genes = rng.random_range(2..12);
            let mut rows: Vec<(String, Vec<f64>)> = (0..n_genes)
                .map(|g| {
                    (
                        format!("g{g}"),
                        (0..6).map(|_| rng.random_range(-4.0..4.0)).collect(),
                    )
                })
                .collect();
            let l = labels(&["A", "A", "A", "B", "B", "B"]);
            let build = |rows: &[(String, Vec<f64>)]| {
                let ids: Vec<String> = rows.iter().map(|(id, _)| id.clone()).collect();
                let vals: Vec<f64> = rows.iter().flat_map(|(_, r)| r.iter().copied()).collect();
                TransformedMatrix::new(
                    ids,
                    (0..6).map(|i| format!("s{i}")).collect(),
                    vals,
                    TransformMethod::LogCpm,
                )
            };
            let before = ranking_stat(&build(&rows), &l, RankingStat::SignalToNoise).unwrap();
            rows.shuffle(&mut rng);
            let after = ranking_stat(&build(&rows), &l, RankingStat::SignalToNoise).unwrap();
            prop_assert_eq!(before.genes(), after.genes());
            prop_assert_eq!(before.stats(), after.stats());
        }
    }
}
