//! The gene set analysis engines and their shared result table.
//!
//! Five engines are provided: hypergeometric over-representation analysis
//! (with an optional conservative EASE-style variant), a bias-weighted
//! over-representation engine with Wallenius and resampling p-values,
//! weighted-KS enrichment in phenotype-permutation and preranked variants,
//! and a down-weighted scoring engine driven by a label-permutation null.

mod goseq;
mod gsea;
mod hypergeom;
mod ora;
mod padog;
mod wallenius;

pub use goseq::{goseq, pwf_fit, GoseqMethod};
pub use gsea::{enrichment_score, gsea_phenotype, gsea_preranked};
pub use hypergeom::hypergeom_tail;
pub use ora::ora;
pub use padog::padog;
pub use wallenius::wallenius_tail;

use crate::error::{AuditError, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// The implemented engines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Engine {
    Ora,
    Goseq,
    GseaPhenotype,
    GseaPreranked,
    Padog,
}

impl Engine {
    pub const ALL: [Engine; 5] = [
        Engine::Ora,
        Engine::Goseq,
        Engine::GseaPhenotype,
        Engine::GseaPreranked,
        Engine::Padog,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Engine::Ora => "ora",
            Engine::Goseq => "goseq",
            Engine::GseaPhenotype => "gsea-phenotype",
            Engine::GseaPreranked => "gsea-preranked",
            Engine::Padog => "padog",
        }
    }

    /// Significance threshold on the adjusted column: BH engines call a set
    /// enriched below 0.05, the permutation q-value engines below 0.25.
    pub fn significance_threshold(&self) -> f64 {
        match self {
            Engine::Ora | Engine::Goseq | Engine::Padog => 0.05,
            Engine::GseaPhenotype | Engine::GseaPreranked => 0.25,
        }
    }
}

impl std::str::FromStr for Engine {
    type Err = AuditError;

    fn from_str(s: &str) -> Result<Self> {
        Engine::ALL
            .iter()
            .copied()
            .find(|e| e.tag() == s)
            .ok_or_else(|| AuditError::UnknownEngine(s.to_string()))
    }
}

/// Which gene population backs the contingency table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UniverseChoice {
    /// Genes annotated to at least one set of the collection (intersected
    /// with the tested genes).
    AnnotatedGenes,
    /// Every tested gene.
    AllTestedGenes,
}

/// Configuration of the weighted-KS engines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsConfig {
    /// Weighting exponent; one of 0, 1, 1.5 or 2.
    pub exponent: f64,
    /// Number of null permutations.
    pub permutations: usize,
    /// Smallest admissible set size after intersection with the list.
    pub min_size: usize,
    /// Largest admissible set size after intersection with the list.
    pub max_size: usize,
}

impl Default for EsConfig {
    fn default() -> Self {
        EsConfig {
            exponent: 1.0,
            permutations: 1000,
            min_size: 5,
            max_size: 500,
        }
    }
}

impl EsConfig {
    pub fn validate(&self) -> Result<()> {
        if ![0.0, 1.0, 1.5, 2.0].contains(&self.exponent) {
            return Err(AuditError::InvalidConfig(format!(
                "exponent must be one of 0, 1, 1.5, 2 (got {})",
                self.exponent
            )));
        }
        if self.permutations == 0 {
            return Err(AuditError::InvalidConfig("permutations must be >= 1".into()));
        }
        Ok(())
    }
}

/// One gene set's result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnrichmentRow {
    pub set: String,
    /// Odds ratio for the over-representation engines, NES for the
    /// weighted-KS engines, standardised score for the weighting engine.
    pub statistic: f64,
    pub raw_p: f64,
    /// BH-adjusted p, or the permutation q-value for the KS engines.
    pub adjusted: f64,
    pub dense_rank: u32,
    pub relative_rank: f64,
    pub significant: bool,
}

/// Per-set results of one engine run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnrichmentTable {
    pub engine: Engine,
    rows: Vec<EnrichmentRow>,
}

impl EnrichmentTable {
    /// Build a table from per-set `(name, statistic, raw_p, adjusted)`
    /// rows, assigning ranks and significance flags.
    pub fn from_raw(
        engine: Engine,
        raw: Vec<(String, f64, f64, f64)>,
    ) -> Result<EnrichmentTable> {
        let rows = raw
            .into_iter()
            .map(|(set, statistic, raw_p, adjusted)| EnrichmentRow {
                set,
                statistic,
                raw_p,
                adjusted,
                dense_rank: 0,
                relative_rank: 0.0,
                significant: false,
            })
            .collect();
        assemble_ranks(EnrichmentTable { engine, rows })
    }

    pub fn rows(&self) -> &[EnrichmentRow] {
        &self.rows
    }

    pub fn get(&self, set: &str) -> Option<&EnrichmentRow> {
        self.rows.iter().find(|r| r.set == set)
    }

    /// Number of sets passing the engine's significance criterion.
    pub fn significant_count(&self) -> usize {
        self.rows.iter().filter(|r| r.significant).count()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "set\tstatistic\traw_p\tadjusted\tdense_rank\trelative_rank\tsignificant\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.set, r.statistic, r.raw_p, r.adjusted, r.dense_rank, r.relative_rank,
                r.significant
            );
        }
        out
    }
}

/// Assign dense ranks over the adjusted values and derive relative ranks
/// and significance flags.
///
/// Ties share a rank and ranks are consecutive over distinct values, so a
/// row with an adjusted value of 1 always lands on the maximum rank and a
/// relative rank of exactly 1.
pub fn assemble_ranks(mut table: EnrichmentTable) -> Result<EnrichmentTable> {
    if table.rows.is_empty() {
        return Err(AuditError::EmptyTable);
    }
    let mut distinct: Vec<f64> = table.rows.iter().map(|r| r.adjusted).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    let max_rank = distinct.len() as u32;
    let threshold = table.engine.significance_threshold();
    for row in &mut table.rows {
        let pos = distinct
            .binary_search_by(|v| v.partial_cmp(&row.adjusted).unwrap())
            .expect("adjusted value present in distinct list");
        row.dense_rank = pos as u32 + 1;
        row.relative_rank = f64::from(row.dense_rank) / f64::from(max_rank);
        row.significant = row.adjusted < threshold;
    }
    // deterministic presentation: best adjusted first, then statistic, name
    table.rows.sort_by(|a, b| {
        a.adjusted
            .partial_cmp(&b.adjusted)
            .unwrap()
            .then_with(|| b.statistic.abs().partial_cmp(&a.statistic.abs()).unwrap())
            .then_with(|| a.set.cmp(&b.set))
    });
    Ok(table)
}
