//! Over-representation analysis against a hypergeometric null.

use super::hypergeom::hypergeom_tail;
use super::{Engine, EnrichmentTable, UniverseChoice};
use crate::corpus::GeneSetCollection;
use crate::diffexpr::bh_adjust;
use crate::error::{AuditError, Result};
use std::collections::BTreeSet;

/// Haldane-Anscombe corrected sample odds ratio of the 2x2 overlap table.
fn odds_ratio(k: u64, n_total: u64, k_total: u64, n_drawn: u64) -> f64 {
    let a = k as f64 + 0.5;
    let b = (n_drawn - k) as f64 + 0.5;
    let c = (k_total - k) as f64 + 0.5;
    let d = (n_total - k_total - (n_drawn - k)) as f64 + 0.5;
    (a * d) / (b * c)
}

/// Test each set for over-representation of the differentially expressed
/// genes. Sets without members in the universe are excluded. With `ease`
/// the observed overlap is reduced by one, a conservative variant.
pub fn ora(
    de_genes: &BTreeSet<String>,
    sets: &GeneSetCollection,
    tested: &BTreeSet<String>,
    universe: UniverseChoice,
    ease: bool,
) -> Result<EnrichmentTable> {
    assert!(
        de_genes.is_subset(tested),
        "DE genes must be drawn from the tested genes"
    );
    let universe_genes: BTreeSet<&str> = match universe {
        UniverseChoice::AllTestedGenes => tested.iter().map(String::as_str).collect(),
        UniverseChoice::AnnotatedGenes => {
            let annotated = sets.annotated_genes();
            tested
                .iter()
                .map(String::as_str)
                .filter(|g| annotated.contains(g))
                .collect()
        }
    };
    let n_total = universe_genes.len() as u64;
    if n_total == 0 {
        return Err(AuditError::EmptyUniverse);
    }
    let de_in_universe: BTreeSet<&str> = de_genes
        .iter()
        .map(String::as_str)
        .filter(|g| universe_genes.contains(g))
        .collect();
    let n_drawn = de_in_universe.len() as u64;

    let mut names = Vec::new();
    let mut stats = Vec::new();
    let mut raw_ps = Vec::new();
    for set in sets.sets() {
        let members: Vec<&str> = set
            .members
            .iter()
            .map(String::as_str)
            .filter(|g| universe_genes.contains(g))
            .collect();
        let k_total = members.len() as u64;
        if k_total == 0 {
            continue;
        }
        let k = members
            .iter()
            .filter(|g| de_in_universe.contains(*g))
            .count() as u64;
        let lower = (n_drawn + k_total).saturating_sub(n_total);
        let k_eff = if ease { k.saturating_sub(1) } else { k }.max(lower);
        let raw_p = hypergeom_tail(k_eff, n_total, k_total, n_drawn)?;
        names.push(set.name.clone());
        stats.push(odds_ratio(k, n_total, k_total, n_drawn));
        raw_ps.push(raw_p);
    }
    if names.is_empty() {
        return Err(AuditError::EmptyUniverse);
    }
    let adjusted = bh_adjust(&raw_ps)?;
    EnrichmentTable::from_raw(
        Engine::Ora,
        names
            .into_iter()
            .zip(stats)
            .zip(raw_ps.iter().zip(&adjusted))
            .map(|((name, stat), (&p, &adj))| (name, stat, p, adj))
            .collect(),
    )
}
