//! Weighted per-set scoring against a label-permutation null. Genes that
//! appear in many sets are down-weighted so promiscuous genes cannot carry
//! every set at once.

use super::{Engine, EnrichmentTable};
use crate::corpus::{ConditionLabels, GeneSetCollection};
use crate::diffexpr::{bh_adjust, moderated_t};
use crate::error::{AuditError, Result};
use crate::preprocess::TransformedMatrix;
use crate::seed::rng_for;
use rayon::prelude::*;
use std::collections::HashMap;

struct KeptSet {
    name: String,
    gene_rows: Vec<usize>,
}

/// Run the down-weighted scoring engine.
pub fn padog(
    values: &TransformedMatrix,
    labels: &ConditionLabels,
    sets: &GeneSetCollection,
    permutations: usize,
    min_size: usize,
    max_size: usize,
    seed: u64,
) -> Result<EnrichmentTable> {
    assert!(permutations >= 1);
    let kept: Vec<KeptSet> = sets
        .sets()
        .iter()
        .filter_map(|set| {
            let gene_rows: Vec<usize> = set
                .members
                .iter()
                .filter_map(|g| values.gene_index(g))
                .collect();
            (gene_rows.len() >= min_size && gene_rows.len() <= max_size).then(|| KeptSet {
                name: set.name.clone(),
                gene_rows,
            })
        })
        .collect();
    if kept.is_empty() {
        return Err(AuditError::EmptyCollectionAfterFilter);
    }

    // per-gene frequency across the kept sets
    let mut frequency: HashMap<usize, u32> = HashMap::new();
    for set in &kept {
        for &g in &set.gene_rows {
            *frequency.entry(g).or_insert(0) += 1;
        }
    }
    let f_max = frequency.values().copied().max().unwrap();
    let f_min = frequency.values().copied().min().unwrap();
    let weight_of = |g: usize| -> f64 {
        if f_max == f_min {
            1.0
        } else {
            let f = frequency[&g];
            1.0 + (f64::from(f_max - f) / f64::from(f_max - f_min)).sqrt()
        }
    };
    let weights: HashMap<usize, f64> = frequency.keys().map(|&g| (g, weight_of(g))).collect();

    let scores_for = |labels: &ConditionLabels| -> Result<Vec<f64>> {
        let table = moderated_t(values, labels)?;
        let abs_t: Vec<f64> = table.rows().iter().map(|r| r.statistic.abs()).collect();
        Ok(kept
            .iter()
            .map(|set| {
                set.gene_rows
                    .iter()
                    .map(|&g| weights[&g] * abs_t[g])
                    .sum::<f64>()
                    / set.gene_rows.len() as f64
            })
            .collect())
    };

    let observed = scores_for(labels)?;
    let null_scores: Vec<Vec<f64>> = (0..permutations)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_for(seed, &["padog", "perm", &b.to_string()]);
            scores_for(&labels.shuffled(&mut rng))
        })
        .collect::<Result<_>>()?;

    let b_n = permutations as f64;
    let mut raw_ps = Vec::with_capacity(kept.len());
    let mut z_scores = Vec::with_capacity(kept.len());
    for (s, &obs) in observed.iter().enumerate() {
        let mean = null_scores.iter().map(|r| r[s]).sum::<f64>() / b_n;
        let var = null_scores
            .iter()
            .map(|r| (r[s] - mean).powi(2))
            .sum::<f64>()
            / (b_n - 1.0).max(1.0);
        let sd = var.sqrt();
        z_scores.push(if sd > 0.0 { (obs - mean) / sd } else { 0.0 });
        let exceed = null_scores.iter().filter(|r| r[s] >= obs).count();
        raw_ps.push((1.0 + exceed as f64) / (1.0 + b_n));
    }
    let adjusted = bh_adjust(&raw_ps)?;
    EnrichmentTable::from_raw(
        Engine::Padog,
        kept.iter()
            .enumerate()
            .map(|(s, set)| (set.name.clone(), z_scores[s], raw_ps[s], adjusted[s]))
            .collect(),
    )
}
