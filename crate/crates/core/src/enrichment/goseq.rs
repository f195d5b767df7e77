//! Bias-aware over-representation analysis: a monotone probability
//! weighting function links a per-gene covariate (transcript length or
//! expression level) to the chance of being called differentially
//! expressed, and each set is tested against the Wallenius law or a
//! weighted resampling null.

use super::wallenius::wallenius_tail;
use super::{Engine, EnrichmentTable, UniverseChoice};
use crate::corpus::GeneSetCollection;
use crate::diffexpr::bh_adjust;
use crate::error::{AuditError, Result};
use crate::seed::rng_for;
use rand::Rng;
use std::collections::{BTreeSet, HashMap};

/// How the per-set p-value is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoseqMethod {
    Wallenius,
    Resampling,
}

/// Isotonic fit of a 0/1 indicator against a bias covariate.
///
/// Genes are ordered by the covariate, exact covariate ties are pooled
/// into one block, the indicator is smoothed by pool-adjacent-violators
/// into a non-decreasing sequence, and the fitted values are clipped away
/// from 0 and 1 by 1/(2m). Returned in the original gene order. A constant
/// covariate therefore yields one flat block, the uninformative weighting.
pub fn pwf_fit(de_indicator: &[bool], bias: &[f64]) -> Result<Vec<f64>> {
    assert_eq!(de_indicator.len(), bias.len());
    let m = de_indicator.len();
    let de_count = de_indicator.iter().filter(|&&d| d).count();
    if de_count == 0 || de_count == m {
        return Err(AuditError::DegeneratePwf(format!(
            "{de_count} of {m} genes flagged as differentially expressed"
        )));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        bias[a]
            .partial_cmp(&bias[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.cmp(&b))
    });

    let mut level: Vec<f64> = Vec::with_capacity(m);
    let mut weight: Vec<usize> = Vec::with_capacity(m);
    let mut i = 0;
    while i < m {
        // pool exact covariate ties into a single starting block
        let mut j = i;
        let mut sum = 0.0;
        while j < m && bias[order[j]] == bias[order[i]] {
            sum += f64::from(u8::from(de_indicator[order[j]]));
            j += 1;
        }
        level.push(sum / (j - i) as f64);
        weight.push(j - i);
        i = j;
        // pool adjacent violators
        let mut b = level.len() - 1;
        while b > 0 && level[b - 1] > level[b] {
            let w = weight[b - 1] + weight[b];
            let pooled =
                (weight[b - 1] as f64 * level[b - 1] + weight[b] as f64 * level[b]) / w as f64;
            level[b - 1] = pooled;
            weight[b - 1] = w;
            level.pop();
            weight.pop();
            b -= 1;
        }
    }

    let clip_lo = 1.0 / (2.0 * m as f64);
    let clip_hi = 1.0 - clip_lo;
    let mut fitted = vec![0.0; m];
    let mut pos = 0;
    for (block_level, block_weight) in level.iter().zip(&weight) {
        for _ in 0..*block_weight {
            fitted[order[pos]] = block_level.clamp(clip_lo, clip_hi);
            pos += 1;
        }
    }
    Ok(fitted)
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    values.sum::<f64>() / n as f64
}

/// Run the bias-weighted over-representation engine.
///
/// `bias` must provide a covariate value for every tested gene. The
/// universe is either the tested genes annotated to at least one set or
/// all tested genes; the weighting function is fitted over that universe.
#[allow(clippy::too_many_arguments)]
pub fn goseq(
    de_genes: &BTreeSet<String>,
    tested: &BTreeSet<String>,
    sets: &GeneSetCollection,
    bias: &HashMap<String, f64>,
    method: GoseqMethod,
    universe: UniverseChoice,
    resamples: usize,
    seed: u64,
) -> Result<EnrichmentTable> {
    assert!(de_genes.is_subset(tested));
    for gene in tested {
        if !bias.contains_key(gene) {
            return Err(AuditError::BiasUnavailable(format!(
                "no covariate for gene `{gene}`"
            )));
        }
    }
    let universe_genes: Vec<&str> = match universe {
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
    let n_total = universe_genes.len();
    if n_total == 0 {
        return Err(AuditError::EmptyUniverse);
    }
    let position: HashMap<&str, usize> = universe_genes
        .iter()
        .enumerate()
        .map(|(i, &g)| (g, i))
        .collect();
    let indicator: Vec<bool> = universe_genes
        .iter()
        .map(|g| de_genes.contains(*g))
        .collect();
    let covariate: Vec<f64> = universe_genes.iter().map(|g| bias[*g]).collect();
    let weights = pwf_fit(&indicator, &covariate)?;
    let n_drawn = indicator.iter().filter(|&&d| d).count() as u64;

    struct SetStats {
        name: String,
        member_pos: Vec<usize>,
        k: u64,
        omega: f64,
    }
    let mut kept: Vec<SetStats> = Vec::new();
    let weight_total: f64 = weights.iter().sum();
    for set in sets.sets() {
        let member_pos: Vec<usize> = set
            .members
            .iter()
            .filter_map(|g| position.get(g.as_str()).copied())
            .collect();
        if member_pos.is_empty() {
            continue;
        }
        let k = member_pos
            .iter()
            .filter(|&&p| indicator[p])
            .count() as u64;
        let omega = if member_pos.len() == n_total {
            1.0
        } else {
            let w_in = mean(member_pos.iter().map(|&p| weights[p]), member_pos.len());
            let w_out = (weight_total - member_pos.iter().map(|&p| weights[p]).sum::<f64>())
                / (n_total - member_pos.len()) as f64;
            (w_in / (1.0 - w_in)) / (w_out / (1.0 - w_out))
        };
        kept.push(SetStats {
            name: set.name.clone(),
            member_pos,
            k,
            omega,
        });
    }
    if kept.is_empty() {
        return Err(AuditError::EmptyUniverse);
    }

    let raw_ps: Vec<f64> = match method {
        GoseqMethod::Wallenius => kept
            .iter()
            .map(|s| {
                let k_total = s.member_pos.len() as u64;
                if k_total == n_total as u64 {
                    return Ok(1.0);
                }
                let lower = (n_drawn + k_total).saturating_sub(n_total as u64);
                wallenius_tail(s.k.max(lower), n_total as u64, k_total, n_drawn, s.omega)
            })
            .collect::<Result<_>>()?,
        GoseqMethod::Resampling => {
            let mut rng = rng_for(seed, &["goseq", "resample"]);
            let mut exceed = vec![0u64; kept.len()];
            let mut sampled = vec![false; n_total];
            for _ in 0..resamples {
                for (flag, &w) in sampled.iter_mut().zip(&weights) {
                    *flag = rng.random::<f64>() < w;
                }
                for (set, count) in kept.iter().zip(exceed.iter_mut()) {
                    let overlap = set
                        .member_pos
                        .iter()
                        .filter(|&&p| sampled[p])
                        .count() as u64;
                    if overlap >= set.k {
                        *count += 1;
                    }
                }
            }
            exceed
                .iter()
                .map(|&b| (1.0 + b as f64) / (1.0 + resamples as f64))
                .collect()
        }
    };

    let adjusted = bh_adjust(&raw_ps)?;
    EnrichmentTable::from_raw(
        Engine::Goseq,
        kept.iter()
            .zip(raw_ps.iter().zip(&adjusted))
            .map(|(set, (&p, &adj))| (set.name.clone(), set.omega, p, adj))
            .collect(),
    )
}
