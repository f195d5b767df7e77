//! Weighted Kolmogorov-Smirnov enrichment: running-sum scores, a
//! phenotype-permutation variant that reranks the genes per permutation,
//! and a preranked variant whose null redraws the set memberships.

use super::{Engine, EnrichmentTable, EsConfig};
use crate::corpus::{ConditionLabels, GeneSetCollection};
use crate::diffexpr::{ranking_stat, RankedList, RankingStat};
use crate::error::{AuditError, Result};
use crate::preprocess::TransformedMatrix;
use crate::seed::rng_for;
use rayon::prelude::*;
use std::collections::{BTreeSet, HashMap};

fn hit_weight(stat: f64, exponent: f64) -> f64 {
    if exponent == 0.0 {
        1.0
    } else if exponent == 1.0 {
        stat.abs()
    } else if exponent == 2.0 {
        stat * stat
    } else {
        stat.abs().powf(exponent)
    }
}

/// Running-sum enrichment score over sorted member positions.
///
/// Between hits the sum decays linearly, so the path extrema sit directly
/// before and after hit positions; scanning members is enough.
pub(crate) fn es_from_positions(stats: &[f64], positions: &[usize], exponent: f64) -> f64 {
    let n = stats.len();
    let m = positions.len();
    debug_assert!(m >= 1 && m < n);
    let mut weights: Vec<f64> = positions
        .iter()
        .map(|&p| hit_weight(stats[p], exponent))
        .collect();
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        for w in &mut weights {
            *w /= total;
        }
    } else {
        // all member statistics are zero: fall back to equal weights
        weights.fill(1.0 / m as f64);
    }
    let miss = 1.0 / (n - m) as f64;
    let mut cum = 0.0;
    let mut max_dev = f64::NEG_INFINITY;
    let mut min_dev = f64::INFINITY;
    for (i, &p) in positions.iter().enumerate() {
        let drained = miss * (p - i) as f64;
        let before = cum - drained;
        if before < min_dev {
            min_dev = before;
        }
        cum += weights[i];
        let after = cum - drained;
        if after > max_dev {
            max_dev = after;
        }
    }
    if max_dev >= -min_dev {
        max_dev
    } else {
        min_dev
    }
}

/// Signed enrichment score of a member set within a ranked list.
pub fn enrichment_score(
    ranked: &RankedList,
    members: &BTreeSet<String>,
    exponent: f64,
) -> Result<f64> {
    let positions: Vec<usize> = ranked
        .genes()
        .iter()
        .enumerate()
        .filter(|(_, g)| members.contains(*g))
        .map(|(i, _)| i)
        .collect();
    if positions.is_empty() {
        return Err(AuditError::EmptySetInList(preview(members)));
    }
    if positions.len() == ranked.len() {
        return Err(AuditError::NoComplement(preview(members)));
    }
    Ok(es_from_positions(ranked.stats(), &positions, exponent))
}

fn preview(members: &BTreeSet<String>) -> String {
    let mut names: Vec<&str> = members.iter().take(3).map(String::as_str).collect();
    if members.len() > 3 {
        names.push("...");
    }
    names.join(",")
}

struct KeptSet {
    name: String,
    positions: Vec<usize>,
}

fn filter_sets(
    sets: &GeneSetCollection,
    position_of: &HashMap<&str, usize>,
    list_len: usize,
    cfg: &EsConfig,
) -> Result<Vec<KeptSet>> {
    let mut kept = Vec::new();
    for set in sets.sets() {
        let mut positions: Vec<usize> = set
            .members
            .iter()
            .filter_map(|g| position_of.get(g.as_str()).copied())
            .collect();
        positions.sort_unstable();
        let size = positions.len();
        if size >= cfg.min_size && size <= cfg.max_size && size < list_len {
            kept.push(KeptSet {
                name: set.name.clone(),
                positions,
            });
        }
    }
    if kept.is_empty() {
        return Err(AuditError::EmptyCollectionAfterFilter);
    }
    Ok(kept)
}

fn position_map(ranked: &RankedList) -> HashMap<&str, usize> {
    ranked
        .genes()
        .iter()
        .enumerate()
        .map(|(i, g)| (g.as_str(), i))
        .collect()
}

/// Normalise observed and null scores, derive permutation p-values and
/// pooled tail-ratio q-values, and assemble the table.
fn finalize(
    engine: Engine,
    names: Vec<String>,
    es_obs: Vec<f64>,
    es_null: Vec<Vec<f64>>, // [permutation][set]
) -> Result<EnrichmentTable> {
    let n_sets = names.len();
    let mut nes_obs = vec![0.0; n_sets];
    let mut raw_p = vec![1.0; n_sets];
    let mut null_pool: Vec<f64> = Vec::with_capacity(n_sets * es_null.len());

    for s in 0..n_sets {
        let mut pos_sum = 0.0;
        let mut pos_n = 0usize;
        let mut neg_sum = 0.0;
        let mut neg_n = 0usize;
        for row in &es_null {
            let e = row[s];
            if e > 0.0 {
                pos_sum += e;
                pos_n += 1;
            } else if e < 0.0 {
                neg_sum += e.abs();
                neg_n += 1;
            }
        }
        let mean_pos = (pos_n > 0).then(|| pos_sum / pos_n as f64);
        let mean_neg = (neg_n > 0).then(|| neg_sum / neg_n as f64);

        let es = es_obs[s];
        let (nes, p) = if es > 0.0 {
            match mean_pos {
                Some(mp) => {
                    let more_extreme = es_null.iter().filter(|r| r[s] > 0.0 && r[s] >= es).count();
                    (es / mp, (1.0 + more_extreme as f64) / (1.0 + pos_n as f64))
                }
                None => (0.0, 1.0),
            }
        } else if es < 0.0 {
            match mean_neg {
                Some(mn) => {
                    let more_extreme = es_null
                        .iter()
                        .filter(|r| r[s] < 0.0 && r[s].abs() >= es.abs())
                        .count();
                    (es / mn, (1.0 + more_extreme as f64) / (1.0 + neg_n as f64))
                }
                None => (0.0, 1.0),
            }
        } else {
            (0.0, 1.0)
        };
        nes_obs[s] = nes;
        raw_p[s] = p;

        for row in &es_null {
            let e = row[s];
            let nes_null = if e > 0.0 {
                mean_pos.map(|mp| e / mp).unwrap_or(0.0)
            } else if e < 0.0 {
                mean_neg.map(|mn| e / mn).unwrap_or(0.0)
            } else {
                0.0
            };
            null_pool.push(nes_null);
        }
    }

    // pooled tail-ratio q-values with pseudo-counts, kept in (0, 1]
    null_pool.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut obs_sorted = nes_obs.clone();
    obs_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pool_n = null_pool.len() as f64;
    let obs_n = obs_sorted.len() as f64;
    let tail_ge = |sorted: &[f64], v: f64| (sorted.len() - sorted.partition_point(|x| *x < v)) as f64;
    let tail_le = |sorted: &[f64], v: f64| sorted.partition_point(|x| *x <= v) as f64;
    let mut q: Vec<f64> = nes_obs
        .iter()
        .map(|&nes| {
            let (null_tail, obs_tail) = if nes >= 0.0 {
                (tail_ge(&null_pool, nes), tail_ge(&obs_sorted, nes))
            } else {
                (tail_le(&null_pool, nes), tail_le(&obs_sorted, nes))
            };
            let num = (1.0 + null_tail) / (1.0 + pool_n);
            let den = (1.0 + obs_tail) / (1.0 + obs_n);
            (num / den).min(1.0)
        })
        .collect();

    // monotonise from the most extreme NES inward, separately per sign
    let mut pos_idx: Vec<usize> = (0..n_sets).filter(|&s| nes_obs[s] >= 0.0).collect();
    pos_idx.sort_by(|&a, &b| nes_obs[b].partial_cmp(&nes_obs[a]).unwrap());
    let mut running = 0.0_f64;
    for &s in &pos_idx {
        running = running.max(q[s]);
        q[s] = running;
    }
    let mut neg_idx: Vec<usize> = (0..n_sets).filter(|&s| nes_obs[s] < 0.0).collect();
    neg_idx.sort_by(|&a, &b| nes_obs[a].partial_cmp(&nes_obs[b]).unwrap());
    let mut running = 0.0_f64;
    for &s in &neg_idx {
        running = running.max(q[s]);
        q[s] = running;
    }

    EnrichmentTable::from_raw(
        engine,
        names
            .into_iter()
            .enumerate()
            .map(|(s, name)| (name, nes_obs[s], raw_p[s], q[s]))
            .collect(),
    )
}

/// Weighted-KS enrichment with a phenotype-permutation null: each
/// permutation reshuffles the sample labels and reranks all genes.
pub fn gsea_phenotype(
    values: &TransformedMatrix,
    labels: &ConditionLabels,
    sets: &GeneSetCollection,
    stat: RankingStat,
    cfg: &EsConfig,
    seed: u64,
) -> Result<EnrichmentTable> {
    cfg.validate()?;
    let ranked = ranking_stat(values, labels, stat)?;
    let positions = position_map(&ranked);
    let kept = filter_sets(sets, &positions, ranked.len(), cfg)?;
    let es_obs: Vec<f64> = kept
        .iter()
        .map(|s| es_from_positions(ranked.stats(), &s.positions, cfg.exponent))
        .collect();

    let member_names: Vec<Vec<&str>> = kept
        .iter()
        .map(|s| {
            s.positions
                .iter()
                .map(|&p| ranked.genes()[p].as_str())
                .collect()
        })
        .collect();
    let es_null: Vec<Vec<f64>> = (0..cfg.permutations)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_for(seed, &["gsea-phenotype", "perm", &b.to_string()]);
            let shuffled = labels.shuffled(&mut rng);
            let ranked_b = ranking_stat(values, &shuffled, stat)?;
            let pos_b = position_map(&ranked_b);
            Ok(member_names
                .iter()
                .map(|members| {
                    let mut positions: Vec<usize> =
                        members.iter().map(|g| pos_b[g]).collect();
                    positions.sort_unstable();
                    es_from_positions(ranked_b.stats(), &positions, cfg.exponent)
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    finalize(
        Engine::GseaPhenotype,
        kept.into_iter().map(|s| s.name).collect(),
        es_obs,
        es_null,
    )
}

/// Weighted-KS enrichment on a fixed ranked list: the null draws random
/// member sets of identical size from the list.
pub fn gsea_preranked(
    ranked: &RankedList,
    sets: &GeneSetCollection,
    cfg: &EsConfig,
    seed: u64,
) -> Result<EnrichmentTable> {
    cfg.validate()?;
    let positions = position_map(ranked);
    let kept = filter_sets(sets, &positions, ranked.len(), cfg)?;
    let es_obs: Vec<f64> = kept
        .iter()
        .map(|s| es_from_positions(ranked.stats(), &s.positions, cfg.exponent))
        .collect();

    let sizes: Vec<usize> = kept.iter().map(|s| s.positions.len()).collect();
    let n = ranked.len();
    let es_null: Vec<Vec<f64>> = (0..cfg.permutations)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_for(seed, &["gsea-preranked", "perm", &b.to_string()]);
            sizes
                .iter()
                .map(|&size| {
                    let mut drawn = rand::seq::index::sample(&mut rng, n, size).into_vec();
                    drawn.sort_unstable();
                    es_from_positions(ranked.stats(), &drawn, cfg.exponent)
                })
                .collect()
        })
        .collect();

    finalize(
        Engine::GseaPreranked,
        kept.into_iter().map(|s| s.name).collect(),
        es_obs,
        es_null,
    )
}
