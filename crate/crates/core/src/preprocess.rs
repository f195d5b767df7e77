//! Data preprocessing options exploited by the study: pre-filtering of
//! lowly expressed genes, duplicate-id collapse after id conversion,
//! median-of-ratios normalisation and the two expression transforms.
//!
//! Everything here is a pure function of immutable inputs.

use crate::corpus::{ConditionLabels, CountMatrix, IdMap};
use crate::error::{AuditError, Result};
use std::collections::HashMap;
use std::fmt::Write as _;

/// Pre-filtering variants. Thresholds are strict in the sense of the
/// removal condition: `TotalAtLeast(t)` removes genes with *less than* `t`
/// total counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrefilterRule {
    /// Keep genes whose row sum is at least the threshold.
    TotalAtLeast(u64),
    /// Keep genes with CPM >= `cpm_cutoff` in at least `min_samples` samples.
    CpmInSamples { cpm_cutoff: f64, min_samples: usize },
    /// Expression-level filter: CPM >= 10e6 / median library size in at
    /// least `min(group sizes)` samples, and a row sum of at least 15.
    ExprFilter,
}

/// How to resolve several source rows mapping to one target id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DuplicatePolicy {
    /// Retain the source row occurring first in id-map order.
    KeepFirst,
    /// Per cell, the rounded (half away from zero) mean of the source rows.
    RoundedMean,
}

/// Continuous expression scale produced by [`transform`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformMethod {
    /// log2((count + 0.5) / (libsize + 1) * 1e6)
    LogCpm,
    /// log2(count / size_factor + 1)
    ShiftedLogVst,
}

impl TransformMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            TransformMethod::LogCpm => "log-cpm",
            TransformMethod::ShiftedLogVst => "shifted-log-vst",
        }
    }
}

/// Dense matrix of transformed (finite, real) expression values.
#[derive(Debug, Clone)]
pub struct TransformedMatrix {
    gene_ids: Vec<String>,
    samples: Vec<String>,
    values: Vec<f64>,
    method: TransformMethod,
    index: HashMap<String, usize>,
}

impl TransformedMatrix {
    pub fn new(
        gene_ids: Vec<String>,
        samples: Vec<String>,
        values: Vec<f64>,
        method: TransformMethod,
    ) -> Self {
        assert_eq!(values.len(), gene_ids.len() * samples.len());
        debug_assert!(values.iter().all(|v| v.is_finite()));
        let index = gene_ids
            .iter()
            .enumerate()
            .map(|(i, g)| (g.clone(), i))
            .collect();
        TransformedMatrix {
            gene_ids,
            samples,
            values,
            method,
            index,
        }
    }

    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    pub fn samples(&self) -> &[String] {
        &self.samples
    }

    pub fn method(&self) -> TransformMethod {
        self.method
    }

    pub fn value(&self, gene: usize, sample: usize) -> f64 {
        self.values[gene * self.samples.len() + sample]
    }

    pub fn row(&self, gene: usize) -> &[f64] {
        let w = self.samples.len();
        &self.values[gene * w..(gene + 1) * w]
    }

    pub fn gene_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("gene_id");
        for s in &self.samples {
            out.push('\t');
            out.push_str(s);
        }
        out.push('\n');
        for g in 0..self.n_genes() {
            out.push_str(&self.gene_ids[g]);
            for s in 0..self.n_samples() {
                let _ = write!(out, "\t{}", self.value(g, s));
            }
            out.push('\n');
        }
        out
    }
}

fn median_of(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    assert!(n > 0);
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    median_of(&v)
}

fn checked_library_sizes(matrix: &CountMatrix) -> Result<Vec<u64>> {
    let libs = matrix.library_sizes();
    for (s, &lib) in libs.iter().enumerate() {
        if lib == 0 {
            return Err(AuditError::ZeroLibrary(matrix.samples()[s].clone()));
        }
    }
    Ok(libs)
}

/// Counts per million: value(g, s) = count(g, s) / libsize(s) * 1e6.
pub fn cpm(matrix: &CountMatrix) -> Result<Vec<f64>> {
    let libs = checked_library_sizes(matrix)?;
    let w = matrix.n_samples();
    let mut out = Vec::with_capacity(matrix.n_genes() * w);
    for g in 0..matrix.n_genes() {
        for (s, &lib) in libs.iter().enumerate() {
            out.push(matrix.count(g, s) as f64 / lib as f64 * 1e6);
        }
    }
    Ok(out)
}

/// Apply a pre-filtering rule, preserving row order.
pub fn prefilter(
    matrix: &CountMatrix,
    rule: PrefilterRule,
    labels: &ConditionLabels,
) -> Result<CountMatrix> {
    let keep: Vec<usize> = match rule {
        PrefilterRule::TotalAtLeast(t) => (0..matrix.n_genes())
            .filter(|&g| matrix.row(g).iter().sum::<u64>() >= t)
            .collect(),
        PrefilterRule::CpmInSamples {
            cpm_cutoff,
            min_samples,
        } => {
            assert!(cpm_cutoff > 0.0 && min_samples >= 1);
            let values = cpm(matrix)?;
            let w = matrix.n_samples();
            (0..matrix.n_genes())
                .filter(|&g| {
                    values[g * w..(g + 1) * w]
                        .iter()
                        .filter(|&&v| v >= cpm_cutoff)
                        .count()
                        >= min_samples
                })
                .collect()
        }
        PrefilterRule::ExprFilter => {
            let libs = checked_library_sizes(matrix)?;
            let med = median(&libs.iter().map(|&l| l as f64).collect::<Vec<_>>());
            let cutoff = 10.0 * 1e6 / med;
            let (n1, n2) = labels.group_sizes();
            let min_group = n1.min(n2);
            let values = cpm(matrix)?;
            let w = matrix.n_samples();
            (0..matrix.n_genes())
                .filter(|&g| {
                    let enough_samples = values[g * w..(g + 1) * w]
                        .iter()
                        .filter(|&&v| v >= cutoff)
                        .count()
                        >= min_group;
                    enough_samples && matrix.row(g).iter().sum::<u64>() >= 15
                })
                .collect()
        }
    };
    if keep.is_empty() {
        return Err(AuditError::AllGenesFiltered);
    }
    Ok(matrix.subset_genes(&keep))
}

/// Re-key the matrix through the id map and resolve duplicated targets.
///
/// Output rows are ordered by the first matrix row mapping to each target.
/// `KeepFirst` retains the source occurring first in map order;
/// `RoundedMean` averages all source rows cell-wise.
pub fn collapse_duplicates(
    matrix: &CountMatrix,
    map: &IdMap,
    policy: DuplicatePolicy,
) -> Result<CountMatrix> {
    if map.is_empty() {
        return Ok(matrix.clone());
    }
    // target -> source gene rows, in matrix order
    let mut target_order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<usize>> = HashMap::new();
    for (g, id) in matrix.gene_ids().iter().enumerate() {
        let target = map
            .target_of(id)
            .ok_or_else(|| AuditError::UnmappedGene(id.clone()))?;
        let entry = groups.entry(target.to_string());
        if let std::collections::hash_map::Entry::Vacant(_) = entry {
            target_order.push(target.to_string());
        }
        entry.or_default().push(g);
    }

    let w = matrix.n_samples();
    let mut gene_ids = Vec::with_capacity(target_order.len());
    let mut counts = Vec::with_capacity(target_order.len() * w);
    let mut lengths = matrix.lengths().map(|_| Vec::with_capacity(target_order.len()));
    for target in target_order {
        let sources = &groups[&target];
        match policy {
            DuplicatePolicy::KeepFirst => {
                let &first = sources
                    .iter()
                    .min_by_key(|&&g| map.source_rank(&matrix.gene_ids()[g]).unwrap())
                    .unwrap();
                counts.extend_from_slice(matrix.row(first));
                if let Some(lens) = &mut lengths {
                    lens.push(matrix.lengths().unwrap()[first]);
                }
            }
            DuplicatePolicy::RoundedMean => {
                let n = sources.len() as f64;
                for s in 0..w {
                    let mean =
                        sources.iter().map(|&g| matrix.count(g, s) as f64).sum::<f64>() / n;
                    counts.push(mean.round() as u64);
                }
                if let Some(lens) = &mut lengths {
                    let mean = sources
                        .iter()
                        .map(|&g| matrix.lengths().unwrap()[g] as f64)
                        .sum::<f64>()
                        / n;
                    lens.push(mean.round().max(1.0) as u64);
                }
            }
        }
        gene_ids.push(target);
    }
    CountMatrix::new(gene_ids, matrix.samples().to_vec(), counts, lengths)
}

/// Median-of-ratios size factors, rescaled to geometric mean 1.
pub fn size_factors(matrix: &CountMatrix) -> Result<Vec<f64>> {
    let reference: Vec<usize> = (0..matrix.n_genes())
        .filter(|&g| matrix.row(g).iter().all(|&c| c > 0))
        .collect();
    if reference.is_empty() {
        return Err(AuditError::NoReferenceGenes);
    }
    let log_geomeans: Vec<f64> = reference
        .iter()
        .map(|&g| {
            matrix.row(g).iter().map(|&c| (c as f64).ln()).sum::<f64>()
                / matrix.n_samples() as f64
        })
        .collect();
    let mut factors = Vec::with_capacity(matrix.n_samples());
    for s in 0..matrix.n_samples() {
        let ratios: Vec<f64> = reference
            .iter()
            .zip(&log_geomeans)
            .map(|(&g, &lg)| ((matrix.count(g, s) as f64).ln() - lg).exp())
            .collect();
        factors.push(median(&ratios));
    }
    let log_mean = factors.iter().map(|f| f.ln()).sum::<f64>() / factors.len() as f64;
    let scale = log_mean.exp();
    for f in &mut factors {
        *f /= scale;
    }
    Ok(factors)
}

/// Transform counts onto a continuous expression scale.
pub fn transform(matrix: &CountMatrix, method: TransformMethod) -> Result<TransformedMatrix> {
    let values = match method {
        TransformMethod::LogCpm => {
            let libs = checked_library_sizes(matrix)?;
            let w = matrix.n_samples();
            let mut out = Vec::with_capacity(matrix.n_genes() * w);
            for g in 0..matrix.n_genes() {
                for (s, &lib) in libs.iter().enumerate() {
                    let v = (matrix.count(g, s) as f64 + 0.5) / (lib as f64 + 1.0) * 1e6;
                    out.push(v.log2());
                }
            }
            out
        }
        TransformMethod::ShiftedLogVst => {
            let factors = size_factors(matrix)?;
            let w = matrix.n_samples();
            let mut out = Vec::with_capacity(matrix.n_genes() * w);
            for g in 0..matrix.n_genes() {
                for (s, &f) in factors.iter().enumerate() {
                    out.push((matrix.count(g, s) as f64 / f + 1.0).log2());
                }
            }
            out
        }
    };
    Ok(TransformedMatrix::new(
        matrix.gene_ids().to_vec(),
        matrix.samples().to_vec(),
        values,
        method,
    ))
}
