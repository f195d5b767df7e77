//! Seeded synthetic RNA-seq counts: gamma-Poisson (negative binomial)
//! sampling, an optional shared log-normal factor per gene set and sample
//! to induce within-set correlation, and an optional spiked group effect.
//!
//! Every random draw comes from a stream keyed by its role (gene index,
//! set index, selection step), so generation order never changes results.

use crate::corpus::{ConditionLabels, CountMatrix, GeneSet, GeneSetCollection};
use crate::error::{AuditError, Result};
use crate::seed::rng_for;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Parameters of one simulated data set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSpec {
    pub genes: usize,
    pub samples_per_group: (usize, usize),
    pub base_mean: f64,
    pub dispersion: f64,
    /// Target pairwise correlation of counts within a declared gene set.
    pub within_set_correlation: f64,
    /// Fraction of genes whose group-2 mean is scaled by 2^lfc.
    pub de_fraction: f64,
    pub lfc: f64,
    pub seed: u64,
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec {
            genes: 1000,
            samples_per_group: (5, 5),
            base_mean: 100.0,
            dispersion: 0.1,
            within_set_correlation: 0.0,
            de_fraction: 0.0,
            lfc: 0.0,
            seed: 0,
        }
    }
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.genes >= 1
            && self.samples_per_group.0 >= 1
            && self.samples_per_group.1 >= 1
            && self.base_mean > 0.0
            && self.dispersion > 0.0
            && (0.0..1.0).contains(&self.within_set_correlation)
            && (0.0..=1.0).contains(&self.de_fraction);
        if ok {
            Ok(())
        } else {
            Err(AuditError::InvalidConfig(format!(
                "simulation parameters out of range: {self:?}"
            )))
        }
    }
}

/// Ground truth written next to a simulated data set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthRecord {
    /// Genes with a real group difference (empty when lfc = 0).
    pub de_genes: Vec<String>,
    /// Sets containing at least one truly differential gene.
    pub enriched_sets: Vec<String>,
}

fn gene_id(i: usize) -> String {
    format!("g{i:05}")
}

/// Simulate counts, labels and the ground-truth sidecar.
pub fn simulate(
    spec: &SimSpec,
    sets: Option<&GeneSetCollection>,
) -> Result<(CountMatrix, ConditionLabels, TruthRecord)> {
    spec.validate()?;
    if spec.within_set_correlation > 0.0 && sets.is_none() {
        return Err(AuditError::MissingSets);
    }
    let (n1, n2) = spec.samples_per_group;
    let n_samples = n1 + n2;
    let alpha = spec.dispersion;

    // spiked genes, drawn without replacement from a dedicated stream
    let n_de = (spec.de_fraction * spec.genes as f64).floor() as usize;
    let spiked: Vec<usize> = {
        let mut rng = rng_for(spec.seed, &["sim", "de-select"]);
        let mut drawn = rand::seq::index::sample(&mut rng, spec.genes, n_de).into_vec();
        drawn.sort_unstable();
        drawn
    };
    let spiked_lookup: std::collections::HashSet<usize> = spiked.iter().copied().collect();

    // per-(set, sample) latent factors with unit mean; a gene in several
    // sets follows the first set that contains it
    let latent_sigma_sq = {
        let c = spec.within_set_correlation;
        let mu = spec.base_mean;
        let denom = 1.0 - c * (1.0 + alpha);
        if denom <= 0.0 {
            10.0
        } else {
            (c * (mu + mu * mu * alpha) / (mu * mu * denom)).min(10.0)
        }
    };
    let mut set_of_gene: HashMap<usize, usize> = HashMap::new();
    let mut factors: Vec<Vec<f64>> = Vec::new();
    if spec.within_set_correlation > 0.0 {
        let collection = sets.unwrap();
        let ln_var = (1.0 + latent_sigma_sq).ln();
        let ln_sigma = ln_var.sqrt();
        for (s, set) in collection.sets().iter().enumerate() {
            let mut rng = rng_for(spec.seed, &["sim", "latent", &s.to_string()]);
            factors.push(
                (0..n_samples)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        (ln_sigma * z - 0.5 * ln_var).exp()
                    })
                    .collect(),
            );
            for member in &set.members {
                if let Some(stripped) = member.strip_prefix('g') {
                    if let Ok(idx) = stripped.parse::<usize>() {
                        set_of_gene.entry(idx).or_insert(s);
                    }
                }
            }
        }
    }

    let gamma = Gamma::new(1.0 / alpha, alpha).expect("positive dispersion");
    let fold = 2f64.powf(spec.lfc);
    let mut counts = Vec::with_capacity(spec.genes * n_samples);
    for g in 0..spec.genes {
        let mut rng = rng_for(spec.seed, &["sim", "gene", &g.to_string()]);
        let spiked_gene = spiked_lookup.contains(&g);
        let latent = set_of_gene.get(&g).map(|&s| &factors[s]);
        for j in 0..n_samples {
            let mut mu = spec.base_mean;
            if spiked_gene && j >= n1 {
                mu *= fold;
            }
            if let Some(l) = latent {
                mu *= l[j];
            }
            let noise: f64 = gamma.sample(&mut rng);
            let rate = mu * noise;
            let count = if rate > 0.0 {
                Poisson::new(rate).expect("positive rate").sample(&mut rng)
            } else {
                0.0
            };
            counts.push(count as u64);
        }
    }

    let gene_ids: Vec<String> = (0..spec.genes).map(gene_id).collect();
    let matrix = CountMatrix::new(
        gene_ids.clone(),
        (1..=n_samples).map(|i| format!("s{i}")).collect(),
        counts,
        None,
    )?;
    let labels = ConditionLabels::from_assignment(
        (0..n_samples)
            .map(|i| if i < n1 { "groupA".into() } else { "groupB".into() })
            .collect(),
    )?;

    let de_genes: Vec<String> = if spec.lfc == 0.0 {
        Vec::new()
    } else {
        spiked.iter().map(|&g| gene_id(g)).collect()
    };
    let enriched_sets = match sets {
        Some(collection) if !de_genes.is_empty() => collection
            .sets()
            .iter()
            .filter(|s| de_genes.iter().any(|g| s.members.contains(g)))
            .map(|s| s.name.clone())
            .collect(),
        _ => Vec::new(),
    };
    Ok((matrix, labels, TruthRecord { de_genes, enriched_sets }))
}

/// Seeded random gene set collection over the simulated gene ids.
pub fn random_collection(
    genes: usize,
    n_sets: usize,
    min_size: usize,
    max_size: usize,
    seed: u64,
) -> Result<GeneSetCollection> {
    assert!(min_size >= 1 && min_size <= max_size && max_size <= genes);
    let mut rng = rng_for(seed, &["sim", "collection"]);
    let sets = (0..n_sets)
        .map(|i| {
            let size = rand::Rng::random_range(&mut rng, min_size..=max_size);
            let members = rand::seq::index::sample(&mut rng, genes, size)
                .into_iter()
                .map(gene_id)
                .collect();
            GeneSet {
                name: format!("set{i:03}"),
                description: "simulated".into(),
                members,
            }
        })
        .collect();
    GeneSetCollection::new("simulated", sets)
}
