//! Configuration evaluation: run the configured preprocessing, DE and
//! enrichment pipeline for an engine, memoised on the canonical
//! configuration encoding.

use super::graph::{
    Assignment, BiasCovariate, Capabilities, ChoiceGraph, CollectionChoice, Setting,
};
use super::{objective, Goal};
use crate::corpus::{ConditionLabels, CountMatrix, GeneSetCollection, IdMap};
use crate::diffexpr::{
    de_gene_list, moderated_t, nb_wald, ranked_from_de, DeMethod, DeTable, RankingStat,
};
use crate::enrichment::{
    goseq, gsea_phenotype, gsea_preranked, ora, padog, Engine, EnrichmentTable, EsConfig,
    GoseqMethod, UniverseChoice,
};
use crate::error::{AuditError, Result};
use crate::preprocess::{
    collapse_duplicates, cpm, prefilter, transform, DuplicatePolicy, PrefilterRule,
    TransformMethod,
};
use std::cell::{Cell, RefCell};
use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

/// The data a pipeline run consumes.
#[derive(Clone, Copy)]
pub struct PipelineInputs<'a> {
    pub counts: &'a CountMatrix,
    pub labels: &'a ConditionLabels,
    pub collection: &'a GeneSetCollection,
    pub alt_collection: Option<&'a GeneSetCollection>,
    pub id_map: Option<&'a IdMap>,
}

impl<'a> PipelineInputs<'a> {
    pub fn capabilities(&self) -> Capabilities {
        Capabilities {
            has_id_map: self.id_map.map(|m| !m.is_empty()).unwrap_or(false),
            has_lengths: self.counts.lengths().is_some(),
            has_second_collection: self.alt_collection.is_some(),
        }
    }
}

/// Engine-level knobs that are fixed per run (and logged), not optimised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineParams {
    /// Permutations for the KS and weighting engines, resamples for the
    /// resampling p-value method.
    pub permutations: usize,
    pub min_size: usize,
    pub max_size: usize,
    /// Adjusted-p cutoff for the DE gene list feeding the ORA engines.
    pub de_alpha: f64,
    /// Conservative overlap-minus-one variant of the ORA engine.
    pub ease: bool,
}

impl Default for EngineParams {
    fn default() -> Self {
        EngineParams {
            permutations: 1000,
            min_size: 5,
            max_size: 500,
            de_alpha: 0.05,
            ease: false,
        }
    }
}

/// Typed view over the resolved settings with per-engine defaults.
struct SettingsView<'a> {
    settings: Vec<(&'static str, &'a Setting)>,
}

impl<'a> SettingsView<'a> {
    fn get(&self, id: &str) -> Option<&'a Setting> {
        self.settings
            .iter()
            .find(|(pid, _)| *pid == id)
            .map(|(_, s)| *s)
    }

    fn de_method(&self) -> DeMethod {
        match self.get("de_method") {
            Some(Setting::DeMethod(m)) => *m,
            _ => DeMethod::NbWald,
        }
    }

    fn prefilter_rule(&self) -> PrefilterRule {
        match self.get("prefilter") {
            Some(Setting::Prefilter(r)) => *r,
            _ => PrefilterRule::TotalAtLeast(10),
        }
    }

    fn duplicates(&self) -> DuplicatePolicy {
        match self.get("duplicates") {
            Some(Setting::Duplicates(p)) => *p,
            _ => DuplicatePolicy::KeepFirst,
        }
    }

    fn transform_method(&self) -> TransformMethod {
        match self.get("transform") {
            Some(Setting::Transform(t)) => *t,
            _ => TransformMethod::LogCpm,
        }
    }

    fn collection(&self) -> CollectionChoice {
        match self.get("collection") {
            Some(Setting::Collection(c)) => *c,
            _ => CollectionChoice::Primary,
        }
    }

    fn universe(&self) -> UniverseChoice {
        match self.get("universe") {
            Some(Setting::Universe(u)) => *u,
            _ => UniverseChoice::AnnotatedGenes,
        }
    }

    fn pvalue_method(&self) -> GoseqMethod {
        match self.get("pvalue_method") {
            Some(Setting::PvalueMethod(m)) => *m,
            _ => GoseqMethod::Wallenius,
        }
    }

    fn bias(&self, caps: Capabilities) -> BiasCovariate {
        match self.get("bias") {
            Some(Setting::Bias(b)) => *b,
            _ if caps.has_lengths => BiasCovariate::TranscriptLength,
            _ => BiasCovariate::MeanExpression,
        }
    }

    fn gene_stat(&self) -> RankingStat {
        match self.get("gene_stat") {
            Some(Setting::GeneStat(s)) => *s,
            _ => RankingStat::SignalToNoise,
        }
    }

    fn exponent(&self) -> f64 {
        match self.get("exponent") {
            Some(Setting::Exponent(e)) => *e,
            _ => 1.0,
        }
    }
}

fn de_table(
    matrix: &CountMatrix,
    labels: &ConditionLabels,
    method: DeMethod,
) -> Result<DeTable> {
    match method {
        DeMethod::NbWald => nb_wald(matrix, labels),
        DeMethod::ModeratedT => {
            let values = transform(matrix, TransformMethod::LogCpm)?;
            moderated_t(&values, labels)
        }
    }
}

fn bias_covariate(
    matrix: &CountMatrix,
    which: BiasCovariate,
) -> Result<HashMap<String, f64>> {
    match which {
        BiasCovariate::TranscriptLength => {
            let lengths = matrix
                .lengths()
                .ok_or_else(|| AuditError::BiasUnavailable("transcript length".into()))?;
            Ok(matrix
                .gene_ids()
                .iter()
                .zip(lengths)
                .map(|(g, &l)| (g.clone(), l as f64))
                .collect())
        }
        BiasCovariate::MeanExpression => {
            let values = cpm(matrix)?;
            let w = matrix.n_samples();
            Ok(matrix
                .gene_ids()
                .iter()
                .enumerate()
                .map(|(i, g)| {
                    let mean = values[i * w..(i + 1) * w].iter().sum::<f64>() / w as f64;
                    (g.clone(), mean)
                })
                .collect())
        }
    }
}

/// Intermediate stages of one pipeline run, for TSV inspection dumps.
#[derive(Debug, Clone, Default)]
pub struct Intermediates {
    pub transformed: Option<crate::preprocess::TransformedMatrix>,
    pub de_table: Option<DeTable>,
    pub ranked_list: Option<crate::diffexpr::RankedList>,
}

/// Run one fully configured pipeline end to end.
pub(crate) fn run_pipeline(
    inputs: &PipelineInputs,
    graph: &ChoiceGraph,
    resolved: &Assignment,
    params: &EngineParams,
    seed: u64,
) -> Result<EnrichmentTable> {
    run_pipeline_inner(inputs, graph, resolved, params, seed, None)
}

/// As [`run_pipeline`], additionally capturing the intermediate tables.
pub fn run_pipeline_capturing(
    inputs: &PipelineInputs,
    graph: &ChoiceGraph,
    resolved: &Assignment,
    params: &EngineParams,
    seed: u64,
) -> Result<(EnrichmentTable, Intermediates)> {
    let mut captured = Intermediates::default();
    let table = run_pipeline_inner(inputs, graph, resolved, params, seed, Some(&mut captured))?;
    Ok((table, captured))
}

fn run_pipeline_inner(
    inputs: &PipelineInputs,
    graph: &ChoiceGraph,
    resolved: &Assignment,
    params: &EngineParams,
    seed: u64,
    mut capture: Option<&mut Intermediates>,
) -> Result<EnrichmentTable> {
    let caps = inputs.capabilities();
    let view = SettingsView {
        settings: graph.settings_of(resolved),
    };

    // conversion and duplicate collapse happen whenever an id map exists,
    // with the configured (or default) policy
    let collapsed: CountMatrix = match inputs.id_map {
        Some(map) if !map.is_empty() => {
            collapse_duplicates(inputs.counts, map, view.duplicates())?
        }
        _ => inputs.counts.clone(),
    };
    let filtered = prefilter(&collapsed, view.prefilter_rule(), inputs.labels)?;
    let collection = match view.collection() {
        CollectionChoice::Primary => inputs.collection,
        CollectionChoice::Alternative => inputs.alt_collection.ok_or_else(|| {
            AuditError::InvalidConfig("alternative collection requested but not supplied".into())
        })?,
    };
    let es_config = EsConfig {
        exponent: view.exponent(),
        permutations: params.permutations,
        min_size: params.min_size,
        max_size: params.max_size,
    };
    let keep_de = |de: &DeTable, capture: &mut Option<&mut Intermediates>| {
        if let Some(c) = capture {
            c.de_table = Some(de.clone());
        }
    };

    match graph.engine {
        Engine::Ora => {
            let de = de_table(&filtered, inputs.labels, view.de_method())?;
            keep_de(&de, &mut capture);
            let genes = de_gene_list(&de, params.de_alpha);
            let tested: BTreeSet<String> = filtered.gene_ids().iter().cloned().collect();
            ora(&genes, collection, &tested, view.universe(), params.ease)
        }
        Engine::Goseq => {
            let de = de_table(&filtered, inputs.labels, view.de_method())?;
            keep_de(&de, &mut capture);
            let genes = de_gene_list(&de, params.de_alpha);
            let tested: BTreeSet<String> = filtered.gene_ids().iter().cloned().collect();
            let bias = bias_covariate(&filtered, view.bias(caps))?;
            goseq(
                &genes,
                &tested,
                collection,
                &bias,
                view.pvalue_method(),
                view.universe(),
                params.permutations,
                seed,
            )
        }
        Engine::GseaPhenotype => {
            let values = transform(&filtered, view.transform_method())?;
            if let Some(c) = &mut capture {
                c.transformed = Some(values.clone());
                c.ranked_list =
                    Some(crate::diffexpr::ranking_stat(&values, inputs.labels, view.gene_stat())?);
            }
            gsea_phenotype(
                &values,
                inputs.labels,
                collection,
                view.gene_stat(),
                &es_config,
                seed,
            )
        }
        Engine::GseaPreranked => {
            let de = de_table(&filtered, inputs.labels, view.de_method())?;
            keep_de(&de, &mut capture);
            let ranked = ranked_from_de(&de);
            if let Some(c) = &mut capture {
                c.ranked_list = Some(ranked.clone());
            }
            gsea_preranked(&ranked, collection, &es_config, seed)
        }
        Engine::Padog => {
            let values = transform(&filtered, view.transform_method())?;
            if let Some(c) = &mut capture {
                c.transformed = Some(values.clone());
                c.de_table = Some(moderated_t(&values, inputs.labels)?);
            }
            padog(
                &values,
                inputs.labels,
                collection,
                params.permutations,
                params.min_size,
                params.max_size,
                seed,
            )
        }
    }
}

/// Outcome of evaluating one configuration.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub table: Option<EnrichmentTable>,
    pub objective: f64,
    pub error: Option<String>,
}

/// Memoised configuration evaluator for one (inputs, engine, goal, seed)
/// setting. Failed evaluations score as the goal's worst value so the
/// search can discard a broken variant and move on.
pub struct Evaluator<'a> {
    inputs: PipelineInputs<'a>,
    graph: &'a ChoiceGraph,
    goal: &'a Goal,
    params: EngineParams,
    seed: u64,
    cache: RefCell<HashMap<String, Rc<Evaluation>>>,
    executions: Cell<usize>,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        inputs: PipelineInputs<'a>,
        graph: &'a ChoiceGraph,
        goal: &'a Goal,
        params: EngineParams,
        seed: u64,
    ) -> Self {
        Evaluator {
            inputs,
            graph,
            goal,
            params,
            seed,
            cache: RefCell::new(HashMap::new()),
            executions: Cell::new(0),
        }
    }

    /// Evaluate a (partial) assignment; repeated evaluation of the same
    /// canonical configuration reuses the cached result.
    pub fn evaluate(&self, assignment: &Assignment) -> Rc<Evaluation> {
        let key = self.graph.canonical_key(assignment);
        if let Some(hit) = self.cache.borrow().get(&key) {
            return Rc::clone(hit);
        }
        self.executions.set(self.executions.get() + 1);
        let resolved = self.graph.resolve(assignment);
        let evaluation = match run_pipeline(
            &self.inputs,
            self.graph,
            &resolved,
            &self.params,
            self.seed,
        ) {
            Ok(table) => Rc::new(Evaluation {
                objective: objective(&table, self.goal),
                table: Some(table),
                error: None,
            }),
            Err(e) => Rc::new(Evaluation {
                table: None,
                objective: self.goal.worst(),
                error: Some(e.to_string()),
            }),
        };
        self.cache
            .borrow_mut()
            .insert(key, Rc::clone(&evaluation));
        evaluation
    }

    /// Number of real pipeline executions (cache misses).
    pub fn executions(&self) -> usize {
        self.executions.get()
    }

    pub fn goal(&self) -> &Goal {
        self.goal
    }

    pub fn graph(&self) -> &ChoiceGraph {
        self.graph
    }
}
