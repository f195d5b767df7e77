//! The full over-optimism study: seeded sample-label permutations, the
//! settings grid (goal x labeling x engine x target), per-setting stepwise
//! optimisation, and the aggregated report with plot data.

use crate::corpus::ConditionLabels;
use crate::enrichment::Engine;
use crate::error::{AuditError, Result};
use crate::multiverse::{
    build_graph, stepwise_optimize, EngineParams, Goal, OptimizationTrace, PipelineInputs,
};
use crate::seed::{rng_for, sub_seed};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write as _;

/// One assignment of conditions to samples: the true one or a seeded
/// permutation of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Labeling {
    TrueLabels,
    Permutation {
        index: usize,
        labels: ConditionLabels,
    },
}

impl Labeling {
    pub fn tag(&self) -> String {
        match self {
            Labeling::TrueLabels => "true".into(),
            Labeling::Permutation { index, .. } => format!("perm{index}"),
        }
    }

    pub fn is_permuted(&self) -> bool {
        matches!(self, Labeling::Permutation { .. })
    }

    pub fn labels<'a>(&'a self, true_labels: &'a ConditionLabels) -> &'a ConditionLabels {
        match self {
            Labeling::TrueLabels => true_labels,
            Labeling::Permutation { labels, .. } => labels,
        }
    }
}

fn binomial_capped(n: u64, k: u64, cap: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i + 1) as u128;
        if acc >= cap {
            return cap;
        }
    }
    acc
}

/// All ways to pick `k` positions out of `n`, lexicographically.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut chosen: Vec<usize> = (0..k).collect();
    if k == 0 || k > n {
        return vec![chosen];
    }
    loop {
        out.push(chosen.clone());
        // advance to the next combination
        let mut i = k;
        while i > 0 {
            i -= 1;
            if chosen[i] != i + n - k {
                chosen[i] += 1;
                for j in (i + 1)..k {
                    chosen[j] = chosen[j - 1] + 1;
                }
                break;
            }
            if i == 0 {
                return out;
            }
        }
    }
}

/// Draw `count` distinct label arrangements uniformly from all arrangements
/// with the same group sizes, excluding the true assignment.
pub fn generate_permutations(
    labels: &ConditionLabels,
    count: usize,
    seed: u64,
) -> Result<Vec<Labeling>> {
    assert!(count >= 1);
    let n = labels.n_samples() as u64;
    let (n1, _) = labels.group_sizes();
    let total = binomial_capped(n, n1 as u64, u128::MAX);
    let available = total - 1;
    if available < count as u128 {
        return Err(AuditError::InsufficientPermutations {
            available: available.min(u128::from(u64::MAX)) as u64,
            requested: count as u64,
        });
    }

    let mut rng = rng_for(seed, &["study", "label-permutations"]);
    let mut out = Vec::with_capacity(count);
    if total <= 100_000 {
        // enumerate every arrangement, drop the identity, shuffle, take
        let (c0, c1) = labels.conditions();
        let mut arrangements = Vec::with_capacity(total as usize);
        for chosen in combinations(labels.n_samples(), n1) {
            let mut assignment = vec![c1.to_string(); labels.n_samples()];
            for &i in &chosen {
                assignment[i] = c0.to_string();
            }
            if assignment != labels.assignment() {
                arrangements.push(assignment);
            }
        }
        use rand::seq::SliceRandom;
        arrangements.shuffle(&mut rng);
        for (index, assignment) in arrangements.into_iter().take(count).enumerate() {
            out.push(Labeling::Permutation {
                index: index + 1,
                labels: ConditionLabels::from_assignment(assignment)?,
            });
        }
    } else {
        // rejection-sample shuffles; the space dwarfs `count`
        let mut seen: BTreeSet<Vec<String>> = BTreeSet::new();
        while out.len() < count {
            let shuffled = labels.shuffled(&mut rng);
            if shuffled.assignment() == labels.assignment() {
                continue;
            }
            if seen.insert(shuffled.assignment().to_vec()) {
                out.push(Labeling::Permutation {
                    index: out.len() + 1,
                    labels: shuffled,
                });
            }
        }
    }
    Ok(out)
}

/// Grid definition: every combination of goal, labeling and engine is one
/// optimisation setting (targets are already embedded in the goals).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    pub engines: Vec<Engine>,
    pub goals: Vec<Goal>,
    pub label_permutations: usize,
    pub include_true_labels: bool,
    pub engine_permutations: usize,
    pub set_size_min: usize,
    pub set_size_max: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            engines: Engine::ALL.to_vec(),
            goals: vec![Goal::MaxDegs],
            label_permutations: 10,
            include_true_labels: true,
            engine_permutations: 1000,
            set_size_min: 5,
            set_size_max: 500,
        }
    }
}

impl StudyConfig {
    pub fn engine_params(&self) -> EngineParams {
        EngineParams {
            permutations: self.engine_permutations,
            min_size: self.set_size_min,
            max_size: self.set_size_max,
            ..EngineParams::default()
        }
    }
}

/// Outcome of one optimisation setting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SettingRecord {
    pub engine: String,
    pub goal: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub labeling: String,
    pub seed: u64,
    pub default_objective: f64,
    pub final_objective: f64,
    pub improved: bool,
    pub status: String,
    pub trace: String,
}

/// Aggregates per engine and goal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub engine: String,
    pub goal: String,
    pub settings: usize,
    pub improved: usize,
    pub median_improvement: f64,
    pub max_improvement: f64,
    /// Permuted-label settings where zero enriched sets became positive
    /// (only meaningful for the counting goal).
    pub zero_to_positive: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportMeta {
    pub tool_version: String,
    pub master_seed: u64,
    pub config: StudyConfig,
    /// Fixed analytical conventions that apply to every setting, logged
    /// for the audit trail.
    pub conventions: Conventions,
    /// Input file manifest, filled by the CLI. Execution-only knobs such
    /// as the thread count are deliberately absent: they never affect the
    /// results, and reports must be byte-identical across them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<serde_json::Value>,
}

/// Conventions held constant across all settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Conventions {
    /// Statistic used to build ranked lists from DE results.
    pub de_ranking_metric: String,
    /// Adjusted-p cutoff for the DE gene lists feeding the ORA engines.
    pub de_alpha: f64,
    /// Order in which preprocessing is applied within every pipeline.
    pub preprocessing_order: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions {
            de_ranking_metric: "sign(lfc) * -log10(raw_p)".into(),
            de_alpha: 0.05,
            preprocessing_order: "collapse-duplicates, prefilter".into(),
        }
    }
}

/// The study report: one record per setting plus per-engine/goal summaries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyReport {
    pub meta: ReportMeta,
    pub records: Vec<SettingRecord>,
    pub summaries: Vec<SummaryRow>,
}

/// A report together with the per-setting traces (written as separate
/// artifacts).
#[derive(Debug, Clone)]
pub struct GridOutput {
    pub report: StudyReport,
    pub traces: Vec<(String, OptimizationTrace)>,
}

fn sanitize(token: &str) -> String {
    token
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
        .collect()
}

fn setting_identity(goal: &Goal, engine: Engine, labeling: &Labeling) -> String {
    let mut id = format!("{}_{}", engine.tag(), goal.tag());
    if let Some(target) = goal.target() {
        let _ = write!(id, "_{}", sanitize(target));
    }
    let _ = write!(id, "_{}", labeling.tag());
    id
}

fn setting_seed(master: u64, goal: &Goal, engine: Engine, labeling: &Labeling) -> u64 {
    sub_seed(
        master,
        &[
            "setting",
            goal.tag(),
            goal.target().unwrap_or(""),
            engine.tag(),
            &labeling.tag(),
        ],
    )
}

/// Run one optimisation setting: build the graph, optimise stepwise, and
/// record the outcome.
pub fn run_setting(
    goal: &Goal,
    engine: Engine,
    labeling: &Labeling,
    inputs: &PipelineInputs,
    params: &EngineParams,
    master_seed: u64,
) -> (SettingRecord, OptimizationTrace) {
    let labels = labeling.labels(inputs.labels);
    let setting_inputs = PipelineInputs { labels, ..*inputs };
    let seed = setting_seed(master_seed, goal, engine, labeling);
    let graph = build_graph(engine, goal, setting_inputs.capabilities());
    let trace = stepwise_optimize(&graph, goal, &setting_inputs, params, seed);
    let identity = setting_identity(goal, engine, labeling);
    let failed = !trace.default_objective.is_finite() && !trace.final_objective.is_finite();
    let record = SettingRecord {
        engine: engine.tag().to_string(),
        goal: goal.tag().to_string(),
        target: goal.target().map(str::to_string),
        labeling: labeling.tag(),
        seed,
        default_objective: trace.default_objective,
        final_objective: trace.final_objective,
        improved: goal.improves(trace.final_objective, trace.default_objective),
        status: if failed { "failed".into() } else { "ok".into() },
        trace: format!("trace_{identity}.json"),
    };
    (record, trace)
}

/// Execute every setting of the grid and assemble the report.
pub fn run_grid(
    config: &StudyConfig,
    inputs: &PipelineInputs,
    master_seed: u64,
) -> Result<GridOutput> {
    use rayon::prelude::*;

    let mut labelings: Vec<Labeling> = Vec::new();
    if config.include_true_labels {
        labelings.push(Labeling::TrueLabels);
    }
    if config.label_permutations > 0 && !config.engines.is_empty() && !config.goals.is_empty() {
        labelings.extend(generate_permutations(
            inputs.labels,
            config.label_permutations,
            master_seed,
        )?);
    }

    let mut settings: Vec<(&Goal, Engine, &Labeling)> = Vec::new();
    for goal in &config.goals {
        for labeling in &labelings {
            for &engine in &config.engines {
                settings.push((goal, engine, labeling));
            }
        }
    }

    let params = config.engine_params();
    let outcomes: Vec<(SettingRecord, OptimizationTrace)> = settings
        .par_iter()
        .map(|(goal, engine, labeling)| {
            run_setting(goal, *engine, labeling, inputs, &params, master_seed)
        })
        .collect();
    Ok(assemble_output(config, master_seed, outcomes))
}

/// Order the outcomes canonically, aggregate summaries, and attach the
/// meta block.
pub fn assemble_output(
    config: &StudyConfig,
    master_seed: u64,
    mut outcomes: Vec<(SettingRecord, OptimizationTrace)>,
) -> GridOutput {
    // canonical record order, independent of scheduling
    outcomes.sort_by(|a, b| a.0.trace.cmp(&b.0.trace));

    let mut summaries = Vec::new();
    for &engine in &config.engines {
        for goal in &config.goals {
            let group: Vec<&SettingRecord> = outcomes
                .iter()
                .map(|(r, _)| r)
                .filter(|r| {
                    r.engine == engine.tag()
                        && r.goal == goal.tag()
                        && r.target.as_deref() == goal.target()
                })
                .collect();
            if group.is_empty() {
                continue;
            }
            let mut improvements: Vec<f64> = group
                .iter()
                .filter(|r| r.default_objective.is_finite() && r.final_objective.is_finite())
                .map(|r| {
                    if goal.maximize() {
                        r.final_objective - r.default_objective
                    } else {
                        r.default_objective - r.final_objective
                    }
                })
                .collect();
            improvements.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = if improvements.is_empty() {
                0.0
            } else {
                let mid = improvements.len() / 2;
                if improvements.len() % 2 == 1 {
                    improvements[mid]
                } else {
                    0.5 * (improvements[mid - 1] + improvements[mid])
                }
            };
            let max = improvements.last().copied().unwrap_or(0.0);
            let zero_to_positive = group
                .iter()
                .filter(|r| {
                    goal.maximize()
                        && r.labeling != "true"
                        && r.default_objective == 0.0
                        && r.final_objective > 0.0
                })
                .count();
            summaries.push(SummaryRow {
                engine: engine.tag().to_string(),
                goal: goal.tag().to_string(),
                settings: group.len(),
                improved: group.iter().filter(|r| r.improved).count(),
                median_improvement: median,
                max_improvement: max,
                zero_to_positive,
            });
        }
    }

    let (records, traces): (Vec<SettingRecord>, Vec<(String, OptimizationTrace)>) = outcomes
        .into_iter()
        .map(|(record, trace)| {
            let name = record.trace.clone();
            (record, (name, trace))
        })
        .unzip();

    GridOutput {
        report: StudyReport {
            meta: ReportMeta {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                master_seed,
                config: config.clone(),
                conventions: Conventions::default(),
                inputs: None,
            },
            records,
            summaries,
        },
        traces,
    }
}

/// One row of the paired default-versus-optimised export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlotRow {
    pub engine: String,
    pub goal: String,
    pub labeling: String,
    pub target: String,
    pub default_value: f64,
    pub optimized_value: f64,
}

/// The paired values behind the default-versus-optimised displays.
pub fn plot_data(report: &StudyReport) -> Result<Vec<PlotRow>> {
    if report.records.is_empty() {
        return Err(AuditError::EmptyReport);
    }
    Ok(report
        .records
        .iter()
        .map(|r| PlotRow {
            engine: r.engine.clone(),
            goal: r.goal.clone(),
            labeling: r.labeling.clone(),
            target: r.target.clone().unwrap_or_default(),
            default_value: r.default_objective,
            optimized_value: r.final_objective,
        })
        .collect())
}
