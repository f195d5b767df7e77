//! The multiverse of analysis configurations: an ordered choice graph per
//! engine, a memoised pipeline evaluator, the three optimisation goals and
//! the stepwise greedy search that mimics a result-driven analyst.

mod evaluate;
mod graph;
mod optimize;

pub use evaluate::{
    run_pipeline_capturing, EngineParams, Evaluation, Evaluator, Intermediates, PipelineInputs,
};
pub use graph::{
    build_graph, Assignment, BiasCovariate, Capabilities, ChoiceGraph, ChoiceKind, ChoicePoint,
    CollectionChoice, OptionBranch, OptionSpec, Setting,
};
pub use optimize::{
    exhaustive_optimize, exhaustive_search, stepwise_optimize, stepwise_search, EvaluatedOption,
    OptimizationTrace, TraceStep, DEFAULT_SEARCH_CAP,
};

use crate::enrichment::EnrichmentTable;
use serde::{Deserialize, Serialize};

/// What the hypothetical analyst is optimising for.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Goal {
    /// Maximise the number of differentially enriched gene sets.
    MaxDegs,
    /// Minimise the adjusted p-value (or q-value) of one target set.
    MinAdjP { target: String },
    /// Minimise the relative rank of one target set.
    MinRelRank { target: String },
}

impl Goal {
    pub fn tag(&self) -> &'static str {
        match self {
            Goal::MaxDegs => "max-degs",
            Goal::MinAdjP { .. } => "min-adjp",
            Goal::MinRelRank { .. } => "min-rel-rank",
        }
    }

    pub fn target(&self) -> Option<&str> {
        match self {
            Goal::MaxDegs => None,
            Goal::MinAdjP { target } | Goal::MinRelRank { target } => Some(target),
        }
    }

    /// Higher objective values are better only for the counting goal.
    pub fn maximize(&self) -> bool {
        matches!(self, Goal::MaxDegs)
    }

    /// The objective value of a failed evaluation.
    pub fn worst(&self) -> f64 {
        if self.maximize() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    }

    /// Is `candidate` a strict improvement over `incumbent`?
    pub fn improves(&self, candidate: f64, incumbent: f64) -> bool {
        if self.maximize() {
            candidate > incumbent
        } else {
            candidate < incumbent
        }
    }
}

/// Read one goal's objective off an assembled enrichment table. A target
/// set absent from the table scores the worst legitimate value, 1.
pub fn objective(table: &EnrichmentTable, goal: &Goal) -> f64 {
    match goal {
        Goal::MaxDegs => table.significant_count() as f64,
        Goal::MinAdjP { target } => table.get(target).map(|r| r.adjusted).unwrap_or(1.0),
        Goal::MinRelRank { target } => {
            table.get(target).map(|r| r.relative_rank).unwrap_or(1.0)
        }
    }
}
