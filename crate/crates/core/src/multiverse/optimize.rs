//! Stepwise greedy optimisation over the choice graph, and an exhaustive
//! search used as its oracle on small configuration spaces.
//!
//! The greedy walk visits the choice points in graph order. At each step
//! every alternative of the point's active option list is evaluated with
//! the previously adopted options upstream and defaults downstream; the
//! alternative with the strictly greatest improvement is adopted,
//! earlier-listed options winning exact ties, and the incumbent is
//! retained when nothing strictly improves.

use super::evaluate::{EngineParams, Evaluator, PipelineInputs};
use super::graph::{Assignment, ChoiceGraph};
use super::Goal;
use crate::error::{AuditError, Result};
use serde::{Deserialize, Serialize};

/// One evaluated alternative within a step. A non-finite objective (a
/// failed evaluation) serialises as `null`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluatedOption {
    pub option: String,
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One step of the stepwise process.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceStep {
    pub choice: String,
    pub evaluated: Vec<EvaluatedOption>,
    pub adopted: String,
    pub objective_after: f64,
}

/// Full record of one optimisation process.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub engine: String,
    pub goal: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub default_objective: f64,
    pub steps: Vec<TraceStep>,
    pub final_objective: f64,
    pub final_config: Assignment,
}

impl OptimizationTrace {
    /// Weakly-monotone-improvement check over the recorded step sequence.
    pub fn is_monotone(&self, maximize: bool) -> bool {
        let mut current = self.default_objective;
        for step in &self.steps {
            let ok = if maximize {
                step.objective_after >= current
            } else {
                step.objective_after <= current
            };
            if !ok {
                return false;
            }
            current = step.objective_after;
        }
        current == self.final_objective
    }
}

/// Stepwise greedy search against an arbitrary objective callback.
///
/// The callback receives a partial assignment (adopted upstream options
/// plus the candidate); resolution against the graph fills defaults. It is
/// called once per distinct candidate, so callers wanting memoisation can
/// wrap their own cache (the pipeline evaluator already has one).
pub fn stepwise_search<F>(
    graph: &ChoiceGraph,
    goal: &Goal,
    mut eval: F,
) -> OptimizationTrace
where
    F: FnMut(&Assignment) -> (f64, Option<String>),
{
    let mut adopted = Assignment::new();
    let (default_objective, _) = eval(&adopted);
    let mut current = default_objective;
    let mut steps = Vec::with_capacity(graph.points().len());

    for point in graph.points() {
        let upstream = graph.resolve(&adopted);
        let branch = point.active_branch(&upstream);
        let incumbent_id = branch.options[0].id;

        let mut evaluated = Vec::with_capacity(branch.options.len() - 1);
        let mut best: Option<(usize, f64)> = None;
        for (i, option) in branch.options.iter().enumerate().skip(1) {
            let mut candidate = adopted.clone();
            candidate.insert(point.id.to_string(), option.id.to_string());
            let (value, error) = eval(&candidate);
            evaluated.push(EvaluatedOption {
                option: option.id.to_string(),
                objective: value,
                error,
            });
            if goal.improves(value, current) {
                let beats_best = match best {
                    None => true,
                    Some((_, b)) => goal.improves(value, b),
                };
                if beats_best {
                    best = Some((i, value));
                }
            }
        }
        let adopted_id = match best {
            Some((i, value)) => {
                let id = branch.options[i].id;
                adopted.insert(point.id.to_string(), id.to_string());
                current = value;
                id
            }
            None => incumbent_id,
        };
        steps.push(TraceStep {
            choice: point.id.to_string(),
            evaluated,
            adopted: adopted_id.to_string(),
            objective_after: current,
        });
    }

    OptimizationTrace {
        engine: graph.engine.tag().to_string(),
        goal: goal.tag().to_string(),
        target: goal.target().map(str::to_string),
        default_objective,
        steps,
        final_objective: current,
        final_config: graph.resolve(&adopted),
    }
}

/// Default configuration-count cap for the exhaustive search.
pub const DEFAULT_SEARCH_CAP: u64 = 10_000;

/// Exhaustive search over the dependency-resolved configuration product.
/// Refuses spaces larger than `cap` (see [`DEFAULT_SEARCH_CAP`]).
pub fn exhaustive_search<F>(
    graph: &ChoiceGraph,
    goal: &Goal,
    cap: u64,
    mut eval: F,
) -> Result<(Assignment, f64)>
where
    F: FnMut(&Assignment) -> (f64, Option<String>),
{
    let count = graph.configuration_count();
    if count > cap {
        return Err(AuditError::SearchSpaceTooLarge { found: count, cap });
    }
    let mut best: Option<(Assignment, f64)> = None;
    let points = graph.points();
    // depth-first product in graph order; first optimum wins ties
    fn descend<F>(
        graph: &ChoiceGraph,
        points: &[super::graph::ChoicePoint],
        idx: usize,
        assignment: &mut Assignment,
        goal: &Goal,
        eval: &mut F,
        best: &mut Option<(Assignment, f64)>,
    ) where
        F: FnMut(&Assignment) -> (f64, Option<String>),
    {
        if idx == points.len() {
            let (value, _) = eval(assignment);
            let better = match best {
                None => true,
                Some((_, b)) => goal.improves(value, *b),
            };
            if better {
                *best = Some((graph.resolve(assignment), value));
            }
            return;
        }
        let upstream = graph.resolve(assignment);
        let options: Vec<String> = points[idx]
            .active_branch(&upstream)
            .options
            .iter()
            .map(|o| o.id.to_string())
            .collect();
        for option in options {
            assignment.insert(points[idx].id.to_string(), option);
            descend(graph, points, idx + 1, assignment, goal, eval, best);
        }
        assignment.remove(points[idx].id);
    }
    let mut assignment = Assignment::new();
    descend(
        graph,
        points,
        0,
        &mut assignment,
        goal,
        &mut eval,
        &mut best,
    );
    Ok(best.expect("non-empty configuration space"))
}

/// Run the stepwise process on real pipeline inputs.
pub fn stepwise_optimize(
    graph: &ChoiceGraph,
    goal: &Goal,
    inputs: &PipelineInputs,
    params: &EngineParams,
    seed: u64,
) -> OptimizationTrace {
    let evaluator = Evaluator::new(*inputs, graph, goal, *params, seed);
    stepwise_search(graph, goal, |assignment| {
        let e = evaluator.evaluate(assignment);
        (e.objective, e.error.clone())
    })
}

/// Exhaustively evaluate the configuration space on real pipeline inputs.
pub fn exhaustive_optimize(
    graph: &ChoiceGraph,
    goal: &Goal,
    inputs: &PipelineInputs,
    params: &EngineParams,
    seed: u64,
    cap: u64,
) -> Result<(Assignment, f64)> {
    let evaluator = Evaluator::new(*inputs, graph, goal, *params, seed);
    exhaustive_search(graph, goal, cap, |assignment| {
        let e = evaluator.evaluate(assignment);
        (e.objective, e.error.clone())
    })
}
