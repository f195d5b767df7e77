//! The dependency-aware choice graph: every analytical decision a user
//! could tweak, with its default, its ordered alternatives, and option
//! lists that may depend on an upstream choice.

use crate::diffexpr::{DeMethod, RankingStat};
use crate::enrichment::{Engine, GoseqMethod, UniverseChoice};
use crate::preprocess::{DuplicatePolicy, PrefilterRule, TransformMethod};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Which of the two supplied gene set collections to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollectionChoice {
    Primary,
    Alternative,
}

/// Bias covariate for the weighted over-representation engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasCovariate {
    TranscriptLength,
    MeanExpression,
}

/// The concrete pipeline effect of selecting an option.
#[derive(Debug, Clone, PartialEq)]
pub enum Setting {
    DeMethod(DeMethod),
    Prefilter(PrefilterRule),
    Duplicates(DuplicatePolicy),
    Transform(TransformMethod),
    Collection(CollectionChoice),
    Universe(UniverseChoice),
    PvalueMethod(GoseqMethod),
    Bias(BiasCovariate),
    GeneStat(RankingStat),
    Exponent(f64),
}

/// One selectable option of a choice point.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionSpec {
    pub id: &'static str,
    pub setting: Setting,
}

/// Preprocessing choices shape the input data; parameter choices configure
/// the engine itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChoiceKind {
    Preprocessing,
    Parameter,
}

/// One option list, possibly conditional on an upstream adoption.
#[derive(Debug, Clone)]
pub struct OptionBranch {
    /// `None` applies unconditionally; `Some((choice, option))` applies
    /// when that upstream option is the resolved one.
    pub when: Option<(&'static str, &'static str)>,
    /// Default first, alternatives in their fixed tie-break order.
    pub options: Vec<OptionSpec>,
}

/// A single analytical decision.
#[derive(Debug, Clone)]
pub struct ChoicePoint {
    pub id: &'static str,
    pub kind: ChoiceKind,
    pub branches: Vec<OptionBranch>,
}

impl ChoicePoint {
    fn unconditional(id: &'static str, kind: ChoiceKind, options: Vec<OptionSpec>) -> Self {
        debug_assert!(options.len() >= 2);
        ChoicePoint {
            id,
            kind,
            branches: vec![OptionBranch { when: None, options }],
        }
    }

    /// The option list active under the given resolved upstream choices.
    pub fn active_branch(&self, resolved_upstream: &BTreeMap<String, String>) -> &OptionBranch {
        self.branches
            .iter()
            .find(|b| match &b.when {
                None => true,
                Some((choice, option)) => {
                    resolved_upstream.get(*choice).map(String::as_str) == Some(*option)
                }
            })
            .unwrap_or_else(|| {
                panic!(
                    "no branch of `{}` matches the upstream assignment {:?}",
                    self.id, resolved_upstream
                )
            })
    }
}

/// A partial assignment of option ids to choice points.
pub type Assignment = BTreeMap<String, String>;

/// Ordered, dependency-aware set of choice points for one engine and goal.
#[derive(Debug, Clone)]
pub struct ChoiceGraph {
    pub engine: Engine,
    pub goal_tag: String,
    points: Vec<ChoicePoint>,
}

impl ChoiceGraph {
    pub fn new(engine: Engine, goal_tag: impl Into<String>, points: Vec<ChoicePoint>) -> Self {
        ChoiceGraph {
            engine,
            goal_tag: goal_tag.into(),
            points,
        }
    }

    pub fn points(&self) -> &[ChoicePoint] {
        &self.points
    }

    pub fn point(&self, id: &str) -> Option<&ChoicePoint> {
        self.points.iter().find(|p| p.id == id)
    }

    /// Complete a partial assignment: walk the points in order, resolve
    /// each point's active branch against the upstream resolution, take
    /// the assigned option if it belongs to the active branch and the
    /// branch default otherwise. Assignments to inactive branches or to
    /// absent points are ignored, so two configurations differing only
    /// there share a canonical form.
    pub fn resolve(&self, assignment: &Assignment) -> Assignment {
        let mut resolved = Assignment::new();
        for point in &self.points {
            let branch = point.active_branch(&resolved);
            let option = assignment
                .get(point.id)
                .filter(|picked| branch.options.iter().any(|o| o.id == picked.as_str()))
                .cloned()
                .unwrap_or_else(|| branch.options[0].id.to_string());
            resolved.insert(point.id.to_string(), option);
        }
        resolved
    }

    /// Canonical encoding of a configuration: sorted `choice=option` pairs
    /// over the active points only.
    pub fn canonical_key(&self, assignment: &Assignment) -> String {
        let resolved = self.resolve(assignment);
        resolved
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }

    /// The settings selected by a resolved assignment, in graph order.
    pub fn settings_of(&self, resolved: &Assignment) -> Vec<(&'static str, &Setting)> {
        let mut out = Vec::with_capacity(self.points.len());
        let mut upstream = Assignment::new();
        for point in &self.points {
            let branch = point.active_branch(&upstream);
            let id = resolved
                .get(point.id)
                .map(String::as_str)
                .unwrap_or(branch.options[0].id);
            let option = branch
                .options
                .iter()
                .find(|o| o.id == id)
                .unwrap_or(&branch.options[0]);
            out.push((point.id, &option.setting));
            upstream.insert(point.id.to_string(), option.id.to_string());
        }
        out
    }

    /// Number of dependency-resolved configurations in the full product.
    pub fn configuration_count(&self) -> u64 {
        fn walk(points: &[ChoicePoint], upstream: &mut Assignment, idx: usize) -> u64 {
            if idx == points.len() {
                return 1;
            }
            let branch_options: Vec<String> = points[idx]
                .active_branch(upstream)
                .options
                .iter()
                .map(|o| o.id.to_string())
                .collect();
            let mut total = 0u64;
            for option in branch_options {
                upstream.insert(points[idx].id.to_string(), option);
                total = total.saturating_add(walk(points, upstream, idx + 1));
            }
            upstream.remove(points[idx].id);
            total
        }
        walk(&self.points, &mut Assignment::new(), 0)
    }
}

/// What the supplied inputs make available to the graph builder.
#[derive(Debug, Clone, Copy, Default)]
pub struct Capabilities {
    pub has_id_map: bool,
    pub has_lengths: bool,
    pub has_second_collection: bool,
}

fn de_method_point() -> ChoicePoint {
    ChoicePoint::unconditional(
        "de_method",
        ChoiceKind::Preprocessing,
        vec![
            OptionSpec {
                id: "nb-wald",
                setting: Setting::DeMethod(DeMethod::NbWald),
            },
            OptionSpec {
                id: "moderated-t",
                setting: Setting::DeMethod(DeMethod::ModeratedT),
            },
        ],
    )
}

/// Pre-filter options depend on the adopted DE method.
fn prefilter_point_de_dependent() -> ChoicePoint {
    ChoicePoint {
        id: "prefilter",
        kind: ChoiceKind::Preprocessing,
        branches: vec![
            OptionBranch {
                when: Some(("de_method", "nb-wald")),
                options: vec![
                    OptionSpec {
                        id: "total-10",
                        setting: Setting::Prefilter(PrefilterRule::TotalAtLeast(10)),
                    },
                    OptionSpec {
                        id: "total-50",
                        setting: Setting::Prefilter(PrefilterRule::TotalAtLeast(50)),
                    },
                ],
            },
            OptionBranch {
                when: Some(("de_method", "moderated-t")),
                options: vec![
                    OptionSpec {
                        id: "expr-filter",
                        setting: Setting::Prefilter(PrefilterRule::ExprFilter),
                    },
                    OptionSpec {
                        id: "cpm-1-in-2",
                        setting: Setting::Prefilter(PrefilterRule::CpmInSamples {
                            cpm_cutoff: 1.0,
                            min_samples: 2,
                        }),
                    },
                ],
            },
        ],
    }
}

fn prefilter_point_plain() -> ChoicePoint {
    ChoicePoint::unconditional(
        "prefilter",
        ChoiceKind::Preprocessing,
        vec![
            OptionSpec {
                id: "total-10",
                setting: Setting::Prefilter(PrefilterRule::TotalAtLeast(10)),
            },
            OptionSpec {
                id: "expr-filter",
                setting: Setting::Prefilter(PrefilterRule::ExprFilter),
            },
        ],
    )
}

fn duplicates_point() -> ChoicePoint {
    ChoicePoint::unconditional(
        "duplicates",
        ChoiceKind::Preprocessing,
        vec![
            OptionSpec {
                id: "keep-first",
                setting: Setting::Duplicates(DuplicatePolicy::KeepFirst),
            },
            OptionSpec {
                id: "rounded-mean",
                setting: Setting::Duplicates(DuplicatePolicy::RoundedMean),
            },
        ],
    )
}

fn transform_point() -> ChoicePoint {
    ChoicePoint::unconditional(
        "transform",
        ChoiceKind::Preprocessing,
        vec![
            OptionSpec {
                id: "log-cpm",
                setting: Setting::Transform(TransformMethod::LogCpm),
            },
            OptionSpec {
                id: "shifted-log-vst",
                setting: Setting::Transform(TransformMethod::ShiftedLogVst),
            },
        ],
    )
}

fn collection_point() -> ChoicePoint {
    ChoicePoint::unconditional(
        "collection",
        ChoiceKind::Parameter,
        vec![
            OptionSpec {
                id: "collection-a",
                setting: Setting::Collection(CollectionChoice::Primary),
            },
            OptionSpec {
                id: "collection-b",
                setting: Setting::Collection(CollectionChoice::Alternative),
            },
        ],
    )
}

fn universe_point() -> ChoicePoint {
    ChoicePoint::unconditional(
        "universe",
        ChoiceKind::Parameter,
        vec![
            OptionSpec {
                id: "annotated",
                setting: Setting::Universe(UniverseChoice::AnnotatedGenes),
            },
            OptionSpec {
                id: "all-tested",
                setting: Setting::Universe(UniverseChoice::AllTestedGenes),
            },
        ],
    )
}

fn pvalue_method_point() -> ChoicePoint {
    ChoicePoint::unconditional(
        "pvalue_method",
        ChoiceKind::Parameter,
        vec![
            OptionSpec {
                id: "wallenius",
                setting: Setting::PvalueMethod(GoseqMethod::Wallenius),
            },
            OptionSpec {
                id: "resampling",
                setting: Setting::PvalueMethod(GoseqMethod::Resampling),
            },
        ],
    )
}

fn bias_point() -> ChoicePoint {
    ChoicePoint::unconditional(
        "bias",
        ChoiceKind::Parameter,
        vec![
            OptionSpec {
                id: "length",
                setting: Setting::Bias(BiasCovariate::TranscriptLength),
            },
            OptionSpec {
                id: "mean-expr",
                setting: Setting::Bias(BiasCovariate::MeanExpression),
            },
        ],
    )
}

fn gene_stat_point() -> ChoicePoint {
    ChoicePoint::unconditional(
        "gene_stat",
        ChoiceKind::Parameter,
        vec![
            OptionSpec {
                id: "signal-to-noise",
                setting: Setting::GeneStat(RankingStat::SignalToNoise),
            },
            OptionSpec {
                id: "t-statistic",
                setting: Setting::GeneStat(RankingStat::TStatistic),
            },
            OptionSpec {
                id: "diff-of-classes",
                setting: Setting::GeneStat(RankingStat::DiffOfClasses),
            },
        ],
    )
}

fn exponent_point() -> ChoicePoint {
    ChoicePoint::unconditional(
        "exponent",
        ChoiceKind::Parameter,
        vec![
            OptionSpec {
                id: "exp-1",
                setting: Setting::Exponent(1.0),
            },
            OptionSpec {
                id: "exp-0",
                setting: Setting::Exponent(0.0),
            },
            OptionSpec {
                id: "exp-1.5",
                setting: Setting::Exponent(1.5),
            },
            OptionSpec {
                id: "exp-2",
                setting: Setting::Exponent(2.0),
            },
        ],
    )
}

/// Build the per-engine choice graph.
///
/// The gene-set-collection point exists only when the goal maximises the
/// number of enriched sets and a second collection was supplied; the
/// duplicate-collapse point only when an id map was supplied; the
/// length-bias option only when gene lengths are available.
pub fn build_graph(engine: Engine, goal: &super::Goal, caps: Capabilities) -> ChoiceGraph {
    let with_collection =
        matches!(goal, super::Goal::MaxDegs) && caps.has_second_collection;
    let mut points = Vec::new();
    match engine {
        Engine::Ora | Engine::Goseq => {
            points.push(de_method_point());
            points.push(prefilter_point_de_dependent());
            if caps.has_id_map {
                points.push(duplicates_point());
            }
            if with_collection {
                points.push(collection_point());
            }
            points.push(universe_point());
            if engine == Engine::Goseq {
                points.push(pvalue_method_point());
                if caps.has_lengths {
                    points.push(bias_point());
                }
            }
        }
        Engine::GseaPhenotype => {
            points.push(prefilter_point_plain());
            points.push(transform_point());
            points.push(gene_stat_point());
            points.push(exponent_point());
            if with_collection {
                points.push(collection_point());
            }
        }
        Engine::GseaPreranked => {
            points.push(de_method_point());
            points.push(prefilter_point_de_dependent());
            if caps.has_id_map {
                points.push(duplicates_point());
            }
            if with_collection {
                points.push(collection_point());
            }
            points.push(exponent_point());
        }
        Engine::Padog => {
            points.push(prefilter_point_plain());
            if caps.has_id_map {
                points.push(duplicates_point());
            }
            points.push(transform_point());
        }
    }
    ChoiceGraph::new(engine, goal.tag(), points)
}
