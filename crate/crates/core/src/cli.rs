//! Configuration resolution and artifact writing behind the command-line
//! surface. Everything here delegates to the library APIs; the binary is a
//! thin shell over these functions.

use crate::corpus::{
    parse_count_matrix, parse_gene_sets, parse_id_map, parse_labels, ConditionLabels,
    CountMatrix, GeneSetCollection, IdMap,
};
use crate::enrichment::Engine;
use crate::error::{AuditError, Result};
use crate::multiverse::{Goal, PipelineInputs};
use crate::study::{
    assemble_output, generate_permutations, plot_data, run_grid, run_setting, GridOutput,
    Labeling, StudyConfig, StudyReport,
};
use crate::synthdata::{random_collection, simulate, SimSpec};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Keys shared by the config file and the command-line flags. The config
/// file wins on conflicts, with a warning to standard error.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub counts: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub sets: Option<PathBuf>,
    pub sets_b: Option<PathBuf>,
    pub id_map: Option<PathBuf>,
    pub engines: Option<Vec<String>>,
    pub goals: Option<Vec<String>>,
    pub target_sets: Option<Vec<String>>,
    pub permutations: Option<usize>,
    pub include_true_labels: Option<bool>,
    pub seed: Option<u64>,
    pub engine_permutations: Option<usize>,
    pub set_size_min: Option<usize>,
    pub set_size_max: Option<usize>,
    pub threads: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<ConfigFile> {
        let text = std::fs::read_to_string(path).map_err(|e| AuditError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| AuditError::InvalidConfig(format!("{}: {e}", path.display())))
    }

    /// Merge flag values into the file values; the file wins.
    pub fn merged_with_flags(mut self, flags: ConfigFile) -> ConfigFile {
        fn pick<T: PartialEq + std::fmt::Debug>(
            name: &str,
            file: Option<T>,
            flag: Option<T>,
        ) -> Option<T> {
            match (file, flag) {
                (Some(c), Some(f)) => {
                    if c != f {
                        eprintln!(
                            "warning: `{name}` given both on the command line ({f:?}) and in \
                             the config file ({c:?}); the config file wins"
                        );
                    }
                    Some(c)
                }
                (Some(c), None) => Some(c),
                (None, flag) => flag,
            }
        }
        self.counts = pick("counts", self.counts, flags.counts);
        self.labels = pick("labels", self.labels, flags.labels);
        self.sets = pick("sets", self.sets, flags.sets);
        self.sets_b = pick("sets_b", self.sets_b, flags.sets_b);
        self.id_map = pick("id_map", self.id_map, flags.id_map);
        self.engines = pick("engines", self.engines, flags.engines);
        self.goals = pick("goals", self.goals, flags.goals);
        self.target_sets = pick("target_sets", self.target_sets, flags.target_sets);
        self.permutations = pick("permutations", self.permutations, flags.permutations);
        self.include_true_labels = pick(
            "include_true_labels",
            self.include_true_labels,
            flags.include_true_labels,
        );
        self.seed = pick("seed", self.seed, flags.seed);
        self.engine_permutations = pick(
            "engine_permutations",
            self.engine_permutations,
            flags.engine_permutations,
        );
        self.set_size_min = pick("set_size_min", self.set_size_min, flags.set_size_min);
        self.set_size_max = pick("set_size_max", self.set_size_max, flags.set_size_max);
        self.threads = pick("threads", self.threads, flags.threads);
        self
    }
}

/// Fully validated run description.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub counts: PathBuf,
    pub labels: PathBuf,
    pub sets: PathBuf,
    pub sets_b: Option<PathBuf>,
    pub id_map: Option<PathBuf>,
    pub study: StudyConfig,
    pub seed: u64,
}

fn parse_goal_names(names: &[String], targets: &[String]) -> Result<Vec<Goal>> {
    let mut goals = Vec::new();
    for name in names {
        match name.as_str() {
            "max-degs" => goals.push(Goal::MaxDegs),
            "min-adjp" | "min-rel-rank" => {
                if targets.is_empty() {
                    return Err(AuditError::InvalidConfig(format!(
                        "goal `{name}` needs at least one --target-set"
                    )));
                }
                for target in targets {
                    goals.push(match name.as_str() {
                        "min-adjp" => Goal::MinAdjP {
                            target: target.clone(),
                        },
                        _ => Goal::MinRelRank {
                            target: target.clone(),
                        },
                    });
                }
            }
            other => {
                return Err(AuditError::InvalidConfig(format!(
                    "unknown goal `{other}` (expected max-degs, min-adjp or min-rel-rank)"
                )))
            }
        }
    }
    Ok(goals)
}

fn require_file(kind: &str, path: Option<PathBuf>) -> Result<PathBuf> {
    let path =
        path.ok_or_else(|| AuditError::InvalidConfig(format!("missing required `{kind}`")))?;
    if !path.is_file() {
        return Err(AuditError::InvalidConfig(format!(
            "{kind} file `{}` does not exist",
            path.display()
        )));
    }
    Ok(path)
}

/// Validate the merged configuration into a runnable description.
pub fn resolve_run(config: ConfigFile) -> Result<ResolvedRun> {
    let counts = require_file("counts", config.counts)?;
    let labels = require_file("labels", config.labels)?;
    let sets = require_file("sets", config.sets)?;
    let sets_b = config.sets_b.map(|p| require_file("sets_b", Some(p))).transpose()?;
    let id_map = config.id_map.map(|p| require_file("id_map", Some(p))).transpose()?;
    let seed = config
        .seed
        .ok_or_else(|| AuditError::InvalidConfig("a --seed is mandatory".into()))?;

    let engine_names = config
        .engines
        .unwrap_or_else(|| Engine::ALL.iter().map(|e| e.tag().to_string()).collect());
    let engines: Vec<Engine> = engine_names
        .iter()
        .map(|name| name.parse())
        .collect::<Result<_>>()?;

    let goal_names = config.goals.unwrap_or_else(|| vec!["max-degs".into()]);
    let targets = config.target_sets.unwrap_or_default();
    let goals = parse_goal_names(&goal_names, &targets)?;
    if !targets.is_empty() && goals.iter().all(|g| g.target().is_none()) {
        return Err(AuditError::InvalidConfig(
            "--target-set given but no goal uses a target".into(),
        ));
    }

    Ok(ResolvedRun {
        counts,
        labels,
        sets,
        sets_b,
        id_map,
        study: StudyConfig {
            engines,
            goals,
            label_permutations: config.permutations.unwrap_or(10),
            include_true_labels: config.include_true_labels.unwrap_or(true),
            engine_permutations: config.engine_permutations.unwrap_or(1000),
            set_size_min: config.set_size_min.unwrap_or(5),
            set_size_max: config.set_size_max.unwrap_or(500),
        },
        seed,
    })
}

/// Input data loaded from the resolved paths.
pub struct LoadedInputs {
    pub counts: CountMatrix,
    pub labels: ConditionLabels,
    pub sets: GeneSetCollection,
    pub sets_b: Option<GeneSetCollection>,
    pub id_map: Option<IdMap>,
}

impl LoadedInputs {
    pub fn load(run: &ResolvedRun) -> Result<LoadedInputs> {
        let counts = parse_count_matrix(&run.counts)?;
        let labels = parse_labels(&run.labels, &counts)?;
        let sets = parse_gene_sets(&run.sets)?;
        let sets_b = run.sets_b.as_deref().map(parse_gene_sets).transpose()?;
        let id_map = run.id_map.as_deref().map(parse_id_map).transpose()?;
        Ok(LoadedInputs {
            counts,
            labels,
            sets,
            sets_b,
            id_map,
        })
    }

    pub fn pipeline_inputs(&self) -> PipelineInputs<'_> {
        PipelineInputs {
            counts: &self.counts,
            labels: &self.labels,
            collection: &self.sets,
            alt_collection: self.sets_b.as_ref(),
            id_map: self.id_map.as_ref(),
        }
    }

    fn manifest(run: &ResolvedRun) -> serde_json::Value {
        serde_json::json!({
            "counts": run.counts,
            "labels": run.labels,
            "sets": run.sets,
            "sets_b": run.sets_b,
            "id_map": run.id_map,
        })
    }
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| AuditError::io(&path, e))
}

fn summary_csv(report: &StudyReport) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record([
        "engine",
        "goal",
        "settings",
        "improved",
        "median_improvement",
        "max_improvement",
        "zero_to_positive",
    ])?;
    for row in &report.summaries {
        writer.write_record([
            row.engine.clone(),
            row.goal.clone(),
            row.settings.to_string(),
            row.improved.to_string(),
            row.median_improvement.to_string(),
            row.max_improvement.to_string(),
            row.zero_to_positive.to_string(),
        ])?;
    }
    Ok(String::from_utf8(writer.into_inner().expect("in-memory writer")).expect("utf-8"))
}

fn plot_csv(report: &StudyReport) -> Result<String> {
    let rows = plot_data(report)?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record([
        "engine",
        "goal",
        "labeling",
        "target",
        "default_value",
        "optimized_value",
    ])?;
    for row in rows {
        writer.write_record([
            row.engine,
            row.goal,
            row.labeling,
            row.target,
            row.default_value.to_string(),
            row.optimized_value.to_string(),
        ])?;
    }
    Ok(String::from_utf8(writer.into_inner().expect("in-memory writer")).expect("utf-8"))
}

/// Write report.json, summary.csv, plot_data.csv and the per-setting
/// trace files into the output directory.
pub fn write_artifacts(out_dir: &Path, output: &GridOutput) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| AuditError::io(out_dir, e))?;
    let mut report_json = serde_json::to_string_pretty(&output.report)?;
    report_json.push('\n');
    write_file(out_dir, "report.json", &report_json)?;
    write_file(out_dir, "summary.csv", &summary_csv(&output.report)?)?;
    match plot_csv(&output.report) {
        Ok(csv) => write_file(out_dir, "plot_data.csv", &csv)?,
        Err(AuditError::EmptyReport) => {
            write_file(
                out_dir,
                "plot_data.csv",
                "engine,goal,labeling,target,default_value,optimized_value\n",
            )?;
        }
        Err(e) => return Err(e),
    }
    for (name, trace) in &output.traces {
        let mut json = serde_json::to_string_pretty(trace)?;
        json.push('\n');
        write_file(out_dir, name, &json)?;
    }
    Ok(())
}

/// `audit grid`: run the whole settings grid and write the artifacts.
pub fn cmd_grid(run: &ResolvedRun, out_dir: &Path) -> Result<()> {
    let loaded = LoadedInputs::load(run)?;
    let mut output = run_grid(&run.study, &loaded.pipeline_inputs(), run.seed)?;
    output.report.meta.inputs = Some(LoadedInputs::manifest(run));
    write_artifacts(out_dir, &output)
}

/// `audit run`: run one setting (one engine, one goal, one labeling).
/// With `dump_tables`, the optimised configuration is evaluated once more
/// and its intermediate tables are written as TSV for inspection.
pub fn cmd_run(
    run: &ResolvedRun,
    labeling_tag: &str,
    out_dir: &Path,
    dump_tables: bool,
) -> Result<()> {
    if run.study.engines.len() != 1 || run.study.goals.len() != 1 {
        return Err(AuditError::InvalidConfig(
            "`audit run` expects exactly one engine and one goal".into(),
        ));
    }
    let loaded = LoadedInputs::load(run)?;
    let inputs = loaded.pipeline_inputs();

    let labeling = if labeling_tag == "true" {
        Labeling::TrueLabels
    } else if let Some(index) = labeling_tag.strip_prefix("perm") {
        let index: usize = index.parse().map_err(|_| {
            AuditError::InvalidConfig(format!(
                "labeling `{labeling_tag}` is neither `true` nor `perm<k>`"
            ))
        })?;
        if index == 0 {
            return Err(AuditError::InvalidConfig(
                "permutation indices start at 1".into(),
            ));
        }
        let mut perms = generate_permutations(&loaded.labels, index, run.seed)?;
        perms.remove(index - 1)
    } else {
        return Err(AuditError::InvalidConfig(format!(
            "labeling `{labeling_tag}` is neither `true` nor `perm<k>`"
        )));
    };

    let goal = &run.study.goals[0];
    let engine = run.study.engines[0];
    let outcome = run_setting(
        goal,
        engine,
        &labeling,
        &inputs,
        &run.study.engine_params(),
        run.seed,
    );
    let single_config = StudyConfig {
        include_true_labels: !labeling.is_permuted(),
        label_permutations: match &labeling {
            Labeling::Permutation { index, .. } => *index,
            Labeling::TrueLabels => 0,
        },
        ..run.study.clone()
    };
    let mut output = assemble_output(&single_config, run.seed, vec![outcome]);
    output.report.meta.inputs = Some(LoadedInputs::manifest(run));
    write_artifacts(out_dir, &output)?;

    if dump_tables {
        use crate::multiverse::{build_graph, run_pipeline_capturing};
        let record = &output.report.records[0];
        let trace_text = std::fs::read_to_string(out_dir.join(&record.trace))
            .map_err(|e| AuditError::io(&out_dir.join(&record.trace), e))?;
        let trace: crate::multiverse::OptimizationTrace = serde_json::from_str(&trace_text)?;
        let setting_inputs = PipelineInputs {
            labels: labeling.labels(&loaded.labels),
            ..inputs
        };
        let graph = build_graph(engine, goal, setting_inputs.capabilities());
        let (table, captured) = run_pipeline_capturing(
            &setting_inputs,
            &graph,
            &trace.final_config,
            &run.study.engine_params(),
            record.seed,
        )?;
        write_file(out_dir, "final_enrichment.tsv", &table.to_tsv())?;
        if let Some(values) = &captured.transformed {
            write_file(out_dir, "final_transformed.tsv", &values.to_tsv())?;
        }
        if let Some(de) = &captured.de_table {
            write_file(out_dir, "final_de_table.tsv", &de.to_tsv())?;
        }
        if let Some(ranked) = &captured.ranked_list {
            write_file(out_dir, "final_ranked_list.tsv", &ranked.to_tsv())?;
        }
    }
    Ok(())
}

/// Arguments of the `simulate` command.
#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub spec: SimSpec,
    pub sets_path: Option<PathBuf>,
    pub sets_count: Option<usize>,
    pub set_size: (usize, usize),
    pub out_dir: PathBuf,
}

fn labels_tsv(samples: &[String], labels: &ConditionLabels) -> String {
    samples
        .iter()
        .zip(labels.assignment())
        .map(|(s, l)| format!("{s}\t{l}\n"))
        .collect()
}

/// `simulate`: write counts.tsv, labels.tsv, collection.tsv and truth.json.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    args.spec.validate()?;
    if args.sets_path.is_some() && args.sets_count.is_some() {
        return Err(AuditError::InvalidConfig(
            "choose either --sets or --sets-count, not both".into(),
        ));
    }
    let sets: Option<GeneSetCollection> = match (&args.sets_path, args.sets_count) {
        (Some(path), _) => Some(parse_gene_sets(path)?),
        (None, Some(count)) => Some(random_collection(
            args.spec.genes,
            count,
            args.set_size.0,
            args.set_size.1,
            args.spec.seed,
        )?),
        (None, None) => None,
    };
    if args.spec.within_set_correlation > 0.0 && sets.is_none() {
        return Err(AuditError::InvalidConfig(
            "--correlation needs gene sets (--sets or --sets-count)".into(),
        ));
    }
    let (matrix, labels, truth) = simulate(&args.spec, sets.as_ref())?;

    let dir = &args.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| AuditError::io(dir, e))?;
    write_file(dir, "counts.tsv", &matrix.to_tsv())?;
    write_file(dir, "labels.tsv", &labels_tsv(matrix.samples(), &labels))?;
    if let Some(collection) = &sets {
        write_file(dir, "collection.tsv", &collection.to_tsv())?;
    }
    let truth_json = serde_json::json!({
        "meta": {
            "tool_version": env!("CARGO_PKG_VERSION"),
            "spec": args.spec,
        },
        "de_genes": truth.de_genes,
        "enriched_sets": truth.enriched_sets,
    });
    let mut text = serde_json::to_string_pretty(&truth_json)?;
    text.push('\n');
    write_file(dir, "truth.json", &text)?;
    Ok(())
}

/// `report plot-data`: re-emit the plot CSV from an existing report.
pub fn cmd_plot_data(report_path: &Path, out_path: &Path) -> Result<()> {
    let text =
        std::fs::read_to_string(report_path).map_err(|e| AuditError::io(report_path, e))?;
    let report: StudyReport = serde_json::from_str(&text)?;
    let csv = plot_csv(&report)?;
    std::fs::write(out_path, csv).map_err(|e| AuditError::io(out_path, e))
}
