//! Command-line front end: audit single settings or full grids, simulate
//! data sets, and export plot data from existing reports.

use clap::{Args, Parser, Subcommand};
use gsa_audit::cli::{
    cmd_grid, cmd_plot_data, cmd_run, cmd_simulate, resolve_run, ConfigFile, SimulateArgs,
};
use gsa_audit::error::AuditError;
use gsa_audit::synthdata::SimSpec;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "gsa-audit",
    version,
    about = "Quantify how far gene set analysis results can be tweaked by exploiting analytical degrees of freedom"
)]
struct Cli {
    /// Worker threads (default: all cores; env fallback AUDIT_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run optimisation processes against real or simulated inputs.
    Audit {
        #[command(subcommand)]
        command: AuditCommand,
    },
    /// Generate a seeded synthetic data set.
    Simulate(SimulateCli),
    /// Derived exports from an existing report.
    Report {
        #[command(subcommand)]
        command: ReportCommand,
    },
}

/// Input and study options shared by `audit run` and `audit grid`.
#[derive(Args, Clone)]
struct StudyArgs {
    /// JSON config file; its keys mirror these flags and win on conflict.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Count matrix TSV (gene_id, samples..., optional length column).
    #[arg(long)]
    counts: Option<PathBuf>,
    /// Two-column sample-to-label TSV.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Gene set collection TSV (name, description, members...).
    #[arg(long)]
    sets: Option<PathBuf>,
    /// Alternative collection enabling the database choice for goal 1.
    #[arg(long)]
    sets_b: Option<PathBuf>,
    /// Two-column source-to-target gene id map.
    #[arg(long)]
    id_map: Option<PathBuf>,
    /// Comma-separated engines (ora, goseq, gsea-phenotype, gsea-preranked, padog).
    #[arg(long, value_delimiter = ',')]
    engines: Option<Vec<String>>,
    /// Comma-separated goals (max-degs, min-adjp, min-rel-rank).
    #[arg(long, value_delimiter = ',')]
    goals: Option<Vec<String>>,
    /// Target set names for the min-adjp / min-rel-rank goals.
    #[arg(long = "target-set", value_delimiter = ',')]
    target_sets: Option<Vec<String>>,
    /// Number of random label permutations in the grid.
    #[arg(long)]
    permutations: Option<usize>,
    /// Whether the grid also runs the true labels.
    #[arg(long)]
    include_true_labels: Option<bool>,
    /// Master seed (mandatory).
    #[arg(long)]
    seed: Option<u64>,
    /// Permutations / resamples inside the enrichment engines.
    #[arg(long)]
    engine_permutations: Option<usize>,
    /// Smallest admissible gene set size.
    #[arg(long)]
    set_size_min: Option<usize>,
    /// Largest admissible gene set size.
    #[arg(long)]
    set_size_max: Option<usize>,
    /// Output directory for report.json, summary.csv, traces and plot data.
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

impl StudyArgs {
    fn flags(&self) -> ConfigFile {
        ConfigFile {
            counts: self.counts.clone(),
            labels: self.labels.clone(),
            sets: self.sets.clone(),
            sets_b: self.sets_b.clone(),
            id_map: self.id_map.clone(),
            engines: self.engines.clone(),
            goals: self.goals.clone(),
            target_sets: self.target_sets.clone(),
            permutations: self.permutations,
            include_true_labels: self.include_true_labels,
            seed: self.seed,
            engine_permutations: self.engine_permutations,
            set_size_min: self.set_size_min,
            set_size_max: self.set_size_max,
            threads: None,
        }
    }

    fn resolve(&self) -> Result<gsa_audit::cli::ResolvedRun, AuditError> {
        let merged = match &self.config {
            Some(path) => ConfigFile::load(path)?.merged_with_flags(self.flags()),
            None => self.flags(),
        };
        resolve_run(merged)
    }
}

#[derive(Subcommand)]
enum AuditCommand {
    /// One optimisation setting: one engine, one goal, one labeling.
    Run {
        #[command(flatten)]
        study: StudyArgs,
        /// `true` for the real labels or `perm<k>` for the k-th seeded permutation.
        #[arg(long, default_value = "true")]
        labeling: String,
        /// Also dump the optimised configuration's intermediate tables
        /// (transformed matrix, DE table, ranked list, enrichment table).
        #[arg(long)]
        dump_tables: bool,
    },
    /// The full settings grid (goals x labelings x engines x targets).
    Grid {
        #[command(flatten)]
        study: StudyArgs,
    },
}

#[derive(Args)]
struct SimulateCli {
    #[arg(long, default_value_t = 1000)]
    genes: usize,
    /// Samples per group, e.g. `10,10`.
    #[arg(long, default_value = "5,5")]
    samples: String,
    #[arg(long, default_value_t = 100.0)]
    base_mean: f64,
    #[arg(long, default_value_t = 0.1)]
    dispersion: f64,
    /// Target within-set count correlation (needs gene sets).
    #[arg(long, default_value_t = 0.0)]
    correlation: f64,
    /// Fraction of genes receiving a group effect.
    #[arg(long, default_value_t = 0.0)]
    de_fraction: f64,
    /// log2 fold change of the spiked genes.
    #[arg(long, default_value_t = 0.0)]
    lfc: f64,
    #[arg(long)]
    seed: u64,
    /// Existing collection file to attach to the simulation.
    #[arg(long)]
    sets: Option<PathBuf>,
    /// Generate this many random gene sets instead.
    #[arg(long)]
    sets_count: Option<usize>,
    /// Size range for generated sets, e.g. `5,50`.
    #[arg(long, default_value = "10,50")]
    set_size: String,
    #[arg(long, default_value = "data")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ReportCommand {
    /// Paired default-versus-optimised values as CSV.
    PlotData {
        /// An existing report.json.
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value = "plot_data.csv")]
        out: PathBuf,
    },
}

fn parse_pair(text: &str, flag: &str) -> Result<(usize, usize), AuditError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() == 2 {
        if let (Ok(a), Ok(b)) = (parts[0].trim().parse(), parts[1].trim().parse()) {
            return Ok((a, b));
        }
    }
    Err(AuditError::InvalidConfig(format!(
        "`{flag}` expects two comma-separated integers, got `{text}`"
    )))
}

fn init_threads(cli_threads: Option<usize>) -> Result<(), AuditError> {
    let from_env = std::env::var("AUDIT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = cli_threads.or(from_env) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| AuditError::InvalidConfig(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), AuditError> {
    init_threads(cli.threads)?;
    match cli.command {
        Command::Audit { command } => match command {
            AuditCommand::Run {
                study,
                labeling,
                dump_tables,
            } => {
                let resolved = study.resolve()?;
                cmd_run(&resolved, &labeling, &study.out, dump_tables)
            }
            AuditCommand::Grid { study } => {
                let resolved = study.resolve()?;
                cmd_grid(&resolved, &study.out)
            }
        },
        Command::Simulate(args) => {
            let samples_per_group = parse_pair(&args.samples, "--samples")?;
            let set_size = parse_pair(&args.set_size, "--set-size")?;
            cmd_simulate(&SimulateArgs {
                spec: SimSpec {
                    genes: args.genes,
                    samples_per_group,
                    base_mean: args.base_mean,
                    dispersion: args.dispersion,
                    within_set_correlation: args.correlation,
                    de_fraction: args.de_fraction,
                    lfc: args.lfc,
                    seed: args.seed,
                },
                sets_path: args.sets,
                sets_count: args.sets_count,
                set_size,
                out_dir: args.out,
            })
        }
        Command::Report { command } => match command {
            ReportCommand::PlotData { report, out } => cmd_plot_data(&report, &out),
        },
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(error) = run(cli) {
        eprintln!("error: {error}");
        std::process::exit(error.exit_code());
    }
}
