//! Crate-wide error type.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, AuditError>;

/// Every failure mode the toolkit can report.
#[derive(Debug, Error)]
pub enum AuditError {
    // --- ingestion ---
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("duplicate gene id `{0}`")]
    DuplicateGeneId(String),
    #[error("malformed cell at row {row}, column {col}: `{value}`")]
    MalformedCell { row: usize, col: usize, value: String },
    #[error("row {0}: unexpected number of fields")]
    RaggedRow(usize),
    #[error("empty input file `{0}`")]
    EmptyFile(String),
    #[error("no label provided for sample `{0}`")]
    MissingLabel(String),
    #[error("sample `{0}` appears more than once")]
    DuplicateSample(String),
    #[error("more than two distinct condition labels (found {0})")]
    TooManyConditions(usize),
    #[error("all samples share label `{0}`; the other condition group is empty")]
    EmptyGroup(String),
    #[error("duplicate gene set name `{0}`")]
    DuplicateSetName(String),
    #[error("line {0}: gene set lines need at least name, description and one member")]
    MalformedLine(usize),
    #[error("source id `{0}` appears more than once in the id map")]
    DuplicateSource(String),

    // --- preprocessing ---
    #[error("sample `{0}` has a zero library size")]
    ZeroLibrary(String),
    #[error("pre-filtering removed every gene")]
    AllGenesFiltered,
    #[error("gene id `{0}` is missing from the id map")]
    UnmappedGene(String),
    #[error("no gene has positive counts in every sample; size factors undefined")]
    NoReferenceGenes,

    // --- differential expression ---
    #[error("each condition group needs at least two samples")]
    DegenerateDesign,
    #[error("p-value {0} outside [0, 1]")]
    InvalidP(f64),

    // --- enrichment ---
    #[error("invalid contingency: k={k}, universe={n_total}, annotated={k_total}, drawn={n_drawn}")]
    InvalidContingency {
        k: u64,
        n_total: u64,
        k_total: u64,
        n_drawn: u64,
    },
    #[error("odds ratio must be positive (got {0})")]
    NonpositiveOdds(f64),
    #[error("universe is empty")]
    EmptyUniverse,
    #[error("probability weighting function is degenerate: {0}")]
    DegeneratePwf(String),
    #[error("bias covariate `{0}` unavailable for the tested genes")]
    BiasUnavailable(String),
    #[error("gene set `{0}` has no member in the ranked list")]
    EmptySetInList(String),
    #[error("gene set `{0}` covers the whole ranked list")]
    NoComplement(String),
    #[error("no gene set left after the size filter")]
    EmptyCollectionAfterFilter,
    #[error("enrichment table is empty")]
    EmptyTable,

    // --- multiverse / study ---
    #[error("unknown engine `{0}`")]
    UnknownEngine(String),
    #[error("configuration space has {found} configurations, exceeding the cap of {cap}")]
    SearchSpaceTooLarge { found: u64, cap: u64 },
    #[error("only {available} distinct non-identity label arrangements exist, {requested} requested")]
    InsufficientPermutations { available: u64, requested: u64 },
    #[error("within-set correlation requested but no gene sets provided")]
    MissingSets,
    #[error("study report is empty")]
    EmptyReport,

    // --- cli / config ---
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl AuditError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        AuditError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Exit code class: 2 for validation problems, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            AuditError::InvalidConfig(_) | AuditError::UnknownEngine(_) => 2,
            _ => 1,
        }
    }
}
