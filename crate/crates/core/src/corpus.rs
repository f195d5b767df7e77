//! Ingestion of the external inputs: count matrix, condition labels, gene
//! set collections and the optional gene-id map. All formats are plain
//! tab-separated UTF-8 text with LF line endings.
//!
//! Parsed values are immutable and safe to share across threads.

use crate::error::{AuditError, Result};
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

/// Dense gene-by-sample matrix of non-negative integer counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    gene_ids: Vec<String>,
    samples: Vec<String>,
    /// Row-major, `n_genes * n_samples`.
    counts: Vec<u64>,
    /// Optional per-gene transcript lengths in base pairs.
    lengths: Option<Vec<u64>>,
    index: HashMap<String, usize>,
}

impl CountMatrix {
    /// Validating constructor; checks uniqueness and dimensions.
    pub fn new(
        gene_ids: Vec<String>,
        samples: Vec<String>,
        counts: Vec<u64>,
        lengths: Option<Vec<u64>>,
    ) -> Result<Self> {
        assert_eq!(counts.len(), gene_ids.len() * samples.len());
        if let Some(l) = &lengths {
            assert_eq!(l.len(), gene_ids.len());
            if let Some(bad) = l.iter().position(|&x| x == 0) {
                return Err(AuditError::MalformedCell {
                    row: bad + 1,
                    col: samples.len() + 2,
                    value: "0".into(),
                });
            }
        }
        let mut index = HashMap::with_capacity(gene_ids.len());
        for (i, id) in gene_ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(AuditError::DuplicateGeneId(id.clone()));
            }
        }
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            if !seen.insert(s.as_str()) {
                return Err(AuditError::DuplicateSample(s.clone()));
            }
        }
        Ok(CountMatrix {
            gene_ids,
            samples,
            counts,
            lengths,
            index,
        })
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

    pub fn lengths(&self) -> Option<&[u64]> {
        self.lengths.as_deref()
    }

    pub fn count(&self, gene: usize, sample: usize) -> u64 {
        self.counts[gene * self.samples.len() + sample]
    }

    pub fn row(&self, gene: usize) -> &[u64] {
        let w = self.samples.len();
        &self.counts[gene * w..(gene + 1) * w]
    }

    pub fn gene_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Per-sample column sums.
    pub fn library_sizes(&self) -> Vec<u64> {
        let mut libs = vec![0u64; self.n_samples()];
        for g in 0..self.n_genes() {
            for (s, lib) in libs.iter_mut().enumerate() {
                *lib += self.count(g, s);
            }
        }
        libs
    }

    /// Keep only the genes at `keep` (in the given order).
    pub fn subset_genes(&self, keep: &[usize]) -> CountMatrix {
        let w = self.n_samples();
        let mut counts = Vec::with_capacity(keep.len() * w);
        let mut gene_ids = Vec::with_capacity(keep.len());
        for &g in keep {
            gene_ids.push(self.gene_ids[g].clone());
            counts.extend_from_slice(self.row(g));
        }
        let lengths = self
            .lengths
            .as_ref()
            .map(|l| keep.iter().map(|&g| l[g]).collect());
        CountMatrix::new(gene_ids, self.samples.clone(), counts, lengths)
            .expect("subset of a valid matrix stays valid")
    }

    /// Serialise to the ingestion TSV format (round-trips through
    /// [`parse_count_matrix`]).
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str("gene_id");
        for s in &self.samples {
            out.push('\t');
            out.push_str(s);
        }
        if self.lengths.is_some() {
            out.push_str("\tlength");
        }
        out.push('\n');
        for g in 0..self.n_genes() {
            out.push_str(&self.gene_ids[g]);
            for s in 0..self.n_samples() {
                let _ = write!(out, "\t{}", self.count(g, s));
            }
            if let Some(l) = &self.lengths {
                let _ = write!(out, "\t{}", l[g]);
            }
            out.push('\n');
        }
        out
    }
}

/// Binary condition assignment over the samples of a paired matrix.
///
/// The two condition tokens are ordered lexicographically; `group_sizes`
/// and all group-wise statistics follow that order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionLabels {
    assignment: Vec<String>,
    conditions: (String, String),
    group_sizes: (usize, usize),
}

impl ConditionLabels {
    /// Build from a per-sample assignment in matrix sample order.
    pub fn from_assignment(assignment: Vec<String>) -> Result<Self> {
        let mut distinct: Vec<&String> = Vec::new();
        for label in &assignment {
            if !distinct.contains(&label) {
                distinct.push(label);
            }
        }
        match distinct.len() {
            0 | 1 => {
                let observed = distinct
                    .first()
                    .map(|s| s.to_string())
                    .unwrap_or_default();
                Err(AuditError::EmptyGroup(observed))
            }
            2 => {
                let mut pair = [distinct[0].clone(), distinct[1].clone()];
                pair.sort();
                let [a, b] = pair;
                let na = assignment.iter().filter(|l| **l == a).count();
                let nb = assignment.len() - na;
                Ok(ConditionLabels {
                    assignment,
                    conditions: (a, b),
                    group_sizes: (na, nb),
                })
            }
            n => Err(AuditError::TooManyConditions(n)),
        }
    }

    pub fn n_samples(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[String] {
        &self.assignment
    }

    pub fn conditions(&self) -> (&str, &str) {
        (&self.conditions.0, &self.conditions.1)
    }

    pub fn group_sizes(&self) -> (usize, usize) {
        self.group_sizes
    }

    /// 0 for the lexicographically first condition, 1 for the second.
    pub fn group_of(&self, sample: usize) -> usize {
        usize::from(self.assignment[sample] != self.conditions.0)
    }

    /// A uniformly shuffled copy of the assignment; group sizes are
    /// preserved by construction.
    pub fn shuffled<R: rand::Rng>(&self, rng: &mut R) -> ConditionLabels {
        use rand::seq::SliceRandom;
        let mut assignment = self.assignment.clone();
        assignment.shuffle(rng);
        ConditionLabels {
            assignment,
            conditions: self.conditions.clone(),
            group_sizes: self.group_sizes,
        }
    }

    /// Sample indices per group, in matrix order.
    pub fn group_indices(&self) -> (Vec<usize>, Vec<usize>) {
        let mut a = Vec::with_capacity(self.group_sizes.0);
        let mut b = Vec::with_capacity(self.group_sizes.1);
        for i in 0..self.assignment.len() {
            if self.group_of(i) == 0 {
                a.push(i);
            } else {
                b.push(i);
            }
        }
        (a, b)
    }
}

/// One named gene set with a free-text description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneSet {
    pub name: String,
    pub description: String,
    pub members: BTreeSet<String>,
}

/// Named collection of gene sets, order preserved from the source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneSetCollection {
    pub name: String,
    sets: Vec<GeneSet>,
    index: HashMap<String, usize>,
}

impl GeneSetCollection {
    pub fn new(name: impl Into<String>, sets: Vec<GeneSet>) -> Result<Self> {
        let mut index = HashMap::with_capacity(sets.len());
        for (i, set) in sets.iter().enumerate() {
            assert!(!set.members.is_empty(), "gene sets must be non-empty");
            if index.insert(set.name.clone(), i).is_some() {
                return Err(AuditError::DuplicateSetName(set.name.clone()));
            }
        }
        Ok(GeneSetCollection {
            name: name.into(),
            sets,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn sets(&self) -> &[GeneSet] {
        &self.sets
    }

    pub fn get(&self, name: &str) -> Option<&GeneSet> {
        self.index.get(name).map(|&i| &self.sets[i])
    }

    /// Union of all member ids.
    pub fn annotated_genes(&self) -> BTreeSet<&str> {
        self.sets
            .iter()
            .flat_map(|s| s.members.iter().map(String::as_str))
            .collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for set in &self.sets {
            out.push_str(&set.name);
            out.push('\t');
            out.push_str(&set.description);
            for m in &set.members {
                out.push('\t');
                out.push_str(m);
            }
            out.push('\n');
        }
        out
    }
}

/// Many-to-one gene-id conversion map, retained in file order.
///
/// Repeated targets model the id duplications that a conversion between
/// annotation formats introduces. An empty map means identity.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    entries: Vec<(String, String)>,
    by_source: HashMap<String, usize>,
}

impl IdMap {
    pub fn new(entries: Vec<(String, String)>) -> Result<Self> {
        let mut by_source = HashMap::with_capacity(entries.len());
        for (i, (src, _)) in entries.iter().enumerate() {
            if by_source.insert(src.clone(), i).is_some() {
                return Err(AuditError::DuplicateSource(src.clone()));
            }
        }
        Ok(IdMap { entries, by_source })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Entries in file order.
    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn target_of(&self, source: &str) -> Option<&str> {
        self.by_source
            .get(source)
            .map(|&i| self.entries[i].1.as_str())
    }

    /// Position of a source id in file order (drives the keep-first policy).
    pub fn source_rank(&self, source: &str) -> Option<usize> {
        self.by_source.get(source).copied()
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| AuditError::io(path, e))?;
    Ok(text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
        .filter(|l| !l.is_empty())
        .collect())
}

/// Parse a count matrix TSV: header `gene_id<TAB>s1<TAB>...[<TAB>length]`,
/// one gene per row, file order preserved.
pub fn parse_count_matrix(path: &Path) -> Result<CountMatrix> {
    let lines = read_lines(path)?;
    let header = lines
        .first()
        .ok_or_else(|| AuditError::EmptyFile(path.display().to_string()))?;
    let fields: Vec<&str> = header.split('\t').collect();
    if fields.len() < 2 {
        return Err(AuditError::RaggedRow(1));
    }
    let has_length = *fields.last().unwrap() == "length";
    let n_samples = fields.len() - 1 - usize::from(has_length);
    if n_samples == 0 {
        return Err(AuditError::RaggedRow(1));
    }
    let samples: Vec<String> = fields[1..=n_samples].iter().map(|s| s.to_string()).collect();

    let mut gene_ids = Vec::new();
    let mut counts = Vec::new();
    let mut lengths = if has_length { Some(Vec::new()) } else { None };
    for (lineno, line) in lines.iter().enumerate().skip(1) {
        let row = lineno + 1;
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != fields.len() {
            return Err(AuditError::RaggedRow(row));
        }
        gene_ids.push(cells[0].to_string());
        for (j, cell) in cells[1..=n_samples].iter().enumerate() {
            let value: u64 = cell.parse().map_err(|_| AuditError::MalformedCell {
                row,
                col: j + 2,
                value: cell.to_string(),
            })?;
            counts.push(value);
        }
        if let Some(lens) = &mut lengths {
            let cell = cells[fields.len() - 1];
            let value: u64 = cell.parse().map_err(|_| AuditError::MalformedCell {
                row,
                col: fields.len(),
                value: cell.to_string(),
            })?;
            if value == 0 {
                return Err(AuditError::MalformedCell {
                    row,
                    col: fields.len(),
                    value: cell.to_string(),
                });
            }
            lens.push(value);
        }
    }
    CountMatrix::new(gene_ids, samples, counts, lengths)
}

/// Parse a two-column `sample<TAB>label` file and reorder to the matrix
/// sample order. Rows for unknown samples are ignored; row order never
/// affects the result.
pub fn parse_labels(path: &Path, matrix: &CountMatrix) -> Result<ConditionLabels> {
    let lines = read_lines(path)?;
    let mut by_sample: HashMap<String, String> = HashMap::new();
    for (lineno, line) in lines.iter().enumerate() {
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != 2 {
            return Err(AuditError::RaggedRow(lineno + 1));
        }
        if by_sample
            .insert(cells[0].to_string(), cells[1].to_string())
            .is_some()
        {
            return Err(AuditError::DuplicateSample(cells[0].to_string()));
        }
    }
    let mut assignment = Vec::with_capacity(matrix.n_samples());
    for sample in matrix.samples() {
        match by_sample.get(sample) {
            Some(label) => assignment.push(label.clone()),
            None => return Err(AuditError::MissingLabel(sample.clone())),
        }
    }
    ConditionLabels::from_assignment(assignment)
}

/// Parse a gene set collection: one set per line,
/// `name<TAB>description<TAB>member...`. Duplicate members within a line
/// collapse; the collection is named after the file stem.
pub fn parse_gene_sets(path: &Path) -> Result<GeneSetCollection> {
    let lines = read_lines(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "collection".into());
    let mut sets = Vec::with_capacity(lines.len());
    for (lineno, line) in lines.iter().enumerate() {
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() < 3 {
            return Err(AuditError::MalformedLine(lineno + 1));
        }
        let members: BTreeSet<String> = cells[2..].iter().map(|s| s.to_string()).collect();
        sets.push(GeneSet {
            name: cells[0].to_string(),
            description: cells[1].to_string(),
            members,
        });
    }
    GeneSetCollection::new(name, sets)
}

/// Parse a two-column `source<TAB>target` id map; an empty file yields the
/// identity map.
pub fn parse_id_map(path: &Path) -> Result<IdMap> {
    let lines = read_lines(path)?;
    let mut entries = Vec::with_capacity(lines.len());
    for (lineno, line) in lines.iter().enumerate() {
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != 2 {
            return Err(AuditError::RaggedRow(lineno + 1));
        }
        entries.push((cells[0].to_string(), cells[1].to_string()));
    }
    IdMap::new(entries)
}
