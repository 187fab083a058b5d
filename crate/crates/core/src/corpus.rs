//! Problem records: loading, normalization, validation and persistence.
//!
//! A corpus is a directory holding one JSON record per problem plus an
//! optional `manifest.json`. Field names of [`Problem`] and [`TestCase`] are
//! part of the on-disk contract.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MIN_RATING: u32 = 800;
pub const MAX_RATING: u32 = 3500;
const INTERACTIVE_TAG: &str = "interactive";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemSource {
    Icpc,
    Codeforces,
    Synthetic,
}

impl fmt::Display for ProblemSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemSource::Icpc => "icpc",
            ProblemSource::Codeforces => "codeforces",
            ProblemSource::Synthetic => "synthetic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub input: String,
    pub expected_output: String,
}

impl TestCase {
    pub fn new(input: impl Into<String>, expected_output: impl Into<String>) -> Self {
        Self {
            input: input.into(),
            expected_output: expected_output.into(),
        }
    }
}

/// A normalized task specification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub source: ProblemSource,
    pub statement: String,
    pub input_spec: String,
    pub output_spec: String,
    pub samples: Vec<TestCase>,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub rating: Option<u32>,
    pub time_limit_ms: u64,
    pub memory_limit_kb: u64,
}

impl Problem {
    /// Interactive problems are kept in the corpus but no judge accepts them.
    pub fn is_interactive(&self) -> bool {
        self.tags.iter().any(|t| t.eq_ignore_ascii_case(INTERACTIVE_TAG))
    }
}

/// One violated invariant, naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, field: &'static str, message: impl Into<String>) {
        self.violations.push(Violation {
            field,
            message: message.into(),
        });
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("corpus path {0} does not exist")]
    MissingPath(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record #{index} ({file}): field `{field}`: {message}")]
    Malformed {
        index: usize,
        file: String,
        field: String,
        message: String,
    },
    #[error("duplicate problem id `{id}` in {file}")]
    DuplicateId { id: String, file: String },
    #[error("failed to serialize record: {0}")]
    Serialize(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Lists every violated [`Problem`] invariant. Uniqueness of ids is a corpus
/// property and is checked by [`load_corpus`].
pub fn validate_problem(p: &Problem) -> ValidationReport {
    let mut report = ValidationReport::default();
    if p.id.trim().is_empty() {
        report.push("id", "id must be nonempty");
    }
    if p.samples.is_empty() {
        report.push("samples", "at least one sample test is required");
    }
    if let Some(r) = p.rating {
        if !(MIN_RATING..=MAX_RATING).contains(&r) {
            report.push("rating", format!("rating out of [{MIN_RATING},{MAX_RATING}]: {r}"));
        }
    }
    if p.time_limit_ms < 1 {
        report.push("time_limit_ms", "time limit must be at least 1 ms");
    }
    if p.memory_limit_kb < 1 {
        report.push("memory_limit_kb", "memory limit must be at least 1 KB");
    }
    if !p.is_interactive() {
        for (i, s) in p.samples.iter().enumerate() {
            if s.expected_output.trim().is_empty() {
                report.push(
                    "samples",
                    format!("sample {} has an empty expected_output", i + 1),
                );
            }
        }
    }
    report
}

/// Normalizes line endings, strips trailing whitespace per line and collapses
/// runs of blank lines. Leading and trailing blank lines are dropped.
pub fn normalize_text(text: &str) -> String {
    let unified = text.replace("\r\n", "\n").replace('\r', "\n");
    let mut out: Vec<&str> = Vec::new();
    let mut pending_blank = false;
    for line in unified.split('\n') {
        let line = line.trim_end();
        if line.is_empty() {
            pending_blank = !out.is_empty();
            continue;
        }
        if pending_blank {
            out.push("");
            pending_blank = false;
        }
        out.push(line);
    }
    out.join("\n")
}

/// Lowercases, trims and deduplicates tags, keeping first-occurrence order.
pub fn normalize_tags(tags: &[String]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    tags.iter()
        .map(|t| t.trim().to_lowercase())
        .filter(|t| !t.is_empty() && seen.insert(t.clone()))
        .collect()
}

/// Sample payloads are left byte-exact; only prose fields and tags change.
pub fn normalize_problem(raw: &Problem) -> Problem {
    Problem {
        statement: normalize_text(&raw.statement),
        input_spec: normalize_text(&raw.input_spec),
        output_spec: normalize_text(&raw.output_spec),
        tags: normalize_tags(&raw.tags),
        ..raw.clone()
    }
}

/// Loads every `*.json` record under `path` (except the manifest), sorted by id.
pub fn load_corpus(path: &Path) -> Result<Vec<Problem>, CorpusError> {
    if !path.exists() {
        return Err(CorpusError::MissingPath(path.to_path_buf()));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(io_err(path))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "json")
                && p.file_name().is_some_and(|n| n != MANIFEST_FILE)
        })
        .collect();
    // Record indices in error messages follow file-name order.
    files.sort();

    let mut problems = Vec::with_capacity(files.len());
    let mut ids = BTreeSet::new();
    for (index, file) in files.iter().enumerate() {
        let name = file
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let text = fs::read_to_string(file).map_err(io_err(file))?;
        let problem = parse_record(&text, index, &name)?;
        let report = validate_problem(&problem);
        if let Some(v) = report.violations.first() {
            return Err(CorpusError::Malformed {
                index,
                file: name,
                field: v.field.to_string(),
                message: v.message.clone(),
            });
        }
        if !ids.insert(problem.id.clone()) {
            return Err(CorpusError::DuplicateId {
                id: problem.id,
                file: name,
            });
        }
        problems.push(problem);
    }
    problems.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(problems)
}

fn parse_record(text: &str, index: usize, file: &str) -> Result<Problem, CorpusError> {
    serde_json::from_str(text).map_err(|e| {
        let message = e.to_string();
        // serde reports missing/unknown fields as "... field `name` ..."
        let field = message
            .split('`')
            .nth(1)
            .unwrap_or("<record>")
            .to_string();
        CorpusError::Malformed {
            index,
            file: file.to_string(),
            field,
            message,
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub source: ProblemSource,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub problems: Vec<ManifestEntry>,
    /// Digest over the per-problem digests in id order.
    pub corpus_digest: String,
}

pub fn problem_digest(p: &Problem) -> String {
    let bytes = serde_json::to_vec(p).expect("problem serializes");
    hex::encode(Sha256::digest(&bytes))
}

pub fn build_manifest(problems: &[Problem]) -> CorpusManifest {
    let mut entries: Vec<ManifestEntry> = problems
        .iter()
        .map(|p| ManifestEntry {
            id: p.id.clone(),
            source: p.source,
            digest: problem_digest(p),
        })
        .collect();
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    let mut hasher = Sha256::new();
    for e in &entries {
        hasher.update(e.id.as_bytes());
        hasher.update([0]);
        hasher.update(e.digest.as_bytes());
        hasher.update(b"\n");
    }
    CorpusManifest {
        problems: entries,
        corpus_digest: hex::encode(hasher.finalize()),
    }
}

/// File name used for a problem record; ids may contain characters that are
/// awkward in paths.
pub fn record_file_name(id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect();
    format!("{safe}.json")
}

/// Writes one record per problem plus the manifest, returning the manifest.
pub fn persist_corpus(problems: &[Problem], dir: &Path) -> Result<CorpusManifest, CorpusError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for p in problems {
        let file = dir.join(record_file_name(&p.id));
        let text = serde_json::to_string_pretty(p)?;
        fs::write(&file, text + "\n").map_err(io_err(&file))?;
    }
    let manifest = build_manifest(problems);
    let file = dir.join(MANIFEST_FILE);
    fs::write(&file, serde_json::to_string_pretty(&manifest)? + "\n").map_err(io_err(&file))?;
    Ok(manifest)
}
