//! Clause-annotated case-law documents: ingest, validation, scoping and
//! document-level splitting.
//!
//! A corpus file is JSONL with one document per line:
//!
//! ```json
//! {"document_id": "d1", "case_type": "judgement", "law_section_start": 6,
//!  "clauses": [{"clause_id": "d1-0", "text": "...",
//!               "memberships": [{"argument_id": "A", "role": "premise"}]}]}
//! ```
//!
//! Clause order in the array is the clause's `order_index`. When
//! `law_section_start` is absent it is detected from the heading clauses.

mod demo;
mod split;

pub use demo::{demo_corpus, DemoOptions};
pub use split::{split_corpus, Split};

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record at `{field}`: {message}")]
    MalformedRecord {
        line: usize,
        field: String,
        message: String,
    },
    #[error("line {line}: document `{document_id}` references argument `{argument_id}` which has no conclusion")]
    DanglingArgumentRef {
        line: usize,
        document_id: String,
        argument_id: String,
    },
    #[error("line {line}: duplicate clause id `{clause_id}`")]
    DuplicateClauseId { line: usize, clause_id: String },
    #[error("line {line}: duplicate document id `{document_id}`")]
    DuplicateDocumentId { line: usize, document_id: String },
    #[error("corpus contains no documents")]
    EmptyCorpus,
    #[error("too few documents: {available} available, {required} required")]
    TooFewDocuments { available: usize, required: usize },
    #[error("invalid split parameters: {0}")]
    InvalidSplit(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Premise,
    Conclusion,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Premise => f.write_str("premise"),
            Role::Conclusion => f.write_str("conclusion"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseType {
    Decision,
    Judgement,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    #[default]
    Full,
    LawSection,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Full => f.write_str("full"),
            Scope::LawSection => f.write_str("law_section"),
        }
    }
}

impl std::str::FromStr for Scope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(Scope::Full),
            "law_section" | "law-section" | "sec" => Ok(Scope::LawSection),
            other => Err(format!("unknown scope `{other}` (expected full or law_section)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Membership {
    pub argument_id: String,
    pub role: Role,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clause {
    pub clause_id: String,
    pub document_id: String,
    pub order_index: usize,
    pub text: String,
    /// Sorted, and at most one role per argument.
    pub memberships: Vec<Membership>,
}

impl Clause {
    pub fn is_argumentative(&self) -> bool {
        !self.memberships.is_empty()
    }

    pub fn has_role(&self, role: Role) -> bool {
        self.memberships.iter().any(|m| m.role == role)
    }

    pub fn argument_ids(&self) -> impl Iterator<Item = &str> {
        self.memberships.iter().map(|m| m.argument_id.as_str())
    }

    /// True when the two clauses are members of at least one common argument.
    pub fn shares_argument_with(&self, other: &Clause) -> bool {
        self.memberships
            .iter()
            .any(|m| other.memberships.iter().any(|o| o.argument_id == m.argument_id))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub document_id: String,
    pub case_type: CaseType,
    pub clauses: Vec<Clause>,
    pub law_section_start: Option<usize>,
}

/// Per-argument role counts within one document.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ArgumentShape {
    pub premises: usize,
    pub conclusions: usize,
}

impl Document {
    pub fn arguments(&self) -> BTreeMap<&str, ArgumentShape> {
        let mut out: BTreeMap<&str, ArgumentShape> = BTreeMap::new();
        for clause in &self.clauses {
            for m in &clause.memberships {
                let entry = out.entry(m.argument_id.as_str()).or_default();
                match m.role {
                    Role::Premise => entry.premises += 1,
                    Role::Conclusion => entry.conclusions += 1,
                }
            }
        }
        out
    }

    pub fn stats(&self) -> DocumentStats {
        let arguments = self.arguments();
        DocumentStats {
            document_id: self.document_id.clone(),
            clauses: self.clauses.len(),
            argument_clauses: self.clauses.iter().filter(|c| c.is_argumentative()).count(),
            arguments: arguments.len(),
            premises: self.clauses.iter().filter(|c| c.has_role(Role::Premise)).count(),
            conclusions: self.clauses.iter().filter(|c| c.has_role(Role::Conclusion)).count(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DocumentStats {
    pub document_id: String,
    pub clauses: usize,
    pub argument_clauses: usize,
    pub arguments: usize,
    /// Clauses holding a premise role in at least one argument.
    pub premises: usize,
    /// Clauses holding a conclusion role in at least one argument.
    pub conclusions: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ValidationWarning {
    MultipleConclusions {
        document_id: String,
        argument_id: String,
        conclusions: usize,
    },
    NoPremises {
        document_id: String,
        argument_id: String,
    },
}

impl fmt::Display for ValidationWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationWarning::MultipleConclusions {
                document_id,
                argument_id,
                conclusions,
            } => write!(
                f,
                "document `{document_id}`: argument `{argument_id}` has {conclusions} conclusion clauses"
            ),
            ValidationWarning::NoPremises {
                document_id,
                argument_id,
            } => write!(f, "document `{document_id}`: argument `{argument_id}` has no premises"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub provenance: String,
    #[serde(skip)]
    pub warnings: Vec<ValidationWarning>,
}

impl Corpus {
    pub fn document(&self, document_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.document_id == document_id)
    }

    pub fn document_ids(&self) -> Vec<String> {
        self.documents.iter().map(|d| d.document_id.clone()).collect()
    }

    /// Serializes back to the JSONL record format accepted by [`parse_corpus`].
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for doc in &self.documents {
            let record = DocumentRecord::from(doc);
            out.push_str(&serde_json::to_string(&record).expect("document record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), CorpusError> {
        let io_err = |source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut file = fs::File::create(path).map_err(io_err)?;
        file.write_all(self.to_jsonl().as_bytes()).map_err(io_err)
    }
}

// On-disk record shapes.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocumentRecord {
    document_id: String,
    case_type: CaseType,
    clauses: Vec<ClauseRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    law_section_start: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClauseRecord {
    clause_id: String,
    text: String,
    #[serde(default)]
    memberships: Vec<Membership>,
}

impl From<&Document> for DocumentRecord {
    fn from(doc: &Document) -> Self {
        DocumentRecord {
            document_id: doc.document_id.clone(),
            case_type: doc.case_type,
            law_section_start: doc.law_section_start,
            clauses: doc
                .clauses
                .iter()
                .map(|c| ClauseRecord {
                    clause_id: c.clause_id.clone(),
                    text: c.text.clone(),
                    memberships: c.memberships.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CorpusFormat {
    #[default]
    Jsonl,
}

pub fn parse_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let CorpusFormat::Jsonl = format;
    let file = fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut corpus = parse_jsonl(BufReader::new(file))?;
    corpus.provenance = path.display().to_string();
    Ok(corpus)
}

/// Parses and validates JSONL corpus records from any reader.
pub fn parse_jsonl<R: BufRead>(reader: R) -> Result<Corpus, CorpusError> {
    let mut documents = Vec::new();
    let mut warnings = Vec::new();
    let mut document_ids = HashSet::new();
    let mut clause_ids = HashSet::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: format!("line {line_no}"),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DocumentRecord = serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRecord {
            line: line_no,
            field: field_hint(&e),
            message: e.to_string(),
        })?;
        if !document_ids.insert(record.document_id.clone()) {
            return Err(CorpusError::DuplicateDocumentId {
                line: line_no,
                document_id: record.document_id,
            });
        }
        for clause in &record.clauses {
            if !clause_ids.insert(clause.clause_id.clone()) {
                return Err(CorpusError::DuplicateClauseId {
                    line: line_no,
                    clause_id: clause.clause_id.clone(),
                });
            }
        }
        let document = build_document(record, line_no)?;
        warnings.extend(validate_arguments(&document, line_no)?);
        documents.push(document);
    }

    if documents.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Corpus {
        documents,
        provenance: String::new(),
        warnings,
    })
}

fn field_hint(err: &serde_json::Error) -> String {
    // serde_json names the offending field in its message for missing/unknown
    // fields; otherwise fall back to the column.
    let msg = err.to_string();
    if let Some(start) = msg.find('`') {
        if let Some(len) = msg[start + 1..].find('`') {
            return msg[start + 1..start + 1 + len].to_string();
        }
    }
    format!("column {}", err.column())
}

fn build_document(record: DocumentRecord, line: usize) -> Result<Document, CorpusError> {
    let document_id = record.document_id;
    let mut clauses = Vec::with_capacity(record.clauses.len());
    for (order_index, c) in record.clauses.into_iter().enumerate() {
        let mut memberships = c.memberships;
        memberships.sort();
        memberships.dedup();
        if memberships.windows(2).any(|w| w[0].argument_id == w[1].argument_id) {
            return Err(CorpusError::MalformedRecord {
                line,
                field: format!("clauses[{order_index}].memberships"),
                message: format!("clause `{}` holds two roles in one argument", c.clause_id),
            });
        }
        clauses.push(Clause {
            clause_id: c.clause_id,
            document_id: document_id.clone(),
            order_index,
            text: c.text,
            memberships,
        });
    }
    let mut document = Document {
        document_id,
        case_type: record.case_type,
        clauses,
        law_section_start: None,
    };
    document.law_section_start = match record.law_section_start {
        Some(start) if start >= document.clauses.len() => {
            return Err(CorpusError::MalformedRecord {
                line,
                field: "law_section_start".into(),
                message: format!("index {start} out of range for {} clauses", document.clauses.len()),
            })
        }
        Some(start) => Some(start),
        None => detect_law_section(&document),
    };
    Ok(document)
}

fn validate_arguments(document: &Document, line: usize) -> Result<Vec<ValidationWarning>, CorpusError> {
    let mut warnings = Vec::new();
    for (argument_id, shape) in document.arguments() {
        if shape.conclusions == 0 {
            return Err(CorpusError::DanglingArgumentRef {
                line,
                document_id: document.document_id.clone(),
                argument_id: argument_id.to_string(),
            });
        }
        if shape.conclusions > 1 {
            warnings.push(ValidationWarning::MultipleConclusions {
                document_id: document.document_id.clone(),
                argument_id: argument_id.to_string(),
                conclusions: shape.conclusions,
            });
        }
        if shape.premises == 0 {
            warnings.push(ValidationWarning::NoPremises {
                document_id: document.document_id.clone(),
                argument_id: argument_id.to_string(),
            });
        }
    }
    Ok(warnings)
}

const LAW_HEADINGS: [&str; 2] = ["AS TO THE LAW", "THE LAW"];

/// Index of the first clause whose trimmed, uppercased text is one of the
/// law-section headings.
pub fn detect_law_section(document: &Document) -> Option<usize> {
    document.clauses.iter().position(|c| {
        let normalized = c.text.trim().to_uppercase();
        LAW_HEADINGS.contains(&normalized.as_str())
    })
}

/// Clauses inside `scope`. A law-section scope on a document without a
/// boundary falls back to the whole document.
pub fn scope_filter(document: &Document, scope: Scope) -> &[Clause] {
    match (scope, document.law_section_start) {
        (Scope::Full, _) => &document.clauses,
        (Scope::LawSection, Some(start)) => &document.clauses[start.min(document.clauses.len())..],
        (Scope::LawSection, None) => {
            log::warn!(
                "document `{}` has no law-section boundary; using all clauses",
                document.document_id
            );
            &document.clauses
        }
    }
}

/// Corpus-wide totals used by `validate`.
pub fn corpus_stats(corpus: &Corpus) -> (Vec<DocumentStats>, DocumentStats) {
    let per_doc: Vec<DocumentStats> = corpus.documents.iter().map(Document::stats).collect();
    let mut total = DocumentStats {
        document_id: "TOTAL".into(),
        ..Default::default()
    };
    for s in &per_doc {
        total.clauses += s.clauses;
        total.argument_clauses += s.argument_clauses;
        total.arguments += s.arguments;
        total.premises += s.premises;
        total.conclusions += s.conclusions;
    }
    (per_doc, total)
}

/// Distinct document ids referenced by a set of clauses; used for leakage audits.
pub fn clause_documents<'a>(clauses: impl IntoIterator<Item = &'a Clause>) -> BTreeSet<String> {
    clauses.into_iter().map(|c| c.document_id.clone()).collect()
}
