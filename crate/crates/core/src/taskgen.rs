//! Labeled example sets for the three pipeline stages: argument clause
//! recognition, clause-pair relation mining and premise/conclusion
//! classification.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{scope_filter, Clause, Corpus, Document, Role, Scope};

pub const DEFAULT_WINDOW: usize = 5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaskError {
    #[error("window must be at least 2, got {0}")]
    InvalidWindow(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    ClauseRecognition,
    RelationMining,
    PremiseCls,
    ConclusionCls,
}

impl Task {
    pub const ALL: [Task; 4] = [
        Task::ClauseRecognition,
        Task::RelationMining,
        Task::PremiseCls,
        Task::ConclusionCls,
    ];

    pub fn is_pair_task(self) -> bool {
        self == Task::RelationMining
    }

    /// Only clause recognition distinguishes search scopes.
    pub fn uses_scope(self) -> bool {
        self == Task::ClauseRecognition
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::ClauseRecognition => "clause_recognition",
            Task::RelationMining => "relation_mining",
            Task::PremiseCls => "premise_cls",
            Task::ConclusionCls => "conclusion_cls",
        })
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .into_iter()
            .find(|t| t.to_string() == s.replace('-', "_"))
            .ok_or_else(|| {
                format!("unknown task `{s}` (expected clause_recognition, relation_mining, premise_cls or conclusion_cls)")
            })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseExample {
    pub clause_id: String,
    pub document_id: String,
    pub text: String,
    pub label: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClausePairExample {
    pub clause_id_a: String,
    pub clause_id_b: String,
    pub document_id: String,
    pub text_a: String,
    pub text_b: String,
    pub label: u8,
    /// Distance between the two clauses in the argument-clause sequence.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentExample {
    pub clause_id: String,
    pub document_id: String,
    pub text: String,
    pub role_target: Role,
    pub label: u8,
}

fn non_empty(clause: &Clause) -> bool {
    if clause.text.trim().is_empty() {
        log::warn!("clause `{}` has empty text; skipped", clause.clause_id);
        false
    } else {
        true
    }
}

/// One example per scoped clause, positive when the clause is argumentative.
pub fn build_clause_recognition(corpus: &Corpus, scope: Scope) -> Vec<ClauseExample> {
    let mut out = Vec::new();
    for doc in &corpus.documents {
        let scoped = scope_filter(doc, scope);
        if scoped.is_empty() {
            log::warn!("document `{}` contributes no clauses in scope {scope}", doc.document_id);
            continue;
        }
        out.extend(scoped.iter().filter(|c| non_empty(c)).map(|c| ClauseExample {
            clause_id: c.clause_id.clone(),
            document_id: c.document_id.clone(),
            text: c.text.clone(),
            label: u8::from(c.is_argumentative()),
        }));
    }
    out
}

/// Gold argument clauses of a document in reading order.
pub fn order_argument_clauses(document: &Document) -> Vec<&Clause> {
    let mut clauses: Vec<&Clause> = document.clauses.iter().filter(|c| c.is_argumentative()).collect();
    clauses.sort_by_key(|c| c.order_index);
    clauses
}

/// All pairs `(i, j)` with `1 <= j - i <= window - 1` over the ordered
/// sequence, ascending in `i` then `j`.
pub fn build_relation_pairs(argument_clauses: &[&Clause], window: usize) -> Result<Vec<ClausePairExample>, TaskError> {
    if window < 2 {
        return Err(TaskError::InvalidWindow(window));
    }
    let n = argument_clauses.len();
    let mut pairs = Vec::with_capacity(n * (window - 1));
    for i in 0..n {
        for j in (i + 1)..n.min(i + window) {
            let (a, b) = (argument_clauses[i], argument_clauses[j]);
            debug_assert_eq!(a.document_id, b.document_id);
            pairs.push(ClausePairExample {
                clause_id_a: a.clause_id.clone(),
                clause_id_b: b.clause_id.clone(),
                document_id: a.document_id.clone(),
                text_a: a.text.clone(),
                text_b: b.text.clone(),
                label: u8::from(a.shares_argument_with(b)),
                offset: j - i,
            });
        }
    }
    Ok(pairs)
}

/// Relation pairs over every document, from gold argument clauses.
pub fn build_relation_task(corpus: &Corpus, window: usize) -> Result<Vec<ClausePairExample>, TaskError> {
    let mut out = Vec::new();
    for doc in &corpus.documents {
        let clauses: Vec<&Clause> = order_argument_clauses(doc).into_iter().filter(|c| non_empty(c)).collect();
        out.extend(build_relation_pairs(&clauses, window)?);
    }
    Ok(out)
}

/// Relation pairs over clauses a recognizer predicted as argumentative.
/// Labels still come from the gold annotation, so falsely recognized clauses
/// only ever produce negative pairs.
pub fn build_relation_task_from_predictions(
    corpus: &Corpus,
    predicted_argument_clauses: &HashSet<String>,
    window: usize,
) -> Result<Vec<ClausePairExample>, TaskError> {
    let mut out = Vec::new();
    for doc in &corpus.documents {
        let clauses: Vec<&Clause> = doc
            .clauses
            .iter()
            .filter(|c| predicted_argument_clauses.contains(&c.clause_id))
            .collect();
        out.extend(build_relation_pairs(&clauses, window)?);
    }
    Ok(out)
}

/// One example per scoped argument clause; positive when the clause holds
/// `role_target` in at least one argument.
pub fn build_component_task(corpus: &Corpus, role_target: Role, scope: Scope) -> Vec<ComponentExample> {
    corpus
        .documents
        .iter()
        .flat_map(|doc| scope_filter(doc, scope).iter())
        .filter(|c| c.is_argumentative() && non_empty(c))
        .map(|c| ComponentExample {
            clause_id: c.clause_id.clone(),
            document_id: c.document_id.clone(),
            text: c.text.clone(),
            role_target,
            label: u8::from(c.has_role(role_target)),
        })
        .collect()
}

/// Model input for one example.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExampleInput {
    Single { text: String },
    Pair { text_a: String, text_b: String },
}

/// Task-agnostic labeled example consumed by training.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: String,
    pub document_id: String,
    pub input: ExampleInput,
    pub label: u8,
}

impl From<ClauseExample> for LabeledExample {
    fn from(e: ClauseExample) -> Self {
        LabeledExample {
            id: e.clause_id,
            document_id: e.document_id,
            input: ExampleInput::Single { text: e.text },
            label: e.label,
        }
    }
}

impl From<ComponentExample> for LabeledExample {
    fn from(e: ComponentExample) -> Self {
        LabeledExample {
            id: e.clause_id,
            document_id: e.document_id,
            input: ExampleInput::Single { text: e.text },
            label: e.label,
        }
    }
}

impl From<ClausePairExample> for LabeledExample {
    fn from(e: ClausePairExample) -> Self {
        LabeledExample {
            id: format!("{}|{}", e.clause_id_a, e.clause_id_b),
            document_id: e.document_id,
            input: ExampleInput::Pair {
                text_a: e.text_a,
                text_b: e.text_b,
            },
            label: e.label,
        }
    }
}

/// Examples for `task`. Scope only applies to clause recognition; the later
/// stages consume gold argument clauses of the whole document.
pub fn build_task(corpus: &Corpus, task: Task, scope: Scope, window: usize) -> Result<Vec<LabeledExample>, TaskError> {
    Ok(match task {
        Task::ClauseRecognition => build_clause_recognition(corpus, scope).into_iter().map(Into::into).collect(),
        Task::RelationMining => build_relation_task(corpus, window)?.into_iter().map(Into::into).collect(),
        Task::PremiseCls => build_component_task(corpus, Role::Premise, Scope::Full)
            .into_iter()
            .map(Into::into)
            .collect(),
        Task::ConclusionCls => build_component_task(corpus, Role::Conclusion, Scope::Full)
            .into_iter()
            .map(Into::into)
            .collect(),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LabelStats {
    pub total: usize,
    pub positive: usize,
    pub negative: usize,
}

pub fn label_stats(examples: &[LabeledExample]) -> LabelStats {
    let positive = examples.iter().filter(|e| e.label == 1).count();
    LabelStats {
        total: examples.len(),
        positive,
        negative: examples.len() - positive,
    }
}
