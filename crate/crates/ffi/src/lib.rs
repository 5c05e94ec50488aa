//! C ABI over the argmine library.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Fallible calls return an [`ArgmineStatus`];
//! the message of the most recent failure on the calling thread is available
//! from [`argmine_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use argmine::corpus::{demo_corpus, parse_corpus, split_corpus, Corpus, CorpusFormat, DemoOptions, Scope, Split};
use argmine::embeddings::{load_backend, EmbeddingBackend};
use argmine::evaluation::weighted_metrics;
use argmine::taskgen::{build_task, ExampleInput, Task, DEFAULT_WINDOW};
use argmine::training::Classifier;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArgmineStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Model = 5,
    Panic = 6,
}

/// Weighted metrics over all classes.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ArgmineMetrics {
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    /// Per-class ratios whose denominator was zero and were scored as 0.
    pub zero_division: usize,
}

/// Opaque corpus handle.
pub struct ArgmineCorpus {
    corpus: Corpus,
}

/// Opaque train/test split handle.
pub struct ArgmineSplit {
    split: Split,
}

/// Opaque handle to a trained classifier and the backend it reads.
pub struct ArgmineModel {
    classifier: Classifier,
    backend: Box<dyn EmbeddingBackend>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(message).ok());
}

fn fail(status: ArgmineStatus, message: impl Into<String>) -> ArgmineStatus {
    set_error(message);
    status
}

/// Runs `f`, turning panics into [`ArgmineStatus::Panic`].
fn guarded(f: impl FnOnce() -> ArgmineStatus) -> ArgmineStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(ArgmineStatus::Panic, message)
        }
    }
}

/// # Safety
/// `s` must be null or a valid NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char, name: &str) -> Result<&'a str, ArgmineStatus> {
    if s.is_null() {
        return Err(fail(ArgmineStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(ArgmineStatus::InvalidArgument, format!("`{name}` is not UTF-8")))
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn argmine_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses a JSONL corpus file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn argmine_corpus_load(path: *const c_char, out: *mut *mut ArgmineCorpus) -> ArgmineStatus {
    guarded(|| {
        if out.is_null() {
            return fail(ArgmineStatus::NullPointer, "`out` is null");
        }
        let path = try_status!(read_str(path, "path"));
        match parse_corpus(Path::new(path), CorpusFormat::Jsonl) {
            Ok(corpus) => {
                *out = Box::into_raw(Box::new(ArgmineCorpus { corpus }));
                ArgmineStatus::Ok
            }
            Err(e @ argmine::corpus::CorpusError::Io { .. }) => fail(ArgmineStatus::Io, e.to_string()),
            Err(e) => fail(ArgmineStatus::Parse, e.to_string()),
        }
    })
}

/// Generates the synthetic demo corpus.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn argmine_corpus_demo(documents: usize, seed: u64, out: *mut *mut ArgmineCorpus) -> ArgmineStatus {
    guarded(|| {
        if out.is_null() {
            return fail(ArgmineStatus::NullPointer, "`out` is null");
        }
        let corpus = demo_corpus(&DemoOptions { documents, seed });
        *out = Box::into_raw(Box::new(ArgmineCorpus { corpus }));
        ArgmineStatus::Ok
    })
}

/// # Safety
/// `corpus` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn argmine_corpus_free(corpus: *mut ArgmineCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// # Safety
/// `corpus` must be null or a live corpus handle.
#[no_mangle]
pub unsafe extern "C" fn argmine_corpus_document_count(corpus: *const ArgmineCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.corpus.documents.len())
}

/// # Safety
/// `corpus` must be null or a live corpus handle.
#[no_mangle]
pub unsafe extern "C" fn argmine_corpus_clause_count(corpus: *const ArgmineCorpus) -> usize {
    corpus
        .as_ref()
        .map_or(0, |c| c.corpus.documents.iter().map(|d| d.clauses.len()).sum())
}

/// Number of validation warnings (for example arguments with two
/// conclusions) raised while loading.
///
/// # Safety
/// `corpus` must be null or a live corpus handle.
#[no_mangle]
pub unsafe extern "C" fn argmine_corpus_warning_count(corpus: *const ArgmineCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.corpus.warnings.len())
}

/// Number of labeled examples a task yields. `task` is one of
/// `clause_recognition`, `relation_mining`, `premise_cls`, `conclusion_cls`;
/// `scope` is `full` or `law_section`.
///
/// # Safety
/// `corpus` must be a live handle, `task` and `scope` valid strings and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn argmine_task_example_count(
    corpus: *const ArgmineCorpus,
    task: *const c_char,
    scope: *const c_char,
    out: *mut usize,
) -> ArgmineStatus {
    guarded(|| {
        let Some(corpus) = corpus.as_ref() else {
            return fail(ArgmineStatus::NullPointer, "`corpus` is null");
        };
        if out.is_null() {
            return fail(ArgmineStatus::NullPointer, "`out` is null");
        }
        let task: Task = try_status!(read_str(task, "task")
            .and_then(|t| t.parse().map_err(|e: String| fail(ArgmineStatus::InvalidArgument, e))));
        let scope: Scope = try_status!(read_str(scope, "scope")
            .and_then(|s| s.parse().map_err(|e: String| fail(ArgmineStatus::InvalidArgument, e))));
        match build_task(&corpus.corpus, task, scope, DEFAULT_WINDOW) {
            Ok(examples) => {
                *out = examples.len();
                ArgmineStatus::Ok
            }
            Err(e) => fail(ArgmineStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Document-level train/test split with `k` validation folds.
///
/// # Safety
/// `corpus` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn argmine_split_new(
    corpus: *const ArgmineCorpus,
    train_fraction: f64,
    k: usize,
    seed: u64,
    out: *mut *mut ArgmineSplit,
) -> ArgmineStatus {
    guarded(|| {
        let Some(corpus) = corpus.as_ref() else {
            return fail(ArgmineStatus::NullPointer, "`corpus` is null");
        };
        if out.is_null() {
            return fail(ArgmineStatus::NullPointer, "`out` is null");
        }
        match split_corpus(&corpus.corpus, train_fraction, k, seed) {
            Ok(split) => {
                *out = Box::into_raw(Box::new(ArgmineSplit { split }));
                ArgmineStatus::Ok
            }
            Err(e) => fail(ArgmineStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `split` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn argmine_split_free(split: *mut ArgmineSplit) {
    if !split.is_null() {
        drop(Box::from_raw(split));
    }
}

/// # Safety
/// `split` must be null or a live split handle.
#[no_mangle]
pub unsafe extern "C" fn argmine_split_train_count(split: *const ArgmineSplit) -> usize {
    split.as_ref().map_or(0, |s| s.split.train_doc_ids.len())
}

/// # Safety
/// `split` must be null or a live split handle.
#[no_mangle]
pub unsafe extern "C" fn argmine_split_test_count(split: *const ArgmineSplit) -> usize {
    split.as_ref().map_or(0, |s| s.split.test_doc_ids.len())
}

/// # Safety
/// `split` must be null or a live split handle.
#[no_mangle]
pub unsafe extern "C" fn argmine_split_fold_count(split: *const ArgmineSplit) -> usize {
    split.as_ref().map_or(0, |s| s.split.folds.len())
}

/// Number of validation documents in fold `fold`.
///
/// # Safety
/// `split` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn argmine_split_fold_val_count(split: *const ArgmineSplit, fold: usize, out: *mut usize) -> ArgmineStatus {
    let Some(split) = split.as_ref() else {
        return fail(ArgmineStatus::NullPointer, "`split` is null");
    };
    if out.is_null() {
        return fail(ArgmineStatus::NullPointer, "`out` is null");
    }
    match split.split.folds.get(fold) {
        Some((_, val)) => {
            *out = val.len();
            ArgmineStatus::Ok
        }
        None => fail(
            ArgmineStatus::InvalidArgument,
            format!("fold {fold} out of range (k = {})", split.split.folds.len()),
        ),
    }
}

/// Support-weighted precision, recall and F1 of `len` label pairs.
///
/// # Safety
/// `y_true` and `y_pred` must point to `len` readable values; `out` must be
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn argmine_weighted_metrics(
    y_true: *const usize,
    y_pred: *const usize,
    len: usize,
    out: *mut ArgmineMetrics,
) -> ArgmineStatus {
    guarded(|| {
        if y_true.is_null() || y_pred.is_null() || out.is_null() {
            return fail(ArgmineStatus::NullPointer, "null argument");
        }
        let y_true = std::slice::from_raw_parts(y_true, len);
        let y_pred = std::slice::from_raw_parts(y_pred, len);
        match weighted_metrics(y_true, y_pred) {
            Ok(m) => {
                *out = ArgmineMetrics {
                    weighted_precision: m.weighted_precision,
                    weighted_recall: m.weighted_recall,
                    weighted_f1: m.weighted_f1,
                    zero_division: m.zero_division,
                };
                ArgmineStatus::Ok
            }
            Err(e) => fail(ArgmineStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Loads a model artifact written by `argmine train --out` together with
/// the embedding backend it was trained on.
///
/// # Safety
/// `path` must be a valid string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn argmine_model_load(path: *const c_char, out: *mut *mut ArgmineModel) -> ArgmineStatus {
    guarded(|| {
        if out.is_null() {
            return fail(ArgmineStatus::NullPointer, "`out` is null");
        }
        let path = try_status!(read_str(path, "path"));
        let classifier = match Classifier::load(Path::new(path)) {
            Ok(c) => c,
            Err(argmine::training::TrainError::Io(e)) => return fail(ArgmineStatus::Io, e.to_string()),
            Err(e) => return fail(ArgmineStatus::Parse, e.to_string()),
        };
        let backend = match load_backend(&classifier.backend, None) {
            Ok(b) => b,
            Err(e) => return fail(ArgmineStatus::Model, e.to_string()),
        };
        *out = Box::into_raw(Box::new(ArgmineModel { classifier, backend }));
        ArgmineStatus::Ok
    })
}

/// # Safety
/// `model` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn argmine_model_free(model: *mut ArgmineModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Predicts the label of one clause, or of a clause pair when `text_b` is
/// non-null.
///
/// # Safety
/// `model` must be a live handle, `text` a valid string, `text_b` null or a
/// valid string, and `label` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn argmine_model_predict(
    model: *const ArgmineModel,
    text: *const c_char,
    text_b: *const c_char,
    label: *mut u32,
) -> ArgmineStatus {
    guarded(|| {
        let Some(model) = model.as_ref() else {
            return fail(ArgmineStatus::NullPointer, "`model` is null");
        };
        if label.is_null() {
            return fail(ArgmineStatus::NullPointer, "`label` is null");
        }
        let text = try_status!(read_str(text, "text")).to_string();
        let input = if text_b.is_null() {
            ExampleInput::Single { text }
        } else {
            ExampleInput::Pair {
                text_a: text,
                text_b: try_status!(read_str(text_b, "text_b")).to_string(),
            }
        };
        match model.classifier.predict(&input, model.backend.as_ref()) {
            Ok(l) => {
                *label = l as u32;
                ArgmineStatus::Ok
            }
            Err(e) => fail(ArgmineStatus::Model, e.to_string()),
        }
    })
}
