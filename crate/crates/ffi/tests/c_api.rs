use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use argmine::corpus::{demo_corpus, split_corpus, DemoOptions};
use argmine::embeddings::{BackendSpec, MockBackend};
use argmine::encoders::{HeadConfig, HeadKind};
use argmine::taskgen::{build_task, ExampleInput, Task};
use argmine::training::{prepare_examples, train_one, TrainSettings};
use argmine_ffi::*;

fn last_error() -> String {
    let p = argmine_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn demo_corpus_and_split_counts() {
    unsafe {
        let mut corpus = ptr::null_mut();
        assert_eq!(argmine_corpus_demo(42, 7, &mut corpus), ArgmineStatus::Ok);
        assert_eq!(argmine_corpus_document_count(corpus), 42);
        assert!(argmine_corpus_clause_count(corpus) > 42);
        assert_eq!(argmine_corpus_warning_count(corpus), 0);

        let mut split = ptr::null_mut();
        assert_eq!(argmine_split_new(corpus, 0.8, 5, 3, &mut split), ArgmineStatus::Ok);
        assert_eq!(argmine_split_train_count(split), 34);
        assert_eq!(argmine_split_test_count(split), 8);
        assert_eq!(argmine_split_fold_count(split), 5);
        let mut sizes = Vec::new();
        for f in 0..5 {
            let mut n = 0;
            assert_eq!(argmine_split_fold_val_count(split, f, &mut n), ArgmineStatus::Ok);
            sizes.push(n);
        }
        assert_eq!(sizes, [7, 7, 7, 7, 6]);
        let mut n = 0;
        assert_eq!(argmine_split_fold_val_count(split, 5, &mut n), ArgmineStatus::InvalidArgument);
        assert!(last_error().contains("out of range"));

        let task = CString::new("relation_mining").unwrap();
        let scope = CString::new("full").unwrap();
        let mut count = 0;
        assert_eq!(argmine_task_example_count(corpus, task.as_ptr(), scope.as_ptr(), &mut count), ArgmineStatus::Ok);
        let c = demo_corpus(&DemoOptions { documents: 42, seed: 7 });
        assert_eq!(count, build_task(&c, Task::RelationMining, argmine::corpus::Scope::Full, 5).unwrap().len());

        let bad = CString::new("summarization").unwrap();
        assert_eq!(
            argmine_task_example_count(corpus, bad.as_ptr(), scope.as_ptr(), &mut count),
            ArgmineStatus::InvalidArgument
        );

        argmine_split_free(split);
        argmine_corpus_free(corpus);
    }
}

#[test]
fn metrics_hand_case() {
    let y_true = [1usize, 1, 1, 0];
    let y_pred = [1usize, 0, 1, 1];
    let mut m = ArgmineMetrics::default();
    let status = unsafe { argmine_weighted_metrics(y_true.as_ptr(), y_pred.as_ptr(), 4, &mut m) };
    assert_eq!(status, ArgmineStatus::Ok);
    assert_eq!((m.weighted_precision, m.weighted_recall, m.weighted_f1), (0.5, 0.5, 0.5));

    let status = unsafe { argmine_weighted_metrics(y_true.as_ptr(), y_pred.as_ptr(), 0, &mut m) };
    assert_eq!(status, ArgmineStatus::InvalidArgument);
}

#[test]
fn errors_and_null_handles() {
    unsafe {
        let missing = CString::new("/nonexistent/corpus.jsonl").unwrap();
        let mut corpus = ptr::null_mut();
        assert_eq!(argmine_corpus_load(missing.as_ptr(), &mut corpus), ArgmineStatus::Io);
        assert!(corpus.is_null());
        assert!(last_error().contains("/nonexistent/corpus.jsonl"));

        assert_eq!(argmine_corpus_load(ptr::null(), &mut corpus), ArgmineStatus::NullPointer);
        assert_eq!(argmine_corpus_document_count(ptr::null()), 0);
        assert_eq!(argmine_split_train_count(ptr::null()), 0);
        argmine_corpus_free(ptr::null_mut());
        argmine_split_free(ptr::null_mut());
        argmine_model_free(ptr::null_mut());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"not\": \"a clause\"}\n").unwrap();
        let cpath = CString::new(path.to_str().unwrap()).unwrap();
        assert_eq!(argmine_corpus_load(cpath.as_ptr(), &mut corpus), ArgmineStatus::Parse);
    }
}

#[test]
fn corpus_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("demo.jsonl");
    demo_corpus(&DemoOptions::default()).write_jsonl(&path).unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut corpus = ptr::null_mut();
        assert_eq!(argmine_corpus_load(cpath.as_ptr(), &mut corpus), ArgmineStatus::Ok);
        assert_eq!(argmine_corpus_document_count(corpus), 12);
        argmine_corpus_free(corpus);
    }
}

#[test]
fn model_predictions_match_the_library() {
    let corpus = demo_corpus(&DemoOptions::default());
    let split = split_corpus(&corpus, 0.8, 5, 0).unwrap();
    let spec = BackendSpec::mock(16);
    let backend = MockBackend::new(spec.clone());
    let examples = build_task(&corpus, Task::ClauseRecognition, argmine::corpus::Scope::Full, 5).unwrap();
    let prepared = prepare_examples(&examples, &backend).unwrap();
    let (train, val): (Vec<_>, Vec<_>) = prepared
        .into_iter()
        .filter(|e| split.train_doc_ids.contains(&e.document_id))
        .partition(|e| split.folds[0].0.contains(&e.document_id));
    let settings = TrainSettings {
        max_epochs: 5,
        batch_size: 16,
        learning_rate: 1e-3,
        patience: 2,
    };
    let (model, _) = train_one(&settings, &spec, &HeadConfig::new(HeadKind::Cnn), &train, &val, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();

    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        let mut handle = ptr::null_mut();
        assert_eq!(argmine_model_load(cpath.as_ptr(), &mut handle), ArgmineStatus::Ok);
        for e in examples.iter().take(25) {
            let ExampleInput::Single { text } = &e.input else {
                unreachable!()
            };
            let ctext = CString::new(text.as_str()).unwrap();
            let mut label = u32::MAX;
            assert_eq!(argmine_model_predict(handle, ctext.as_ptr(), ptr::null(), &mut label), ArgmineStatus::Ok);
            assert_eq!(label as usize, model.predict(&e.input, &backend).unwrap());
        }
        let empty = CString::new("").unwrap();
        let mut label = 0;
        assert_eq!(argmine_model_predict(handle, empty.as_ptr(), ptr::null(), &mut label), ArgmineStatus::Model);
        assert!(last_error().contains("empty"));
        argmine_model_free(handle);
    }
}

fn header_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include")
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use_header.c");
    std::fs::write(
        &src,
        r#"#include "argmine.h"
int main(void) {
    ArgmineCorpus *corpus = NULL;
    ArgmineMetrics m;
    size_t y[2] = {0, 1};
    if (argmine_corpus_demo(12, 0, &corpus) != ARGMINE_STATUS_OK) return 1;
    argmine_corpus_free(corpus);
    return argmine_weighted_metrics(y, y, 2, &m) == ARGMINE_STATUS_OK ? 0 : 1;
}
"#,
    )
    .unwrap();
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let status = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg("-I")
            .arg(header_dir())
            .arg(&src)
            .status();
        match status {
            Ok(s) => assert!(s.success(), "{compiler} rejected the header"),
            Err(e) => eprintln!("skipping {compiler}: {e}"),
        }
    }
}
