use std::fs;
use std::path::Path;

use argmine::training::{load_grid_corpus, run_grid, GridConfig, GridOptions};

fn smoke(out: &Path, runs: usize) -> GridConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke_grid.json");
    let mut grid = GridConfig::load(&path).unwrap();
    grid.output_dir = out.to_path_buf();
    for e in &mut grid.experiments {
        e.runs = runs;
        e.max_epochs = Some(8);
    }
    let mut second = grid.experiments[0].clone();
    second.head_id = "cnn".parse().unwrap();
    second.head.cnn_filters = 8;
    grid.experiments.push(second);
    grid
}

fn reports(out: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(out.join("reports"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn interrupted_grid_resumes_to_identical_reports() {
    let full_dir = tempfile::tempdir().unwrap();
    let grid = smoke(full_dir.path(), 3);
    let corpus = load_grid_corpus(&grid).unwrap();
    let full = run_grid(&grid, &corpus, &GridOptions::default()).unwrap();
    assert_eq!(full.executed, 6);
    assert!(full.failures.is_empty());
    assert_eq!(full.rows.len(), 2);
    assert!(full.rows.iter().all(|r| r.metrics.n_runs == 3));

    let part_dir = tempfile::tempdir().unwrap();
    let grid = smoke(part_dir.path(), 3);
    let first = run_grid(
        &grid,
        &corpus,
        &GridOptions {
            jobs: 1,
            max_new_runs: Some(4),
        },
    )
    .unwrap();
    assert_eq!(first.executed, 4);
    let rest = run_grid(&grid, &corpus, &GridOptions::default()).unwrap();
    assert_eq!((rest.executed, rest.skipped), (2, 4));
    assert_eq!(reports(full_dir.path()), reports(part_dir.path()));
}

#[test]
fn parallel_jobs_match_serial_execution() {
    let serial = tempfile::tempdir().unwrap();
    let parallel = tempfile::tempdir().unwrap();
    let grid = smoke(serial.path(), 2);
    let corpus = load_grid_corpus(&grid).unwrap();
    run_grid(&grid, &corpus, &GridOptions::default()).unwrap();
    let grid = smoke(parallel.path(), 2);
    run_grid(
        &grid,
        &corpus,
        &GridOptions {
            jobs: 3,
            max_new_runs: None,
        },
    )
    .unwrap();
    assert_eq!(reports(serial.path()), reports(parallel.path()));
}

#[test]
fn failing_runs_are_recorded_and_the_grid_continues() {
    let dir = tempfile::tempdir().unwrap();
    let mut grid = smoke(dir.path(), 1);
    // Divergent optimization trips the non-finite loss guard.
    grid.experiments[1].learning_rate = 1e300;
    let corpus = load_grid_corpus(&grid).unwrap();
    let outcome = run_grid(&grid, &corpus, &GridOptions::default()).unwrap();
    assert_eq!(outcome.failures.len(), 1);
    assert_eq!(outcome.rows.len(), 1);
    let failed: Vec<_> = walk(&dir.path().join("runs"))
        .into_iter()
        .filter(|p| p.to_string_lossy().ends_with(".failed.json"))
        .collect();
    assert_eq!(failed.len(), 1);
    let text = fs::read_to_string(&failed[0]).unwrap();
    assert!(text.contains("non-finite") || text.contains("NonFinite"), "{text}");
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out
}
