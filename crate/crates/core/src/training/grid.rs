use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    cross_validate, evaluate, partition, prepare_examples, write_json_atomic, ExperimentConfig, GridConfig, PreparedExample,
    SplitConfig, TrainError, TrainSettings,
};
use crate::corpus::{demo_corpus, parse_corpus, split_corpus, Corpus, CorpusFormat, DemoOptions, Split};
use crate::embeddings::{load_backend, rule_tokenize, BackendFamily, BackendSpec, EmbeddingBackend};
use crate::evaluation::{aggregate_runs, render_report, AggregateRow, Layout, MetricsTriple};
use crate::taskgen::build_task;

/// Outcome of one repetition of one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub backend: BackendSpec,
    pub run_index: usize,
    pub seed: u64,
    pub max_epochs: usize,
    pub split_seed: u64,
    pub fold_metrics: Vec<MetricsTriple>,
    pub fold_epochs: Vec<usize>,
    pub fold_val_doc_ids: Vec<BTreeSet<String>>,
    pub selected_fold: usize,
    pub test_doc_ids: BTreeSet<String>,
    pub test_metrics: MetricsTriple,
    /// `[true label][predicted label]` counts on the test set.
    pub test_confusion: [[usize; 2]; 2],
    pub epochs_trained: usize,
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedRun {
    pub config: ExperimentConfig,
    pub run_index: usize,
    pub error: String,
}

/// Everything a single run needs besides its index.
pub struct RunContext<'a> {
    pub config: &'a ExperimentConfig,
    pub backend: &'a BackendSpec,
    pub split: &'a Split,
    pub examples: &'a [PreparedExample],
}

pub fn train_settings(config: &ExperimentConfig, backend: &BackendSpec) -> TrainSettings {
    TrainSettings {
        max_epochs: config.effective_max_epochs(backend),
        batch_size: config.batch_size,
        learning_rate: config.learning_rate,
        patience: config.patience,
    }
}

/// Cross-validates on the training documents, then scores the selected
/// fold model on the test documents.
pub fn execute_run(ctx: &RunContext<'_>, run_index: usize) -> Result<RunRecord, TrainError> {
    let started = Instant::now();
    let seed = ctx.config.seed.wrapping_add(run_index as u64);
    let settings = train_settings(ctx.config, ctx.backend);
    let (pool, test) = partition(ctx.examples.to_vec(), ctx.split);
    let cv = cross_validate(&settings, ctx.backend, &ctx.config.head_config(), ctx.split, &pool, seed)?;
    let (test_metrics, y_pred) = evaluate(&cv.model, &test)?;
    let mut confusion = [[0usize; 2]; 2];
    let test_labels = ctx
        .examples
        .iter()
        .filter(|e| ctx.split.test_doc_ids.contains(&e.document_id))
        .map(|e| e.label);
    for (t, p) in test_labels.zip(&y_pred) {
        confusion[t.min(1)][(*p).min(1)] += 1;
    }
    Ok(RunRecord {
        config: ctx.config.clone(),
        backend: ctx.backend.clone(),
        run_index,
        seed,
        max_epochs: settings.max_epochs,
        split_seed: ctx.split.seed,
        fold_metrics: cv.folds.iter().map(|f| f.metrics.clone()).collect(),
        fold_epochs: cv.folds.iter().map(|f| f.history.epochs_trained()).collect(),
        fold_val_doc_ids: cv.folds.iter().map(|f| f.val_doc_ids.clone()).collect(),
        selected_fold: cv.selected,
        test_doc_ids: test.document_ids(),
        test_metrics,
        test_confusion: confusion,
        epochs_trained: cv.folds[cv.selected].history.epochs_trained(),
        wall_time: started.elapsed().as_secs_f64(),
    })
}

/// Stable identifier of a configuration's results: the first 16 hex digits
/// of SHA-256 over the experiment (minus its run count), the backend, the
/// split settings and the corpus contents.
pub fn config_hash(config: &ExperimentConfig, backend: &BackendSpec, split: &SplitConfig, corpus_digest: &str) -> String {
    let mut keyed = config.clone();
    keyed.runs = 0;
    let payload = serde_json::json!({
        "config": keyed,
        "backend": backend,
        "split": split,
        "corpus": corpus_digest,
    });
    let digest = Sha256::digest(payload.to_string().as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn corpus_digest(corpus: &Corpus) -> String {
    Sha256::digest(corpus.to_jsonl().as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn run_path(dir: &Path, run_index: usize) -> PathBuf {
    dir.join(format!("{run_index}.json"))
}

fn failed_path(dir: &Path, run_index: usize) -> PathBuf {
    dir.join(format!("{run_index}.failed.json"))
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Manifest {
    /// Config hashes in grid order.
    pub configs: Vec<String>,
}

#[derive(Debug, Default)]
pub struct GridOutcome {
    pub executed: usize,
    pub skipped: usize,
    pub failures: Vec<FailedRun>,
    pub rows: Vec<AggregateRow>,
    pub reports: Vec<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct GridOptions {
    pub jobs: usize,
    /// Stop after this many newly executed runs (interruption drills).
    pub max_new_runs: Option<usize>,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            jobs: 1,
            max_new_runs: None,
        }
    }
}

pub fn load_grid_corpus(grid: &GridConfig) -> Result<Corpus, TrainError> {
    match (&grid.corpus, &grid.demo) {
        (Some(path), None) => Ok(parse_corpus(path, CorpusFormat::Jsonl)?),
        (None, Some(demo)) => Ok(demo_corpus(&DemoOptions {
            documents: demo.documents,
            seed: demo.seed,
        })),
        _ => Err(TrainError::InvalidConfig("exactly one of `corpus` and `demo` is required".into())),
    }
}

fn corpus_vocabulary(corpus: &Corpus) -> HashSet<String> {
    corpus
        .documents
        .iter()
        .flat_map(|d| &d.clauses)
        .flat_map(|c| rule_tokenize(&c.text))
        .collect()
}

/// Runs every configuration `runs` times (seeds `seed + i`), writing one
/// record per run under `output_dir/runs/<config-hash>/`. Existing records
/// are reused; failed runs are recorded and the grid continues.
pub fn run_grid(grid: &GridConfig, corpus: &Corpus, options: &GridOptions) -> Result<GridOutcome, TrainError> {
    grid.validate()?;
    let runs_dir = grid.output_dir.join("runs");
    fs::create_dir_all(&runs_dir)?;
    let digest = corpus_digest(corpus);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.max(1))
        .build()
        .map_err(|e| TrainError::InvalidConfig(e.to_string()))?;

    let mut manifest = Manifest::default();
    let mut splits: HashMap<usize, Split> = HashMap::new();
    let mut backends: HashMap<String, Arc<dyn EmbeddingBackend>> = HashMap::new();
    let mut vocabulary: Option<HashSet<String>> = None;
    let mut outcome = GridOutcome::default();
    let mut budget = options.max_new_runs;

    for config in &grid.experiments {
        let spec = grid.backend(&config.backend_id)?;
        let hash = config_hash(config, spec, &grid.split, &digest);
        manifest.configs.push(hash.clone());
        let dir = runs_dir.join(&hash);
        fs::create_dir_all(&dir)?;
        let pending: Vec<usize> = (0..config.runs).filter(|&i| !run_path(&dir, i).exists()).collect();
        outcome.skipped += config.runs - pending.len();
        let pending: Vec<usize> = match budget.as_mut() {
            Some(left) => {
                let take = pending.len().min(*left);
                *left -= take;
                pending.into_iter().take(take).collect()
            }
            None => pending,
        };
        if pending.is_empty() {
            continue;
        }

        let split = match splits.get(&config.k) {
            Some(s) => s.clone(),
            None => {
                let s = split_corpus(corpus, grid.split.train_fraction, config.k, grid.split.seed)?;
                splits.insert(config.k, s.clone());
                s
            }
        };
        let backend = match backends.get(&spec.backend_id) {
            Some(b) => Arc::clone(b),
            None => {
                let vocab = (spec.family == BackendFamily::Static)
                    .then(|| vocabulary.get_or_insert_with(|| corpus_vocabulary(corpus)) as &HashSet<String>);
                let b: Arc<dyn EmbeddingBackend> = Arc::from(load_backend(spec, vocab)?);
                backends.insert(spec.backend_id.clone(), Arc::clone(&b));
                b
            }
        };
        let examples = build_task(corpus, config.task, config.effective_scope(), config.window)?;
        let prepared = prepare_examples(&examples, backend.as_ref())?;
        let ctx = RunContext {
            config,
            backend: spec,
            split: &split,
            examples: &prepared,
        };
        log::info!(
            "{} / {} / {} / {}: {} run(s) pending",
            config.task,
            config.effective_scope(),
            spec.backend_id,
            config.head_id,
            pending.len()
        );
        let results: Vec<(usize, Result<RunRecord, TrainError>)> =
            pool.install(|| pending.par_iter().map(|&i| (i, execute_run(&ctx, i))).collect());
        for (i, result) in results {
            outcome.executed += 1;
            match result {
                Ok(record) => {
                    write_json_atomic(&run_path(&dir, i), &record)?;
                    let stale = failed_path(&dir, i);
                    if stale.exists() {
                        fs::remove_file(stale)?;
                    }
                }
                Err(e) => {
                    log::error!("run {i} of {hash} failed: {e}");
                    let failed = FailedRun {
                        config: config.clone(),
                        run_index: i,
                        error: e.to_string(),
                    };
                    write_json_atomic(&failed_path(&dir, i), &failed)?;
                    outcome.failures.push(failed);
                }
            }
        }
    }
    write_json_atomic(&grid.output_dir.join("manifest.json"), &manifest)?;
    let (rows, reports) = write_reports(&grid.output_dir)?;
    outcome.rows = rows;
    outcome.reports = reports;
    Ok(outcome)
}

/// Completed run records grouped by config hash, in manifest order when a
/// manifest exists and directory-name order otherwise.
pub fn collect_records(output_dir: &Path) -> Result<Vec<(String, Vec<RunRecord>)>, TrainError> {
    let runs_dir = output_dir.join("runs");
    let manifest_path = output_dir.join("manifest.json");
    // A missing output directory is an error; one without runs is just empty.
    fs::metadata(output_dir)?;
    let hashes: Vec<String> = if manifest_path.exists() {
        serde_json::from_str::<Manifest>(&fs::read_to_string(&manifest_path)?)?.configs
    } else if !runs_dir.is_dir() {
        Vec::new()
    } else {
        let mut names: Vec<String> = fs::read_dir(&runs_dir)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        names
    };
    let mut groups = Vec::new();
    for hash in hashes {
        let dir = runs_dir.join(&hash);
        if !dir.is_dir() {
            continue;
        }
        let mut indexed: BTreeMap<usize, RunRecord> = BTreeMap::new();
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            let Some(index) = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_suffix(".json"))
                .and_then(|n| n.parse::<usize>().ok())
            else {
                continue;
            };
            indexed.insert(index, serde_json::from_str(&fs::read_to_string(&path)?)?);
        }
        if !indexed.is_empty() {
            groups.push((hash, indexed.into_values().collect()));
        }
    }
    Ok(groups)
}

pub fn aggregate_records(groups: &[(String, Vec<RunRecord>)]) -> Result<Vec<AggregateRow>, TrainError> {
    groups
        .iter()
        .map(|(_, records)| {
            let first = &records[0];
            let triples: Vec<MetricsTriple> = records.iter().map(|r| r.test_metrics.clone()).collect();
            Ok(AggregateRow {
                task: first.config.task,
                scope: first.config.effective_scope(),
                backend_id: first.backend.backend_id.clone(),
                backend_label: first.backend.display_name().to_string(),
                head_id: first.config.head_id,
                metrics: aggregate_runs(&triples)?,
            })
        })
        .collect()
}

/// Renders every layout that has at least one row into
/// `output_dir/reports/<layout>.{md,csv}`.
pub fn write_reports(output_dir: &Path) -> Result<(Vec<AggregateRow>, Vec<PathBuf>), TrainError> {
    let rows = aggregate_records(&collect_records(output_dir)?)?;
    let dir = output_dir.join("reports");
    fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    for layout in Layout::ALL {
        let Ok(report) = render_report(&rows, layout) else {
            continue;
        };
        for (ext, body) in [("md", &report.markdown), ("csv", &report.csv)] {
            let path = dir.join(format!("{layout}.{ext}"));
            fs::write(&path, body)?;
            written.push(path);
        }
    }
    Ok((rows, written))
}
