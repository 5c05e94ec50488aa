//! Command-line front end: corpus validation, splitting, task building,
//! training, evaluation, grids and reports.
//!
//! Exit codes: 0 clean, 1 warnings (or nothing to report), 2 errors.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::corpus::{corpus_stats, demo_corpus, parse_corpus, split_corpus, Corpus, CorpusFormat, DemoOptions, Scope};
use crate::embeddings::{load_backend, BackendSpec};
use crate::encoders::HeadKind;
use crate::evaluation::{render_report, Layout};
use crate::taskgen::{build_task, label_stats, Task, DEFAULT_WINDOW};
use crate::training::{
    collect_records, aggregate_records, cross_validate, evaluate, load_grid_corpus, partition, prepare_examples, run_grid,
    train_settings, write_reports, Classifier, ExperimentConfig, GridConfig, GridOptions,
};

/// Dimension of the built-in `mock` backend.
pub const MOCK_DIMENSION: usize = 300;

#[derive(Debug, Parser)]
#[command(name = "argmine", version, about = "Legal argument mining experiments")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a corpus and print per-document argument statistics.
    Validate(CorpusArgs),
    /// Print the document-level train/test split and validation folds.
    Split {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 0.8)]
        train_fraction: f64,
    },
    /// Emit the labeled examples of one task as JSONL.
    BuildTask {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        task: Task,
        #[arg(long, default_value = "full")]
        scope: Scope,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        /// Print label counts instead of examples.
        #[arg(long)]
        stats: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validate one configuration, report test metrics and save the
    /// selected model.
    Train(TrainArgs),
    /// Score a saved model on the test documents of a split.
    Evaluate {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        task: Task,
        #[arg(long, default_value = "full")]
        scope: Scope,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
    },
    /// Run every experiment of a grid file, resuming completed runs.
    Grid {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Replace the grid's corpus with the synthetic demo corpus.
        #[arg(long)]
        demo: bool,
        /// Write results here instead of the grid's `output_dir`.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// `key=value` overrides applied to every experiment.
        overrides: Vec<String>,
    },
    /// Render result tables from completed run records.
    Report {
        /// Grid output directory (holding `runs/`).
        #[arg(long)]
        runs_dir: PathBuf,
        /// task1, task2, task3; all layouts with data when omitted.
        #[arg(long)]
        layout: Option<Layout>,
    },
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// JSONL corpus file.
    #[arg(long, conflicts_with = "demo")]
    pub corpus: Option<PathBuf>,
    /// Use the synthetic demo corpus.
    #[arg(long)]
    pub demo: bool,
    /// Demo corpus size.
    #[arg(long, default_value_t = 12, requires = "demo")]
    pub documents: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Grid file supplying backend definitions.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub task: Task,
    #[arg(long, default_value = "full")]
    pub scope: Scope,
    #[arg(long, default_value = "mock")]
    pub backend: String,
    #[arg(long, default_value = "linear")]
    pub head: HeadKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Where to write the selected model.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `key=value` experiment overrides.
    pub overrides: Vec<String>,
}

fn load_corpus(args: &CorpusArgs) -> Result<Corpus> {
    match (&args.corpus, args.demo) {
        (Some(path), false) => parse_corpus(path, CorpusFormat::Jsonl).with_context(|| format!("reading {}", path.display())),
        (None, true) => Ok(demo_corpus(&DemoOptions {
            documents: args.documents,
            seed: 0,
        })),
        _ => bail!("pass either --corpus PATH or --demo"),
    }
}

fn resolve_backend(backend_id: &str, config: Option<&Path>) -> Result<BackendSpec> {
    if let Some(path) = config {
        let grid = GridConfig::load(path)?;
        if let Ok(spec) = grid.backend(backend_id) {
            return Ok(spec.clone());
        }
    }
    if backend_id == "mock" {
        return Ok(BackendSpec::mock(MOCK_DIMENSION));
    }
    bail!("unknown backend `{backend_id}`; define it in a grid file passed with --config")
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn cmd_validate(args: &CorpusArgs) -> Result<ExitCode> {
    let corpus = match load_corpus(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return Ok(ExitCode::from(2));
        }
    };
    let (per_doc, totals) = corpus_stats(&corpus);
    println!("document\tclauses\targument_clauses\targuments\tpremises\tconclusions");
    for s in per_doc.iter().chain(std::iter::once(&totals)) {
        println!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            s.document_id, s.clauses, s.argument_clauses, s.arguments, s.premises, s.conclusions
        );
    }
    println!("documents\t{}", per_doc.len());
    for w in &corpus.warnings {
        println!("warning: {w}");
    }
    Ok(if corpus.warnings.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_train(args: &TrainArgs) -> Result<ExitCode> {
    let corpus = load_corpus(&args.corpus)?;
    let spec = resolve_backend(&args.backend, args.config.as_deref())?;
    let mut config = ExperimentConfig::new(args.task, &args.backend, args.head);
    config.scope = args.scope;
    config.seed = args.seed;
    for o in &args.overrides {
        config.apply_override(o)?;
    }
    config.validate(&spec)?;
    let backend = load_backend(&spec, None)?;
    let split = split_corpus(&corpus, 0.8, config.k, args.split_seed)?;
    let examples = build_task(&corpus, config.task, config.effective_scope(), config.window)?;
    let (pool, test) = partition(prepare_examples(&examples, backend.as_ref())?, &split);
    let cv = cross_validate(&train_settings(&config, &spec), &spec, &config.head_config(), &split, &pool, config.seed)?;
    let (metrics, _) = evaluate(&cv.model, &test)?;
    for f in &cv.folds {
        println!(
            "fold {}: epochs {} (best {}), val weighted F1 {:.4}",
            f.fold,
            f.history.epochs_trained(),
            f.history.best_epoch,
            f.metrics.weighted_f1
        );
    }
    println!("selected fold {}", cv.selected);
    println!(
        "test weighted P {:.4} R {:.4} F1 {:.4}",
        metrics.weighted_precision, metrics.weighted_recall, metrics.weighted_f1
    );
    if let Some(out) = &args.out {
        cv.model.save(out)?;
        println!("model written to {}", out.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(runs_dir: &Path, layout: Option<Layout>) -> Result<ExitCode> {
    let groups = collect_records(runs_dir).with_context(|| format!("reading {}", runs_dir.display()))?;
    if groups.is_empty() {
        eprintln!("no completed run records under {}", runs_dir.display());
        return Ok(ExitCode::from(1));
    }
    let (rows, written) = write_reports(runs_dir)?;
    debug_assert_eq!(rows, aggregate_records(&groups)?);
    let layouts: Vec<Layout> = layout.map_or_else(|| Layout::ALL.to_vec(), |l| vec![l]);
    let mut printed = false;
    for l in layouts {
        if let Ok(report) = render_report(&rows, l) {
            println!("## {l}\n\n{}", report.markdown);
            printed = true;
        }
    }
    for path in written {
        log::info!("wrote {}", path.display());
    }
    Ok(if printed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

pub fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate(args) => cmd_validate(&args),
        Command::Split {
            corpus,
            seed,
            k,
            train_fraction,
        } => {
            let split = split_corpus(&load_corpus(&corpus)?, train_fraction, k, seed)?;
            print_json(&split)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::BuildTask {
            corpus,
            task,
            scope,
            window,
            stats,
            out,
        } => {
            let scope = if task.uses_scope() { scope } else { Scope::Full };
            let examples = build_task(&load_corpus(&corpus)?, task, scope, window)?;
            if stats {
                print_json(&label_stats(&examples))?;
                return Ok(ExitCode::SUCCESS);
            }
            let mut text = String::new();
            for e in &examples {
                text.push_str(&serde_json::to_string(e)?);
                text.push('\n');
            }
            match out {
                Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => std::io::stdout().lock().write_all(text.as_bytes())?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Train(args) => cmd_train(&args),
        Command::Evaluate {
            corpus,
            model,
            task,
            scope,
            split_seed,
            k,
            window,
        } => {
            let corpus = load_corpus(&corpus)?;
            let model = Classifier::load(&model).with_context(|| format!("loading {}", model.display()))?;
            let backend = load_backend(&model.backend, None)?;
            let split = split_corpus(&corpus, 0.8, k, split_seed)?;
            let scope = if task.uses_scope() { scope } else { Scope::Full };
            let examples = build_task(&corpus, task, scope, window)?;
            let (_, test) = partition(prepare_examples(&examples, backend.as_ref())?, &split);
            let (metrics, _) = evaluate(&model, &test)?;
            print_json(&metrics)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Grid {
            config,
            jobs,
            demo,
            output_dir,
            overrides,
        } => {
            let mut grid = GridConfig::load(&config)?;
            if demo {
                grid.corpus = None;
                grid.demo.get_or_insert(crate::training::DemoConfig { documents: 12, seed: 0 });
            }
            if let Some(dir) = output_dir {
                grid.output_dir = dir;
            }
            for experiment in &mut grid.experiments {
                for o in &overrides {
                    experiment.apply_override(o)?;
                }
            }
            let corpus = load_grid_corpus(&grid)?;
            let outcome = run_grid(&grid, &corpus, &GridOptions { jobs, max_new_runs: None })?;
            println!(
                "{} run(s) executed, {} reused, {} failed, {} aggregate row(s)",
                outcome.executed,
                outcome.skipped,
                outcome.failures.len(),
                outcome.rows.len()
            );
            for path in &outcome.reports {
                println!("{}", path.display());
            }
            Ok(if outcome.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Report { runs_dir, layout } => cmd_report(&runs_dir, layout),
    }
}

/// Parses arguments, runs the command and maps errors to exit code 2.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
