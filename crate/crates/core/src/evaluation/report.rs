//! Result tables: markdown mirroring the published layouts (3 decimals,
//! baseline F1 underlined, per-column best bold, per-group best starred) and
//! a full-precision CSV.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AggregateMetrics, MetricsError};
use crate::corpus::Scope;
use crate::encoders::HeadKind;
use crate::taskgen::Task;

pub const MISSING: &str = "\u{2014}";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Clause recognition, law-section and full-text scopes side by side.
    Task1,
    /// Relation mining.
    Task2,
    /// Conclusion and premise classification plus their average F1.
    Task3,
}

impl Layout {
    pub const ALL: [Layout; 3] = [Layout::Task1, Layout::Task2, Layout::Task3];

    pub fn for_task(task: Task) -> Layout {
        match task {
            Task::ClauseRecognition => Layout::Task1,
            Task::RelationMining => Layout::Task2,
            Task::PremiseCls | Task::ConclusionCls => Layout::Task3,
        }
    }

    fn sections(self) -> Vec<Section> {
        match self {
            Layout::Task1 => vec![
                Section::new("sec", Task::ClauseRecognition, Some(Scope::LawSection)),
                Section::new("full", Task::ClauseRecognition, Some(Scope::Full)),
            ],
            Layout::Task2 => vec![Section::new("", Task::RelationMining, None)],
            Layout::Task3 => vec![
                Section::new("con", Task::ConclusionCls, None),
                Section::new("pre", Task::PremiseCls, None),
            ],
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layout::Task1 => "task1",
            Layout::Task2 => "task2",
            Layout::Task3 => "task3",
        })
    }
}

impl std::str::FromStr for Layout {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "task1" => Ok(Layout::Task1),
            "task2" => Ok(Layout::Task2),
            "task3" => Ok(Layout::Task3),
            other => Err(format!("unknown layout `{other}` (expected task1, task2 or task3)")),
        }
    }
}

struct Section {
    suffix: &'static str,
    task: Task,
    scope: Option<Scope>,
}

impl Section {
    fn new(suffix: &'static str, task: Task, scope: Option<Scope>) -> Self {
        Section { suffix, task, scope }
    }

    fn matches(&self, row: &AggregateRow) -> bool {
        row.task == self.task && self.scope.is_none_or(|s| s == row.scope)
    }

    fn column(&self, base: &str) -> String {
        if self.suffix.is_empty() {
            base.to_string()
        } else {
            format!("{base}_{}", self.suffix)
        }
    }

    fn header(&self, base: &str) -> String {
        if self.suffix.is_empty() {
            base.to_string()
        } else {
            format!("{base}-{}", self.suffix)
        }
    }
}

/// Mean test metrics of one configuration across its runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub task: Task,
    pub scope: Scope,
    pub backend_id: String,
    pub backend_label: String,
    pub head_id: HeadKind,
    pub metrics: AggregateMetrics,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Report {
    pub layout: Layout,
    pub markdown: String,
    pub csv: String,
    pub rows: usize,
}

struct TableRow<'a> {
    label: String,
    backend_id: &'a str,
    head_id: HeadKind,
    cells: Vec<Option<&'a AggregateMetrics>>,
}

impl TableRow<'_> {
    /// Numeric columns in display order; task 3 appends the average F1.
    fn values(&self, layout: Layout) -> Vec<Option<f64>> {
        let mut v: Vec<Option<f64>> = self
            .cells
            .iter()
            .flat_map(|c| [c.map(|m| m.mean.precision), c.map(|m| m.mean.recall), c.map(|m| m.mean.f1)])
            .collect();
        if layout == Layout::Task3 {
            v.push(match (self.cells[0], self.cells[1]) {
                (Some(con), Some(pre)) => Some((con.mean.f1 + pre.mean.f1) / 2.0),
                _ => None,
            });
        }
        v
    }
}

fn format_score(v: f64) -> String {
    let s = format!("{v:.3}");
    match s.strip_prefix('0') {
        Some(rest) if rest.starts_with('.') => rest.to_string(),
        _ => s,
    }
}

/// Groups rows by backend (first-appearance order) with heads in the
/// canonical order; one table row per backend/head combination present.
fn table_rows(aggregates: &[AggregateRow], layout: Layout) -> Vec<TableRow<'_>> {
    let sections = layout.sections();
    let relevant: Vec<&AggregateRow> = aggregates
        .iter()
        .filter(|r| sections.iter().any(|s| s.matches(r)))
        .collect();
    let mut backends: Vec<(&str, &str)> = Vec::new();
    for r in &relevant {
        if !backends.iter().any(|(id, _)| *id == r.backend_id) {
            backends.push((&r.backend_id, &r.backend_label));
        }
    }
    let mut rows = Vec::new();
    for (backend_id, label) in backends {
        for head in HeadKind::ALL {
            let cells: Vec<Option<&AggregateMetrics>> = sections
                .iter()
                .map(|s| {
                    relevant
                        .iter()
                        .find(|r| r.backend_id == backend_id && r.head_id == head && s.matches(r))
                        .map(|r| &r.metrics)
                })
                .collect();
            if cells.iter().all(Option::is_none) {
                continue;
            }
            let label = match head {
                HeadKind::Linear => label.to_string(),
                other => format!("{label}+{other}"),
            };
            rows.push(TableRow {
                label,
                backend_id,
                head_id: head,
                cells,
            });
        }
    }
    rows
}

fn headers(layout: Layout) -> Vec<String> {
    let mut h: Vec<String> = layout
        .sections()
        .iter()
        .flat_map(|s| [s.header("P"), s.header("R"), s.header("F1")])
        .collect();
    if layout == Layout::Task3 {
        h.push("avg-F1".into());
    }
    h
}

fn csv_headers(layout: Layout) -> Vec<String> {
    let mut h = vec!["model".to_string(), "backend_id".into(), "head_id".into()];
    for s in layout.sections() {
        for base in ["p", "r", "f1", "p_std", "r_std", "f1_std", "n_runs"] {
            h.push(s.column(base));
        }
    }
    if layout == Layout::Task3 {
        h.push("avg_f1".into());
    }
    h
}

pub fn render_report(aggregates: &[AggregateRow], layout: Layout) -> Result<Report, MetricsError> {
    let rows = table_rows(aggregates, layout);
    if rows.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(Report {
        layout,
        markdown: render_markdown(&rows, layout),
        csv: render_csv(&rows, layout),
        rows: rows.len(),
    })
}

fn render_markdown(rows: &[TableRow<'_>], layout: Layout) -> String {
    let values: Vec<Vec<Option<f64>>> = rows.iter().map(|r| r.values(layout)).collect();
    let n_cols = headers(layout).len();
    let best = |col: usize, filter: &dyn Fn(usize) -> bool| -> Option<f64> {
        (0..rows.len())
            .filter(|&i| filter(i))
            .filter_map(|i| values[i][col])
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
    };
    let f1_column = |col: usize| col % 3 == 2 || (layout == Layout::Task3 && col == n_cols - 1);

    let mut out = String::new();
    out.push_str(&format!("| Model Combination | {} |\n", headers(layout).join(" | ")));
    out.push_str(&format!("|---|{}\n", "---|".repeat(n_cols)));
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = (0..n_cols)
            .map(|col| match values[i][col] {
                None => MISSING.to_string(),
                Some(v) => {
                    let mut s = format_score(v);
                    if row.head_id == HeadKind::Linear && f1_column(col) {
                        s = format!("<u>{s}</u>");
                    }
                    if best(col, &|_| true) == Some(v) {
                        s = format!("**{s}**");
                    }
                    if best(col, &|j| rows[j].backend_id == row.backend_id) == Some(v) {
                        s.push_str("\\*");
                    }
                    s
                }
            })
            .collect();
        out.push_str(&format!("| {} | {} |\n", row.label, cells.join(" | ")));
    }
    out
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING.to_string(), |v| v.to_string())
}

fn render_csv(rows: &[TableRow<'_>], layout: Layout) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(csv_headers(layout)).expect("in-memory write");
    for row in rows {
        let mut record = vec![row.label.clone(), row.backend_id.to_string(), row.head_id.to_string()];
        for cell in &row.cells {
            record.extend([
                num(cell.map(|m| m.mean.precision)),
                num(cell.map(|m| m.mean.recall)),
                num(cell.map(|m| m.mean.f1)),
                num(cell.map(|m| m.std.precision)),
                num(cell.map(|m| m.std.recall)),
                num(cell.map(|m| m.std.f1)),
                cell.map_or_else(|| MISSING.to_string(), |m| m.n_runs.to_string()),
            ]);
        }
        if layout == Layout::Task3 {
            record.push(num(*row.values(layout).last().expect("avg column")));
        }
        w.write_record(&record).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// One parsed CSV row: numeric columns keyed by header, `None` for missing.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub model: String,
    pub backend_id: String,
    pub head_id: String,
    pub values: BTreeMap<String, Option<f64>>,
}

pub fn parse_report_csv(text: &str) -> Result<Vec<CsvRow>, csv::Error> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let mut values = BTreeMap::new();
        for (h, v) in headers.iter().zip(record.iter()).skip(3) {
            values.insert(h.to_string(), if v == MISSING { None } else { v.parse().ok() });
        }
        rows.push(CsvRow {
            model: record[0].to_string(),
            backend_id: record[1].to_string(),
            head_id: record[2].to_string(),
            values,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::Prf;

    fn agg(f1: f64) -> AggregateMetrics {
        AggregateMetrics {
            n_runs: 5,
            mean: Prf {
                precision: f1 + 0.01,
                recall: f1 - 0.01,
                f1,
            },
            std: Prf {
                precision: 0.001,
                recall: 0.002,
                f1: 0.003,
            },
        }
    }

    fn row(task: Task, scope: Scope, backend: &str, head: HeadKind, f1: f64) -> AggregateRow {
        AggregateRow {
            task,
            scope,
            backend_id: backend.into(),
            backend_label: backend.to_uppercase(),
            head_id: head,
            metrics: agg(f1),
        }
    }

    #[test]
    fn one_group_of_four_with_best_marked() {
        let rows: Vec<AggregateRow> = HeadKind::ALL
            .iter()
            .zip([0.7, 0.6, 0.9, 0.8])
            .map(|(&h, f)| row(Task::RelationMining, Scope::Full, "glove", h, f))
            .collect();
        let report = render_report(&rows, Layout::Task2).unwrap();
        assert_eq!(report.rows, 4);
        let lines: Vec<&str> = report.markdown.lines().collect();
        assert_eq!(lines[0], "| Model Combination | P | R | F1 |");
        assert_eq!(lines[2], "| GLOVE | .710 | .690 | <u>.700</u> |");
        assert_eq!(lines[4], r"| GLOVE+cnn | **.910**\* | **.890**\* | **.900**\* |");
    }

    #[test]
    fn task3_average_and_missing_cells() {
        let rows = vec![
            row(Task::ConclusionCls, Scope::Full, "b", HeadKind::Linear, 0.8),
            row(Task::PremiseCls, Scope::Full, "b", HeadKind::Linear, 0.9),
            row(Task::ConclusionCls, Scope::Full, "b", HeadKind::Cnn, 0.5),
        ];
        let report = render_report(&rows, Layout::Task3).unwrap();
        let parsed = parse_report_csv(&report.csv).unwrap();
        assert!((parsed[0].values["avg_f1"].unwrap() - 0.85).abs() < 1e-12);
        assert_eq!(parsed[1].values["f1_pre"], None);
        assert!(report.markdown.lines().nth(3).unwrap().contains(MISSING));
    }

    #[test]
    fn csv_is_lossless() {
        let rows = vec![
            row(Task::ClauseRecognition, Scope::LawSection, "x", HeadKind::Cnn, 0.1 + 0.2),
            row(Task::ClauseRecognition, Scope::Full, "x", HeadKind::Cnn, 2.0 / 3.0),
        ];
        let report = render_report(&rows, Layout::Task1).unwrap();
        let parsed = parse_report_csv(&report.csv).unwrap();
        assert_eq!(parsed.len(), 1);
        let v = &parsed[0].values;
        assert_eq!(v["f1_sec"], Some(0.1 + 0.2));
        assert_eq!(v["f1_full"], Some(2.0 / 3.0));
        assert_eq!(v["p_full"], Some(2.0 / 3.0 + 0.01));
        assert_eq!(v["f1_std_full"], Some(0.003));
    }

    #[test]
    fn full_grid_has_twenty_four_rows_per_table() {
        let backends = ["glove", "elmo", "lb-base", "lb-echr", "clb-harv", "lb-harv"];
        let mut rows = Vec::new();
        for b in backends {
            for h in HeadKind::ALL {
                rows.push(row(Task::ClauseRecognition, Scope::LawSection, b, h, 0.5));
                rows.push(row(Task::ClauseRecognition, Scope::Full, b, h, 0.5));
                rows.push(row(Task::RelationMining, Scope::Full, b, h, 0.5));
                rows.push(row(Task::PremiseCls, Scope::Full, b, h, 0.5));
                rows.push(row(Task::ConclusionCls, Scope::Full, b, h, 0.5));
            }
        }
        assert_eq!(rows.len(), 120);
        for layout in Layout::ALL {
            let report = render_report(&rows, layout).unwrap();
            assert_eq!(report.rows, 24);
            assert_eq!(report.markdown.lines().count(), 26);
        }
        let t1 = render_report(&rows, Layout::Task1).unwrap();
        let labels: Vec<String> = parse_report_csv(&t1.csv).unwrap().into_iter().map(|r| r.model).collect();
        assert_eq!(&labels[..5], ["GLOVE", "GLOVE+bilstm", "GLOVE+cnn", "GLOVE+resnet", "ELMO"]);
    }

    #[test]
    fn empty_report_is_an_error() {
        assert_eq!(render_report(&[], Layout::Task1), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn score_formatting() {
        assert_eq!(format_score(0.9081), ".908");
        assert_eq!(format_score(1.0), "1.000");
    }
}
