use serde::{Deserialize, Serialize};

use super::{MetricsError, MetricsTriple};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Mean and sample standard deviation of weighted metrics over runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub n_runs: usize,
    pub mean: Prf,
    pub std: Prf,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn aggregate_runs(records: &[MetricsTriple]) -> Result<AggregateMetrics, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let column = |f: fn(&MetricsTriple) -> f64| mean_std(&records.iter().map(f).collect::<Vec<_>>());
    let (p, ps) = column(|m| m.weighted_precision);
    let (r, rs) = column(|m| m.weighted_recall);
    let (f, fs) = column(|m| m.weighted_f1);
    Ok(AggregateMetrics {
        n_runs: records.len(),
        mean: Prf {
            precision: p,
            recall: r,
            f1: f,
        },
        std: Prf {
            precision: ps,
            recall: rs,
            f1: fs,
        },
    })
}
