use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::MetricsError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Support-weighted precision/recall/F1 with the per-class breakdown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsTriple {
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub per_class: BTreeMap<usize, ClassMetrics>,
    /// Number of per-class ratios whose denominator was zero (scored as 0).
    #[serde(default)]
    pub zero_division: usize,
}

impl MetricsTriple {
    pub fn total_support(&self) -> usize {
        self.per_class.values().map(|c| c.support).sum()
    }
}

fn ratio(num: usize, den: usize, zero_division: &mut usize) -> f64 {
    if den == 0 {
        *zero_division += 1;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class scores over the union of labels seen in either vector, averaged
/// with weights `support_c / N`.
pub fn weighted_metrics(y_true: &[usize], y_pred: &[usize]) -> Result<MetricsTriple, MetricsError> {
    if y_true.len() != y_pred.len() {
        return Err(MetricsError::LengthMismatch {
            y_true: y_true.len(),
            y_pred: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let classes: BTreeSet<usize> = y_true.iter().chain(y_pred).copied().collect();
    let mut tp: BTreeMap<usize, usize> = BTreeMap::new();
    let mut predicted: BTreeMap<usize, usize> = BTreeMap::new();
    let mut support: BTreeMap<usize, usize> = BTreeMap::new();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        *support.entry(t).or_default() += 1;
        *predicted.entry(p).or_default() += 1;
        if t == p {
            *tp.entry(t).or_default() += 1;
        }
    }

    let n = y_true.len() as f64;
    let mut zero_division = 0;
    let mut per_class = BTreeMap::new();
    let (mut wp, mut wr, mut wf) = (0.0, 0.0, 0.0);
    for c in classes {
        let tp_c = tp.get(&c).copied().unwrap_or(0);
        let sup = support.get(&c).copied().unwrap_or(0);
        let precision = ratio(tp_c, predicted.get(&c).copied().unwrap_or(0), &mut zero_division);
        let recall = ratio(tp_c, sup, &mut zero_division);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let w = sup as f64 / n;
        wp += w * precision;
        wr += w * recall;
        wf += w * f1;
        per_class.insert(
            c,
            ClassMetrics {
                precision,
                recall,
                f1,
                support: sup,
            },
        );
    }
    if zero_division > 0 {
        log::debug!("{zero_division} zero-denominator metric(s) scored as 0");
    }
    Ok(MetricsTriple {
        weighted_precision: wp,
        weighted_recall: wr,
        weighted_f1: wf,
        per_class,
        zero_division,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction() {
        let y = [0, 1, 1, 0, 1];
        let m = weighted_metrics(&y, &y).unwrap();
        assert_eq!((m.weighted_precision, m.weighted_recall, m.weighted_f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn hand_case() {
        // class 1: p = r = 2/3, class 0: p = r = 0; supports 3 and 1.
        let m = weighted_metrics(&[1, 1, 1, 0], &[1, 0, 1, 1]).unwrap();
        assert_eq!((m.weighted_precision, m.weighted_recall, m.weighted_f1), (0.5, 0.5, 0.5));
        assert_eq!(m.per_class[&1].support, 3);
    }

    #[test]
    fn majority_prediction_on_balanced_labels() {
        let m = weighted_metrics(&[0, 0, 1, 1], &[1, 1, 1, 1]).unwrap();
        assert_eq!(m.weighted_precision, 0.25);
        assert_eq!(m.weighted_recall, 0.5);
        assert_eq!(m.per_class[&0].f1, 0.0);
        assert_eq!(m.zero_division, 1);
    }

    #[test]
    fn errors() {
        assert_eq!(
            weighted_metrics(&[0, 1], &[0]),
            Err(MetricsError::LengthMismatch { y_true: 2, y_pred: 1 })
        );
        assert_eq!(weighted_metrics(&[], &[]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn equal_supports_reduce_to_macro_average() {
        let y_true = [0, 0, 1, 1, 2, 2];
        let y_pred = [0, 1, 1, 1, 2, 0];
        let m = weighted_metrics(&y_true, &y_pred).unwrap();
        let macro_f1 = m.per_class.values().map(|c| c.f1).sum::<f64>() / 3.0;
        assert!((m.weighted_f1 - macro_f1).abs() < 1e-15);
    }

    #[test]
    fn dominant_class_drives_the_average() {
        let mut y_true = vec![1; 999];
        y_true.push(0);
        let mut y_pred = y_true.clone();
        y_pred[999] = 1;
        let m = weighted_metrics(&y_true, &y_pred).unwrap();
        assert!((m.weighted_recall - m.per_class[&1].recall).abs() < 2e-3);
    }
}
