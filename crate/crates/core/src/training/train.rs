use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::{Adam, Classifier, EarlyStopping, PreparedExample, StopDecision, TrainError};
use crate::corpus::Split;
use crate::embeddings::BackendSpec;
use crate::encoders::{HeadConfig, TrainRng};
use crate::evaluation::{weighted_metrics, MetricsTriple};
use crate::nn::Parameterized;

/// Optimization settings for one training call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl History {
    pub fn epochs_trained(&self) -> usize {
        self.epochs.len()
    }

    pub fn best_val_loss(&self) -> f64 {
        self.epochs[self.best_epoch - 1].val_loss
    }
}

fn check_classes(examples: &[PreparedExample]) -> BTreeSet<usize> {
    examples.iter().map(|e| e.label).collect()
}

/// Mini-batch Adam on mean cross-entropy with patience-based early stopping
/// on validation loss. Returns the weights of the best validation epoch.
pub fn train_one(
    settings: &TrainSettings,
    backend: &BackendSpec,
    head_config: &HeadConfig,
    train: &[PreparedExample],
    val: &[PreparedExample],
    seed: u64,
) -> Result<(Classifier, History), TrainError> {
    if train.is_empty() {
        return Err(TrainError::EmptyTrainSet);
    }
    if val.is_empty() {
        return Err(TrainError::EmptyValidationSet);
    }
    let classes = check_classes(train);
    if classes.len() < 2 {
        return Err(TrainError::SingleClassTrainSet {
            label: *classes.first().expect("non-empty"),
        });
    }
    let mut rng = TrainRng::seed_from_u64(seed);
    let num_layers = train[0].layers.len();
    let mut model = Classifier::new(backend.clone(), head_config.clone(), num_layers, &mut rng)?;
    let mut adam = Adam::new(&model, settings.learning_rate);
    let mut stopper = EarlyStopping::new(settings.patience);
    let mut best = model.clone();
    let mut epochs = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=settings.max_epochs {
        order.shuffle(&mut rng);
        for (b, batch) in order.chunks(settings.batch_size).enumerate() {
            let mut grads = model.zeros_like();
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &i in batch {
                batch_loss += model.loss(&train[i], Some(&mut rng), Some((&mut grads, scale)))? * scale;
            }
            if !batch_loss.is_finite() || !grads.all_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: b,
                    loss: batch_loss,
                });
            }
            adam.step(&mut model, &grads);
        }
        let train_loss = model.mean_loss(train)?;
        let val_loss = model.mean_loss(val)?;
        if !val_loss.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                epoch,
                batch: usize::MAX,
                loss: val_loss,
            });
        }
        log::debug!("epoch {epoch}: train loss {train_loss:.5}, val loss {val_loss:.5}");
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        match stopper.observe(val_loss) {
            StopDecision::Improved => best = model.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => break,
        }
    }
    let history = History {
        epochs,
        best_epoch: stopper.best_epoch().expect("at least one epoch"),
    };
    Ok((best, history))
}

/// Examples from training documents only.
#[derive(Clone, Debug)]
pub struct TrainPool {
    examples: Vec<PreparedExample>,
}

/// Held-out examples. Only [`evaluate`] reads them.
#[derive(Clone, Debug)]
pub struct TestSet {
    examples: Vec<PreparedExample>,
}

impl TrainPool {
    pub fn examples(&self) -> &[PreparedExample] {
        &self.examples
    }

    pub fn document_ids(&self) -> BTreeSet<String> {
        self.examples.iter().map(|e| e.document_id.clone()).collect()
    }
}

impl TestSet {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn document_ids(&self) -> BTreeSet<String> {
        self.examples.iter().map(|e| e.document_id.clone()).collect()
    }
}

/// Routes every example to the side of the split its document belongs to.
/// Examples from unknown documents are dropped.
pub fn partition(examples: Vec<PreparedExample>, split: &Split) -> (TrainPool, TestSet) {
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for e in examples {
        if split.train_doc_ids.contains(&e.document_id) {
            train.push(e);
        } else if split.test_doc_ids.contains(&e.document_id) {
            test.push(e);
        }
    }
    (TrainPool { examples: train }, TestSet { examples: test })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_doc_ids: BTreeSet<String>,
    pub val_doc_ids: BTreeSet<String>,
    pub metrics: MetricsTriple,
    pub history: History,
    /// Set when the validation fold holds a single class.
    pub single_class_val: bool,
}

#[derive(Clone, Debug)]
pub struct CvOutcome {
    pub folds: Vec<FoldResult>,
    pub selected: usize,
    pub model: Classifier,
}

/// Index of the best score; ties go to the lowest index.
pub fn select_fold(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(fold as u64 + 1)
}

/// Trains one model per fold of `split` and keeps the one with the highest
/// validation weighted F1.
pub fn cross_validate(
    settings: &TrainSettings,
    backend: &BackendSpec,
    head_config: &HeadConfig,
    split: &Split,
    pool: &TrainPool,
    seed: u64,
) -> Result<CvOutcome, TrainError> {
    let mut folds = Vec::with_capacity(split.folds.len());
    let mut models = Vec::with_capacity(split.folds.len());
    for (f, (fold_train, fold_val)) in split.folds.iter().enumerate() {
        let train: Vec<PreparedExample> = pool
            .examples
            .iter()
            .filter(|e| fold_train.contains(&e.document_id))
            .cloned()
            .collect();
        let val: Vec<PreparedExample> = pool
            .examples
            .iter()
            .filter(|e| fold_val.contains(&e.document_id))
            .cloned()
            .collect();
        let (model, history) = train_one(settings, backend, head_config, &train, &val, fold_seed(seed, f))?;
        let y_true: Vec<usize> = val.iter().map(|e| e.label).collect();
        let single_class_val = check_classes(&val).len() < 2;
        if single_class_val {
            log::warn!("fold {f}: validation set holds a single class");
        }
        let metrics = weighted_metrics(&y_true, &model.predict_all(&val)?)?;
        log::info!(
            "fold {f}: {} epochs (best {}), val weighted F1 {:.4}",
            history.epochs_trained(),
            history.best_epoch,
            metrics.weighted_f1
        );
        folds.push(FoldResult {
            fold: f,
            train_doc_ids: fold_train.clone(),
            val_doc_ids: fold_val.clone(),
            metrics,
            history,
            single_class_val,
        });
        models.push(model);
    }
    let scores: Vec<f64> = folds.iter().map(|f| f.metrics.weighted_f1).collect();
    let selected = select_fold(&scores);
    Ok(CvOutcome {
        folds,
        selected,
        model: models.swap_remove(selected),
    })
}

/// Final held-out evaluation; the only reader of a [`TestSet`].
pub fn evaluate(model: &Classifier, test: &TestSet) -> Result<(MetricsTriple, Vec<usize>), TrainError> {
    if test.examples.is_empty() {
        return Err(TrainError::EmptyTestSet);
    }
    let y_true: Vec<usize> = test.examples.iter().map(|e| e.label).collect();
    let y_pred = model.predict_all(&test.examples)?;
    Ok((weighted_metrics(&y_true, &y_pred)?, y_pred))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::HeadKind;
    use ndarray::Array2;

    fn toy(n: usize, d: usize) -> Vec<PreparedExample> {
        (0..n)
            .map(|i| {
                let label = i % 2;
                let sign = if label == 1 { 1.0 } else { -1.0 };
                let rows = Array2::from_shape_fn((3, d), |(r, c)| sign * 0.5 + 0.1 * ((i * 7 + r * 3 + c) as f64).sin());
                PreparedExample {
                    id: format!("e{i}"),
                    document_id: format!("d{}", i % 4),
                    layers: vec![rows],
                    label,
                }
            })
            .collect()
    }

    fn settings(max_epochs: usize) -> TrainSettings {
        TrainSettings {
            max_epochs,
            batch_size: 16,
            learning_rate: 2e-5,
            patience: 5,
        }
    }

    #[test]
    fn toy_training_loss_decreases() {
        let data = toy(20, 8);
        let (_, history) = train_one(&settings(5), &BackendSpec::mock(8), &HeadConfig::new(HeadKind::Linear), &data, &data, 3).unwrap();
        let losses: Vec<f64> = history.epochs.iter().map(|e| e.train_loss).collect();
        assert_eq!(losses.len(), 5);
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
    }

    #[test]
    fn restored_weights_have_the_best_loss() {
        let data = toy(20, 8);
        let (model, history) = train_one(&settings(12), &BackendSpec::mock(8), &HeadConfig::new(HeadKind::Linear), &data, &data[..6], 9).unwrap();
        let min = history.epochs.iter().map(|e| e.val_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(history.best_val_loss(), min);
        assert_eq!(model.mean_loss(&data[..6]).unwrap(), min);
    }

    #[test]
    fn single_class_train_set_rejected() {
        let data: Vec<PreparedExample> = toy(10, 4).into_iter().filter(|e| e.label == 1).collect();
        let err = train_one(&settings(3), &BackendSpec::mock(4), &HeadConfig::new(HeadKind::Linear), &data, &data, 0).unwrap_err();
        assert!(matches!(err, TrainError::SingleClassTrainSet { label: 1 }));
    }

    #[test]
    fn non_finite_inputs_abort() {
        let mut data = toy(10, 4);
        data[0].layers[0][[0, 0]] = f64::NAN;
        let err = train_one(&settings(3), &BackendSpec::mock(4), &HeadConfig::new(HeadKind::Linear), &data, &data, 0).unwrap_err();
        assert!(matches!(err, TrainError::NonFiniteLoss { epoch: 1, .. }));
    }

    #[test]
    fn fold_selection_ties_go_to_the_first() {
        assert_eq!(select_fold(&[0.5; 5]), 0);
        assert_eq!(select_fold(&[0.1, 0.9, 0.9, 0.2]), 1);
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy(20, 8);
        let run = || train_one(&settings(4), &BackendSpec::mock(8), &HeadConfig::new(HeadKind::Cnn), &data, &data, 11).unwrap();
        assert_eq!(run().0, run().0);
    }
}
