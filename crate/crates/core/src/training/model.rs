use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::embeddings::{
    BackendFamily, BackendSpec, EmbeddingBackend, EmbeddingError, ScalarMix, TokenFeatures, PAIR_MAX_LEN,
    SINGLE_MAX_LEN,
};
use crate::encoders::{Head, HeadConfig, Pooling, TrainRng};
use crate::nn::{cross_entropy, Parameterized};
use crate::taskgen::{ExampleInput, LabeledExample};

/// Backend features of one example, already truncated to the input budget.
/// Frozen backends make this a pure function of the text, so it is computed
/// once per run and reused across epochs.
#[derive(Clone, Debug)]
pub struct PreparedExample {
    pub id: String,
    pub document_id: String,
    pub layers: Vec<Array2<f64>>,
    pub label: usize,
}

pub fn prepare_input(input: &ExampleInput, backend: &dyn EmbeddingBackend) -> Result<TokenFeatures, EmbeddingError> {
    match input {
        ExampleInput::Single { text } => {
            let mut f = backend.features(text)?;
            f.truncate(SINGLE_MAX_LEN);
            Ok(f)
        }
        ExampleInput::Pair { text_a, text_b } => backend.pair_features(text_a, text_b, PAIR_MAX_LEN),
    }
}

pub fn prepare_examples(
    examples: &[LabeledExample],
    backend: &dyn EmbeddingBackend,
) -> Result<Vec<PreparedExample>, EmbeddingError> {
    examples
        .iter()
        .map(|e| {
            Ok(PreparedExample {
                id: e.id.clone(),
                document_id: e.document_id.clone(),
                layers: prepare_input(&e.input, backend)?.layers,
                label: usize::from(e.label),
            })
        })
        .collect()
}

/// A trained or trainable classifier: the backend it reads, an optional
/// learned layer mix, and the head. Serialized as the model artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub backend: BackendSpec,
    pub head_config: HeadConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mix: Option<ScalarMix>,
    pub head: Head,
}

impl Classifier {
    /// Transformer backends pool the classification token; contextual
    /// backends with several layers learn a scalar mix over them.
    pub fn new(backend: BackendSpec, head_config: HeadConfig, num_layers: usize, rng: &mut TrainRng) -> Result<Self, TrainError> {
        let pooling = match backend.family {
            BackendFamily::Transformer => Pooling::ClassificationToken,
            _ => Pooling::MaskedMean,
        };
        let mix = (backend.family == BackendFamily::Contextual && num_layers > 1).then(|| ScalarMix::new(num_layers));
        let head = Head::new(&head_config, backend.dimension, pooling, rng)?;
        Ok(Classifier {
            backend,
            head_config,
            mix,
            head,
        })
    }

    /// The `[tokens x dimension]` matrix the head consumes.
    pub fn combine(&self, layers: &[Array2<f64>]) -> Array2<f64> {
        match &self.mix {
            Some(mix) => mix.forward(layers),
            None if layers.len() == 1 => layers[0].clone(),
            None => TokenFeatures {
                tokens: Vec::new(),
                layers: layers.to_vec(),
            }
            .mean_layers(),
        }
    }

    pub fn logits(&self, layers: &[Array2<f64>]) -> Result<Array1<f64>, TrainError> {
        Ok(self.head.forward_rows(&self.combine(layers), None)?.0)
    }

    /// Argmax label; ties go to the lower class.
    pub fn predict_layers(&self, layers: &[Array2<f64>]) -> Result<usize, TrainError> {
        let logits = self.logits(layers)?;
        let mut best = 0;
        for (i, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = i;
            }
        }
        Ok(best)
    }

    pub fn predict(&self, input: &ExampleInput, backend: &dyn EmbeddingBackend) -> Result<usize, TrainError> {
        self.predict_layers(&prepare_input(input, backend)?.layers)
    }

    /// Cross-entropy of one example; with `grads`, also accumulates
    /// `scale * d loss / d params` into it.
    pub fn loss(
        &self,
        example: &PreparedExample,
        rng: Option<&mut TrainRng>,
        grads: Option<(&mut Classifier, f64)>,
    ) -> Result<f64, TrainError> {
        let x = self.combine(&example.layers);
        let (logits, cache) = self.head.forward_rows(&x, rng)?;
        let (loss, d_logits) = cross_entropy(logits.view(), example.label);
        if let Some((g, scale)) = grads {
            let d_logits = d_logits * scale;
            let dx = self.head.backward_rows(&x, &cache, &d_logits, &mut g.head);
            if let (Some(mix), Some(gm)) = (&self.mix, g.mix.as_mut()) {
                mix.backward(&example.layers, &dx, gm);
            }
        }
        Ok(loss)
    }

    /// Mean evaluation-mode loss.
    pub fn mean_loss(&self, examples: &[PreparedExample]) -> Result<f64, TrainError> {
        let mut total = 0.0;
        for e in examples {
            total += self.loss(e, None, None)?;
        }
        Ok(total / examples.len().max(1) as f64)
    }

    pub fn predict_all(&self, examples: &[PreparedExample]) -> Result<Vec<usize>, TrainError> {
        examples.iter().map(|e| self.predict_layers(&e.layers)).collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        super::write_json_atomic(path, self)
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

impl Parameterized for Classifier {
    fn parameters(&self) -> Vec<&[f64]> {
        let mut p = self.mix.as_ref().map(|m| m.parameters()).unwrap_or_default();
        p.extend(self.head.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = self.mix.as_mut().map(|m| m.parameters_mut()).unwrap_or_default();
        p.extend(self.head.parameters_mut());
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::HeadKind;
    use rand::SeedableRng;

    #[test]
    fn mix_gradient_matches_finite_differences() {
        let mut rng = TrainRng::seed_from_u64(5);
        let spec = BackendSpec::new("ctx", BackendFamily::Contextual, 3);
        let mut config = HeadConfig::new(HeadKind::Linear);
        config.dropout_rate = 0.0;
        let mut model = Classifier::new(spec, config, 3, &mut rng).unwrap();
        model.mix.as_mut().unwrap().scalars = ndarray::arr1(&[0.3, -0.2, 0.1]);
        let layers: Vec<Array2<f64>> = (0..3)
            .map(|l| Array2::from_shape_fn((4, 3), |(i, j)| ((i * 3 + j + l * 7) as f64).sin()))
            .collect();
        let example = PreparedExample {
            id: "x".into(),
            document_id: "d".into(),
            layers,
            label: 1,
        };
        let mut grads = model.zeros_like();
        model.loss(&example, None, Some((&mut grads, 1.0))).unwrap();
        let analytic: Vec<f64> = grads.mix.as_ref().unwrap().parameters().concat();
        let h = 1e-6;
        let mut idx = 0;
        for t in 0..2 {
            let len = model.mix.as_ref().unwrap().parameters()[t].len();
            for i in 0..len {
                let mut plus = model.clone();
                plus.mix.as_mut().unwrap().parameters_mut()[t][i] += h;
                let mut minus = model.clone();
                minus.mix.as_mut().unwrap().parameters_mut()[t][i] -= h;
                let numeric = (plus.loss(&example, None, None).unwrap() - minus.loss(&example, None, None).unwrap()) / (2.0 * h);
                assert!((numeric - analytic[idx]).abs() <= 1e-6 + 1e-4 * numeric.abs(), "{numeric} vs {}", analytic[idx]);
                idx += 1;
            }
        }
    }

    #[test]
    fn artifact_round_trip() {
        let mut rng = TrainRng::seed_from_u64(1);
        let model = Classifier::new(BackendSpec::mock(4), HeadConfig::new(HeadKind::Cnn), 1, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        assert_eq!(Classifier::load(&path).unwrap(), model);
    }
}
