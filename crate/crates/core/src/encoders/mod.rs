//! Classification heads mapping an encoded input to two logits.
//!
//! Heads read only the real (unmasked) rows of the input. Recurrent and
//! convolutional heads treat every position past the real tokens as zero,
//! so padding content can never reach the logits.

mod bilstm;
mod cnn;
mod conv;
mod linear;
mod resnet;

pub use bilstm::{BiLstmHead, LstmDirection};
pub use cnn::CnnHead;
pub use conv::Conv1d;
pub use linear::LinearHead;
pub use resnet::ResNetHead;

use std::fmt;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::EncodedInput;
use crate::nn::{dropout_mask, Affine, Parameterized};

/// Random stream used for initialization, shuffling and dropout.
pub type TrainRng = ChaCha8Rng;

#[derive(Debug, Error, PartialEq)]
pub enum HeadError {
    #[error("input has no real tokens (mask sum 0)")]
    AllPaddingInput,
    #[error("input dimension {got} does not match head dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid head configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Linear,
    Bilstm,
    Cnn,
    Resnet,
}

impl HeadKind {
    pub const ALL: [HeadKind; 4] = [HeadKind::Linear, HeadKind::Bilstm, HeadKind::Cnn, HeadKind::Resnet];
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeadKind::Linear => "linear",
            HeadKind::Bilstm => "bilstm",
            HeadKind::Cnn => "cnn",
            HeadKind::Resnet => "resnet",
        })
    }
}

impl std::str::FromStr for HeadKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        HeadKind::ALL
            .into_iter()
            .find(|h| h.to_string() == s)
            .ok_or_else(|| format!("unknown head `{s}` (expected linear, bilstm, cnn or resnet)"))
    }
}

/// How the linear head summarizes the token matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    MaskedMean,
    /// First real position (the transformer classification token).
    ClassificationToken,
}

fn default_dropout() -> f64 {
    0.1
}
fn default_bilstm_hidden() -> usize {
    100
}
fn default_cnn_filters() -> usize {
    100
}
fn default_cnn_kernels() -> Vec<usize> {
    vec![3, 4, 5, 6]
}
fn default_resnet_filters() -> [usize; 3] {
    [64, 64, 256]
}
fn default_classes() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadConfig {
    pub head_id: HeadKind,
    #[serde(default = "default_dropout")]
    pub dropout_rate: f64,
    /// Hidden units per direction.
    #[serde(default = "default_bilstm_hidden")]
    pub bilstm_hidden: usize,
    #[serde(default = "default_cnn_filters")]
    pub cnn_filters: usize,
    #[serde(default = "default_cnn_kernels")]
    pub cnn_kernels: Vec<usize>,
    #[serde(default = "default_resnet_filters")]
    pub resnet_filters: [usize; 3],
    #[serde(default = "default_classes")]
    pub num_classes: usize,
}

impl HeadConfig {
    pub fn new(head_id: HeadKind) -> Self {
        HeadConfig {
            head_id,
            dropout_rate: default_dropout(),
            bilstm_hidden: default_bilstm_hidden(),
            cnn_filters: default_cnn_filters(),
            cnn_kernels: default_cnn_kernels(),
            resnet_filters: default_resnet_filters(),
            num_classes: default_classes(),
        }
    }

    /// `key=value` descriptions of every field differing from the defaults.
    pub fn overrides(&self) -> Vec<String> {
        let d = HeadConfig::new(self.head_id);
        let mut out = Vec::new();
        if self.dropout_rate != d.dropout_rate {
            out.push(format!("head.dropout_rate={}", self.dropout_rate));
        }
        if self.bilstm_hidden != d.bilstm_hidden {
            out.push(format!("head.bilstm_hidden={}", self.bilstm_hidden));
        }
        if self.cnn_filters != d.cnn_filters {
            out.push(format!("head.cnn_filters={}", self.cnn_filters));
        }
        if self.cnn_kernels != d.cnn_kernels {
            out.push(format!("head.cnn_kernels={:?}", self.cnn_kernels));
        }
        if self.resnet_filters != d.resnet_filters {
            out.push(format!("head.resnet_filters={:?}", self.resnet_filters));
        }
        if self.num_classes != d.num_classes {
            out.push(format!("head.num_classes={}", self.num_classes));
        }
        out
    }

    pub fn validate(&self) -> Result<(), HeadError> {
        let bad = |m: &str| Err(HeadError::InvalidConfig(m.to_string()));
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if self.num_classes < 2 {
            return bad("num_classes must be at least 2");
        }
        match self.head_id {
            HeadKind::Bilstm if self.bilstm_hidden == 0 => bad("bilstm_hidden must be positive"),
            HeadKind::Cnn if self.cnn_filters == 0 || self.cnn_kernels.is_empty() || self.cnn_kernels.contains(&0) => {
                bad("cnn needs positive filters and kernel widths")
            }
            HeadKind::Resnet if self.resnet_filters.contains(&0) => bad("resnet filters must be positive"),
            _ => Ok(()),
        }
    }
}

/// Pre-readout features plus the dropout mask applied to them.
#[derive(Clone, Debug)]
pub struct ReadoutCache {
    features: Array1<f64>,
    mask: Option<Array1<f64>>,
    dropped: Array1<f64>,
}

impl ReadoutCache {
    pub fn features(&self) -> &Array1<f64> {
        &self.features
    }
}

pub(crate) fn readout_forward(
    out: &Affine,
    features: Array1<f64>,
    rate: f64,
    rng: Option<&mut TrainRng>,
) -> (Array1<f64>, ReadoutCache) {
    let mask = rng.map(|r| dropout_mask(r, features.len(), rate));
    let dropped = match &mask {
        Some(m) => &features * m,
        None => features.clone(),
    };
    let logits = out.forward(dropped.view());
    (logits, ReadoutCache { features, mask, dropped })
}

pub(crate) fn readout_backward(out: &Affine, cache: &ReadoutCache, d_logits: &Array1<f64>, grads: &mut Affine) -> Array1<f64> {
    let d = out.backward(cache.dropped.view(), d_logits, grads);
    match &cache.mask {
        Some(m) => d * m,
        None => d,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Head {
    Linear(LinearHead),
    Bilstm(BiLstmHead),
    Cnn(CnnHead),
    Resnet(ResNetHead),
}

#[derive(Clone, Debug)]
pub enum HeadCache {
    Linear(linear::LinearCache),
    Bilstm(bilstm::BiLstmCache),
    Cnn(cnn::CnnCache),
    Resnet(resnet::ResNetCache),
}

impl Head {
    pub fn new<R: Rng>(config: &HeadConfig, input_dim: usize, pooling: Pooling, rng: &mut R) -> Result<Self, HeadError> {
        config.validate()?;
        let c = config.num_classes;
        let p = config.dropout_rate;
        Ok(match config.head_id {
            HeadKind::Linear => Head::Linear(LinearHead::new(rng, input_dim, c, pooling, p)),
            HeadKind::Bilstm => Head::Bilstm(BiLstmHead::new(rng, input_dim, c, config.bilstm_hidden, p)),
            HeadKind::Cnn => Head::Cnn(CnnHead::new(rng, input_dim, c, config.cnn_filters, &config.cnn_kernels, p)),
            HeadKind::Resnet => Head::Resnet(ResNetHead::new(rng, input_dim, c, config.resnet_filters, p)),
        })
    }

    pub fn kind(&self) -> HeadKind {
        match self {
            Head::Linear(_) => HeadKind::Linear,
            Head::Bilstm(_) => HeadKind::Bilstm,
            Head::Cnn(_) => HeadKind::Cnn,
            Head::Resnet(_) => HeadKind::Resnet,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Head::Linear(h) => h.out.weight.ncols(),
            Head::Bilstm(h) => h.forward_dir.w_ih.ncols(),
            Head::Cnn(h) => h.branches[0].weight.ncols() / h.branches[0].width,
            Head::Resnet(h) => h.reduce.weight.ncols(),
        }
    }

    /// Logits from the real rows of an input. `rng` enables dropout.
    pub fn forward_rows(&self, x: &Array2<f64>, rng: Option<&mut TrainRng>) -> Result<(Array1<f64>, HeadCache), HeadError> {
        if x.nrows() == 0 {
            return Err(HeadError::AllPaddingInput);
        }
        if x.ncols() != self.input_dim() {
            return Err(HeadError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        Ok(match self {
            Head::Linear(h) => {
                let (l, c) = h.forward_rows(x, rng);
                (l, HeadCache::Linear(c))
            }
            Head::Bilstm(h) => {
                let (l, c) = h.forward_rows(x, rng);
                (l, HeadCache::Bilstm(c))
            }
            Head::Cnn(h) => {
                let (l, c) = h.forward_rows(x, rng);
                (l, HeadCache::Cnn(c))
            }
            Head::Resnet(h) => {
                let (l, c) = h.forward_rows(x, rng);
                (l, HeadCache::Resnet(c))
            }
        })
    }

    /// Accumulates parameter gradients into `grads` (same variant) and
    /// returns the gradient on the real input rows.
    pub fn backward_rows(&self, x: &Array2<f64>, cache: &HeadCache, d_logits: &Array1<f64>, grads: &mut Head) -> Array2<f64> {
        match (self, cache, grads) {
            (Head::Linear(h), HeadCache::Linear(c), Head::Linear(g)) => h.backward_rows(x, c, d_logits, g),
            (Head::Bilstm(h), HeadCache::Bilstm(c), Head::Bilstm(g)) => h.backward_rows(x, c, d_logits, g),
            (Head::Cnn(h), HeadCache::Cnn(c), Head::Cnn(g)) => h.backward_rows(x, c, d_logits, g),
            (Head::Resnet(h), HeadCache::Resnet(c), Head::Resnet(g)) => h.backward_rows(x, c, d_logits, g),
            _ => panic!("head, cache and gradient variants must match"),
        }
    }

    pub fn forward(&self, input: &EncodedInput, rng: Option<&mut TrainRng>) -> Result<(Array1<f64>, HeadCache), HeadError> {
        self.forward_rows(&input.real_rows(), rng)
    }

    /// Evaluation-mode logits (dropout off).
    pub fn logits(&self, input: &EncodedInput) -> Result<Array1<f64>, HeadError> {
        self.forward(input, None).map(|(l, _)| l)
    }
}

impl Parameterized for Head {
    fn parameters(&self) -> Vec<&[f64]> {
        match self {
            Head::Linear(h) => h.parameters(),
            Head::Bilstm(h) => h.parameters(),
            Head::Cnn(h) => h.parameters(),
            Head::Resnet(h) => h.parameters(),
        }
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Head::Linear(h) => h.parameters_mut(),
            Head::Bilstm(h) => h.parameters_mut(),
            Head::Cnn(h) => h.parameters_mut(),
            Head::Resnet(h) => h.parameters_mut(),
        }
    }
}
