//! Embedding backends turning clause text (or clause pairs) into padded
//! token-level matrices.
//!
//! Every backend exposes raw per-token features (one matrix per layer). The
//! free functions [`encode_single`] and [`encode_pair`] truncate, collapse
//! layers with uniform weights and pad to the fixed input lengths; training
//! instead routes multi-layer features through a learned [`ScalarMix`].

mod features;
mod mix;
mod mock;
mod static_vectors;
mod tokenize;

pub use features::{CachedFeatureBackend, FeatureCache};
pub use mix::ScalarMix;
pub use mock::{mock_embed, MockBackend};
pub use static_vectors::StaticVectors;
pub use tokenize::rule_tokenize;

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;

use ndarray::{concatenate, s, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SINGLE_MAX_LEN: usize = 250;
pub const PAIR_MAX_LEN: usize = 500;
pub const SEPARATOR_TOKEN: &str = "[SEP]";

/// Directory against which relative `weights_path` values resolve.
pub const CACHE_ENV: &str = "ARGMINE_CACHE";

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("text is empty after whitespace normalization")]
    EmptyText,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed vector file at line {line}: {message}")]
    MalformedVectorFile { line: usize, message: String },
    #[error("malformed feature file at line {line}: {message}")]
    MalformedFeatureFile { line: usize, message: String },
    #[error("backend `{0}` requires `embedding.weights_path`")]
    MissingWeights(String),
    #[error("backend `{backend_id}` has no cached features for \"{text}\"")]
    MissingFeatures { backend_id: String, text: String },
    #[error("invalid backend configuration: {0}")]
    InvalidSpec(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendFamily {
    Static,
    Contextual,
    Transformer,
    Mock,
}

impl BackendFamily {
    /// Maximum training epochs for heads on top of this family.
    pub fn epoch_cap(self) -> usize {
        match self {
            BackendFamily::Transformer => 10,
            BackendFamily::Contextual => 20,
            BackendFamily::Static | BackendFamily::Mock => 150,
        }
    }

    pub fn trainable(self) -> bool {
        self == BackendFamily::Transformer
    }
}

impl fmt::Display for BackendFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendFamily::Static => "static",
            BackendFamily::Contextual => "contextual",
            BackendFamily::Transformer => "transformer",
            BackendFamily::Mock => "mock",
        })
    }
}

/// Backend configuration, the `embedding.*` config section.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSpec {
    pub backend_id: String,
    pub family: BackendFamily,
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights_path: Option<PathBuf>,
    /// Row label used in reports, e.g. `GloVe`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display_name: Option<String>,
}

impl BackendSpec {
    pub fn new(backend_id: &str, family: BackendFamily, dimension: usize) -> Self {
        BackendSpec {
            backend_id: backend_id.to_string(),
            family,
            dimension,
            weights_path: None,
            display_name: None,
        }
    }

    pub fn mock(dimension: usize) -> Self {
        Self::new("mock", BackendFamily::Mock, dimension)
    }

    pub fn epoch_cap(&self) -> usize {
        self.family.epoch_cap()
    }

    pub fn trainable(&self) -> bool {
        self.family.trainable()
    }

    pub fn display_name(&self) -> &str {
        self.display_name.as_deref().unwrap_or(&self.backend_id)
    }

    pub fn validate(&self) -> Result<(), EmbeddingError> {
        if self.dimension == 0 {
            return Err(EmbeddingError::InvalidSpec(format!(
                "backend `{}` has dimension 0",
                self.backend_id
            )));
        }
        Ok(())
    }

    /// `weights_path`, resolved against `$ARGMINE_CACHE` when relative.
    pub fn resolved_weights_path(&self) -> Option<PathBuf> {
        let path = self.weights_path.as_ref()?;
        if path.is_relative() {
            if let Some(cache) = std::env::var_os(CACHE_ENV) {
                return Some(PathBuf::from(cache).join(path));
            }
        }
        Some(path.clone())
    }
}

/// Per-token features of one input: `layers[l]` is `[tokens x dimension]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenFeatures {
    pub tokens: Vec<String>,
    pub layers: Vec<Array2<f64>>,
}

impl TokenFeatures {
    pub fn single_layer(tokens: Vec<String>, matrix: Array2<f64>) -> Self {
        TokenFeatures {
            tokens,
            layers: vec![matrix],
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tail truncation to at most `max_len` tokens.
    pub fn truncate(&mut self, max_len: usize) {
        if self.tokens.len() > max_len {
            self.tokens.truncate(max_len);
            for layer in &mut self.layers {
                *layer = layer.slice(s![..max_len, ..]).to_owned();
            }
        }
    }

    /// Uniform average over layers.
    pub fn mean_layers(&self) -> Array2<f64> {
        if self.layers.len() == 1 {
            return self.layers[0].clone();
        }
        let mut sum = self.layers[0].clone();
        for l in &self.layers[1..] {
            sum += l;
        }
        sum / self.layers.len() as f64
    }
}

/// Kept lengths `(ka, kb)` after balanced tail truncation to `budget` tokens:
/// the longer member loses its last token until both fit, ties trimming `a`.
pub fn balanced_lengths(len_a: usize, len_b: usize, budget: usize) -> (usize, usize) {
    if len_a + len_b <= budget {
        return (len_a, len_b);
    }
    let excess = len_a + len_b - budget;
    let (long, short) = (len_a.max(len_b), len_a.min(len_b));
    let first = excess.min(long - short);
    let rest = excess - first;
    // After equalizing, removals alternate starting with `a`.
    let (cut_a, cut_b) = if len_a >= len_b {
        (first + rest.div_ceil(2), rest / 2)
    } else {
        (rest.div_ceil(2), first + rest / 2)
    };
    (len_a - cut_a, len_b - cut_b)
}

/// `a[..keep_a] ⊕ separator ⊕ b[..keep_b]`, layer by layer.
pub fn join_pair(a: TokenFeatures, b: TokenFeatures, separator: TokenFeatures, keep_a: usize, keep_b: usize) -> TokenFeatures {
    let mut tokens = a.tokens[..keep_a].to_vec();
    tokens.extend(separator.tokens.iter().cloned());
    tokens.extend(b.tokens[..keep_b].iter().cloned());
    let layers = a
        .layers
        .iter()
        .zip(&b.layers)
        .zip(&separator.layers)
        .map(|((la, lb), sep)| {
            concatenate(
                Axis(0),
                &[la.slice(s![..keep_a, ..]), sep.view(), lb.slice(s![..keep_b, ..])],
            )
            .expect("layers share the embedding dimension")
        })
        .collect();
    TokenFeatures { tokens, layers }
}

/// A uniform interface over embedding models.
pub trait EmbeddingBackend: Send + Sync {
    fn spec(&self) -> &BackendSpec;

    /// Number of feature layers `features` returns.
    fn num_layers(&self) -> usize {
        1
    }

    fn tokenize(&self, text: &str) -> Result<Vec<String>, EmbeddingError>;

    /// Untruncated per-token features.
    fn features(&self, text: &str) -> Result<TokenFeatures, EmbeddingError>;

    /// Separator inserted between the members of a pair, one row per layer.
    fn separator(&self) -> TokenFeatures;

    /// Joint features of a clause pair fitted into `max_len` positions.
    fn pair_features(&self, text_a: &str, text_b: &str, max_len: usize) -> Result<TokenFeatures, EmbeddingError> {
        let a = self.features(text_a)?;
        let b = self.features(text_b)?;
        let (ka, kb) = balanced_lengths(a.len(), b.len(), max_len - 1);
        Ok(join_pair(a, b, self.separator(), ka, kb))
    }

    /// Row written into padding positions; zeros when `None`.
    fn padding_row(&self) -> Option<Array1<f64>> {
        None
    }
}

/// Fixed-length model input. Rows at or beyond the real token count hold the
/// backend's padding row.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedInput {
    pub matrix: Array2<f64>,
    pub mask: Vec<u8>,
    pub max_len: usize,
}

impl EncodedInput {
    pub fn pad(real: Array2<f64>, max_len: usize, padding_row: Option<&Array1<f64>>) -> Self {
        let n = real.nrows().min(max_len);
        let d = real.ncols();
        let mut matrix = Array2::zeros((max_len, d));
        matrix.slice_mut(s![..n, ..]).assign(&real.slice(s![..n, ..]));
        if let Some(row) = padding_row {
            for mut r in matrix.rows_mut().into_iter().skip(n) {
                r.assign(row);
            }
        }
        let mut mask = vec![0u8; max_len];
        mask[..n].fill(1);
        EncodedInput { matrix, mask, max_len }
    }

    pub fn dimension(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn real_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m != 0).count()
    }

    /// Indices of real (unmasked) positions in order.
    pub fn real_positions(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m != 0)
            .map(|(i, _)| i)
            .collect()
    }

    /// The `[real_len x dimension]` matrix of real rows.
    pub fn real_rows(&self) -> Array2<f64> {
        self.matrix.select(Axis(0), &self.real_positions())
    }
}

pub fn encode_single(text: &str, backend: &dyn EmbeddingBackend) -> Result<EncodedInput, EmbeddingError> {
    let mut f = backend.features(text)?;
    f.truncate(SINGLE_MAX_LEN);
    Ok(EncodedInput::pad(f.mean_layers(), SINGLE_MAX_LEN, backend.padding_row().as_ref()))
}

pub fn encode_pair(text_a: &str, text_b: &str, backend: &dyn EmbeddingBackend) -> Result<EncodedInput, EmbeddingError> {
    let f = backend.pair_features(text_a, text_b, PAIR_MAX_LEN)?;
    Ok(EncodedInput::pad(f.mean_layers(), PAIR_MAX_LEN, backend.padding_row().as_ref()))
}

/// Instantiates the backend described by `spec`. `vocabulary`, when given,
/// restricts which static vectors are kept in memory.
pub fn load_backend(
    spec: &BackendSpec,
    vocabulary: Option<&HashSet<String>>,
) -> Result<Box<dyn EmbeddingBackend>, EmbeddingError> {
    spec.validate()?;
    let weights = || {
        spec.resolved_weights_path()
            .ok_or_else(|| EmbeddingError::MissingWeights(spec.backend_id.clone()))
    };
    Ok(match spec.family {
        BackendFamily::Mock => Box::new(MockBackend::new(spec.clone())),
        BackendFamily::Static => Box::new(StaticVectors::load(spec.clone(), &weights()?, vocabulary)?),
        BackendFamily::Contextual | BackendFamily::Transformer => Box::new(CachedFeatureBackend::new(
            spec.clone(),
            FeatureCache::load(&weights()?, spec.dimension)?,
        )),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mock(d: usize) -> MockBackend {
        MockBackend::new(BackendSpec::mock(d))
    }

    fn words(n: usize, prefix: &str) -> String {
        (0..n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn epoch_caps_by_family() {
        assert_eq!(BackendFamily::Transformer.epoch_cap(), 10);
        assert_eq!(BackendFamily::Contextual.epoch_cap(), 20);
        assert_eq!(BackendFamily::Static.epoch_cap(), 150);
        assert_eq!(BackendFamily::Mock.epoch_cap(), 150);
        assert!(BackendFamily::Transformer.trainable());
        assert!(!BackendFamily::Static.trainable());
    }

    #[test]
    fn single_is_zero_padded() {
        let spec = BackendSpec::new("v", BackendFamily::Static, 300);
        let table = [("court".to_string(), Array1::from_elem(300, 0.5))].into();
        let backend = StaticVectors::from_table(spec, table);
        let enc = encode_single("The Court notes.", &backend).unwrap();
        assert_eq!(enc.matrix.dim(), (250, 300));
        assert_eq!(enc.real_len(), 4);
        assert!(enc.matrix.slice(s![4.., ..]).iter().all(|&v| v == 0.0));
        assert!(enc.matrix.row(1).iter().all(|&v| v == 0.5));
    }

    #[test]
    fn empty_text_rejected() {
        assert!(matches!(encode_single("", &mock(8)), Err(EmbeddingError::EmptyText)));
        assert!(matches!(encode_pair("a", "  ", &mock(8)), Err(EmbeddingError::EmptyText)));
    }

    #[test]
    fn long_single_truncated() {
        let enc = encode_single(&words(600, "w"), &mock(4)).unwrap();
        assert_eq!(enc.real_len(), 250);
        assert_eq!(enc.matrix.row(249).to_vec(), mock_embed("w249", 4).to_vec());
    }

    #[test]
    fn pair_of_ten_token_clauses() {
        let enc = encode_pair(&words(10, "a"), &words(10, "b"), &mock(8)).unwrap();
        assert_eq!(enc.max_len, 500);
        assert_eq!(enc.real_len(), 21);
        assert_eq!(enc.matrix.row(10).to_vec(), mock_embed(SEPARATOR_TOKEN, 8).to_vec());
    }

    #[test]
    fn pair_of_long_clauses_fills_budget() {
        let enc = encode_pair(&words(300, "a"), &words(300, "b"), &mock(4)).unwrap();
        assert_eq!(enc.real_len(), 500);
        // 499 content slots: 249 from `a`, 250 from `b`.
        assert_eq!(enc.matrix.row(248).to_vec(), mock_embed("a248", 4).to_vec());
        assert_eq!(enc.matrix.row(249).to_vec(), mock_embed(SEPARATOR_TOKEN, 4).to_vec());
        assert_eq!(enc.matrix.row(499).to_vec(), mock_embed("b249", 4).to_vec());
    }

    /// Removes one token at a time from the longer member (ties: `a`).
    fn truncation_scan(mut a: usize, mut b: usize, budget: usize) -> (usize, usize) {
        while a + b > budget {
            if a >= b {
                a -= 1;
            } else {
                b -= 1;
            }
        }
        (a, b)
    }

    #[test]
    fn balanced_lengths_matches_scan() {
        for budget in [0, 1, 5, 17, 499] {
            for a in 0..=520 {
                for b in (0..=520).step_by(7) {
                    assert_eq!(balanced_lengths(a, b, budget), truncation_scan(a, b, budget), "{a} {b} {budget}");
                }
            }
        }
    }

    #[test]
    fn pair_region_equals_joined_single() {
        let backend = mock(6);
        let a = words(7, "x");
        let b = words(4, "y");
        let pair = encode_pair(&a, &b, &backend).unwrap();
        let mut expected = Vec::new();
        for t in rule_tokenize(&a) {
            expected.push(mock_embed(&t, 6));
        }
        expected.push(mock_embed(SEPARATOR_TOKEN, 6));
        for t in rule_tokenize(&b) {
            expected.push(mock_embed(&t, 6));
        }
        for (i, row) in expected.iter().enumerate() {
            assert_eq!(pair.matrix.row(i), row.view());
        }
    }

    #[test]
    fn frozen_backends_are_stable() {
        let backend = mock(16);
        let x = encode_single("The applicant complains under Article 6.", &backend).unwrap();
        let y = encode_single("The applicant complains under Article 6.", &backend).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn weights_path_resolution() {
        let mut spec = BackendSpec::new("glove", BackendFamily::Static, 300);
        assert!(matches!(load_backend(&spec, None), Err(EmbeddingError::MissingWeights(_))));
        spec.weights_path = Some("/abs/glove.txt".into());
        assert_eq!(spec.resolved_weights_path().unwrap(), PathBuf::from("/abs/glove.txt"));
    }
}
