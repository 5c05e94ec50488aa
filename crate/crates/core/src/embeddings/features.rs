//! Backends over token features exported from an external model runtime
//! (ELMo-style layer stacks, transformer hidden states).
//!
//! The feature file is JSONL. Each record carries the input text (and
//! `text_b` for natively encoded pairs), the model's own tokens, and one
//! `[tokens x dimension]` matrix per layer:
//!
//! ```json
//! {"text": "The Court notes.", "tokens": ["[CLS]", "the", "court", "notes", ".", "[SEP]"],
//!  "layers": [[[0.1, ...], ...], ...]}
//! ```
//!
//! An optional `{"pad_embedding": [...]}` record supplies the padding row and
//! `{"separator": [[...], ...]}` (one row per layer) the pair separator.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::Deserialize;

use super::{
    balanced_lengths, join_pair, BackendFamily, BackendSpec, EmbeddingBackend, EmbeddingError, TokenFeatures,
    SEPARATOR_TOKEN,
};

#[derive(Deserialize)]
#[serde(untagged)]
enum FeatureRecord {
    Example {
        text: String,
        #[serde(default)]
        text_b: Option<String>,
        tokens: Vec<String>,
        layers: Vec<Vec<Vec<f64>>>,
    },
    Pad {
        pad_embedding: Vec<f64>,
    },
    Separator {
        separator: Vec<Vec<f64>>,
    },
}

#[derive(Clone, Debug, Default)]
pub struct FeatureCache {
    singles: HashMap<String, TokenFeatures>,
    pairs: HashMap<(String, String), TokenFeatures>,
    pad: Option<Array1<f64>>,
    separator: Option<Vec<Array1<f64>>>,
    num_layers: usize,
}

impl FeatureCache {
    pub fn load(path: &Path, dimension: usize) -> Result<Self, EmbeddingError> {
        let file = File::open(path).map_err(|source| EmbeddingError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read(BufReader::new(file), dimension)
    }

    pub fn read<R: BufRead>(reader: R, dimension: usize) -> Result<Self, EmbeddingError> {
        let mut cache = FeatureCache::default();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let malformed = |message: String| EmbeddingError::MalformedFeatureFile { line: line_no, message };
            let line = line.map_err(|e| malformed(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: FeatureRecord = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
            match record {
                FeatureRecord::Example {
                    text,
                    text_b,
                    tokens,
                    layers,
                } => {
                    let layers = layers
                        .into_iter()
                        .map(|rows| to_matrix(rows, tokens.len(), dimension))
                        .collect::<Result<Vec<_>, String>>()
                        .map_err(malformed)?;
                    if layers.is_empty() || tokens.is_empty() {
                        return Err(malformed("record without tokens or layers".into()));
                    }
                    if cache.num_layers != 0 && cache.num_layers != layers.len() {
                        return Err(malformed(format!(
                            "expected {} layers, found {}",
                            cache.num_layers,
                            layers.len()
                        )));
                    }
                    cache.num_layers = layers.len();
                    let features = TokenFeatures { tokens, layers };
                    match text_b {
                        Some(b) => cache.pairs.insert((text, b), features),
                        None => cache.singles.insert(text, features),
                    };
                }
                FeatureRecord::Pad { pad_embedding } => {
                    if pad_embedding.len() != dimension {
                        return Err(malformed(format!("pad_embedding has {} values", pad_embedding.len())));
                    }
                    cache.pad = Some(Array1::from(pad_embedding));
                }
                FeatureRecord::Separator { separator } => {
                    if separator.iter().any(|r| r.len() != dimension) {
                        return Err(malformed("separator row has wrong dimension".into()));
                    }
                    cache.separator = Some(separator.into_iter().map(Array1::from).collect());
                }
            }
        }
        Ok(cache)
    }

    pub fn insert(&mut self, text: &str, features: TokenFeatures) {
        self.num_layers = features.layers.len();
        self.singles.insert(text.to_string(), features);
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers.max(1)
    }
}

fn to_matrix(rows: Vec<Vec<f64>>, n_tokens: usize, dimension: usize) -> Result<Array2<f64>, String> {
    if rows.len() != n_tokens {
        return Err(format!("layer has {} rows for {n_tokens} tokens", rows.len()));
    }
    let mut m = Array2::zeros((n_tokens, dimension));
    for (i, r) in rows.into_iter().enumerate() {
        if r.len() != dimension {
            return Err(format!("row {i} has {} values, expected {dimension}", r.len()));
        }
        m.row_mut(i).assign(&Array1::from(r));
    }
    Ok(m)
}

/// Contextual (all layers, mixed downstream) or transformer (final layer,
/// classification token first) backend over a [`FeatureCache`].
#[derive(Clone, Debug)]
pub struct CachedFeatureBackend {
    spec: BackendSpec,
    cache: FeatureCache,
}

impl CachedFeatureBackend {
    pub fn new(spec: BackendSpec, cache: FeatureCache) -> Self {
        CachedFeatureBackend { spec, cache }
    }

    fn select(&self, f: &TokenFeatures) -> TokenFeatures {
        match self.spec.family {
            BackendFamily::Transformer => TokenFeatures {
                tokens: f.tokens.clone(),
                layers: vec![f.layers.last().expect("non-empty layers").clone()],
            },
            _ => f.clone(),
        }
    }

    fn lookup(&self, text: &str) -> Result<&TokenFeatures, EmbeddingError> {
        if text.trim().is_empty() {
            return Err(EmbeddingError::EmptyText);
        }
        self.cache
            .singles
            .get(text)
            .ok_or_else(|| EmbeddingError::MissingFeatures {
                backend_id: self.spec.backend_id.clone(),
                text: text.chars().take(60).collect(),
            })
    }
}

impl EmbeddingBackend for CachedFeatureBackend {
    fn spec(&self) -> &BackendSpec {
        &self.spec
    }

    fn num_layers(&self) -> usize {
        match self.spec.family {
            BackendFamily::Transformer => 1,
            _ => self.cache.num_layers(),
        }
    }

    fn tokenize(&self, text: &str) -> Result<Vec<String>, EmbeddingError> {
        Ok(self.lookup(text)?.tokens.clone())
    }

    fn features(&self, text: &str) -> Result<TokenFeatures, EmbeddingError> {
        self.lookup(text).map(|f| self.select(f))
    }

    fn pair_features(&self, text_a: &str, text_b: &str, max_len: usize) -> Result<TokenFeatures, EmbeddingError> {
        if let Some(f) = self.cache.pairs.get(&(text_a.to_string(), text_b.to_string())) {
            let mut f = self.select(f);
            f.truncate(max_len);
            return Ok(f);
        }
        let a = self.features(text_a)?;
        let b = self.features(text_b)?;
        let (ka, kb) = balanced_lengths(a.len(), b.len(), max_len - 1);
        Ok(join_pair(a, b, self.separator(), ka, kb))
    }

    fn separator(&self) -> TokenFeatures {
        let layers = self.num_layers();
        let d = self.spec.dimension;
        let rows: Vec<Array1<f64>> = match (&self.cache.separator, self.spec.family) {
            (Some(rows), BackendFamily::Transformer) => vec![rows.last().cloned().unwrap_or_else(|| Array1::zeros(d))],
            (Some(rows), _) if rows.len() == layers => rows.clone(),
            _ => vec![Array1::zeros(d); layers],
        };
        TokenFeatures {
            tokens: vec![SEPARATOR_TOKEN.into()],
            layers: rows.into_iter().map(|r| r.insert_axis(ndarray::Axis(0))).collect(),
        }
    }

    fn padding_row(&self) -> Option<Array1<f64>> {
        match self.spec.family {
            BackendFamily::Transformer => self.cache.pad.clone(),
            _ => None,
        }
    }
}
