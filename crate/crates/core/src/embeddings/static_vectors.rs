use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{rule_tokenize, BackendSpec, EmbeddingBackend, EmbeddingError, TokenFeatures, SEPARATOR_TOKEN};

/// Frozen word-vector table read from the plain-text format: one token
/// followed by `dimension` space-separated floats per line.
#[derive(Clone, Debug)]
pub struct StaticVectors {
    spec: BackendSpec,
    table: HashMap<String, Array1<f64>>,
}

impl StaticVectors {
    pub fn from_table(spec: BackendSpec, table: HashMap<String, Array1<f64>>) -> Self {
        StaticVectors { spec, table }
    }

    /// Loads the vector file, keeping only tokens in `vocabulary` when given.
    pub fn load(spec: BackendSpec, path: &Path, vocabulary: Option<&HashSet<String>>) -> Result<Self, EmbeddingError> {
        let file = File::open(path).map_err(|source| EmbeddingError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read(spec, BufReader::new(file), vocabulary)
    }

    pub fn read<R: BufRead>(
        spec: BackendSpec,
        reader: R,
        vocabulary: Option<&HashSet<String>>,
    ) -> Result<Self, EmbeddingError> {
        let d = spec.dimension;
        let mut table = HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|source| EmbeddingError::Io {
                path: format!("line {line_no}"),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(' ').filter(|f| !f.is_empty());
            let token = fields.next().unwrap_or_default();
            let values: Vec<&str> = fields.collect();
            if values.len() != d {
                return Err(EmbeddingError::MalformedVectorFile {
                    line: line_no,
                    message: format!("expected {d} values for `{token}`, found {}", values.len()),
                });
            }
            if vocabulary.is_some_and(|v| !v.contains(token)) {
                continue;
            }
            let row = values
                .iter()
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|e| EmbeddingError::MalformedVectorFile {
                    line: line_no,
                    message: e.to_string(),
                })?;
            table.insert(token.to_string(), Array1::from(row));
        }
        Ok(StaticVectors { spec, table })
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Stored row for in-vocabulary tokens, zeros otherwise.
    pub fn static_lookup_embed(&self, token: &str) -> Array1<f64> {
        self.table
            .get(token)
            .cloned()
            .unwrap_or_else(|| Array1::zeros(self.spec.dimension))
    }
}

impl EmbeddingBackend for StaticVectors {
    fn spec(&self) -> &BackendSpec {
        &self.spec
    }

    fn tokenize(&self, text: &str) -> Result<Vec<String>, EmbeddingError> {
        let tokens = rule_tokenize(text);
        if tokens.is_empty() {
            return Err(EmbeddingError::EmptyText);
        }
        Ok(tokens)
    }

    fn features(&self, text: &str) -> Result<TokenFeatures, EmbeddingError> {
        let tokens = self.tokenize(text)?;
        let mut m = Array2::zeros((tokens.len(), self.spec.dimension));
        for (i, t) in tokens.iter().enumerate() {
            if let Some(v) = self.table.get(t) {
                m.row_mut(i).assign(v);
            }
        }
        Ok(TokenFeatures::single_layer(tokens, m))
    }

    fn separator(&self) -> TokenFeatures {
        let row = self.static_lookup_embed(SEPARATOR_TOKEN).insert_axis(ndarray::Axis(0));
        TokenFeatures::single_layer(vec![SEPARATOR_TOKEN.into()], row)
    }
}
