use ndarray::{Array1, Array2};

use super::{rule_tokenize, BackendSpec, EmbeddingBackend, EmbeddingError, TokenFeatures};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic pseudo-embedding in `[-1, 1]^dimension`, a pure function of
/// the token bytes.
pub fn mock_embed(token: &str, dimension: usize) -> Array1<f64> {
    let mut state = fnv1a(token.as_bytes());
    Array1::from_iter((0..dimension).map(|_| {
        let bits = splitmix64(&mut state) >> 11;
        (bits as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }))
}

/// Hermetic backend: rule tokenizer plus hashed token vectors.
#[derive(Clone, Debug)]
pub struct MockBackend {
    spec: BackendSpec,
}

impl MockBackend {
    pub fn new(spec: BackendSpec) -> Self {
        MockBackend { spec }
    }
}

impl EmbeddingBackend for MockBackend {
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
        let d = self.spec.dimension;
        let mut m = Array2::zeros((tokens.len(), d));
        for (i, t) in tokens.iter().enumerate() {
            m.row_mut(i).assign(&mock_embed(t, d));
        }
        Ok(TokenFeatures::single_layer(tokens, m))
    }

    fn separator(&self) -> TokenFeatures {
        let d = self.spec.dimension;
        let row = mock_embed(super::SEPARATOR_TOKEN, d).insert_axis(ndarray::Axis(0));
        TokenFeatures::single_layer(vec![super::SEPARATOR_TOKEN.into()], row)
    }
}
