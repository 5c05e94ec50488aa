use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError};

/// Document-level train/test partition plus k validation folds over the
/// training documents.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train_doc_ids: BTreeSet<String>,
    pub test_doc_ids: BTreeSet<String>,
    /// `(train_doc_ids, val_doc_ids)` per fold.
    pub folds: Vec<(BTreeSet<String>, BTreeSet<String>)>,
    pub seed: u64,
}

impl Split {
    pub fn k(&self) -> usize {
        self.folds.len()
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

pub fn split_corpus(corpus: &Corpus, train_fraction: f64, k: usize, seed: u64) -> Result<Split, CorpusError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CorpusError::InvalidSplit(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    if k < 2 {
        return Err(CorpusError::InvalidSplit(format!("k must be at least 2, got {k}")));
    }

    let mut ids = corpus.document_ids();
    ids.sort();
    let n = ids.len();
    let n_train = round_half_up(train_fraction * n as f64);
    if n_train < k || n_train >= n {
        return Err(CorpusError::TooFewDocuments {
            available: n,
            required: k + 1,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let (train, test) = ids.split_at(n_train);

    // First `n_train % k` folds take one extra document.
    let base = n_train / k;
    let extra = n_train % k;
    let mut folds = Vec::with_capacity(k);
    let mut offset = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        let val: BTreeSet<String> = train[offset..offset + size].iter().cloned().collect();
        let fold_train: BTreeSet<String> = train
            .iter()
            .filter(|id| !val.contains(*id))
            .cloned()
            .collect();
        folds.push((fold_train, val));
        offset += size;
    }

    Ok(Split {
        train_doc_ids: train.iter().cloned().collect(),
        test_doc_ids: test.iter().cloned().collect(),
        folds,
        seed,
    })
}
