use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{readout_backward, readout_forward, Pooling, ReadoutCache, TrainRng};
use crate::nn::{Affine, Parameterized};

/// Pool → dropout → affine. The baseline head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub out: Affine,
    pub pooling: Pooling,
    pub dropout_rate: f64,
}

#[derive(Clone, Debug)]
pub struct LinearCache {
    readout: ReadoutCache,
}

impl LinearHead {
    pub fn new<R: Rng>(rng: &mut R, input_dim: usize, classes: usize, pooling: Pooling, dropout_rate: f64) -> Self {
        LinearHead {
            out: Affine::new(rng, input_dim, classes),
            pooling,
            dropout_rate,
        }
    }

    pub fn pool(&self, x: &Array2<f64>) -> Array1<f64> {
        match self.pooling {
            Pooling::MaskedMean => x.mean_axis(Axis(0)).expect("at least one row"),
            Pooling::ClassificationToken => x.row(0).to_owned(),
        }
    }

    pub fn forward_rows(&self, x: &Array2<f64>, rng: Option<&mut TrainRng>) -> (Array1<f64>, LinearCache) {
        let pooled = self.pool(x);
        let (logits, readout) = readout_forward(&self.out, pooled, self.dropout_rate, rng);
        (logits, LinearCache { readout })
    }

    pub fn backward_rows(&self, x: &Array2<f64>, cache: &LinearCache, d_logits: &Array1<f64>, grads: &mut Self) -> Array2<f64> {
        let d_pooled = readout_backward(&self.out, &cache.readout, d_logits, &mut grads.out);
        let (len, d) = x.dim();
        let mut dx = Array2::zeros((len, d));
        match self.pooling {
            Pooling::MaskedMean => {
                let scaled = d_pooled / len as f64;
                for mut row in dx.rows_mut() {
                    row.assign(&scaled);
                }
            }
            Pooling::ClassificationToken => dx.row_mut(0).assign(&d_pooled),
        }
        dx
    }
}

impl Parameterized for LinearHead {
    fn parameters(&self) -> Vec<&[f64]> {
        let mut v = Vec::new();
        self.out.push_params(&mut v);
        v
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = Vec::new();
        self.out.push_params_mut(&mut v);
        v
    }
}
