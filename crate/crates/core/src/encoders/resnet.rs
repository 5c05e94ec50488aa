use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::conv::{max_over_time, max_over_time_backward, relu, relu_backward, Conv1d};
use super::{readout_backward, readout_forward, ReadoutCache, TrainRng};
use crate::nn::{Affine, Parameterized};

/// One post-activation bottleneck block over the token axis:
/// `relu(expand(relu(conv3(relu(reduce(x))))) + shortcut(x))`, max-pooled
/// over real positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResNetHead {
    pub reduce: Conv1d,
    pub conv: Conv1d,
    pub expand: Conv1d,
    pub shortcut: Conv1d,
    pub out: Affine,
    pub dropout_rate: f64,
}

#[derive(Clone, Debug)]
pub struct ResNetCache {
    u1: Array2<f64>,
    z1: Array2<f64>,
    u2: Array2<f64>,
    z2: Array2<f64>,
    u3: Array2<f64>,
    us: Array2<f64>,
    sum: Array2<f64>,
    argmax: Vec<usize>,
    readout: ReadoutCache,
}

impl ResNetHead {
    /// `filters = (reduce, conv, expand)`.
    pub fn new<R: Rng>(rng: &mut R, input_dim: usize, classes: usize, filters: [usize; 3], dropout_rate: f64) -> Self {
        let [f1, f2, f3] = filters;
        ResNetHead {
            reduce: Conv1d::new(rng, input_dim, f1, 1, 0),
            conv: Conv1d::new(rng, f1, f2, 3, 1),
            expand: Conv1d::new(rng, f2, f3, 1, 0),
            shortcut: Conv1d::new(rng, input_dim, f3, 1, 0),
            out: Affine::new(rng, f3, classes),
            dropout_rate,
        }
    }

    pub fn feature_len(&self) -> usize {
        self.expand.filters()
    }

    /// Pooled block output, before dropout.
    pub fn features(&self, x: &Array2<f64>) -> Array1<f64> {
        self.block(x).0
    }

    #[allow(clippy::type_complexity)]
    fn block(&self, x: &Array2<f64>) -> (Array1<f64>, [Array2<f64>; 7], Vec<usize>) {
        let len = x.nrows();
        let (u1, z1) = self.reduce.forward(x, len);
        let (u2, z2) = self.conv.forward(&relu(&z1), len);
        let (u3, z3) = self.expand.forward(&relu(&z2), len);
        let (us, zs) = self.shortcut.forward(x, len);
        let sum = z3 + zs;
        let (pooled, argmax) = max_over_time(&relu(&sum));
        (pooled, [u1, z1, u2, z2, u3, us, sum], argmax)
    }

    pub fn forward_rows(&self, x: &Array2<f64>, rng: Option<&mut TrainRng>) -> (Array1<f64>, ResNetCache) {
        let (pooled, [u1, z1, u2, z2, u3, us, sum], argmax) = self.block(x);
        let (logits, readout) = readout_forward(&self.out, pooled, self.dropout_rate, rng);
        (
            logits,
            ResNetCache {
                u1,
                z1,
                u2,
                z2,
                u3,
                us,
                sum,
                argmax,
                readout,
            },
        )
    }

    pub fn backward_rows(&self, x: &Array2<f64>, cache: &ResNetCache, d_logits: &Array1<f64>, grads: &mut Self) -> Array2<f64> {
        let len = x.nrows();
        let d_pooled = readout_backward(&self.out, &cache.readout, d_logits, &mut grads.out);
        let d_act = max_over_time_backward(&d_pooled, &cache.argmax, len);
        let d_sum = relu_backward(&cache.sum, &d_act);

        let mut dx = self.shortcut.backward(&cache.us, &d_sum, &mut grads.shortcut, len);
        let d_a2 = self.expand.backward(&cache.u3, &d_sum, &mut grads.expand, len);
        let d_z2 = relu_backward(&cache.z2, &d_a2);
        let d_a1 = self.conv.backward(&cache.u2, &d_z2, &mut grads.conv, len);
        let d_z1 = relu_backward(&cache.z1, &d_a1);
        dx += &self.reduce.backward(&cache.u1, &d_z1, &mut grads.reduce, len);
        dx
    }
}

impl Parameterized for ResNetHead {
    fn parameters(&self) -> Vec<&[f64]> {
        let mut v = Vec::new();
        self.reduce.push_params(&mut v);
        self.conv.push_params(&mut v);
        self.expand.push_params(&mut v);
        self.shortcut.push_params(&mut v);
        self.out.push_params(&mut v);
        v
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = Vec::new();
        self.reduce.push_params_mut(&mut v);
        self.conv.push_params_mut(&mut v);
        self.expand.push_params_mut(&mut v);
        self.shortcut.push_params_mut(&mut v);
        self.out.push_params_mut(&mut v);
        v
    }
}
