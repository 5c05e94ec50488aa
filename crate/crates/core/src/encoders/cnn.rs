use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::conv::{max_over_time, max_over_time_backward, relu, relu_backward, Conv1d};
use super::{readout_backward, readout_forward, ReadoutCache, TrainRng};
use crate::nn::{Affine, Parameterized};

/// Parallel convolution branches, one per kernel width, each followed by
/// ReLU and max-pooling over time; pooled branch features are concatenated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnnHead {
    pub branches: Vec<Conv1d>,
    pub out: Affine,
    pub dropout_rate: f64,
}

#[derive(Clone, Debug)]
struct BranchCache {
    windows: Array2<f64>,
    pre: Array2<f64>,
    argmax: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct CnnCache {
    branches: Vec<BranchCache>,
    readout: ReadoutCache,
}

impl CnnHead {
    pub fn new<R: Rng>(rng: &mut R, input_dim: usize, classes: usize, filters: usize, kernels: &[usize], dropout_rate: f64) -> Self {
        let branches: Vec<Conv1d> = kernels.iter().map(|&k| Conv1d::new(rng, input_dim, filters, k, 0)).collect();
        let features = filters * kernels.len();
        CnnHead {
            branches,
            out: Affine::new(rng, features, classes),
            dropout_rate,
        }
    }

    pub fn feature_len(&self) -> usize {
        self.branches.iter().map(Conv1d::filters).sum()
    }

    /// Valid positions for a branch; inputs shorter than the kernel are
    /// zero-extended to one full window.
    fn positions(len: usize, width: usize) -> usize {
        if len < width {
            log::trace!("input of {len} tokens zero-extended to kernel width {width}");
        }
        len.max(width) - width + 1
    }

    /// Concatenated pooled branch features, before dropout.
    pub fn features(&self, x: &Array2<f64>) -> Array1<f64> {
        self.branch_forward(x).0
    }

    fn branch_forward(&self, x: &Array2<f64>) -> (Array1<f64>, Vec<BranchCache>) {
        let mut pooled = Vec::with_capacity(self.branches.len());
        let mut caches = Vec::with_capacity(self.branches.len());
        for conv in &self.branches {
            let (windows, pre) = conv.forward(x, Self::positions(x.nrows(), conv.width));
            let (p, argmax) = max_over_time(&relu(&pre));
            pooled.push(p);
            caches.push(BranchCache { windows, pre, argmax });
        }
        let views: Vec<_> = pooled.iter().map(|p| p.view()).collect();
        (concatenate(Axis(0), &views).expect("1-d features"), caches)
    }

    pub fn forward_rows(&self, x: &Array2<f64>, rng: Option<&mut TrainRng>) -> (Array1<f64>, CnnCache) {
        let (features, branches) = self.branch_forward(x);
        let (logits, readout) = readout_forward(&self.out, features, self.dropout_rate, rng);
        (logits, CnnCache { branches, readout })
    }

    pub fn backward_rows(&self, x: &Array2<f64>, cache: &CnnCache, d_logits: &Array1<f64>, grads: &mut Self) -> Array2<f64> {
        let d_features = readout_backward(&self.out, &cache.readout, d_logits, &mut grads.out);
        let mut dx = Array2::zeros(x.raw_dim());
        let mut offset = 0;
        for ((conv, bc), g) in self.branches.iter().zip(&cache.branches).zip(grads.branches.iter_mut()) {
            let f = conv.filters();
            let d_pooled = d_features.slice(s![offset..offset + f]).to_owned();
            offset += f;
            let d_act = max_over_time_backward(&d_pooled, &bc.argmax, bc.pre.nrows());
            let d_pre = relu_backward(&bc.pre, &d_act);
            dx += &conv.backward(&bc.windows, &d_pre, g, x.nrows());
        }
        dx
    }
}

impl Parameterized for CnnHead {
    fn parameters(&self) -> Vec<&[f64]> {
        let mut v = Vec::new();
        for b in &self.branches {
            b.push_params(&mut v);
        }
        self.out.push_params(&mut v);
        v
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = Vec::new();
        for b in &mut self.branches {
            b.push_params_mut(&mut v);
        }
        self.out.push_params_mut(&mut v);
        v
    }
}
