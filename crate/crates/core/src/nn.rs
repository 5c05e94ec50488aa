//! Small f64 building blocks shared by the trainable components: parameter
//! traversal, affine maps, dropout and initializers.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Uniform access to a component's parameter tensors. Gradients are stored
/// in a value of the same type so the traversal orders always agree.
pub trait Parameterized: Clone {
    fn parameters(&self) -> Vec<&[f64]>;
    fn parameters_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_parameters(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }

    /// Same shapes, all zeros; used as a gradient accumulator.
    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for p in z.parameters_mut() {
            p.fill(0.0);
        }
        z
    }

    /// `self += scale * other`, tensor by tensor.
    fn add_scaled(&mut self, other: &Self, scale: f64) {
        for (dst, src) in self.parameters_mut().into_iter().zip(other.parameters()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    fn all_finite(&self) -> bool {
        self.parameters().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }
}

pub(crate) fn slice1(a: &Array1<f64>) -> &[f64] {
    a.as_slice().expect("standard layout")
}

pub(crate) fn slice1_mut(a: &mut Array1<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("standard layout")
}

pub(crate) fn slice2(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("standard layout")
}

pub(crate) fn slice2_mut(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().expect("standard layout")
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
pub(crate) fn fan_in_uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize, fan_in: usize) -> Array2<f64> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound))
}

/// `rows x cols` matrix (`rows >= cols`) with orthonormal columns, built by
/// modified Gram-Schmidt over uniform noise.
pub(crate) fn orthogonal<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    assert!(rows >= cols);
    loop {
        let mut m = Array2::<f64>::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0));
        let mut ok = true;
        for j in 0..cols {
            for k in 0..j {
                let proj = m.column(j).dot(&m.column(k));
                let ck = m.column(k).to_owned();
                m.column_mut(j).scaled_add(-proj, &ck);
            }
            let norm = m.column(j).dot(&m.column(j)).sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            m.column_mut(j).mapv_inplace(|v| v / norm);
        }
        if ok {
            return m;
        }
    }
}

/// `y = W x + b` with `W: [out x in]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Affine {
    pub fn new<R: Rng>(rng: &mut R, input: usize, output: usize) -> Self {
        Affine {
            weight: fan_in_uniform(rng, output, input, input),
            bias: Array1::zeros(output),
        }
    }

    pub fn forward(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.weight.dot(&x) + &self.bias
    }

    /// Accumulates parameter gradients into `grads`, returns `dL/dx`.
    pub fn backward(&self, x: ArrayView1<f64>, dy: &Array1<f64>, grads: &mut Affine) -> Array1<f64> {
        let dy2 = dy.view().insert_axis(Axis(1));
        let x2 = x.insert_axis(Axis(0));
        grads.weight += &dy2.dot(&x2);
        grads.bias += dy;
        self.weight.t().dot(dy)
    }

    pub(crate) fn push_params<'a>(&'a self, out: &mut Vec<&'a [f64]>) {
        out.push(slice2(&self.weight));
        out.push(slice1(&self.bias));
    }

    pub(crate) fn push_params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [f64]>) {
        out.push(slice2_mut(&mut self.weight));
        out.push(slice1_mut(&mut self.bias));
    }
}

impl Parameterized for Affine {
    fn parameters(&self) -> Vec<&[f64]> {
        let mut p = Vec::new();
        self.push_params(&mut p);
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = Vec::new();
        self.push_params_mut(&mut p);
        p
    }
}

/// Inverted dropout mask: kept units scaled by `1 / (1 - rate)`.
pub fn dropout_mask<R: Rng>(rng: &mut R, len: usize, rate: f64) -> Array1<f64> {
    if rate <= 0.0 {
        return Array1::ones(len);
    }
    let keep = 1.0 / (1.0 - rate);
    Array1::from_shape_fn(len, |_| if rng.random::<f64>() < rate { 0.0 } else { keep })
}

/// Numerically stable softmax.
pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exp = logits.mapv(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

/// Cross-entropy of `logits` against class `label`, and its gradient.
pub fn cross_entropy(logits: ArrayView1<f64>, label: usize) -> (f64, Array1<f64>) {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let log_sum = logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
    let loss = log_sum - logits[label];
    let mut grad = logits.mapv(|v| (v - log_sum).exp());
    grad[label] -= 1.0;
    (loss, grad)
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
