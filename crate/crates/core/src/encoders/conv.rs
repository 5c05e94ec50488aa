use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{fan_in_uniform, slice1, slice1_mut, slice2, slice2_mut};

/// 1-D convolution over the token axis. Positions outside the real rows
/// read as zeros.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    /// `[filters x width * in_dim]`, window rows concatenated.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub width: usize,
    /// Zero rows virtually prepended before the first token.
    pub pad_left: usize,
}

impl Conv1d {
    pub fn new<R: Rng>(rng: &mut R, in_dim: usize, filters: usize, width: usize, pad_left: usize) -> Self {
        Conv1d {
            weight: fan_in_uniform(rng, filters, width * in_dim, width * in_dim),
            bias: Array1::zeros(filters),
            width,
            pad_left,
        }
    }

    pub fn filters(&self) -> usize {
        self.weight.nrows()
    }

    /// Windows `[positions x width * d]`; window `t` starts at row `t - pad_left`.
    pub fn im2col(&self, x: &Array2<f64>, positions: usize) -> Array2<f64> {
        let (len, d) = x.dim();
        let mut u = Array2::zeros((positions, self.width * d));
        for t in 0..positions {
            for j in 0..self.width {
                let src = t as isize + j as isize - self.pad_left as isize;
                if src >= 0 && (src as usize) < len {
                    u.slice_mut(s![t, j * d..(j + 1) * d]).assign(&x.row(src as usize));
                }
            }
        }
        u
    }

    /// Scatter-adds window gradients back onto `[len x d]` input rows.
    pub fn col2im(&self, du: &Array2<f64>, len: usize, d: usize) -> Array2<f64> {
        let mut dx = Array2::zeros((len, d));
        for t in 0..du.nrows() {
            for j in 0..self.width {
                let src = t as isize + j as isize - self.pad_left as isize;
                if src >= 0 && (src as usize) < len {
                    let mut row = dx.row_mut(src as usize);
                    row += &du.slice(s![t, j * d..(j + 1) * d]);
                }
            }
        }
        dx
    }

    /// Returns `(windows, pre_activations)`.
    pub fn forward(&self, x: &Array2<f64>, positions: usize) -> (Array2<f64>, Array2<f64>) {
        let u = self.im2col(x, positions);
        let z = u.dot(&self.weight.t()) + &self.bias;
        (u, z)
    }

    /// Accumulates parameter gradients; returns `dL/dx` for `len` input rows.
    pub fn backward(&self, u: &Array2<f64>, dz: &Array2<f64>, grads: &mut Conv1d, len: usize) -> Array2<f64> {
        grads.weight += &dz.t().dot(u);
        grads.bias += &dz.sum_axis(Axis(0));
        let du = dz.dot(&self.weight);
        let d = self.weight.ncols() / self.width;
        self.col2im(&du, len, d)
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

pub(crate) fn relu(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(|v| v.max(0.0))
}

/// `d * 1[z > 0]`.
pub(crate) fn relu_backward(z: &Array2<f64>, d: &Array2<f64>) -> Array2<f64> {
    let mut out = d.clone();
    out.zip_mut_with(z, |g, &zv| {
        if zv <= 0.0 {
            *g = 0.0
        }
    });
    out
}

/// Column-wise max over positions with the first arg-max row per column.
pub(crate) fn max_over_time(a: &Array2<f64>) -> (Array1<f64>, Vec<usize>) {
    let cols = a.ncols();
    let mut best = Array1::from_elem(cols, f64::NEG_INFINITY);
    let mut arg = vec![0usize; cols];
    for (t, row) in a.rows().into_iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if v > best[c] {
                best[c] = v;
                arg[c] = t;
            }
        }
    }
    (best, arg)
}

pub(crate) fn max_over_time_backward(d_pooled: &Array1<f64>, arg: &[usize], rows: usize) -> Array2<f64> {
    let mut d = Array2::zeros((rows, d_pooled.len()));
    for (c, &t) in arg.iter().enumerate() {
        d[[t, c]] = d_pooled[c];
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn im2col_zero_extends() {
        let conv = Conv1d {
            weight: Array2::zeros((1, 6)),
            bias: Array1::zeros(1),
            width: 3,
            pad_left: 1,
        };
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let u = conv.im2col(&x, 2);
        assert_eq!(u, array![[0.0, 0.0, 1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0, 0.0, 0.0]]);
        let back = conv.col2im(&Array2::ones((2, 6)), 2, 2);
        assert_eq!(back, array![[2.0, 2.0], [2.0, 2.0]]);
    }

    #[test]
    fn max_pool_picks_first_max() {
        let a = array![[1.0, 5.0], [3.0, 5.0], [2.0, 0.0]];
        let (m, arg) = max_over_time(&a);
        assert_eq!(m, array![3.0, 5.0]);
        assert_eq!(arg, vec![1, 0]);
    }
}
