use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::nn::{slice1, slice1_mut, softmax, Parameterized};

/// Learned combination of representation layers:
/// `gamma * sum_j softmax(s)_j * layer_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarMix {
    pub scalars: Array1<f64>,
    /// Single-element global scale.
    pub gamma: Array1<f64>,
}

impl ScalarMix {
    /// Uniform weights, unit scale.
    pub fn new(num_layers: usize) -> Self {
        ScalarMix {
            scalars: Array1::zeros(num_layers),
            gamma: Array1::ones(1),
        }
    }

    pub fn weights(&self) -> Array1<f64> {
        softmax(self.scalars.view())
    }

    pub fn forward(&self, layers: &[Array2<f64>]) -> Array2<f64> {
        let w = self.weights();
        let mut out = Array2::zeros(layers[0].raw_dim());
        for (l, wj) in layers.iter().zip(w.iter()) {
            out.scaled_add(self.gamma[0] * wj, l);
        }
        out
    }

    pub fn backward(&self, layers: &[Array2<f64>], d_out: &Array2<f64>, grads: &mut ScalarMix) {
        let w = self.weights();
        let per_layer: Vec<f64> = layers.iter().map(|l| (l * d_out).sum()).collect();
        let mixed: f64 = per_layer.iter().zip(w.iter()).map(|(g, wj)| g * wj).sum();
        grads.gamma[0] += mixed;
        // d/ds_k of sum_j w_j g_j with softmax weights.
        for k in 0..w.len() {
            grads.scalars[k] += self.gamma[0] * w[k] * (per_layer[k] - mixed);
        }
    }
}

impl Parameterized for ScalarMix {
    fn parameters(&self) -> Vec<&[f64]> {
        vec![slice1(&self.scalars), slice1(&self.gamma)]
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        vec![slice1_mut(&mut self.scalars), slice1_mut(&mut self.gamma)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn uniform_mix_is_mean() {
        let layers = vec![array![[1.0, 2.0]], array![[3.0, 6.0]]];
        assert_eq!(ScalarMix::new(2).forward(&layers), array![[2.0, 4.0]]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let layers = vec![array![[1.0, -2.0], [0.5, 0.1]], array![[3.0, 6.0], [-1.0, 2.0]], array![[0.2, 0.3], [0.4, -0.5]]];
        let probe = array![[0.7, -0.3], [1.1, 0.9]];
        let mut mix = ScalarMix::new(3);
        mix.scalars = array![0.2, -0.4, 0.9];
        mix.gamma = array![1.3];
        let loss = |m: &ScalarMix| (m.forward(&layers) * &probe).sum();
        let mut grads = mix.zeros_like();
        mix.backward(&layers, &probe, &mut grads);
        let analytic: Vec<f64> = grads.parameters().concat();
        let h = 1e-6;
        let mut numeric = Vec::new();
        for t in 0..2 {
            let n = mix.parameters()[t].len();
            for i in 0..n {
                let mut plus = mix.clone();
                plus.parameters_mut()[t][i] += h;
                let mut minus = mix.clone();
                minus.parameters_mut()[t][i] -= h;
                numeric.push((loss(&plus) - loss(&minus)) / (2.0 * h));
            }
        }
        for (a, n) in analytic.iter().zip(&numeric) {
            assert!((a - n).abs() < 1e-6, "{a} vs {n}");
        }
    }
}
