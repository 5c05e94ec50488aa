use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{readout_backward, readout_forward, ReadoutCache, TrainRng};
use crate::nn::{fan_in_uniform, orthogonal, sigmoid, slice1, slice1_mut, slice2, slice2_mut, Affine, Parameterized};

/// One LSTM direction, gates stacked as `[input, forget, cell, output]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmDirection {
    /// `[4H x d]`
    pub w_ih: Array2<f64>,
    /// `[4H x H]`
    pub w_hh: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Per-step activations, rows in processing order.
#[derive(Clone, Debug)]
pub struct LstmTrace {
    gates: Array2<f64>,
    cells: Array2<f64>,
    hidden: Array2<f64>,
}

impl LstmTrace {
    pub fn hidden(&self) -> &Array2<f64> {
        &self.hidden
    }

    fn final_hidden(&self) -> Array1<f64> {
        self.hidden.row(self.hidden.nrows() - 1).to_owned()
    }
}

impl LstmDirection {
    pub fn new<R: Rng>(rng: &mut R, input_dim: usize, hidden: usize) -> Self {
        let mut w_hh = Array2::zeros((4 * hidden, hidden));
        for g in 0..4 {
            w_hh.slice_mut(s![g * hidden..(g + 1) * hidden, ..])
                .assign(&orthogonal(rng, hidden, hidden));
        }
        LstmDirection {
            w_ih: fan_in_uniform(rng, 4 * hidden, input_dim, input_dim),
            w_hh,
            bias: Array1::zeros(4 * hidden),
        }
    }

    fn hidden_size(&self) -> usize {
        self.w_hh.ncols()
    }

    pub fn run(&self, x: &Array2<f64>) -> LstmTrace {
        let hs = self.hidden_size();
        let len = x.nrows();
        let projected = x.dot(&self.w_ih.t()) + &self.bias;
        let mut gates = Array2::zeros((len, 4 * hs));
        let mut cells = Array2::zeros((len, hs));
        let mut hidden = Array2::zeros((len, hs));
        let mut h = Array1::<f64>::zeros(hs);
        let mut c = Array1::<f64>::zeros(hs);
        for t in 0..len {
            let pre = &projected.row(t) + &self.w_hh.dot(&h);
            let mut g = gates.row_mut(t);
            for k in 0..hs {
                let i = sigmoid(pre[k]);
                let f = sigmoid(pre[hs + k]);
                let cand = pre[2 * hs + k].tanh();
                let o = sigmoid(pre[3 * hs + k]);
                c[k] = f * c[k] + i * cand;
                h[k] = o * c[k].tanh();
                g[k] = i;
                g[hs + k] = f;
                g[2 * hs + k] = cand;
                g[3 * hs + k] = o;
            }
            cells.row_mut(t).assign(&c);
            hidden.row_mut(t).assign(&h);
        }
        LstmTrace { gates, cells, hidden }
    }

    /// Backpropagates `d_final` (gradient on the last hidden state).
    pub fn backward(&self, x: &Array2<f64>, trace: &LstmTrace, d_final: &Array1<f64>, grads: &mut LstmDirection) -> Array2<f64> {
        let hs = self.hidden_size();
        let len = x.nrows();
        let mut d_pre = Array2::zeros((len, 4 * hs));
        let mut dh = d_final.clone();
        let mut dc_next = Array1::<f64>::zeros(hs);
        for t in (0..len).rev() {
            let g = trace.gates.row(t);
            let c = trace.cells.row(t);
            let mut row = d_pre.row_mut(t);
            for k in 0..hs {
                let (i, f, cand, o) = (g[k], g[hs + k], g[2 * hs + k], g[3 * hs + k]);
                let tc = c[k].tanh();
                let c_prev = if t > 0 { trace.cells[[t - 1, k]] } else { 0.0 };
                let d_o = dh[k] * tc;
                let dc = dc_next[k] + dh[k] * o * (1.0 - tc * tc);
                row[k] = dc * cand * i * (1.0 - i);
                row[hs + k] = dc * c_prev * f * (1.0 - f);
                row[2 * hs + k] = dc * i * (1.0 - cand * cand);
                row[3 * hs + k] = d_o * o * (1.0 - o);
                dc_next[k] = dc * f;
            }
            dh = self.w_hh.t().dot(&d_pre.row(t));
        }
        grads.w_ih += &d_pre.t().dot(x);
        if len > 1 {
            grads.w_hh += &d_pre.slice(s![1.., ..]).t().dot(&trace.hidden.slice(s![..len - 1, ..]));
        }
        grads.bias += &d_pre.sum_axis(Axis(0));
        d_pre.dot(&self.w_ih)
    }

    fn push_params<'a>(&'a self, out: &mut Vec<&'a [f64]>) {
        out.push(slice2(&self.w_ih));
        out.push(slice2(&self.w_hh));
        out.push(slice1(&self.bias));
    }

    fn push_params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut [f64]>) {
        out.push(slice2_mut(&mut self.w_ih));
        out.push(slice2_mut(&mut self.w_hh));
        out.push(slice1_mut(&mut self.bias));
    }
}

/// Single bidirectional LSTM layer over real tokens; final forward and
/// backward states are concatenated and read out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiLstmHead {
    pub forward_dir: LstmDirection,
    pub backward_dir: LstmDirection,
    pub out: Affine,
    pub dropout_rate: f64,
}

#[derive(Clone, Debug)]
pub struct BiLstmCache {
    reversed: Array2<f64>,
    fwd: LstmTrace,
    bwd: LstmTrace,
    readout: ReadoutCache,
}

fn reverse_rows(x: &Array2<f64>) -> Array2<f64> {
    x.slice(s![..;-1, ..]).to_owned()
}

impl BiLstmHead {
    pub fn new<R: Rng>(rng: &mut R, input_dim: usize, classes: usize, hidden: usize, dropout_rate: f64) -> Self {
        BiLstmHead {
            forward_dir: LstmDirection::new(rng, input_dim, hidden),
            backward_dir: LstmDirection::new(rng, input_dim, hidden),
            out: Affine::new(rng, 2 * hidden, classes),
            dropout_rate,
        }
    }

    /// Per-position `[L x 2H]` outputs, forward state then backward state.
    pub fn sequence_output(&self, x: &Array2<f64>) -> Array2<f64> {
        let fwd = self.forward_dir.run(x);
        let bwd = self.backward_dir.run(&reverse_rows(x));
        concatenate(Axis(1), &[fwd.hidden.view(), reverse_rows(&bwd.hidden).view()]).expect("equal lengths")
    }

    pub fn forward_rows(&self, x: &Array2<f64>, rng: Option<&mut TrainRng>) -> (Array1<f64>, BiLstmCache) {
        let reversed = reverse_rows(x);
        let fwd = self.forward_dir.run(x);
        let bwd = self.backward_dir.run(&reversed);
        let features = concatenate(Axis(0), &[fwd.final_hidden().view(), bwd.final_hidden().view()]).expect("1-d");
        let (logits, readout) = readout_forward(&self.out, features, self.dropout_rate, rng);
        (
            logits,
            BiLstmCache {
                reversed,
                fwd,
                bwd,
                readout,
            },
        )
    }

    pub fn backward_rows(&self, x: &Array2<f64>, cache: &BiLstmCache, d_logits: &Array1<f64>, grads: &mut Self) -> Array2<f64> {
        let d_features = readout_backward(&self.out, &cache.readout, d_logits, &mut grads.out);
        let hs = self.forward_dir.hidden_size();
        let d_fwd = d_features.slice(s![..hs]).to_owned();
        let d_bwd = d_features.slice(s![hs..]).to_owned();
        let dx_fwd = self.forward_dir.backward(x, &cache.fwd, &d_fwd, &mut grads.forward_dir);
        let dx_bwd = self
            .backward_dir
            .backward(&cache.reversed, &cache.bwd, &d_bwd, &mut grads.backward_dir);
        dx_fwd + reverse_rows(&dx_bwd)
    }
}

impl Parameterized for BiLstmHead {
    fn parameters(&self) -> Vec<&[f64]> {
        let mut v = Vec::new();
        self.forward_dir.push_params(&mut v);
        self.backward_dir.push_params(&mut v);
        self.out.push_params(&mut v);
        v
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = Vec::new();
        self.forward_dir.push_params_mut(&mut v);
        self.backward_dir.push_params_mut(&mut v);
        self.out.push_params_mut(&mut v);
        v
    }
}
