use serde::{Deserialize, Serialize};

use crate::nn::Parameterized;

/// Adam with bias correction, constant learning rate and no weight decay.
#[derive(Clone, Debug)]
pub struct Adam<P> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: P,
    v: P,
    t: i32,
}

impl<P: Parameterized> Adam<P> {
    pub fn new(params: &P, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, params: &mut P, grads: &P) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let tensors = params
            .parameters_mut()
            .into_iter()
            .zip(grads.parameters())
            .zip(self.m.parameters_mut())
            .zip(self.v.parameters_mut());
        for (((p, g), m), v) in tensors {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopDecision {
    /// New best; the caller should snapshot the weights.
    Improved,
    Continue,
    Stop,
}

/// Patience-based stopping on validation loss. Improvement means strictly
/// below the best loss seen so far.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    epochs_seen: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            epochs_seen: 0,
        }
    }

    /// Records the next epoch's loss (epochs are numbered from 1).
    pub fn observe(&mut self, loss: f64) -> StopDecision {
        self.epochs_seen += 1;
        let improved = self.best.is_none_or(|(_, b)| loss < b);
        if improved {
            self.best = Some((self.epochs_seen, loss));
            return StopDecision::Improved;
        }
        let (best_epoch, _) = self.best.expect("set on first epoch");
        if self.epochs_seen - best_epoch >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|(e, _)| e)
    }

    pub fn best_loss(&self) -> Option<f64> {
        self.best.map(|(_, l)| l)
    }
}

/// Replays a loss curve under the stopping rule and an epoch cap.
/// Returns `(epochs_run, best_epoch)`.
pub fn simulate_early_stopping(losses: &[f64], patience: usize, max_epochs: usize) -> (usize, usize) {
    let mut es = EarlyStopping::new(patience);
    let mut run = 0;
    for &loss in losses.iter().take(max_epochs) {
        run += 1;
        if es.observe(loss) == StopDecision::Stop {
            break;
        }
    }
    (run, es.best_epoch().unwrap_or(0))
}
