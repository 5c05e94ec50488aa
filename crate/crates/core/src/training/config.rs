use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::corpus::Scope;
use crate::embeddings::BackendSpec;
use crate::encoders::{HeadConfig, HeadKind};
use crate::taskgen::{Task, DEFAULT_WINDOW};

fn default_batch_size() -> usize {
    16
}
fn default_learning_rate() -> f64 {
    2e-5
}
fn default_patience() -> usize {
    5
}
fn default_runs() -> usize {
    5
}
fn default_k() -> usize {
    5
}
fn default_window() -> usize {
    DEFAULT_WINDOW
}

/// Head hyperparameters other than the head kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadParams {
    pub dropout_rate: f64,
    pub bilstm_hidden: usize,
    pub cnn_filters: usize,
    pub cnn_kernels: Vec<usize>,
    pub resnet_filters: [usize; 3],
}

impl Default for HeadParams {
    fn default() -> Self {
        let c = HeadConfig::new(HeadKind::Linear);
        HeadParams {
            dropout_rate: c.dropout_rate,
            bilstm_hidden: c.bilstm_hidden,
            cnn_filters: c.cnn_filters,
            cnn_kernels: c.cnn_kernels,
            resnet_filters: c.resnet_filters,
        }
    }
}

/// One cell of the experiment grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    /// Only meaningful for clause recognition; other tasks always use the
    /// full document.
    #[serde(default)]
    pub scope: Scope,
    pub backend_id: String,
    pub head_id: HeadKind,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to the backend family's epoch cap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_epochs: Option<usize>,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub head: HeadParams,
    /// `key=value` overrides applied on top of the file, kept for the record.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<String>,
}

impl ExperimentConfig {
    pub fn new(task: Task, backend_id: &str, head_id: HeadKind) -> Self {
        ExperimentConfig {
            task,
            scope: Scope::Full,
            backend_id: backend_id.to_string(),
            head_id,
            seed: 0,
            max_epochs: None,
            batch_size: default_batch_size(),
            learning_rate: default_learning_rate(),
            patience: default_patience(),
            runs: default_runs(),
            k: default_k(),
            window: default_window(),
            head: HeadParams::default(),
            overrides: Vec::new(),
        }
    }

    /// The scope examples are actually drawn from.
    pub fn effective_scope(&self) -> Scope {
        if self.task.uses_scope() {
            self.scope
        } else {
            Scope::Full
        }
    }

    pub fn effective_max_epochs(&self, backend: &BackendSpec) -> usize {
        self.max_epochs.unwrap_or_else(|| backend.epoch_cap())
    }

    pub fn head_config(&self) -> HeadConfig {
        HeadConfig {
            head_id: self.head_id,
            dropout_rate: self.head.dropout_rate,
            bilstm_hidden: self.head.bilstm_hidden,
            cnn_filters: self.head.cnn_filters,
            cnn_kernels: self.head.cnn_kernels.clone(),
            resnet_filters: self.head.resnet_filters,
            num_classes: 2,
        }
    }

    pub fn validate(&self, backend: &BackendSpec) -> Result<(), TrainError> {
        let invalid = |m: String| Err(TrainError::InvalidConfig(m));
        if backend.backend_id != self.backend_id {
            return invalid(format!("backend `{}` given for `{}`", backend.backend_id, self.backend_id));
        }
        let cap = backend.epoch_cap();
        let max_epochs = self.effective_max_epochs(backend);
        if max_epochs == 0 || max_epochs > cap {
            return invalid(format!("max_epochs {max_epochs} outside 1..={cap} for a {} backend", backend.family));
        }
        if self.patience == 0 || self.patience >= max_epochs {
            return invalid(format!("patience {} must be in 1..{max_epochs}", self.patience));
        }
        if self.batch_size == 0 || self.runs == 0 {
            return invalid("batch_size and runs must be positive".into());
        }
        if self.k < 2 {
            return invalid(format!("k must be at least 2, got {}", self.k));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return invalid(format!("learning_rate {} must be positive", self.learning_rate));
        }
        self.head_config()
            .validate()
            .map_err(|e| TrainError::InvalidConfig(e.to_string()))
    }

    /// Applies one `key=value` override. Unknown keys are rejected.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), TrainError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| TrainError::InvalidConfig(format!("override `{assignment}` is not key=value")))?;
        let bad = |e: &dyn std::fmt::Display| TrainError::InvalidConfig(format!("{key}: {e}"));
        let list = |v: &str| -> Result<Vec<usize>, TrainError> {
            v.split(',').map(|x| x.trim().parse::<usize>().map_err(|e| bad(&e))).collect()
        };
        match key {
            "task" => self.task = value.parse().map_err(|e: String| bad(&e))?,
            "scope" => self.scope = value.parse().map_err(|e: String| bad(&e))?,
            "backend_id" => self.backend_id = value.to_string(),
            "head_id" => self.head_id = value.parse().map_err(|e: String| bad(&e))?,
            "seed" => self.seed = value.parse().map_err(|e| bad(&e))?,
            "max_epochs" => self.max_epochs = Some(value.parse().map_err(|e| bad(&e))?),
            "batch_size" => self.batch_size = value.parse().map_err(|e| bad(&e))?,
            "learning_rate" => self.learning_rate = value.parse().map_err(|e| bad(&e))?,
            "patience" => self.patience = value.parse().map_err(|e| bad(&e))?,
            "runs" => self.runs = value.parse().map_err(|e| bad(&e))?,
            "k" => self.k = value.parse().map_err(|e| bad(&e))?,
            "window" => self.window = value.parse().map_err(|e| bad(&e))?,
            "head.dropout_rate" => self.head.dropout_rate = value.parse().map_err(|e| bad(&e))?,
            "head.bilstm_hidden" => self.head.bilstm_hidden = value.parse().map_err(|e| bad(&e))?,
            "head.cnn_filters" => self.head.cnn_filters = value.parse().map_err(|e| bad(&e))?,
            "head.cnn_kernels" => self.head.cnn_kernels = list(value)?,
            "head.resnet_filters" => {
                self.head.resnet_filters = list(value)?
                    .try_into()
                    .map_err(|_| bad(&"expected three comma-separated sizes"))?
            }
            _ => return Err(TrainError::InvalidConfig(format!("unknown override key `{key}`"))),
        }
        self.overrides.push(assignment.to_string());
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

/// Synthetic corpus parameters for grids that run without annotated data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoConfig {
    pub documents: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Grid file: corpus source, output directory, backends and experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demo: Option<DemoConfig>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub split: SplitConfig,
    pub backends: Vec<BackendSpec>,
    pub experiments: Vec<ExperimentConfig>,
}

impl GridConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, TrainError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| TrainError::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn backend(&self, backend_id: &str) -> Result<&BackendSpec, TrainError> {
        self.backends
            .iter()
            .find(|b| b.backend_id == backend_id)
            .ok_or_else(|| TrainError::InvalidConfig(format!("no backend `{backend_id}` in the grid")))
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.corpus.is_some() == self.demo.is_some() {
            return Err(TrainError::InvalidConfig("exactly one of `corpus` and `demo` is required".into()));
        }
        for b in &self.backends {
            b.validate()?;
        }
        for e in &self.experiments {
            e.validate(self.backend(&e.backend_id)?)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_protocol() {
        let c: ExperimentConfig =
            serde_json::from_str(r#"{"task":"relation_mining","backend_id":"mock","head_id":"cnn"}"#).unwrap();
        assert_eq!((c.batch_size, c.learning_rate, c.patience, c.runs, c.k), (16, 2e-5, 5, 5, 5));
        assert_eq!(c.effective_max_epochs(&BackendSpec::mock(8)), 150);
        assert_eq!(c.head_config().cnn_kernels, vec![3, 4, 5, 6]);
        c.validate(&BackendSpec::mock(8)).unwrap();
    }

    #[test]
    fn transformer_cap_is_enforced() {
        let spec = BackendSpec::new("lb", crate::embeddings::BackendFamily::Transformer, 8);
        let mut c = ExperimentConfig::new(Task::PremiseCls, "lb", HeadKind::Linear);
        assert_eq!(c.effective_max_epochs(&spec), 10);
        c.max_epochs = Some(11);
        assert!(c.validate(&spec).is_err());
    }

    #[test]
    fn overrides() {
        let mut c = ExperimentConfig::new(Task::ClauseRecognition, "mock", HeadKind::Resnet);
        c.apply_override("learning_rate=0.001").unwrap();
        c.apply_override("head.resnet_filters=8,8,16").unwrap();
        c.apply_override("scope=law_section").unwrap();
        assert_eq!(c.learning_rate, 1e-3);
        assert_eq!(c.head.resnet_filters, [8, 8, 16]);
        assert_eq!(c.scope, Scope::LawSection);
        assert_eq!(c.overrides.len(), 3);
        assert!(c.apply_override("colour=blue").is_err());
        assert!(c.apply_override("patience").is_err());
        assert!(c.apply_override("head.resnet_filters=1,2").is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        let r: Result<ExperimentConfig, _> =
            serde_json::from_str(r#"{"task":"premise_cls","backend_id":"m","head_id":"linear","lr":1}"#);
        assert!(r.is_err());
    }
}
