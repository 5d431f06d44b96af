use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::drnet::{AdamConfig, ModelSpec};
use crate::error::{Error, Result};
use crate::mdr::{check_levels, RegressorConfig};
use crate::oracle::{InitPolicy, TargetKind};
use crate::rankcore::CenterPairs;
use crate::seqgen::DatasetSpec;

/// One declarative file describing a whole experiment. Every field has a
/// default, and the resolved value is echoed into each run manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub seed: u64,
    pub dataset: DatasetSpec,
    pub model: ModelSpec,
    pub train: TrainSection,
    pub targets: TargetsSection,
    pub eval: EvalSection,
    pub task: TaskSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            output_dir: PathBuf::from("runs/default"),
            seed: 0,
            dataset: DatasetSpec::default(),
            model: ModelSpec::default(),
            train: TrainSection::default(),
            targets: TargetsSection::default(),
            eval: EvalSection::default(),
            task: TaskSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    /// Windows drawn per epoch; 0 uses every valid center.
    pub windows_per_epoch: usize,
    /// Held-out windows scored after each epoch; 0 disables.
    pub eval_windows: usize,
    pub adam: AdamConfig,
    pub gamma: f64,
    pub epsilon: f64,
    /// Margin as a fraction of the mean frame norm of the pretrain split.
    pub theta_fraction: f64,
    /// Frames sampled (evenly) to estimate the mean frame norm.
    pub theta_frames: usize,
    pub max_loss: Option<f64>,
    pub center_pairs: CenterPairs,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            epochs: 6,
            batch_size: 8,
            windows_per_epoch: 2000,
            eval_windows: 200,
            adam: AdamConfig::default(),
            gamma: 1e-3,
            epsilon: 0.0,
            theta_fraction: 0.01,
            theta_frames: 500,
            max_loss: None,
            center_pairs: CenterPairs::Include,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetsSection {
    pub kind: TargetKind,
    pub center_step: usize,
    pub max_steps: usize,
    pub step_size: f64,
    pub init: InitPolicy,
}

impl Default for TargetsSection {
    fn default() -> Self {
        TargetsSection {
            kind: TargetKind::Oracle,
            center_step: 8,
            max_steps: 500,
            step_size: 1e-2,
            init: InitPolicy::Zero,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub t_grid: Vec<usize>,
    pub s_grid: Vec<usize>,
    /// Windows scored per (T, S) cell.
    pub windows: usize,
    /// Random kernels averaged per window by the `random` method.
    pub random_trials: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            t_grid: vec![3, 5, 7, 9],
            s_grid: vec![1, 2, 3, 4],
            windows: 300,
            random_trials: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSection {
    pub levels: Vec<usize>,
    /// Stride of the DR networks stacked into the task input.
    pub dr_stride: usize,
    pub train_frames: usize,
    pub test_frames: usize,
    /// Pretrain frames used to fit each level's channel standardization.
    pub stats_frames: usize,
    pub regressor: RegressorConfig,
}

impl Default for TaskSection {
    fn default() -> Self {
        TaskSection {
            levels: vec![0, 3, 5],
            dr_stride: 2,
            train_frames: 2000,
            test_frames: 1000,
            stats_frames: 500,
            regressor: RegressorConfig::default(),
        }
    }
}

fn positive(field: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::Config {
            field: field.into(),
            reason: "must be ≥ 1".into(),
        });
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parses TOML; unknown keys and bad values name their field path.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let reason = e.into_inner().message().trim().to_string();
            Error::Config { field, reason }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.entries()?;
        self.model.validate()?;
        positive("train.epochs", self.train.epochs)?;
        positive("train.batch_size", self.train.batch_size)?;
        positive("targets.center_step", self.targets.center_step)?;
        positive("targets.max_steps", self.targets.max_steps)?;
        positive("eval.windows", self.eval.windows)?;
        positive("eval.random_trials", self.eval.random_trials)?;
        positive("task.dr_stride", self.task.dr_stride)?;
        positive("task.train_frames", self.task.train_frames)?;
        positive("task.test_frames", self.task.test_frames)?;
        positive("task.stats_frames", self.task.stats_frames)?;
        if self.eval.t_grid.contains(&0) || self.eval.s_grid.contains(&0) {
            return Err(Error::Config {
                field: "eval".into(),
                reason: "grid entries must be ≥ 1".into(),
            });
        }
        check_levels(&self.task.levels).map_err(|e| match e {
            Error::Config { reason, .. } => Error::Config {
                field: "task.levels".into(),
                reason,
            },
            other => other,
        })?;
        let [c, h, w] = self.dataset.shape.frame_dims();
        if [c, h, w] != self.model.io_shape() {
            return Err(Error::Config {
                field: "model".into(),
                reason: format!(
                    "model input {:?} does not match dataset frames {:?}",
                    self.model.io_shape(),
                    [c, h, w]
                ),
            });
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form of the resolved config.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(self)?)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg = ExperimentConfig::from_toml(
            "seed = 4\n[dataset]\nn_pretrain = 7\n[dataset.shape]\nheight = 32\nwidth = 32\n[model]\nheight = 32\nwidth = 32\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.dataset.n_pretrain, 7);
        assert_eq!(cfg.dataset.n_downstream_test, 50);
        assert_eq!(cfg.dataset.shape.length, 120);
        assert_eq!(cfg.train, TrainSection::default());
    }

    #[test]
    fn bad_envelope_kind_names_the_field() {
        let err = ExperimentConfig::from_toml("[dataset]\nkinds = [\"raised-cosine\", \"wobble\"]\n").unwrap_err();
        assert_eq!(err.kind(), "config");
        let msg = err.to_string();
        assert!(msg.contains("dataset.kinds"), "{msg}");
        assert!(msg.contains("wobble"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml("[train]\nepohcs = 3\n").unwrap_err();
        assert!(err.to_string().contains("train"), "{err}");
    }

    #[test]
    fn mismatched_model_shape_is_rejected() {
        let err = ExperimentConfig::from_toml("[model]\nheight = 32\n").unwrap_err();
        assert!(err.to_string().contains("model"), "{err}");
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.seed = 1;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
    }
}
