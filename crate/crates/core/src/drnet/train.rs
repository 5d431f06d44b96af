use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::checkpoint::{Checkpoint, TrainState};
use super::model::{Model, ModelSpec};
use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};
use crate::oracle::TargetPair;
use crate::rankcore::{rank_loss, ranking_accuracy, DynRep, RankLossParams};
use crate::seqgen::{sample_window, Sequence, Window};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    /// Self-supervised: backpropagate the rank loss of `f(I_t)` on its window.
    Rank,
    /// Regress precomputed target kernels with mean squared error.
    MseTarget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub half_width: usize,
    pub stride: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub loss: RankLossParams,
    pub epochs: usize,
    pub seed: u64,
    /// Windows drawn per epoch; `None` uses every available sample.
    pub windows_per_epoch: Option<usize>,
    /// Held-out windows scored after each epoch (0 disables).
    pub eval_windows: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: TrainMode::Rank,
            half_width: 3,
            stride: 1,
            batch_size: 8,
            adam: AdamConfig::default(),
            loss: RankLossParams::default(),
            epochs: 10,
            seed: 0,
            windows_per_epoch: None,
            eval_windows: 200,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| {
            Err(Error::Config {
                field: format!("train.{field}"),
                reason: reason.into(),
            })
        };
        if self.half_width == 0 {
            return bad("half_width", "must be ≥ 1");
        }
        if self.stride == 0 {
            return bad("stride", "must be ≥ 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be ≥ 1");
        }
        if self.epochs == 0 {
            return bad("epochs", "must be ≥ 1");
        }
        if !(self.adam.lr > 0.0) {
            return bad("adam.lr", "must be > 0");
        }
        if !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) {
            return bad("adam", "betas must lie in [0, 1)");
        }
        self.loss.validate()
    }
}

/// Training inputs. Rank mode sees only raw windows; targets are reachable
/// only through the MSE variant.
#[derive(Clone, Copy, Debug)]
pub enum TrainData<'a> {
    Windows(&'a [Sequence]),
    Targets(&'a [TargetPair]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub mean_loss: f64,
    pub heldout_accuracy: Option<f64>,
    pub windows: usize,
    pub steps: u64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub epochs: Vec<EpochMetrics>,
}

/// Centers `(sequence index, t)` usable for a `(T, S)` window, in order.
pub fn all_centers(seqs: &[Sequence], half_width: usize, stride: usize) -> Vec<(usize, usize)> {
    seqs.iter()
        .enumerate()
        .flat_map(|(i, s)| s.valid_centers(half_width, stride).map(move |t| (i, t)))
        .collect()
}

/// Up to `max` centers drawn without replacement under `seed`, sorted.
pub fn sample_centers(
    seqs: &[Sequence],
    half_width: usize,
    stride: usize,
    max: usize,
    seed: u64,
) -> Vec<(usize, usize)> {
    let mut all = all_centers(seqs, half_width, stride);
    if all.len() > max {
        Rng::substream(seed, 0xce17e5).shuffle(&mut all);
        all.truncate(max);
        all.sort_unstable();
    }
    all
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub mean: f64,
    pub windows: usize,
    /// Normal-approximation 95% half-width over per-window accuracies.
    pub ci_half_width: f64,
}

impl AccuracySummary {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("no windows to summarize"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Ok(AccuracySummary {
            mean,
            windows: values.len(),
            ci_half_width: 1.96 * (var / n).sqrt(),
        })
    }
}

/// Mean pairwise ranking accuracy of `kernel(window)` over the given centers.
pub fn evaluate_ranking<F>(
    seqs: &[Sequence],
    centers: &[(usize, usize)],
    half_width: usize,
    stride: usize,
    kernel: F,
) -> Result<AccuracySummary>
where
    F: Fn(&Window<f32>) -> Result<DynRep<f32>> + Sync,
{
    use rayon::prelude::*;
    let values: Vec<f64> = centers
        .par_iter()
        .map(|&(i, t)| {
            let w = sample_window(&seqs[i], t, half_width, stride)?;
            ranking_accuracy(&kernel(&w)?, &w)
        })
        .collect::<Result<_>>()?;
    AccuracySummary::from_values(&values)
}

/// Held-out accuracy of a network's kernel predicted from each center frame.
pub fn model_accuracy(
    model: &Model<f32>,
    seqs: &[Sequence],
    centers: &[(usize, usize)],
    half_width: usize,
    stride: usize,
) -> Result<AccuracySummary> {
    evaluate_ranking(seqs, centers, half_width, stride, |w| model.forward(w.center_frame()))
}

enum Sample<'a> {
    Window(Window<f32>),
    Target(&'a TargetPair),
}

/// Trains a fresh model. `on_epoch` sees each epoch's metrics as they land.
pub fn train(
    spec: &ModelSpec,
    data: TrainData<'_>,
    heldout: Option<&[Sequence]>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut model = Model::<f32>::init(spec, cfg.seed)?;
    let n_samples = match (cfg.mode, data) {
        (TrainMode::Rank, TrainData::Windows(seqs)) => all_centers(seqs, cfg.half_width, cfg.stride).len(),
        (TrainMode::MseTarget, TrainData::Targets(pairs)) => pairs.len(),
        (TrainMode::Rank, TrainData::Targets(_)) => {
            return Err(Error::Config {
                field: "train.mode".into(),
                reason: "rank mode trains on raw windows, not target pairs".into(),
            })
        }
        (TrainMode::MseTarget, TrainData::Windows(_)) => {
            return Err(Error::Config {
                field: "train.mode".into(),
                reason: "mse-target mode needs oracle target pairs; run solve-targets first".into(),
            })
        }
    };
    if n_samples == 0 {
        return Err(Error::invalid(format!(
            "training split has no usable windows for T = {}, S = {}",
            cfg.half_width, cfg.stride
        )));
    }
    let centers = match data {
        TrainData::Windows(seqs) => all_centers(seqs, cfg.half_width, cfg.stride),
        TrainData::Targets(_) => Vec::new(),
    };
    let eval_centers = match heldout {
        Some(seqs) if cfg.eval_windows > 0 => {
            sample_centers(seqs, cfg.half_width, cfg.stride, cfg.eval_windows, cfg.seed)
        }
        _ => Vec::new(),
    };

    let mut opt = Adam::new(cfg.adam, &model.params);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut batch_id = 0u64;
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n_samples).collect();
        Rng::substream(cfg.seed, 1 + epoch as u64).shuffle(&mut order);
        if let Some(k) = cfg.windows_per_epoch {
            order.truncate(k.max(1));
        }
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = model.zeros_like();
            let mut batch_loss = 0.0;
            let inv = 1.0 / batch.len() as f32;
            for &idx in batch {
                let sample = match data {
                    TrainData::Windows(seqs) => {
                        let (si, t) = centers[idx];
                        Sample::Window(sample_window(&seqs[si], t, cfg.half_width, cfg.stride)?)
                    }
                    TrainData::Targets(pairs) => Sample::Target(&pairs[idx]),
                };
                let input = match &sample {
                    Sample::Window(w) => w.center_frame(),
                    Sample::Target(p) => &p.frame,
                };
                let (d, cache) = model.forward_cached(input)?;
                let (loss, grad_d) = match &sample {
                    Sample::Window(w) => {
                        let r = rank_loss(&d, w, &cfg.loss)
                            .map_err(|e| non_finite_in_batch(e, batch_id))?;
                        (r.loss, r.grad_d)
                    }
                    Sample::Target(p) => mse_and_grad(&d.d, &p.target.d)?,
                };
                if !loss.is_finite() {
                    return Err(Error::NonFinite(format!("loss {loss} in batch {batch_id}")));
                }
                batch_loss += loss;
                let g = model.backward(&cache, &grad_d.scale(inv))?;
                for (acc, gi) in grads.iter_mut().zip(&g) {
                    acc.axpy(1.0, gi)?;
                }
            }
            opt.update(&mut model.params, &grads)?;
            if model.params.iter().any(|p| !p.is_finite()) {
                return Err(Error::NonFinite(format!("parameters after batch {batch_id}")));
            }
            loss_sum += batch_loss;
            batch_id += 1;
        }
        let heldout_accuracy = match heldout {
            Some(seqs) if !eval_centers.is_empty() => {
                Some(model_accuracy(&model, seqs, &eval_centers, cfg.half_width, cfg.stride)?.mean)
            }
            _ => None,
        };
        let m = EpochMetrics {
            epoch,
            mean_loss: loss_sum / order.len() as f64,
            heldout_accuracy,
            windows: order.len(),
            steps: opt.step,
        };
        on_epoch(&m)?;
        history.push(m);
    }
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            model,
            optimizer: Some(opt),
            state: TrainState {
                config: Some(cfg.clone()),
                seed: cfg.seed,
                steps: batch_id,
            },
        },
        epochs: history,
    })
}

fn non_finite_in_batch(e: Error, batch: u64) -> Error {
    match e {
        Error::NonFinite(msg) => Error::NonFinite(format!("{msg} in batch {batch}")),
        other => other,
    }
}

/// Per-element mean squared error and its gradient w.r.t. `pred`.
pub fn mse_and_grad(pred: &Tensor<f32>, target: &Tensor<f32>) -> Result<(f64, Tensor<f32>)> {
    let diff = pred.sub(target)?;
    let n = diff.len() as f64;
    let loss = diff.data().iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / n;
    Ok((loss, diff.scale((2.0 / n) as f32)))
}
