//! Downstream head: two strided conv levels, global average pooling and one
//! linear output per target, trained with Adam on mean squared error.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stack::ChannelStats;
use crate::binio::{bytes_to_f32s, decode_container, encode_container, read_file, write_file};
use crate::drnet::{Adam, AdamConfig};
use crate::error::{Error, Result};
use crate::numerics::{
    add_channel_bias, channel_sums, conv2d_backward, conv2d_forward, global_avg_pool_backward,
    global_avg_pool_forward, leaky_relu_backward, leaky_relu_forward, Real, Rng, Tensor,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressorSpec {
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub widths: [usize; 2],
    pub targets: usize,
    pub leaky_slope: f64,
}

impl RegressorSpec {
    fn blocks(&self) -> Vec<Vec<usize>> {
        let [w1, w2] = self.widths;
        vec![
            vec![w1, self.in_channels, 3, 3],
            vec![w1],
            vec![w2, w1, 3, 3],
            vec![w2],
            vec![self.targets, w2],
            vec![self.targets],
        ]
    }

    fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.targets == 0 || self.widths.contains(&0) {
            return Err(Error::invalid("regressor channel and target counts must be positive"));
        }
        if self.height < 4 || self.width < 4 {
            return Err(Error::invalid("regressor input must be at least 4x4"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressorConfig {
    pub widths: [usize; 2],
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for RegressorConfig {
    fn default() -> Self {
        RegressorConfig {
            widths: [8, 16],
            epochs: 10,
            batch_size: 16,
            adam: AdamConfig {
                lr: 3e-3,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
            seed: 0,
        }
    }
}

/// Trained head plus the label standardization it predicts in.
#[derive(Clone, Debug, PartialEq)]
pub struct Regressor<T: Real = f32> {
    pub spec: RegressorSpec,
    pub params: Vec<Tensor<T>>,
    pub label_mean: Vec<f32>,
    pub label_std: Vec<f32>,
}

struct Cache<T: Real> {
    x: Tensor<T>,
    pre1: Tensor<T>,
    a1: Tensor<T>,
    pre2: Tensor<T>,
    pooled: Tensor<T>,
}

impl<T: Real> Regressor<T> {
    /// Conv layers get variance-scaled normal weights; the head starts at
    /// zero, i.e. as the constant predictor of the training-label mean.
    pub fn init(spec: &RegressorSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = Rng::substream(seed, 0x7e6);
        let s = spec.leaky_slope;
        let params = spec
            .blocks()
            .iter()
            .enumerate()
            .map(|(i, shape)| match i {
                0 | 2 => {
                    let fan_in = shape[1] * 9;
                    rng.normal_tensor(shape, (2.0 / ((1.0 + s * s) * fan_in as f64)).sqrt())
                }
                _ => Tensor::zeros(shape),
            })
            .collect();
        Ok(Regressor {
            spec: spec.clone(),
            params,
            label_mean: vec![0.0; spec.targets],
            label_std: vec![1.0; spec.targets],
        })
    }

    fn forward_cached(&self, x: &Tensor<T>) -> Result<(Vec<T>, Cache<T>)> {
        let want = [self.spec.in_channels, self.spec.height, self.spec.width];
        if x.shape() != want {
            return Err(Error::ShapeMismatch {
                op: "regressor input",
                left: want.to_vec(),
                right: x.shape().to_vec(),
            });
        }
        let slope = T::of(self.spec.leaky_slope);
        let mut pre1 = conv2d_forward(x, &self.params[0], 2, 1)?;
        add_channel_bias(&mut pre1, self.params[1].data())?;
        let a1 = leaky_relu_forward(&pre1, slope);
        let mut pre2 = conv2d_forward(&a1, &self.params[2], 2, 1)?;
        add_channel_bias(&mut pre2, self.params[3].data())?;
        let pooled = global_avg_pool_forward(&leaky_relu_forward(&pre2, slope))?;
        let w2 = self.spec.widths[1];
        let head = self.params[4].data();
        let out = (0..self.spec.targets)
            .map(|j| {
                crate::numerics::dot(&head[j * w2..(j + 1) * w2], pooled.data()) + self.params[5].data()[j]
            })
            .collect();
        Ok((
            out,
            Cache {
                x: x.clone(),
                pre1,
                a1,
                pre2,
                pooled,
            },
        ))
    }

    /// Outputs in standardized label units.
    pub fn forward_raw(&self, x: &Tensor<T>) -> Result<Vec<T>> {
        Ok(self.forward_cached(x)?.0)
    }

    fn backward(&self, c: &Cache<T>, g_out: &[T]) -> Result<Vec<Tensor<T>>> {
        let slope = T::of(self.spec.leaky_slope);
        let w2 = self.spec.widths[1];
        let head = self.params[4].data();
        let mut g_head = vec![T::zero(); self.spec.targets * w2];
        let mut g_pooled = vec![T::zero(); w2];
        for (j, &g) in g_out.iter().enumerate() {
            for k in 0..w2 {
                g_head[j * w2 + k] = g * c.pooled.data()[k];
                g_pooled[k] = g_pooled[k] + g * head[j * w2 + k];
            }
        }
        let (_, h2, w2s) = c.pre2.dims3()?;
        let g_a2 = global_avg_pool_backward(&Tensor::from_vec(vec![w2], g_pooled)?, h2, w2s);
        let g_pre2 = leaky_relu_backward(&c.pre2, &g_a2, slope);
        let (g_a1, g_k2) = conv2d_backward(&c.a1, &self.params[2], &g_pre2, 2, 1)?;
        let g_pre1 = leaky_relu_backward(&c.pre1, &g_a1, slope);
        let (_, g_k1) = conv2d_backward(&c.x, &self.params[0], &g_pre1, 2, 1)?;
        Ok(vec![
            g_k1,
            Tensor::from_vec(vec![g_pre1.shape()[0]], channel_sums(&g_pre1)?)?,
            g_k2,
            Tensor::from_vec(vec![w2], channel_sums(&g_pre2)?)?,
            Tensor::from_vec(vec![self.spec.targets, w2], g_head)?,
            Tensor::from_vec(vec![self.spec.targets], g_out.to_vec())?,
        ])
    }
}

impl Regressor<f32> {
    /// Predictions in label units.
    pub fn predict(&self, x: &Tensor<f32>) -> Result<Vec<f32>> {
        Ok(self
            .forward_raw(x)?
            .iter()
            .enumerate()
            .map(|(j, &z)| z * self.label_std[j] + self.label_mean[j])
            .collect())
    }
}

/// Trains a regressor on `(input, labels)` pairs; returns it with the mean
/// training loss (standardized units) of every epoch.
pub fn train_regressor(
    inputs: &[Tensor<f32>],
    labels: &[Vec<f32>],
    cfg: &RegressorConfig,
) -> Result<(Regressor<f32>, Vec<f64>)> {
    if inputs.is_empty() || inputs.len() != labels.len() {
        return Err(Error::invalid(format!(
            "need matching non-empty inputs and labels, got {} and {}",
            inputs.len(),
            labels.len()
        )));
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::Config {
            field: "regressor".into(),
            reason: "epochs and batch_size must be ≥ 1".into(),
        });
    }
    let (c, h, w) = inputs[0].dims3()?;
    for x in &inputs[1..] {
        if x.shape() != inputs[0].shape() {
            return Err(Error::ShapeMismatch {
                op: "regressor training inputs",
                left: inputs[0].shape().to_vec(),
                right: x.shape().to_vec(),
            });
        }
    }
    let targets = labels[0].len();
    if targets == 0 || labels.iter().any(|l| l.len() != targets || l.iter().any(|v| !v.is_finite())) {
        return Err(Error::invalid("labels must be finite with a consistent, non-zero count"));
    }
    let spec = RegressorSpec {
        in_channels: c,
        height: h,
        width: w,
        widths: cfg.widths,
        targets,
        leaky_slope: 0.1,
    };
    let mut model = Regressor::<f32>::init(&spec, cfg.seed)?;
    let n = labels.len() as f64;
    for j in 0..targets {
        let m = labels.iter().map(|l| l[j] as f64).sum::<f64>() / n;
        let var = labels.iter().map(|l| (l[j] as f64 - m).powi(2)).sum::<f64>() / n;
        model.label_mean[j] = m as f32;
        model.label_std[j] = if var.sqrt() > 1e-8 { var.sqrt() as f32 } else { 1.0 };
    }
    let z: Vec<Vec<f32>> = labels
        .iter()
        .map(|l| (0..targets).map(|j| (l[j] - model.label_mean[j]) / model.label_std[j]).collect())
        .collect();

    let mut opt = Adam::new(cfg.adam, &model.params);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        Rng::substream(cfg.seed, 1 + epoch as u64).shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads: Vec<Tensor<f32>> = model.params.iter().map(|p| Tensor::zeros(p.shape())).collect();
            let scale = 2.0 / (batch.len() * targets) as f32;
            for &i in batch {
                let (out, cache) = model.forward_cached(&inputs[i])?;
                let g: Vec<f32> = out.iter().zip(&z[i]).map(|(o, y)| scale * (o - y)).collect();
                total += out.iter().zip(&z[i]).map(|(o, y)| ((o - y) as f64).powi(2)).sum::<f64>() / targets as f64;
                for (acc, gi) in grads.iter_mut().zip(model.backward(&cache, &g)?) {
                    acc.axpy(1.0, &gi)?;
                }
            }
            opt.update(&mut model.params, &grads)?;
        }
        if !total.is_finite() {
            return Err(Error::NonFinite(format!("regressor loss in epoch {epoch}")));
        }
        history.push(total / n);
    }
    Ok((model, history))
}

pub const TASK_MAGIC: &[u8; 6] = b"MDRREG";
pub const TASK_VERSION: u32 = 1;

/// Everything needed to turn a frame into predictions: which DR levels to
/// stack, their standardization, and the trained head.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskCheckpoint {
    pub levels: Vec<usize>,
    pub stats: BTreeMap<usize, ChannelStats>,
    pub label_names: Vec<String>,
    pub config: RegressorConfig,
    pub regressor: Regressor<f32>,
}

#[derive(Serialize, Deserialize)]
struct TaskHeader {
    version: u32,
    levels: Vec<usize>,
    stats: BTreeMap<usize, ChannelStats>,
    label_names: Vec<String>,
    config: RegressorConfig,
    spec: RegressorSpec,
    label_mean: Vec<f32>,
    label_std: Vec<f32>,
}

pub fn save_task_checkpoint(path: &Path, ckpt: &TaskCheckpoint) -> Result<()> {
    let header = serde_json::to_vec(&TaskHeader {
        version: TASK_VERSION,
        levels: ckpt.levels.clone(),
        stats: ckpt.stats.clone(),
        label_names: ckpt.label_names.clone(),
        config: ckpt.config.clone(),
        spec: ckpt.regressor.spec.clone(),
        label_mean: ckpt.regressor.label_mean.clone(),
        label_std: ckpt.regressor.label_std.clone(),
    })?;
    let payload: Vec<f32> = ckpt.regressor.params.iter().flat_map(|p| p.data().iter().copied()).collect();
    write_file(path, &encode_container(TASK_MAGIC, &header, &payload))
}

pub fn load_task_checkpoint(path: &Path) -> Result<TaskCheckpoint> {
    let bytes = read_file(path)?;
    let (body, payload) = decode_container(&bytes, TASK_MAGIC, path)?;
    let h: TaskHeader = serde_json::from_slice(body).map_err(|e| Error::format(path, format!("bad header: {e}")))?;
    if h.version != TASK_VERSION {
        return Err(Error::format(path, format!("unsupported task checkpoint version {}", h.version)));
    }
    h.spec.validate()?;
    let blocks = h.spec.blocks();
    let n: usize = blocks.iter().map(|s| s.iter().product::<usize>()).sum();
    let flat = bytes_to_f32s(payload, n, path)?;
    let mut off = 0;
    let params = blocks
        .into_iter()
        .map(|shape| {
            let len: usize = shape.iter().product();
            off += len;
            Tensor::from_vec(shape, flat[off - len..off].to_vec())
        })
        .collect::<Result<_>>()?;
    Ok(TaskCheckpoint {
        levels: h.levels,
        stats: h.stats,
        label_names: h.label_names,
        config: h.config,
        regressor: Regressor {
            spec: h.spec,
            params,
            label_mean: h.label_mean,
            label_std: h.label_std,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> RegressorSpec {
        RegressorSpec {
            in_channels: 2,
            height: 8,
            width: 8,
            widths: [3, 4],
            targets: 2,
            leaky_slope: 0.1,
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut m = Regressor::<f64>::init(&spec(), 1).unwrap();
        let mut rng = Rng::new(2);
        for p in m.params.iter_mut() {
            *p = rng.normal_tensor(p.shape(), 0.5);
        }
        let x = rng.uniform_tensor::<f64>(&[2, 8, 8], -1.0, 1.0);
        let probe = [0.7, -1.3];
        let f = |m: &Regressor<f64>| {
            let o = m.forward_raw(&x).unwrap();
            o[0] * probe[0] + o[1] * probe[1]
        };
        let (_, cache) = m.forward_cached(&x).unwrap();
        let grads = m.backward(&cache, &probe).unwrap();
        for b in 0..m.params.len() {
            for i in [0, grads[b].len() - 1] {
                let orig = m.params[b].data()[i];
                let h = 1e-6;
                m.params[b].data_mut()[i] = orig + h;
                let up = f(&m);
                m.params[b].data_mut()[i] = orig - h;
                let down = f(&m);
                m.params[b].data_mut()[i] = orig;
                let num = (up - down) / (2.0 * h);
                let ana = grads[b].data()[i];
                assert!((num - ana).abs() <= 1e-6 * num.abs().max(ana.abs()).max(1.0), "block {b}: {num} vs {ana}");
            }
        }
    }

    #[test]
    fn constant_labels_give_constant_predictor() {
        let mut rng = Rng::new(3);
        let xs: Vec<Tensor<f32>> = (0..12).map(|_| rng.uniform_tensor(&[2, 8, 8], 0.0, 1.0)).collect();
        let ys = vec![vec![2.5f32, -1.0]; 12];
        let (m, hist) = train_regressor(&xs, &ys, &RegressorConfig { epochs: 3, ..Default::default() }).unwrap();
        assert!(hist.iter().all(|&l| l == 0.0));
        assert_eq!(m.predict(&xs[0]).unwrap(), vec![2.5, -1.0]);
    }

    #[test]
    fn learns_a_simple_signal() {
        let mut rng = Rng::new(4);
        let xs: Vec<Tensor<f32>> = (0..64).map(|_| rng.uniform_tensor(&[1, 8, 8], 0.0, 1.0)).collect();
        let ys: Vec<Vec<f32>> = xs.iter().map(|x| vec![x.mean() * 10.0]).collect();
        let cfg = RegressorConfig {
            epochs: 40,
            batch_size: 8,
            ..Default::default()
        };
        let (_, hist) = train_regressor(&xs, &ys, &cfg).unwrap();
        assert!(hist[hist.len() - 1] < 0.5 * hist[0], "{hist:?}");
    }

    #[test]
    fn mismatched_channels_are_rejected() {
        let xs = vec![Tensor::zeros(&[2, 8, 8]), Tensor::zeros(&[3, 8, 8])];
        let ys = vec![vec![0.0], vec![1.0]];
        assert!(train_regressor(&xs, &ys, &RegressorConfig::default()).is_err());
    }

    #[test]
    fn task_checkpoint_roundtrip() {
        let mut rng = Rng::new(5);
        let xs: Vec<Tensor<f32>> = (0..8).map(|_| rng.uniform_tensor(&[2, 8, 8], 0.0, 1.0)).collect();
        let ys: Vec<Vec<f32>> = (0..8).map(|i| vec![i as f32]).collect();
        let (regressor, _) = train_regressor(&xs, &ys, &RegressorConfig { epochs: 2, ..Default::default() }).unwrap();
        let ckpt = TaskCheckpoint {
            levels: vec![0],
            stats: BTreeMap::new(),
            label_names: vec!["intensity".into()],
            config: RegressorConfig::default(),
            regressor,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("task.ckpt");
        save_task_checkpoint(&path, &ckpt).unwrap();
        let back = load_task_checkpoint(&path).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.regressor.predict(&xs[3]).unwrap(), ckpt.regressor.predict(&xs[3]).unwrap());
    }
}
