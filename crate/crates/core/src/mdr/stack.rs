use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::drnet::Model;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Per-channel standardization applied to one level's DR output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl ChannelStats {
    pub fn identity(channels: usize) -> Self {
        ChannelStats {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }

    /// Mean and standard deviation of every channel over `maps`.
    pub fn fit<'a>(maps: impl IntoIterator<Item = &'a Tensor<f32>>) -> Result<Self> {
        let mut sums: Vec<(f64, f64, f64)> = Vec::new();
        for m in maps {
            let (c, h, w) = m.dims3()?;
            if sums.is_empty() {
                sums = vec![(0.0, 0.0, 0.0); c];
            } else if sums.len() != c {
                return Err(Error::invalid("channel count changes between maps"));
            }
            for (plane, s) in m.data().chunks(h * w).zip(sums.iter_mut()) {
                for &v in plane {
                    s.0 += 1.0;
                    s.1 += v as f64;
                    s.2 += (v as f64) * (v as f64);
                }
            }
        }
        if sums.is_empty() {
            return Err(Error::invalid("cannot fit channel statistics on zero maps"));
        }
        let (mean, std) = sums
            .iter()
            .map(|&(n, s, ss)| {
                let m = s / n;
                let var = (ss / n - m * m).max(0.0);
                let sd = if var.sqrt() > 1e-8 { var.sqrt() } else { 1.0 };
                (m as f32, sd as f32)
            })
            .unzip();
        Ok(ChannelStats { mean, std })
    }

    pub fn apply(&self, x: &mut Tensor<f32>) -> Result<()> {
        let (c, h, w) = x.dims3()?;
        if c != self.mean.len() {
            return Err(Error::ShapeMismatch {
                op: "channel standardization",
                left: vec![self.mean.len()],
                right: x.shape().to_vec(),
            });
        }
        for (ch, plane) in x.data_mut().chunks_mut(h * w).enumerate() {
            let (m, s) = (self.mean[ch], self.std[ch]);
            plane.iter_mut().for_each(|v| *v = (*v - m) / s);
        }
        Ok(())
    }
}

/// Trained DR networks keyed by their half-width `T`, each with the
/// standardization fitted on the pretrain split.
#[derive(Clone, Debug, Default)]
pub struct DrBank {
    levels: BTreeMap<usize, (Model<f32>, ChannelStats)>,
}

impl DrBank {
    pub fn new() -> Self {
        DrBank::default()
    }

    pub fn insert(&mut self, level: usize, model: Model<f32>, stats: ChannelStats) -> Result<()> {
        if level == 0 {
            return Err(Error::invalid("level 0 is the input frame and takes no network"));
        }
        self.levels.insert(level, (model, stats));
        Ok(())
    }

    /// Inserts `model` with statistics fitted on its outputs for `frames`.
    pub fn insert_fitted<'a>(
        &mut self,
        level: usize,
        model: Model<f32>,
        frames: impl IntoIterator<Item = &'a Tensor<f32>>,
    ) -> Result<()> {
        let outputs: Vec<Tensor<f32>> = frames
            .into_iter()
            .map(|f| Ok(model.forward(f)?.d))
            .collect::<Result<_>>()?;
        let stats = ChannelStats::fit(&outputs)?;
        self.insert(level, model, stats)
    }

    pub fn stats(&self) -> BTreeMap<usize, ChannelStats> {
        self.levels.iter().map(|(&l, (_, s))| (l, s.clone())).collect()
    }

    pub fn get(&self, level: usize) -> Option<&(Model<f32>, ChannelStats)> {
        self.levels.get(&level)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MdrStack {
    pub levels: Vec<usize>,
    pub data: Tensor<f32>,
}

/// Levels must be non-empty and strictly ascending.
pub fn check_levels(levels: &[usize]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::Config {
            field: "levels".into(),
            reason: "at least one level is required".into(),
        });
    }
    if levels.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::Config {
            field: "levels".into(),
            reason: format!("levels must be strictly ascending, got {levels:?}"),
        });
    }
    Ok(())
}

/// Concatenates, in ascending level order, the frame itself (level 0) and
/// the standardized DR of each requested level.
pub fn build_stack(frame: &Tensor<f32>, bank: &DrBank, levels: &[usize]) -> Result<MdrStack> {
    check_levels(levels)?;
    let parts: Vec<Tensor<f32>> = levels
        .iter()
        .map(|&l| {
            if l == 0 {
                return Ok(frame.clone());
            }
            let (model, stats) = bank.get(l).ok_or_else(|| Error::Config {
                field: "levels".into(),
                reason: format!("no DR checkpoint for level T = {l}"),
            })?;
            let mut d = model.forward(frame)?.d;
            stats.apply(&mut d)?;
            Ok(d)
        })
        .collect::<Result<_>>()?;
    let refs: Vec<&Tensor<f32>> = parts.iter().collect();
    Ok(MdrStack {
        levels: levels.to_vec(),
        data: Tensor::concat_channels(&refs)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drnet::ModelSpec;
    use crate::numerics::Rng;

    fn bank() -> DrBank {
        let spec = ModelSpec {
            height: 16,
            width: 16,
            widths: vec![4, 8],
            ..ModelSpec::default()
        };
        let mut bank = DrBank::new();
        let frames: Vec<Tensor<f32>> = (0..4).map(|i| Rng::new(i).uniform_tensor(&[3, 16, 16], 0.0, 1.0)).collect();
        for (level, seed) in [(3, 1), (5, 2)] {
            let mut m = Model::<f32>::init(&spec, seed).unwrap();
            let last = m.params.len() - 2;
            m.params[last] = Rng::new(seed).normal_tensor(m.params[last].shape(), 0.5);
            bank.insert_fitted(level, m, &frames).unwrap();
        }
        bank
    }

    #[test]
    fn channel_counts_follow_levels() {
        let b = bank();
        let f = Rng::new(9).uniform_tensor(&[3, 16, 16], 0.0, 1.0);
        let sdr = build_stack(&f, &b, &[0]).unwrap();
        assert_eq!(sdr.data, f);
        assert_eq!(build_stack(&f, &b, &[0, 5]).unwrap().data.shape()[0], 6);
        let nine = build_stack(&f, &b, &[0, 3, 5]).unwrap();
        assert_eq!(nine.data.shape()[0], 9);
        assert_eq!(nine.data.channel_slice(0, 3).unwrap(), f);
    }

    #[test]
    fn bad_level_lists_are_rejected() {
        let b = bank();
        let f = Tensor::zeros(&[3, 16, 16]);
        assert!(build_stack(&f, &b, &[0, 5, 3]).is_err());
        assert!(build_stack(&f, &b, &[0, 0]).is_err());
        assert!(build_stack(&f, &b, &[]).is_err());
        let err = build_stack(&f, &b, &[0, 7]).unwrap_err().to_string();
        assert!(err.contains("T = 7"), "{err}");
    }

    #[test]
    fn fitted_stats_standardize_outputs() {
        let maps: Vec<Tensor<f32>> = (0..3).map(|i| Rng::new(i).normal_tensor(&[2, 4, 4], 3.0)).collect();
        let stats = ChannelStats::fit(&maps).unwrap();
        let mut z: Vec<Tensor<f32>> = maps.clone();
        for m in z.iter_mut() {
            stats.apply(m).unwrap();
        }
        let again = ChannelStats::fit(&z).unwrap();
        for c in 0..2 {
            assert!(again.mean[c].abs() < 1e-5);
            assert!((again.std[c] - 1.0).abs() < 1e-4);
        }
        let flat = ChannelStats::fit(&[Tensor::filled(&[1, 2, 2], 4.0)]).unwrap();
        assert_eq!((flat.mean[0], flat.std[0]), (4.0, 1.0));
    }
}
