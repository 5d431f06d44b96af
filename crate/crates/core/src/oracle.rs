//! Per-window baselines that see the neighboring frames: a direct solver for
//! the rank loss (the per-window upper bound), approximate rank pooling
//! (forward/backward dynamic images), and target pairs for reconstruction
//! training.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binio::{bytes_to_f32s, f32s_to_bytes, read_file, read_json, write_file, write_json};
use crate::error::{Error, Result};
use crate::numerics::{Real, Tensor};
use crate::rankcore::{rank_loss, DynRep, Origin, RankLossParams};
use crate::seqgen::{sample_window, Sequence, Window};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitPolicy {
    #[default]
    Zero,
    /// Start from the forward rank-pooled kernel of the window.
    RankPool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub max_steps: usize,
    pub step_size: f64,
    pub loss: RankLossParams,
    #[serde(default)]
    pub init: InitPolicy,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            max_steps: 500,
            step_size: 1e-2,
            loss: RankLossParams::default(),
            init: InitPolicy::Zero,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) {
            return Err(Error::invalid(format!("step_size must be > 0, got {}", self.step_size)));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps must be ≥ 1"));
        }
        self.loss.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution<T: Real> {
    pub dynrep: DynRep<T>,
    /// Loss at the start and after every accepted step; never increases.
    pub trace: Vec<f64>,
    /// True when every margin reached `θ` before `max_steps`.
    pub converged: bool,
}

const MAX_HALVINGS: usize = 40;

/// Minimizes the rank loss over `d` for one known window by gradient descent.
/// Each trial step is halved until the loss does not increase; after an
/// accepted step the next trial starts from twice the accepted size.
pub fn solve_window<T: Real>(w: &Window<T>, cfg: &SolveConfig) -> Result<Solution<T>> {
    cfg.validate()?;
    if w.half_width == 0 {
        return Err(Error::invalid("solve_window needs T ≥ 1"));
    }
    let shape = w.frame_shape().to_vec();
    let mut d = match cfg.init {
        InitPolicy::Zero => DynRep::zeros(&shape, Origin::Oracle, w.half_width),
        InitPolicy::RankPool => {
            let mut r = rank_pool(&w.frames, Direction::Forward)?;
            r.origin = Origin::Oracle;
            r
        }
    };
    let mut report = rank_loss(&d, w, &cfg.loss)?;
    let mut trace = vec![report.loss];
    let mut converged = report.all_satisfied();
    let mut step = 0;
    let mut trial = cfg.step_size;
    while !converged && step < cfg.max_steps {
        step += 1;
        let mut eta = trial;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut cand = d.clone();
            cand.d.axpy(T::of(-eta), &report.grad_d)?;
            let r = rank_loss(&cand, w, &cfg.loss).map_err(|e| match e {
                Error::NonFinite(msg) => Error::NonFinite(format!("{msg} at solver step {step}")),
                other => other,
            })?;
            if r.loss <= report.loss {
                accepted = Some((cand, r));
                break;
            }
            eta *= 0.5;
        }
        match accepted {
            Some((cand, r)) => {
                trial = 2.0 * eta;
                d = cand;
                report = r;
                trace.push(report.loss);
                converged = report.all_satisfied();
            }
            // No descent along the negative subgradient: a kink minimum.
            None => break,
        }
    }
    Ok(Solution {
        dynrep: d,
        trace,
        converged,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Forward,
    Backward,
}

/// Approximate rank pooling: `d = Σ_{r=1..N} (2r − N − 1)·V_(r)`, with the
/// frame order reversed for the backward direction.
pub fn rank_pool<T: Real>(frames: &[Tensor<T>], direction: Direction) -> Result<DynRep<T>> {
    let n = frames.len();
    if n < 2 {
        return Err(Error::invalid(format!("rank pooling needs ≥ 2 frames, got {n}")));
    }
    let mut d = Tensor::zeros(frames[0].shape());
    for (i, f) in frames.iter().enumerate() {
        let r = match direction {
            Direction::Forward => i + 1,
            Direction::Backward => n - i,
        };
        let coef = (2 * r) as f64 - n as f64 - 1.0;
        if coef != 0.0 {
            d.axpy(T::of(coef), f)?;
        }
    }
    Ok(DynRep::new(d, Origin::RankPooling, (n - 1) / 2))
}

/// What a reconstruction-trained network is asked to reproduce.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    /// Kernel from [`solve_window`] on the true window.
    #[default]
    Oracle,
    /// Forward dynamic image of the window.
    ForwardDi,
    /// Backward dynamic image of the window.
    BackwardDi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetConfig {
    pub half_width: usize,
    pub stride: usize,
    pub kind: TargetKind,
    pub solve: SolveConfig,
    /// Use every `center_step`-th valid center.
    #[serde(default = "one")]
    pub center_step: usize,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq)]
pub struct TargetPair {
    pub seq_id: String,
    pub center: usize,
    pub frame: Tensor<f32>,
    pub target: DynRep<f32>,
}

fn target_for(w: &Window<f32>, cfg: &TargetConfig) -> Result<DynRep<f32>> {
    match cfg.kind {
        TargetKind::Oracle => Ok(solve_window(&w.cast::<f64>(), &cfg.solve)?.dynrep.cast()),
        TargetKind::ForwardDi => rank_pool(&w.frames, Direction::Forward),
        TargetKind::BackwardDi => rank_pool(&w.frames, Direction::Backward),
    }
}

/// Pairs each usable center frame of `split` with its target kernel.
/// Windows are solved in parallel; output order is (sequence, center).
pub fn make_target_pairs(split: &[Sequence], cfg: &TargetConfig) -> Result<Vec<TargetPair>> {
    if split.is_empty() {
        return Err(Error::invalid("make_target_pairs needs a non-empty split"));
    }
    if cfg.center_step == 0 {
        return Err(Error::invalid("center_step must be ≥ 1"));
    }
    let jobs: Vec<(&Sequence, usize)> = split
        .iter()
        .flat_map(|s| {
            s.valid_centers(cfg.half_width, cfg.stride)
                .step_by(cfg.center_step)
                .map(move |t| (s, t))
        })
        .collect();
    jobs.par_iter()
        .map(|&(s, t)| {
            let w = sample_window(s, t, cfg.half_width, cfg.stride)?;
            Ok(TargetPair {
                seq_id: s.id.clone(),
                center: t,
                frame: w.center_frame().clone(),
                target: target_for(&w, cfg)?,
            })
        })
        .collect()
}

pub const TARGET_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetIndexEntry {
    pub seq_id: String,
    pub t: usize,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetIndex {
    pub format_version: u32,
    pub config: TargetConfig,
    pub shape: Vec<usize>,
    pub entries: Vec<TargetIndexEntry>,
}

/// Writes `dr_<seqid>_<t>.f32` per pair plus `index.json`.
pub fn save_targets(dir: &Path, pairs: &[TargetPair], cfg: &TargetConfig) -> Result<()> {
    let shape = pairs
        .first()
        .map(|p| p.target.d.shape().to_vec())
        .ok_or_else(|| Error::invalid("no target pairs to save"))?;
    let mut entries = Vec::with_capacity(pairs.len());
    for p in pairs {
        let file = format!("dr_{}_{}.f32", p.seq_id, p.center);
        write_file(&dir.join(&file), &f32s_to_bytes(p.target.d.data()))?;
        entries.push(TargetIndexEntry {
            seq_id: p.seq_id.clone(),
            t: p.center,
            file,
        });
    }
    write_json(
        &dir.join("index.json"),
        &TargetIndex {
            format_version: TARGET_FORMAT_VERSION,
            config: cfg.clone(),
            shape,
            entries,
        },
    )
}

/// Reloads a target store; center frames come from `sequences`.
pub fn load_targets(dir: &Path, sequences: &[Sequence]) -> Result<(TargetIndex, Vec<TargetPair>)> {
    let index_path = dir.join("index.json");
    let index: TargetIndex = read_json(&index_path)?;
    if index.format_version != TARGET_FORMAT_VERSION {
        return Err(Error::format(
            &index_path,
            format!("unsupported target format_version {}", index.format_version),
        ));
    }
    let by_id: BTreeMap<&str, &Sequence> = sequences.iter().map(|s| (s.id.as_str(), s)).collect();
    let n: usize = index.shape.iter().product();
    let mut pairs = Vec::with_capacity(index.entries.len());
    for e in &index.entries {
        let seq = by_id.get(e.seq_id.as_str()).ok_or_else(|| {
            Error::format(&index_path, format!("target references unknown sequence `{}`", e.seq_id))
        })?;
        let frame = seq.frames.get(e.t).ok_or_else(|| {
            Error::OutOfRange(format!("center {} of sequence `{}` ({} frames)", e.t, e.seq_id, seq.len()))
        })?;
        let path = dir.join(&e.file);
        let d = Tensor::from_vec(index.shape.clone(), bytes_to_f32s(&read_file(&path)?, n, &path)?)?;
        pairs.push(TargetPair {
            seq_id: e.seq_id.clone(),
            center: e.t,
            frame: frame.clone(),
            target: DynRep::new(d, Origin::Oracle, index.config.half_width),
        });
    }
    Ok((index, pairs))
}
