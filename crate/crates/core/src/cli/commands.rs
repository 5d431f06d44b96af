use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::ExperimentConfig;
use crate::binio::{read_json, write_file, write_json};
use crate::drnet::{
    load_checkpoint_for, sample_centers, save_checkpoint, train, AccuracySummary, Model, TrainConfig, TrainData,
    TrainMode,
};
use crate::error::{Error, Result};
use crate::mdr::{
    build_stack, check_levels, load_task_checkpoint, save_task_checkpoint, train_regressor, write_metrics, ChannelStats,
    DrBank, MetricsReport, TaskCheckpoint,
};
use crate::numerics::{Rng, Tensor};
use crate::oracle::{
    load_targets, make_target_pairs, rank_pool, save_targets, solve_window, Direction, SolveConfig, TargetConfig,
};
use crate::rankcore::{data_scaled_theta, ranking_accuracy, DynRep, Origin, RankLossParams};
use crate::seqgen::{check_disjoint, load_sequence, sample_window, save_sequence, Sequence, Split, Window};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DrMode {
    Rank,
    Mse,
}

impl DrMode {
    pub fn name(self) -> &'static str {
        match self {
            DrMode::Rank => "rank",
            DrMode::Mse => "mse",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankMethod {
    Network,
    NetworkMse,
    Oracle,
    RankpoolForward,
    RankpoolBackward,
    Random,
}

impl RankMethod {
    pub fn name(self) -> &'static str {
        match self {
            RankMethod::Network => "network",
            RankMethod::NetworkMse => "network-mse",
            RankMethod::Oracle => "oracle",
            RankMethod::RankpoolForward => "rankpool-forward",
            RankMethod::RankpoolBackward => "rankpool-backward",
            RankMethod::Random => "random",
        }
    }
}

/// Shared state of one CLI invocation.
pub struct Ctx {
    pub config: ExperimentConfig,
    pub force: bool,
}

#[derive(Serialize, Deserialize)]
struct DataManifest {
    dataset: crate::seqgen::DatasetSpec,
    splits: BTreeMap<Split, Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct RunManifest {
    command: String,
    version: String,
    config_hash: String,
    seed: u64,
    created_unix: u64,
    args: Value,
    /// Sequence ids whose frames shaped the artifact's parameters.
    train_ids: Vec<String>,
    config: ExperimentConfig,
}

impl Ctx {
    fn out(&self) -> &Path {
        &self.config.output_dir
    }

    fn data_dir(&self) -> PathBuf {
        self.out().join("data")
    }

    fn dr_dir(&self, t: usize, s: usize, mode: DrMode) -> PathBuf {
        self.out().join("dr").join(format!("T{t}_S{s}_{}", mode.name()))
    }

    fn targets_dir(&self, t: usize, s: usize) -> PathBuf {
        self.out().join("targets").join(format!("T{t}_S{s}"))
    }

    fn task_dir(&self, levels: &[usize]) -> PathBuf {
        let tag: Vec<String> = levels.iter().map(|l| l.to_string()).collect();
        self.out().join("task").join(format!("L{}", tag.join("_")))
    }

    /// Creates `dir`, refusing to touch a non-empty one unless forced.
    fn fresh_dir(&self, dir: &Path) -> Result<()> {
        let non_empty = std::fs::read_dir(dir).map(|mut d| d.next().is_some()).unwrap_or(false);
        if non_empty {
            if !self.force {
                return Err(Error::Config {
                    field: "--force".into(),
                    reason: format!("output directory {} is not empty; pass --force to overwrite", dir.display()),
                });
            }
            std::fs::remove_dir_all(dir).map_err(|e| Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })?;
        }
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })
    }

    /// Refuses to overwrite an existing file unless forced.
    fn fresh_file(&self, path: &Path) -> Result<()> {
        if path.exists() && !self.force {
            return Err(Error::Config {
                field: "--force".into(),
                reason: format!("{} already exists; pass --force to overwrite", path.display()),
            });
        }
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::Io {
                path: parent.to_path_buf(),
                source: e,
            })?;
        }
        Ok(())
    }

    fn write_run_manifest(&self, path: &Path, command: &str, args: Value, train_ids: Vec<String>) -> Result<()> {
        let created_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        write_json(
            path,
            &RunManifest {
                command: command.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                config_hash: self.config.hash()?,
                seed: self.config.seed,
                created_unix,
                args,
                train_ids,
                config: self.config.clone(),
            },
        )
    }

    fn data_manifest(&self) -> Result<DataManifest> {
        let path = self.data_dir().join("manifest.json");
        if !path.exists() {
            return Err(Error::Config {
                field: "output_dir".into(),
                reason: format!("no dataset at {}; run gen-data first", self.data_dir().display()),
            });
        }
        let m: DataManifest = read_json(&path)?;
        if m.dataset != self.config.dataset {
            return Err(Error::Config {
                field: "dataset".into(),
                reason: format!("config differs from the dataset recorded in {}; rerun gen-data", path.display()),
            });
        }
        Ok(m)
    }

    fn split_ids(&self, split: Split) -> Result<Vec<String>> {
        Ok(self.data_manifest()?.splits.remove(&split).unwrap_or_default())
    }

    fn load_split(&self, split: Split) -> Result<Vec<Sequence>> {
        let ids = self.split_ids(split)?;
        let base = self.data_dir().join(split.name());
        ids.par_iter().map(|id| load_sequence(&base.join(id))).collect()
    }

    fn loss_params(&self, pretrain: &[Sequence]) -> RankLossParams {
        let tr = &self.config.train;
        let total: usize = pretrain.iter().map(|s| s.len()).sum();
        let step = (total / tr.theta_frames.max(1)).max(1);
        let theta = data_scaled_theta(pretrain.iter().flat_map(|s| s.frames.iter()).step_by(step), tr.theta_fraction);
        RankLossParams {
            gamma: tr.gamma,
            epsilon: tr.epsilon,
            theta,
            max_loss: tr.max_loss,
            mean_center: false,
            center_pairs: tr.center_pairs,
        }
    }

    /// Training ids recorded next to a checkpoint; the pretrain split if absent.
    fn dr_train_ids(&self, ckpt: &Path) -> Result<Vec<String>> {
        let manifest = ckpt.with_file_name("run_manifest.json");
        if manifest.exists() {
            let m: RunManifest = read_json(&manifest)?;
            Ok(m.train_ids)
        } else {
            self.split_ids(Split::Pretrain)
        }
    }
}

fn ids(seqs: &[Sequence]) -> Vec<String> {
    seqs.iter().map(|s| s.id.clone()).collect()
}

fn check_leakage(train_ids: &[String], eval_ids: &[String]) -> Result<()> {
    check_disjoint(train_ids.iter().map(String::as_str), eval_ids.iter().map(String::as_str))
}

pub fn gen_data(ctx: &Ctx) -> Result<()> {
    let dir = ctx.data_dir();
    ctx.fresh_dir(&dir)?;
    let entries = ctx.config.dataset.entries()?;
    entries.par_iter().try_for_each(|e| {
        let seq = crate::seqgen::generate_sequence(&e.spec)?;
        save_sequence(&seq, &dir.join(e.split.name()).join(&seq.id))
    })?;
    let mut splits: BTreeMap<Split, Vec<String>> = Split::ALL.iter().map(|&s| (s, Vec::new())).collect();
    for e in &entries {
        splits.entry(e.split).or_default().push(e.spec.id.clone());
    }
    write_json(
        &dir.join("manifest.json"),
        &DataManifest {
            dataset: ctx.config.dataset.clone(),
            splits,
        },
    )?;
    ctx.write_run_manifest(&dir.join("run_manifest.json"), "gen-data", json!({}), Vec::new())?;
    println!("wrote {} sequences to {}", entries.len(), dir.display());
    Ok(())
}

fn target_config(ctx: &Ctx, t: usize, s: usize, loss: RankLossParams) -> TargetConfig {
    let tc = &ctx.config.targets;
    TargetConfig {
        half_width: t,
        stride: s,
        kind: tc.kind,
        solve: SolveConfig {
            max_steps: tc.max_steps,
            step_size: tc.step_size,
            loss,
            init: tc.init,
        },
        center_step: tc.center_step,
    }
}

pub fn solve_targets(ctx: &Ctx, t: usize, s: usize) -> Result<()> {
    let pretrain = ctx.load_split(Split::Pretrain)?;
    let dir = ctx.targets_dir(t, s);
    ctx.fresh_dir(&dir)?;
    let cfg = target_config(ctx, t, s, ctx.loss_params(&pretrain));
    cfg.solve.validate()?;
    let pairs = make_target_pairs(&pretrain, &cfg)?;
    save_targets(&dir, &pairs, &cfg)?;
    let used: BTreeSet<&str> = pairs.iter().map(|p| p.seq_id.as_str()).collect();
    ctx.write_run_manifest(
        &dir.join("run_manifest.json"),
        "solve-targets",
        json!({"T": t, "S": s}),
        used.into_iter().map(String::from).collect(),
    )?;
    println!("solved {} targets into {}", pairs.len(), dir.display());
    Ok(())
}

pub fn train_dr(ctx: &Ctx, t: usize, s: usize, mode: DrMode) -> Result<()> {
    let pretrain = ctx.load_split(Split::Pretrain)?;
    let heldout = ctx.load_split(Split::DownstreamTrain)?;
    let tr = &ctx.config.train;
    let cfg = TrainConfig {
        mode: match mode {
            DrMode::Rank => TrainMode::Rank,
            DrMode::Mse => TrainMode::MseTarget,
        },
        half_width: t,
        stride: s,
        batch_size: tr.batch_size,
        adam: tr.adam,
        loss: ctx.loss_params(&pretrain),
        epochs: tr.epochs,
        seed: ctx.config.seed,
        windows_per_epoch: (tr.windows_per_epoch > 0).then_some(tr.windows_per_epoch),
        eval_windows: tr.eval_windows,
    };
    cfg.validate()?;
    let targets = match mode {
        DrMode::Rank => None,
        DrMode::Mse => {
            let tdir = ctx.targets_dir(t, s);
            if !tdir.join("index.json").exists() {
                return Err(Error::Config {
                    field: "--mode".into(),
                    reason: format!(
                        "mse mode needs oracle targets at {}; run solve-targets --T {t} --S {s} first",
                        tdir.display()
                    ),
                });
            }
            Some(load_targets(&tdir, &pretrain)?.1)
        }
    };
    let train_ids = match &targets {
        None => ids(&pretrain),
        Some(pairs) => pairs
            .iter()
            .map(|p| p.seq_id.as_str())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(String::from)
            .collect(),
    };
    check_leakage(&train_ids, &ids(&heldout))?;
    let data = match &targets {
        None => TrainData::Windows(&pretrain),
        Some(pairs) => TrainData::Targets(pairs),
    };
    let dir = ctx.dr_dir(t, s, mode);
    ctx.fresh_dir(&dir)?;
    let mut log = String::new();
    let outcome = train(&ctx.config.model, data, Some(&heldout), &cfg, |m| {
        println!(
            "epoch {} loss {:.6} held-out accuracy {}",
            m.epoch,
            m.mean_loss,
            m.heldout_accuracy.map_or("-".into(), |a| format!("{a:.4}"))
        );
        log.push_str(&serde_json::to_string(m)?);
        log.push('\n');
        Ok(())
    })?;
    save_checkpoint(&dir.join("model.ckpt"), &outcome.checkpoint)?;
    write_file(&dir.join("train_log.jsonl"), log.as_bytes())?;
    ctx.write_run_manifest(
        &dir.join("run_manifest.json"),
        "train-dr",
        json!({"T": t, "S": s, "mode": mode.name()}),
        train_ids,
    )?;
    println!("saved {}", dir.join("model.ckpt").display());
    Ok(())
}

/// Per-window accuracies of `score` over `centers`, in parallel.
fn score_windows<F>(seqs: &[Sequence], centers: &[(usize, usize)], t: usize, s: usize, score: F) -> Result<AccuracySummary>
where
    F: Fn(usize, &Window<f32>) -> Result<f64> + Sync,
{
    let values: Vec<f64> = centers
        .par_iter()
        .enumerate()
        .map(|(k, &(i, c))| score(k, &sample_window(&seqs[i], c, t, s)?))
        .collect::<Result<_>>()?;
    AccuracySummary::from_values(&values)
}

pub fn eval_rank(
    ctx: &Ctx,
    method: RankMethod,
    checkpoint: Option<&Path>,
    t_grid: &[usize],
    s_grid: &[usize],
) -> Result<()> {
    let eval_seqs = ctx.load_split(Split::DownstreamTest)?;
    let eval_ids = ids(&eval_seqs);
    let csv_path = ctx.out().join("eval").join(format!("rank_{}.csv", method.name()));
    ctx.fresh_file(&csv_path)?;
    let needs_loss = method == RankMethod::Oracle;
    let loss = if needs_loss {
        Some(ctx.loss_params(&ctx.load_split(Split::Pretrain)?))
    } else {
        None
    };
    let mut csv = String::from("method,T,S,accuracy,windows,ci_half_width\n");
    let mut used_ids = BTreeSet::new();
    for &t in t_grid {
        for &s in s_grid {
            let centers = sample_centers(&eval_seqs, t, s, ctx.config.eval.windows, ctx.config.seed);
            if centers.is_empty() {
                return Err(Error::Config {
                    field: "eval".into(),
                    reason: format!("no evaluation windows fit T = {t}, S = {s}"),
                });
            }
            let summary = match method {
                RankMethod::Network | RankMethod::NetworkMse => {
                    let mode = if method == RankMethod::Network { DrMode::Rank } else { DrMode::Mse };
                    let path = match checkpoint {
                        Some(p) => p.to_path_buf(),
                        None => ctx.dr_dir(t, s, mode).join("model.ckpt"),
                    };
                    if !path.exists() {
                        return Err(Error::Config {
                            field: "--checkpoint".into(),
                            reason: format!(
                                "no checkpoint at {}; run train-dr --T {t} --S {s} --mode {} first",
                                path.display(),
                                mode.name()
                            ),
                        });
                    }
                    let train_ids = ctx.dr_train_ids(&path)?;
                    check_leakage(&train_ids, &eval_ids)?;
                    used_ids.extend(train_ids);
                    let model: Model<f32> = load_checkpoint_for(&path, &ctx.config.model)?.model;
                    score_windows(&eval_seqs, &centers, t, s, |_, w| {
                        ranking_accuracy(&model.forward(w.center_frame())?, w)
                    })?
                }
                RankMethod::Oracle => {
                    let solve = target_config(ctx, t, s, loss.clone().expect("loss computed for oracle")).solve;
                    solve.validate()?;
                    score_windows(&eval_seqs, &centers, t, s, |_, w| {
                        let w64 = w.cast::<f64>();
                        ranking_accuracy(&solve_window(&w64, &solve)?.dynrep, &w64)
                    })?
                }
                RankMethod::RankpoolForward | RankMethod::RankpoolBackward => {
                    let dir = if method == RankMethod::RankpoolForward {
                        Direction::Forward
                    } else {
                        Direction::Backward
                    };
                    score_windows(&eval_seqs, &centers, t, s, |_, w| ranking_accuracy(&rank_pool(&w.frames, dir)?, w))?
                }
                RankMethod::Random => {
                    let trials = ctx.config.eval.random_trials;
                    let cell = ((t as u64) << 32) | s as u64;
                    score_windows(&eval_seqs, &centers, t, s, |k, w| {
                        let mut rng = Rng::substream(ctx.config.seed ^ cell, k as u64);
                        let mut acc = 0.0;
                        for _ in 0..trials {
                            let d = DynRep::new(rng.normal_tensor(w.frame_shape(), 1.0), Origin::Random, t);
                            acc += ranking_accuracy(&d, w)?;
                        }
                        Ok(acc / trials as f64)
                    })?
                }
            };
            println!(
                "{} T={t} S={s}: accuracy {:.4} ± {:.4} over {} windows",
                method.name(),
                summary.mean,
                summary.ci_half_width,
                summary.windows
            );
            writeln!(
                csv,
                "{},{t},{s},{},{},{}",
                method.name(),
                summary.mean,
                summary.windows,
                summary.ci_half_width
            )
            .expect("writing to a String");
        }
    }
    write_file(&csv_path, csv.as_bytes())?;
    ctx.write_run_manifest(
        &ctx.out().join("eval").join(format!("run_manifest_{}.json", method.name())),
        "eval-rank",
        json!({
            "method": method.name(),
            "checkpoint": checkpoint.map(|p| p.display().to_string()),
            "t_grid": t_grid,
            "s_grid": s_grid,
        }),
        used_ids.into_iter().collect(),
    )?;
    println!("wrote {}", csv_path.display());
    Ok(())
}

/// `n` (sequence, frame) picks drawn without replacement, in draw order.
fn pick_frames(seqs: &[Sequence], n: usize, seed: u64, stream: u64) -> Vec<(usize, usize)> {
    let mut all: Vec<(usize, usize)> =
        seqs.iter().enumerate().flat_map(|(i, s)| (0..s.len()).map(move |t| (i, t))).collect();
    Rng::substream(seed, stream).shuffle(&mut all);
    all.truncate(n);
    all
}

type LevelModels = Vec<(usize, Model<f32>)>;

/// Loads the stride-`dr_stride` rank DR network of every level above 0.
fn load_dr_models(ctx: &Ctx, levels: &[usize]) -> Result<(LevelModels, Vec<String>)> {
    let s = ctx.config.task.dr_stride;
    let mut models = Vec::new();
    let mut train_ids = BTreeSet::new();
    for &l in levels.iter().filter(|&&l| l > 0) {
        let path = ctx.dr_dir(l, s, DrMode::Rank).join("model.ckpt");
        if !path.exists() {
            return Err(Error::Config {
                field: "task.levels".into(),
                reason: format!(
                    "no DR checkpoint for level T = {l} at {}; run train-dr --T {l} --S {s} --mode rank first",
                    path.display()
                ),
            });
        }
        train_ids.extend(ctx.dr_train_ids(&path)?);
        models.push((l, load_checkpoint_for(&path, &ctx.config.model)?.model));
    }
    Ok((models, train_ids.into_iter().collect()))
}

fn stacks(seqs: &[Sequence], picks: &[(usize, usize)], bank: &DrBank, levels: &[usize]) -> Result<Vec<Tensor<f32>>> {
    picks
        .par_iter()
        .map(|&(i, t)| Ok(build_stack(&seqs[i].frames[t], bank, levels)?.data))
        .collect()
}

pub fn train_task(ctx: &Ctx, levels: &[usize]) -> Result<()> {
    check_levels(levels)?;
    let task = &ctx.config.task;
    let (models, dr_ids) = load_dr_models(ctx, levels)?;
    let train_seqs = ctx.load_split(Split::DownstreamTrain)?;
    let test_ids = ctx.split_ids(Split::DownstreamTest)?;
    check_leakage(&dr_ids, &test_ids)?;
    check_leakage(&ids(&train_seqs), &test_ids)?;

    let mut bank = DrBank::new();
    if !models.is_empty() {
        let pretrain = ctx.load_split(Split::Pretrain)?;
        let stat_frames: Vec<&Tensor<f32>> = pick_frames(&pretrain, task.stats_frames, ctx.config.seed, 0x57a7)
            .into_iter()
            .map(|(i, t)| &pretrain[i].frames[t])
            .collect();
        for (l, model) in models {
            let outputs: Vec<Tensor<f32>> = stat_frames
                .par_iter()
                .map(|f| Ok(model.forward(f)?.d))
                .collect::<Result<_>>()?;
            bank.insert(l, model, ChannelStats::fit(&outputs)?)?;
        }
    }
    let picks = pick_frames(&train_seqs, task.train_frames, ctx.config.seed, 0x7a5c);
    let inputs = stacks(&train_seqs, &picks, &bank, levels)?;
    let labels: Vec<Vec<f32>> = picks.iter().map(|&(i, t)| train_seqs[i].labels[t].clone()).collect();
    let label_names = train_seqs
        .first()
        .map(|s| s.label_names.clone())
        .ok_or_else(|| Error::invalid("downstream-train split is empty"))?;
    if label_names.is_empty() {
        return Err(Error::Config {
            field: "dataset.labels".into(),
            reason: "the downstream task needs at least one label".into(),
        });
    }

    let dir = ctx.task_dir(levels);
    ctx.fresh_dir(&dir)?;
    let (regressor, history) = train_regressor(&inputs, &labels, &task.regressor)?;
    let mut log = String::new();
    for (epoch, loss) in history.iter().enumerate() {
        println!("epoch {epoch} loss {loss:.6}");
        log.push_str(&serde_json::to_string(&json!({"epoch": epoch, "mean_loss": loss}))?);
        log.push('\n');
    }
    save_task_checkpoint(
        &dir.join("model.ckpt"),
        &TaskCheckpoint {
            levels: levels.to_vec(),
            stats: bank.stats(),
            label_names,
            config: task.regressor.clone(),
            regressor,
        },
    )?;
    write_file(&dir.join("train_log.jsonl"), log.as_bytes())?;
    let mut used: BTreeSet<String> = dr_ids.into_iter().collect();
    used.extend(picks.iter().map(|&(i, _)| train_seqs[i].id.clone()));
    ctx.write_run_manifest(
        &dir.join("run_manifest.json"),
        "train-task",
        json!({"levels": levels}),
        used.into_iter().collect(),
    )?;
    println!("saved {} ({} input channels)", dir.join("model.ckpt").display(), inputs[0].shape()[0]);
    Ok(())
}

pub fn eval_task(ctx: &Ctx, levels: &[usize]) -> Result<()> {
    check_levels(levels)?;
    let dir = ctx.task_dir(levels);
    let ckpt_path = dir.join("model.ckpt");
    if !ckpt_path.exists() {
        return Err(Error::Config {
            field: "task.levels".into(),
            reason: format!("no task model at {}; run train-task first", ckpt_path.display()),
        });
    }
    let ckpt = load_task_checkpoint(&ckpt_path)?;
    if ckpt.levels != levels {
        return Err(Error::Config {
            field: "task.levels".into(),
            reason: format!("checkpoint was trained on levels {:?}, not {levels:?}", ckpt.levels),
        });
    }
    let test_seqs = ctx.load_split(Split::DownstreamTest)?;
    let test_ids = ids(&test_seqs);
    let trained: RunManifest = read_json(&dir.join("run_manifest.json"))?;
    check_leakage(&trained.train_ids, &test_ids)?;
    let (models, dr_ids) = load_dr_models(ctx, levels)?;
    check_leakage(&dr_ids, &test_ids)?;

    let mut bank = DrBank::new();
    for (l, model) in models {
        let stats = ckpt.stats.get(&l).cloned().ok_or_else(|| Error::Config {
            field: "task.levels".into(),
            reason: format!("task checkpoint has no standardization for level {l}"),
        })?;
        bank.insert(l, model, stats)?;
    }
    let metrics_path = dir.join("metrics.json");
    ctx.fresh_file(&metrics_path)?;
    let picks = pick_frames(&test_seqs, ctx.config.task.test_frames, ctx.config.seed, 0x7e57);
    let inputs = stacks(&test_seqs, &picks, &bank, levels)?;
    let preds: Vec<Vec<f32>> = inputs.par_iter().map(|x| ckpt.regressor.predict(x)).collect::<Result<_>>()?;
    let truth: Vec<Vec<f32>> = picks.iter().map(|&(i, t)| test_seqs[i].labels[t].clone()).collect();
    let report = MetricsReport::compute(&ckpt.label_names, &preds, &truth)?;
    write_metrics(&dir, &json!({"levels": levels, "task": ctx.config.task}), &report)?;
    ctx.write_run_manifest(
        &dir.join("eval_manifest.json"),
        "eval-task",
        json!({"levels": levels}),
        trained.train_ids,
    )?;
    let a = report.aggregates;
    println!("levels {levels:?}: ICC {:.4} PCC {:.4} MSE {:.4}", a.icc, a.pcc, a.mse);
    Ok(())
}

pub fn plot_data(ctx: &Ctx) -> Result<()> {
    let dir = ctx.out().join("plots");
    ctx.fresh_dir(&dir)?;
    let mut rows: Vec<(String, usize, usize, String, String)> = Vec::new();
    let eval_dir = ctx.out().join("eval");
    for path in sorted_entries(&eval_dir)? {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if !(name.starts_with("rank_") && name.ends_with(".csv")) {
            continue;
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::format(&path, format!("malformed row `{line}`"));
            if f.len() != 6 {
                return Err(bad());
            }
            let t = f[1].parse().map_err(|_| bad())?;
            let s = f[2].parse().map_err(|_| bad())?;
            rows.push((f[0].to_string(), s, t, f[3].to_string(), f[5].to_string()));
        }
    }
    rows.sort_by(|a, b| (&a.0, a.1, a.2).cmp(&(&b.0, b.1, b.2)));
    let mut csv = String::from("method,S,T,accuracy,ci_half_width\n");
    for (m, s, t, acc, ci) in &rows {
        writeln!(csv, "{m},{s},{t},{acc},{ci}").expect("writing to a String");
    }
    write_file(&dir.join("accuracy_vs_T.csv"), csv.as_bytes())?;

    let mut task_csv = String::from("levels,icc,pcc,mse\n");
    for path in sorted_entries(&ctx.out().join("task"))? {
        let metrics = path.join("metrics.json");
        if !metrics.exists() {
            continue;
        }
        let v: Value = read_json(&metrics)?;
        let levels = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let agg = &v["aggregates"];
        writeln!(task_csv, "{levels},{},{},{}", agg["icc"], agg["pcc"], agg["mse"]).expect("writing to a String");
    }
    write_file(&dir.join("task_metrics.csv"), task_csv.as_bytes())?;
    ctx.write_run_manifest(&dir.join("run_manifest.json"), "plot-data", json!({}), Vec::new())?;
    println!("wrote {} accuracy rows to {}", rows.len(), dir.display());
    Ok(())
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    out.sort();
    Ok(out)
}
