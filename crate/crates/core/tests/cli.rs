use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use dynrep::mdr::load_task_checkpoint;
use dynrep::seqgen::DatasetSpec;
use serde_json::Value;

const CONFIG: &str = r#"
seed = 11
[dataset]
n_pretrain = 5
n_downstream_train = 3
n_downstream_test = 3
[dataset.shape]
length = 32
height = 16
width = 16
[model]
height = 16
width = 16
widths = [4, 8]
[train]
epochs = 4
windows_per_epoch = 60
eval_windows = 0
[targets]
center_step = 6
max_steps = 60
[eval]
t_grid = [2, 3]
s_grid = [1, 2]
windows = 20
[task]
levels = [0, 2, 3]
dr_stride = 1
train_frames = 60
test_frames = 40
stats_frames = 30
[task.regressor]
epochs = 2
"#;

struct Run {
    _tmp: tempfile::TempDir,
    config: PathBuf,
    out: PathBuf,
}

fn write_config(dir: &Path, extra: &str) -> (PathBuf, PathBuf) {
    let out = dir.join("out");
    let config = dir.join("config.toml");
    std::fs::write(&config, format!("output_dir = {:?}\n{CONFIG}{extra}", out.display().to_string())).unwrap();
    (config, out)
}

fn dynrep(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynrep"))
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .unwrap()
}

fn ok(config: &Path, args: &[&str]) -> String {
    let o = dynrep(config, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn error_of(o: &Output) -> Value {
    assert!(!o.status.success());
    serde_json::from_slice(o.stderr.trim_ascii()).expect("stderr is one JSON object")
}

/// Dataset plus rank models for T = 2 and 3 at stride 1, shared by tests.
fn shared() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| {
        let tmp = tempfile::tempdir().unwrap();
        let (config, out) = write_config(tmp.path(), "");
        ok(&config, &["gen-data"]);
        for t in ["2", "3"] {
            ok(&config, &["train-dr", "--T", t, "--S", "1"]);
        }
        Run { _tmp: tmp, config, out }
    })
}

#[test]
fn default_dataset_has_three_hundred_sequences() {
    assert_eq!(DatasetSpec::default().entries().unwrap().len(), 300);
}

#[test]
fn gen_data_writes_every_sequence_and_a_manifest() {
    let run = shared();
    let manifest: Value = serde_json::from_slice(&std::fs::read(run.out.join("data/manifest.json")).unwrap()).unwrap();
    let splits = manifest["splits"].as_object().unwrap();
    let mut total = 0;
    for (name, ids) in splits {
        for id in ids.as_array().unwrap() {
            let dir = run.out.join("data").join(name).join(id.as_str().unwrap());
            assert!(dir.join("frames.f32").exists() && dir.join("manifest.json").exists());
            total += 1;
        }
    }
    assert_eq!(total, 11);
    let m: Value = serde_json::from_slice(&std::fs::read(run.out.join("data/run_manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 11);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(m["config"]["train"]["theta_fraction"], 0.01);
}

#[test]
fn gen_data_refuses_non_empty_output_without_force_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (config, out) = write_config(tmp.path(), "");
    ok(&config, &["gen-data"]);
    let frames = out.join("data/pretrain/pretrain-0002/frames.f32");
    let before = std::fs::read(&frames).unwrap();
    let err = error_of(&dynrep(&config, &["gen-data"]));
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("--force"));
    ok(&config, &["--force", "gen-data"]);
    assert_eq!(std::fs::read(&frames).unwrap(), before);
}

#[test]
fn invalid_envelope_kind_is_a_config_error_naming_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let (config, _) = write_config(tmp.path(), "");
    let text = std::fs::read_to_string(&config).unwrap().replace(
        "n_pretrain = 5",
        "n_pretrain = 5\nkinds = [\"linear-ramp\", \"zigzag\"]",
    );
    std::fs::write(&config, text).unwrap();
    let err = error_of(&dynrep(&config, &["gen-data"]));
    assert_eq!(err["error"], "config");
    let msg = err["message"].as_str().unwrap();
    assert!(msg.contains("dataset.kinds") && msg.contains("zigzag"), "{msg}");
}

#[test]
fn rank_training_lowers_the_loss() {
    let run = shared();
    let log = std::fs::read_to_string(run.out.join("dr/T3_S1_rank/train_log.jsonl")).unwrap();
    let losses: Vec<f64> = log
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["mean_loss"].as_f64().unwrap())
        .collect();
    assert_eq!(losses.len(), 4);
    assert!(losses[3] < losses[0], "{losses:?}");
}

#[test]
fn mse_mode_without_targets_says_to_solve_them() {
    let run = shared();
    let err = error_of(&dynrep(&run.config, &["train-dr", "--T", "5", "--S", "2", "--mode", "mse"]));
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("solve-targets"));
}

#[test]
fn eval_rank_writes_one_row_per_grid_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let (config, out) = write_config(tmp.path(), "");
    ok(&config, &["gen-data"]);
    ok(&config, &["eval-rank", "--method", "rankpool-forward"]);
    let csv = std::fs::read_to_string(out.join("eval/rank_rankpool-forward.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.starts_with("rankpool-forward,")));
}

#[test]
fn missing_checkpoint_names_the_command_to_run() {
    let run = shared();
    let err = error_of(&dynrep(&run.config, &["eval-rank", "--method", "network-mse", "--t-grid", "3", "--s-grid", "1"]));
    assert!(err["message"].as_str().unwrap().contains("train-dr --T 3 --S 1 --mode mse"), "{err}");
}

#[test]
fn shared_sequence_ids_are_rejected_as_leakage() {
    let tmp = tempfile::tempdir().unwrap();
    let (config, out) = write_config(tmp.path(), "");
    ok(&config, &["gen-data"]);
    ok(&config, &["train-dr", "--T", "2", "--S", "1"]);
    let manifest_path = out.join("dr/T2_S1_rank/run_manifest.json");
    let mut m: Value = serde_json::from_slice(&std::fs::read(&manifest_path).unwrap()).unwrap();
    m["train_ids"].as_array_mut().unwrap().push("downstream-test-0001".into());
    std::fs::write(&manifest_path, serde_json::to_vec(&m).unwrap()).unwrap();
    let err = error_of(&dynrep(&config, &["eval-rank", "--t-grid", "2", "--s-grid", "1"]));
    assert_eq!(err["error"], "split_leakage");
    let err = error_of(&dynrep(&config, &["train-task", "--levels", "0,2"]));
    assert_eq!(err["error"], "split_leakage");
}

#[test]
fn task_commands_stack_levels_and_export_plot_data() {
    let run = shared();
    ok(&run.config, &["--force", "train-task"]);
    let ckpt = load_task_checkpoint(&run.out.join("task/L0_2_3/model.ckpt")).unwrap();
    assert_eq!(ckpt.regressor.spec.in_channels, 9);
    assert_eq!(ckpt.levels, vec![0, 2, 3]);
    ok(&run.config, &["--force", "eval-task"]);
    ok(&run.config, &["--force", "train-task", "--levels", "0"]);
    let si = ok(&run.config, &["--force", "eval-task", "--levels", "0"]);
    assert!(si.contains("levels [0]"));
    let csv = std::fs::read_to_string(run.out.join("task/L0/metrics.csv")).unwrap();
    assert!(csv.starts_with("target,icc,pcc,mse\nintensity,"));
    ok(&run.config, &["--force", "plot-data"]);
    let task = std::fs::read_to_string(run.out.join("plots/task_metrics.csv")).unwrap();
    assert!(task.contains("\nL0,") && task.contains("\nL0_2_3,"), "{task}");
    assert!(run.out.join("plots/accuracy_vs_T.csv").exists());
}

#[test]
fn unordered_levels_are_rejected() {
    let run = shared();
    let err = error_of(&dynrep(&run.config, &["train-task", "--levels", "3,0"]));
    assert_eq!(err["error"], "config");
    assert!(err["message"].as_str().unwrap().contains("levels"));
}

#[test]
fn bad_thread_count_is_rejected() {
    let run = shared();
    let o = Command::new(env!("CARGO_BIN_EXE_dynrep"))
        .arg("--config")
        .arg(&run.config)
        .arg("plot-data")
        .env("DYNREP_THREADS", "zero")
        .output()
        .unwrap();
    let err = error_of(&o);
    assert!(err["message"].as_str().unwrap().contains("DYNREP_THREADS"));
}

#[test]
fn usage_errors_are_json_too() {
    let o = Command::new(env!("CARGO_BIN_EXE_dynrep")).args(["train-dr", "--mode", "rank"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_of(&o)["error"], "usage");
}
