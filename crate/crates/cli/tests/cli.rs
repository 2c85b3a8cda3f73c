use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use uwno_core::data::DatasetBundle;
use uwno_core::model::{save_checkpoint, SavedModel};
use uwno_core::tensor::Tensor;

fn uwno(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uwno"))
        .args(args)
        .current_dir(dir)
        .env_remove("UWNO_SEED")
        .output()
        .expect("run uwno")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn gen_poisson(dir: &Path, n: &str, res: &str) -> PathBuf {
    let o = uwno(&["gen-data", "--problem", "poisson", "--n", n, "--resolution", res, "--seed", "3", "--out", "p.uwno"], dir);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    dir.join("p.uwno")
}

const TINY_MODEL: &str =
    r#"{"width":4,"proj_dim":8,"layers":2,"wavelet":"db1","level":2,"unet_channels":[2,4]}"#;

fn write_config(dir: &Path, name: &str, model: &str, train: &str, out: &str) -> String {
    let text = format!(
        r#"{{"problem":"poisson","seed":5,"model":{model},"train":{train},"data":{{"path":"p.uwno"}},"output_dir":"{out}"}}"#
    );
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn summary(dir: &Path, out: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(out).join("summary.json")).unwrap()).unwrap()
}

#[test]
fn gen_data_poisson_roundtrips() {
    let dir = TempDir::new().unwrap();
    let o = uwno(&["gen-data", "--problem", "poisson", "--n", "250", "--resolution", "33", "--seed", "7", "--out", "p.uwno"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("poisson") && stdout(&o).contains("n=250") && stdout(&o).contains("seed=7"));
    let b = DatasetBundle::load(dir.path().join("p.uwno")).unwrap();
    assert_eq!(b.n_samples(), 250);
    assert_eq!(b.resolution(), vec![33, 33]);
}

#[test]
fn advection_default_t_final_is_recorded() {
    let dir = TempDir::new().unwrap();
    let o = uwno(&["gen-data", "--problem", "advection", "--n", "4", "--resolution", "32", "--out", "a.uwno"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let b = DatasetBundle::load(dir.path().join("a.uwno")).unwrap();
    assert_eq!(b.params["t_final"], serde_json::json!(0.5));
}

#[test]
fn burgers_bad_resolution_is_usage_error() {
    let dir = TempDir::new().unwrap();
    let o = uwno(&["gen-data", "--problem", "burgers", "--n", "4", "--resolution", "100", "--out", "b.uwno"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("power of two"), "{}", stderr(&o));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = TempDir::new().unwrap();
    let explicit = uwno(&["gen-data", "--problem", "advection", "--n", "3", "--resolution", "16", "--seed", "11", "--out", "a.uwno"], dir.path());
    assert_eq!(code(&explicit), 0);
    let env = Command::new(env!("CARGO_BIN_EXE_uwno"))
        .args(["gen-data", "--problem", "advection", "--n", "3", "--resolution", "16", "--out", "b.uwno"])
        .current_dir(dir.path())
        .env("UWNO_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(code(&env), 0);
    let a = std::fs::read(dir.path().join("a.uwno")).unwrap();
    let b = std::fs::read(dir.path().join("b.uwno")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn bad_arguments_exit_2() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&uwno(&["gen-data", "--problem", "heat"], dir.path())), 2);
    assert_eq!(code(&uwno(&["frobnicate"], dir.path())), 2);
}

#[test]
fn train_writes_artifacts_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    gen_poisson(dir.path(), "10", "17");
    let train = r#"{"epochs":2,"batch_size":4}"#;
    let c1 = write_config(dir.path(), "a.json", TINY_MODEL, train, "run_a");
    let c2 = write_config(dir.path(), "b.json", TINY_MODEL, train, "run_b");
    for c in [&c1, &c2] {
        let o = uwno(&["train", "--config", c], dir.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let strip = |run: &str| -> Vec<String> {
        std::fs::read_to_string(dir.path().join(run).join("metrics.csv"))
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    assert_eq!(strip("run_a"), strip("run_b"));
    assert_eq!(strip("run_a").len(), 3);
    assert!(dir.path().join("run_a/checkpoint.uwno").exists());
    let s = summary(dir.path(), "run_a");
    assert_eq!(s["epochs"], 2);
    assert_eq!(s["seed"], 5);
    assert!(s["parameters"].as_u64().unwrap() > 0);
}

#[test]
fn zero_epochs_gives_initial_evaluation() {
    let dir = TempDir::new().unwrap();
    gen_poisson(dir.path(), "10", "17");
    let c = write_config(dir.path(), "a.json", TINY_MODEL, "{}", "run");
    let o = uwno(&["train", "--config", &c, "--epochs", "0"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = summary(dir.path(), "run");
    assert_eq!(s["epochs"], 0);
    assert!(s["last_epoch_train_rel_l2"].is_null());
    assert!(s["final_test_rel_l2"].as_f64().unwrap() > 0.0);
    let csv = std::fs::read_to_string(dir.path().join("run/metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = TempDir::new().unwrap();
    gen_poisson(dir.path(), "10", "17");
    let c = write_config(dir.path(), "a.json", TINY_MODEL, r#"{"epochs":0}"#, "run");
    let o = uwno(&["train", "--config", &c, "--seed", "99"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(summary(dir.path(), "run")["seed"], 99);
}

#[test]
fn baseline_flag_trains_plain_operator() {
    let dir = TempDir::new().unwrap();
    gen_poisson(dir.path(), "10", "17");
    let model = r#"{"width":4,"proj_dim":8,"layers":2,"wavelet":"db1","level":2,"baseline_wno":true}"#;
    let c = write_config(dir.path(), "a.json", model, r#"{"epochs":1,"batch_size":4}"#, "run");
    let o = uwno(&["train", "--config", &c], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = summary(dir.path(), "run");
    assert_eq!(s["baseline_wno"], true);
    let full = write_config(dir.path(), "b.json", TINY_MODEL, r#"{"epochs":0}"#, "full");
    assert_eq!(code(&uwno(&["train", "--config", &full], dir.path())), 0);
    assert!(s["parameters"].as_u64() < summary(dir.path(), "full")["parameters"].as_u64());
}

#[test]
fn unknown_config_key_is_named() {
    let dir = TempDir::new().unwrap();
    gen_poisson(dir.path(), "10", "17");
    let c = write_config(dir.path(), "a.json", r#"{"widht":4}"#, "{}", "run");
    let o = uwno(&["train", "--config", &c], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("widht"), "{}", stderr(&o));
    let c = write_config(dir.path(), "b.json", TINY_MODEL, r#"{"epoch":3}"#, "run");
    let o = uwno(&["train", "--config", &c], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("epoch"), "{}", stderr(&o));
}

#[test]
fn missing_config_is_io_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&uwno(&["train", "--config", "nope.json"], dir.path())), 3);
}

#[test]
fn divergence_aborts_with_code_4_and_keeps_metrics() {
    let dir = TempDir::new().unwrap();
    gen_poisson(dir.path(), "10", "17");
    let c = write_config(dir.path(), "a.json", TINY_MODEL, r#"{"epochs":5,"batch_size":4,"lr0":1e300}"#, "run");
    let o = uwno(&["train", "--config", &c], dir.path());
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).contains("non-finite"), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("run/metrics.csv")).unwrap();
    assert!(csv.starts_with("epoch,train_rel_l2"));
}

#[test]
fn eval_reproduces_final_train_error_bit_exactly() {
    let dir = TempDir::new().unwrap();
    gen_poisson(dir.path(), "10", "17");
    let c = write_config(dir.path(), "a.json", TINY_MODEL, r#"{"epochs":2,"batch_size":3}"#, "run");
    assert_eq!(code(&uwno(&["train", "--config", &c], dir.path())), 0);
    let expected = summary(dir.path(), "run")["final_train_rel_l2"].as_f64().unwrap();
    let o = uwno(
        &["eval", "--checkpoint", "run/checkpoint.uwno", "--data", "p.uwno", "--split", "train", "--out", "e.csv"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let printed: f64 = stdout(&o).split_whitespace().nth(2).unwrap().parse().unwrap();
    assert_eq!(printed.to_bits(), expected.to_bits());
    let csv = std::fs::read_to_string(dir.path().join("e.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8);
}

#[test]
fn identity_checkpoint_on_identity_data_gives_zero() {
    let dir = TempDir::new().unwrap();
    let x = Tensor::new((0..5 * 8).map(|i| 1.0 + i as f64).collect(), &[5, 8, 1]).unwrap();
    let grid = Tensor::new((0..8).map(|i| i as f64 / 8.0).collect(), &[8, 1]).unwrap();
    let bundle = DatasetBundle {
        inputs: x.clone(),
        outputs: x,
        grid,
        n_train: 3,
        problem: "identity".into(),
        seed: 0,
        params: serde_json::json!({}),
    };
    bundle.save(dir.path().join("id.uwno")).unwrap();
    save_checkpoint(dir.path().join("id.ckpt"), &SavedModel::Identity, &[]).unwrap();
    let o = uwno(&["eval", "--checkpoint", "id.ckpt", "--data", "id.uwno"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("test mean_rel_l2 0.0 over 2 samples"), "{}", stdout(&o));
    assert!(dir.path().join("id.ckpt.test-errors.csv").exists());
}

#[test]
fn eval_missing_file_is_io_error() {
    let dir = TempDir::new().unwrap();
    gen_poisson(dir.path(), "10", "17");
    let o = uwno(&["eval", "--checkpoint", "missing.ckpt", "--data", "p.uwno"], dir.path());
    assert_eq!(code(&o), 3);
}

#[test]
fn eval_shape_mismatch_names_dimensions() {
    let dir = TempDir::new().unwrap();
    gen_poisson(dir.path(), "10", "17");
    let c = write_config(dir.path(), "a.json", TINY_MODEL, r#"{"epochs":0}"#, "run");
    assert_eq!(code(&uwno(&["train", "--config", &c], dir.path())), 0);
    let o = uwno(&["gen-data", "--problem", "poisson", "--n", "4", "--resolution", "9", "--out", "q.uwno"], dir.path());
    assert_eq!(code(&o), 0);
    let o = uwno(&["eval", "--checkpoint", "run/checkpoint.uwno", "--data", "q.uwno"], dir.path());
    assert_eq!(code(&o), 5);
    let err = stderr(&o);
    assert!(err.contains("[17, 17]") && err.contains("[9, 9]"), "{err}");
}

#[test]
fn dwt_check_passes_and_reports() {
    let dir = TempDir::new().unwrap();
    let o = uwno(&["dwt-check", "--wavelet", "db6", "--length", "1024", "--level", "8", "--trials", "5"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("roundtrip"));
    let o = uwno(&["dwt-check", "--wavelet", "db3", "--length", "32x32", "--level", "2", "--trials", "3"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn dwt_check_preconditions() {
    let dir = TempDir::new().unwrap();
    let o = uwno(&["dwt-check", "--length", "64", "--level", "12", "--trials", "1"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("maximum level"), "{}", stderr(&o));
    assert_eq!(code(&uwno(&["dwt-check", "--trials", "0"], dir.path())), 2);
    assert_eq!(code(&uwno(&["dwt-check", "--wavelet", "sym4", "--trials", "1"], dir.path())), 2);
}

#[test]
fn dwt_check_violation_exits_6_with_seed() {
    let dir = TempDir::new().unwrap();
    let o = uwno(&["dwt-check", "--length", "64", "--level", "3", "--trials", "2", "--tolerance", "0"], dir.path());
    assert_eq!(code(&o), 6);
    assert!(stderr(&o).contains("seed"), "{}", stderr(&o));
}

#[test]
fn bias_demo_writes_csv_and_svg() {
    let dir = TempDir::new().unwrap();
    let o = uwno(&["bias-demo", "--adaptive", "on", "--epochs", "100", "--seed", "0", "--out", "bias"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["bias-on-trajectory.csv", "bias-on-fit.csv", "bias-on-fit.svg", "bias-on-spectrum.svg"] {
        assert!(dir.path().join("bias").join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(dir.path().join("bias/bias-on-trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn plot_line_and_heatmap_are_deterministic() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("l.csv"), "x,y\n0,1\n1,3\n2,2\n").unwrap();
    let mut h = String::from("x,y,value\n");
    for i in 0..5 {
        for j in 0..5 {
            h.push_str(&format!("{i},{j},{}\n", (i * j) as f64 * 0.1));
        }
    }
    std::fs::write(dir.path().join("h.csv"), h).unwrap();
    for (csv, kind) in [("l.csv", "line"), ("h.csv", "heatmap")] {
        for out in ["a.svg", "b.svg"] {
            let o = uwno(&["plot", "--data", csv, "--kind", kind, "--out", out], dir.path());
            assert_eq!(code(&o), 0, "{}", stderr(&o));
        }
        let a = std::fs::read(dir.path().join("a.svg")).unwrap();
        let b = std::fs::read(dir.path().join("b.svg")).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        if kind == "line" {
            assert_eq!(text.matches("<polyline").count(), 1);
        } else {
            assert!(text.matches("<rect").count() >= 25);
        }
    }
}

#[test]
fn plot_errors() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "x,y\n0,1\n1,zz\n").unwrap();
    assert_eq!(code(&uwno(&["plot", "--data", "bad.csv", "--out", "o.svg"], dir.path())), 2);
    assert_eq!(code(&uwno(&["plot", "--data", "none.csv", "--out", "o.svg"], dir.path())), 3);
}
