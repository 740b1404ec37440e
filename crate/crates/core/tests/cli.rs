use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[run]
epochs = 2
eval_images = 1

[dataset]
height = 12
width = 12
n_labeled = 2
n_unlabeled = 3

[optim]
steps_per_epoch = 3
pixels_per_stream = 32

[sampling]
negatives_per_anchor = 32
"#;

fn prcl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prcl")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_data_then_eval_a_trained_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, SMALL).unwrap();

    let data = dir.path().join("data.bin");
    let out = prcl(&["gen-data", s(&cfg), "-o", s(&data), "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(data.exists());

    let run = dir.path().join("run");
    let out = prcl(&["train", "-c", s(&cfg), "-o", s(&run), "--epochs", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(run.join("epochs.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);

    let out = prcl(&["eval", "-m", s(&run.join("model.ckpt")), "-d", s(&data)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let miou: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("miou "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((0.0..=1.0).contains(&miou));
}

#[test]
fn repeated_train_is_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, SMALL).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        assert!(prcl(&["train", "-c", s(&cfg), "-o", s(d), "--seed", "9"]).status.success());
    }
    for f in ["epochs.csv", "model.ckpt", "teacher.ckpt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn sweep_writes_one_summary_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, SMALL).unwrap();
    let out_dir = dir.path().join("sweep");
    let out = prcl(&[
        "sweep",
        "-c",
        s(&cfg),
        "--axis",
        "run.method=prcl,deterministic-baseline",
        "--axis",
        "run.seed=0,1",
        "-o",
        s(&out_dir),
        "--epochs",
        "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let out = prcl(&["train", "-c", s(&missing), "-o", s(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[optim]\nlr_prob_scale = 3.0\n").unwrap();
    let out = prcl(&["train", "-c", s(&bad), "-o", s(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("lr_prob_scale"));

    let out = prcl(&["sweep", "-c", s(&bad), "--axis", "nonsense", "-o", s(dir.path())]);
    assert!(!out.status.success());

    let out = prcl(&["eval", "-m", s(&missing), "-d", s(&missing)]);
    assert!(!out.status.success());
}

#[test]
fn stress_config_reports_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("stress.toml");
    fs::write(
        &cfg,
        "[run]\neval_images = 1\n[optim]\nlr_base = 1.0\nlr_prob_scale = 1.0\nclamp_variance = false\ngrad_clip = 0.0\n",
    )
    .unwrap();
    let out = prcl(&["train", "-c", s(&cfg), "-o", s(&dir.path().join("o")), "--epochs", "3"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
}
