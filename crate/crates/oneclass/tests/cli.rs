//! End-to-end checks of the command-line binary: pipeline wiring, exit
//! codes, seed derivation, and the output-root environment variable.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_oneclass");

fn tiny_config(dir: &Path) -> PathBuf {
    let path = dir.join("exp.toml");
    std::fs::write(
        &path,
        r#"
            seed = 10
            runs = 2

            [dataset.synthetic]
            train_majority = 12
            test_majority = 8
            test_minority = 8
            dims = [16, 16, 1]
            brightness_shift = 0.3
            contrast_shift = 1.0
            texture_seed = 2

            [transforms]
            preset = "LM(3,0)"

            [train]
            epochs = 2
            batch_size = 32
        "#,
    )
    .unwrap();
    path
}

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("ONECLASS_OUTPUT_ROOT");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn pipeline_runs_and_derives_per_run_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let out_dir = dir.path().join("out");
    let out_str = out_dir.to_str().unwrap();
    let cfg = config.to_str().unwrap();

    let train = run(&["train", "-c", cfg, "--out", out_str], &[]);
    assert!(train.status.success(), "{}", stderr(&train));
    let text = stdout(&train);
    assert!(text.contains("run 0 (seed 10)"), "{text}");
    assert!(text.contains("run 1 (seed 11)"), "{text}");
    // 12 images x 3 transforms
    assert!(text.contains("36 pairs"), "{text}");

    // distinct seeds produce distinct training trajectories
    let loss_0 = std::fs::read_to_string(out_dir.join("loss_0.csv")).unwrap();
    let loss_1 = std::fs::read_to_string(out_dir.join("loss_1.csv")).unwrap();
    assert_ne!(loss_0, loss_1);

    let eval = run(
        &[
            "evaluate",
            "-c",
            cfg,
            "--out",
            out_str,
            "--models",
            out_dir.join("model_0.bin").to_str().unwrap(),
            out_dir.join("model_1.bin").to_str().unwrap(),
        ],
        &[],
    );
    assert!(eval.status.success(), "{}", stderr(&eval));
    assert!(stdout(&eval).contains("AUC"));
    assert!(out_dir.join("metrics.txt").is_file());
    assert!(out_dir.join("provenance.txt").is_file());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let cfg = config.to_str().unwrap();
    for out in ["a", "b"] {
        let status = run(
            &[
                "train",
                "-c",
                cfg,
                "--out",
                dir.path().join(out).to_str().unwrap(),
            ],
            &[],
        );
        assert!(status.status.success(), "{}", stderr(&status));
    }
    for name in ["model_0.bin", "model_1.bin", "loss_0.csv", "provenance.txt"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn missing_manifest_fails_with_nonzero_exit_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    std::fs::write(
        &config,
        r#"
            [dataset]
            manifest = "no_such_manifest.csv"
            [transforms]
            preset = "LM(3,0)"
        "#,
    )
    .unwrap();
    let out = run(
        &[
            "train",
            "-c",
            config.to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ],
        &[],
    );
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("no_such_manifest.csv"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn missing_config_and_bad_flags_fail() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["train", "-c", "/nonexistent/exp.toml", "--out", "x"], &[]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("exp.toml"));

    let config = tiny_config(dir.path());
    let bad_size = run(
        &[
            "train",
            "-c",
            config.to_str().unwrap(),
            "--out",
            dir.path().join("o").to_str().unwrap(),
            "--train-size",
            "zero",
        ],
        &[],
    );
    assert!(!bad_size.status.success());
    assert!(stderr(&bad_size).contains("train size"));
}

#[test]
fn output_root_env_var_supplies_default_directory() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let root = dir.path().join("root");

    let out = run(
        &["synth", "-c", config.to_str().unwrap()],
        &[("ONECLASS_OUTPUT_ROOT", root.to_str().unwrap())],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    // config file is exp.toml, so outputs land under <root>/exp
    assert!(root.join("exp/dataset/manifest.csv").is_file());
    assert!(root.join("exp/provenance.txt").is_file());

    // without the variable and without --out there is nowhere to write
    let bare = run(&["synth", "-c", config.to_str().unwrap()], &[]);
    assert!(!bare.status.success());
    assert!(stderr(&bare).contains("output"));
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let out = run(
        &[
            "train",
            "-c",
            config.to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
            "--seed",
            "99",
            "--runs",
            "1",
            "--train-size",
            "4",
        ],
        &[],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("run 0 (seed 99)"), "{text}");
    // 4 images x 3 transforms
    assert!(text.contains("12 pairs"), "{text}");
    assert!(!dir.path().join("out/model_1.bin").exists());
}

#[test]
fn unknown_preset_lists_valid_names() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let out = run(
        &[
            "compare-transforms",
            "-c",
            config.to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
            "--presets",
            "LM(9,9)",
        ],
        &[],
    );
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("LM(9,9)"), "{err}");
    assert!(err.contains("LM(5,0)") && err.contains("R(4,0)"), "{err}");
}

#[test]
fn score_writes_delimited_scores_with_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let cfg = config.to_str().unwrap();
    let out_dir = dir.path().join("out");
    let train = run(
        &[
            "train",
            "-c",
            cfg,
            "--out",
            out_dir.to_str().unwrap(),
            "--runs",
            "1",
        ],
        &[],
    );
    assert!(train.status.success(), "{}", stderr(&train));

    let score = run(
        &[
            "score",
            "-c",
            cfg,
            "--out",
            out_dir.to_str().unwrap(),
            "--model",
            out_dir.join("model_0.bin").to_str().unwrap(),
        ],
        &[],
    );
    assert!(score.status.success(), "{}", stderr(&score));
    let csv = std::fs::read_to_string(out_dir.join("scores.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "sample_id,score,is_majority,d1,d2,d3");
    // 8 + 8 test samples
    assert_eq!(lines.len(), 17);
    for line in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 6);
        let s: f64 = fields[1].parse().unwrap();
        assert!((0.0..=3.0).contains(&s));
        assert!(fields[2] == "0" || fields[2] == "1");
    }
}
