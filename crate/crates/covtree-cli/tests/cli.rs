//! End-to-end tests of the `covtree` binary: exit code classes, frozen
//! output formats, and reproducibility.

use std::path::Path;
use std::process::{Command, Output};

fn covtree(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covtree"))
        .args(args)
        .env("COVTREE_OUT_DIR", out_dir)
        .output()
        .expect("binary runs")
}

fn assert_exit(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn fit_predict_eval_happy_path() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path();

    // Fit on a generated series written to CSV first (also exercises
    // --data).
    let data = covtree::data::gen_seasonal_trend(48, 3, 0.3).unwrap();
    let csv_path = out_dir.join("series.csv");
    covtree::data::write_csv(&data, &csv_path).unwrap();

    let fit = covtree(
        &[
            "fit",
            "--data",
            csv_path.to_str().unwrap(),
            "--kernel",
            "SE * PERIODIC(theta_l=4) + RQ",
            "--holdout",
            "0.25",
            "--restarts",
            "3",
            "--seed",
            "5",
            "--noise",
            "opt",
        ],
        out_dir,
    );
    assert_exit(&fit, 0);
    let stdout = String::from_utf8_lossy(&fit.stdout);
    assert!(stdout.contains("lml:"), "{stdout}");
    assert!(out_dir.join("model.json").exists());
    assert!(out_dir.join("fit_manifest.json").exists());

    // Predict on an inclusive grid.
    let model = out_dir.join("model.json");
    let predict = covtree(
        &[
            "predict",
            "--model",
            model.to_str().unwrap(),
            "--range",
            "0:10:11",
        ],
        out_dir,
    );
    assert_exit(&predict, 0);
    let csv = std::fs::read_to_string(out_dir.join("predictions.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,mean,variance,lower95,upper95"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 11);
    assert!(rows[0].starts_with("0,"));
    assert!(rows[10].starts_with("10,"));

    // Evaluate against the holdout tail.
    let (_, tail) = covtree::data::split_tail(&data, 0.25).unwrap();
    let tail_path = out_dir.join("tail.csv");
    covtree::data::write_csv(&tail, &tail_path).unwrap();
    let eval = covtree(
        &[
            "eval",
            "--model",
            model.to_str().unwrap(),
            "--test",
            tail_path.to_str().unwrap(),
        ],
        out_dir,
    );
    assert_exit(&eval, 0);
    let stdout = String::from_utf8_lossy(&eval.stdout);
    for key in ["rmse:", "mae:", "coverage95:", "lml:"] {
        assert!(stdout.contains(key), "missing {key} in {stdout}");
    }
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    // Neither --data nor --demo.
    let out = covtree(&["fit", "--kernel", "SE"], dir.path());
    assert_exit(&out, 2);
    // Unknown demo name.
    let out = covtree(&["demo", "nope"], dir.path());
    assert_exit(&out, 2);
    // Bad holdout fraction.
    let out = covtree(
        &[
            "fit", "--demo", "sinc", "--kernel", "SE", "--holdout", "1.5",
        ],
        dir.path(),
    );
    assert_exit(&out, 2);
    // Missing data file.
    let out = covtree(
        &["fit", "--data", "/nonexistent.csv", "--kernel", "SE"],
        dir.path(),
    );
    assert_exit(&out, 2);
    // Bad noise flag.
    let out = covtree(
        &[
            "fit", "--demo", "sinc", "--kernel", "SE", "--noise", "sometimes",
        ],
        dir.path(),
    );
    assert_exit(&out, 2);
}

#[test]
fn kernel_parse_errors_exit_3_with_caret() {
    let dir = tempfile::tempdir().unwrap();
    let out = covtree(
        &["fit", "--demo", "sinc", "--kernel", "SE * ("],
        dir.path(),
    );
    assert_exit(&out, 3);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("offset 7"), "{stderr}");
    // Caret under the offending position: 6 spaces then ^.
    assert!(stderr.contains("\n  SE * (\n        ^"), "{stderr}");
}

#[test]
fn numerical_fit_failures_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    // Amplitudes near the float ceiling overflow the Gram diagonal; with a
    // single restart there is no rescue draw.
    let out = covtree(
        &[
            "fit",
            "--demo",
            "sinc",
            "--kernel",
            "SE(amplitude=1e308) + SE(amplitude=1e308)",
            "--restarts",
            "1",
        ],
        dir.path(),
    );
    assert_exit(&out, 4);
}

#[test]
fn model_io_errors_exit_5() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("broken.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let out = covtree(
        &[
            "predict",
            "--model",
            bad.to_str().unwrap(),
            "--range",
            "0:1:2",
        ],
        dir.path(),
    );
    assert_exit(&out, 5);

    // Version mismatch.
    let fit = covtree(
        &[
            "fit", "--demo", "sinc", "--kernel", "SE", "--restarts", "2",
        ],
        dir.path(),
    );
    assert_exit(&fit, 0);
    let model_path = dir.path().join("model.json");
    let text = std::fs::read_to_string(&model_path).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value["version"] = serde_json::json!(99);
    std::fs::write(&model_path, serde_json::to_string(&value).unwrap()).unwrap();
    let out = covtree(
        &[
            "predict",
            "--model",
            model_path.to_str().unwrap(),
            "--range",
            "0:1:2",
        ],
        dir.path(),
    );
    assert_exit(&out, 5);
}

#[test]
fn eval_rejects_empty_test_set() {
    let dir = tempfile::tempdir().unwrap();
    let fit = covtree(
        &[
            "fit", "--demo", "sinc", "--kernel", "SE", "--restarts", "2",
        ],
        dir.path(),
    );
    assert_exit(&fit, 0);
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "x,y\n").unwrap();
    let out = covtree(
        &[
            "eval",
            "--model",
            dir.path().join("model.json").to_str().unwrap(),
            "--test",
            empty.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_exit(&out, 2);
}

#[test]
fn predictions_are_reproducible_across_processes() {
    let dir = tempfile::tempdir().unwrap();
    let fit = covtree(
        &[
            "fit", "--demo", "sinc", "--kernel", "SE * PERIODIC", "--seed", "11",
            "--restarts", "3",
        ],
        dir.path(),
    );
    assert_exit(&fit, 0);
    let model = dir.path().join("model.json");

    let run = |out: &str| {
        let p = covtree(
            &[
                "predict",
                "--model",
                model.to_str().unwrap(),
                "--range",
                "-12:12:97",
                "--out",
                dir.path().join(out).to_str().unwrap(),
            ],
            dir.path(),
        );
        assert_exit(&p, 0);
        std::fs::read(dir.path().join(out)).unwrap()
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert_eq!(a, b, "reloaded predictions differ between processes");
}

#[test]
fn noise_free_predictions_reproduce_training_points() {
    let dir = tempfile::tempdir().unwrap();
    let fit = covtree(
        &[
            "fit", "--demo", "sinc", "--kernel", "SE", "--seed", "2", "--restarts", "4",
        ],
        dir.path(),
    );
    assert_exit(&fit, 0);

    // Query at the training inputs themselves (first CSV column).
    let train = covtree::data::gen_sinc(30, 2, 0.0).unwrap();
    let train_csv = dir.path().join("train.csv");
    covtree::data::write_csv(&train, &train_csv).unwrap();
    let predict = covtree(
        &[
            "predict",
            "--model",
            dir.path().join("model.json").to_str().unwrap(),
            "--at",
            train_csv.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_exit(&predict, 0);

    let csv = std::fs::read_to_string(dir.path().join("predictions.csv")).unwrap();
    for (i, line) in csv.lines().skip(1).enumerate() {
        let mean: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        let y = train.y()[i];
        assert!(
            (mean - y).abs() <= 1e-6 * y.abs().max(1e-3),
            "row {i}: mean {mean} vs observation {y}"
        );
    }
    assert!(dir.path().join("predict_manifest.json").exists());
}

#[test]
fn demo_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = covtree(&["demo", "sinc", "--seed", "3"], dir.path());
    assert_exit(&out, 0);
    for name in [
        "data.csv",
        "model.json",
        "predictions.csv",
        "plot.svg",
        "demo_manifest.json",
    ] {
        assert!(dir.path().join(name).exists(), "missing {name}");
    }
    let manifest = std::fs::read_to_string(dir.path().join("demo_manifest.json")).unwrap();
    assert!(manifest.contains("\"command\": \"demo\""));
    let svg = std::fs::read_to_string(dir.path().join("plot.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.trim_end().ends_with("</svg>"));
}
