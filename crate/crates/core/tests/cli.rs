//! End-to-end tests of the `parrep` binary: every subcommand, artifact
//! layout and determinism of the file outputs.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_parrep")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn parrep")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "parrep {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_blobs_csv(path: &Path, n_per: usize, dim: usize) {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    let mut text = String::new();
    for c in 0..dim {
        text.push_str(&format!("x{c},"));
    }
    text.push_str("label\n");
    for class in 0..3usize {
        for _ in 0..n_per {
            for c in 0..dim {
                let v: f64 = rng.gen::<f64>() - 0.5 + if c == class { 4.0 } else { 0.0 };
                text.push_str(&format!("{v:.17e},"));
            }
            text.push_str(&format!("{class}\n"));
        }
    }
    fs::write(path, text).unwrap();
}

fn write_config(path: &Path, data: &Path, out_dir: &Path, seed: u64, repeat: usize) {
    let config = serde_json::json!({
        "data": data,
        "label_column": "label",
        "method": "paramrepulsor",
        "n_epochs": 4,
        "seed": seed,
        "repeat": repeat,
        "metrics": ["knn", "centroid"],
        "out_dir": out_dir,
    });
    fs::write(path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
}

fn read_embedding(path: &Path) -> Vec<Vec<f64>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("y0,y1"), "unexpected header {header:?}");
    lines
        .map(|l| {
            l.split(',')
                .take(2)
                .map(|c| c.parse::<f64>().unwrap())
                .collect()
        })
        .collect()
}

#[test]
fn synth_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    run_ok(&["synth", "circle", "--seed", "3", "--out", a.to_str().unwrap()]);
    run_ok(&["synth", "circle", "--seed", "3", "--out", b.to_str().unwrap()]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x0,x1,label");
    assert_eq!(text.lines().count(), 5001);
}

#[test]
fn unknown_synth_kind_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "synth",
        "torus",
        "--out",
        dir.path().join("x.csv").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown synthetic dataset"));
}

#[test]
fn fit_writes_artifacts_and_transform_matches() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("blobs.csv");
    write_blobs_csv(&data, 30, 4);
    let config = dir.path().join("run.json");
    let out_dir = dir.path().join("run");
    write_config(&config, &data, &out_dir, 7, 1);
    run_ok(&["fit", "--config", config.to_str().unwrap()]);

    for name in ["embedding.csv", "loss_trace.csv", "model.bin", "metrics.json"] {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }
    let emb = read_embedding(&out_dir.join("embedding.csv"));
    assert_eq!(emb.len(), 90);
    assert!(emb.iter().flatten().all(|v| v.is_finite()));

    let trace = fs::read_to_string(out_dir.join("loss_trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "epoch,loss");
    assert_eq!(trace.lines().count(), 5);

    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("metrics.json")).unwrap()).unwrap();
    assert!(metrics["values"]["knn"].is_number());
    assert!(metrics["values"]["centroid"].is_number());

    // The saved model projects the training rows back onto the stored
    // embedding up to the f32 weight quantization.
    let projected = dir.path().join("projected.csv");
    run_ok(&[
        "transform",
        "--model",
        out_dir.join("model.bin").to_str().unwrap(),
        "--input",
        data.to_str().unwrap(),
        "--label-column",
        "label",
        "--out",
        projected.to_str().unwrap(),
    ]);
    let proj = read_embedding(&projected);
    assert_eq!(proj.len(), emb.len());
    for (a, b) in emb.iter().flatten().zip(proj.iter().flatten()) {
        assert!((a - b).abs() <= 1e-4 * a.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn fit_seed_override_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("blobs.csv");
    write_blobs_csv(&data, 30, 4);
    let config = dir.path().join("run.json");
    write_config(&config, &data, &dir.path().join("unused"), 7, 1);
    let out1 = dir.path().join("s9a");
    let out2 = dir.path().join("s9b");
    for out in [&out1, &out2] {
        run_ok(&[
            "fit",
            "--config",
            config.to_str().unwrap(),
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    assert_eq!(
        fs::read(out1.join("embedding.csv")).unwrap(),
        fs::read(out2.join("embedding.csv")).unwrap()
    );
}

#[test]
fn repeat_fit_aggregates_and_compare_reports_welch_t() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("blobs.csv");
    write_blobs_csv(&data, 30, 4);
    let config = dir.path().join("run.json");
    write_config(&config, &data, &dir.path().join("unused"), 0, 3);

    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    run_ok(&["fit", "--config", config.to_str().unwrap(), "--out", out_a.to_str().unwrap()]);
    run_ok(&[
        "fit",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "100",
        "--out",
        out_b.to_str().unwrap(),
    ]);

    for seed in 0..3u64 {
        assert!(out_a.join(format!("seed_{seed}")).join("embedding.csv").exists());
    }
    let agg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_a.join("aggregate.json")).unwrap()).unwrap();
    assert_eq!(agg["runs"], 3);
    assert_eq!(agg["metrics"]["knn"]["values"].as_array().unwrap().len(), 3);

    let out = run_ok(&[
        "compare",
        "--a",
        out_a.join("aggregate.json").to_str().unwrap(),
        "--b",
        out_b.join("aggregate.json").to_str().unwrap(),
        "--metric",
        "knn",
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("welch_t\t"), "stdout: {stdout}");
    assert!(stdout.contains("df\t"), "stdout: {stdout}");
}

#[test]
fn evaluate_scores_an_embedding_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("blobs.csv");
    write_blobs_csv(&data, 30, 4);
    let config = dir.path().join("run.json");
    let out_dir = dir.path().join("run");
    write_config(&config, &data, &out_dir, 7, 1);
    run_ok(&["fit", "--config", config.to_str().unwrap()]);

    let report_path = dir.path().join("report.json");
    let out = run_ok(&[
        "evaluate",
        "--embedding",
        out_dir.join("embedding.csv").to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--label-column",
        "label",
        "--metrics",
        "knn,nnkept,centroid",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("knn"), "stdout: {stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    for name in ["knn", "nnkept", "centroid"] {
        assert!(report["values"][name].is_number(), "missing {name}");
    }
    assert!(report["values"].get("svm").is_none());
}

#[test]
fn fnrate_writes_table_and_prints_crossover() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("table.csv");
    let out = run_ok(&[
        "fnrate",
        "--n-min",
        "16",
        "--n-max",
        "1024",
        "--rows",
        "7",
        "--out",
        table.to_str().unwrap(),
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("crossover n = "));
    let text = fs::read_to_string(&table).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "n,p_mn,p_uniform,expected_mn,expected_uniform"
    );
    assert_eq!(text.lines().count(), 8);
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 5);
        let n: f64 = cells[0].parse().unwrap();
        let p_uniform: f64 = cells[2].parse().unwrap();
        assert!((p_uniform - 10.0 / n).abs() < 1e-15);
    }
}

#[test]
fn plot_renders_svg_scatter() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("blobs.csv");
    write_blobs_csv(&data, 30, 4);
    let config = dir.path().join("run.json");
    let out_dir = dir.path().join("run");
    write_config(&config, &data, &out_dir, 7, 1);
    run_ok(&["fit", "--config", config.to_str().unwrap()]);

    let svg_path = dir.path().join("scatter.svg");
    run_ok(&[
        "plot",
        "--embedding",
        out_dir.join("embedding.csv").to_str().unwrap(),
        "--out",
        svg_path.to_str().unwrap(),
    ]);
    let svg = fs::read_to_string(&svg_path).unwrap();
    assert!(svg.starts_with("<svg"), "svg head: {}", &svg[..svg.len().min(60)]);
    assert_eq!(svg.matches("<circle").count(), 90);
}

#[test]
fn rejects_bad_thread_env() {
    let out = Command::new(bin())
        .args(["synth", "circle", "--out", "/dev/null"])
        .env("PARREP_THREADS", "zero")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("PARREP_THREADS"));
}
