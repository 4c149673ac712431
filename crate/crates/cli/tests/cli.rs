use std::path::Path;
use std::process::{Command, Output};

fn fusetrack(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fusetrack")).args(args).current_dir(cwd).output().unwrap()
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = fusetrack(args, cwd);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn err(args: &[&str], cwd: &Path) -> String {
    let out = fusetrack(args, cwd);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

#[test]
fn simulate_track_evaluate_plot() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--template", "free_pair", "--frames", "200", "--seed", "3", "--out", "scene"], d);
    for f in ["gt.jsonl", "cam.jsonl", "radar.jsonl", "embeddings.json", "scene.json"] {
        assert!(d.join("scene").join(f).is_file(), "{f}");
    }
    ok(&["track", "--camera", "scene/cam.jsonl", "--radar", "scene/radar.jsonl", "--out", "tracks"], d);
    let resolved = std::fs::read_to_string(d.join("tracks/resolved_config.toml")).unwrap();
    assert!(resolved.contains("[assoc]") && resolved.contains("gate_m"));

    let json = ok(
        &[
            "evaluate", "--gt", "scene/gt.jsonl", "--tracks", "tracks/camera.jsonl", "tracks/radar.jsonl",
            "tracks/fused.jsonl", "--csv", "eval.csv",
        ],
        d,
    );
    let rows: serde_json::Value = serde_json::from_str(&json).unwrap();
    let names: Vec<&str> = rows.as_array().unwrap().iter().map(|r| r["tracker"].as_str().unwrap()).collect();
    assert_eq!(names, ["camera", "radar", "fused"]);
    for r in rows.as_array().unwrap() {
        let sum = r["mota"].as_f64().unwrap() + r["fpr"].as_f64().unwrap() + r["fnr"].as_f64().unwrap() + r["idswr"].as_f64().unwrap();
        assert!((sum - 100.0).abs() < 1e-9);
    }
    let eval = std::fs::read_to_string(d.join("eval.csv")).unwrap();
    assert!(eval.starts_with("# seed=3\ntracker,"));
    assert_eq!(eval.lines().count(), 5);

    let plot = ok(&["plot", "--gt", "scene/gt.jsonl", "--tracks", "tracks/camera.jsonl", "tracks/fused.jsonl", "--out", "plot"], d);
    assert!(plot.contains("camera:") && plot.contains("fused:"));
    for f in ["trajectories.svg", "trajectories.csv", "gaps.csv"] {
        assert!(d.join("plot").join(f).is_file(), "{f}");
    }
}

#[test]
fn noiseless_scene_evaluates_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--template", "radial_single", "--frames", "150", "--noiseless", "--out", "scene"], d);
    ok(&["track", "--camera", "scene/cam.jsonl", "--radar", "scene/radar.jsonl", "--out", "tracks"], d);
    let json = ok(&["evaluate", "--gt", "scene/gt.jsonl", "--tracks", "tracks/fused.jsonl", "tracks/radar.jsonl"], d);
    let rows: serde_json::Value = serde_json::from_str(&json).unwrap();
    for r in rows.as_array().unwrap() {
        assert_eq!(r["mota"].as_f64().unwrap(), 100.0);
        assert!(r["motp"].as_f64().unwrap() < 1e-6);
    }
}

#[test]
fn kalman_ablation_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--frames", "300", "--seed", "2", "--out", "scene"], d);
    ok(&["ablate", "--scene", "scene", "--kalman-only", "--out", "a"], d);
    let text = ok(&["ablate", "--scene", "scene", "--kalman-only", "--out", "b"], d);
    assert!(text.contains("kalman+feat"));
    let a = std::fs::read(d.join("a/ablation.csv")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b/ablation.csv")).unwrap());
    let csv = String::from_utf8(a).unwrap();
    assert!(csv.starts_with("# seed=2\n"));
    assert_eq!(csv.lines().count(), 2 + 6);
}

#[test]
fn trained_models_feed_the_tracker() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let summary = ok(&["train-motion", "--space", "bev", "--scenes", "2", "--epochs", "3", "--out", "bev.json"], d);
    let v: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert!(v["held_out"]["r_squared"].as_f64().unwrap().is_finite());
    ok(&["train-motion", "--space", "pixel", "--scenes", "2", "--epochs", "3", "--out", "pixel.json"], d);

    std::fs::write(
        d.join("run.toml"),
        "[calibration]\nfx = 500.0\nfy = 500.0\nu0 = 320.0\nv0 = 240.0\nheight_m = 1.635\npitch_deg = 3.2\n\n\
         [motion]\nmodel = \"bilstm\"\nbev_params = \"bev.json\"\npixel_params = \"pixel.json\"\n",
    )
    .unwrap();
    ok(&["simulate", "--frames", "120", "--out", "scene"], d);
    ok(&["track", "--camera", "scene/cam.jsonl", "--radar", "scene/radar.jsonl", "--config", "run.toml", "--out", "tracks"], d);
    assert!(std::fs::read_to_string(d.join("tracks/fused.jsonl")).unwrap().lines().count() > 0);

    let table = ok(&["ablate", "--scene", "scene", "--bev-params", "bev.json", "--pixel-params", "pixel.json", "--out", "abl"], d);
    assert!(table.contains("bilstm+feat"));
}

#[test]
fn embedder_training_reports_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = ok(&["train-embedder", "--identities", "8", "--per-identity", "12", "--out", "emb.json"], d);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["test_accuracy"].as_f64().unwrap() > 0.9);
    let saved: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("emb.json")).unwrap()).unwrap();
    assert!(saved["threshold"].as_f64().unwrap() > 0.0);
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--frames", "20", "--out", "scene"], d);
    let calib = "[calibration]\nfx = 500.0\nfy = 500.0\nu0 = 320.0\nv0 = 240.0\nheight_m = 1.6\npitch_deg = 3.0\n";
    let cases = [
        ("w.toml", format!("{calib}[assoc]\nw = 1.5\n"), "assoc.w"),
        ("typo.toml", format!("{calib}[asoc]\nw = 0.5\n"), "assoc.w"),
        ("missing.toml", "[calibration]\nfx = 500.0\n".to_string(), "calibration."),
        ("type.toml", format!("{calib}[dbscan]\nmin_pts = \"three\"\n"), "dbscan.min_pts"),
    ];
    for (name, text, key) in cases {
        std::fs::write(d.join(name), text).unwrap();
        let msg = err(&["track", "--camera", "scene/cam.jsonl", "--radar", "scene/radar.jsonl", "--config", name, "--out", "t"], d);
        assert!(msg.contains(key), "{name}: {msg}");
    }
}

#[test]
fn malformed_logs_report_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["simulate", "--frames", "5", "--out", "scene"], d);
    let mut gt = std::fs::read_to_string(d.join("scene/gt.jsonl")).unwrap();
    gt.push_str("{not json\n");
    std::fs::write(d.join("scene/gt.jsonl"), gt).unwrap();
    let msg = err(&["plot", "--gt", "scene/gt.jsonl", "--tracks", "scene/gt.jsonl", "--out", "p"], d);
    assert!(msg.contains("gt.jsonl:6:"), "{msg}");
}
