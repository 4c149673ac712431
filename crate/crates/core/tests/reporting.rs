use std::path::Path;

use fusetrack::config::{load_config, RunConfig};
use fusetrack::detection::SensorKind;
use fusetrack::fusion::{run_tri_tracker, MotionSet};
use fusetrack::io::{track_lines, SceneLogs};
use fusetrack::report::{emit_trajectory_plot, run_ablation, standard_variants, ComparisonTable, PlotPanel, TRACKERS};
use fusetrack::sim::{default_calibration, simulate, ScenarioSpec, SensorNoiseModel, Template};

fn logs(template: Template, noise: SensorNoiseModel, seed: u64) -> SceneLogs {
    let s = simulate(&ScenarioSpec::new(template, 600, seed), &noise, &default_calibration()).unwrap();
    SceneLogs { spec: Some(s.spec), gt: s.gt, camera: s.camera, radar: s.radar }
}

fn kalman_table(scene: &SceneLogs) -> ComparisonTable {
    let variants = standard_variants(&RunConfig::default(), &MotionSet::default(), None);
    run_ablation(scene, &variants).unwrap()
}

fn panels(scene: &SceneLogs) -> Vec<PlotPanel> {
    let run = run_tri_tracker(&scene.camera, &scene.radar, &RunConfig::default().pipeline(), &MotionSet::default()).unwrap();
    TRACKERS
        .iter()
        .map(|&k| PlotPanel { name: k.name().to_string(), tracks: track_lines(run.series(k), k.name()) })
        .collect()
}

#[test]
fn shipped_config_matches_code_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    assert_eq!(load_config(&path).unwrap(), RunConfig::default());
}

#[test]
fn noiseless_table_is_perfect() {
    let t = kalman_table(&logs(Template::FreePair, SensorNoiseModel::noiseless(), 0));
    assert_eq!(t.rows.len(), 6);
    for r in &t.rows {
        assert!(r.mota == 100.0 && r.motp < 1e-9, "{} {}", r.variant, r.tracker);
    }
    for line in t.to_csv().unwrap().lines().skip(2) {
        assert!(line.ends_with(",100.0000,0.0000"), "{line}");
    }
}

#[test]
fn emitted_rows_are_self_consistent() {
    let t = kalman_table(&logs(Template::CrossingTrio, SensorNoiseModel::default(), 0));
    let csv = t.to_csv().unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# seed=0"));
    assert_eq!(lines.next(), Some("variant,tracker,fpr,fnr,idswr,mota,motp"));
    for line in lines {
        let f: Vec<f64> = line.split(',').skip(2).map(|v| v.parse().unwrap()).collect();
        assert!((f[3] - (100.0 - f[0] - f[1] - f[2])).abs() <= 0.01, "{line}");
    }
}

#[test]
fn ablation_trends_on_default_scenes() {
    for seed in 0..5 {
        let t = kalman_table(&logs(Template::CrossingTrio, SensorNoiseModel::default(), seed));
        for k in [SensorKind::Camera, SensorKind::Fused] {
            let feat = t.row("kalman+feat", k).unwrap().idswr;
            let plain = t.row("kalman", k).unwrap().idswr;
            assert!(feat <= plain, "seed {seed} {}: {feat} > {plain}", k.name());
        }
        for v in ["kalman", "kalman+feat"] {
            let fnr = |k| t.row(v, k).unwrap().fnr;
            assert!(fnr(SensorKind::Fused) < fnr(SensorKind::Camera).min(fnr(SensorKind::Radar)), "seed {seed} {v}");
        }
    }
}

#[test]
fn noiseless_curves_overlay_ground_truth() {
    let scene = logs(Template::CrossingTrio, SensorNoiseModel::noiseless(), 1);
    let art = emit_trajectory_plot(&panels(&scene), &scene.gt, 1.0).unwrap();
    assert!(art.gaps.iter().all(|g| g.gap_runs == 0 && g.max_deviation_m < 1e-6), "{:?}", art.gaps);
    assert!(art.svg.starts_with("<svg") || art.svg.starts_with("<?xml"));
    assert!(art.points_csv.lines().count() > 3 * 3 * 600);
}

#[test]
fn fused_curve_has_fewer_gaps_than_camera() {
    for seed in 0..5 {
        let scene = logs(Template::CrossingTrio, SensorNoiseModel::default(), seed);
        let art = emit_trajectory_plot(&panels(&scene), &scene.gt, 1.0).unwrap();
        let (cam, fused) = (art.gap_count("camera"), art.gap_count("fused"));
        assert!(fused < cam, "seed {seed}: fused {fused} vs camera {cam}");
    }
}

#[test]
fn plot_files_are_written() {
    let scene = logs(Template::RadialSingle, SensorNoiseModel::default(), 2);
    let art = emit_trajectory_plot(&panels(&scene), &scene.gt, 1.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    art.write(dir.path()).unwrap();
    for f in ["trajectories.svg", "trajectories.csv", "gaps.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let again = emit_trajectory_plot(&panels(&scene), &scene.gt, 1.0).unwrap();
    assert_eq!(art, again);
}
