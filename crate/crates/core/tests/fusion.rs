use fusetrack::fusion::{
    camera_detections, fuse_frame, radar_frame_detections, run_tri_tracker, FusedSource, MotionSet, PipelineConfig,
};
use fusetrack::io::{CameraFrame, RadarFrame};
use fusetrack::sim::{default_calibration, simulate, ScenarioSpec, Scene, SensorNoiseModel, Template};

fn scene(noise: SensorNoiseModel, seed: u64) -> Scene {
    simulate(&ScenarioSpec::new(Template::CrossingTrio, 300, seed), &noise, &default_calibration()).unwrap()
}

fn blank_camera(s: &Scene) -> Vec<CameraFrame> {
    s.camera.iter().map(|f| CameraFrame { t: f.t, dets: vec![] }).collect()
}

fn blank_radar(s: &Scene) -> Vec<RadarFrame> {
    s.radar.iter().map(|f| RadarFrame { t: f.t, points: vec![] }).collect()
}

#[test]
fn fused_pairs_take_camera_x_and_radar_y() {
    let s = scene(SensorNoiseModel::default(), 3);
    let cfg = PipelineConfig::default();
    let calib = default_calibration();
    let mut pairs = 0;
    for (c, r) in s.camera.iter().zip(&s.radar) {
        let cam = camera_detections(c, &calib);
        let rad = radar_frame_detections(r, cfg.dbscan);
        for f in fuse_frame(&cam, &rad, cfg.fusion_gate_m) {
            match f.source {
                FusedSource::Both => {
                    let cg = cam[f.camera_ref.unwrap()].ground.unwrap();
                    let rg = rad[f.radar_ref.unwrap()].ground.unwrap();
                    assert_eq!(f.position.x, cg.x);
                    assert_eq!(f.position.y, rg.y);
                    assert!(f.embedding.is_some());
                    pairs += 1;
                }
                FusedSource::CameraOnly => assert!(f.camera_ref.is_some() && f.radar_ref.is_none() && f.embedding.is_some()),
                FusedSource::RadarOnly => assert!(f.radar_ref.is_some() && f.camera_ref.is_none() && f.embedding.is_none()),
            }
        }
    }
    assert!(pairs > 500);
}

#[test]
fn trackers_do_not_share_state() {
    let s = scene(SensorNoiseModel::default(), 1);
    let cfg = PipelineConfig::default();
    let ms = MotionSet::default();
    let full = run_tri_tracker(&s.camera, &s.radar, &cfg, &ms).unwrap();
    let no_cam = run_tri_tracker(&blank_camera(&s), &s.radar, &cfg, &ms).unwrap();
    let no_rad = run_tri_tracker(&s.camera, &blank_radar(&s), &cfg, &ms).unwrap();
    assert_eq!(full.radar, no_cam.radar);
    assert_eq!(full.camera, no_rad.camera);
}

#[test]
fn fused_output_survives_a_dead_sensor() {
    let s = scene(SensorNoiseModel::default(), 2);
    let cfg = PipelineConfig::default();
    let ms = MotionSet::default();
    for (label, run) in [
        ("radar dead", run_tri_tracker(&s.camera, &blank_radar(&s), &cfg, &ms).unwrap()),
        ("camera dead", run_tri_tracker(&blank_camera(&s), &s.radar, &cfg, &ms).unwrap()),
    ] {
        let (alive, fused) = if label == "radar dead" { (&run.camera, &run.fused) } else { (&run.radar, &run.fused) };
        let alive_frames = alive.iter().filter(|(_, r)| !r.is_empty()).count();
        let fused_frames = fused.iter().filter(|(_, r)| !r.is_empty()).count();
        assert!(alive_frames > 200, "{label}");
        assert!(fused_frames as f64 >= 0.95 * alive_frames as f64, "{label}: {fused_frames} vs {alive_frames}");
    }
}

#[test]
fn noiseless_single_sensor_fusion_reproduces_that_sensor() {
    let s = scene(SensorNoiseModel::noiseless(), 0);
    let cfg = PipelineConfig::default();
    let ms = MotionSet::default();
    let positions = |series: &Vec<(f64, Vec<fusetrack::track::TrackRecord>)>| -> Vec<Vec<(i64, i64)>> {
        series
            .iter()
            .map(|(_, recs)| {
                let mut v: Vec<(i64, i64)> = recs.iter().map(|r| ((r.x * 1e6).round() as i64, (r.y * 1e6).round() as i64)).collect();
                v.sort_unstable();
                v
            })
            .collect()
    };
    let r = run_tri_tracker(&s.camera, &blank_radar(&s), &cfg, &ms).unwrap();
    assert_eq!(positions(&r.fused), positions(&r.camera));
    let c = run_tri_tracker(&blank_camera(&s), &s.radar, &cfg, &ms).unwrap();
    assert_eq!(positions(&c.fused), positions(&c.radar));
}
