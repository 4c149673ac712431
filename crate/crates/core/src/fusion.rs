//! Tri-output pipeline: camera, radar and fused trackers side by side, with
//! decision-level fusion of per-frame detections in the ground plane.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appearance::{l2_normalize, Embedding};
use crate::association::{hungarian_solve, AssociationConfig, CostMatrix};
use crate::clustering::{radar_detections, DbscanParams, RadarPoint};
use crate::detection::{Detection, SensorKind};
use crate::geometry::{bbox_bottom_center, BBox, Calibration, GroundPoint};
use crate::io::{CameraFrame, RadarFrame};
use crate::motion::MotionModel;
use crate::track::{TrackConfig, TrackRecord, TrackRecorder, Tracker, TrackerFrameResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("camera detections present but no calibration configured")]
    CalibrationMissing,
    #[error("{sensor} timestamps not strictly increasing at frame {index}")]
    NonMonotonicTimestamps { sensor: &'static str, index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusedSource {
    CameraOnly,
    RadarOnly,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedDetection {
    pub position: GroundPoint,
    pub source: FusedSource,
    pub embedding: Option<Embedding>,
    pub camera_ref: Option<usize>,
    pub radar_ref: Option<usize>,
}

impl FusedDetection {
    pub fn to_detection(&self) -> Detection {
        Detection::bev(SensorKind::Fused, self.position, self.embedding.clone())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CrossSensorMatch {
    /// `(camera index, radar index)`.
    pub pairs: Vec<(usize, usize)>,
    pub camera_only: Vec<usize>,
    pub radar_only: Vec<usize>,
}

/// Optimal one-to-one pairing on BEV distance; pairs beyond `gate` split.
pub fn associate_cross_sensor(cam: &[GroundPoint], radar: &[GroundPoint], gate: f64) -> CrossSensorMatch {
    let forbidden = 1e12;
    let mut c = CostMatrix::new(cam.len(), radar.len(), forbidden);
    for (i, a) in cam.iter().enumerate() {
        for (j, b) in radar.iter().enumerate() {
            let d = a.distance(b);
            c.set(i, j, if d <= gate { d } else { forbidden });
        }
    }
    let a = hungarian_solve(&c);
    CrossSensorMatch { pairs: a.matches, camera_only: a.unmatched_detections, radar_only: a.unmatched_tracks }
}

/// Lateral from the camera, depth from the radar; a lone sensor passes
/// through unchanged.
pub fn fuse_position(cam: Option<GroundPoint>, radar: Option<GroundPoint>) -> Option<GroundPoint> {
    match (cam, radar) {
        (Some(c), Some(r)) => Some(GroundPoint::new(c.x, r.y)),
        (Some(c), None) => Some(c),
        (None, Some(r)) => Some(r),
        (None, None) => None,
    }
}

/// Fuses one frame. Camera detections without a ground position are skipped.
pub fn fuse_frame(cam: &[Detection], radar: &[Detection], gate: f64) -> Vec<FusedDetection> {
    let cam_idx: Vec<usize> = (0..cam.len()).filter(|&i| cam[i].ground.is_some()).collect();
    let cam_g: Vec<GroundPoint> = cam_idx.iter().map(|&i| cam[i].ground.unwrap()).collect();
    let rad_g: Vec<GroundPoint> = radar.iter().map(|d| GroundPoint::new(d.position[0], d.position[1])).collect();
    let m = associate_cross_sensor(&cam_g, &rad_g, gate);
    let mut out = Vec::with_capacity(m.pairs.len() + m.camera_only.len() + m.radar_only.len());
    for &(ci, ri) in &m.pairs {
        out.push(FusedDetection {
            position: fuse_position(Some(cam_g[ci]), Some(rad_g[ri])).unwrap(),
            source: FusedSource::Both,
            embedding: cam[cam_idx[ci]].embedding.clone(),
            camera_ref: Some(cam_idx[ci]),
            radar_ref: Some(ri),
        });
    }
    for &ci in &m.camera_only {
        out.push(FusedDetection {
            position: cam_g[ci],
            source: FusedSource::CameraOnly,
            embedding: cam[cam_idx[ci]].embedding.clone(),
            camera_ref: Some(cam_idx[ci]),
            radar_ref: None,
        });
    }
    for &ri in &m.radar_only {
        out.push(FusedDetection {
            position: rad_g[ri],
            source: FusedSource::RadarOnly,
            embedding: None,
            camera_ref: None,
            radar_ref: Some(ri),
        });
    }
    out
}

/// Camera detection in pixel space: bbox bottom center plus its IPM image.
pub fn camera_detections(frame: &CameraFrame, calib: &Calibration) -> Vec<Detection> {
    frame
        .dets
        .iter()
        .map(|d| {
            let (u, v) = bbox_bottom_center(&BBox::from_array(d.bbox));
            Detection {
                kind: SensorKind::Camera,
                position: [u, v],
                ground: calib.pixel_to_ground(u, v).ok(),
                embedding: if d.emb.is_empty() { None } else { l2_normalize(&d.emb).ok() },
            }
        })
        .collect()
}

pub fn radar_frame_detections(frame: &RadarFrame, params: DbscanParams) -> Vec<Detection> {
    let pts: Vec<RadarPoint> = frame.points.iter().map(|p| RadarPoint::new(p[0], p[1], p[2])).collect();
    radar_detections(&pts, params)
}

/// One fused time step: indices into the camera and radar logs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignedFrame {
    pub t: f64,
    pub camera: Option<usize>,
    pub radar: Option<usize>,
}

fn check_monotone(ts: &[f64], sensor: &'static str) -> Result<(), FusionError> {
    match ts.windows(2).position(|w| !(w[1] > w[0])) {
        Some(k) => Err(FusionError::NonMonotonicTimestamps { sensor, index: k + 1 }),
        None => Ok(()),
    }
}

fn rate(ts: &[f64]) -> f64 {
    match ts {
        [first, .., last] if last > first => (ts.len() - 1) as f64 / (last - first),
        _ => 0.0,
    }
}

fn nearest(ts: &[f64], t: f64) -> Option<usize> {
    let k = ts.partition_point(|&x| x < t);
    [k.checked_sub(1), (k < ts.len()).then_some(k)]
        .into_iter()
        .flatten()
        .min_by(|&a, &b| (ts[a] - t).abs().total_cmp(&(ts[b] - t).abs()))
}

/// Nearest-timestamp pairing keyed on the lower-rate sensor (the camera on
/// ties). Partners further than `max_skew` are dropped.
pub fn align_frames(cam_t: &[f64], radar_t: &[f64], max_skew: f64) -> Result<Vec<AlignedFrame>, FusionError> {
    check_monotone(cam_t, "camera")?;
    check_monotone(radar_t, "radar")?;
    let key_on_camera = if cam_t.is_empty() {
        false
    } else if radar_t.is_empty() {
        true
    } else {
        rate(cam_t) <= rate(radar_t)
    };
    let (key, other) = if key_on_camera { (cam_t, radar_t) } else { (radar_t, cam_t) };
    Ok(key
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let partner = nearest(other, t).filter(|&j| (other[j] - t).abs() <= max_skew);
            if key_on_camera {
                AlignedFrame { t, camera: Some(k), radar: partner }
            } else {
                AlignedFrame { t, camera: partner, radar: Some(k) }
            }
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub calibration: Option<Calibration>,
    pub dbscan: DbscanParams,
    pub assoc_bev: AssociationConfig,
    pub assoc_px: AssociationConfig,
    pub track: TrackConfig,
    pub fusion_gate_m: f64,
    pub max_skew_s: f64,
    pub use_appearance: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            calibration: Some(crate::sim::default_calibration()),
            dbscan: DbscanParams::default(),
            assoc_bev: AssociationConfig::default(),
            assoc_px: AssociationConfig { position_gate: Some(80.0), position_scale: 40.0, ..Default::default() },
            track: TrackConfig::default(),
            fusion_gate_m: 2.0,
            max_skew_s: 0.05,
            use_appearance: true,
        }
    }
}

/// Motion models for the two native spaces.
#[derive(Debug, Clone)]
pub struct MotionSet {
    pub pixel: MotionModel,
    pub bev: MotionModel,
}

impl Default for MotionSet {
    fn default() -> Self {
        Self {
            pixel: MotionModel::ConstantVelocity(crate::motion::KalmanConfig::pixel()),
            bev: MotionModel::ConstantVelocity(crate::motion::KalmanConfig::bev()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TriFrameOutput {
    pub t: f64,
    pub camera: TrackerFrameResult,
    pub radar: TrackerFrameResult,
    pub fused: TrackerFrameResult,
}

pub type TrackSeries = Vec<(f64, Vec<TrackRecord>)>;

#[derive(Debug, Clone)]
pub struct TriRun {
    pub frames: Vec<TriFrameOutput>,
    /// Exported reliable tracks, camera already mapped to the ground plane.
    pub camera: TrackSeries,
    pub radar: TrackSeries,
    pub fused: TrackSeries,
}

impl TriRun {
    pub fn series(&self, kind: SensorKind) -> &TrackSeries {
        match kind {
            SensorKind::Camera => &self.camera,
            SensorKind::Radar => &self.radar,
            SensorKind::Fused => &self.fused,
        }
    }
}

fn run_one<F>(mut tracker: Tracker, times: &[f64], dets: &[Vec<Detection>], to_output: F) -> (Vec<TrackerFrameResult>, TrackSeries)
where
    F: Fn([f64; 2]) -> Option<[f64; 2]>,
{
    let mut rec = TrackRecorder::new();
    let mut results = Vec::with_capacity(times.len());
    for (t, d) in times.iter().zip(dets) {
        let r = tracker.step(*t, d);
        rec.push(&r, &to_output);
        results.push(r);
    }
    (results, rec.finish())
}

/// Runs the three independent trackers over aligned sensor logs.
pub fn run_tri_tracker(
    camera: &[CameraFrame],
    radar: &[RadarFrame],
    cfg: &PipelineConfig,
    motion: &MotionSet,
) -> Result<TriRun, FusionError> {
    let has_camera = camera.iter().any(|f| !f.dets.is_empty());
    let calib = match cfg.calibration {
        Some(c) => c,
        None if has_camera => return Err(FusionError::CalibrationMissing),
        None => crate::sim::default_calibration(),
    };
    let cam_t: Vec<f64> = camera.iter().map(|f| f.t).collect();
    let rad_t: Vec<f64> = radar.iter().map(|f| f.t).collect();
    let aligned = align_frames(&cam_t, &rad_t, cfg.max_skew_s)?;

    let times: Vec<f64> = aligned.iter().map(|a| a.t).collect();
    let cam_dets: Vec<Vec<Detection>> = aligned
        .iter()
        .map(|a| a.camera.map(|k| camera_detections(&camera[k], &calib)).unwrap_or_default())
        .collect();
    let rad_dets: Vec<Vec<Detection>> = aligned
        .iter()
        .map(|a| a.radar.map(|k| radar_frame_detections(&radar[k], cfg.dbscan)).unwrap_or_default())
        .collect();
    let fused_dets: Vec<Vec<Detection>> = cam_dets
        .iter()
        .zip(&rad_dets)
        .map(|(c, r)| fuse_frame(c, r, cfg.fusion_gate_m).iter().map(FusedDetection::to_detection).collect())
        .collect();

    let cam_tracker = Tracker::new(SensorKind::Camera, cfg.track, cfg.assoc_px, cfg.use_appearance, motion.pixel.clone());
    let rad_tracker = Tracker::new(SensorKind::Radar, cfg.track, cfg.assoc_bev, false, motion.bev.clone());
    let fus_tracker = Tracker::new(SensorKind::Fused, cfg.track, cfg.assoc_bev, cfg.use_appearance, motion.bev.clone());

    let ipm = |p: [f64; 2]| calib.pixel_to_ground(p[0], p[1]).ok().map(|g| g.to_array());
    let ((cam_r, cam_s), (rad_r, rad_s), (fus_r, fus_s)) = std::thread::scope(|s| {
        let c = s.spawn(|| run_one(cam_tracker, &times, &cam_dets, ipm));
        let r = s.spawn(|| run_one(rad_tracker, &times, &rad_dets, Some));
        let f = run_one(fus_tracker, &times, &fused_dets, Some);
        (c.join().expect("camera tracker panicked"), r.join().expect("radar tracker panicked"), f)
    });

    let frames = times
        .iter()
        .zip(cam_r.into_iter().zip(rad_r).zip(fus_r))
        .map(|(t, ((camera, radar), fused))| TriFrameOutput { t: *t, camera, radar, fused })
        .collect();
    Ok(TriRun { frames, camera: cam_s, radar: rad_s, fused: fus_s })
}
