//! Deterministic pedestrian scenarios and per-sensor detection logs.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appearance::{l2_normalize, Embedding, LabeledFeatures, EMBEDDING_DIM};
use crate::geometry::{BBox, Calibration, CameraIntrinsics, GroundPoint};
use crate::io::{CameraDetRecord, CameraFrame, RadarFrame};
use crate::metrics::{GroundTruthFrame, GtObject};

pub const PEDESTRIAN_HEIGHT_M: f64 = 1.7;
pub const PEDESTRIAN_WIDTH_M: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("cannot place {requested} unit vectors {separation} apart (placed {placed})")]
    SeparationInfeasible { requested: usize, placed: usize, separation: f64 },
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    RadialSingle,
    FreePair,
    CrossingTrio,
}

impl Template {
    pub const ALL: [Template; 3] = [Template::RadialSingle, Template::FreePair, Template::CrossingTrio];

    pub fn name(&self) -> &'static str {
        match self {
            Template::RadialSingle => "radial_single",
            Template::FreePair => "free_pair",
            Template::CrossingTrio => "crossing_trio",
        }
    }

    pub fn num_objects(&self) -> usize {
        match self {
            Template::RadialSingle => 1,
            Template::FreePair => 2,
            Template::CrossingTrio => 3,
        }
    }
}

impl FromStr for Template {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Template::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| SimError::InvalidSpec(format!("unknown template '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub template: Template,
    pub frames: usize,
    pub frame_rate: f64,
    pub night: bool,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(template: Template, frames: usize, seed: u64) -> Self {
        Self { template, frames, frame_rate: 10.0, night: false, seed }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.frames == 0 {
            return Err(SimError::InvalidSpec("duration must be at least one frame".into()));
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(SimError::InvalidSpec("frame rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraNoise {
    /// Lateral error standard deviation at `reference_range_m`.
    pub lateral_sigma_m: f64,
    /// Depth error standard deviation at `reference_range_m`; realized as
    /// vertical jitter of the bbox bottom, so it grows with range.
    pub depth_sigma_m: f64,
    pub reference_range_m: f64,
    pub miss_prob: f64,
    pub occlusion_boost: f64,
    /// Horizontal overlap fraction with a nearer box that counts as occluded.
    pub occlusion_overlap: f64,
    pub night_miss_boost: f64,
    /// Mean spurious boxes per frame at night.
    pub night_fp_rate: f64,
    /// Bbox looseness; the bottom edge only ever moves outward.
    pub looseness_sigma_px: f64,
    /// Per-dimension noise added to identity means before normalization.
    pub embedding_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarNoise {
    pub lateral_sigma_m: f64,
    pub depth_sigma_m: f64,
    pub point_spread_m: f64,
    pub points_per_object: usize,
    pub merge_distance_m: f64,
    pub miss_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorNoiseModel {
    pub camera: CameraNoise,
    pub radar: RadarNoise,
}

impl Default for SensorNoiseModel {
    fn default() -> Self {
        Self {
            camera: CameraNoise {
                lateral_sigma_m: 0.15,
                depth_sigma_m: 0.3,
                reference_range_m: 10.0,
                miss_prob: 0.04,
                occlusion_boost: 0.5,
                occlusion_overlap: 0.3,
                night_miss_boost: 0.08,
                night_fp_rate: 0.3,
                looseness_sigma_px: 1.5,
                embedding_sigma: 0.13,
            },
            radar: RadarNoise {
                lateral_sigma_m: 0.4,
                depth_sigma_m: 0.1,
                point_spread_m: 0.12,
                points_per_object: 10,
                merge_distance_m: 1.0,
                miss_prob: 0.08,
            },
        }
    }
}

impl SensorNoiseModel {
    /// Every sigma and probability zero.
    pub fn noiseless() -> Self {
        let d = Self::default();
        Self {
            camera: CameraNoise {
                lateral_sigma_m: 0.0,
                depth_sigma_m: 0.0,
                miss_prob: 0.0,
                occlusion_boost: 0.0,
                night_miss_boost: 0.0,
                night_fp_rate: 0.0,
                looseness_sigma_px: 0.0,
                embedding_sigma: 0.0,
                ..d.camera
            },
            radar: RadarNoise {
                lateral_sigma_m: 0.0,
                depth_sigma_m: 0.0,
                point_spread_m: 0.0,
                miss_prob: 0.0,
                merge_distance_m: 0.0,
                ..d.radar
            },
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let c = &self.camera;
        let r = &self.radar;
        let sigmas = [
            c.lateral_sigma_m,
            c.depth_sigma_m,
            c.looseness_sigma_px,
            c.embedding_sigma,
            c.night_fp_rate,
            r.lateral_sigma_m,
            r.depth_sigma_m,
            r.point_spread_m,
            r.merge_distance_m,
        ];
        if sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(SimError::InvalidSpec("noise sigmas and rates must be non-negative".into()));
        }
        let probs = [c.miss_prob, c.occlusion_boost, c.occlusion_overlap, c.night_miss_boost, r.miss_prob];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(SimError::InvalidSpec("probabilities must lie in [0, 1]".into()));
        }
        if !(c.reference_range_m > 0.0) || r.points_per_object == 0 {
            return Err(SimError::InvalidSpec("reference range and points per object must be positive".into()));
        }
        Ok(())
    }
}

pub const CAMERA_HEIGHT_M: f64 = 1.635;
pub const CAMERA_PITCH_DEG: f64 = 3.2;

/// 640×480 camera, f = 500 px, mounted `CAMERA_HEIGHT_M` above the ground
/// and pitched `CAMERA_PITCH_DEG` down.
pub fn default_calibration() -> Calibration {
    let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0).expect("valid intrinsics");
    Calibration::new(k, CAMERA_HEIGHT_M, CAMERA_PITCH_DEG.to_radians())
}

/// Independent generator for one purpose (`stream`) of a seeded run.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

const STREAM_TRAJECTORY: u64 = 1;
const STREAM_IDENTITY: u64 = 2;
const STREAM_CAMERA: u64 = 3;
const STREAM_RADAR: u64 = 4;

/// Peak walking speed, m/s.
const WALK_SPEED: f64 = 1.4;

type Path = Box<dyn Fn(f64) -> [f64; 2]>;

fn paths(template: Template, rng: &mut ChaCha8Rng) -> Vec<Path> {
    let jitter = |rng: &mut ChaCha8Rng, a: f64| rng.random_range(-a..a);
    match template {
        Template::RadialSingle => {
            let x = 0.2 + jitter(rng, 0.3);
            let phase = rng.random_range(0.0..2.0 * PI);
            let amp = 4.0;
            let w = WALK_SPEED / amp;
            vec![Box::new(move |t| [x, 9.0 + amp * (w * t + phase).sin()])]
        }
        Template::FreePair => {
            let ph: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..2.0 * PI));
            let (a1, b1) = (0.5 + jitter(rng, 0.05), 0.35 + jitter(rng, 0.03));
            let (a2, b2) = (0.45 + jitter(rng, 0.05), 0.38 + jitter(rng, 0.03));
            vec![
                Box::new(move |t| [-1.7 + (a1 * t + ph[0]).sin(), 8.0 + 3.0 * (b1 * t + ph[1]).sin()]),
                Box::new(move |t| [1.7 + (a2 * t + ph[2]).sin(), 9.0 + 3.0 * (b2 * t + ph[3]).cos()]),
            ]
        }
        Template::CrossingTrio => {
            // Two walkers shuttle along crossing diagonals, a third walks
            // radially; phases keep every pair at least ~0.85 m apart.
            let len = 4.5f64.hypot(8.0);
            let w = 2.0 * WALK_SPEED / len;
            let t0 = rng.random_range(0.0..2.0 * PI / w);
            let pa = jitter(rng, 0.05);
            let pb = 5.934 + jitter(rng, 0.05);
            let pc = 2.705 + jitter(rng, 0.05);
            let shuttle = move |t: f64, ph: f64| 0.5 - 0.5 * (w * (t + t0) + ph).cos();
            vec![
                Box::new(move |t| {
                    let s = shuttle(t, pa);
                    [-2.0 + 4.5 * s, 5.0 + 8.0 * s]
                }),
                Box::new(move |t| {
                    let s = shuttle(t, pb);
                    [2.0 - 4.5 * s, 5.0 + 8.0 * s]
                }),
                Box::new(move |t| [0.3, 9.0 + 4.0 * (w * (t + t0) + pc).sin()]),
            ]
        }
    }
}

pub fn generate_ground_truth(spec: &ScenarioSpec) -> Result<Vec<GroundTruthFrame>, SimError> {
    spec.validate()?;
    let mut rng = rng_stream(spec.seed, STREAM_TRAJECTORY);
    let ps = paths(spec.template, &mut rng);
    Ok((0..spec.frames)
        .map(|k| {
            let t = k as f64 / spec.frame_rate;
            let objects = ps
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let [x, y] = p(t);
                    GtObject { id: i as u64 + 1, x, y }
                })
                .collect();
            GroundTruthFrame { t, objects }
        })
        .collect())
}

/// Unit vectors with pairwise Euclidean distance at least `separation`.
/// Random proposals are pushed away from their nearest accepted neighbour
/// for a few steps before being rejected.
pub fn make_identity_embeddings(
    num_identities: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Vec<Embedding>, SimError> {
    let infeasible = |placed| SimError::SeparationInfeasible { requested: num_identities, placed, separation };
    if separation > 2.0 {
        return Err(infeasible(0));
    }
    let mut rng = rng_stream(seed, STREAM_IDENTITY);
    let mut out: Vec<Embedding> = Vec::with_capacity(num_identities);
    for _ in 0..num_identities {
        let mut placed = false;
        'attempts: for _ in 0..200 {
            let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let Ok(mut cand) = l2_normalize(&g) else { continue };
            for _ in 0..50 {
                let nearest = out
                    .iter()
                    .map(|e| (crate::appearance::euclidean(e.values(), cand.values()), e))
                    .min_by(|a, b| a.0.total_cmp(&b.0));
                match nearest {
                    None => {
                        out.push(cand);
                        placed = true;
                        break 'attempts;
                    }
                    Some((d, _)) if d >= separation => {
                        out.push(cand);
                        placed = true;
                        break 'attempts;
                    }
                    Some((_, e)) => {
                        let pushed: Vec<f64> = cand.values().iter().zip(e.values()).map(|(c, n)| c + 0.5 * (c - n)).collect();
                        match l2_normalize(&pushed) {
                            Ok(p) => cand = p,
                            Err(_) => continue 'attempts,
                        }
                    }
                }
            }
        }
        if !placed {
            return Err(infeasible(out.len()));
        }
    }
    Ok(out)
}

/// Raw feature vectors for embedder training: identity means at least 1.0
/// apart plus isotropic Gaussian noise.
pub fn synthetic_identity_features(
    num_identities: usize,
    per_identity: usize,
    dim: usize,
    sigma: f64,
    seed: u64,
) -> Result<LabeledFeatures, SimError> {
    let means = make_identity_embeddings(num_identities, dim, 1.0, seed)?;
    let mut rng = rng_stream(seed, STREAM_CAMERA);
    let noise = Normal::new(0.0, sigma).map_err(|e| SimError::InvalidSpec(e.to_string()))?;
    let mut features = Vec::with_capacity(num_identities * per_identity);
    let mut labels = Vec::with_capacity(num_identities * per_identity);
    for (label, m) in means.iter().enumerate() {
        for _ in 0..per_identity {
            features.push(m.values().iter().map(|v| v + noise.sample(&mut rng)).collect());
            labels.push(label);
        }
    }
    Ok(LabeledFeatures { features, labels })
}

/// Identity mean plus per-dimension noise, renormalized.
pub fn noisy_embedding<R: Rng + ?Sized>(mean: &Embedding, sigma: f64, rng: &mut R) -> Embedding {
    if sigma == 0.0 {
        return mean.clone();
    }
    let v: Vec<f64> = mean.values().iter().map(|m| m + sigma * rng.sample::<f64, _>(StandardNormal)).collect();
    l2_normalize(&v).unwrap_or_else(|_| mean.clone())
}

/// Noise-free pedestrian box for a ground position.
pub fn pedestrian_bbox(g: &GroundPoint, calib: &Calibration) -> Option<BBox> {
    let (u, v) = calib.ground_to_pixel(g).ok()?;
    let head = nalgebra::Vector3::new(g.x, g.y, PEDESTRIAN_HEIGHT_M);
    let top = crate::geometry::project_radar_to_pixel(&head, &calib.intrinsics, &calib.pose).ok()?;
    let half = 0.5 * PEDESTRIAN_WIDTH_M * calib.intrinsics.fx / top.scale;
    Some(BBox::new(u - half, top.v.min(v), u + half, v))
}

fn occluded(i: usize, objs: &[GtObject], boxes: &[Option<BBox>], overlap: f64) -> bool {
    let Some(bi) = boxes[i] else { return false };
    objs.iter().zip(boxes).enumerate().any(|(j, (o, b))| {
        j != i && o.y < objs[i].y && b.is_some_and(|bj| bi.horizontal_overlap(&bj) > overlap)
    })
}

fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    p > 0.0 && rng.random::<f64>() < p.min(1.0)
}

/// Camera log: projected boxes with pixel noise, occlusion and night
/// failures, each carrying an identity embedding.
pub fn sense_camera(
    gt: &[GroundTruthFrame],
    noise: &CameraNoise,
    calib: &Calibration,
    identities: &[Embedding],
    night: bool,
    seed: u64,
) -> Vec<CameraFrame> {
    let mut rng = rng_stream(seed, STREAM_CAMERA);
    let f = calib.intrinsics.fx;
    let h = calib.pose.height;
    let r = noise.reference_range_m;
    let sigma_u = noise.lateral_sigma_m * f / r;
    let sigma_v = noise.depth_sigma_m * f * h / (r * r);
    let miss_extra = if night { noise.night_miss_boost } else { 0.0 };
    let fp_rate = if night { noise.night_fp_rate } else { 0.0 };

    gt.iter()
        .map(|frame| {
            let boxes: Vec<Option<BBox>> =
                frame.objects.iter().map(|o| pedestrian_bbox(&GroundPoint::new(o.x, o.y), calib)).collect();
            let mut dets = Vec::new();
            for (i, o) in frame.objects.iter().enumerate() {
                let Some(b) = boxes[i] else { continue };
                let mut p_miss = noise.miss_prob + miss_extra;
                if occluded(i, &frame.objects, &boxes, noise.occlusion_overlap) {
                    p_miss += noise.occlusion_boost;
                }
                // Draw every variate regardless of the miss outcome so one
                // object's noise does not shift another's.
                let miss = rng.random::<f64>() < p_miss.min(1.0) && p_miss > 0.0;
                let du = sigma_u * rng.sample::<f64, _>(StandardNormal);
                let dv = sigma_v * rng.sample::<f64, _>(StandardNormal);
                let loose: [f64; 4] = std::array::from_fn(|_| noise.looseness_sigma_px * rng.sample::<f64, _>(StandardNormal));
                let emb = identities
                    .get(o.id as usize - 1)
                    .map(|m| noisy_embedding(m, noise.embedding_sigma, &mut rng));
                if miss {
                    continue;
                }
                let bbox = [
                    b.x_min + du - loose[0].abs(),
                    b.y_min - loose[1].abs(),
                    b.x_max + du + loose[2].abs(),
                    b.y_max + dv + loose[3].abs(),
                ];
                // Keep the bottom center horizontally unbiased by looseness.
                let center_shift = (loose[2].abs() - loose[0].abs()) / 2.0;
                let bbox = [bbox[0] - center_shift, bbox[1], bbox[2] - center_shift, bbox[3]];
                dets.push(CameraDetRecord { bbox, emb: emb.map(Embedding::into_inner).unwrap_or_default() });
            }
            if fp_rate > 0.0 {
                let n = Poisson::new(fp_rate).map(|p| p.sample(&mut rng) as usize).unwrap_or(0);
                for _ in 0..n {
                    dets.push(spurious_box(calib, identities.first().map_or(EMBEDDING_DIM, |e| e.dim()), &mut rng));
                }
            }
            CameraFrame { t: frame.t, dets }
        })
        .collect()
}

fn spurious_box<R: Rng + ?Sized>(calib: &Calibration, dim: usize, rng: &mut R) -> CameraDetRecord {
    let g = GroundPoint::new(rng.random_range(-3.0..3.0), rng.random_range(5.0..14.0));
    let b = pedestrian_bbox(&g, calib).unwrap_or(BBox::new(300.0, 200.0, 340.0, 300.0));
    let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let emb = l2_normalize(&v).map(Embedding::into_inner).unwrap_or_else(|_| vec![0.0; dim]);
    CameraDetRecord { bbox: b.to_array(), emb }
}

/// Radar log: per-object point scatter around a noisy centroid. Objects
/// closer than the merge distance share one pooled scatter.
pub fn sense_radar(gt: &[GroundTruthFrame], noise: &RadarNoise, seed: u64) -> Vec<RadarFrame> {
    let mut rng = rng_stream(seed, STREAM_RADAR);
    gt.iter()
        .map(|frame| {
            let n = frame.objects.len();
            let mut centers = Vec::with_capacity(n);
            let mut seen = Vec::with_capacity(n);
            for o in &frame.objects {
                let dx = noise.lateral_sigma_m * rng.sample::<f64, _>(StandardNormal);
                let dy = noise.depth_sigma_m * rng.sample::<f64, _>(StandardNormal);
                centers.push([o.x + dx, o.y + dy]);
                seen.push(!bernoulli(&mut rng, noise.miss_prob));
            }
            // Union objects within the merge distance.
            let mut group: Vec<usize> = (0..n).collect();
            for i in 0..n {
                for j in i + 1..n {
                    let (a, b) = (&frame.objects[i], &frame.objects[j]);
                    if (a.x - b.x).hypot(a.y - b.y) < noise.merge_distance_m {
                        let (gi, gj) = (group[i], group[j]);
                        group.iter_mut().filter(|g| **g == gj).for_each(|g| *g = gi);
                    }
                }
            }
            let mut points = Vec::new();
            let mut groups: Vec<usize> = group.clone();
            groups.sort_unstable();
            groups.dedup();
            for g in groups {
                let members: Vec<usize> = (0..n).filter(|&i| group[i] == g && seen[i]).collect();
                if members.is_empty() {
                    continue;
                }
                let k = members.len() as f64;
                let cx = members.iter().map(|&i| centers[i][0]).sum::<f64>() / k;
                let cy = members.iter().map(|&i| centers[i][1]).sum::<f64>() / k;
                for _ in 0..noise.points_per_object * members.len() {
                    let px = cx + noise.point_spread_m * rng.sample::<f64, _>(StandardNormal);
                    let py = cy + noise.point_spread_m * rng.sample::<f64, _>(StandardNormal);
                    let pz = rng.random_range(0.0..PEDESTRIAN_HEIGHT_M);
                    points.push([px, py, pz]);
                }
            }
            RadarFrame { t: frame.t, points }
        })
        .collect()
}

/// Everything one simulated run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub spec: ScenarioSpec,
    pub gt: Vec<GroundTruthFrame>,
    pub camera: Vec<CameraFrame>,
    pub radar: Vec<RadarFrame>,
    pub identities: Vec<Embedding>,
}

pub fn simulate(spec: &ScenarioSpec, noise: &SensorNoiseModel, calib: &Calibration) -> Result<Scene, SimError> {
    noise.validate()?;
    let gt = generate_ground_truth(spec)?;
    let identities = make_identity_embeddings(spec.template.num_objects(), EMBEDDING_DIM, 1.2, spec.seed)?;
    let camera = sense_camera(&gt, &noise.camera, calib, &identities, spec.night, spec.seed);
    let radar = sense_radar(&gt, &noise.radar, spec.seed);
    Ok(Scene { spec: *spec, gt, camera, radar, identities })
}

/// Per-object BEV trajectories of a ground-truth log.
pub fn trajectories(gt: &[GroundTruthFrame]) -> Vec<Vec<[f64; 2]>> {
    let mut by_id: std::collections::BTreeMap<u64, Vec<[f64; 2]>> = Default::default();
    for f in gt {
        for o in &f.objects {
            by_id.entry(o.id).or_default().push([o.x, o.y]);
        }
    }
    by_id.into_values().collect()
}

/// Ground-truth trajectories of every template for each seed, in BEV
/// meters and projected to pixels. Points the camera cannot see are
/// dropped from the pixel version.
pub fn training_trajectories(
    seeds: std::ops::Range<u64>,
    frames: usize,
    calib: &Calibration,
) -> Result<(Vec<Vec<[f64; 2]>>, Vec<Vec<[f64; 2]>>), SimError> {
    let mut bev = Vec::new();
    for t in Template::ALL {
        for seed in seeds.clone() {
            bev.extend(trajectories(&generate_ground_truth(&ScenarioSpec::new(t, frames, seed))?));
        }
    }
    let pixel = bev
        .iter()
        .map(|tr| {
            tr.iter()
                .filter_map(|p| calib.ground_to_pixel(&GroundPoint::new(p[0], p[1])).ok())
                .map(|(u, v)| [u, v])
                .collect()
        })
        .collect();
    Ok((bev, pixel))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separation_bounds() {
        assert_eq!(make_identity_embeddings(1, 128, 2.0, 0).unwrap().len(), 1);
        let two = make_identity_embeddings(2, 128, 1.9, 0).unwrap();
        assert!(crate::appearance::euclidean(two[0].values(), two[1].values()) >= 1.9);
        assert!(matches!(make_identity_embeddings(2, 128, 2.01, 0), Err(SimError::SeparationInfeasible { .. })));
        let many = make_identity_embeddings(20, 128, 1.2, 4).unwrap();
        for i in 0..20 {
            for j in i + 1..20 {
                assert!(crate::appearance::euclidean(many[i].values(), many[j].values()) >= 1.2);
            }
        }
    }

    #[test]
    fn template_names_round_trip() {
        for t in Template::ALL {
            assert_eq!(t.name().parse::<Template>().unwrap(), t);
        }
        assert!("crossing".parse::<Template>().is_err());
    }

    #[test]
    fn invalid_specs() {
        assert!(generate_ground_truth(&ScenarioSpec::new(Template::FreePair, 0, 1)).is_err());
        let mut n = SensorNoiseModel::default();
        n.radar.miss_prob = 1.5;
        assert!(n.validate().is_err());
    }
}
