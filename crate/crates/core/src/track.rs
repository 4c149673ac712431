//! Track lifecycle for one tracker instance.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appearance::{embedding_distance, DistanceMetric, Embedding};
use crate::association::{build_cost_matrix, hungarian_solve, AssociationConfig, TrackCue};
use crate::detection::{Detection, SensorKind};
use crate::motion::{MotionModel, MotionState};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TrackError {
    #[error("track gallery is empty")]
    EmptyGallery,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackConfig {
    pub max_invisible: u32,
    pub min_visibility_pct: f64,
    pub reliable_after: u32,
    pub gallery_size: usize,
    /// The visibility-score rule only applies from this age on.
    pub min_age_for_score: u32,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            max_invisible: 20,
            min_visibility_pct: 60.0,
            reliable_after: 5,
            gallery_size: 10,
            min_age_for_score: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    /// Frames since creation, including the creation frame.
    pub age: u32,
    /// Current run of unmatched frames.
    pub invisible: u32,
    /// Frames with a successful match (creation counts).
    pub visible: u32,
    /// Current run of matched frames.
    pub consecutive: u32,
    pub reliable: bool,
    pub gallery: VecDeque<Embedding>,
    pub position: [f64; 2],
    pub history: Vec<[f64; 2]>,
    pub motion: MotionState,
}

impl Track {
    pub fn new(id: u64, det: &Detection, motion: &MotionModel, t: f64, cfg: &TrackConfig) -> Self {
        let mut track = Self {
            id,
            age: 1,
            invisible: 0,
            visible: 1,
            consecutive: 1,
            reliable: cfg.reliable_after <= 1,
            gallery: VecDeque::with_capacity(cfg.gallery_size),
            position: det.position,
            history: vec![det.position],
            motion: motion.init(det.position, t),
        };
        if let Some(e) = &det.embedding {
            track.remember(e.clone(), cfg.gallery_size);
        }
        track
    }

    fn remember(&mut self, e: Embedding, cap: usize) {
        if cap == 0 {
            return;
        }
        if self.gallery.len() == cap {
            self.gallery.pop_front();
        }
        self.gallery.push_back(e);
    }
}

/// `V / A × 100`.
pub fn visibility_score(t: &Track) -> f64 {
    assert!(t.age >= 1, "track age must be at least 1");
    t.visible as f64 / t.age as f64 * 100.0
}

pub fn should_delete(t: &Track, cfg: &TrackConfig) -> bool {
    if t.invisible >= cfg.max_invisible {
        return true;
    }
    // Compare V·100 against pct·A to keep the 60% boundary exact.
    t.age >= cfg.min_age_for_score && (t.visible as f64 * 100.0) < cfg.min_visibility_pct * t.age as f64
}

pub fn gallery_distance(t: &Track, e: &Embedding) -> Result<f64, TrackError> {
    t.gallery
        .iter()
        .map(|g| embedding_distance(g, e, DistanceMetric::Cosine))
        .min_by(f64::total_cmp)
        .ok_or(TrackError::EmptyGallery)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackReport {
    pub id: u64,
    pub position: [f64; 2],
    pub reliable: bool,
    pub matched: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackerFrameResult {
    pub t: f64,
    pub active: Vec<TrackReport>,
    pub born: Vec<u64>,
    pub dead: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct Tracker {
    pub kind: SensorKind,
    pub cfg: TrackConfig,
    pub assoc: AssociationConfig,
    pub use_appearance: bool,
    pub motion: MotionModel,
    pub tracks: Vec<Track>,
    next_id: u64,
}

impl Tracker {
    pub fn new(
        kind: SensorKind,
        cfg: TrackConfig,
        assoc: AssociationConfig,
        use_appearance: bool,
        motion: MotionModel,
    ) -> Self {
        Self { kind, cfg, assoc, use_appearance, motion, tracks: Vec::new(), next_id: 1 }
    }

    /// One frame: predict, associate, update or coast, initiate, age, delete.
    pub fn step(&mut self, t: f64, dets: &[Detection]) -> TrackerFrameResult {
        let predicted: Vec<[f64; 2]> = self.tracks.iter().map(|tr| self.motion.predict(&tr.motion, t)).collect();
        let galleries: Vec<Vec<Embedding>> = self.tracks.iter().map(|tr| tr.gallery.iter().cloned().collect()).collect();
        let cues: Vec<TrackCue<'_>> = predicted
            .iter()
            .zip(&galleries)
            .map(|(p, g)| TrackCue { position: *p, gallery: g })
            .collect();
        let cost = build_cost_matrix(dets, &cues, &self.assoc, self.use_appearance);
        let assignment = hungarian_solve(&cost);

        let mut matched = vec![false; self.tracks.len()];
        for &(d, k) in &assignment.matches {
            let det = &dets[d];
            let tr = &mut self.tracks[k];
            self.motion.update(&mut tr.motion, det.position, t);
            tr.position = det.position;
            tr.history.push(det.position);
            tr.visible += 1;
            tr.invisible = 0;
            tr.consecutive += 1;
            if tr.consecutive >= self.cfg.reliable_after {
                tr.reliable = true;
            }
            if let Some(e) = &det.embedding {
                tr.remember(e.clone(), self.cfg.gallery_size);
            }
            matched[k] = true;
        }
        for (k, tr) in self.tracks.iter_mut().enumerate() {
            if !matched[k] {
                tr.position = self.motion.coast(&mut tr.motion, t);
                tr.invisible += 1;
                tr.consecutive = 0;
            }
            tr.age += 1;
        }

        let mut result = TrackerFrameResult { t, ..Default::default() };
        for &d in &assignment.unmatched_detections {
            let id = self.next_id;
            self.next_id += 1;
            self.tracks.push(Track::new(id, &dets[d], &self.motion, t, &self.cfg));
            matched.push(true);
            result.born.push(id);
        }

        let cfg = self.cfg;
        let mut keep = Vec::with_capacity(self.tracks.len());
        for (tr, m) in std::mem::take(&mut self.tracks).into_iter().zip(matched) {
            if should_delete(&tr, &cfg) {
                result.dead.push(tr.id);
            } else {
                result.active.push(TrackReport { id: tr.id, position: tr.position, reliable: tr.reliable, matched: m });
                keep.push(tr);
            }
        }
        self.tracks = keep;
        result
    }
}

/// One exported position of a reliable track.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub id: u64,
    pub x: f64,
    pub y: f64,
}

/// Collects exported tracks per frame. Positions of a tentative track are
/// held back and written into their original frames once the track becomes
/// reliable; tracks that die tentative are never exported.
#[derive(Debug, Clone, Default)]
pub struct TrackRecorder {
    frames: Vec<(f64, Vec<TrackRecord>)>,
    pending: BTreeMap<u64, Vec<(usize, TrackRecord)>>,
}

impl TrackRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    /// `to_output` maps a native position to the exported frame (e.g. IPM
    /// for the camera tracker); returning `None` skips the record.
    pub fn push<F>(&mut self, r: &TrackerFrameResult, mut to_output: F)
    where
        F: FnMut([f64; 2]) -> Option<[f64; 2]>,
    {
        let frame = self.frames.len();
        self.frames.push((r.t, Vec::new()));
        for id in &r.dead {
            self.pending.remove(id);
        }
        for a in &r.active {
            let Some([x, y]) = to_output(a.position) else { continue };
            let rec = TrackRecord { id: a.id, x, y };
            if !a.reliable {
                self.pending.entry(a.id).or_default().push((frame, rec));
                continue;
            }
            if let Some(backlog) = self.pending.remove(&a.id) {
                for (f, old) in backlog {
                    self.frames[f].1.push(old);
                }
            }
            self.frames[frame].1.push(rec);
        }
    }

    pub fn finish(mut self) -> Vec<(f64, Vec<TrackRecord>)> {
        for (_, recs) in &mut self.frames {
            recs.sort_by_key(|r| r.id);
        }
        self.frames
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::appearance::l2_normalize;
    use crate::geometry::GroundPoint;
    use crate::motion::KalmanConfig;

    fn track_with(age: u32, visible: u32, invisible: u32) -> Track {
        let det = Detection::bev(SensorKind::Radar, GroundPoint::new(0.0, 5.0), None);
        let motion = MotionModel::ConstantVelocity(KalmanConfig::bev());
        let mut t = Track::new(1, &det, &motion, 0.0, &TrackConfig::default());
        t.age = age;
        t.visible = visible;
        t.invisible = invisible;
        t
    }

    #[test]
    fn deletion_rules() {
        let cfg = TrackConfig::default();
        assert!(should_delete(&track_with(40, 20, 20), &cfg));
        assert!(!should_delete(&track_with(40, 30, 19), &cfg));
        assert!(!should_delete(&track_with(5, 3, 2), &cfg));
        assert!(should_delete(&track_with(10, 5, 1), &cfg));
    }

    #[test]
    fn scores() {
        assert_eq!(visibility_score(&track_with(10, 6, 0)), 60.0);
        assert_eq!(visibility_score(&track_with(7, 7, 0)), 100.0);
        assert_eq!(visibility_score(&track_with(1, 0, 1)), 0.0);
    }

    #[test]
    fn gallery_min_semantics() {
        let e = |v: [f64; 2]| l2_normalize(&v).unwrap();
        let mut t = track_with(1, 1, 0);
        assert_eq!(gallery_distance(&t, &e([1.0, 0.0])), Err(TrackError::EmptyGallery));
        t.gallery.push_back(e([1.0, 0.0]));
        assert_eq!(gallery_distance(&t, &e([1.0, 0.0])), Ok(0.0));
        assert!((gallery_distance(&t, &e([0.0, 1.0])).unwrap() - 1.0).abs() < 1e-15);
        t.gallery.push_front(e([0.0, 1.0]));
        assert_eq!(gallery_distance(&t, &e([1.0, 0.0])), Ok(0.0));
    }

    #[test]
    fn recorder_backfills_promoted_tracks() {
        let mut rec = TrackRecorder::new();
        let report = |id, x: f64, reliable| TrackReport { id, position: [x, 0.0], reliable, matched: true };
        for f in 0..3 {
            let r = TrackerFrameResult {
                t: f as f64,
                active: vec![report(1, f as f64, f == 2), report(2, 10.0, false)],
                ..Default::default()
            };
            rec.push(&r, Some);
        }
        rec.push(&TrackerFrameResult { t: 3.0, dead: vec![2], ..Default::default() }, Some);
        let frames = rec.finish();
        assert_eq!(frames.len(), 4);
        for f in 0..3 {
            assert_eq!(frames[f].1, vec![TrackRecord { id: 1, x: f as f64, y: 0.0 }]);
        }
        assert!(frames[3].1.is_empty());
    }
}
