//! CLEAR MOT evaluation in the ground plane.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::association::{hungarian_solve, CostMatrix};
use crate::track::TrackRecord;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("ground truth contains no objects")]
    EmptyGroundTruth,
    #[error("no ground-truth object was ever matched")]
    NoMatches,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GtObject {
    pub id: u64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFrame {
    pub t: f64,
    pub objects: Vec<GtObject>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MotpDenominator {
    /// Total ground-truth instants.
    #[default]
    Gt,
    /// Number of matched pairs (textbook CLEAR).
    Matches,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClearCounts {
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub idsw: u64,
    pub gt_total: u64,
    pub matches: u64,
    pub distance_sum: f64,
}

impl ClearCounts {
    pub fn add(&mut self, o: &ClearCounts) {
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.idsw += o.idsw;
        self.gt_total += o.gt_total;
        self.matches += o.matches;
        self.distance_sum += o.distance_sum;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMatch {
    pub t: f64,
    /// `(gt id, hypothesis id, distance)`.
    pub pairs: Vec<(u64, u64, f64)>,
    pub counts: ClearCounts,
}

/// Last matched hypothesis id per ground-truth id.
pub type Correspondence = HashMap<u64, u64>;

fn dist(g: &GtObject, h: &TrackRecord) -> f64 {
    ((g.x - h.x).powi(2) + (g.y - h.y).powi(2)).sqrt()
}

/// Matches one frame and updates `prev` in place.
pub fn clear_match_frame(gt: &GroundTruthFrame, hyps: &[TrackRecord], prev: &mut Correspondence, gate: f64) -> FrameMatch {
    let mut gt_used = vec![false; gt.objects.len()];
    let mut hyp_used = vec![false; hyps.len()];
    let mut pairs: Vec<(usize, usize)> = Vec::new();

    // Keep last frame's correspondences that are still inside the gate.
    let hyp_index: HashMap<u64, usize> = hyps.iter().enumerate().map(|(k, h)| (h.id, k)).collect();
    for (i, g) in gt.objects.iter().enumerate() {
        if let Some(&k) = prev.get(&g.id).and_then(|hid| hyp_index.get(hid)) {
            if !hyp_used[k] && dist(g, &hyps[k]) <= gate {
                gt_used[i] = true;
                hyp_used[k] = true;
                pairs.push((i, k));
            }
        }
    }

    let free_gt: Vec<usize> = (0..gt.objects.len()).filter(|&i| !gt_used[i]).collect();
    let free_hyp: Vec<usize> = (0..hyps.len()).filter(|&k| !hyp_used[k]).collect();
    let forbidden = 1e12;
    let mut c = CostMatrix::new(free_gt.len(), free_hyp.len(), forbidden);
    for (r, &i) in free_gt.iter().enumerate() {
        for (q, &k) in free_hyp.iter().enumerate() {
            let d = dist(&gt.objects[i], &hyps[k]);
            c.set(r, q, if d <= gate { d } else { forbidden });
        }
    }
    for (r, q) in hungarian_solve(&c).matches {
        pairs.push((free_gt[r], free_hyp[q]));
    }

    let mut counts = ClearCounts { gt_total: gt.objects.len() as u64, ..Default::default() };
    let mut out_pairs = Vec::with_capacity(pairs.len());
    pairs.sort_unstable();
    for (i, k) in pairs {
        let (g, h) = (&gt.objects[i], &hyps[k]);
        let d = dist(g, h);
        if prev.insert(g.id, h.id).is_some_and(|old| old != h.id) {
            counts.idsw += 1;
        }
        counts.matches += 1;
        counts.distance_sum += d;
        out_pairs.push((g.id, h.id, d));
    }
    counts.fn_ = counts.gt_total - counts.matches;
    counts.fp = hyps.len() as u64 - counts.matches;
    FrameMatch { t: gt.t, pairs: out_pairs, counts }
}

/// `(fpr, fnr, idswr)` in percent of ground-truth instants.
pub fn rates(c: &ClearCounts) -> Result<(f64, f64, f64), MetricsError> {
    if c.gt_total == 0 {
        return Err(MetricsError::EmptyGroundTruth);
    }
    let g = c.gt_total as f64;
    Ok((100.0 * c.fp as f64 / g, 100.0 * c.fn_ as f64 / g, 100.0 * c.idsw as f64 / g))
}

pub fn mota(c: &ClearCounts) -> Result<f64, MetricsError> {
    let (fpr, fnr, idswr) = rates(c)?;
    Ok(100.0 - fnr - fpr - idswr)
}

pub fn motp(distance_sum: f64, matches: u64, gt_total: u64, denominator: MotpDenominator) -> Result<f64, MetricsError> {
    if matches == 0 {
        return Err(MetricsError::NoMatches);
    }
    let d = match denominator {
        MotpDenominator::Gt => gt_total,
        MotpDenominator::Matches => matches,
    };
    Ok(distance_sum / d as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearReport {
    pub counts: ClearCounts,
    pub fpr: f64,
    pub fnr: f64,
    pub idswr: f64,
    pub mota: f64,
    pub motp: f64,
    pub frames: Vec<FrameMatch>,
}

impl ClearReport {
    pub fn from_frames(frames: Vec<FrameMatch>, denominator: MotpDenominator) -> Result<Self, MetricsError> {
        let mut counts = ClearCounts::default();
        for f in &frames {
            counts.add(&f.counts);
        }
        let (fpr, fnr, idswr) = rates(&counts)?;
        let motp = motp(counts.distance_sum, counts.matches, counts.gt_total, denominator)?;
        Ok(Self { counts, fpr, fnr, idswr, mota: 100.0 - fnr - fpr - idswr, motp, frames })
    }
}

/// Timestamps are compared at microsecond resolution.
pub fn time_key(t: f64) -> i64 {
    (t * 1e6).round() as i64
}

/// Evaluates a whole sequence. Hypothesis frames are looked up by the
/// ground-truth timestamp; frames without hypotheses count as empty.
pub fn evaluate_sequence(
    gt: &[GroundTruthFrame],
    hyps: &[(f64, Vec<TrackRecord>)],
    gate: f64,
    denominator: MotpDenominator,
) -> Result<ClearReport, MetricsError> {
    let by_time: BTreeMap<i64, &Vec<TrackRecord>> = hyps.iter().map(|(t, r)| (time_key(*t), r)).collect();
    let empty = Vec::new();
    let mut prev = Correspondence::new();
    let frames = gt
        .iter()
        .map(|g| {
            let h = by_time.get(&time_key(g.t)).copied().unwrap_or(&empty);
            clear_match_frame(g, h, &mut prev, gate)
        })
        .collect();
    ClearReport::from_frames(frames, denominator)
}
