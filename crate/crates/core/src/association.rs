//! Dual-cue association cost and optimal one-to-one assignment.

use serde::{Deserialize, Serialize};

use crate::appearance::{embedding_distance, DistanceMetric, Embedding};
use crate::detection::Detection;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociationConfig {
    /// Weight of the appearance term; position gets `1 - w`.
    pub w: f64,
    pub thr_low: f64,
    pub thr_high: f64,
    pub max_cost: f64,
    pub position_gate: Option<f64>,
    /// Position distances are divided by this before weighting.
    pub position_scale: f64,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self {
            w: 0.8,
            thr_low: 0.3,
            thr_high: 1.2,
            max_cost: 1e6,
            position_gate: Some(1.5),
            position_scale: 1.0,
        }
    }
}

impl AssociationConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.w) {
            return Err(format!("w must lie in [0, 1], got {}", self.w));
        }
        if !(self.thr_low < self.thr_high) {
            return Err(format!("thr_low ({}) must be below thr_high ({})", self.thr_low, self.thr_high));
        }
        if !(self.position_scale > 0.0) {
            return Err("position scale must be positive".into());
        }
        if self.position_gate.is_some_and(|g| !(g > 0.0)) {
            return Err("position gate must be positive".into());
        }
        Ok(())
    }

    /// Appearance distance assumed when one side has no embedding.
    pub fn neutral_distance(&self) -> f64 {
        0.5 * (self.thr_low + self.thr_high)
    }

    /// Cost of one detection/track pair. `d_app` is `None` when appearance
    /// is not used at all.
    pub fn pair_cost(&self, d_app: Option<f64>, d_pos: f64) -> f64 {
        if self.position_gate.is_some_and(|g| d_pos > g) {
            return self.max_cost;
        }
        let pos = d_pos / self.position_scale;
        let cost = match d_app {
            None => pos,
            Some(a) if a < self.thr_low => 0.0,
            Some(a) if a > self.thr_high => self.max_cost,
            Some(a) => self.w * a + (1.0 - self.w) * pos,
        };
        cost.min(self.max_cost)
    }
}

/// Rows are detections, columns tracks.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    /// Sentinel for forbidden pairs; also used to pad to square.
    pub max_cost: f64,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, max_cost: f64) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols], max_cost }
    }

    pub fn from_rows(rows: &[Vec<f64>], max_cost: f64) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged cost matrix");
        Self { rows: rows.len(), cols, data: rows.concat(), max_cost }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    /// `(detection, track)` pairs, sorted by detection.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_tracks: Vec<usize>,
}

impl Assignment {
    pub fn cost(&self, c: &CostMatrix) -> f64 {
        self.matches.iter().map(|&(r, k)| c.get(r, k)).sum()
    }
}

/// What the association step needs from a track.
#[derive(Debug, Clone, Copy)]
pub struct TrackCue<'a> {
    pub position: [f64; 2],
    pub gallery: &'a [Embedding],
}

pub fn gallery_min_distance(gallery: &[Embedding], e: &Embedding) -> Option<f64> {
    gallery
        .iter()
        .map(|g| embedding_distance(g, e, DistanceMetric::Cosine))
        .min_by(f64::total_cmp)
}

pub fn build_cost_matrix(
    dets: &[Detection],
    tracks: &[TrackCue<'_>],
    cfg: &AssociationConfig,
    appearance_available: bool,
) -> CostMatrix {
    let mut c = CostMatrix::new(dets.len(), tracks.len(), cfg.max_cost);
    for (r, d) in dets.iter().enumerate() {
        for (k, t) in tracks.iter().enumerate() {
            let d_pos = ((d.position[0] - t.position[0]).powi(2) + (d.position[1] - t.position[1]).powi(2)).sqrt();
            // A side without appearance gets a neutral distance so costs stay
            // on one scale within an appearance-aware tracker.
            let d_app = appearance_available.then(|| {
                d.embedding
                    .as_ref()
                    .and_then(|e| gallery_min_distance(t.gallery, e))
                    .unwrap_or(cfg.neutral_distance())
            });
            c.set(r, k, cfg.pair_cost(d_app, d_pos));
        }
    }
    c
}

/// Minimum-cost perfect matching of a square `n × n` matrix (row-major).
/// Returns the column assigned to each row.
fn min_cost_square(n: usize, a: &[f64]) -> Vec<usize> {
    // Shortest augmenting paths with row/column potentials, 1-based inside.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = a[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Globally optimal assignment. Rectangular inputs are padded with
/// `max_cost`; pairs costing `max_cost` or more are reported unmatched.
pub fn hungarian_solve(c: &CostMatrix) -> Assignment {
    let n = c.rows.max(c.cols);
    let mut out = Assignment::default();
    if c.rows == 0 || c.cols == 0 {
        out.unmatched_detections = (0..c.rows).collect();
        out.unmatched_tracks = (0..c.cols).collect();
        return out;
    }
    let mut sq = vec![c.max_cost; n * n];
    for r in 0..c.rows {
        for k in 0..c.cols {
            sq[r * n + k] = c.get(r, k);
        }
    }
    let row_to_col = min_cost_square(n, &sq);
    let mut track_used = vec![false; c.cols];
    for (r, &k) in row_to_col.iter().enumerate().take(c.rows) {
        if k < c.cols && c.get(r, k) < c.max_cost {
            out.matches.push((r, k));
            track_used[k] = true;
        } else {
            out.unmatched_detections.push(r);
        }
    }
    out.unmatched_tracks = (0..c.cols).filter(|&k| !track_used[k]).collect();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::appearance::l2_normalize;
    use crate::detection::SensorKind;
    use approx::assert_abs_diff_eq;

    fn no_gate() -> AssociationConfig {
        AssociationConfig { position_gate: None, ..Default::default() }
    }

    #[test]
    fn weighted_sum() {
        assert_abs_diff_eq!(no_gate().pair_cost(Some(0.5), 2.0), 0.8, epsilon = 1e-12);
    }

    #[test]
    fn overrides() {
        let cfg = no_gate();
        assert_eq!(cfg.pair_cost(Some(cfg.thr_low / 2.0), 100.0), 0.0);
        assert_eq!(cfg.pair_cost(Some(cfg.thr_high * 2.0), 0.0), cfg.max_cost);
        assert_eq!(cfg.pair_cost(None, 2.5), 2.5);
        let gated = AssociationConfig::default();
        assert_eq!(gated.pair_cost(Some(0.0), 1.6), gated.max_cost);
    }

    #[test]
    fn small_matrices() {
        let big = 1e9;
        let a = hungarian_solve(&CostMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]], big));
        assert_eq!(a.matches, vec![(0, 0), (1, 1)]);
        let m = CostMatrix::from_rows(&[vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]], big);
        let a = hungarian_solve(&m);
        assert_eq!(a.matches, vec![(0, 1), (1, 0), (2, 2)]);
        assert_eq!(a.cost(&m), 5.0);
        let m = CostMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]], big);
        let a = hungarian_solve(&m);
        assert_eq!(a.matches, vec![(0, 1), (1, 0)]);
        assert_eq!(a.cost(&m), 4.0);
        assert_eq!(a.unmatched_tracks, vec![2]);
    }

    #[test]
    fn empty_and_forbidden() {
        let a = hungarian_solve(&CostMatrix::new(0, 3, 1e6));
        assert_eq!(a.unmatched_tracks, vec![0, 1, 2]);
        let a = hungarian_solve(&CostMatrix::new(2, 0, 1e6));
        assert_eq!(a.unmatched_detections, vec![0, 1]);
        let m = CostMatrix::from_rows(&[vec![1e6, 1e6], vec![1e6, 0.5]], 1e6);
        let a = hungarian_solve(&m);
        assert_eq!(a.matches, vec![(1, 1)]);
        assert_eq!(a.unmatched_detections, vec![0]);
        assert_eq!(a.unmatched_tracks, vec![0]);
    }

    #[test]
    fn cost_matrix_uses_gallery_minimum() {
        let e = |v: [f64; 3]| l2_normalize(&v).unwrap();
        let gallery = vec![e([0.0, 1.0, 0.0]), e([1.0, 0.0, 0.0])];
        let det = Detection {
            kind: SensorKind::Fused,
            position: [0.0, 0.0],
            ground: None,
            embedding: Some(e([1.0, 0.0, 0.0])),
        };
        let cue = TrackCue { position: [100.0, 0.0], gallery: &gallery };
        let c = build_cost_matrix(&[det.clone()], &[cue], &no_gate(), true);
        assert_eq!(c.get(0, 0), 0.0);
        let c = build_cost_matrix(&[det], &[cue], &no_gate(), false);
        assert_eq!(c.get(0, 0), 100.0);
    }
}
