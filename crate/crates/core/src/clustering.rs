//! DBSCAN over radar points in the ground plane.
//!
//! Distances use `(x, y)` only. A point is core when its closed
//! `eps`-neighbourhood (itself included) holds at least `min_pts` points.
//! Points are scanned in input order and each cluster is fully expanded
//! before the next one starts, so a border point reachable from several
//! clusters belongs to the one discovered first.

use serde::{Deserialize, Serialize};

use crate::detection::{Detection, SensorKind};
use crate::geometry::GroundPoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl RadarPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    fn dist2(&self, o: &RadarPoint) -> f64 {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        dx * dx + dy * dy
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub member_indices: Vec<usize>,
    pub centroid: GroundPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for DbscanParams {
    fn default() -> Self {
        Self { eps: 0.5, min_pts: 3 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Clustering {
    pub clusters: Vec<Cluster>,
    pub noise: Vec<usize>,
}

impl Clustering {
    /// Per-point cluster label, `None` for noise.
    pub fn labels(&self, n: usize) -> Vec<Option<usize>> {
        let mut labels = vec![None; n];
        for (c, cluster) in self.clusters.iter().enumerate() {
            for &i in &cluster.member_indices {
                labels[i] = Some(c);
            }
        }
        labels
    }
}

fn region_query(points: &[RadarPoint], idx: usize, eps2: f64, out: &mut Vec<usize>) {
    out.clear();
    let p = &points[idx];
    out.extend(
        points
            .iter()
            .enumerate()
            .filter(|(_, q)| p.dist2(q) <= eps2)
            .map(|(j, _)| j),
    );
}

pub fn dbscan(points: &[RadarPoint], params: DbscanParams) -> Clustering {
    assert!(params.eps > 0.0, "eps must be positive");
    assert!(params.min_pts >= 1, "min_pts must be at least 1");
    let n = points.len();
    let eps2 = params.eps * params.eps;
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut neighbours = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();

    for start in 0..n {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        region_query(points, start, eps2, &mut neighbours);
        if neighbours.len() < params.min_pts {
            continue;
        }
        let cid = members.len();
        members.push(Vec::new());
        label[start] = Some(cid);
        let mut queue: std::collections::VecDeque<usize> = neighbours.iter().copied().collect();
        while let Some(j) = queue.pop_front() {
            if label[j].is_none() {
                label[j] = Some(cid);
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            region_query(points, j, eps2, &mut neighbours);
            if neighbours.len() >= params.min_pts {
                queue.extend(neighbours.iter().copied());
            }
        }
    }

    let mut noise = Vec::new();
    for (i, l) in label.iter().enumerate() {
        match l {
            Some(c) => members[*c].push(i),
            None => noise.push(i),
        }
    }
    let clusters = members
        .into_iter()
        .map(|member_indices| {
            let k = member_indices.len() as f64;
            let (sx, sy) = member_indices
                .iter()
                .fold((0.0, 0.0), |(sx, sy), &i| (sx + points[i].x, sy + points[i].y));
            Cluster {
                member_indices,
                centroid: GroundPoint::new(sx / k, sy / k),
            }
        })
        .collect();
    Clustering { clusters, noise }
}

pub fn cluster_to_detection(c: &Cluster) -> Detection {
    Detection {
        kind: SensorKind::Radar,
        position: c.centroid.to_array(),
        ground: Some(c.centroid),
        embedding: None,
    }
}

pub fn radar_detections(points: &[RadarPoint], params: DbscanParams) -> Vec<Detection> {
    dbscan(points, params).clusters.iter().map(cluster_to_detection).collect()
}
