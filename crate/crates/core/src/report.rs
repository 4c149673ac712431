//! Comparison tables over method variants and trajectory plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::detection::SensorKind;
use crate::fusion::{run_tri_tracker, FusionError, MotionSet};
use crate::io::{group_track_lines, IoError, SceneLogs, TrackLine};
use crate::metrics::{evaluate_sequence, time_key, ClearReport, GroundTruthFrame, MetricsError};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error("{tracker} tracker of variant {variant}: {source}")]
    Metrics { variant: String, tracker: &'static str, source: MetricsError },
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{path}: {source}")]
    Write { path: std::path::PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("writing to memory cannot fail");
    String::from_utf8(bytes).expect("csv is utf-8")
}

pub const TRACKERS: [SensorKind; 3] = [SensorKind::Camera, SensorKind::Radar, SensorKind::Fused];

#[derive(Debug, Clone)]
pub struct Variant {
    pub name: String,
    pub config: RunConfig,
    pub motion: MotionSet,
}

/// The four method variants: {Kalman, Bi-LSTM} motion × {position only,
/// position + appearance}. Bi-LSTM variants are skipped when no trained
/// models are supplied.
pub fn standard_variants(base: &RunConfig, kalman: &MotionSet, bilstm: Option<&MotionSet>) -> Vec<Variant> {
    let mut out = Vec::new();
    let mut add = |motion_name: &str, motion: &MotionSet| {
        for feat in [false, true] {
            let mut config = base.clone();
            config.match_mode.use_appearance = feat;
            let name = if feat { format!("{motion_name}+feat") } else { motion_name.to_string() };
            out.push(Variant { name, config, motion: motion.clone() });
        }
    };
    add("kalman", kalman);
    if let Some(b) = bilstm {
        add("bilstm", b);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub variant: String,
    pub tracker: String,
    pub fpr: f64,
    pub fnr: f64,
    pub idswr: f64,
    pub mota: f64,
    pub motp: f64,
}

impl ComparisonRow {
    fn new(variant: &str, tracker: SensorKind, r: &ClearReport) -> Self {
        Self {
            variant: variant.to_string(),
            tracker: tracker.name().to_string(),
            fpr: r.fpr,
            fnr: r.fnr,
            idswr: r.idswr,
            mota: r.mota,
            motp: r.motp,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub seed: Option<u64>,
    pub rows: Vec<ComparisonRow>,
}

/// Decimals used for every number in the CSV and text table.
const DECIMALS: usize = 4;

impl ComparisonTable {
    pub fn row(&self, variant: &str, tracker: SensorKind) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.variant == variant && r.tracker == tracker.name())
    }

    fn seed_header(&self) -> String {
        match self.seed {
            Some(s) => format!("# seed={s}"),
            None => "# seed=unknown".to_string(),
        }
    }

    fn cells(r: &ComparisonRow) -> [String; 7] {
        let f = |v: f64| format!("{v:.DECIMALS$}");
        [r.variant.clone(), r.tracker.clone(), f(r.fpr), f(r.fnr), f(r.idswr), f(r.mota), f(r.motp)]
    }

    const HEADER: [&'static str; 7] = ["variant", "tracker", "fpr", "fnr", "idswr", "mota", "motp"];

    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::HEADER)?;
        for r in &self.rows {
            w.write_record(Self::cells(r))?;
        }
        let body = finish(w);
        Ok(format!("{}\n{body}", self.seed_header()))
    }

    pub fn to_text(&self) -> String {
        let rows: Vec<[String; 7]> = self.rows.iter().map(Self::cells).collect();
        let mut width = Self::HEADER.map(str::len);
        for r in &rows {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = format!("{}\n", self.seed_header());
        let line = |cells: &[&str]| {
            cells
                .iter()
                .zip(width)
                .enumerate()
                .map(|(i, (c, w))| if i < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect::<Vec<_>>()
                .join("  ")
        };
        let _ = writeln!(out, "{}", line(&Self::HEADER));
        let _ = writeln!(out, "{}", "-".repeat(width.iter().sum::<usize>() + 2 * (width.len() - 1)));
        for r in &rows {
            let cells: Vec<&str> = r.iter().map(String::as_str).collect();
            let _ = writeln!(out, "{}", line(&cells));
        }
        out
    }
}

/// One full tri-tracker run and evaluation per variant, variants in parallel.
/// Rows follow variant order, then camera / radar / fused.
pub fn run_ablation(scene: &SceneLogs, variants: &[Variant]) -> Result<ComparisonTable, ReportError> {
    let per_variant: Vec<Result<Vec<ComparisonRow>, ReportError>> = variants
        .par_iter()
        .map(|v| {
            let pipeline = v.config.pipeline();
            let run = run_tri_tracker(&scene.camera, &scene.radar, &pipeline, &v.motion)?;
            TRACKERS
                .iter()
                .map(|&k| {
                    let r = evaluate_sequence(&scene.gt, run.series(k), v.config.metrics.gate_m, v.config.metrics.motp_denominator)
                        .map_err(|source| ReportError::Metrics { variant: v.name.clone(), tracker: k.name(), source })?;
                    Ok(ComparisonRow::new(&v.name, k, &r))
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_variant {
        rows.extend(r?);
    }
    Ok(ComparisonTable { seed: scene.spec.map(|s| s.seed), rows })
}

/// Tracks of one panel, e.g. all lines of `fused.jsonl`.
#[derive(Debug, Clone)]
pub struct PlotPanel {
    pub name: String,
    pub tracks: Vec<TrackLine>,
}

/// Per ground-truth object and panel: runs of frames with no track point
/// within `gate`, and the worst distance to the nearest point otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub panel: String,
    pub gt_id: u64,
    pub gap_runs: usize,
    pub gap_frames: usize,
    pub max_deviation_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotArtifacts {
    pub svg: String,
    pub points_csv: String,
    pub gaps_csv: String,
    pub gaps: Vec<GapRow>,
}

impl PlotArtifacts {
    /// Total gap runs of one panel.
    pub fn gap_count(&self, panel: &str) -> usize {
        self.gaps.iter().filter(|g| g.panel == panel).map(|g| g.gap_runs).sum()
    }

    pub fn write(&self, dir: &Path) -> Result<(), ReportError> {
        std::fs::create_dir_all(dir).map_err(|source| ReportError::Write { path: dir.into(), source })?;
        for (name, text) in [
            ("trajectories.svg", &self.svg),
            ("trajectories.csv", &self.points_csv),
            ("gaps.csv", &self.gaps_csv),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|source| ReportError::Write { path, source })?;
        }
        Ok(())
    }
}

fn gap_rows(panel: &PlotPanel, gt: &[GroundTruthFrame], gate: f64) -> Vec<GapRow> {
    let frames = group_track_lines(&panel.tracks);
    let by_time: BTreeMap<i64, usize> = frames.iter().enumerate().map(|(i, (t, _))| (time_key(*t), i)).collect();
    let mut per_id: BTreeMap<u64, GapRow> = BTreeMap::new();
    let mut in_gap: BTreeMap<u64, bool> = BTreeMap::new();
    for g in gt {
        let recs = by_time.get(&time_key(g.t)).map(|&i| frames[i].1.as_slice()).unwrap_or(&[]);
        for o in &g.objects {
            let nearest = recs
                .iter()
                .map(|r| ((r.x - o.x).powi(2) + (r.y - o.y).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            let row = per_id.entry(o.id).or_insert_with(|| GapRow {
                panel: panel.name.clone(),
                gt_id: o.id,
                gap_runs: 0,
                gap_frames: 0,
                max_deviation_m: 0.0,
            });
            let gap = in_gap.entry(o.id).or_insert(false);
            if nearest <= gate {
                row.max_deviation_m = row.max_deviation_m.max(nearest);
                *gap = false;
            } else {
                if !*gap {
                    row.gap_runs += 1;
                }
                row.gap_frames += 1;
                *gap = true;
            }
        }
    }
    per_id.into_values().collect()
}

const COLORS: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Splits one id's points wherever consecutive samples are more than
/// 1.5 frame intervals apart.
fn segments(points: &[(f64, f64, f64)], dt: f64) -> Vec<Vec<(f64, f64)>> {
    let mut out: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for &(t, x, y) in points {
        if t - last_t > 1.5 * dt || out.is_empty() {
            out.push(Vec::new());
        }
        out.last_mut().unwrap().push((x, y));
        last_t = t;
    }
    out
}

/// One panel per tracker with the ground truth drawn underneath. The CSV of
/// every plotted point is the artifact of record; the SVG is derived from it.
pub fn emit_trajectory_plot(panels: &[PlotPanel], gt: &[GroundTruthFrame], gate: f64) -> Result<PlotArtifacts, ReportError> {
    let dt = if gt.len() >= 2 { gt[1].t - gt[0].t } else { 0.1 };

    // Points grouped by (source, id), in time order.
    let mut gt_series: BTreeMap<u64, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for f in gt {
        for o in &f.objects {
            gt_series.entry(o.id).or_default().push((f.t, o.x, o.y));
        }
    }
    let panel_series: Vec<BTreeMap<u64, Vec<(f64, f64, f64)>>> = panels
        .iter()
        .map(|p| {
            let mut m: BTreeMap<u64, Vec<(f64, f64, f64)>> = BTreeMap::new();
            for l in &p.tracks {
                m.entry(l.id).or_default().push((l.t, l.x, l.y));
            }
            for v in m.values_mut() {
                v.sort_by(|a, b| a.0.total_cmp(&b.0));
            }
            m
        })
        .collect();

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["panel", "kind", "id", "t", "x", "y"])?;
    for (p, series) in panels.iter().zip(&panel_series) {
        for (id, pts) in &gt_series {
            for (t, x, y) in pts {
                w.write_record([p.name.clone(), "gt".into(), id.to_string(), t.to_string(), x.to_string(), y.to_string()])?;
            }
        }
        for (id, pts) in series {
            for (t, x, y) in pts {
                w.write_record([p.name.clone(), "track".into(), id.to_string(), t.to_string(), x.to_string(), y.to_string()])?;
            }
        }
    }
    let points_csv = finish(w);

    let gaps: Vec<GapRow> = panels.iter().flat_map(|p| gap_rows(p, gt, gate)).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    for g in &gaps {
        w.serialize(g)?;
    }
    let gaps_csv = finish(w);

    // Shared axis range over everything drawn.
    let all = gt_series.values().flatten().chain(panel_series.iter().flat_map(|m| m.values().flatten()));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(_, x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (-1.0, 1.0, 0.0, 1.0);
    }
    let pad = 0.5;
    let (x0, x1, y0, y1) = (x0 - pad, x1 + pad, y0 - pad, y1 + pad);
    let (pw, ph, margin) = (300.0, 300.0, 30.0);
    let sx = |x: f64| margin + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| margin + ph - (y - y0) / (y1 - y0) * ph;
    let width = panels.len().max(1) as f64 * (pw + 2.0 * margin);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{}" font-family="sans-serif" font-size="12">"#,
        ph + 2.0 * margin
    );
    let polyline = |svg: &mut String, pts: &[(f64, f64)], color: &str, stroke: f64| {
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            svg,
            r#"    <polyline points="{}" fill="none" stroke="{color}" stroke-width="{stroke}"/>"#,
            coords.join(" ")
        );
    };
    for (i, (p, series)) in panels.iter().zip(&panel_series).enumerate() {
        let off = i as f64 * (pw + 2.0 * margin);
        let _ = writeln!(svg, r#"  <g transform="translate({off},0)">"#);
        let _ = writeln!(
            svg,
            r##"    <rect x="{margin}" y="{margin}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>"##
        );
        let _ = writeln!(svg, r#"    <text x="{}" y="{}" text-anchor="middle">{}</text>"#, margin + pw / 2.0, margin - 10.0, p.name);
        for pts in gt_series.values() {
            for seg in segments(pts, dt) {
                polyline(&mut svg, &seg, "#bbbbbb", 4.0);
            }
        }
        for (k, pts) in series.values().enumerate() {
            for seg in segments(pts, dt) {
                polyline(&mut svg, &seg, COLORS[k % COLORS.len()], 1.5);
            }
        }
        let _ = writeln!(svg, "  </g>");
    }
    svg.push_str("</svg>\n");

    Ok(PlotArtifacts { svg, points_csv, gaps_csv, gaps })
}

/// Writes a table as `<stem>.csv` and `<stem>.txt` into `dir`.
pub fn write_table(table: &ComparisonTable, dir: &Path, stem: &str) -> Result<(), ReportError> {
    std::fs::create_dir_all(dir).map_err(|source| ReportError::Write { path: dir.into(), source })?;
    for (ext, text) in [("csv", table.to_csv()?), ("txt", table.to_text())] {
        let path = dir.join(format!("{stem}.{ext}"));
        std::fs::write(&path, text).map_err(|source| ReportError::Write { path, source })?;
    }
    Ok(())
}
