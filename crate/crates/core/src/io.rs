//! JSONL log formats: one JSON object per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{time_key, GroundTruthFrame};
use crate::sim::{ScenarioSpec, Scene};
use crate::track::TrackRecord;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraDetRecord {
    pub bbox: [f64; 4],
    pub emb: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraFrame {
    pub t: f64,
    pub dets: Vec<CameraDetRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarFrame {
    pub t: f64,
    pub points: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackLine {
    pub t: f64,
    pub id: u64,
    pub x: f64,
    pub y: f64,
    pub source: String,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for it in items {
        let line = serde_json::to_string(it).expect("log records serialize");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Blank lines are skipped; errors carry the 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let r = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line).map_err(|e| IoError::Parse {
            path: path.to_path_buf(),
            line: k + 1,
            msg: e.to_string(),
        })?;
        out.push(v);
    }
    Ok(out)
}

/// Flattens per-frame records into output lines.
pub fn track_lines(frames: &[(f64, Vec<TrackRecord>)], source: &str) -> Vec<TrackLine> {
    frames
        .iter()
        .flat_map(|(t, recs)| {
            recs.iter().map(move |r| TrackLine { t: *t, id: r.id, x: r.x, y: r.y, source: source.to_string() })
        })
        .collect()
}

/// Groups lines back into frames, ordered by time.
pub fn group_track_lines(lines: &[TrackLine]) -> Vec<(f64, Vec<TrackRecord>)> {
    let mut map: std::collections::BTreeMap<i64, (f64, Vec<TrackRecord>)> = Default::default();
    for l in lines {
        map.entry(time_key(l.t))
            .or_insert_with(|| (l.t, Vec::new()))
            .1
            .push(TrackRecord { id: l.id, x: l.x, y: l.y });
    }
    map.into_values().collect()
}

pub const GT_FILE: &str = "gt.jsonl";
pub const CAMERA_FILE: &str = "cam.jsonl";
pub const RADAR_FILE: &str = "radar.jsonl";
pub const EMBEDDINGS_FILE: &str = "embeddings.json";
pub const SCENE_FILE: &str = "scene.json";

/// Logs of one scene directory.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneLogs {
    /// Present when the directory was written by the simulator.
    pub spec: Option<ScenarioSpec>,
    pub gt: Vec<GroundTruthFrame>,
    pub camera: Vec<CameraFrame>,
    pub radar: Vec<RadarFrame>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| IoError::Parse { path: path.to_path_buf(), line: e.line(), msg: e.to_string() })
}

/// Writes gt, both sensor logs, identity embeddings and the scenario spec.
pub fn write_scene(scene: &Scene, dir: &Path) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_jsonl(&dir.join(GT_FILE), &scene.gt)?;
    write_jsonl(&dir.join(CAMERA_FILE), &scene.camera)?;
    write_jsonl(&dir.join(RADAR_FILE), &scene.radar)?;
    write_json(&dir.join(EMBEDDINGS_FILE), &scene.identities)?;
    write_json(&dir.join(SCENE_FILE), &scene.spec)
}

pub fn load_scene(dir: &Path) -> Result<SceneLogs, IoError> {
    let spec_path = dir.join(SCENE_FILE);
    let spec = if spec_path.is_file() { Some(read_json(&spec_path)?) } else { None };
    Ok(SceneLogs {
        spec,
        gt: read_jsonl(&dir.join(GT_FILE))?,
        camera: read_jsonl(&dir.join(CAMERA_FILE))?,
        radar: read_jsonl(&dir.join(RADAR_FILE))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let frames = vec![
            RadarFrame { t: 0.1, points: vec![[0.1 + 0.2, 1.0 / 3.0, -2.5e-17]] },
            RadarFrame { t: 0.2, points: vec![] },
        ];
        write_jsonl(&path, &frames).unwrap();
        let back: Vec<RadarFrame> = read_jsonl(&path).unwrap();
        assert_eq!(back, frames);
    }

    #[test]
    fn parse_error_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"t\":0.0,\"points\":[]}\n\n{\"t\":oops}\n").unwrap();
        match read_jsonl::<RadarFrame>(&path) {
            Err(IoError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn track_lines_regroup() {
        let frames = vec![
            (0.0, vec![TrackRecord { id: 1, x: 0.0, y: 1.0 }, TrackRecord { id: 2, x: 3.0, y: 4.0 }]),
            (0.1, vec![TrackRecord { id: 1, x: 0.5, y: 1.0 }]),
        ];
        let lines = track_lines(&frames, "fused");
        assert_eq!(lines.len(), 3);
        assert_eq!(group_track_lines(&lines), frames);
    }

    #[test]
    fn scene_directory_round_trip() {
        let calib = crate::sim::default_calibration();
        let spec = ScenarioSpec::new(crate::sim::Template::FreePair, 20, 3);
        let scene = crate::sim::simulate(&spec, &crate::sim::SensorNoiseModel::default(), &calib).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_scene(&scene, dir.path()).unwrap();
        let logs = load_scene(dir.path()).unwrap();
        assert_eq!(logs.spec, Some(spec));
        assert_eq!(logs.gt, scene.gt);
        assert_eq!(logs.camera, scene.camera);
        assert_eq!(logs.radar, scene.radar);
        let ids: Vec<crate::appearance::Embedding> = read_json(&dir.path().join(EMBEDDINGS_FILE)).unwrap();
        assert_eq!(ids, scene.identities);
    }
}
