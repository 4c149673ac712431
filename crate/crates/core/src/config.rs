//! Run configuration: a TOML file with dotted sections.
//!
//! Every key is checked against a fixed schema. Unknown keys are rejected
//! with a spelling suggestion, values are type- and range-checked, and the
//! fully resolved config (defaults included) can be dumped back to TOML.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::{Table, Value};

use crate::association::AssociationConfig;
use crate::clustering::DbscanParams;
use crate::fusion::{MotionSet, PipelineConfig};
use crate::geometry::{Calibration, CameraIntrinsics};
use crate::metrics::MotpDenominator;
use crate::motion::{BiLstmPredictor, KalmanConfig, MotionModel};
use crate::track::TrackConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: invalid TOML: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("missing required key `{key}`")]
    MissingKey { key: String },
    #[error("unknown key `{key}`{}", suggestion.as_ref().map(|s| format!(" (did you mean `{s}`?)")).unwrap_or_default())]
    UnknownKey { key: String, suggestion: Option<String> },
    #[error("`{key}`: expected {expected}, found {found}")]
    TypeMismatch { key: String, expected: &'static str, found: String },
    #[error("`{key}`: {reason}")]
    OutOfRange { key: String, reason: String },
    #[error("`{key}`: file {path} does not exist")]
    MissingFile { key: String, path: PathBuf },
    #[error("`{key}`: {reason}")]
    InvalidFile { key: String, reason: String },
}

impl ConfigError {
    /// Dotted key the error refers to, if any.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::MissingKey { key }
            | ConfigError::UnknownKey { key, .. }
            | ConfigError::TypeMismatch { key, .. }
            | ConfigError::OutOfRange { key, .. }
            | ConfigError::MissingFile { key, .. }
            | ConfigError::InvalidFile { key, .. } => Some(key),
            _ => None,
        }
    }
}

/// Every accepted key.
pub const KNOWN_KEYS: &[&str] = &[
    "calibration.fx",
    "calibration.fy",
    "calibration.u0",
    "calibration.v0",
    "calibration.gamma",
    "calibration.height_m",
    "calibration.pitch_deg",
    "calibration.image_width",
    "calibration.image_height",
    "dbscan.eps_m",
    "dbscan.min_pts",
    "assoc.w",
    "assoc.thr_low",
    "assoc.thr_high",
    "assoc.gate_bev_m",
    "assoc.gate_px",
    "assoc.pos_scale_px",
    "assoc.max_cost",
    "track.max_invisible",
    "track.min_visibility_pct",
    "track.reliable_after",
    "track.gallery_size",
    "track.min_age_for_score",
    "motion.model",
    "motion.bev_params",
    "motion.pixel_params",
    "fusion.gate_m",
    "fusion.max_skew_s",
    "metrics.gate_m",
    "metrics.motp_denominator",
    "match_mode.use_appearance",
];

const REQUIRED_KEYS: &[&str] = &[
    "calibration.fx",
    "calibration.fy",
    "calibration.u0",
    "calibration.v0",
    "calibration.height_m",
    "calibration.pitch_deg",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSection {
    pub fx: f64,
    pub fy: f64,
    pub u0: f64,
    pub v0: f64,
    pub gamma: f64,
    pub height_m: f64,
    pub pitch_deg: f64,
    pub image_width: f64,
    pub image_height: f64,
}

impl CalibrationSection {
    pub fn to_calibration(&self) -> Calibration {
        let k = CameraIntrinsics { fx: self.fx, fy: self.fy, u0: self.u0, v0: self.v0, gamma: self.gamma };
        let mut c = Calibration::new(k, self.height_m, self.pitch_deg.to_radians());
        c.image_width = self.image_width;
        c.image_height = self.image_height;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbscanSection {
    pub eps_m: f64,
    pub min_pts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssocSection {
    pub w: f64,
    pub thr_low: f64,
    pub thr_high: f64,
    pub gate_bev_m: f64,
    pub gate_px: f64,
    pub pos_scale_px: f64,
    pub max_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSection {
    pub max_invisible: u32,
    pub min_visibility_pct: f64,
    pub reliable_after: u32,
    pub gallery_size: usize,
    pub min_age_for_score: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionKind {
    Kalman,
    Bilstm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionSection {
    pub model: MotionKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bev_params: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pixel_params: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionSection {
    pub gate_m: f64,
    pub max_skew_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSection {
    pub gate_m: f64,
    pub motp_denominator: MotpDenominator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchMode {
    pub use_appearance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub calibration: CalibrationSection,
    pub dbscan: DbscanSection,
    pub assoc: AssocSection,
    pub track: TrackSection,
    pub motion: MotionSection,
    pub fusion: FusionSection,
    pub metrics: MetricsSection,
    pub match_mode: MatchMode,
}

impl Default for RunConfig {
    /// The simulator's camera plus every documented default.
    fn default() -> Self {
        let cal = crate::sim::default_calibration();
        let db = DbscanParams::default();
        let bev = AssociationConfig::default();
        let p = PipelineConfig::default();
        let tr = TrackConfig::default();
        Self {
            calibration: CalibrationSection {
                fx: cal.intrinsics.fx,
                fy: cal.intrinsics.fy,
                u0: cal.intrinsics.u0,
                v0: cal.intrinsics.v0,
                gamma: cal.intrinsics.gamma,
                height_m: crate::sim::CAMERA_HEIGHT_M,
                pitch_deg: crate::sim::CAMERA_PITCH_DEG,
                image_width: cal.image_width,
                image_height: cal.image_height,
            },
            dbscan: DbscanSection { eps_m: db.eps, min_pts: db.min_pts },
            assoc: AssocSection {
                w: bev.w,
                thr_low: bev.thr_low,
                thr_high: bev.thr_high,
                gate_bev_m: bev.position_gate.unwrap_or(f64::INFINITY),
                gate_px: p.assoc_px.position_gate.unwrap_or(f64::INFINITY),
                pos_scale_px: p.assoc_px.position_scale,
                max_cost: bev.max_cost,
            },
            track: TrackSection {
                max_invisible: tr.max_invisible,
                min_visibility_pct: tr.min_visibility_pct,
                reliable_after: tr.reliable_after,
                gallery_size: tr.gallery_size,
                min_age_for_score: tr.min_age_for_score,
            },
            motion: MotionSection { model: MotionKind::Kalman, bev_params: None, pixel_params: None },
            fusion: FusionSection { gate_m: p.fusion_gate_m, max_skew_s: p.max_skew_s },
            metrics: MetricsSection { gate_m: 1.0, motp_denominator: MotpDenominator::Gt },
            match_mode: MatchMode { use_appearance: p.use_appearance },
        }
    }
}

impl RunConfig {
    pub fn pipeline(&self) -> PipelineConfig {
        let assoc = |gate: f64, scale: f64| AssociationConfig {
            w: self.assoc.w,
            thr_low: self.assoc.thr_low,
            thr_high: self.assoc.thr_high,
            max_cost: self.assoc.max_cost,
            position_gate: Some(gate),
            position_scale: scale,
        };
        PipelineConfig {
            calibration: Some(self.calibration.to_calibration()),
            dbscan: DbscanParams { eps: self.dbscan.eps_m, min_pts: self.dbscan.min_pts },
            assoc_bev: assoc(self.assoc.gate_bev_m, 1.0),
            assoc_px: assoc(self.assoc.gate_px, self.assoc.pos_scale_px),
            track: TrackConfig {
                max_invisible: self.track.max_invisible,
                min_visibility_pct: self.track.min_visibility_pct,
                reliable_after: self.track.reliable_after,
                gallery_size: self.track.gallery_size,
                min_age_for_score: self.track.min_age_for_score,
            },
            fusion_gate_m: self.fusion.gate_m,
            max_skew_s: self.fusion.max_skew_s,
            use_appearance: self.match_mode.use_appearance,
        }
    }

    /// Loads the configured motion models; Bi-LSTM parameter files are read here.
    pub fn motion_set(&self) -> Result<MotionSet, ConfigError> {
        match self.motion.model {
            MotionKind::Kalman => Ok(MotionSet {
                pixel: MotionModel::ConstantVelocity(KalmanConfig::pixel()),
                bev: MotionModel::ConstantVelocity(KalmanConfig::bev()),
            }),
            MotionKind::Bilstm => {
                let load = |key: &str, p: &Option<PathBuf>| -> Result<MotionModel, ConfigError> {
                    let path = p.as_ref().ok_or_else(|| ConfigError::MissingKey { key: key.into() })?;
                    let pred = BiLstmPredictor::load(path)
                        .map_err(|e| ConfigError::InvalidFile { key: key.into(), reason: e.to_string() })?;
                    Ok(MotionModel::BiLstm(Arc::new(pred)))
                };
                Ok(MotionSet {
                    pixel: load("motion.pixel_params", &self.motion.pixel_params)?,
                    bev: load("motion.bev_params", &self.motion.bev_params)?,
                })
            }
        }
    }

    /// Resolved config as TOML, every default spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let range = |key: &str, ok: bool, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange { key: key.into(), reason: reason.into() })
            }
        };
        let c = &self.calibration;
        range("calibration.fx", c.fx > 0.0 && c.fx.is_finite(), "must be positive")?;
        range("calibration.fy", c.fy > 0.0 && c.fy.is_finite(), "must be positive")?;
        range("calibration.height_m", c.height_m > 0.0, "must be positive")?;
        range("calibration.pitch_deg", c.pitch_deg.abs() < 90.0, "must lie in (-90, 90)")?;
        range("calibration.image_width", c.image_width > 0.0, "must be positive")?;
        range("calibration.image_height", c.image_height > 0.0, "must be positive")?;
        range("dbscan.eps_m", self.dbscan.eps_m > 0.0, "must be positive")?;
        range("dbscan.min_pts", self.dbscan.min_pts >= 1, "must be at least 1")?;
        let a = &self.assoc;
        range("assoc.w", (0.0..=1.0).contains(&a.w), "must lie in [0, 1]")?;
        range("assoc.thr_low", a.thr_low >= 0.0, "must be non-negative")?;
        range("assoc.thr_high", a.thr_high > a.thr_low, "must exceed assoc.thr_low")?;
        range("assoc.gate_bev_m", a.gate_bev_m > 0.0, "must be positive")?;
        range("assoc.gate_px", a.gate_px > 0.0, "must be positive")?;
        range("assoc.pos_scale_px", a.pos_scale_px > 0.0, "must be positive")?;
        range("assoc.max_cost", a.max_cost > 2.0 && a.max_cost.is_finite(), "must be a finite value above 2")?;
        let t = &self.track;
        range("track.max_invisible", t.max_invisible >= 1, "must be at least 1")?;
        range("track.min_visibility_pct", (0.0..=100.0).contains(&t.min_visibility_pct), "must lie in [0, 100]")?;
        range("track.gallery_size", t.gallery_size >= 1, "must be at least 1")?;
        range("fusion.gate_m", self.fusion.gate_m > 0.0, "must be positive")?;
        range("fusion.max_skew_s", self.fusion.max_skew_s >= 0.0, "must be non-negative")?;
        range("metrics.gate_m", self.metrics.gate_m > 0.0, "must be positive")?;
        if self.motion.model == MotionKind::Bilstm {
            for (key, p) in [("motion.bev_params", &self.motion.bev_params), ("motion.pixel_params", &self.motion.pixel_params)] {
                match p {
                    None => return Err(ConfigError::MissingKey { key: key.into() }),
                    Some(p) if !p.is_file() => return Err(ConfigError::MissingFile { key: key.into(), path: p.clone() }),
                    Some(_) => {}
                }
            }
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base).map_err(|e| match e {
        ConfigError::Parse { msg, .. } => ConfigError::Parse { path: path.into(), msg },
        other => other,
    })
}

/// Parses config text; relative file paths resolve against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse {
        path: PathBuf::from("<config>"),
        msg: e.message().to_string(),
    })?;
    let mut leaves = Vec::new();
    flatten("", &table, &mut leaves)?;
    for (key, _) in &leaves {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey { key: key.clone(), suggestion: suggest(key) });
        }
    }
    for key in REQUIRED_KEYS {
        if !leaves.iter().any(|(k, _)| k == key) {
            return Err(ConfigError::MissingKey { key: (*key).into() });
        }
    }
    let get = |key: &str| leaves.iter().find(|(k, _)| k == key).map(|(_, v)| *v);

    let mut cfg = RunConfig::default();
    macro_rules! set {
        ($key:literal, $field:expr, $conv:ident) => {
            if let Some(v) = get($key) {
                $field = $conv($key, v)?;
            }
        };
    }
    let c = &mut cfg.calibration;
    set!("calibration.fx", c.fx, as_f64);
    set!("calibration.fy", c.fy, as_f64);
    set!("calibration.u0", c.u0, as_f64);
    set!("calibration.v0", c.v0, as_f64);
    set!("calibration.gamma", c.gamma, as_f64);
    set!("calibration.height_m", c.height_m, as_f64);
    set!("calibration.pitch_deg", c.pitch_deg, as_f64);
    // Image size follows the principal point unless given.
    c.image_width = 2.0 * c.u0;
    c.image_height = 2.0 * c.v0;
    set!("calibration.image_width", c.image_width, as_f64);
    set!("calibration.image_height", c.image_height, as_f64);
    set!("dbscan.eps_m", cfg.dbscan.eps_m, as_f64);
    set!("dbscan.min_pts", cfg.dbscan.min_pts, as_usize);
    let a = &mut cfg.assoc;
    set!("assoc.w", a.w, as_f64);
    set!("assoc.thr_low", a.thr_low, as_f64);
    set!("assoc.thr_high", a.thr_high, as_f64);
    set!("assoc.gate_bev_m", a.gate_bev_m, as_f64);
    set!("assoc.gate_px", a.gate_px, as_f64);
    set!("assoc.pos_scale_px", a.pos_scale_px, as_f64);
    set!("assoc.max_cost", a.max_cost, as_f64);
    let t = &mut cfg.track;
    set!("track.max_invisible", t.max_invisible, as_u32);
    set!("track.min_visibility_pct", t.min_visibility_pct, as_f64);
    set!("track.reliable_after", t.reliable_after, as_u32);
    set!("track.gallery_size", t.gallery_size, as_usize);
    set!("track.min_age_for_score", t.min_age_for_score, as_u32);
    if let Some(v) = get("motion.model") {
        cfg.motion.model = match as_str("motion.model", v)? {
            "kalman" => MotionKind::Kalman,
            "bilstm" => MotionKind::Bilstm,
            other => {
                return Err(ConfigError::OutOfRange {
                    key: "motion.model".into(),
                    reason: format!("must be \"kalman\" or \"bilstm\", got \"{other}\""),
                })
            }
        };
    }
    for (key, slot) in [("motion.bev_params", &mut cfg.motion.bev_params), ("motion.pixel_params", &mut cfg.motion.pixel_params)] {
        if let Some(v) = get(key) {
            let p = Path::new(as_str(key, v)?);
            let full = if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
            if !full.is_file() {
                return Err(ConfigError::MissingFile { key: key.into(), path: full });
            }
            *slot = Some(full);
        }
    }
    set!("fusion.gate_m", cfg.fusion.gate_m, as_f64);
    set!("fusion.max_skew_s", cfg.fusion.max_skew_s, as_f64);
    set!("metrics.gate_m", cfg.metrics.gate_m, as_f64);
    if let Some(v) = get("metrics.motp_denominator") {
        cfg.metrics.motp_denominator = match as_str("metrics.motp_denominator", v)? {
            "gt" => MotpDenominator::Gt,
            "matches" => MotpDenominator::Matches,
            other => {
                return Err(ConfigError::OutOfRange {
                    key: "metrics.motp_denominator".into(),
                    reason: format!("must be \"gt\" or \"matches\", got \"{other}\""),
                })
            }
        };
    }
    set!("match_mode.use_appearance", cfg.match_mode.use_appearance, as_bool);
    cfg.validate()?;
    Ok(cfg)
}

fn flatten<'a>(prefix: &str, table: &'a Table, out: &mut Vec<(String, &'a Value)>) -> Result<(), ConfigError> {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out)?,
            _ if prefix.is_empty() => {
                // Top-level scalars are either misplaced section names or unknown.
                if KNOWN_KEYS.iter().any(|known| known.starts_with(&format!("{key}."))) {
                    return Err(ConfigError::TypeMismatch { key, expected: "a table", found: type_name(v) });
                }
                out.push((key, v));
            }
            _ => out.push((key, v)),
        }
    }
    Ok(())
}

fn suggest(key: &str) -> Option<String> {
    KNOWN_KEYS
        .iter()
        .map(|k| (strsim::levenshtein(key, k), *k))
        .min()
        .filter(|(d, _)| *d <= 3)
        .map(|(_, k)| k.to_string())
}

fn type_name(v: &Value) -> String {
    v.type_str().to_string()
}

fn as_f64(key: &str, v: &Value) -> Result<f64, ConfigError> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(ConfigError::TypeMismatch { key: key.into(), expected: "a number", found: type_name(v) }),
    }
}

fn as_u64(key: &str, v: &Value) -> Result<u64, ConfigError> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        Value::Integer(_) => Err(ConfigError::OutOfRange { key: key.into(), reason: "must be non-negative".into() }),
        _ => Err(ConfigError::TypeMismatch { key: key.into(), expected: "an integer", found: type_name(v) }),
    }
}

fn as_usize(key: &str, v: &Value) -> Result<usize, ConfigError> {
    usize::try_from(as_u64(key, v)?).map_err(|_| ConfigError::OutOfRange { key: key.into(), reason: "too large".into() })
}

fn as_u32(key: &str, v: &Value) -> Result<u32, ConfigError> {
    u32::try_from(as_u64(key, v)?).map_err(|_| ConfigError::OutOfRange { key: key.into(), reason: "too large".into() })
}

fn as_bool(key: &str, v: &Value) -> Result<bool, ConfigError> {
    v.as_bool().ok_or_else(|| ConfigError::TypeMismatch { key: key.into(), expected: "a boolean", found: type_name(v) })
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str, ConfigError> {
    v.as_str().ok_or_else(|| ConfigError::TypeMismatch { key: key.into(), expected: "a string", found: type_name(v) })
}
