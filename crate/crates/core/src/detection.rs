use serde::{Deserialize, Serialize};

use crate::appearance::Embedding;
use crate::geometry::GroundPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Camera,
    Radar,
    Fused,
}

impl SensorKind {
    pub fn name(&self) -> &'static str {
        match self {
            SensorKind::Camera => "camera",
            SensorKind::Radar => "radar",
            SensorKind::Fused => "fused",
        }
    }
}

/// One single-frame observation. `position` is in the tracker's native
/// space: pixels (bbox bottom center) for the camera, BEV meters otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub kind: SensorKind,
    pub position: [f64; 2],
    pub ground: Option<GroundPoint>,
    pub embedding: Option<Embedding>,
}

impl Detection {
    pub fn bev(kind: SensorKind, g: GroundPoint, embedding: Option<Embedding>) -> Self {
        Self { kind, position: g.to_array(), ground: Some(g), embedding }
    }
}
