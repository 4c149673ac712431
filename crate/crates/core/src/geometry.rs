//! Pinhole camera geometry and inverse perspective mapping onto the ground plane.
//!
//! World frame: origin at the radar's vertical projection onto the ground,
//! `x` lateral (right), `y` depth (forward), `z` up; the ground is `z = 0`.
//! Camera frame: `x` right, `y` down, `z` along the optical axis.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point is behind the camera (depth {0})")]
    PointBehindCamera(f64),
    #[error("pixel ray does not intersect the ground in front of the sensor")]
    HorizonOrAbove,
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
}

/// Camera intrinsic parameters in pixel units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub u0: f64,
    pub v0: f64,
    #[serde(default)]
    pub gamma: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, u0: f64, v0: f64) -> Result<Self, GeometryError> {
        Self::with_skew(fx, fy, u0, v0, 0.0)
    }

    pub fn with_skew(fx: f64, fy: f64, u0: f64, v0: f64, gamma: f64) -> Result<Self, GeometryError> {
        let k = Self { fx, fy, u0, v0, gamma };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(GeometryError::InvalidIntrinsics("focal lengths must be positive"));
        }
        if ![self.u0, self.v0, self.gamma].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics("non-finite principal point or skew"));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, self.gamma, self.u0, 0.0, self.fy, self.v0, 0.0, 0.0, 1.0)
    }

    /// Back-projects a pixel to a camera-frame ray direction with unit `z`.
    pub fn unproject(&self, u: f64, v: f64) -> Vector3<f64> {
        // K is upper triangular; solve directly.
        let y = (v - self.v0) / self.fy;
        let x = (u - self.u0 - self.gamma * y) / self.fx;
        Vector3::new(x, y, 1.0)
    }
}

/// Rigid transform taking world points into the camera frame: `p_c = R p_w + T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtrinsicPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub height: f64,
    pub pitch: f64,
}

impl ExtrinsicPose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            height: 0.0,
            pitch: 0.0,
        }
    }

    /// Camera mounted at `(0, 0, height)` looking along world `+y`, pitched
    /// down by `pitch` radians.
    pub fn from_height_pitch(height: f64, pitch: f64) -> Self {
        let (s, c) = pitch.sin_cos();
        // Rows are the camera axes expressed in world coordinates.
        let rotation = Matrix3::new(1.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s);
        let center = Vector3::new(0.0, 0.0, height);
        Self {
            rotation,
            translation: -(rotation * center),
            height,
            pitch,
        }
    }

    pub fn transform(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn compose(&self, other: &ExtrinsicPose) -> ExtrinsicPose {
        // self ∘ other: first other, then self.
        ExtrinsicPose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
            height: self.height,
            pitch: self.pitch,
        }
    }

    pub fn is_orthonormal(&self, tol: f64) -> bool {
        let rtr = self.rotation.transpose() * self.rotation;
        (rtr - Matrix3::identity()).abs().max() <= tol && (self.rotation.determinant() - 1.0).abs() <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        debug_assert!(x_min <= x_max && y_min <= y_max);
        Self { x_min, y_min, x_max, y_max }
    }

    pub fn from_array(b: [f64; 4]) -> Self {
        Self::new(b[0], b[1], b[2], b[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// Fraction of `self`'s width covered horizontally by `other`.
    pub fn horizontal_overlap(&self, other: &BBox) -> f64 {
        let w = self.width();
        if w <= 0.0 {
            return 0.0;
        }
        let inter = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        (inter.max(0.0) / w).min(1.0)
    }
}

/// Bird's-eye-view position on the ground plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundPoint {
    pub x: f64,
    pub y: f64,
}

impl GroundPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &GroundPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// The same point as a 3D world point on the ground plane.
    pub fn lift(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, 0.0)
    }

    pub fn to_array(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Pixel position together with the projective scale (camera-frame depth).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub scale: f64,
}

/// Projects a 3D point through `s [u v 1]^T = K [R|T] [X Y Z 1]^T`.
pub fn project_radar_to_pixel(
    p: &Vector3<f64>,
    k: &CameraIntrinsics,
    pose: &ExtrinsicPose,
) -> Result<Projection, GeometryError> {
    let pc = pose.transform(p);
    let s = pc.z;
    if s <= 0.0 {
        return Err(GeometryError::PointBehindCamera(s));
    }
    let uvw = k.matrix() * pc;
    Ok(Projection {
        u: uvw.x / s,
        v: uvw.y / s,
        scale: s,
    })
}

pub fn ground_to_pixel(
    g: &GroundPoint,
    k: &CameraIntrinsics,
    pose: &ExtrinsicPose,
) -> Result<Projection, GeometryError> {
    project_radar_to_pixel(&g.lift(), k, pose)
}

pub fn bbox_bottom_center(b: &BBox) -> (f64, f64) {
    ((b.x_min + b.x_max) / 2.0, b.y_max)
}

/// Inverse perspective mapping: intersects the pixel's viewing ray with the
/// ground plane for a camera at `height` pitched down by `pitch`.
pub fn pixel_to_ground(
    u: f64,
    v: f64,
    k: &CameraIntrinsics,
    height: f64,
    pitch: f64,
) -> Result<GroundPoint, GeometryError> {
    let pose = ExtrinsicPose::from_height_pitch(height, pitch);
    pixel_to_ground_with_pose(u, v, k, &pose)
}

pub fn pixel_to_ground_with_pose(
    u: f64,
    v: f64,
    k: &CameraIntrinsics,
    pose: &ExtrinsicPose,
) -> Result<GroundPoint, GeometryError> {
    let ray_cam = k.unproject(u, v);
    let rt = pose.rotation.transpose();
    let ray_world = rt * ray_cam;
    let center = -(rt * pose.translation);
    // Ray must head down toward z = 0 from above it.
    if ray_world.z >= -1e-12 * ray_world.norm() || center.z <= 0.0 {
        return Err(GeometryError::HorizonOrAbove);
    }
    let t = -center.z / ray_world.z;
    let hit = center + ray_world * t;
    Ok(GroundPoint::new(hit.x, hit.y))
}

/// Calibration bundle used by the camera half of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub intrinsics: CameraIntrinsics,
    pub pose: ExtrinsicPose,
    pub image_width: f64,
    pub image_height: f64,
}

impl Calibration {
    pub fn new(intrinsics: CameraIntrinsics, height_m: f64, pitch_rad: f64) -> Self {
        Self {
            intrinsics,
            pose: ExtrinsicPose::from_height_pitch(height_m, pitch_rad),
            image_width: 2.0 * intrinsics.u0,
            image_height: 2.0 * intrinsics.v0,
        }
    }

    pub fn ground_to_pixel(&self, g: &GroundPoint) -> Result<(f64, f64), GeometryError> {
        ground_to_pixel(g, &self.intrinsics, &self.pose).map(|p| (p.u, p.v))
    }

    pub fn pixel_to_ground(&self, u: f64, v: f64) -> Result<GroundPoint, GeometryError> {
        pixel_to_ground_with_pose(u, v, &self.intrinsics, &self.pose)
    }

    pub fn contains_pixel(&self, u: f64, v: f64) -> bool {
        (0.0..=self.image_width).contains(&u) && (0.0..=self.image_height).contains(&v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn k500() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0).unwrap()
    }

    #[test]
    fn principal_point_projection() {
        let p = project_radar_to_pixel(&Vector3::new(0.0, 0.0, 5.0), &k500(), &ExtrinsicPose::identity()).unwrap();
        assert_eq!((p.u, p.v, p.scale), (320.0, 240.0, 5.0));
    }

    #[test]
    fn off_axis_projection() {
        let p = project_radar_to_pixel(&Vector3::new(1.0, 0.0, 5.0), &k500(), &ExtrinsicPose::identity()).unwrap();
        assert_abs_diff_eq!(p.u, 420.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.v, 240.0, epsilon = 1e-12);
    }

    #[test]
    fn behind_camera() {
        let r = project_radar_to_pixel(&Vector3::new(0.0, 0.0, -1.0), &k500(), &ExtrinsicPose::identity());
        assert!(matches!(r, Err(GeometryError::PointBehindCamera(_))));
    }

    #[test]
    fn bottom_center() {
        assert_eq!(bbox_bottom_center(&BBox::new(10.0, 20.0, 30.0, 60.0)), (20.0, 60.0));
        assert_eq!(bbox_bottom_center(&BBox::new(0.0, 0.0, 0.0, 0.0)), (0.0, 0.0));
        assert_eq!(bbox_bottom_center(&BBox::new(100.0, 50.0, 200.0, 180.0)), (150.0, 180.0));
    }

    #[test]
    fn principal_row_at_zero_pitch_is_horizon() {
        assert_eq!(pixel_to_ground(100.0, 240.0, &k500(), 1.635, 0.0), Err(GeometryError::HorizonOrAbove));
        assert_eq!(pixel_to_ground(320.0, 100.0, &k500(), 1.635, 0.0), Err(GeometryError::HorizonOrAbove));
    }

    #[test]
    fn ipm_matches_ray_plane_oracle() {
        // Ray below the optical axis by atan((v - v0)/fy), axis below horizontal by pitch.
        let h = 1.635;
        let pitch = 3.2_f64.to_radians();
        let depth_oracle = h / (pitch + (60.0_f64 / 500.0).atan()).tan();
        assert_abs_diff_eq!(depth_oracle, 9.232237538149766, epsilon = 1e-12);
        let g = pixel_to_ground(320.0, 300.0, &k500(), h, pitch).unwrap();
        assert_abs_diff_eq!(g.y, depth_oracle, epsilon = 1e-9);
        assert_abs_diff_eq!(g.x, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn depth_diverges_toward_horizon() {
        let k = k500();
        let pitch = 0.0;
        let mut last = 0.0;
        for dv in [50.0, 20.0, 5.0, 1.0, 0.1] {
            let g = pixel_to_ground(320.0, 240.0 + dv, &k, 1.5, pitch).unwrap();
            assert!(g.y > last);
            last = g.y;
        }
        assert!(last > 1000.0);
    }

    #[test]
    fn pitched_pose_is_a_rotation() {
        let a = ExtrinsicPose::from_height_pitch(1.6, 0.2);
        let b = ExtrinsicPose::from_height_pitch(0.3, -0.7);
        assert!(a.is_orthonormal(1e-12));
        let mut c = a;
        for _ in 0..100 {
            c = c.compose(&b);
        }
        assert!(c.is_orthonormal(1e-9));
    }

    proptest! {
        #[test]
        fn ground_pixel_ground_round_trip(
            x in -5.0..5.0f64, y in 2.0..40.0f64,
            height in 0.5..3.0f64, pitch_deg in 0.0..15.0f64,
            gamma in -2.0..2.0f64,
        ) {
            let k = CameraIntrinsics::with_skew(480.0, 510.0, 320.0, 240.0, gamma).unwrap();
            let pose = ExtrinsicPose::from_height_pitch(height, pitch_deg.to_radians());
            let g = GroundPoint::new(x, y);
            let px = ground_to_pixel(&g, &k, &pose).unwrap();
            let back = pixel_to_ground(px.u, px.v, &k, height, pitch_deg.to_radians()).unwrap();
            prop_assert!((back.x - x).abs() < 1e-6 && (back.y - y).abs() < 1e-6);
            let again = ground_to_pixel(&back, &k, &pose).unwrap();
            prop_assert!((again.u - px.u).abs() < 1e-6 && (again.v - px.v).abs() < 1e-6);
        }
    }
}
