//! Constant-velocity Kalman filter over `(x, y, vx, vy)`.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanConfig {
    /// White-acceleration spectral density (units²/s³).
    pub q: f64,
    /// Measurement variance per axis (units²).
    pub r: f64,
    /// Initial velocity standard deviation (units/s).
    pub init_velocity_std: f64,
    /// Step used when timestamps do not advance.
    pub nominal_dt: f64,
}

impl KalmanConfig {
    pub fn bev() -> Self {
        Self { q: 2.0, r: 0.05, init_velocity_std: 1.5, nominal_dt: 0.1 }
    }

    pub fn pixel() -> Self {
        Self { q: 2000.0, r: 16.0, init_velocity_std: 60.0, nominal_dt: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub x: Vector4<f64>,
    pub p: Matrix4<f64>,
    pub q: f64,
    pub r: f64,
}

impl KalmanState {
    pub fn new(position: [f64; 2], cfg: &KalmanConfig) -> Self {
        let v2 = cfg.init_velocity_std * cfg.init_velocity_std;
        Self {
            x: Vector4::new(position[0], position[1], 0.0, 0.0),
            p: Matrix4::from_diagonal(&Vector4::new(cfg.r, cfg.r, v2, v2)),
            q: cfg.q,
            r: cfg.r,
        }
    }

    pub fn with_velocity(position: [f64; 2], velocity: [f64; 2], q: f64, r: f64) -> Self {
        Self {
            x: Vector4::new(position[0], position[1], velocity[0], velocity[1]),
            p: Matrix4::zeros(),
            q,
            r,
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x[0], self.x[1]]
    }
}

fn transition(dt: f64) -> Matrix4<f64> {
    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

fn process_noise(q: f64, dt: f64) -> Matrix4<f64> {
    let (dt2, dt3) = (dt * dt, dt * dt * dt);
    let mut m = Matrix4::zeros();
    for axis in 0..2 {
        let (p, v) = (axis, axis + 2);
        m[(p, p)] = dt3 / 3.0;
        m[(p, v)] = dt2 / 2.0;
        m[(v, p)] = dt2 / 2.0;
        m[(v, v)] = dt;
    }
    m * q
}

pub fn kalman_predict(s: &KalmanState, dt: f64) -> KalmanState {
    debug_assert!(dt > 0.0);
    let f = transition(dt);
    let p = f * s.p * f.transpose() + process_noise(s.q, dt);
    KalmanState { x: f * s.x, p: symmetrize(p), ..*s }
}

pub fn kalman_update(s: &KalmanState, z: [f64; 2]) -> KalmanState {
    let h = Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
    let r = Matrix2::identity() * s.r;
    let innovation = Vector2::new(z[0], z[1]) - h * s.x;
    let cov = h * s.p * h.transpose() + r;
    let Some(cov_inv) = cov.try_inverse() else {
        // Zero prior and zero measurement noise: nothing to weigh, trust the measurement.
        let mut x = s.x;
        x[0] = z[0];
        x[1] = z[1];
        return KalmanState { x, ..*s };
    };
    let gain = s.p * h.transpose() * cov_inv;
    let x = s.x + gain * innovation;
    // Joseph form keeps the covariance symmetric PSD.
    let i_kh = Matrix4::identity() - gain * h;
    let p = i_kh * s.p * i_kh.transpose() + gain * r * gain.transpose();
    KalmanState { x, p: symmetrize(p), ..*s }
}

fn symmetrize(p: Matrix4<f64>) -> Matrix4<f64> {
    (p + p.transpose()) * 0.5
}
