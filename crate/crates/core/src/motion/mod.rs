//! Motion predictors: a constant-velocity Kalman baseline and a
//! bidirectional LSTM over short position windows.

mod kalman;
mod lstm;

pub use kalman::{kalman_predict, kalman_update, KalmanConfig, KalmanState};
pub use lstm::{
    bilstm_features, bilstm_forward, loss_and_grad, lstm_cell_step, window_loss, LstmDirection,
    LstmParams,
};

use std::collections::VecDeque;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Adam;

pub const DEFAULT_WINDOW: usize = 3;

#[derive(Debug, Error)]
pub enum MotionError {
    #[error("no trajectory long enough to form a training window")]
    EmptyDataset,
    #[error("ground truth has zero variance")]
    DegenerateTruth,
    #[error("prediction/truth length mismatch or fewer than 2 samples ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("invalid motion parameters: {0}")]
    InvalidParams(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed parameter file: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub rmse: f64,
    pub mae: f64,
    pub r_squared: f64,
}

/// RMSE and MAE over all coordinates pooled; R² against per-coordinate means
/// with both coordinates' sums pooled.
pub fn regression_metrics(pred: &[[f64; 2]], truth: &[[f64; 2]]) -> Result<RegressionReport, MotionError> {
    if pred.len() != truth.len() || truth.len() < 2 {
        return Err(MotionError::LengthMismatch(pred.len(), truth.len()));
    }
    let n = truth.len() as f64;
    let mean = [0, 1].map(|k| truth.iter().map(|t| t[k]).sum::<f64>() / n);
    let (mut ss_res, mut abs, mut ss_tot) = (0.0, 0.0, 0.0);
    for (p, t) in pred.iter().zip(truth) {
        for k in 0..2 {
            let e = p[k] - t[k];
            ss_res += e * e;
            abs += e.abs();
            ss_tot += (t[k] - mean[k]).powi(2);
        }
    }
    if ss_tot == 0.0 {
        return Err(MotionError::DegenerateTruth);
    }
    Ok(RegressionReport {
        rmse: (ss_res / (2.0 * n)).sqrt(),
        mae: abs / (2.0 * n),
        r_squared: 1.0 - ss_res / ss_tot,
    })
}

/// Last `W` positions, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionWindow {
    cap: usize,
    points: VecDeque<[f64; 2]>,
}

impl PositionWindow {
    pub fn new(cap: usize) -> Self {
        assert!(cap >= 1);
        Self { cap, points: VecDeque::with_capacity(cap) }
    }

    pub fn push(&mut self, p: [f64; 2]) {
        if self.points.len() == self.cap {
            self.points.pop_front();
        }
        self.points.push_back(p);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<[f64; 2]> {
        self.points.back().copied()
    }

    pub fn to_vec(&self) -> Vec<[f64; 2]> {
        self.points.iter().copied().collect()
    }
}

/// Bi-LSTM with its input normalization: positions are taken relative to the
/// newest one and divided by `scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstmPredictor {
    pub space: String,
    pub window: usize,
    pub scale: f64,
    pub params: LstmParams,
}

impl BiLstmPredictor {
    fn prepare(&self, history: &[[f64; 2]]) -> (Vec<Vec<f64>>, [f64; 2]) {
        assert!(!history.is_empty(), "empty position window");
        let tail = &history[history.len().saturating_sub(self.window)..];
        let last = *tail.last().unwrap();
        let pad = self.window - tail.len();
        let seq = std::iter::repeat_n(tail[0], pad)
            .chain(tail.iter().copied())
            .map(|p| vec![(p[0] - last[0]) / self.scale, (p[1] - last[1]) / self.scale])
            .collect();
        (seq, last)
    }

    fn target(&self, last: [f64; 2], next: [f64; 2]) -> [f64; 2] {
        [(next[0] - last[0]) / self.scale, (next[1] - last[1]) / self.scale]
    }

    /// Next position after the newest entry of `history`.
    pub fn predict(&self, history: &[[f64; 2]]) -> [f64; 2] {
        let (seq, last) = self.prepare(history);
        let out = bilstm_forward(&seq, &self.params);
        [last[0] + self.scale * out[0], last[1] + self.scale * out[1]]
    }

    pub fn validate(&self) -> Result<(), MotionError> {
        if self.window == 0 || !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(MotionError::InvalidParams("window and scale must be positive".into()));
        }
        if self.params.input_dim != 2 {
            return Err(MotionError::InvalidParams("input dimension must be 2".into()));
        }
        self.params.validate().map_err(MotionError::InvalidParams)
    }

    pub fn save(&self, path: &Path) -> Result<(), MotionError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, MotionError> {
        let p: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstmTrainConfig {
    pub space: String,
    pub hidden: usize,
    pub window: usize,
    pub scale: f64,
    pub peephole: bool,
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    /// Cap on training windows; larger sets are subsampled per seed.
    pub max_samples: usize,
    /// Gaussian jitter added to history positions (native units) so the
    /// model learns to smooth measurement noise; targets stay clean.
    pub input_noise: f64,
    pub seed: u64,
}

impl BiLstmTrainConfig {
    pub fn bev(seed: u64) -> Self {
        Self {
            space: "bev".into(),
            hidden: 16,
            window: DEFAULT_WINDOW,
            scale: 50.0,
            peephole: true,
            epochs: 30,
            batch: 32,
            learning_rate: 3e-3,
            max_samples: 6000,
            input_noise: 0.25,
            seed,
        }
    }

    pub fn pixel(image_width: f64, seed: u64) -> Self {
        Self { space: "pixel".into(), scale: image_width, input_noise: 5.0, ..Self::bev(seed) }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedMotion {
    pub predictor: BiLstmPredictor,
    /// Mean window loss over the training set: before training, then after
    /// every epoch.
    pub loss_history: Vec<f64>,
}

/// Every run of `window + 1` consecutive positions as `(history, next)`.
pub fn motion_samples(trajectories: &[Vec<[f64; 2]>], window: usize) -> Vec<(Vec<[f64; 2]>, [f64; 2])> {
    let mut out = Vec::new();
    for tr in trajectories {
        if tr.len() <= window {
            continue;
        }
        for s in 0..tr.len() - window {
            out.push((tr[s..s + window].to_vec(), tr[s + window]));
        }
    }
    out
}

pub fn train_bilstm(trajectories: &[Vec<[f64; 2]>], cfg: &BiLstmTrainConfig) -> Result<TrainedMotion, MotionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut raw = motion_samples(trajectories, cfg.window);
    if raw.is_empty() {
        return Err(MotionError::EmptyDataset);
    }
    if raw.len() > cfg.max_samples {
        raw.shuffle(&mut rng);
        raw.truncate(cfg.max_samples);
    }
    if !(cfg.input_noise >= 0.0 && cfg.input_noise.is_finite()) {
        return Err(MotionError::InvalidParams("input noise must be a finite non-negative number".into()));
    }
    if cfg.input_noise > 0.0 {
        for (h, _) in raw.iter_mut() {
            for p in h.iter_mut() {
                p[0] += cfg.input_noise * rng.sample::<f64, _>(StandardNormal);
                p[1] += cfg.input_noise * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    let mut predictor = BiLstmPredictor {
        space: cfg.space.clone(),
        window: cfg.window,
        scale: cfg.scale,
        params: LstmParams::init(2, cfg.hidden, cfg.peephole, &mut rng),
    };
    let samples: Vec<(Vec<Vec<f64>>, [f64; 2])> = raw
        .iter()
        .map(|(h, next)| {
            let (seq, last) = predictor.prepare(h);
            (seq, predictor.target(last, *next))
        })
        .collect();
    let mean_loss = |p: &LstmParams| {
        samples.iter().map(|(s, t)| window_loss(bilstm_forward(s, p), *t)).sum::<f64>() / samples.len() as f64
    };

    let mut history = vec![mean_loss(&predictor.params)];
    let mut flat = predictor.params.to_flat();
    let mut adam = Adam::new(flat.len(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let batch = cfg.batch.max(1);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let mut grad = LstmParams::zeros(2, cfg.hidden);
            for &k in chunk {
                let (seq, target) = &samples[k];
                lstm::loss_and_grad_into(seq, *target, &predictor.params, &mut grad);
            }
            let scale = 1.0 / chunk.len() as f64;
            let g: Vec<f64> = grad.to_flat().into_iter().map(|v| v * scale).collect();
            adam.step(&mut flat, &g);
            predictor.params.set_flat(&flat);
        }
        history.push(mean_loss(&predictor.params));
    }
    Ok(TrainedMotion { predictor, loss_history: history })
}

/// One-step-ahead predictions on every window of the given trajectories.
pub fn evaluate_predictor(
    p: &BiLstmPredictor,
    trajectories: &[Vec<[f64; 2]>],
) -> Result<RegressionReport, MotionError> {
    let samples = motion_samples(trajectories, p.window);
    let pred: Vec<[f64; 2]> = samples.iter().map(|(h, _)| p.predict(h)).collect();
    let truth: Vec<[f64; 2]> = samples.iter().map(|(_, t)| *t).collect();
    regression_metrics(&pred, &truth)
}

/// Motion model selected for a tracker.
#[derive(Debug, Clone)]
pub enum MotionModel {
    ConstantVelocity(KalmanConfig),
    BiLstm(Arc<BiLstmPredictor>),
}

/// Per-track motion state.
#[derive(Debug, Clone)]
pub enum MotionState {
    Kalman { state: KalmanState, last_t: f64, nominal_dt: f64 },
    Window(PositionWindow),
}

impl MotionModel {
    pub fn init(&self, z: [f64; 2], t: f64) -> MotionState {
        match self {
            MotionModel::ConstantVelocity(cfg) => MotionState::Kalman {
                state: KalmanState::new(z, cfg),
                last_t: t,
                nominal_dt: cfg.nominal_dt,
            },
            MotionModel::BiLstm(p) => {
                let mut w = PositionWindow::new(p.window);
                w.push(z);
                MotionState::Window(w)
            }
        }
    }

    /// Expected position at time `t` given everything seen so far.
    pub fn predict(&self, s: &MotionState, t: f64) -> [f64; 2] {
        match (self, s) {
            (_, MotionState::Kalman { state, last_t, nominal_dt }) => {
                kalman_predict(state, step(t, *last_t, *nominal_dt)).position()
            }
            (MotionModel::BiLstm(p), MotionState::Window(w)) => p.predict(&w.to_vec()),
            (MotionModel::ConstantVelocity(_), MotionState::Window(w)) => w.last().expect("non-empty window"),
        }
    }

    pub fn update(&self, s: &mut MotionState, z: [f64; 2], t: f64) {
        match s {
            MotionState::Kalman { state, last_t, nominal_dt } => {
                *state = kalman_update(&kalman_predict(state, step(t, *last_t, *nominal_dt)), z);
                *last_t = t;
            }
            MotionState::Window(w) => w.push(z),
        }
    }

    /// Advances without a measurement; the prediction becomes the new state.
    pub fn coast(&self, s: &mut MotionState, t: f64) -> [f64; 2] {
        let p = self.predict(s, t);
        match s {
            MotionState::Kalman { state, last_t, nominal_dt } => {
                *state = kalman_predict(state, step(t, *last_t, *nominal_dt));
                *last_t = t;
            }
            MotionState::Window(w) => w.push(p),
        }
        p
    }
}

fn step(t: f64, last_t: f64, nominal: f64) -> f64 {
    let dt = t - last_t;
    if dt > 1e-9 {
        dt
    } else {
        nominal
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const SQUARE: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];

    #[test]
    fn perfect_prediction() {
        let r = regression_metrics(&SQUARE, &SQUARE).unwrap();
        assert_eq!((r.rmse, r.mae, r.r_squared), (0.0, 0.0, 1.0));
    }

    #[test]
    fn mean_predictor_scores_zero() {
        let r = regression_metrics(&[[0.5, 0.5]; 4], &SQUARE).unwrap();
        assert_abs_diff_eq!(r.r_squared, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn unit_offset_in_x() {
        let pred: Vec<[f64; 2]> = SQUARE.iter().map(|p| [p[0] + 1.0, p[1]]).collect();
        let r = regression_metrics(&pred, &SQUARE).unwrap();
        assert_abs_diff_eq!(r.rmse, 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.mae, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.r_squared, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn regression_errors() {
        assert!(matches!(
            regression_metrics(&[[1.0, 1.0]; 3], &[[2.0, 2.0]; 3]),
            Err(MotionError::DegenerateTruth)
        ));
        assert!(matches!(
            regression_metrics(&SQUARE[..2], &SQUARE),
            Err(MotionError::LengthMismatch(2, 4))
        ));
    }

    #[test]
    fn window_keeps_latest() {
        let mut w = PositionWindow::new(3);
        for k in 0..5 {
            w.push([k as f64, 0.0]);
        }
        assert_eq!(w.to_vec(), vec![[2.0, 0.0], [3.0, 0.0], [4.0, 0.0]]);
    }

    fn lines(n: usize) -> Vec<Vec<[f64; 2]>> {
        (0..n)
            .map(|k| {
                let a = k as f64 * 0.37;
                let (vx, vy) = (0.15 * a.cos(), 0.15 * a.sin());
                let (x0, y0) = (-3.0 + (k % 7) as f64, 5.0 + (k % 5) as f64);
                (0..40).map(|s| [x0 + vx * s as f64, y0 + vy * s as f64]).collect()
            })
            .collect()
    }

    #[test]
    fn learns_straight_lines() {
        let data = lines(30);
        let mut cfg = BiLstmTrainConfig::bev(11);
        cfg.epochs = 25;
        cfg.max_samples = 2000;
        cfg.input_noise = 0.0;
        let trained = train_bilstm(&data[..24], &cfg).unwrap();
        let h = &trained.loss_history;
        assert!(h.last().unwrap() < &h[0]);
        let r = evaluate_predictor(&trained.predictor, &data[24..]).unwrap();
        assert!(r.r_squared >= 0.99, "{r:?}");
        let again = train_bilstm(&data[..24], &cfg).unwrap();
        assert_eq!(again.predictor, trained.predictor);
    }

    #[test]
    fn empty_dataset() {
        let cfg = BiLstmTrainConfig::bev(0);
        assert!(matches!(train_bilstm(&[vec![[0.0, 0.0]; 3]], &cfg), Err(MotionError::EmptyDataset)));
    }

    #[test]
    fn padding_repeats_oldest() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = BiLstmPredictor {
            space: "bev".into(),
            window: 3,
            scale: 10.0,
            params: LstmParams::init(2, 4, true, &mut rng),
        };
        let short = p.predict(&[[1.0, 2.0], [1.5, 2.5]]);
        let padded = p.predict(&[[1.0, 2.0], [1.0, 2.0], [1.5, 2.5]]);
        assert_eq!(short, padded);
    }

    #[test]
    fn coasting_advances_kalman() {
        let m = MotionModel::ConstantVelocity(KalmanConfig::bev());
        let mut s = m.init([0.0, 5.0], 0.0);
        for k in 1..6 {
            m.update(&mut s, [0.1 * k as f64, 5.0], 0.1 * k as f64);
        }
        let p = m.coast(&mut s, 0.6);
        assert!(p[0] > 0.5, "{p:?}");
    }

    #[test]
    fn params_round_trip_json() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = BiLstmPredictor {
            space: "pixel".into(),
            window: 3,
            scale: 640.0,
            params: LstmParams::init(2, 3, false, &mut rng),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        p.save(&path).unwrap();
        assert_eq!(BiLstmPredictor::load(&path).unwrap(), p);
        std::fs::write(&path, "{\"space\":\"bev\"}").unwrap();
        assert!(BiLstmPredictor::load(&path).is_err());
    }
}
