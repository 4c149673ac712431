//! Peephole LSTM cell and a one-layer bidirectional sequence-to-one network
//! with a linear 2D head, plus hand-written backpropagation through time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{sigmoid, Matrix};

const INPUT: usize = 0;
const FORGET: usize = 1;
const CANDIDATE: usize = 2;
const OUTPUT: usize = 3;

/// Weights of one LSTM direction. Gate order is input, forget, candidate,
/// output; the peephole matrices cover input, forget and output only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmDirection {
    pub w: [Matrix; 4],
    pub u: [Matrix; 4],
    pub v: [Matrix; 3],
    pub b: [Vec<f64>; 4],
}

impl LstmDirection {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: std::array::from_fn(|_| Matrix::zeros(hidden, input)),
            u: std::array::from_fn(|_| Matrix::zeros(hidden, hidden)),
            v: std::array::from_fn(|_| Matrix::zeros(hidden, hidden)),
            b: std::array::from_fn(|_| vec![0.0; hidden]),
        }
    }

    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let sw = 1.0 / (input as f64).sqrt();
        let su = 1.0 / (hidden as f64).sqrt();
        let mut d = Self {
            w: std::array::from_fn(|_| Matrix::random(hidden, input, sw, rng)),
            u: std::array::from_fn(|_| Matrix::random(hidden, hidden, su, rng)),
            v: std::array::from_fn(|_| Matrix::random(hidden, hidden, 0.1 * su, rng)),
            b: std::array::from_fn(|_| vec![0.0; hidden]),
        };
        d.b[FORGET].iter_mut().for_each(|b| *b = 1.0);
        d
    }

    pub fn hidden(&self) -> usize {
        self.b[0].len()
    }

    pub fn input(&self) -> usize {
        self.w[0].cols
    }

    fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(15);
        out.extend(self.w.iter().map(|m| m.data.as_slice()));
        out.extend(self.u.iter().map(|m| m.data.as_slice()));
        out.extend(self.v.iter().map(|m| m.data.as_slice()));
        out.extend(self.b.iter().map(|b| b.as_slice()));
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(15);
        out.extend(self.w.iter_mut().map(|m| m.data.as_mut_slice()));
        out.extend(self.u.iter_mut().map(|m| m.data.as_mut_slice()));
        out.extend(self.v.iter_mut().map(|m| m.data.as_mut_slice()));
        out.extend(self.b.iter_mut().map(|b| b.as_mut_slice()));
        out
    }

    fn is_consistent(&self, input: usize, hidden: usize) -> bool {
        self.w.iter().all(|m| m.rows == hidden && m.cols == input && m.data.len() == hidden * input)
            && self
                .u
                .iter()
                .chain(&self.v)
                .all(|m| m.rows == hidden && m.cols == hidden && m.data.len() == hidden * hidden)
            && self.b.iter().all(|b| b.len() == hidden)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden: usize,
    pub peephole: bool,
    pub forward: LstmDirection,
    pub backward: LstmDirection,
    /// 2 × 2·hidden projection of `[h_forward; h_backward]`.
    pub head_w: Matrix,
    pub head_b: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            input_dim,
            hidden,
            peephole: true,
            forward: LstmDirection::zeros(input_dim, hidden),
            backward: LstmDirection::zeros(input_dim, hidden),
            head_w: Matrix::zeros(2, 2 * hidden),
            head_b: vec![0.0; 2],
        }
    }

    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden: usize, peephole: bool, rng: &mut R) -> Self {
        let mut p = Self {
            input_dim,
            hidden,
            peephole,
            forward: LstmDirection::init(input_dim, hidden, rng),
            backward: LstmDirection::init(input_dim, hidden, rng),
            head_w: Matrix::random(2, 2 * hidden, 0.1, rng),
            head_b: vec![0.0; 2],
        };
        if !peephole {
            for d in [&mut p.forward, &mut p.backward] {
                d.v.iter_mut().for_each(|m| m.data.fill(0.0));
            }
        }
        p
    }

    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out = self.forward.blocks();
        out.extend(self.backward.blocks());
        out.push(&self.head_w.data);
        out.push(&self.head_b);
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.forward.blocks_mut();
        out.extend(self.backward.blocks_mut());
        out.push(&mut self.head_w.data);
        out.push(&mut self.head_b);
        out
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.blocks().concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut off = 0;
        for b in self.blocks_mut() {
            b.copy_from_slice(&flat[off..off + b.len()]);
            off += b.len();
        }
        debug_assert_eq!(off, flat.len());
    }

    pub fn validate(&self) -> Result<(), String> {
        let (i, h) = (self.input_dim, self.hidden);
        if h == 0 || i == 0 {
            return Err("zero-sized network".into());
        }
        if !self.forward.is_consistent(i, h) || !self.backward.is_consistent(i, h) {
            return Err("gate matrix shapes do not match input/hidden sizes".into());
        }
        if self.head_w.rows != 2 || self.head_w.cols != 2 * h || self.head_w.data.len() != 4 * h {
            return Err("head must be 2 x 2*hidden".into());
        }
        if self.head_b.len() != 2 {
            return Err("head bias must have length 2".into());
        }
        if self.blocks().iter().any(|b| b.iter().any(|v| !v.is_finite())) {
            return Err("non-finite parameter".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: [Vec<f64>; 4],
    c: Vec<f64>,
    tanh_c: Vec<f64>,
}

fn cell_forward(x: &[f64], h_prev: &[f64], c_prev: &[f64], d: &LstmDirection, peephole: bool) -> StepCache {
    let pre = |g: usize| {
        let mut a = d.b[g].clone();
        d.w[g].mul_vec_add(x, &mut a);
        d.u[g].mul_vec_add(h_prev, &mut a);
        a
    };
    let mut a_i = pre(INPUT);
    let mut a_f = pre(FORGET);
    let a_g = pre(CANDIDATE);
    let mut a_o = pre(OUTPUT);
    if peephole {
        d.v[0].mul_vec_add(c_prev, &mut a_i);
        d.v[1].mul_vec_add(c_prev, &mut a_f);
    }
    let i: Vec<f64> = a_i.into_iter().map(sigmoid).collect();
    let f: Vec<f64> = a_f.into_iter().map(sigmoid).collect();
    let g: Vec<f64> = a_g.into_iter().map(f64::tanh).collect();
    let c: Vec<f64> = (0..c_prev.len()).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    if peephole {
        d.v[2].mul_vec_add(&c, &mut a_o);
    }
    let o: Vec<f64> = a_o.into_iter().map(sigmoid).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    StepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates: [i, f, g, o],
        c,
        tanh_c,
    }
}

impl StepCache {
    fn h(&self) -> Vec<f64> {
        self.gates[OUTPUT].iter().zip(&self.tanh_c).map(|(o, t)| o * t).collect()
    }
}

/// One recurrence step; returns `(h_t, c_t)`.
pub fn lstm_cell_step(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    cell: &LstmDirection,
    peephole: bool,
) -> (Vec<f64>, Vec<f64>) {
    let s = cell_forward(x, h_prev, c_prev, cell, peephole);
    (s.h(), s.c)
}

fn run_direction<'a, I>(seq: I, d: &LstmDirection, peephole: bool) -> Vec<StepCache>
where
    I: Iterator<Item = &'a [f64]>,
{
    let hdim = d.hidden();
    let mut h = vec![0.0; hdim];
    let mut c = vec![0.0; hdim];
    let mut caches = Vec::new();
    for x in seq {
        let s = cell_forward(x, &h, &c, d, peephole);
        h = s.h();
        c = s.c.clone();
        caches.push(s);
    }
    caches
}

/// Concatenated final states `[h_forward; h_backward]`, length `2 * hidden`.
pub fn bilstm_features(seq: &[Vec<f64>], p: &LstmParams) -> Vec<f64> {
    let (f, b) = run_both(seq, p);
    concat_final(&f, &b, p.hidden)
}

fn run_both(seq: &[Vec<f64>], p: &LstmParams) -> (Vec<StepCache>, Vec<StepCache>) {
    assert!(!seq.is_empty(), "empty input sequence");
    let f = run_direction(seq.iter().map(|v| v.as_slice()), &p.forward, p.peephole);
    let b = run_direction(seq.iter().rev().map(|v| v.as_slice()), &p.backward, p.peephole);
    (f, b)
}

fn concat_final(f: &[StepCache], b: &[StepCache], hidden: usize) -> Vec<f64> {
    let mut feat = f.last().map(|s| s.h()).unwrap_or_else(|| vec![0.0; hidden]);
    feat.extend(b.last().map(|s| s.h()).unwrap_or_else(|| vec![0.0; hidden]));
    feat
}

/// Network output for an already-prepared input sequence.
pub fn bilstm_forward(seq: &[Vec<f64>], p: &LstmParams) -> [f64; 2] {
    let feat = bilstm_features(seq, p);
    let mut out = p.head_b.clone();
    p.head_w.mul_vec_add(&feat, &mut out);
    [out[0], out[1]]
}

/// Half squared error of one prediction.
pub fn window_loss(pred: [f64; 2], target: [f64; 2]) -> f64 {
    0.5 * ((pred[0] - target[0]).powi(2) + (pred[1] - target[1]).powi(2))
}

fn direction_backward(d: &LstmDirection, caches: &[StepCache], dh_last: &[f64], g: &mut LstmDirection, peephole: bool) {
    let hdim = d.hidden();
    let mut dh = dh_last.to_vec();
    let mut dc_next = vec![0.0; hdim];
    for s in caches.iter().rev() {
        let [i, f, gg, o] = &s.gates;
        let mut da = [vec![0.0; hdim], vec![0.0; hdim], vec![0.0; hdim], vec![0.0; hdim]];
        for k in 0..hdim {
            da[OUTPUT][k] = dh[k] * s.tanh_c[k] * o[k] * (1.0 - o[k]);
        }
        let mut dc = dc_next.clone();
        for k in 0..hdim {
            dc[k] += dh[k] * o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
        }
        if peephole {
            d.v[2].tr_mul_vec_add(&da[OUTPUT], &mut dc);
        }
        for k in 0..hdim {
            da[INPUT][k] = dc[k] * gg[k] * i[k] * (1.0 - i[k]);
            da[FORGET][k] = dc[k] * s.c_prev[k] * f[k] * (1.0 - f[k]);
            da[CANDIDATE][k] = dc[k] * i[k] * (1.0 - gg[k] * gg[k]);
        }
        let mut dh_prev = vec![0.0; hdim];
        for gate in 0..4 {
            g.w[gate].add_outer(&da[gate], &s.x);
            g.u[gate].add_outer(&da[gate], &s.h_prev);
            for (gb, a) in g.b[gate].iter_mut().zip(&da[gate]) {
                *gb += a;
            }
            d.u[gate].tr_mul_vec_add(&da[gate], &mut dh_prev);
        }
        let mut dc_prev: Vec<f64> = (0..hdim).map(|k| dc[k] * f[k]).collect();
        if peephole {
            g.v[0].add_outer(&da[INPUT], &s.c_prev);
            g.v[1].add_outer(&da[FORGET], &s.c_prev);
            g.v[2].add_outer(&da[OUTPUT], &s.c);
            d.v[0].tr_mul_vec_add(&da[INPUT], &mut dc_prev);
            d.v[1].tr_mul_vec_add(&da[FORGET], &mut dc_prev);
        }
        dh = dh_prev;
        dc_next = dc_prev;
    }
}

/// Window loss and its gradient for one `(sequence, target)` sample, added
/// into `grad`.
pub fn loss_and_grad_into(seq: &[Vec<f64>], target: [f64; 2], p: &LstmParams, grad: &mut LstmParams) -> f64 {
    let (fc, bc) = run_both(seq, p);
    let feat = concat_final(&fc, &bc, p.hidden);
    let mut out = p.head_b.clone();
    p.head_w.mul_vec_add(&feat, &mut out);
    let dout = [out[0] - target[0], out[1] - target[1]];
    grad.head_w.add_outer(&dout, &feat);
    grad.head_b[0] += dout[0];
    grad.head_b[1] += dout[1];
    let mut dfeat = vec![0.0; 2 * p.hidden];
    p.head_w.tr_mul_vec_add(&dout, &mut dfeat);
    let (dh_f, dh_b) = dfeat.split_at(p.hidden);
    direction_backward(&p.forward, &fc, dh_f, &mut grad.forward, p.peephole);
    direction_backward(&p.backward, &bc, dh_b, &mut grad.backward, p.peephole);
    window_loss([out[0], out[1]], target)
}

pub fn loss_and_grad(seq: &[Vec<f64>], target: [f64; 2], p: &LstmParams) -> (f64, LstmParams) {
    let mut grad = LstmParams::zeros(p.input_dim, p.hidden);
    grad.peephole = p.peephole;
    let l = loss_and_grad_into(seq, target, p, &mut grad);
    (l, grad)
}
