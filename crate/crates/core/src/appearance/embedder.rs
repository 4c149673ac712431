//! Small feed-forward embedder (features -> tanh hidden -> linear -> L2 norm)
//! trained with triplet loss plus an auxiliary classification head.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{euclidean, softmax, AppearanceError, Embedding, LossConfig};
use crate::linalg::{dot, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderParams {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
    /// Classification branch; only present while training.
    pub head_w: Option<Matrix>,
    pub head_b: Option<Vec<f64>>,
}

impl EmbedderParams {
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, embed: usize, classes: usize, rng: &mut R) -> Self {
        Self {
            w1: Matrix::random(hidden, input, 1.0 / (input as f64).sqrt(), rng),
            b1: vec![0.0; hidden],
            w2: Matrix::random(embed, hidden, 1.0 / (hidden as f64).sqrt(), rng),
            b2: vec![0.0; embed],
            head_w: Some(Matrix::random(classes, embed, 0.5, rng)),
            head_b: Some(vec![0.0; classes]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols
    }

    pub fn embedding_dim(&self) -> usize {
        self.w2.rows
    }

    pub fn strip_head(mut self) -> Self {
        self.head_w = None;
        self.head_b = None;
        self
    }

    fn zeros_like(&self) -> Self {
        Self {
            w1: Matrix::zeros(self.w1.rows, self.w1.cols),
            b1: vec![0.0; self.b1.len()],
            w2: Matrix::zeros(self.w2.rows, self.w2.cols),
            b2: vec![0.0; self.b2.len()],
            head_w: self.head_w.as_ref().map(|m| Matrix::zeros(m.rows, m.cols)),
            head_b: self.head_b.as_ref().map(|b| vec![0.0; b.len()]),
        }
    }

    /// Parameter blocks in a fixed order.
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = vec![&self.w1.data, &self.b1, &self.w2.data, &self.b2];
        if let (Some(w), Some(b)) = (&self.head_w, &self.head_b) {
            v.push(&w.data);
            v.push(b);
        }
        v
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = vec![&mut self.w1.data, &mut self.b1, &mut self.w2.data, &mut self.b2];
        if let (Some(w), Some(b)) = (&mut self.head_w, &mut self.head_b) {
            v.push(&mut w.data);
            v.push(b);
        }
        v
    }

    fn forward(&self, x: &[f64]) -> Forward {
        let mut pre = self.b1.clone();
        self.w1.mul_vec_add(x, &mut pre);
        let h: Vec<f64> = pre.iter().map(|v| v.tanh()).collect();
        let mut z = self.b2.clone();
        self.w2.mul_vec_add(&h, &mut z);
        let n = dot(&z, &z).sqrt().max(1e-12);
        let e: Vec<f64> = z.iter().map(|v| v / n).collect();
        let logits = match (&self.head_w, &self.head_b) {
            (Some(w), Some(b)) => {
                let mut l = b.clone();
                w.mul_vec_add(&e, &mut l);
                Some(l)
            }
            _ => None,
        };
        Forward { x: x.to_vec(), h, n, e, logits }
    }

    pub fn embed(&self, x: &[f64]) -> Embedding {
        Embedding::from_unit(self.forward(x).e)
    }

    /// Backpropagates `de` (loss gradient w.r.t. the unit embedding) and
    /// `dlogits` into `grad`.
    fn backward(&self, f: &Forward, de: &[f64], dlogits: Option<&[f64]>, grad: &mut EmbedderParams) {
        let mut de = de.to_vec();
        if let (Some(dl), Some(w), Some(gw), Some(gb)) =
            (dlogits, &self.head_w, grad.head_w.as_mut(), grad.head_b.as_mut())
        {
            gw.add_outer(dl, &f.e);
            for (g, d) in gb.iter_mut().zip(dl) {
                *g += d;
            }
            w.tr_mul_vec_add(dl, &mut de);
        }
        // Through e = z / |z|.
        let proj = dot(&f.e, &de);
        let dz: Vec<f64> = de.iter().zip(&f.e).map(|(d, e)| (d - e * proj) / f.n).collect();
        grad.w2.add_outer(&dz, &f.h);
        for (g, d) in grad.b2.iter_mut().zip(&dz) {
            *g += d;
        }
        let mut dh = vec![0.0; f.h.len()];
        self.w2.tr_mul_vec_add(&dz, &mut dh);
        let dpre: Vec<f64> = dh.iter().zip(&f.h).map(|(d, h)| d * (1.0 - h * h)).collect();
        grad.w1.add_outer(&dpre, &f.x);
        for (g, d) in grad.b1.iter_mut().zip(&dpre) {
            *g += d;
        }
    }
}

struct Forward {
    x: Vec<f64>,
    h: Vec<f64>,
    n: f64,
    e: Vec<f64>,
    logits: Option<Vec<f64>>,
}

/// Raw features with their identity labels.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabeledFeatures {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl LabeledFeatures {
    pub fn num_identities(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    fn by_identity(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.num_identities()];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }
}

/// Feature vectors and labels of one anchor/positive/negative triple.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletSample {
    pub features: [Vec<f64>; 3],
    pub labels: [usize; 3],
}

/// Loss and parameter gradient for one triplet. Requires the classification
/// head when `cfg.lambda > 0`.
pub fn total_loss_and_grad(params: &EmbedderParams, t: &TripletSample, cfg: &LossConfig) -> (f64, EmbedderParams) {
    let fwd: Vec<Forward> = t.features.iter().map(|x| params.forward(x)).collect();
    let (a, p, n) = (&fwd[0].e, &fwd[1].e, &fwd[2].e);
    let d_ap = euclidean(a, p);
    let d_an = euclidean(a, n);
    let hinge = cfg.margin_alpha + d_ap - d_an;
    let dim = a.len();
    let mut de = vec![vec![0.0; dim]; 3];
    let mut loss = 0.0;
    if hinge > 0.0 {
        loss += hinge;
        for k in 0..dim {
            let gap = if d_ap > 0.0 { (a[k] - p[k]) / d_ap } else { 0.0 };
            let gan = if d_an > 0.0 { (a[k] - n[k]) / d_an } else { 0.0 };
            de[0][k] = gap - gan;
            de[1][k] = -gap;
            de[2][k] = gan;
        }
    }
    let mut grad = params.zeros_like();
    for (i, f) in fwd.iter().enumerate() {
        let dlogits = match (&f.logits, cfg.lambda > 0.0) {
            (Some(logits), true) => {
                let label = t.labels[i];
                loss += cfg.lambda * super::softmax_loss(logits, label);
                let mut probs = softmax(logits);
                probs[label] -= 1.0;
                probs.iter_mut().for_each(|v| *v *= cfg.lambda);
                Some(probs)
            }
            _ => None,
        };
        params.backward(f, &de[i], dlogits.as_deref(), &mut grad);
    }
    (loss, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderTrainConfig {
    pub hidden: usize,
    pub embedding_dim: usize,
    pub steps: usize,
    pub batch: usize,
    /// Fixed gradient-descent step.
    pub learning_rate: f64,
    pub margin_alpha: f64,
    pub lambda: f64,
    /// Fraction of each identity's samples for threshold calibration and for the final test.
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for EmbedderTrainConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            embedding_dim: super::EMBEDDING_DIM,
            steps: 600,
            batch: 16,
            learning_rate: 0.2,
            margin_alpha: 0.2,
            lambda: 0.1,
            val_fraction: 0.2,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedEmbedder {
    pub params: EmbedderParams,
    /// Euclidean distance below which two embeddings are the same identity.
    pub threshold: f64,
    pub validation_accuracy: f64,
    pub test_accuracy: f64,
    pub loss_history: Vec<f64>,
}

const MIN_PER_IDENTITY: usize = 2;

pub fn train_embedder(data: &LabeledFeatures, cfg: &EmbedderTrainConfig) -> Result<TrainedEmbedder, AppearanceError> {
    let groups = data.by_identity();
    let usable = groups.iter().filter(|g| g.len() >= MIN_PER_IDENTITY).count();
    if usable < 2 || usable != groups.len() {
        return Err(AppearanceError::InsufficientIdentities { found: usable, min_per_identity: MIN_PER_IDENTITY });
    }
    let input = data.features[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Per-identity split into train / validation / test.
    let (mut train, mut val, mut test) = (vec![], vec![], vec![]);
    for g in &groups {
        let mut idx = g.clone();
        idx.shuffle(&mut rng);
        let n = idx.len();
        let n_val = ((n as f64) * cfg.val_fraction).round() as usize;
        let n_test = ((n as f64) * cfg.test_fraction).round() as usize;
        let n_train = n.saturating_sub(n_val + n_test).max(MIN_PER_IDENTITY.min(n));
        train.push(idx[..n_train].to_vec());
        val.extend_from_slice(&idx[n_train..(n_train + n_val).min(n)]);
        test.extend_from_slice(&idx[(n_train + n_val).min(n)..]);
    }

    let classes = groups.len();
    let loss_cfg = LossConfig { margin_alpha: cfg.margin_alpha, lambda: cfg.lambda, num_classes: classes };
    let mut params = EmbedderParams::init(input, cfg.hidden, cfg.embedding_dim, classes, &mut rng);
    let mut history = Vec::with_capacity(cfg.steps);

    for _ in 0..cfg.steps {
        let mut grad = params.zeros_like();
        let mut batch_loss = 0.0;
        for _ in 0..cfg.batch {
            let t = sample_triplet(data, &train, &mut rng);
            let (l, g) = total_loss_and_grad(&params, &t, &loss_cfg);
            batch_loss += l;
            for (acc, gi) in grad.blocks_mut().into_iter().zip(g.blocks()) {
                for (a, b) in acc.iter_mut().zip(gi) {
                    *a += b;
                }
            }
        }
        let scale = cfg.learning_rate / cfg.batch as f64;
        for (p, g) in params.blocks_mut().into_iter().zip(grad.blocks()) {
            for (pi, gi) in p.iter_mut().zip(g) {
                *pi -= scale * gi;
            }
        }
        history.push(batch_loss / cfg.batch as f64);
    }

    let params = params.strip_head();
    let embed_all = |idx: &[usize]| -> Vec<(Embedding, usize)> {
        idx.iter().map(|&i| (params.embed(&data.features[i]), data.labels[i])).collect()
    };
    let val_pairs = verification_pairs(&embed_all(&val), &mut rng);
    let (threshold, validation_accuracy) = calibrate_threshold(&val_pairs);
    let test_pairs = verification_pairs(&embed_all(&test), &mut rng);
    let test_accuracy = accuracy_at(&test_pairs, threshold);
    Ok(TrainedEmbedder { params, threshold, validation_accuracy, test_accuracy, loss_history: history })
}

fn sample_triplet<R: Rng + ?Sized>(data: &LabeledFeatures, train: &[Vec<usize>], rng: &mut R) -> TripletSample {
    let ida = rng.random_range(0..train.len());
    let mut idn = rng.random_range(0..train.len() - 1);
    if idn >= ida {
        idn += 1;
    }
    let g = &train[ida];
    let a = rng.random_range(0..g.len());
    let mut p = rng.random_range(0..g.len() - 1);
    if p >= a {
        p += 1;
    }
    let n = train[idn][rng.random_range(0..train[idn].len())];
    let (a, p) = (g[a], g[p]);
    TripletSample {
        features: [data.features[a].clone(), data.features[p].clone(), data.features[n].clone()],
        labels: [data.labels[a], data.labels[p], data.labels[n]],
    }
}

/// All same-identity pairs plus an equal number of randomly drawn
/// different-identity pairs, as `(euclidean distance, same)`.
pub fn verification_pairs<R: Rng + ?Sized>(items: &[(Embedding, usize)], rng: &mut R) -> Vec<(f64, bool)> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            let d = euclidean(items[i].0.values(), items[j].0.values());
            if items[i].1 == items[j].1 {
                pos.push((d, true));
            } else {
                neg.push((d, false));
            }
        }
    }
    neg.shuffle(rng);
    neg.truncate(pos.len().max(1));
    pos.extend(neg);
    pos
}

fn accuracy_at(pairs: &[(f64, bool)], threshold: f64) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let correct = pairs.iter().filter(|(d, same)| (*d < threshold) == *same).count();
    correct as f64 / pairs.len() as f64
}

/// Grid search over `[0, 2]` in steps of 0.01; returns the first threshold
/// reaching the best accuracy.
pub fn calibrate_threshold(pairs: &[(f64, bool)]) -> (f64, f64) {
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 0..=200 {
        let thr = k as f64 * 0.01;
        let acc = accuracy_at(pairs, thr);
        if acc > best.1 {
            best = (thr, acc);
        }
    }
    best
}
