use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::context::{ContextSet, Element};
use crate::paradigm::{OracleError, VelocityOracle};

const TIME_CENTRES: usize = 8;
const GRID: usize = 5;
const DIM: usize = 2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("training loss became non-finite at iteration {0}")]
    Diverged(usize),
    #[error("unusable training data: {0}")]
    BadData(String),
}

/// Per-element probability of hiding a condition during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dropout {
    pub text: f64,
    pub image: f64,
}

impl Default for Dropout {
    fn default() -> Self {
        Dropout { text: 0.15, image: 0.4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iters: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub dropout: Dropout,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { iters: 2000, batch: 256, learning_rate: 0.05, dropout: Dropout::default(), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Loss on a fixed held-out batch before training.
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Held-out loss every `iters / 20` iterations.
    pub curve: Vec<(usize, f64)>,
}

/// Radial-basis regression velocity: a time basis crossed with an affine
/// and bump basis in space, one weight block per condition subset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToyVelocity {
    heads: BTreeMap<ContextSet, usize>,
    weights: Vec<f64>,
    centres: Vec<[f64; 2]>,
    width: f64,
}

impl ToyVelocity {
    fn new(heads: BTreeMap<ContextSet, usize>, lo: [f64; 2], hi: [f64; 2]) -> ToyVelocity {
        let mut centres = Vec::new();
        for i in 0..GRID {
            for j in 0..GRID {
                let f = |k: usize, d: usize| lo[d] + (hi[d] - lo[d]) * k as f64 / (GRID - 1) as f64;
                centres.push([f(i, 0), f(j, 1)]);
            }
        }
        let width = ((hi[0] - lo[0]).max(hi[1] - lo[1]) / (GRID - 1) as f64).max(1e-3);
        let n = heads.len();
        let mut model = ToyVelocity { heads, weights: Vec::new(), centres, width };
        model.weights = vec![0.0; n * model.features_len() * DIM];
        model
    }

    fn features_len(&self) -> usize {
        TIME_CENTRES * (3 + self.centres.len())
    }

    fn features(&self, x: &[f64], t: f64, out: &mut Vec<f64>) {
        out.clear();
        let tw = 1.0 / (TIME_CENTRES - 1) as f64;
        let mut time = [0.0; TIME_CENTRES];
        for (k, b) in time.iter_mut().enumerate() {
            *b = (-0.5 * ((t - k as f64 * tw) / tw).powi(2)).exp();
        }
        let norm: f64 = time.iter().sum();
        let mut space = vec![1.0, x[0], x[1]];
        for c in &self.centres {
            let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
            space.push((-0.5 * d2 / (self.width * self.width)).exp());
        }
        for b in time {
            out.extend(space.iter().map(|s| b / norm * s));
        }
    }

    fn head(&self, c: &ContextSet) -> usize {
        self.heads.get(c).or_else(|| self.heads.get(&ContextSet::empty())).copied().unwrap_or(0)
    }

    fn predict(&self, head: usize, phi: &[f64]) -> [f64; 2] {
        let n = phi.len();
        let mut out = [0.0; 2];
        for (d, o) in out.iter_mut().enumerate() {
            let w = &self.weights[(head * DIM + d) * n..(head * DIM + d + 1) * n];
            *o = w.iter().zip(phi).map(|(a, b)| a * b).sum();
        }
        out
    }

    pub fn conditions(&self) -> impl Iterator<Item = &ContextSet> {
        self.heads.keys()
    }
}

impl VelocityOracle for ToyVelocity {
    /// Contexts never seen in training fall back to the unconditional head.
    fn evaluate(&self, x: &[f64], t: f64, c: &ContextSet) -> Result<Vec<f64>, OracleError> {
        if x.len() != DIM {
            return Err(OracleError::Dimension { expected: DIM, got: x.len() });
        }
        let mut phi = Vec::new();
        self.features(x, t, &mut phi);
        Ok(self.predict(self.head(c), &phi).to_vec())
    }
}

fn drop_elements(c: &ContextSet, dropout: Dropout, rng: &mut ChaCha8Rng) -> ContextSet {
    ContextSet::new(c.elements().iter().copied().filter(|e| {
        let p = if e.is_text() { dropout.text } else { dropout.image };
        !rng.random_bool(p.clamp(0.0, 1.0))
    }))
}

fn subsets(c: &ContextSet) -> Vec<ContextSet> {
    let e: &[Element] = c.elements();
    (0u32..1 << e.len())
        .map(|mask| ContextSet::new(e.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, e)| *e)))
        .collect()
}

struct Example {
    head: usize,
    phi: Vec<f64>,
    target: [f64; 2],
}

fn draw(model: &ToyVelocity, data: &[(ContextSet, Vec<f64>)], dropout: Dropout, rng: &mut ChaCha8Rng) -> Example {
    let (c, x1) = data.choose(rng).unwrap();
    let t: f64 = rng.random();
    let x0: [f64; 2] = [StandardNormal.sample(rng), StandardNormal.sample(rng)];
    let xt = [t * x1[0] + (1.0 - t) * x0[0], t * x1[1] + (1.0 - t) * x0[1]];
    let kept = drop_elements(c, dropout, rng);
    let mut phi = Vec::new();
    model.features(&xt, t, &mut phi);
    Example { head: model.head(&kept), phi, target: [x1[0] - x0[0], x1[1] - x0[1]] }
}

fn loss(model: &ToyVelocity, batch: &[Example]) -> f64 {
    batch
        .iter()
        .map(|e| {
            let p = model.predict(e.head, &e.phi);
            (p[0] - e.target[0]).powi(2) + (p[1] - e.target[1]).powi(2)
        })
        .sum::<f64>()
        / batch.len() as f64
}

/// Fits a velocity model to context-labelled target samples by minibatch
/// Adam on the rectified-flow regression loss, dropping condition elements
/// at random so the model also learns the less-conditioned fields.
pub fn train_toy_velocity(
    data: &[(ContextSet, Vec<f64>)],
    cfg: &TrainConfig,
) -> Result<(ToyVelocity, TrainReport), TrainError> {
    let contexts: BTreeSet<&ContextSet> = data.iter().map(|(c, _)| c).collect();
    if contexts.len() < 2 {
        return Err(TrainError::BadData("need samples from at least two contexts".into()));
    }
    if let Some((_, x)) = data.iter().find(|(_, x)| x.len() != DIM || x.iter().any(|v| !v.is_finite())) {
        return Err(TrainError::BadData(format!("targets must be finite 2-D points, got {x:?}")));
    }
    if cfg.batch == 0 {
        return Err(TrainError::BadData("batch size must be positive".into()));
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for (_, x) in data {
        for d in 0..DIM {
            lo[d] = lo[d].min(x[d]).min(-2.5);
            hi[d] = hi[d].max(x[d]).max(2.5);
        }
    }
    let mut heads = BTreeMap::new();
    heads.insert(ContextSet::empty(), 0);
    for c in &contexts {
        for s in subsets(c) {
            let n = heads.len();
            heads.entry(s).or_insert(n);
        }
    }
    let mut model = ToyVelocity::new(heads, lo, hi);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let held: Vec<Example> = (0..4096).map(|_| draw(&model, data, cfg.dropout, &mut rng)).collect();

    let n = model.features_len();
    let mut visits = vec![0usize; model.heads.len()];
    let mut m = vec![0.0; model.weights.len()];
    let mut v = vec![0.0; model.weights.len()];
    let mut grad = vec![0.0; model.weights.len()];
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let initial_loss = loss(&model, &held);
    let mut curve = vec![(0, initial_loss)];
    let every = (cfg.iters / 20).max(1);
    for it in 1..=cfg.iters {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut batch_loss = 0.0;
        for _ in 0..cfg.batch {
            let e = draw(&model, data, cfg.dropout, &mut rng);
            let p = model.predict(e.head, &e.phi);
            visits[e.head] += 1;
            for d in 0..DIM {
                let r = p[d] - e.target[d];
                batch_loss += r * r;
                let off = (e.head * DIM + d) * n;
                for (g, f) in grad[off..off + n].iter_mut().zip(&e.phi) {
                    *g += 2.0 * r * f / cfg.batch as f64;
                }
            }
        }
        if !batch_loss.is_finite() {
            return Err(TrainError::Diverged(it));
        }
        // Cosine decay to a hundredth of the base rate.
        let progress = it as f64 / cfg.iters as f64;
        let lr = cfg.learning_rate * (0.01 + 0.99 * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()));
        let (c1, c2) = (1.0 - b1.powi(it as i32), 1.0 - b2.powi(it as i32));
        for k in 0..grad.len() {
            if grad[k] == 0.0 && m[k] == 0.0 {
                continue;
            }
            m[k] = b1 * m[k] + (1.0 - b1) * grad[k];
            v[k] = b2 * v[k] + (1.0 - b2) * grad[k] * grad[k];
            model.weights[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
        }
        if it % every == 0 || it == cfg.iters {
            let l = loss(&model, &held);
            if !l.is_finite() {
                return Err(TrainError::Diverged(it));
            }
            curve.push((it, l));
        }
    }
    // Heads that never saw data answer with the unconditional head instead.
    model.heads.retain(|c, h| c.is_empty() || visits[*h] > 0);
    let final_loss = curve.last().map(|c| c.1).unwrap_or(initial_loss);
    Ok((model, TrainReport { initial_loss, final_loss, curve }))
}
