use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::context::ContextSet;
use crate::paradigm::{OracleError, VelocityOracle};

/// Isotropic Gaussian target `N(mean, std^2 I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: Vec<f64>,
    pub std: f64,
}

impl Gaussian {
    pub fn new(mean: impl Into<Vec<f64>>, std: f64) -> Gaussian {
        assert!(std > 0.0 && std.is_finite(), "standard deviation must be positive");
        Gaussian { mean: mean.into(), std }
    }

    /// `E[X1 - X0 | Xt = x]` with `X1 ~ self`, `X0 ~ N(0, I)` and
    /// `Xt = t X1 + (1 - t) X0`.
    pub fn velocity(&self, x: &[f64], t: f64) -> Vec<f64> {
        let var = self.std * self.std;
        let s = 1.0 - t;
        let gain = (t * var - s) / (t * t * var + s * s);
        self.mean.iter().zip(x).map(|(m, xi)| m + gain * (xi - t * m)).collect()
    }

    /// Log density of `Xt` at `x`, up to a constant shared by equal-dimension
    /// Gaussians.
    fn log_marginal(&self, x: &[f64], t: f64) -> f64 {
        let var = t * t * self.std * self.std + (1.0 - t) * (1.0 - t);
        let d2: f64 = self.mean.iter().zip(x).map(|(m, xi)| (xi - t * m).powi(2)).sum();
        -0.5 * d2 / var - 0.5 * x.len() as f64 * var.ln()
    }
}

/// Closed-form velocity of per-context Gaussian targets.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GaussianField {
    pub targets: BTreeMap<ContextSet, Gaussian>,
    /// Used for contexts without their own target.
    pub fallback: Option<Gaussian>,
}

impl GaussianField {
    pub fn new(targets: impl IntoIterator<Item = (ContextSet, Gaussian)>) -> GaussianField {
        GaussianField { targets: targets.into_iter().collect(), fallback: None }
    }

    pub fn with_fallback(mut self, g: Gaussian) -> GaussianField {
        self.fallback = Some(g);
        self
    }

    pub fn target(&self, c: &ContextSet) -> Result<&Gaussian, OracleError> {
        self.targets.get(c).or(self.fallback.as_ref()).ok_or_else(|| OracleError::UnknownContext(c.to_string()))
    }
}

impl VelocityOracle for GaussianField {
    fn evaluate(&self, x: &[f64], t: f64, c: &ContextSet) -> Result<Vec<f64>, OracleError> {
        let g = self.target(c)?;
        if g.mean.len() != x.len() {
            return Err(OracleError::Dimension { expected: g.mean.len(), got: x.len() });
        }
        Ok(g.velocity(x, t))
    }
}

/// Velocity of a weighted Gaussian mixture, i.e. the marginal field a model
/// learns when the condition is dropped.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureField {
    pub components: Vec<(f64, Gaussian)>,
}

impl MixtureField {
    pub fn velocity(&self, x: &[f64], t: f64) -> Vec<f64> {
        let logs: Vec<f64> = self.components.iter().map(|(w, g)| w.ln() + g.log_marginal(x, t)).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut out = vec![0.0; x.len()];
        for ((_, g), w) in self.components.iter().zip(weights) {
            for (o, v) in out.iter_mut().zip(g.velocity(x, t)) {
                *o += w / total * v;
            }
        }
        out
    }
}

impl VelocityOracle for MixtureField {
    fn evaluate(&self, x: &[f64], t: f64, _: &ContextSet) -> Result<Vec<f64>, OracleError> {
        Ok(self.velocity(x, t))
    }
}

/// Monte-Carlo estimate of `E[X1 - X0 | Xt = x]` by self-normalised
/// importance sampling along the line `t X1 + (1 - t) X0 = x`: one endpoint
/// is drawn from its prior and the pair is weighted by the other's density.
/// The drawn endpoint is whichever moves less under conditioning, which
/// keeps the weights tame wherever `Xt` has mass. Valid for `t < 1`.
pub fn monte_carlo_velocity(target: &Gaussian, x: &[f64], t: f64, samples: usize, seed: u64) -> Vec<f64> {
    assert!((0.0..1.0).contains(&t), "conditioning needs t < 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = 1.0 - t;
    let dim = x.len();
    let draw_target = t * target.std < s;
    let var = target.std * target.std;
    let mut logw = Vec::with_capacity(samples);
    let mut diffs = Vec::with_capacity(samples * dim);
    for _ in 0..samples {
        let mut lw = 0.0;
        for d in 0..dim {
            let z: f64 = StandardNormal.sample(&mut rng);
            let (x1, x0) = if draw_target {
                let x1 = target.mean[d] + target.std * z;
                let x0 = (x[d] - t * x1) / s;
                lw -= 0.5 * x0 * x0;
                (x1, x0)
            } else {
                let x1 = (x[d] - s * z) / t;
                lw -= 0.5 * (x1 - target.mean[d]).powi(2) / var;
                (x1, z)
            };
            diffs.push(x1 - x0);
        }
        logw.push(lw);
    }
    let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut out = vec![0.0; dim];
    for (k, l) in logw.iter().enumerate() {
        let w = (l - top).exp();
        total += w;
        for d in 0..dim {
            out[d] += w * diffs[k * dim + d];
        }
    }
    out.iter().map(|v| v / total).collect()
}

/// Multiplies another oracle's output by a constant.
pub struct Scaled<'a> {
    pub inner: &'a dyn VelocityOracle,
    pub factor: f64,
}

impl VelocityOracle for Scaled<'_> {
    fn evaluate(&self, x: &[f64], t: f64, c: &ContextSet) -> Result<Vec<f64>, OracleError> {
        Ok(self.inner.evaluate(x, t, c)?.into_iter().map(|v| v * self.factor).collect())
    }
}
