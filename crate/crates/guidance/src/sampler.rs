use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::context::ContextSet;
use crate::field::{Gaussian, GaussianField};
use crate::paradigm::{build_spec, compose_velocity, Guidance, GuidanceError, GuidanceSpec, Paradigm, VelocityOracle};

pub const DEFAULT_STEPS: usize = 50;

/// Explicit Euler from `t = 0` to `t = 1` with uniform steps.
pub fn euler_sample(
    oracle: &dyn VelocityOracle,
    guidance: &Guidance,
    x0: &[f64],
    steps: usize,
) -> Result<Vec<f64>, GuidanceError> {
    if steps == 0 {
        return Err(GuidanceError::NoSteps);
    }
    let dt = 1.0 / steps as f64;
    let mut x = x0.to_vec();
    for k in 0..steps {
        let t = k as f64 * dt;
        let v = compose_velocity(oracle, guidance, &x, t)?;
        if v.iter().any(|c| !c.is_finite()) {
            return Err(GuidanceError::NonFiniteVelocity { t });
        }
        for (xi, vi) in x.iter_mut().zip(v) {
            *xi += dt * vi;
        }
    }
    Ok(x)
}

/// Standard-normal starting point for sample `index` of a batch.
pub fn noise(dim: usize, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Mean endpoint over `samples` noise draws; parallel across draws and
/// independent of the thread count.
pub fn terminal_mean(
    oracle: &dyn VelocityOracle,
    guidance: &Guidance,
    dim: usize,
    samples: usize,
    steps: usize,
    seed: u64,
) -> Result<Vec<f64>, GuidanceError> {
    let ends: Vec<Vec<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|k| euler_sample(oracle, guidance, &noise(dim, seed, k), steps))
        .collect::<Result<_, _>>()?;
    let mut mean = vec![0.0; dim];
    for e in &ends {
        for (m, v) in mean.iter_mut().zip(e) {
            *m += v / samples as f64;
        }
    }
    Ok(mean)
}

/// Terminal mean predicted in closed form when every context has a Gaussian
/// target with the same spread: the guided field is then itself a Gaussian
/// field whose mean is the coefficient-weighted mean of the targets.
pub fn predicted_mean(field: &GaussianField, guidance: &Guidance) -> Result<Vec<f64>, GuidanceError> {
    let mut out: Option<Vec<f64>> = None;
    for (c, w) in guidance.coefficients() {
        let g = field.target(&c)?;
        let acc = out.get_or_insert_with(|| vec![0.0; g.mean.len()]);
        for (a, m) in acc.iter_mut().zip(&g.mean) {
            *a += w * m;
        }
    }
    Ok(out.unwrap_or_default())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gammas {
    pub image: f64,
    pub text: f64,
    pub context: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub paradigm: Paradigm,
    pub gammas: Gammas,
    pub step: usize,
    pub steps: usize,
    pub samples: usize,
    pub terminal_mean: Vec<f64>,
    pub expected_mean: Vec<f64>,
    /// Largest coordinate gap between the two means.
    pub error: f64,
    pub targets: Vec<(ContextSet, Vec<f64>)>,
    /// Context-guided runs only: largest coordinate gap between this terminal
    /// mean and that of the same run with the context term switched off.
    pub direct_edit_gap: Option<f64>,
}

/// Unit-spread Gaussian targets for every context the guidance touches,
/// with means spread evenly on a circle of radius 2.
pub fn demo_field(guidance: &Guidance) -> GaussianField {
    let contexts: Vec<ContextSet> = guidance.coefficients().into_keys().collect();
    let n = contexts.len() as f64;
    GaussianField::new(contexts.into_iter().enumerate().map(|(k, c)| {
        let a = TAU * k as f64 / n;
        (c, Gaussian::new(vec![2.0 * a.cos(), 2.0 * a.sin()], 1.0))
    }))
}

fn mean_of(points: &[Vec<f64>]) -> Vec<f64> {
    let mut mean = vec![0.0; points.first().map_or(0, Vec::len)];
    for p in points {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v / points.len() as f64;
        }
    }
    mean
}

/// Samples the guided demo field for `spec` at decomposition step `step`.
pub fn run_demo(
    spec: &GuidanceSpec,
    step: usize,
    steps: usize,
    samples: usize,
    seed: u64,
) -> Result<(DemoReport, Vec<Vec<f64>>), GuidanceError> {
    let guidance = build_spec(spec, step)?;
    let field = demo_field(&guidance);
    let expected = predicted_mean(&field, &guidance)?;
    let sample_all = |g: &Guidance| -> Result<Vec<Vec<f64>>, GuidanceError> {
        (0..samples as u64).into_par_iter().map(|k| euler_sample(&field, g, &noise(2, seed, k), steps)).collect()
    };
    let ends = sample_all(&guidance)?;
    let mean = mean_of(&ends);
    let gap = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let error = gap(&mean, &expected);
    let direct_edit_gap = match spec.paradigm {
        Paradigm::ContextGuided => {
            let direct = build_spec(&GuidanceSpec { context_scale: 0.0, ..spec.clone() }, step)?;
            Some(gap(&mean, &mean_of(&sample_all(&direct)?)))
        }
        _ => None,
    };
    let report = DemoReport {
        paradigm: spec.paradigm,
        gammas: Gammas { image: spec.image_scale, text: spec.text_scale, context: spec.context_scale },
        step,
        steps,
        samples,
        terminal_mean: mean,
        expected_mean: expected,
        error,
        targets: field.targets.iter().map(|(c, g)| (c.clone(), g.mean.clone())).collect(),
        direct_edit_gap,
    };
    Ok((report, ends))
}
