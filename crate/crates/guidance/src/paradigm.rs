use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::context::{ContextSet, Element};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("no field registered for context {0}")]
    UnknownContext(String),
    #[error("expected a {expected}-dimensional point, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// A velocity model `v(x, t, c)`.
pub trait VelocityOracle: Sync {
    fn evaluate(&self, x: &[f64], t: f64, context: &ContextSet) -> Result<Vec<f64>, OracleError>;
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GuidanceError {
    #[error("context window {m}..={n} invalid at step {step}")]
    BadWindow { m: usize, n: usize, step: usize },
    #[error("steps are 1-based, got {0}")]
    BadStep(usize),
    #[error("guidance scales must be finite")]
    NonFiniteScale,
    #[error("need at least one integration step")]
    NoSteps,
    #[error("velocity became non-finite at t = {t}")]
    NonFiniteVelocity { t: f64 },
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Paradigm {
    SingleTurn,
    Default,
    Separate,
    FullContext,
    ContextGuided,
}

impl Paradigm {
    pub const ALL: [Paradigm; 5] =
        [Paradigm::SingleTurn, Paradigm::Default, Paradigm::Separate, Paradigm::FullContext, Paradigm::ContextGuided];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceSpec {
    pub paradigm: Paradigm,
    pub image_scale: f64,
    pub text_scale: f64,
    pub context_scale: f64,
    /// Intermediate results `I_m..=I_n` used for context guidance; `None`
    /// means the previous result alone.
    pub context_window: Option<(usize, usize)>,
}

impl Default for GuidanceSpec {
    fn default() -> Self {
        GuidanceSpec {
            paradigm: Paradigm::ContextGuided,
            image_scale: 1.5,
            text_scale: 4.0,
            context_scale: 2.5,
            context_window: None,
        }
    }
}

impl GuidanceSpec {
    pub fn new(paradigm: Paradigm, image_scale: f64, text_scale: f64, context_scale: f64) -> GuidanceSpec {
        GuidanceSpec { paradigm, image_scale, text_scale, context_scale, context_window: None }
    }
}

/// `scale * (v(plus) - v(minus))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceTerm {
    pub scale: f64,
    pub plus: ContextSet,
    pub minus: ContextSet,
}

/// A paradigm in normal form: `v(base) + sum of terms`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Guidance {
    pub base: ContextSet,
    pub terms: Vec<GuidanceTerm>,
}

impl Guidance {
    /// Net weight of every distinct context; the weights sum to one.
    pub fn coefficients(&self) -> BTreeMap<ContextSet, f64> {
        let mut out = BTreeMap::new();
        *out.entry(self.base.clone()).or_insert(0.0) += 1.0;
        for t in &self.terms {
            *out.entry(t.plus.clone()).or_insert(0.0) += t.scale;
            *out.entry(t.minus.clone()).or_insert(0.0) -= t.scale;
        }
        out
    }

    /// Distinct contexts the oracle is queried with.
    pub fn contexts(&self) -> Vec<&ContextSet> {
        let mut out = vec![&self.base];
        for t in self.terms.iter().filter(|t| t.scale != 0.0) {
            for c in [&t.plus, &t.minus] {
                if !out.contains(&c) {
                    out.push(c);
                }
            }
        }
        out
    }
}

fn term(scale: f64, plus: ContextSet, minus: ContextSet) -> GuidanceTerm {
    GuidanceTerm { scale, plus, minus }
}

/// The two-stage text-then-image guidance, flattened:
/// `v(img) + s_i (v_text - v(img))` with `v_text = v(text) + s_t (v(full) - v(text))`.
fn two_stage(full: ContextSet, cfg_text: ContextSet, cfg_img: ContextSet, s_img: f64, s_text: f64) -> Guidance {
    Guidance {
        base: cfg_img.clone(),
        terms: vec![term(s_img, cfg_text.clone(), cfg_img), term(s_img * s_text, full, cfg_text)],
    }
}

/// The two-stage formula evaluated literally on precomputed velocities.
pub fn two_stage_cfg(v_full: &[f64], v_text: &[f64], v_img: &[f64], s_img: f64, s_text: f64) -> Vec<f64> {
    (0..v_full.len())
        .map(|d| {
            let inner = v_text[d] + s_text * (v_full[d] - v_text[d]);
            v_img[d] + s_img * (inner - v_img[d])
        })
        .collect()
}

fn instructions_upto(i: usize) -> ContextSet {
    ContextSet::new((1..=i).map(Element::Instruction))
}

/// Normal form of `spec` when generating step `step` (1-based) of a
/// decomposed edit; the single-turn paradigm ignores `step`.
pub fn build_spec(spec: &GuidanceSpec, step: usize) -> Result<Guidance, GuidanceError> {
    let (gi, gt, gc) = (spec.image_scale, spec.text_scale, spec.context_scale);
    if !(gi.is_finite() && gt.is_finite() && gc.is_finite()) {
        return Err(GuidanceError::NonFiniteScale);
    }
    if spec.paradigm == Paradigm::SingleTurn {
        let full = ContextSet::new([Element::SourceImage, Element::Composite]);
        let text = ContextSet::new([Element::SourceImage]);
        let img = ContextSet::new([Element::Composite]);
        return Ok(two_stage(full, text, img, gi, gt));
    }
    if step == 0 {
        return Err(GuidanceError::BadStep(step));
    }
    let i = step;
    let full = ContextSet::interleaved(i, Some(i - 1));
    Ok(match spec.paradigm {
        Paradigm::SingleTurn => unreachable!(),
        Paradigm::Default => two_stage(full, ContextSet::interleaved(i - 1, Some(i - 1)), instructions_upto(i), gi, gt),
        Paradigm::Separate => {
            let images = ContextSet::new((0..i).map(Element::image));
            two_stage(full, images, instructions_upto(i), gi, gt)
        }
        Paradigm::FullContext => {
            // History without the current instruction and without the last
            // result, then each added back under its own scale.
            let base = ContextSet::interleaved(i - 1, i.checked_sub(2));
            let with_image = ContextSet::interleaved(i - 1, Some(i - 1));
            Guidance { base: base.clone(), terms: vec![term(gi, with_image.clone(), base), term(gt, full, with_image)] }
        }
        Paradigm::ContextGuided => {
            let source = ContextSet::new([Element::SourceImage]);
            let edit = source.clone().with((1..=i).map(Element::Instruction));
            let mut terms =
                vec![term(gi, source.clone(), ContextSet::empty()), term(gt, edit.clone(), source)];
            let window = match spec.context_window {
                Some((m, n)) if 1 <= m && m <= n && n < i => Some((m, n)),
                Some((m, n)) => return Err(GuidanceError::BadWindow { m, n, step: i }),
                None if i >= 2 => Some((i - 1, i - 1)),
                None => None,
            };
            if let Some((m, n)) = window {
                let ctx = edit.clone().with((m..=n).map(Element::Image));
                terms.push(term(gc, ctx, edit));
            }
            Guidance { base: ContextSet::empty(), terms }
        }
    })
}

/// `v(base) + sum scale * (v(plus) - v(minus))`, querying the oracle once
/// per distinct context. Zero-scale terms are skipped outright.
pub fn compose_velocity(
    oracle: &dyn VelocityOracle,
    guidance: &Guidance,
    x: &[f64],
    t: f64,
) -> Result<Vec<f64>, GuidanceError> {
    let mut memo: BTreeMap<&ContextSet, Vec<f64>> = BTreeMap::new();
    for c in guidance.contexts() {
        let v = oracle.evaluate(x, t, c)?;
        if v.len() != x.len() {
            return Err(OracleError::Dimension { expected: x.len(), got: v.len() }.into());
        }
        memo.insert(c, v);
    }
    let mut acc = memo[&guidance.base].clone();
    for term in guidance.terms.iter().filter(|t| t.scale != 0.0) {
        let (plus, minus) = (&memo[&term.plus], &memo[&term.minus]);
        for d in 0..acc.len() {
            acc[d] += term.scale * (plus[d] - minus[d]);
        }
    }
    Ok(acc)
}
