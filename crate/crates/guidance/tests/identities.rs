use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicUsize, Ordering};

use editforge_guidance::*;

/// Arbitrary smooth, context-dependent, nonlinear velocities.
struct Wiggly;

impl VelocityOracle for Wiggly {
    fn evaluate(&self, x: &[f64], t: f64, c: &ContextSet) -> Result<Vec<f64>, OracleError> {
        let mut h = DefaultHasher::new();
        c.hash(&mut h);
        let k = (h.finish() % 1000) as f64 / 100.0;
        Ok(vec![
            (k * x[0]).sin() + x[1] * t + k,
            (x[0] * x[1] + k * t).cos() * (1.0 + k) - x[1],
        ])
    }
}

/// Counts evaluations and refuses contexts outside an allow-list.
struct Counting<'a> {
    calls: AtomicUsize,
    allowed: Option<&'a [ContextSet]>,
}

impl VelocityOracle for Counting<'_> {
    fn evaluate(&self, x: &[f64], t: f64, c: &ContextSet) -> Result<Vec<f64>, OracleError> {
        if let Some(a) = self.allowed {
            if !a.contains(c) {
                return Err(OracleError::UnknownContext(c.to_string()));
            }
        }
        self.calls.fetch_add(1, Ordering::SeqCst);
        Wiggly.evaluate(x, t, c)
    }
}

fn grid() -> Vec<(Vec<f64>, f64)> {
    let mut out = Vec::new();
    for i in 0..10 {
        for j in 0..10 {
            for k in 0..5 {
                let x = vec![-3.0 + 6.0 * i as f64 / 9.0, -3.0 + 6.0 * j as f64 / 9.0];
                out.push((x, k as f64 / 5.0));
            }
        }
    }
    out
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

fn v(c: &ContextSet, x: &[f64], t: f64) -> Vec<f64> {
    Wiggly.evaluate(x, t, c).unwrap()
}

fn naive(g: &Guidance, x: &[f64], t: f64) -> Vec<f64> {
    let mut acc = v(&g.base, x, t);
    for term in &g.terms {
        let (p, m) = (v(&term.plus, x, t), v(&term.minus, x, t));
        for d in 0..acc.len() {
            acc[d] += term.scale * (p[d] - m[d]);
        }
    }
    acc
}

fn spec(paradigm: Paradigm, gi: f64, gt: f64, gc: f64) -> GuidanceSpec {
    GuidanceSpec::new(paradigm, gi, gt, gc)
}

#[test]
fn zero_context_scale_reduces_to_the_direct_edit() {
    for i in 1..=5 {
        let g = build_spec(&spec(Paradigm::ContextGuided, 1.5, 4.0, 0.0), i).unwrap();
        let source = ContextSet::new([Element::SourceImage]);
        let edit = source.clone().with((1..=i).map(Element::Instruction));
        for (x, t) in grid() {
            let (n, s, e) = (v(&ContextSet::empty(), &x, t), v(&source, &x, t), v(&edit, &x, t));
            let direct: Vec<f64> = (0..2).map(|d| n[d] + 1.5 * (s[d] - n[d]) + 4.0 * (e[d] - s[d])).collect();
            let got = compose_velocity(&Wiggly, &g, &x, t).unwrap();
            assert!(max_gap(&got, &direct) <= 1e-12, "step {i}");
        }
    }
}

#[test]
fn unit_scales_collapse_to_the_full_history() {
    for paradigm in [Paradigm::Default, Paradigm::Separate, Paradigm::FullContext] {
        for i in 1..=5 {
            let g = build_spec(&spec(paradigm, 1.0, 1.0, 1.0), i).unwrap();
            let full = ContextSet::interleaved(i, Some(i - 1));
            for (x, t) in grid() {
                let got = compose_velocity(&Wiggly, &g, &x, t).unwrap();
                assert!(max_gap(&got, &v(&full, &x, t)) <= 1e-12, "{paradigm:?} step {i}");
            }
        }
    }
}

#[test]
fn zero_scale_terms_are_never_evaluated() {
    for paradigm in Paradigm::ALL {
        for i in 1..=4 {
            let base = build_spec(&spec(paradigm, 1.3, 2.2, 0.7), i).unwrap();
            let mut padded = base.clone();
            let alien = ContextSet::new([Element::Image(99)]);
            padded.terms.insert(0, GuidanceTerm { scale: 0.0, plus: alien.clone(), minus: alien });
            let allowed: Vec<ContextSet> = base.contexts().into_iter().cloned().collect();
            let oracle = Counting { calls: AtomicUsize::new(0), allowed: Some(&allowed) };
            for (x, t) in grid() {
                let a = compose_velocity(&oracle, &padded, &x, t).unwrap();
                let b = compose_velocity(&Wiggly, &base, &x, t).unwrap();
                assert_eq!(a, b);
            }
        }
    }
    // Zeroing a paradigm scale is the same as dropping its term.
    let g = build_spec(&spec(Paradigm::FullContext, 0.0, 3.0, 1.0), 3).unwrap();
    let dropped = Guidance { base: g.base.clone(), terms: g.terms[1..].to_vec() };
    for (x, t) in grid() {
        assert_eq!(compose_velocity(&Wiggly, &g, &x, t).unwrap(), compose_velocity(&Wiggly, &dropped, &x, t).unwrap());
    }
}

#[test]
fn nested_and_flat_two_stage_forms_agree() {
    for paradigm in [Paradigm::SingleTurn, Paradigm::Default, Paradigm::Separate] {
        for (gi, gt) in [(1.5, 4.0), (0.3, 7.5), (2.0, 0.0), (-1.0, 2.5)] {
            for i in 1..=4 {
                let g = build_spec(&spec(paradigm, gi, gt, 0.0), i).unwrap();
                // base = image-free context, first term's plus = text-free context.
                let (img, text, full) = (&g.base, &g.terms[0].plus, &g.terms[1].plus);
                for (x, t) in grid() {
                    let nested = two_stage_cfg(&v(full, &x, t), &v(text, &x, t), &v(img, &x, t), gi, gt);
                    let flat = compose_velocity(&Wiggly, &g, &x, t).unwrap();
                    assert!(max_gap(&nested, &flat) <= 1e-12, "{paradigm:?} {gi} {gt}");
                }
            }
        }
    }
}

#[test]
fn composition_is_linear_in_the_oracle() {
    for paradigm in Paradigm::ALL {
        let g = build_spec(&GuidanceSpec { paradigm, ..Default::default() }, 3).unwrap();
        for alpha in [2.0, -0.5, 3.25] {
            let scaled = Scaled { inner: &Wiggly, factor: alpha };
            for (x, t) in grid() {
                let a = compose_velocity(&scaled, &g, &x, t).unwrap();
                let b: Vec<f64> = compose_velocity(&Wiggly, &g, &x, t).unwrap().iter().map(|v| alpha * v).collect();
                assert!(max_gap(&a, &b) <= 1e-12 * (1.0 + b.iter().map(|v| v.abs()).fold(0.0, f64::max)));
            }
        }
    }
}

#[test]
fn memoised_composition_matches_naive_evaluation() {
    for paradigm in Paradigm::ALL {
        for i in 1..=4 {
            let g = build_spec(&GuidanceSpec { paradigm, ..Default::default() }, i).unwrap();
            let oracle = Counting { calls: AtomicUsize::new(0), allowed: None };
            let (x, t) = (vec![0.4, -1.1], 0.35);
            assert_eq!(compose_velocity(&oracle, &g, &x, t).unwrap(), naive(&g, &x, t));
            assert_eq!(oracle.calls.load(Ordering::SeqCst), g.contexts().len());
        }
    }
}

#[test]
fn coefficients_sum_to_one() {
    for paradigm in Paradigm::ALL {
        for i in 1..=5 {
            let g = build_spec(&GuidanceSpec { paradigm, ..Default::default() }, i).unwrap();
            let total: f64 = g.coefficients().values().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn context_sets_per_paradigm() {
    let show = |g: &Guidance| {
        let mut out = vec![g.base.to_string()];
        for t in &g.terms {
            out.push(format!("{} {} {}", t.scale, t.plus, t.minus));
        }
        out
    };
    let s = |p| spec(p, 1.5, 4.0, 2.5);
    assert_eq!(show(&build_spec(&s(Paradigm::SingleTurn), 7).unwrap()), ["{Tc}", "1.5 {I0} {Tc}", "6 {I0, Tc} {I0}"]);
    assert_eq!(
        show(&build_spec(&s(Paradigm::Default), 3).unwrap()),
        ["{T1, T2, T3}", "1.5 {I0, T1, I1, T2, I2} {T1, T2, T3}", "6 {I0, T1, I1, T2, I2, T3} {I0, T1, I1, T2, I2}"]
    );
    assert_eq!(
        show(&build_spec(&s(Paradigm::Separate), 3).unwrap()),
        ["{T1, T2, T3}", "1.5 {I0, I1, I2} {T1, T2, T3}", "6 {I0, T1, I1, T2, I2, T3} {I0, I1, I2}"]
    );
    assert_eq!(
        show(&build_spec(&s(Paradigm::FullContext), 3).unwrap()),
        ["{I0, T1, I1, T2}", "1.5 {I0, T1, I1, T2, I2} {I0, T1, I1, T2}", "4 {I0, T1, I1, T2, I2, T3} {I0, T1, I1, T2, I2}"]
    );
    assert_eq!(show(&build_spec(&s(Paradigm::FullContext), 1).unwrap())[0], "{}");
    assert_eq!(
        show(&build_spec(&s(Paradigm::ContextGuided), 3).unwrap()),
        ["{}", "1.5 {I0} {}", "4 {I0, T1, T2, T3} {I0}", "2.5 {I0, T1, T2, T3, I2} {I0, T1, T2, T3}"]
    );
    // Nothing precedes the first step, so there is no context term.
    assert_eq!(build_spec(&s(Paradigm::ContextGuided), 1).unwrap().terms.len(), 2);
}

#[test]
fn previous_result_window_is_the_default() {
    for i in 2..=6 {
        let implicit = build_spec(&GuidanceSpec::default(), i).unwrap();
        let explicit = build_spec(&GuidanceSpec { context_window: Some((i - 1, i - 1)), ..Default::default() }, i).unwrap();
        assert_eq!(implicit, explicit);
        let ctx = &explicit.terms[2];
        let extra: Vec<_> = ctx.plus.elements().iter().filter(|e| !ctx.minus.elements().contains(e)).collect();
        assert_eq!(extra, [&Element::Image(i - 1)]);
    }
    let wide = build_spec(&GuidanceSpec { context_window: Some((1, 3)), ..Default::default() }, 5).unwrap();
    assert_eq!(wide.terms[2].plus.to_string(), "{I0, T1, T2, T3, T4, T5, I1, I2, I3}");
}

#[test]
fn invalid_specs_are_rejected() {
    for (m, n, i) in [(0, 1, 3), (2, 1, 3), (1, 3, 3), (1, 1, 1)] {
        let s = GuidanceSpec { context_window: Some((m, n)), ..Default::default() };
        assert_eq!(build_spec(&s, i), Err(GuidanceError::BadWindow { m, n, step: i }));
    }
    assert_eq!(build_spec(&GuidanceSpec::default(), 0), Err(GuidanceError::BadStep(0)));
    let s = GuidanceSpec { text_scale: f64::NAN, ..Default::default() };
    assert_eq!(build_spec(&s, 2), Err(GuidanceError::NonFiniteScale));
    assert!(build_spec(&spec(Paradigm::SingleTurn, 1.0, 1.0, 1.0), 0).is_ok());
}

#[test]
fn oracle_failures_propagate() {
    let field = GaussianField::new([(ContextSet::empty(), Gaussian::new(vec![0.0, 0.0], 1.0))]);
    let g = build_spec(&GuidanceSpec::default(), 2).unwrap();
    assert!(matches!(compose_velocity(&field, &g, &[0.0, 0.0], 0.5), Err(GuidanceError::Oracle(OracleError::UnknownContext(_)))));
    let json = serde_json::to_string(&g).unwrap();
    assert_eq!(serde_json::from_str::<Guidance>(&json).unwrap(), g);
}
