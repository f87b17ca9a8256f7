use editforge_guidance::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Two different instructions applied to the same source image.
fn first() -> ContextSet {
    ContextSet::new([Element::SourceImage, Element::Instruction(1)])
}

fn second() -> ContextSet {
    ContextSet::new([Element::SourceImage, Element::Instruction(2)])
}

fn targets() -> [(ContextSet, Gaussian); 2] {
    [(first(), Gaussian::new(vec![2.0, 0.5], 1.0)), (second(), Gaussian::new(vec![0.5, 2.0], 1.0))]
}

fn dataset(per_context: usize) -> Vec<(ContextSet, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut out = Vec::new();
    for (c, g) in targets() {
        for _ in 0..per_context {
            let x: Vec<f64> = g.mean.iter().map(|m| { let z: f64 = StandardNormal.sample(&mut rng); m + g.std * z }).collect();
            out.push((c.clone(), x));
        }
    }
    out
}

/// 20x20 points spanning +-2 standard deviations of the marginal of Xt at
/// each of 10 times.
fn rmse(model: &dyn VelocityOracle, c: &ContextSet, truth: impl Fn(&[f64], f64) -> Vec<f64>, centre: [f64; 2], std: f64) -> f64 {
    let mut sum = 0.0;
    let mut n = 0;
    for k in 0..10 {
        let t = (k as f64 + 0.5) / 10.0;
        let spread = (t * t * std * std + (1.0 - t) * (1.0 - t)).sqrt();
        for i in 0..20 {
            for j in 0..20 {
                let z = |q: usize| -2.0 + 4.0 * q as f64 / 19.0;
                let x = [t * centre[0] + spread * z(i), t * centre[1] + spread * z(j)];
                let (p, q) = (model.evaluate(&x, t, c).unwrap(), truth(&x, t));
                sum += (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
                n += 2;
            }
        }
    }
    (sum / n as f64).sqrt()
}

#[test]
fn loss_halves_within_two_thousand_iterations() {
    let (_, report) = train_toy_velocity(&dataset(2000), &TrainConfig::default()).unwrap();
    assert!(report.final_loss <= 0.5 * report.initial_loss, "{report:?}");
}

#[test]
fn trained_field_matches_the_analytic_field() {
    let cfg = TrainConfig { iters: 8000, ..Default::default() };
    let (model, _) = train_toy_velocity(&dataset(5000), &cfg).unwrap();
    for (c, g) in targets() {
        let err = rmse(&model, &c, |x, t| g.velocity(x, t), [g.mean[0], g.mean[1]], g.std);
        assert!(err < 0.1, "{c}: rmse {err}");
    }
}

/// Mixture of the two targets with the given weights, and a grid frame
/// covering both.
fn pooled(weights: [f64; 2]) -> (MixtureField, [f64; 2], f64) {
    let [(_, a), (_, b)] = targets();
    let total = weights[0] + weights[1];
    let (wa, wb) = (weights[0] / total, weights[1] / total);
    let centre = [wa * a.mean[0] + wb * b.mean[0], wa * a.mean[1] + wb * b.mean[1]];
    let gap2 = (a.mean[0] - b.mean[0]).powi(2) + (a.mean[1] - b.mean[1]).powi(2);
    let std = (wa * wb * gap2 / 2.0 + a.std.powi(2)).sqrt();
    (MixtureField { components: vec![(wa, a), (wb, b)] }, centre, std)
}

#[test]
fn fully_dropped_conditions_learn_the_marginal_field() {
    let cfg = TrainConfig { iters: 8000, dropout: Dropout { text: 1.0, image: 1.0 }, ..Default::default() };
    let (model, _) = train_toy_velocity(&dataset(5000), &cfg).unwrap();
    assert_eq!(model.conditions().count(), 1);
    let (mixture, centre, std) = pooled([1.0, 1.0]);
    for c in [ContextSet::empty(), first()] {
        let err = rmse(&model, &c, |x, t| mixture.velocity(x, t), centre, std);
        assert!(err < 0.15, "{c}: rmse {err}");
    }
}

/// With the instruction dropped, both contexts look like the bare source
/// image, so that head learns the even mixture.
#[test]
fn shared_subsets_learn_the_pooled_field() {
    let cfg = TrainConfig { iters: 8000, ..Default::default() };
    let (model, _) = train_toy_velocity(&dataset(5000), &cfg).unwrap();
    let (mixture, centre, std) = pooled([1.0, 1.0]);
    let err = rmse(&model, &ContextSet::new([Element::SourceImage]), |x, t| mixture.velocity(x, t), centre, std);
    assert!(err < 0.15, "rmse {err}");
}

#[test]
fn training_is_deterministic() {
    let cfg = TrainConfig { iters: 50, ..Default::default() };
    let (a, ra) = train_toy_velocity(&dataset(100), &cfg).unwrap();
    let (b, rb) = train_toy_velocity(&dataset(100), &cfg).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(a.evaluate(&[0.1, 0.2], 0.3, &first()), b.evaluate(&[0.1, 0.2], 0.3, &first()));
}

#[test]
fn divergence_is_reported() {
    let cfg = TrainConfig { iters: 200, learning_rate: 1e300, ..Default::default() };
    assert!(matches!(train_toy_velocity(&dataset(100), &cfg), Err(TrainError::Diverged(_))));
}

#[test]
fn bad_points_are_rejected() {
    let mut data = dataset(10);
    data.push((first(), vec![1.0, 2.0, 3.0]));
    assert!(matches!(train_toy_velocity(&data, &TrainConfig::default()), Err(TrainError::BadData(_))));
}

