mod common;

use common::*;
use editforge_core::catalog::ColorName;
use editforge_core::ops::{apply, EditOp, OpParams};
use editforge_core::render::{render, silhouette_mask, Image, RenderConfig};
use editforge_eval::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise_image(seed: u64, size: u32) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = Image::new(size, size);
    img.pixels.iter_mut().for_each(|p| *p = rng.random());
    img
}

fn flat(size: u32, rgb: [u8; 3]) -> Image {
    let mut img = Image::new(size, size);
    img.pixels.chunks_mut(3).for_each(|p| p.copy_from_slice(&rgb));
    img
}

fn cfg() -> RenderConfig {
    RenderConfig { resolution: 128, supersampling: 2 }
}

#[test]
fn embeddings_are_unit_or_zero() {
    for seed in 0..5 {
        let e = embed(&noise_image(seed, 64));
        assert!((e.norm() - 1.0).abs() < 1e-9);
        assert_eq!(image_similarity(&e, &e), 1.0);
    }
    let z = embed(&flat(64, [40, 90, 200]));
    assert!(z.is_zero());
    assert_eq!(image_similarity(&z, &z), 1.0);
    assert_eq!(image_similarity(&z, &embed(&noise_image(1, 64))), 0.0);
}

#[test]
fn png_round_trip_preserves_the_metrics() {
    let img = render(&scene(2), &cfg());
    let back = Image::from_png(&img.to_png()).unwrap();
    assert_eq!(embed(&img), embed(&back));
}

#[test]
fn perfect_edit_scores_one_and_no_edit_has_no_direction() {
    let (src, tgt) = (noise_image(1, 64), noise_image(2, 64));
    let s = similarity_metrics(&src, &tgt, &tgt).unwrap();
    assert!((s.i_sim - 1.0).abs() < 1e-12);
    assert!((s.d_sim.unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(similarity_metrics(&src, &tgt, &src).unwrap().d_sim, None);
}

#[test]
fn direction_is_scale_invariant() {
    let base: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
    let delta: Vec<f64> = (0..12).map(|i| (i as f64 * 1.3).cos()).collect();
    let at = |k: f64| Embedding(base.iter().zip(&delta).map(|(b, d)| b + k * d).collect());
    assert!((direction_similarity(&at(0.0), &at(1.0), &at(0.3)).unwrap() - 1.0).abs() < 1e-12);
    assert!((direction_similarity(&at(0.0), &at(1.0), &at(-2.0)).unwrap() + 1.0).abs() < 1e-12);
}

#[test]
fn metrics_stay_in_range() {
    for seed in 0..20 {
        let [a, b, c] = [0, 1, 2].map(|k| noise_image(seed * 3 + k, 48));
        let s = similarity_metrics(&a, &b, &c).unwrap();
        assert!((-1.0..=1.0).contains(&s.i_sim));
        assert!((-1.0..=1.0).contains(&s.d_sim.unwrap()));
    }
}

#[test]
fn mismatched_sizes_are_rejected() {
    assert!(similarity_metrics(&noise_image(0, 32), &noise_image(1, 32), &noise_image(2, 16)).is_err());
}

#[test]
fn a_localised_recolor_points_the_right_way() {
    let mut checked = 0;
    for seed in 0..10 {
        let state = scene(seed);
        let src = render(&state, &cfg());
        // The object covering the most pixels gets a clearly different colour.
        let (id, mask) = state
            .objects
            .keys()
            .map(|id| (*id, silhouette_mask(&state, &cfg(), *id).unwrap()))
            .max_by_key(|(_, m)| m.iter().filter(|b| **b).count())
            .unwrap();
        let old = state.objects[&id].color;
        let color = *ColorName::ALL.iter().rev().find(|c| **c != old).unwrap();
        let after = apply(&state, &EditOp::new(OpParams::ColorChange { target: id, color }, 0), catalog()).unwrap().new_state;
        let tgt = render(&after, &cfg());

        let mut local = src.clone();
        for (i, inside) in mask.iter().enumerate() {
            if *inside {
                local.pixels[i * 3..i * 3 + 3].copy_from_slice(&tgt.pixels[i * 3..i * 3 + 3]);
            }
        }
        let good = similarity_metrics(&src, &tgt, &local).unwrap();
        assert!(good.d_sim.unwrap() >= 0.9, "seed {seed}: {good:?}");

        // Recolouring everything outside the object is an edit in the wrong place.
        let mut elsewhere = src.clone();
        for (i, inside) in mask.iter().enumerate() {
            if !*inside {
                elsewhere.pixels[i * 3] = elsewhere.pixels[i * 3].wrapping_add(90);
            }
        }
        let bad = similarity_metrics(&src, &tgt, &elsewhere).unwrap();
        assert!(bad.d_sim.unwrap() < good.d_sim.unwrap() - 0.5, "seed {seed}: {bad:?}");
        checked += 1;
    }
    assert_eq!(checked, 10);
}
