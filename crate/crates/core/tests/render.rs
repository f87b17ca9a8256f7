mod common;

use common::*;
use editforge_core::catalog::{ColorName, MaterialName};
use editforge_core::ops::*;
use editforge_core::render::*;
use editforge_core::rng::SeedStream;
use editforge_core::scene::{Camera, SceneState};
use editforge_core::geometry::Vec3;
use rand::seq::IndexedRandom;

fn cfg() -> RenderConfig {
    RenderConfig::default()
}

fn dilate(mask: &[bool], res: usize) -> Vec<bool> {
    let mut out = mask.to_vec();
    for y in 0..res {
        for x in 0..res {
            if !mask[y * res + x] {
                continue;
            }
            for (dx, dy) in [(-1i64, -1i64), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)] {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if (0..res as i64).contains(&nx) && (0..res as i64).contains(&ny) {
                    out[ny as usize * res + nx as usize] = true;
                }
            }
        }
    }
    out
}

/// Pixels that differ between the renders of `a` and `b` outside the
/// dilated union of the edited object's silhouettes.
fn pixels_outside(a: &SceneState, b: &SceneState, id: editforge_core::scene::ObjectId) -> usize {
    let c = cfg();
    let res = c.resolution as usize;
    let (ia, ib) = (render(a, &c), render(b, &c));
    let ma = silhouette_mask(a, &c, id).unwrap();
    let mb = silhouette_mask(b, &c, id).unwrap();
    let union: Vec<bool> = ma.iter().zip(&mb).map(|(x, y)| *x || *y).collect();
    let allowed = dilate(&union, res);
    (0..res * res).filter(|&i| !allowed[i] && ia.pixels[i * 3..i * 3 + 3] != ib.pixels[i * 3..i * 3 + 3]).count()
}

#[test]
fn rendering_is_deterministic_and_png_stable() {
    let s = scene(9);
    let a = render(&s, &cfg()).to_png();
    let b = render(&s, &cfg()).to_png();
    assert_eq!(digest(&a), digest(&b));
    let back = Image::from_png(&a).unwrap();
    assert_eq!(back, render(&s, &cfg()));
    assert_eq!(back.to_png(), a);
}

#[test]
fn resolution_must_be_a_power_of_two() {
    assert!(RenderConfig { resolution: 200, supersampling: 2 }.validate().is_err());
    assert!(RenderConfig { resolution: 128, supersampling: 3 }.validate().is_err());
    assert!(RenderConfig { resolution: 128, supersampling: 1 }.validate().is_ok());
}

#[test]
fn attribute_edits_stay_inside_the_silhouette() {
    for seed in 0..100 {
        let s = scene(seed);
        let mut rng = SeedStream(seed).child("locality", 0).rng();
        let ids: Vec<_> = s.objects.keys().copied().collect();
        let id = *ids.choose(&mut rng).unwrap();
        let obj = &s.objects[&id];
        let color = **ColorName::ALL.iter().filter(|c| **c != obj.color).collect::<Vec<_>>().choose(&mut rng).unwrap();
        let material = **MaterialName::ALL.iter().filter(|m| **m != obj.material).collect::<Vec<_>>().choose(&mut rng).unwrap();
        for params in [OpParams::ColorChange { target: id, color }, OpParams::MaterialChange { target: id, material }] {
            let t = step(&s, params.clone());
            assert_eq!(pixels_outside(&s, &t, id), 0, "seed {seed}: {params:?}");
        }
    }
}

/// Luminance of object pixels; room surfaces (often periodic textures that
/// would alias the correlation) are blanked.
fn object_luma(state: &SceneState, c: &RenderConfig) -> Vec<f64> {
    let img = render(state, c);
    let background = owner_mask(&owner_buffer(state, c, false), c, None);
    img.pixels
        .chunks(3)
        .zip(background)
        .map(|(p, bg)| if bg { 0.0 } else { 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64 })
        .collect()
}

/// Normalised correlation of `b(x)` with `a(x - d)` over their overlap.
fn correlation(ga: &[f64], gb: &[f64], w: i64, h: i64, d: i64) -> f64 {
    let mut pairs = Vec::new();
    for y in 0..h {
        for x in 0.max(d)..w.min(w + d) {
            pairs.push((ga[(y * w + x - d) as usize], gb[(y * w + x) as usize]));
        }
    }
    let n = pairs.len() as f64;
    let (ma, mb) = pairs.iter().fold((0.0, 0.0), |(p, q), (a, b)| (p + a / n, q + b / n));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (a, b) in pairs {
        sab += (a - ma) * (b - mb);
        saa += (a - ma) * (a - ma);
        sbb += (b - mb) * (b - mb);
    }
    sab / (saa * sbb).sqrt().max(1e-12)
}

/// Horizontal offset `d` maximising the correlation of `b(x)` with `a(x - d)`.
fn best_shift(a: &SceneState, b: &SceneState, c: &RenderConfig, range: i64) -> i64 {
    let (ga, gb) = (object_luma(a, c), object_luma(b, c));
    let (w, h) = (c.resolution as i64, c.resolution as i64);
    (-range..=range)
        .max_by(|&p, &q| correlation(&ga, &gb, w, h, p).total_cmp(&correlation(&ga, &gb, w, h, q)))
        .unwrap()
}

#[test]
fn panning_right_moves_content_left() {
    let c = RenderConfig { resolution: 128, supersampling: 1 };
    let mut passed = 0;
    let mut seed = 0;
    while passed < 50 {
        let s = scene(seed);
        seed += 1;
        let Ok(out) = run(&s, OpParams::viewpoint(CameraMotion::Pan, CameraDirection::Right)) else { continue };
        let d = best_shift(&s, &out.new_state, &c, 24);
        assert!(d < 0, "seed {}: shift {d}", seed - 1);
        passed += 1;
    }
}

#[test]
fn masks_partition_the_frame() {
    for seed in 0..10 {
        let s = scene(seed);
        let owners = owner_buffer(&s, &cfg(), false);
        let mut covered = owner_mask(&owners, &cfg(), None);
        for &id in s.objects.keys() {
            let m = silhouette_mask(&s, &cfg(), id).unwrap();
            assert!(m.iter().any(|&b| b), "seed {seed}: {id:?} invisible");
            for (c, b) in covered.iter_mut().zip(m) {
                *c |= b;
            }
        }
        assert!(covered.iter().all(|&b| b));
    }
}

#[test]
fn hidden_and_missing_objects() {
    let mut s = blank();
    s.insert(entry("sideboard"), 0.0, 0.0, 0.0, None);
    let hidden = s.insert(entry("rubber duck"), 0.0, 0.5, 0.0, None);
    s.camera = Camera { position: Vec3::new(0.0, -3.0, 0.5), yaw: 90.0, pitch: 0.0, fov: 60.0 };
    assert!(silhouette_mask(&s, &cfg(), hidden).unwrap().iter().all(|&b| !b));
    let gone = editforge_core::scene::ObjectId(99);
    assert_eq!(silhouette_mask(&s, &cfg(), gone), Err(RenderError::TargetMissing(gone)));
}

#[test]
fn painter_order_agrees_with_a_depth_buffer() {
    for seed in 0..100 {
        let s = scene(seed);
        let c = RenderConfig { resolution: 128, supersampling: 2 };
        let painter = owner_buffer(&s, &c, false);
        let depth = owner_buffer(&s, &c, true);
        let diff = painter.iter().zip(&depth).filter(|(a, b)| a != b).count();
        assert_eq!(diff, 0, "seed {seed}");
    }
}
