mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use editforge_core::catalog::{ColorName, MaterialName, TextureId};
use editforge_core::ops::*;
use editforge_core::rng::SeedStream;
use editforge_core::scene::{SceneObject, SceneState};
use proptest::prelude::*;
use serde_json::Value;

/// Top-level fields of `a` and `b` whose serialized values differ.
fn changed_fields(a: &SceneObject, b: &SceneObject) -> BTreeSet<String> {
    let (Value::Object(a), Value::Object(b)) = (serde_json::to_value(a).unwrap(), serde_json::to_value(b).unwrap())
    else {
        unreachable!()
    };
    a.keys().chain(b.keys()).filter(|k| a.get(*k) != b.get(*k)).cloned().collect()
}

fn fields(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Fields the op is allowed to touch on its target.
fn allowed_on_target(kind: OpKind) -> BTreeSet<String> {
    match kind {
        OpKind::Translate => fields(&["position", "supported_by"]),
        OpKind::Rotate => fields(&["yaw"]),
        OpKind::ColorChange => fields(&["color"]),
        OpKind::MaterialChange => fields(&["material"]),
        OpKind::SizeChange => fields(&["scale", "position"]),
        _ => BTreeSet::new(),
    }
}

fn check_isolation(before: &SceneState, after: &SceneState, op: &EditOp, affected: &[editforge_core::scene::ObjectId]) {
    let kind = op.kind();
    if kind != OpKind::ViewpointChange {
        assert_eq!(before.camera, after.camera, "{kind:?} moved the camera");
    }
    if kind != OpKind::BackgroundChange {
        assert_eq!(before.room, after.room, "{kind:?} changed the room");
    }
    if matches!(kind, OpKind::ViewpointChange | OpKind::BackgroundChange) {
        assert_eq!(before.objects, after.objects, "{kind:?} mutated objects");
        return;
    }
    for (id, o) in &before.objects {
        if !affected.contains(id) {
            assert_eq!(Some(o), after.objects.get(id), "{kind:?} touched unaffected {}", o.label);
        }
    }
    let Some(target) = op.params.target() else { return };
    if matches!(kind, OpKind::Remove | OpKind::Replace) {
        assert!(!after.objects.contains_key(&target));
        return;
    }
    let diff = changed_fields(&before.objects[&target], &after.objects[&target]);
    let allowed = allowed_on_target(kind);
    assert!(diff.is_subset(&allowed), "{kind:?} changed {diff:?}");
    assert!(!diff.is_empty(), "{kind:?} was a no-op");
    // Supporters only change their contents list.
    for id in affected.iter().filter(|id| **id != target) {
        if let (Some(a), Some(b)) = (before.objects.get(id), after.objects.get(id)) {
            let d = changed_fields(a, b);
            assert!(d.is_subset(&fields(&["supporter_of"])), "{kind:?} changed {d:?} on {}", a.label);
        }
    }
}

fn check_legal(params: &OpParams) {
    match params {
        OpParams::Rotate { degrees, .. } => assert!(ROTATION_DEGREES.contains(degrees)),
        OpParams::SizeChange { scale, .. } => assert!(SCALE_FACTORS.contains(scale)),
        OpParams::ColorChange { color, .. } => assert!(ColorName::ALL.contains(color)),
        OpParams::MaterialChange { material, .. } => assert!(MaterialName::ALL.contains(material)),
        OpParams::BackgroundChange { texture, .. } => assert!(TextureId::ALL.contains(texture)),
        OpParams::ViewpointChange { motion, direction, magnitude } => {
            assert_eq!(*magnitude, motion.magnitude());
            assert!(motion.directions().contains(direction));
        }
        OpParams::Add { label, .. } | OpParams::Replace { new_label: label, .. } => {
            assert!(catalog().get(label).is_some());
        }
        _ => {}
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn ops_touch_only_their_fields_and_undo_exactly(scene_seed in 0u64..60, op_seed in any::<u64>(), warmup in 0usize..4) {
        let mut state = scene(scene_seed);
        let mut rng = SeedStream(op_seed).rng();
        for _ in 0..warmup {
            let op = sample_op(&state, &mut rng, &OpKind::ALL, catalog()).unwrap();
            state = apply(&state, &op, catalog()).unwrap().new_state;
        }
        for kind in OpKind::ALL {
            let Ok(op) = sample_op(&state, &mut rng, &[kind], catalog()) else { continue };
            let out = apply(&state, &op, catalog()).unwrap();
            prop_assert_eq!(&out.record.op, &op);
            check_isolation(&state, &out.new_state, &op, &out.record.affected_ids);
            for id in &out.record.affected_ids {
                let Some(prev) = state.objects.get(id) else { continue };
                let moved = out.new_state.objects.get(id).is_none_or(|o| o.position != prev.position);
                if moved {
                    prop_assert!(out.record.prior_positions.contains_key(id), "{:?} lost a prior position", kind);
                }
            }
            let mut undone = out.new_state.clone();
            undone.undo_last();
            prop_assert_eq!(undone.to_canonical().unwrap(), state.to_canonical().unwrap());
        }
    }
}

/// Ten thousand sampled ops along random chains: every one applies, every
/// parameter is legal and kinds come out near uniform.
#[test]
fn sampled_ops_are_feasible_legal_and_balanced() {
    let mut counts: BTreeMap<OpKind, usize> = BTreeMap::new();
    let mut total = 0;
    let mut seed = 0;
    while total < 10_000 {
        let mut state = scene(seed % 200);
        let mut rng = SeedStream(seed).child("walk", 0).rng();
        seed += 1;
        for _ in 0..10 {
            let op = sample_op(&state, &mut rng, &OpKind::ALL, catalog()).expect("some kind is feasible");
            check_legal(&op.params);
            let out = apply(&state, &op, catalog()).unwrap_or_else(|e| panic!("{op:?} failed on real apply: {e}"));
            *counts.entry(op.kind()).or_default() += 1;
            total += 1;
            state = out.new_state;
        }
    }
    let uniform = total as f64 / OpKind::ALL.len() as f64;
    for kind in OpKind::ALL {
        let n = counts.get(&kind).copied().unwrap_or(0) as f64;
        assert!((n - uniform).abs() <= 0.4 * uniform, "{kind:?}: {n} vs {uniform}");
    }
}
