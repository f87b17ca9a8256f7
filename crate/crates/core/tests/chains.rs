mod common;

use common::*;
use editforge_core::catalog::ColorName;
use editforge_core::chain::*;
use editforge_core::ops::*;
use editforge_core::rng::SeedStream;
use editforge_core::scene::{ObjectId, SceneState};
use editforge_core::text::*;

fn fixture() -> (SceneState, ObjectId, ObjectId, ObjectId) {
    let mut s = blank();
    let side = s.insert(entry("sideboard"), 0.0, 0.0, 0.0, None);
    let vase = s.insert(entry("vase"), 1.3, -0.4, 0.0, None);
    let chair = s.insert(entry("chair"), -1.4, -0.3, 0.0, None);
    (s, side, vase, chair)
}

fn moved(direction: Direction, target: ObjectId) -> OpParams {
    OpParams::Translate { target, mode: TranslateMode::ByDirection { direction } }
}

fn complex_text(state: &SceneState, op: &EditOp) -> String {
    let out = apply(state, op, catalog()).unwrap();
    render_forms(lib(), &out.record, &state.op_log).unwrap().complex_form
}

#[test]
fn short_chain_without_dependencies() {
    let init = scene(1);
    let cfg = ComposerConfig { min_length: 3, max_length: 3, dependency_probability: 0.0, seed: 11, ..Default::default() };
    let rec = compose_chain(&init, &cfg, catalog(), lib()).unwrap();
    assert_eq!(rec.len(), 3);
    assert_eq!(rec.dependency_ratio, 0.0);
    assert!(rec.ops.iter().all(|o| o.dependency.is_none()));
    assert_eq!(rec.step_instructions.len(), 3);
    assert_eq!(rec.id, format!("{:016x}", 11));
}

#[test]
fn composition_is_deterministic() {
    let init = scene(2);
    let cfg = ComposerConfig { seed: 5, ..Default::default() };
    let a = compose_chain(&init, &cfg, catalog(), lib()).unwrap();
    let b = compose_chain(&init, &cfg, catalog(), lib()).unwrap();
    assert_eq!(a, b);
    let c = compose_chain(&init, &ComposerConfig { seed: 6, ..cfg }, catalog(), lib()).unwrap();
    assert_ne!(a.ops, c.ops);
}

#[test]
fn bad_configs_are_rejected() {
    let init = scene(0);
    for cfg in [
        ComposerConfig { min_length: 5, max_length: 4, ..Default::default() },
        ComposerConfig { min_length: 0, ..Default::default() },
        ComposerConfig { dependency_probability: 1.5, ..Default::default() },
    ] {
        assert!(matches!(compose_chain(&init, &cfg, catalog(), lib()), Err(ChainError::InvalidConfig(_))));
    }
}

#[test]
fn dependent_mode_always_has_a_reference() {
    for seed in 0..20 {
        let cfg = ComposerConfig { require_dependency: true, seed, ..Default::default() };
        let rec = compose_chain(&scene(seed), &cfg, catalog(), lib()).unwrap();
        assert!(rec.ops.iter().any(|o| o.dependency.is_some()), "seed {seed}");
    }
}

#[test]
fn rotated_object_is_described_by_its_rotation() {
    let (s, side, ..) = fixture();
    let s = step(&s, OpParams::Rotate { target: side, degrees: 90, direction: RotationDirection::Cw });
    let op = EditOp::new(OpParams::ColorChange { target: side, color: ColorName::Green }, 3);
    let mut rng = SeedStream(1).rng();
    let dep = inject_dependency(&op, &s, &mut rng, catalog()).unwrap();
    let ann = dep.dependency.as_ref().unwrap();
    assert_eq!(ann.kind, DependencyKind::OperationReference);
    assert_eq!((ann.referenced_op_index, ann.referenced_object), (0, side));
    assert_eq!(ann.disambiguator, None);
    assert!(complex_text(&s, &dep).contains("the object that was rotated"));
}

#[test]
fn two_moves_get_a_disambiguator() {
    let (s, _, vase, chair) = fixture();
    let s = step(&s, moved(Direction::Left, chair));
    let s = step(&s, moved(Direction::Forward, vase));
    for seed in 0..20 {
        let op = EditOp::new(OpParams::ColorChange { target: chair, color: ColorName::Red }, seed);
        let dep = inject_dependency(&op, &s, &mut SeedStream(seed).rng(), catalog()).unwrap();
        let ann = dep.dependency.as_ref().unwrap();
        assert!(ann.disambiguator.is_some());
        let text = complex_text(&s, &dep);
        let parsed = parse_instruction(&text, lib()).remove(0).unwrap();
        assert_eq!(resolve_params(&s, &parsed.params), Ok(dep.params.clone()), "{text}");
    }
}

#[test]
fn empty_history_has_nothing_to_reference() {
    let (s, side, ..) = fixture();
    let op = EditOp::new(OpParams::ColorChange { target: side, color: ColorName::Red }, 0);
    assert_eq!(inject_dependency(&op, &s, &mut SeedStream(0).rng(), catalog()), Err(NoEligibleReference));
    let s = step(&s, OpParams::Rotate { target: side, degrees: 90, direction: RotationDirection::Cw });
    let cam = EditOp::new(OpParams::viewpoint(CameraMotion::Pan, CameraDirection::Left), 0);
    assert_eq!(inject_dependency(&cam, &s, &mut SeedStream(0).rng(), catalog()), Err(NoEligibleReference));
}

#[test]
fn position_references_point_at_initial_spots() {
    let (s, _, vase, chair) = fixture();
    let s = step(&s, OpParams::Remove { target: chair });
    let add = EditOp::new(OpParams::Add { label: "book stack".into(), placement: AddPlacement::NearObject { anchor: vase } }, 0);
    let mut found = false;
    for seed in 0..20 {
        let dep = inject_dependency(&add, &s, &mut SeedStream(seed).rng(), catalog()).unwrap();
        let ann = dep.dependency.as_ref().unwrap();
        if ann.kind == DependencyKind::PositionReference {
            assert_eq!(dep.params.coordinate(), Some(s.initial[&chair].position));
            assert!(complex_text(&s, &dep).contains("where the chair"));
            found = true;
        }
    }
    assert!(found);
}

#[test]
fn filter_rejects_transforming_a_new_object() {
    let (s, _, _, chair) = fixture();
    let t = step(&s, OpParams::Add { label: "book stack".into(), placement: AddPlacement::AtCoordinate { position: editforge_core::geometry::Vec3::new(2.0, 1.0, 0.0) } });
    let book = t.op_log[0].created_id.unwrap();
    let bad = step(&t, OpParams::Rotate { target: book, degrees: 90, direction: RotationDirection::Ccw });
    let verdict = filter_chain(&bad.op_log, &bad.initial);
    assert_eq!(verdict, FilterVerdict { accepted: false, reason: FilterReason::TransientStateDependency });
    let good = step(&t, OpParams::Rotate { target: chair, degrees: 90, direction: RotationDirection::Ccw });
    assert!(filter_chain(&good.op_log, &good.initial).accepted);
}

#[test]
fn filter_rejects_references_to_intermediate_positions() {
    let (s, _, vase, chair) = fixture();
    let s = step(&s, moved(Direction::Left, chair));
    let mid = s.objects[&chair].position;
    let s = step(&s, OpParams::Remove { target: chair });
    let mut op = EditOp::new(OpParams::Translate { target: vase, mode: TranslateMode::AtCoordinate { position: mid } }, 0);
    op.dependency = Some(DependencyAnnotation {
        kind: DependencyKind::PositionReference,
        referenced_op_index: 1,
        referenced_object: chair,
        disambiguator: None,
        slot: ReferenceSlot::Position,
    });
    let s = apply(&s, &op, catalog()).unwrap().new_state;
    let verdict = filter_chain(&s.op_log, &s.initial);
    assert_eq!(verdict.reason, FilterReason::AmbiguousPositionReference);
}

#[test]
fn decomposition_names_referenced_objects() {
    let (s, side, ..) = fixture();
    let t = step(&s, OpParams::Rotate { target: side, degrees: 90, direction: RotationDirection::Cw });
    let op = EditOp::new(OpParams::ColorChange { target: side, color: ColorName::Green }, 3);
    let dep = inject_dependency(&op, &t, &mut SeedStream(1).rng(), catalog()).unwrap();
    let u = apply(&t, &dep, catalog()).unwrap().new_state;
    let doc = InstructionDoc::from_log(lib(), &u.op_log).unwrap();
    assert!(doc.complex_text.contains("the object that was rotated"));
    assert!(doc.step_texts[1].contains("the sideboard"));
    assert!(doc.step_texts.iter().all(|t| !t.contains("the object that")));
}

#[test]
fn symbolic_decomposition_matches_replay() {
    let init = scene(4);
    let rec = compose_chain(&init, &ComposerConfig { seed: 4, ..Default::default() }, catalog(), lib()).unwrap();
    let states = rec.replay(catalog()).unwrap();
    let len = rec.len();

    let single = decompose_symbolically(&rec, 1, catalog()).unwrap();
    assert_eq!(single.len(), 1);
    assert_eq!(single[0].0, join_clauses(&rec.step_instructions));
    assert_eq!(single[0].1, states[len]);

    let steps = decompose_symbolically(&rec, len, catalog()).unwrap();
    for (i, (text, state)) in steps.iter().enumerate() {
        assert_eq!(text, &join_clauses(&rec.step_instructions[i..=i]));
        assert_eq!(state, &states[i + 1]);
    }

    let plan = &rec.chunk_plans[&3];
    let three = decompose_symbolically(&rec, 3, catalog()).unwrap();
    for (chunk, (text, state)) in plan.chunks.iter().zip(&three) {
        assert_eq!(text, &chunk.instruction);
        assert_eq!(state, &states[chunk.last_step]);
    }
    assert!(decompose_symbolically(&rec, len + 1, catalog()).is_err());
}
