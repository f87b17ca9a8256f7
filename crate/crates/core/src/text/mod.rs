//! Instruction text: rendering ops through templates and parsing them back.

mod phrase;
mod template;

pub use phrase::*;
pub use template::{capitalize, decapitalize, variant_slots, SlotKind, Template, TemplateLibrary, BUILTIN_TEMPLATES, TEMPLATE_VERSION};

use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::catalog::{AssetCatalog, ColorName, MaterialName, TextureId};
use crate::geometry::Vec3;
use crate::ops::{
    apply, AddPlacement, BackgroundScope, CameraDirection, CameraMotion, DependencyKind, Direction, EditOp, OpError,
    OpKind, OpParams, ReferenceSlot, RotationDirection, TranslateMode,
};
use crate::rng::{Rng, SeedStream};
use crate::scene::{ExecutedOpRecord, ObjectId, SceneState};
use template::Capture;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum TextError {
    #[error("missing slot {0:?}")]
    MissingSlot(String),
    #[error("bad template: {0}")]
    BadTemplate(String),
    #[error("no template for {0}")]
    NoTemplate(String),
    #[error("inconsistent dependency: {0}")]
    BadDependency(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextForm {
    /// Objects touched by a dependency are described by their history.
    Complex,
    /// Every object is named by its label.
    Decomposed,
}

/// Template variant an op renders through.
pub fn variant_of(params: &OpParams) -> &'static str {
    match params {
        OpParams::Add { placement, .. } => match placement {
            AddPlacement::OnSupporter { .. } => "on_supporter",
            AddPlacement::NearObject { .. } => "near_object",
            AddPlacement::AtCoordinate { .. } => "at_coordinate",
        },
        OpParams::Translate { mode, .. } => match mode {
            TranslateMode::ByDirection { .. } => "by_direction",
            TranslateMode::NearObject { .. } => "near_object",
            TranslateMode::OntoObject { .. } => "onto_object",
            TranslateMode::AtCoordinate { .. } => "at_coordinate",
        },
        OpParams::Rotate { degrees: 180, .. } => "half_turn",
        OpParams::Rotate { .. } => "turn",
        OpParams::ViewpointChange { motion, .. } => match motion {
            CameraMotion::Translate => "translate",
            CameraMotion::Pan => "pan",
            CameraMotion::Tilt => "tilt",
            CameraMotion::Yaw => "yaw",
        },
        OpParams::BackgroundChange { scope, .. } => match scope {
            BackgroundScope::FloorOnly => "floor_only",
            BackgroundScope::FloorAndWalls => "floor_and_walls",
        },
        _ => "default",
    }
}

/// The reference phrase an op's dependency stands for, if it is an
/// operation reference.
pub fn dependency_phrase(op: &EditOp, history: &[ExecutedOpRecord]) -> Result<Option<(ReferenceSlot, ReferencePhrase)>, TextError> {
    let Some(dep) = &op.dependency else { return Ok(None) };
    if dep.kind != DependencyKind::OperationReference {
        return Ok(None);
    }
    let rec = history
        .get(dep.referenced_op_index)
        .ok_or_else(|| TextError::BadDependency(format!("step {} not in history", dep.referenced_op_index)))?;
    let trace = rec.trace.as_ref().ok_or_else(|| TextError::BadDependency("referenced step left no trace".into()))?;
    if trace.subject != dep.referenced_object {
        return Err(TextError::BadDependency("referenced object is not the step's subject".into()));
    }
    let qualifier = if dep.disambiguator.is_some() || trace.action.needs_qualifier() { trace.qualifier.clone() } else { None };
    Ok(Some((dep.slot, ReferencePhrase { action: trace.action, qualifier })))
}

/// Renders the op recorded in `record`; `history` is the log before it ran.
pub fn render_instruction(
    lib: &TemplateLibrary,
    record: &ExecutedOpRecord,
    history: &[ExecutedOpRecord],
    form: TextForm,
    rng: &mut Rng,
) -> Result<String, TextError> {
    let op = &record.op;
    let reference = match form {
        TextForm::Complex => dependency_phrase(op, history)?,
        TextForm::Decomposed => None,
    };
    let slot = |key: &str| record.slots.get(key).cloned();
    let object = |key: &str, which: ReferenceSlot| match &reference {
        Some((s, phrase)) if *s == which => Some(phrase.render()),
        _ => slot(key).map(|l| format!("the {l}")),
    };
    let value = |k: SlotKind| -> Option<String> {
        match (k, &op.params) {
            (SlotKind::Target, _) => object("target", ReferenceSlot::Target),
            (SlotKind::Anchor, _) => object("anchor", ReferenceSlot::Anchor),
            (SlotKind::New, OpParams::Add { .. }) => slot("label").map(|l| indefinite(&l)),
            (SlotKind::New, OpParams::Replace { .. }) => slot("new_label").map(|l| indefinite(&l)),
            (SlotKind::Source, _) => slot("source"),
            (SlotKind::Direction, OpParams::Translate { mode: TranslateMode::ByDirection { direction }, .. }) => {
                Some(direction_words(*direction).to_string())
            }
            (SlotKind::Degrees, OpParams::Rotate { degrees, .. }) => Some(degrees.to_string()),
            (SlotKind::Rotation, OpParams::Rotate { direction, .. }) => Some(rotation_words(*direction).to_string()),
            (SlotKind::Color, OpParams::ColorChange { color, .. }) => Some(color.name().to_string()),
            (SlotKind::Material, OpParams::MaterialChange { material, .. }) => Some(material.name().to_string()),
            (SlotKind::Texture, OpParams::BackgroundChange { texture, .. }) => Some(texture.name().to_string()),
            (SlotKind::Scale, OpParams::SizeChange { scale, .. }) => Some(scale_words(*scale)),
            (SlotKind::Camera, OpParams::ViewpointChange { direction, .. }) => {
                Some(template::camera_words(*direction).to_string())
            }
            _ => None,
        }
    };
    let variant = variant_of(&op.params);
    let choices = lib.variants(op.kind(), variant);
    if choices.is_empty() {
        return Err(TextError::NoTemplate(format!("{}/{variant}", op.kind())));
    }
    use rand::Rng as _;
    let t = choices[rng.random_range(0..choices.len())];
    t.render(&value, rng)
}

/// Both textual forms of one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceForms {
    pub complex_form: String,
    pub decomposed_form: String,
}

fn verb_rng(op: &EditOp) -> Rng {
    SeedStream(op.verb_seed).child("verb", 0).rng()
}

/// Both forms drawn from the op's own verb seed, so they share wording.
pub fn render_forms(
    lib: &TemplateLibrary,
    record: &ExecutedOpRecord,
    history: &[ExecutedOpRecord],
) -> Result<ReferenceForms, TextError> {
    Ok(ReferenceForms {
        complex_form: render_instruction(lib, record, history, TextForm::Complex, &mut verb_rng(&record.op))?,
        decomposed_form: render_instruction(lib, record, history, TextForm::Decomposed, &mut verb_rng(&record.op))?,
    })
}

/// "A, b, and c." — clauses after the first start lowercase.
pub fn join_clauses<S: AsRef<str>>(clauses: &[S]) -> String {
    let n = clauses.len();
    if n == 0 {
        return String::new();
    }
    let mut out = String::new();
    for (i, c) in clauses.iter().enumerate() {
        let c = c.as_ref();
        if i == 0 {
            out.push_str(&capitalize(c));
            continue;
        }
        out.push_str(", ");
        if i == n - 1 {
            out.push_str("and ");
        }
        out.push_str(&decapitalize(c));
    }
    out.push('.');
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionDoc {
    pub complex_text: String,
    pub step_texts: Vec<String>,
    pub reference_forms: Vec<ReferenceForms>,
}

impl InstructionDoc {
    /// Text for every step of `log`, which must start at the chain's first op.
    pub fn from_log(lib: &TemplateLibrary, log: &[ExecutedOpRecord]) -> Result<InstructionDoc, TextError> {
        let forms = log
            .iter()
            .enumerate()
            .map(|(i, rec)| render_forms(lib, rec, &log[..i]))
            .collect::<Result<Vec<_>, _>>()?;
        let complex: Vec<&str> = forms.iter().map(|f| f.complex_form.as_str()).collect();
        Ok(InstructionDoc {
            complex_text: join_clauses(&complex),
            step_texts: forms.iter().map(|f| f.decomposed_form.clone()).collect(),
            reference_forms: forms,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ParsedPlacement {
    OnSupporter { anchor: ObjectDesc },
    NearObject { anchor: ObjectDesc },
    WhereOriginally { source: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ParsedMove {
    ByDirection { direction: Direction },
    NearObject { anchor: ObjectDesc },
    OntoObject { anchor: ObjectDesc },
    WhereOriginally { source: String },
}

/// Op parameters with objects still described in words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParsedParams {
    Add { label: String, placement: ParsedPlacement },
    Remove { target: ObjectDesc },
    Translate { target: ObjectDesc, mode: ParsedMove },
    Rotate { target: ObjectDesc, degrees: u32, direction: RotationDirection },
    Replace { target: ObjectDesc, new_label: String },
    ColorChange { target: ObjectDesc, color: ColorName },
    MaterialChange { target: ObjectDesc, material: MaterialName },
    SizeChange { target: ObjectDesc, scale: f64 },
    ViewpointChange { motion: CameraMotion, direction: CameraDirection },
    BackgroundChange { scope: BackgroundScope, texture: TextureId },
}

impl ParsedParams {
    pub fn target(&self) -> Option<&ObjectDesc> {
        match self {
            ParsedParams::Remove { target }
            | ParsedParams::Translate { target, .. }
            | ParsedParams::Rotate { target, .. }
            | ParsedParams::Replace { target, .. }
            | ParsedParams::ColorChange { target, .. }
            | ParsedParams::MaterialChange { target, .. }
            | ParsedParams::SizeChange { target, .. } => Some(target),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedOp {
    pub kind: OpKind,
    pub variant: String,
    pub params: ParsedParams,
    /// Byte range of the clause in the parsed text.
    pub raw_span: Range<usize>,
}

impl ParsedOp {
    pub fn target_description(&self) -> Option<&ObjectDesc> {
        self.params.target()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error, Serialize, Deserialize)]
#[error("cannot parse {clause:?}")]
pub struct ParseError {
    pub clause: String,
    pub raw_span: Range<usize>,
}

/// Clause boundaries: ", " separators, an optional leading "and " and a
/// terminal period are not part of any clause.
fn clause_spans(text: &str) -> Vec<Range<usize>> {
    let mut end = text.trim_end().len();
    if text[..end].ends_with('.') {
        end -= 1;
    }
    let mut spans = Vec::new();
    let mut start = 0;
    let body = &text[..end];
    let mut push = |mut s: usize, e: usize| {
        let piece = &body[s..e];
        let lead = piece.len() - piece.trim_start().len();
        s += lead;
        if body[s..e].to_lowercase().starts_with("and ") {
            s += 4;
        }
        let e = s + body[s..e].trim_end().len();
        if s < e {
            spans.push(s..e);
        }
    };
    while let Some(i) = body[start..].find(", ") {
        push(start, start + i);
        start += i + 2;
    }
    push(start, end);
    spans
}

fn build_params(t: &Template, caps: Vec<Capture>) -> Option<ParsedParams> {
    let mut object = [None, None];
    let (mut new, mut source, mut direction, mut degrees, mut rotation) = (None, None, None, None, None);
    let (mut color, mut material, mut texture, mut scale, mut camera) = (None, None, None, None, None);
    for c in caps {
        match c {
            Capture::Object(SlotKind::Target, d) => object[0] = Some(d),
            Capture::Object(_, d) => object[1] = Some(d),
            Capture::New(l) => new = Some(l),
            Capture::Label(_, l) => source = Some(l),
            Capture::Direction(d) => direction = Some(d),
            Capture::Degrees(d) => degrees = Some(d),
            Capture::Rotation(r) => rotation = Some(r),
            Capture::Color(c) => color = Some(c),
            Capture::Material(m) => material = Some(m),
            Capture::Texture(x) => texture = Some(x),
            Capture::Scale(s) => scale = Some(s),
            Capture::Camera(c) => camera = Some(c),
        }
    }
    let [target, anchor] = object;
    Some(match (t.kind, t.variant.as_str()) {
        (OpKind::Add, v) => ParsedParams::Add {
            label: new?,
            placement: match v {
                "on_supporter" => ParsedPlacement::OnSupporter { anchor: anchor? },
                "near_object" => ParsedPlacement::NearObject { anchor: anchor? },
                _ => ParsedPlacement::WhereOriginally { source: source? },
            },
        },
        (OpKind::Remove, _) => ParsedParams::Remove { target: target? },
        (OpKind::Translate, v) => ParsedParams::Translate {
            target: target?,
            mode: match v {
                "by_direction" => ParsedMove::ByDirection { direction: direction? },
                "near_object" => ParsedMove::NearObject { anchor: anchor? },
                "onto_object" => ParsedMove::OntoObject { anchor: anchor? },
                _ => ParsedMove::WhereOriginally { source: source? },
            },
        },
        (OpKind::Rotate, "half_turn") => {
            ParsedParams::Rotate { target: target?, degrees: 180, direction: RotationDirection::Ccw }
        }
        (OpKind::Rotate, _) => ParsedParams::Rotate { target: target?, degrees: degrees?, direction: rotation? },
        (OpKind::Replace, _) => ParsedParams::Replace { target: target?, new_label: new? },
        (OpKind::ColorChange, _) => ParsedParams::ColorChange { target: target?, color: color? },
        (OpKind::MaterialChange, _) => ParsedParams::MaterialChange { target: target?, material: material? },
        (OpKind::SizeChange, _) => ParsedParams::SizeChange { target: target?, scale: scale? },
        (OpKind::ViewpointChange, v) => {
            let motion = match v {
                "translate" => CameraMotion::Translate,
                "pan" => CameraMotion::Pan,
                "tilt" => CameraMotion::Tilt,
                _ => CameraMotion::Yaw,
            };
            let direction = camera?;
            if !motion.directions().contains(&direction) {
                return None;
            }
            ParsedParams::ViewpointChange { motion, direction }
        }
        (OpKind::BackgroundChange, v) => ParsedParams::BackgroundChange {
            scope: if v == "floor_only" { BackgroundScope::FloorOnly } else { BackgroundScope::FloorAndWalls },
            texture: texture?,
        },
    })
}

/// Parses a composite or single-step instruction. Unrecognised clauses are
/// reported in place without stopping the rest.
pub fn parse_instruction(text: &str, lib: &TemplateLibrary) -> Vec<Result<ParsedOp, ParseError>> {
    clause_spans(text)
        .into_iter()
        .map(|span| {
            let clause = &text[span.clone()];
            let lower = clause.to_lowercase();
            let toks: Vec<&str> = lower.split_whitespace().collect();
            let err = || ParseError { clause: clause.to_string(), raw_span: span.clone() };
            let (t, caps) = lib.match_clause(&toks).ok_or_else(err)?;
            let params = build_params(t, caps).ok_or_else(err)?;
            Ok(ParsedOp { kind: t.kind, variant: t.variant.clone(), params, raw_span: span.clone() })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ResolveError {
    #[error("nothing matches {0:?}")]
    UnresolvableReference(String),
    #[error("{count} objects match {phrase:?}")]
    AmbiguousReference { phrase: String, count: usize },
    #[error("replay failed: {0}")]
    Replay(OpError),
}

/// Existing objects whose history matches `phrase`, with the latest
/// matching step for each.
pub fn reference_matches(state: &SceneState, phrase: &ReferencePhrase) -> Vec<(ObjectId, usize)> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, rec) in state.op_log.iter().enumerate().rev() {
        let Some(tr) = &rec.trace else { continue };
        if tr.action != phrase.action || !state.objects.contains_key(&tr.subject) {
            continue;
        }
        if phrase.qualifier.is_some() && phrase.qualifier != tr.qualifier {
            continue;
        }
        if seen.insert(tr.subject) {
            out.push((tr.subject, i));
        }
    }
    out
}

pub fn resolve_object(state: &SceneState, desc: &ObjectDesc) -> Result<ObjectId, ResolveError> {
    match desc {
        ObjectDesc::Label(l) => state.find_label(l).ok_or_else(|| ResolveError::UnresolvableReference(desc.render())),
        ObjectDesc::Reference(p) => match reference_matches(state, p).as_slice() {
            [] => Err(ResolveError::UnresolvableReference(p.render())),
            [(id, _)] => Ok(*id),
            many => Err(ResolveError::AmbiguousReference { phrase: p.render(), count: many.len() }),
        },
    }
}

/// Initial position of the object first registered under `label`.
pub fn original_position(state: &SceneState, label: &str) -> Result<Vec3, ResolveError> {
    state
        .initial
        .values()
        .find(|e| e.label == label)
        .map(|e| e.position)
        .ok_or_else(|| ResolveError::UnresolvableReference(format!("where the {label} originally was")))
}

/// Maps descriptions to ids against `state` and its history.
pub fn resolve_params(state: &SceneState, parsed: &ParsedParams) -> Result<OpParams, ResolveError> {
    let obj = |d: &ObjectDesc| resolve_object(state, d);
    Ok(match parsed {
        ParsedParams::Add { label, placement } => OpParams::Add {
            label: label.clone(),
            placement: match placement {
                ParsedPlacement::OnSupporter { anchor } => AddPlacement::OnSupporter { anchor: obj(anchor)? },
                ParsedPlacement::NearObject { anchor } => AddPlacement::NearObject { anchor: obj(anchor)? },
                ParsedPlacement::WhereOriginally { source } => {
                    AddPlacement::AtCoordinate { position: original_position(state, source)? }
                }
            },
        },
        ParsedParams::Remove { target } => OpParams::Remove { target: obj(target)? },
        ParsedParams::Translate { target, mode } => OpParams::Translate {
            target: obj(target)?,
            mode: match mode {
                ParsedMove::ByDirection { direction } => TranslateMode::ByDirection { direction: *direction },
                ParsedMove::NearObject { anchor } => TranslateMode::NearObject { anchor: obj(anchor)? },
                ParsedMove::OntoObject { anchor } => TranslateMode::OntoObject { anchor: obj(anchor)? },
                ParsedMove::WhereOriginally { source } => {
                    TranslateMode::AtCoordinate { position: original_position(state, source)? }
                }
            },
        },
        ParsedParams::Rotate { target, degrees, direction } => {
            OpParams::Rotate { target: obj(target)?, degrees: *degrees, direction: *direction }
        }
        ParsedParams::Replace { target, new_label } => {
            OpParams::Replace { target: obj(target)?, new_label: new_label.clone() }
        }
        ParsedParams::ColorChange { target, color } => OpParams::ColorChange { target: obj(target)?, color: *color },
        ParsedParams::MaterialChange { target, material } => {
            OpParams::MaterialChange { target: obj(target)?, material: *material }
        }
        ParsedParams::SizeChange { target, scale } => OpParams::SizeChange { target: obj(target)?, scale: *scale },
        ParsedParams::ViewpointChange { motion, direction } => OpParams::viewpoint(*motion, *direction),
        ParsedParams::BackgroundChange { scope, texture } => {
            OpParams::BackgroundChange { scope: *scope, texture: *texture }
        }
    })
}

/// Resolves each parsed op against the history produced by replaying the
/// ones before it from `init`. A step that fails leaves the replay state
/// untouched for the steps after it.
pub fn resolve_references(
    parsed: &[ParsedOp],
    init: &SceneState,
    catalog: &AssetCatalog,
) -> Vec<Result<EditOp, ResolveError>> {
    let mut state = init.clone();
    parsed
        .iter()
        .map(|p| {
            let params = resolve_params(&state, &p.params)?;
            let op = EditOp::new(params, 0);
            let out = apply(&state, &op, catalog).map_err(ResolveError::Replay)?;
            state = out.new_state;
            Ok(op)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joining_follows_caption_style() {
        assert_eq!(join_clauses(&["Add a vase"]), "Add a vase.");
        assert_eq!(join_clauses(&["Add a vase", "Paint the vase red"]), "Add a vase, and paint the vase red.");
        assert_eq!(join_clauses(&["A", "B", "C"]), "A, b, and c.");
        assert_eq!(join_clauses::<&str>(&[]), "");
    }

    #[test]
    fn clause_spans_skip_separators() {
        let t = "Add a vase, move the cup forward, and paint the vase red.";
        let spans: Vec<&str> = clause_spans(t).into_iter().map(|s| &t[s]).collect();
        assert_eq!(spans, ["Add a vase", "move the cup forward", "paint the vase red"]);
    }

    #[test]
    fn parses_caption_instructions() {
        let lib = TemplateLibrary::builtin().with_labels(AssetCatalog::builtin().labels());
        let p = parse_instruction("Move the speaker onto the modern coffee table", &lib);
        let op = p[0].as_ref().unwrap();
        assert_eq!(
            op.params,
            ParsedParams::Translate {
                target: ObjectDesc::Label("speaker".into()),
                mode: ParsedMove::OntoObject { anchor: ObjectDesc::Label("modern coffee table".into()) },
            }
        );
        let p = parse_instruction("Rotate the tissue box 180 degrees", &lib);
        assert!(matches!(p[0].as_ref().unwrap().params, ParsedParams::Rotate { degrees: 180, .. }));
        let p = parse_instruction("Paint the object that was moved red", &lib);
        assert_eq!(
            p[0].as_ref().unwrap().params,
            ParsedParams::ColorChange {
                target: ObjectDesc::Reference(ReferencePhrase { action: RefAction::Moved, qualifier: None }),
                color: ColorName::Red,
            }
        );
        assert!(parse_instruction("", &lib).is_empty());
    }

    #[test]
    fn unknown_clauses_do_not_abort() {
        let lib = TemplateLibrary::builtin().with_labels(AssetCatalog::builtin().labels());
        let p = parse_instruction("Juggle the vase, and remove the vase.", &lib);
        assert_eq!(p.len(), 2);
        assert!(p[0].is_err());
        assert!(p[1].is_ok());
    }
}
