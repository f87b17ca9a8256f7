//! Template library: compilation, rendering and the backtracking clause matcher.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::phrase::{ObjectDesc, Qualifier, RefAction, ReferencePhrase};
use super::TextError;
use crate::catalog::{ColorName, MaterialName, TextureId};
use crate::ops::{CameraDirection, Direction, OpKind, RotationDirection, ROTATION_DEGREES, SCALE_FACTORS};
use crate::rng::Rng;

pub const TEMPLATE_VERSION: u32 = 1;

/// JSON source of the shipped templates.
pub const BUILTIN_TEMPLATES: &str = include_str!("../../assets/templates.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SlotKind {
    Target,
    Anchor,
    New,
    Source,
    Direction,
    Degrees,
    Rotation,
    Color,
    Material,
    Texture,
    Scale,
    Camera,
    /// Bare label inside a reference qualifier.
    Label,
}

impl SlotKind {
    fn from_name(s: &str) -> Option<SlotKind> {
        Some(match s {
            "target" => SlotKind::Target,
            "anchor" => SlotKind::Anchor,
            "new" => SlotKind::New,
            "source" => SlotKind::Source,
            "direction" => SlotKind::Direction,
            "degrees" => SlotKind::Degrees,
            "rotation" => SlotKind::Rotation,
            "color" => SlotKind::Color,
            "material" => SlotKind::Material,
            "texture" => SlotKind::Texture,
            "scale" => SlotKind::Scale,
            "camera" => SlotKind::Camera,
            "label" => SlotKind::Label,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            SlotKind::Target => "target",
            SlotKind::Anchor => "anchor",
            SlotKind::New => "new",
            SlotKind::Source => "source",
            SlotKind::Direction => "direction",
            SlotKind::Degrees => "degrees",
            SlotKind::Rotation => "rotation",
            SlotKind::Color => "color",
            SlotKind::Material => "material",
            SlotKind::Texture => "texture",
            SlotKind::Scale => "scale",
            SlotKind::Camera => "camera",
            SlotKind::Label => "label",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Piece {
    Lit(String),
    Alt(Vec<String>),
    Slot(SlotKind),
}

#[derive(Debug, Clone, PartialEq)]
enum Elem {
    Word(String),
    Alt(Vec<Vec<String>>),
    Slot(SlotKind),
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(|w| w.to_lowercase()).collect()
}

fn compile(text: &str) -> Result<(Vec<Piece>, Vec<Elem>), TextError> {
    let bad = |why: &str| TextError::BadTemplate(format!("{text:?}: {why}"));
    let mut pieces = Vec::new();
    let mut rest = text;
    while !rest.is_empty() {
        match rest.find('{') {
            Some(0) => {
                let close = rest.find('}').ok_or_else(|| bad("unclosed brace"))?;
                let inner = &rest[1..close];
                match inner.split_once(':') {
                    Some((_, opts)) => {
                        let opts: Vec<String> = opts.split('|').map(str::to_string).collect();
                        if opts.iter().any(|o| o.trim().is_empty()) {
                            return Err(bad("empty alternative"));
                        }
                        pieces.push(Piece::Alt(opts));
                    }
                    None => pieces.push(Piece::Slot(SlotKind::from_name(inner).ok_or_else(|| bad("unknown slot"))?)),
                }
                rest = &rest[close + 1..];
            }
            Some(i) => {
                pieces.push(Piece::Lit(rest[..i].to_string()));
                rest = &rest[i..];
            }
            None => {
                pieces.push(Piece::Lit(rest.to_string()));
                rest = "";
            }
        }
    }
    let mut elems = Vec::new();
    for p in &pieces {
        match p {
            Piece::Lit(s) => {
                if s.contains('}') {
                    return Err(bad("stray brace"));
                }
                elems.extend(words(s).into_iter().map(Elem::Word));
            }
            Piece::Alt(opts) => elems.push(Elem::Alt(opts.iter().map(|o| words(o)).collect())),
            Piece::Slot(k) => elems.push(Elem::Slot(*k)),
        }
    }
    Ok((pieces, elems))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TemplateFile {
    version: u32,
    templates: Vec<TemplateSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TemplateSpec {
    kind: OpKind,
    variant: String,
    text: String,
    #[serde(default)]
    origin: String,
}

#[derive(Debug, Clone)]
pub struct Template {
    pub kind: OpKind,
    pub variant: String,
    pub text: String,
    pub origin: String,
    pieces: Vec<Piece>,
    elems: Vec<Elem>,
}

impl Template {
    pub fn slots(&self) -> BTreeSet<SlotKind> {
        self.elems
            .iter()
            .filter_map(|e| match e {
                Elem::Slot(k) => Some(*k),
                _ => None,
            })
            .collect()
    }

    pub(crate) fn render(&self, value: &dyn Fn(SlotKind) -> Option<String>, rng: &mut Rng) -> Result<String, TextError> {
        let mut out = String::new();
        for p in &self.pieces {
            match p {
                Piece::Lit(s) => out.push_str(s),
                Piece::Alt(opts) => out.push_str(&opts[rng.random_range(0..opts.len())]),
                Piece::Slot(k) => out.push_str(&value(*k).ok_or(TextError::MissingSlot(k.name().to_string()))?),
            }
        }
        Ok(capitalize(&out))
    }
}

/// Every (kind, variant) pair and the slots its templates must use.
pub fn variant_slots() -> Vec<(OpKind, &'static str, &'static [SlotKind])> {
    use SlotKind::*;
    vec![
        (OpKind::Add, "on_supporter", &[New, Anchor]),
        (OpKind::Add, "near_object", &[New, Anchor]),
        (OpKind::Add, "at_coordinate", &[New, Source]),
        (OpKind::Remove, "default", &[Target]),
        (OpKind::Translate, "by_direction", &[Target, Direction]),
        (OpKind::Translate, "near_object", &[Target, Anchor]),
        (OpKind::Translate, "onto_object", &[Target, Anchor]),
        (OpKind::Translate, "at_coordinate", &[Target, Source]),
        (OpKind::Rotate, "turn", &[Target, Degrees, Rotation]),
        (OpKind::Rotate, "half_turn", &[Target]),
        (OpKind::Replace, "default", &[Target, New]),
        (OpKind::ColorChange, "default", &[Target, Color]),
        (OpKind::MaterialChange, "default", &[Target, Material]),
        (OpKind::SizeChange, "default", &[Target, Scale]),
        (OpKind::ViewpointChange, "translate", &[Camera]),
        (OpKind::ViewpointChange, "pan", &[Camera]),
        (OpKind::ViewpointChange, "tilt", &[Camera]),
        (OpKind::ViewpointChange, "yaw", &[Camera]),
        (OpKind::BackgroundChange, "floor_only", &[Texture]),
        (OpKind::BackgroundChange, "floor_and_walls", &[Texture]),
    ]
}

/// Closed template grammar plus the label vocabulary used when parsing.
#[derive(Debug, Clone)]
pub struct TemplateLibrary {
    pub version: u32,
    pub templates: Vec<Template>,
    labels: Vec<Vec<String>>,
}

impl TemplateLibrary {
    pub fn from_json(text: &str) -> Result<TemplateLibrary, TextError> {
        let file: TemplateFile = serde_json::from_str(text).map_err(|e| TextError::BadTemplate(e.to_string()))?;
        if file.version != TEMPLATE_VERSION {
            return Err(TextError::BadTemplate(format!("unsupported template version {}", file.version)));
        }
        let table = variant_slots();
        let mut templates = Vec::new();
        for spec in file.templates {
            let (pieces, elems) = compile(&spec.text)?;
            let t = Template { kind: spec.kind, variant: spec.variant, text: spec.text, origin: spec.origin, pieces, elems };
            let Some((_, _, need)) = table.iter().find(|(k, v, _)| *k == t.kind && *v == t.variant) else {
                return Err(TextError::BadTemplate(format!("unknown variant {}/{}", t.kind, t.variant)));
            };
            let need: BTreeSet<SlotKind> = need.iter().copied().collect();
            if t.slots() != need {
                return Err(TextError::BadTemplate(format!("{:?}: slots must be exactly {:?}", t.text, need)));
            }
            templates.push(t);
        }
        for (k, v, _) in &table {
            if !templates.iter().any(|t| t.kind == *k && t.variant == *v) {
                return Err(TextError::BadTemplate(format!("no template for {k}/{v}")));
            }
        }
        Ok(TemplateLibrary { version: file.version, templates, labels: Vec::new() })
    }

    /// The shipped templates; labels are unconstrained until
    /// [`TemplateLibrary::with_labels`] is called.
    pub fn builtin() -> TemplateLibrary {
        TemplateLibrary::from_json(BUILTIN_TEMPLATES).expect("shipped templates are valid")
    }

    /// Restricts label slots to the given vocabulary, which makes parsing
    /// unambiguous for labels containing template words.
    pub fn with_labels<S: AsRef<str>>(mut self, labels: impl IntoIterator<Item = S>) -> TemplateLibrary {
        let mut l: Vec<Vec<String>> = labels.into_iter().map(|s| words(s.as_ref())).filter(|w| !w.is_empty()).collect();
        l.sort();
        l.dedup();
        self.labels = l;
        self
    }

    pub fn variants(&self, kind: OpKind, variant: &str) -> Vec<&Template> {
        self.templates.iter().filter(|t| t.kind == kind && t.variant == variant).collect()
    }

    /// Best full parse of one lowercased clause: most literal words wins,
    /// then the earliest template.
    pub(crate) fn match_clause(&self, toks: &[&str]) -> Option<(&Template, Vec<Capture>)> {
        let m = Matcher { labels: &self.labels };
        let mut best: Option<(usize, &Template, Vec<Capture>)> = None;
        for t in &self.templates {
            let mut found = Vec::new();
            m.seq(&t.elems, 0, toks, 0, Vec::new(), 0, &mut found);
            for hit in found.into_iter().filter(|h| h.end == toks.len()) {
                if best.as_ref().is_none_or(|(lits, _, _)| hit.literals > *lits) {
                    best = Some((hit.literals, t, hit.caps));
                }
            }
        }
        best.map(|(_, t, c)| (t, c))
    }
}

pub fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

pub fn decapitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_lowercase().chain(c).collect(),
        None => String::new(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Capture {
    Object(SlotKind, ObjectDesc),
    New(String),
    Label(SlotKind, String),
    Direction(Direction),
    Degrees(u32),
    Rotation(RotationDirection),
    Color(ColorName),
    Material(MaterialName),
    Texture(TextureId),
    Scale(f64),
    Camera(CameraDirection),
}

struct Hit {
    end: usize,
    caps: Vec<Capture>,
    literals: usize,
}

struct QualPattern {
    action: RefAction,
    elems: Vec<Elem>,
    build: fn(&[Capture]) -> Option<Qualifier>,
}

struct RefHead {
    action: RefAction,
    words: Vec<String>,
}

fn cap_label(c: &[Capture]) -> Option<String> {
    c.iter().find_map(|c| match c {
        Capture::Label(_, l) => Some(l.clone()),
        _ => None,
    })
}

static REF_HEADS: LazyLock<Vec<RefHead>> = LazyLock::new(|| {
    [
        (RefAction::Added, "the object that was added"),
        (RefAction::Moved, "the object that was moved"),
        (RefAction::Rotated, "the object that was rotated"),
        (RefAction::Recolored, "the object that was recolored"),
        (RefAction::Resized, "the object that was resized"),
        (RefAction::Replaced, "the object that was placed in exchange"),
        (RefAction::MaterialChanged, "the object whose material was changed"),
    ]
    .into_iter()
    .map(|(action, s)| RefHead { action, words: words(s) })
    .collect()
});

static QUAL_PATTERNS: LazyLock<Vec<QualPattern>> = LazyLock::new(|| {
    let when = "{when:originally|initially}";
    let rows: Vec<(RefAction, String, fn(&[Capture]) -> Option<Qualifier>)> = vec![
        (RefAction::Added, "on top of the {label}".into(), |c| cap_label(c).map(Qualifier::OnTopOf)),
        (RefAction::Added, "near the {label}".into(), |c| cap_label(c).map(Qualifier::Near)),
        (RefAction::Added, format!("where the {{label}} {when} was"), |c| cap_label(c).map(Qualifier::WhereOriginally)),
        (RefAction::Moved, "{direction}".into(), |c| match c {
            [Capture::Direction(d)] => Some(Qualifier::Direction(*d)),
            _ => None,
        }),
        (RefAction::Moved, "onto the {label}".into(), |c| cap_label(c).map(Qualifier::Onto)),
        (RefAction::Moved, "near the {label}".into(), |c| cap_label(c).map(Qualifier::Near)),
        (RefAction::Moved, format!("to where the {{label}} {when} was"), |c| {
            cap_label(c).map(Qualifier::ToWhereOriginally)
        }),
        (RefAction::Rotated, "{degrees} degrees {rotation}".into(), |c| match c {
            [Capture::Degrees(d), Capture::Rotation(r)] => Some(Qualifier::Rotation { degrees: *d, direction: Some(*r) }),
            _ => None,
        }),
        (RefAction::Rotated, "{degrees} degrees".into(), |c| match c {
            [Capture::Degrees(d)] => Some(Qualifier::Rotation { degrees: *d, direction: None }),
            _ => None,
        }),
        (RefAction::Recolored, "{color}".into(), |c| match c {
            [Capture::Color(x)] => Some(Qualifier::Color(*x)),
            _ => None,
        }),
        (RefAction::Resized, "to {scale} times its size".into(), |c| match c {
            [Capture::Scale(s)] => Some(Qualifier::Scale(*s)),
            _ => None,
        }),
        (RefAction::MaterialChanged, "to {material}".into(), |c| match c {
            [Capture::Material(m)] => Some(Qualifier::Material(*m)),
            _ => None,
        }),
        (RefAction::Replaced, "for the {label}".into(), |c| cap_label(c).map(Qualifier::InExchangeFor)),
    ];
    rows.into_iter()
        .map(|(action, text, build)| QualPattern { action, elems: compile(&text).expect("qualifier pattern").1, build })
        .collect()
});

struct Matcher<'a> {
    labels: &'a [Vec<String>],
}

fn starts_with(toks: &[&str], pos: usize, w: &[String]) -> bool {
    toks.len() >= pos + w.len() && w.iter().zip(&toks[pos..]).all(|(a, b)| a == b)
}

impl Matcher<'_> {
    #[allow(clippy::too_many_arguments)]
    fn seq(&self, elems: &[Elem], i: usize, toks: &[&str], pos: usize, caps: Vec<Capture>, lits: usize, out: &mut Vec<Hit>) {
        let Some(e) = elems.get(i) else {
            out.push(Hit { end: pos, caps, literals: lits });
            return;
        };
        match e {
            Elem::Word(w) => {
                if toks.get(pos) == Some(&w.as_str()) {
                    self.seq(elems, i + 1, toks, pos + 1, caps, lits + 1, out);
                }
            }
            Elem::Alt(opts) => {
                for o in opts {
                    if starts_with(toks, pos, o) {
                        self.seq(elems, i + 1, toks, pos + o.len(), caps.clone(), lits + o.len(), out);
                    }
                }
            }
            Elem::Slot(k) => {
                for (cap, end, l) in self.slot(*k, toks, pos) {
                    let mut c = caps.clone();
                    c.push(cap);
                    self.seq(elems, i + 1, toks, end, c, lits + l, out);
                }
            }
        }
    }

    fn labels_at(&self, toks: &[&str], pos: usize) -> Vec<(String, usize)> {
        if self.labels.is_empty() {
            (pos + 1..=toks.len()).map(|end| (toks[pos..end].join(" "), end)).collect()
        } else {
            self.labels
                .iter()
                .filter(|l| starts_with(toks, pos, l))
                .map(|l| (l.join(" "), pos + l.len()))
                .collect()
        }
    }

    fn named<T: Copy>(all: &[T], name: impl Fn(T) -> &'static str, toks: &[&str], pos: usize) -> Vec<(T, usize)> {
        all.iter()
            .filter_map(|v| {
                let w = words(name(*v));
                starts_with(toks, pos, &w).then_some((*v, pos + w.len()))
            })
            .collect()
    }

    fn objects(&self, k: SlotKind, toks: &[&str], pos: usize) -> Vec<(Capture, usize, usize)> {
        let mut out = Vec::new();
        for head in REF_HEADS.iter() {
            if !starts_with(toks, pos, &head.words) {
                continue;
            }
            let after = pos + head.words.len();
            let lits = head.words.len();
            if !head.action.needs_qualifier() {
                let phrase = ReferencePhrase { action: head.action, qualifier: None };
                out.push((Capture::Object(k, ObjectDesc::Reference(phrase)), after, lits));
            }
            for q in QUAL_PATTERNS.iter().filter(|q| q.action == head.action) {
                let mut hits = Vec::new();
                self.seq(&q.elems, 0, toks, after, Vec::new(), 0, &mut hits);
                for h in hits {
                    if let Some(qual) = (q.build)(&h.caps) {
                        let phrase = ReferencePhrase { action: head.action, qualifier: Some(qual) };
                        out.push((Capture::Object(k, ObjectDesc::Reference(phrase)), h.end, lits + h.literals));
                    }
                }
            }
        }
        if toks.get(pos) == Some(&"the") {
            for (l, end) in self.labels_at(toks, pos + 1) {
                out.push((Capture::Object(k, ObjectDesc::Label(l)), end, 1));
            }
        }
        out
    }

    fn slot(&self, k: SlotKind, toks: &[&str], pos: usize) -> Vec<(Capture, usize, usize)> {
        if pos >= toks.len() {
            return Vec::new();
        }
        let plain = |v: Vec<(Capture, usize)>| v.into_iter().map(|(c, e)| (c, e, 0)).collect();
        match k {
            SlotKind::Target | SlotKind::Anchor => self.objects(k, toks, pos),
            SlotKind::New => match toks[pos] {
                "a" | "an" => plain(self.labels_at(toks, pos + 1).into_iter().map(|(l, e)| (Capture::New(l), e)).collect()),
                _ => Vec::new(),
            },
            SlotKind::Source | SlotKind::Label => {
                plain(self.labels_at(toks, pos).into_iter().map(|(l, e)| (Capture::Label(k, l), e)).collect())
            }
            SlotKind::Direction => plain(
                Self::named(&Direction::ALL, super::phrase::direction_words, toks, pos)
                    .into_iter()
                    .map(|(d, e)| (Capture::Direction(d), e))
                    .collect(),
            ),
            SlotKind::Degrees => plain(
                toks[pos]
                    .parse::<u32>()
                    .ok()
                    .filter(|d| ROTATION_DEGREES.contains(d) && d.to_string() == toks[pos])
                    .map(|d| vec![(Capture::Degrees(d), pos + 1)])
                    .unwrap_or_default(),
            ),
            SlotKind::Rotation => plain(
                Self::named(&[RotationDirection::Cw, RotationDirection::Ccw], super::phrase::rotation_words, toks, pos)
                    .into_iter()
                    .map(|(d, e)| (Capture::Rotation(d), e))
                    .collect(),
            ),
            SlotKind::Color => plain(
                Self::named(ColorName::ALL, ColorName::name, toks, pos)
                    .into_iter()
                    .map(|(c, e)| (Capture::Color(c), e))
                    .collect(),
            ),
            SlotKind::Material => plain(
                Self::named(MaterialName::ALL, MaterialName::name, toks, pos)
                    .into_iter()
                    .map(|(c, e)| (Capture::Material(c), e))
                    .collect(),
            ),
            SlotKind::Texture => plain(
                Self::named(TextureId::ALL, TextureId::name, toks, pos)
                    .into_iter()
                    .map(|(c, e)| (Capture::Texture(c), e))
                    .collect(),
            ),
            SlotKind::Scale => plain(
                SCALE_FACTORS
                    .iter()
                    .filter(|s| super::phrase::scale_words(**s) == toks[pos])
                    .map(|s| (Capture::Scale(*s), pos + 1))
                    .collect(),
            ),
            SlotKind::Camera => plain(
                Self::named(&CAMERA_DIRECTIONS, camera_words, toks, pos)
                    .into_iter()
                    .map(|(c, e)| (Capture::Camera(c), e))
                    .collect(),
            ),
        }
    }
}

const CAMERA_DIRECTIONS: [CameraDirection; 6] = [
    CameraDirection::Forward,
    CameraDirection::Backward,
    CameraDirection::Left,
    CameraDirection::Right,
    CameraDirection::Up,
    CameraDirection::Down,
];

pub fn camera_words(d: CameraDirection) -> &'static str {
    match d {
        CameraDirection::Forward => "forward",
        CameraDirection::Backward => "backward",
        CameraDirection::Left => "left",
        CameraDirection::Right => "right",
        CameraDirection::Up => "up",
        CameraDirection::Down => "down",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_library_loads_and_covers_every_variant() {
        let lib = TemplateLibrary::builtin();
        for (k, v, _) in variant_slots() {
            assert!(!lib.variants(k, v).is_empty(), "{k}/{v}");
        }
    }

    #[test]
    fn malformed_templates_are_rejected() {
        let bad = r#"{"version":1,"templates":[{"kind":"remove","variant":"default","text":"Remove {anchor}"}]}"#;
        assert!(TemplateLibrary::from_json(bad).is_err());
        let unclosed = r#"{"version":1,"templates":[{"kind":"remove","variant":"default","text":"Remove {target"}]}"#;
        assert!(TemplateLibrary::from_json(unclosed).is_err());
    }
}
