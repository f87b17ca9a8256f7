//! Reference phrases: "the object that was rotated 90 degrees clockwise".

use serde::{Deserialize, Serialize};

use crate::catalog::{ColorName, MaterialName};
use crate::ops::{Direction, RotationDirection};

/// The historical action a reference phrase points back to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefAction {
    Added,
    Moved,
    Rotated,
    Recolored,
    Resized,
    Replaced,
    MaterialChanged,
}

impl RefAction {
    /// Replacement is only ever described together with what was replaced.
    pub fn needs_qualifier(self) -> bool {
        self == RefAction::Replaced
    }
}

/// Attribute detail that distinguishes two uses of the same action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Qualifier {
    OnTopOf(String),
    Near(String),
    Onto(String),
    Direction(Direction),
    WhereOriginally(String),
    ToWhereOriginally(String),
    Rotation { degrees: u32, direction: Option<RotationDirection> },
    Color(ColorName),
    Material(MaterialName),
    Scale(f64),
    InExchangeFor(String),
}

impl Qualifier {
    /// The phrase tail as rendered after the action word.
    pub fn render(&self) -> String {
        match self {
            Qualifier::OnTopOf(l) => format!("on top of the {l}"),
            Qualifier::Near(l) => format!("near the {l}"),
            Qualifier::Onto(l) => format!("onto the {l}"),
            Qualifier::Direction(d) => direction_words(*d).to_string(),
            Qualifier::WhereOriginally(l) => format!("where the {l} originally was"),
            Qualifier::ToWhereOriginally(l) => format!("to where the {l} originally was"),
            Qualifier::Rotation { degrees, direction: Some(d) } => format!("{degrees} degrees {}", rotation_words(*d)),
            Qualifier::Rotation { degrees, direction: None } => format!("{degrees} degrees"),
            Qualifier::Color(c) => c.name().to_string(),
            Qualifier::Material(m) => format!("to {}", m.name()),
            Qualifier::Scale(s) => format!("to {} times its size", scale_words(*s)),
            Qualifier::InExchangeFor(l) => format!("for the {l}"),
        }
    }

    /// Whether the phrase can be rendered without a blank label.
    pub fn is_complete(&self) -> bool {
        match self {
            Qualifier::OnTopOf(l)
            | Qualifier::Near(l)
            | Qualifier::Onto(l)
            | Qualifier::WhereOriginally(l)
            | Qualifier::ToWhereOriginally(l)
            | Qualifier::InExchangeFor(l) => !l.is_empty(),
            _ => true,
        }
    }
}

/// A history-based description of an object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePhrase {
    pub action: RefAction,
    pub qualifier: Option<Qualifier>,
}

impl ReferencePhrase {
    pub fn render(&self) -> String {
        let head = match self.action {
            RefAction::Added => "the object that was added",
            RefAction::Moved => "the object that was moved",
            RefAction::Rotated => "the object that was rotated",
            RefAction::Recolored => "the object that was recolored",
            RefAction::Resized => "the object that was resized",
            RefAction::Replaced => "the object that was placed in exchange",
            RefAction::MaterialChanged => "the object whose material was changed",
        };
        match &self.qualifier {
            Some(q) => format!("{head} {}", q.render()),
            None => head.to_string(),
        }
    }
}

/// How an instruction names an object: by label or by its history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum ObjectDesc {
    Label(String),
    Reference(ReferencePhrase),
}

impl ObjectDesc {
    pub fn render(&self) -> String {
        match self {
            ObjectDesc::Label(l) => format!("the {l}"),
            ObjectDesc::Reference(p) => p.render(),
        }
    }
}

pub fn direction_words(d: Direction) -> &'static str {
    match d {
        Direction::Left => "to the left",
        Direction::Right => "to the right",
        Direction::Forward => "forward",
        Direction::Backward => "backward",
    }
}

pub fn rotation_words(d: RotationDirection) -> &'static str {
    match d {
        RotationDirection::Cw => "clockwise",
        RotationDirection::Ccw => "counterclockwise",
    }
}

/// Shortest decimal that parses back to the same factor.
pub fn scale_words(s: f64) -> String {
    format!("{s}")
}

/// "a vase" / "an apple".
pub fn indefinite(label: &str) -> String {
    let article = match label.chars().next() {
        Some(c) if "aeiou".contains(c.to_ascii_lowercase()) => "an",
        _ => "a",
    };
    format!("{article} {label}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phrases_read_naturally() {
        let p = ReferencePhrase { action: RefAction::Moved, qualifier: Some(Qualifier::Onto("desk".into())) };
        assert_eq!(p.render(), "the object that was moved onto the desk");
        let p = ReferencePhrase { action: RefAction::Replaced, qualifier: Some(Qualifier::InExchangeFor("vase".into())) };
        assert_eq!(p.render(), "the object that was placed in exchange for the vase");
        let p = ReferencePhrase { action: RefAction::Rotated, qualifier: None };
        assert_eq!(p.render(), "the object that was rotated");
        assert_eq!(indefinite("apple"), "an apple");
        assert_eq!(indefinite("book"), "a book");
    }
}
