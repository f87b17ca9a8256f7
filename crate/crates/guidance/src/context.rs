use std::fmt;

use serde::{Deserialize, Serialize};

/// One conditioning input in an interleaved editing history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "index", rename_all = "snake_case")]
pub enum Element {
    /// The unedited input image.
    SourceImage,
    /// The full multi-edit instruction given in one piece.
    Composite,
    /// The `j`-th decomposed instruction (1-based).
    Instruction(usize),
    /// The `j`-th intermediate editing result (1-based).
    Image(usize),
}

impl Element {
    /// `I_0` is the source image; later indices are intermediate results.
    pub fn image(j: usize) -> Element {
        if j == 0 {
            Element::SourceImage
        } else {
            Element::Image(j)
        }
    }

    pub fn is_text(self) -> bool {
        matches!(self, Element::Composite | Element::Instruction(_))
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::SourceImage => write!(f, "I0"),
            Element::Composite => write!(f, "Tc"),
            Element::Instruction(j) => write!(f, "T{j}"),
            Element::Image(j) => write!(f, "I{j}"),
        }
    }
}

/// An ordered conditioning context; empty means unconditional.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContextSet(pub Vec<Element>);

impl ContextSet {
    pub fn empty() -> ContextSet {
        ContextSet(Vec::new())
    }

    pub fn new(elements: impl IntoIterator<Item = Element>) -> ContextSet {
        ContextSet(elements.into_iter().collect())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn elements(&self) -> &[Element] {
        &self.0
    }

    /// History in chronological order, `I_0, T_1, I_1, T_2, ...`, holding
    /// instructions up to `texts` and images `I_0..=I_k` for `images = Some(k)`.
    pub fn interleaved(texts: usize, images: Option<usize>) -> ContextSet {
        let mut out = Vec::new();
        if images.is_some() {
            out.push(Element::SourceImage);
        }
        let last_image = images.unwrap_or(0);
        for j in 1..=texts.max(last_image) {
            if j <= texts {
                out.push(Element::Instruction(j));
            }
            if j <= last_image {
                out.push(Element::Image(j));
            }
        }
        ContextSet(out)
    }

    pub fn instructions(range: std::ops::RangeInclusive<usize>) -> impl Iterator<Item = Element> {
        range.map(Element::Instruction)
    }

    pub fn with(mut self, more: impl IntoIterator<Item = Element>) -> ContextSet {
        self.0.extend(more);
        self
    }
}

impl fmt::Display for ContextSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "}}")
    }
}
