//! Closed vocabularies (colors, materials, textures) and the asset catalog.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

use crate::geometry::Vec3;

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:expr),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            /// Name used in instructions.
            pub fn name(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }

            pub fn from_name(text: &str) -> Option<$name> {
                match text { $($text => Some($name::$variant),)+ _ => None }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

named_enum!(
    /// The 12-color palette.
    ColorName {
        Red => "red",
        Blue => "blue",
        Green => "green",
        Yellow => "yellow",
        Orange => "orange",
        Purple => "purple",
        Pink => "pink",
        White => "white",
        Black => "black",
        Gray => "gray",
        Brown => "brown",
        Beige => "beige",
    }
);

named_enum!(
    MaterialName {
        Wood => "wood",
        Metal => "metal",
        Plastic => "plastic",
        Fabric => "fabric",
        Glass => "glass",
    }
);

named_enum!(
    /// Floor and wall textures.
    TextureId {
        Concrete => "concrete",
        WoodFloor => "wood floor",
        Marble => "marble",
        Brick => "brick",
        Carpet => "carpet",
        CeramicTiles => "ceramic tiles",
        Plaster => "plaster",
        Slate => "slate",
        Terrazzo => "terrazzo",
        Parquet => "parquet",
    }
);

impl ColorName {
    pub fn rgb(self) -> [u8; 3] {
        match self {
            ColorName::Red => [200, 40, 40],
            ColorName::Blue => [40, 70, 200],
            ColorName::Green => [40, 160, 60],
            ColorName::Yellow => [230, 210, 40],
            ColorName::Orange => [235, 130, 30],
            ColorName::Purple => [130, 50, 170],
            ColorName::Pink => [240, 140, 180],
            ColorName::White => [238, 238, 238],
            ColorName::Black => [30, 30, 30],
            ColorName::Gray => [128, 128, 128],
            ColorName::Brown => [120, 75, 40],
            ColorName::Beige => [220, 200, 160],
        }
    }
}

/// How a texture is drawn on a structural plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TexturePattern {
    Flat,
    /// Alternating square cells of the given size in metres.
    Checker { second: [u8; 3], cell: f64 },
    /// Bands of the given width, horizontal on walls and along x on floors.
    Stripes { second: [u8; 3], width: f64 },
}

impl TextureId {
    pub fn base_rgb(self) -> [u8; 3] {
        match self {
            TextureId::Concrete => [150, 150, 145],
            TextureId::WoodFloor => [160, 110, 70],
            TextureId::Marble => [225, 222, 215],
            TextureId::Brick => [150, 70, 50],
            TextureId::Carpet => [90, 100, 130],
            TextureId::CeramicTiles => [210, 215, 220],
            TextureId::Plaster => [235, 228, 210],
            TextureId::Slate => [70, 78, 84],
            TextureId::Terrazzo => [195, 185, 170],
            TextureId::Parquet => [175, 125, 75],
        }
    }

    pub fn pattern(self) -> TexturePattern {
        match self {
            TextureId::WoodFloor => TexturePattern::Stripes { second: [140, 95, 60], width: 0.25 },
            TextureId::Marble => TexturePattern::Checker { second: [200, 200, 196], cell: 1.0 },
            TextureId::Brick => TexturePattern::Stripes { second: [185, 175, 160], width: 0.1 },
            TextureId::CeramicTiles => TexturePattern::Checker { second: [170, 180, 190], cell: 0.5 },
            TextureId::Parquet => TexturePattern::Checker { second: [145, 100, 60], cell: 0.5 },
            TextureId::Terrazzo => TexturePattern::Checker { second: [175, 168, 150], cell: 0.25 },
            _ => TexturePattern::Flat,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Box,
    Cylinder,
    Sphere,
    /// A slab on four legs.
    Composite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetEntry {
    pub label: String,
    pub category: String,
    /// Width (x), depth (y), height (z) in metres at scale 1 and yaw 0.
    pub base_size: Vec3,
    pub is_supporter: bool,
    pub default_color: ColorName,
    pub shape: ShapeKind,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CatalogError {
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("non-positive size for {0:?}")]
    BadSize(String),
    #[error("supporter category {category:?} has non-supporter entry {label:?}")]
    SupporterMismatch { category: String, label: String },
}

pub const SUPPORTER_CATEGORIES: [&str; 4] = ["table", "desk", "bench", "cabinet"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetCatalog {
    pub entries: Vec<AssetEntry>,
}

impl AssetCatalog {
    pub fn new(entries: Vec<AssetEntry>) -> Result<Self, CatalogError> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !seen.insert(e.label.clone()) {
                return Err(CatalogError::DuplicateLabel(e.label.clone()));
            }
            if !(e.base_size.x > 0.0 && e.base_size.y > 0.0 && e.base_size.z > 0.0) {
                return Err(CatalogError::BadSize(e.label.clone()));
            }
            if SUPPORTER_CATEGORIES.contains(&e.category.as_str()) && !e.is_supporter {
                return Err(CatalogError::SupporterMismatch {
                    category: e.category.clone(),
                    label: e.label.clone(),
                });
            }
        }
        Ok(AssetCatalog { entries })
    }

    pub fn get(&self, label: &str) -> Option<&AssetEntry> {
        self.entries.iter().find(|e| e.label == label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.label.as_str())
    }

    pub fn supporters(&self) -> impl Iterator<Item = &AssetEntry> {
        self.entries.iter().filter(|e| e.is_supporter)
    }

    /// Catalog restricted to entries accepted by `keep`.
    pub fn filtered(&self, keep: impl Fn(&AssetEntry) -> bool) -> AssetCatalog {
        AssetCatalog { entries: self.entries.iter().filter(|e| keep(e)).cloned().collect() }
    }

    /// The held-out labels for unseen-object benchmarks: every `1/fraction`-th
    /// entry in catalog order.
    pub fn holdout_labels(&self, fraction: f64) -> Vec<String> {
        if fraction <= 0.0 {
            return Vec::new();
        }
        let stride = (1.0 / fraction).round().max(1.0) as usize;
        self.entries.iter().step_by(stride).map(|e| e.label.clone()).collect()
    }

    pub fn builtin() -> AssetCatalog {
        use ColorName::*;
        use ShapeKind::*;
        #[rustfmt::skip]
        let rows: &[(&str, &str, [f64; 3], ColorName, ShapeKind)] = &[
            ("coffee table", "table", [1.2, 0.6, 0.45], Brown, Composite),
            ("dining table", "table", [1.4, 0.8, 0.75], Brown, Composite),
            ("side table", "table", [0.6, 0.6, 0.55], Beige, Composite),
            ("modern coffee table", "table", [1.1, 0.7, 0.4], White, Composite),
            ("writing desk", "desk", [1.2, 0.6, 0.75], Brown, Composite),
            ("office desk", "desk", [1.4, 0.7, 0.75], Gray, Composite),
            ("computer desk", "desk", [1.1, 0.6, 0.74], Black, Composite),
            ("standing desk", "desk", [1.2, 0.7, 1.0], White, Composite),
            ("wooden bench", "bench", [1.3, 0.45, 0.45], Brown, Composite),
            ("garden bench", "bench", [1.4, 0.5, 0.5], Green, Composite),
            ("piano bench", "bench", [0.8, 0.4, 0.5], Black, Composite),
            ("storage bench", "bench", [1.0, 0.45, 0.5], Beige, Box),
            ("filing cabinet", "cabinet", [0.5, 0.6, 1.0], Gray, Box),
            ("tv cabinet", "cabinet", [1.4, 0.45, 0.55], Black, Box),
            ("shoe cabinet", "cabinet", [0.9, 0.4, 0.8], White, Box),
            ("sideboard", "cabinet", [1.3, 0.45, 0.8], Brown, Box),
            ("vase", "container", [0.35, 0.35, 0.55], Blue, Cylinder),
            ("basket", "container", [0.45, 0.35, 0.35], Beige, Box),
            ("bucket", "container", [0.4, 0.4, 0.4], Orange, Cylinder),
            ("flower pot", "container", [0.4, 0.4, 0.4], Brown, Cylinder),
            ("mixing bowl", "container", [0.5, 0.5, 0.3], White, Cylinder),
            ("coffee canister", "container", [0.35, 0.35, 0.45], Red, Cylinder),
            ("toaster", "appliance", [0.45, 0.35, 0.35], Gray, Box),
            ("speaker", "appliance", [0.4, 0.4, 0.6], Black, Box),
            ("wifi router", "appliance", [0.5, 0.4, 0.25], White, Box),
            ("microwave", "appliance", [0.6, 0.45, 0.4], Gray, Box),
            ("kettle", "appliance", [0.35, 0.35, 0.4], Red, Cylinder),
            ("desk fan", "appliance", [0.45, 0.35, 0.6], White, Box),
            ("basketball", "toy", [0.4, 0.4, 0.4], Orange, Sphere),
            ("soccer ball", "toy", [0.4, 0.4, 0.4], White, Sphere),
            ("teddy bear", "toy", [0.45, 0.4, 0.6], Brown, Box),
            ("toy truck", "toy", [0.6, 0.35, 0.35], Yellow, Box),
            ("beach ball", "toy", [0.5, 0.5, 0.5], Pink, Sphere),
            ("rubber duck", "toy", [0.4, 0.35, 0.4], Yellow, Sphere),
            ("pumpkin", "food", [0.5, 0.5, 0.4], Orange, Sphere),
            ("watermelon", "food", [0.55, 0.45, 0.45], Green, Sphere),
            ("pineapple", "food", [0.35, 0.35, 0.6], Yellow, Cylinder),
            ("cabbage", "food", [0.4, 0.4, 0.4], Green, Sphere),
            ("coconut", "food", [0.4, 0.4, 0.4], Brown, Sphere),
            ("grapefruit", "food", [0.4, 0.4, 0.4], Pink, Sphere),
            ("toolbox", "tool", [0.6, 0.35, 0.35], Red, Box),
            ("hatchet", "tool", [0.55, 0.3, 0.4], Gray, Box),
            ("bench vice", "tool", [0.45, 0.35, 0.4], Blue, Box),
            ("paint can", "tool", [0.4, 0.4, 0.45], White, Cylinder),
            ("tool chest", "tool", [0.6, 0.45, 0.6], Red, Box),
            ("step ladder", "tool", [0.5, 0.45, 0.9], Gray, Box),
            ("lamp", "decor", [0.4, 0.4, 0.7], Beige, Cylinder),
            ("floor lamp", "decor", [0.45, 0.45, 1.1], Black, Cylinder),
            ("bird house", "decor", [0.4, 0.4, 0.55], Brown, Box),
            ("picture frame", "decor", [0.6, 0.3, 0.5], Yellow, Box),
            ("globe", "decor", [0.45, 0.45, 0.45], Blue, Sphere),
            ("sculpture", "decor", [0.4, 0.4, 0.8], White, Box),
            ("tissue box", "household", [0.45, 0.3, 0.3], Pink, Box),
            ("laundry basket", "household", [0.55, 0.45, 0.5], White, Box),
            ("shoe", "household", [0.5, 0.3, 0.3], Black, Box),
            ("trash can", "household", [0.4, 0.4, 0.6], Gray, Cylinder),
            ("book stack", "household", [0.45, 0.35, 0.35], Red, Box),
            ("cushion", "household", [0.55, 0.55, 0.3], Purple, Box),
            ("armchair", "seating", [0.8, 0.8, 0.85], Blue, Box),
            ("stool", "seating", [0.4, 0.4, 0.6], Brown, Cylinder),
            ("ottoman", "seating", [0.6, 0.6, 0.45], Gray, Box),
            ("bookshelf", "seating", [0.8, 0.35, 1.2], Brown, Box),
            ("plant stand", "seating", [0.4, 0.4, 0.7], Green, Cylinder),
            ("chair", "seating", [0.5, 0.5, 0.9], Brown, Box),
        ];
        let entries = rows
            .iter()
            .map(|(label, category, [x, y, z], color, shape)| AssetEntry {
                label: (*label).to_string(),
                category: (*category).to_string(),
                base_size: Vec3::new(*x, *y, *z),
                is_supporter: SUPPORTER_CATEGORIES.contains(category),
                default_color: *color,
                shape: *shape,
            })
            .collect();
        AssetCatalog::new(entries).expect("builtin catalog is valid")
    }
}

/// Material an object of `category` starts with.
pub fn default_material(category: &str) -> MaterialName {
    match category {
        "table" | "desk" | "bench" | "cabinet" => MaterialName::Wood,
        "appliance" | "tool" => MaterialName::Metal,
        "household" | "seating" => MaterialName::Fabric,
        "decor" => MaterialName::Glass,
        _ => MaterialName::Plastic,
    }
}
