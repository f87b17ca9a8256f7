//! The ten atomic edit operations.

mod apply;
mod sample;

pub use apply::*;
pub use sample::*;

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::catalog::{ColorName, MaterialName, TextureId};
use crate::geometry::Vec3;
use crate::scene::ObjectId;

pub const OP_SCHEMA: u32 = 1;

pub const ROTATION_DEGREES: [u32; 4] = [60, 90, 120, 180];
pub const SCALE_FACTORS: [f64; 5] = [0.6, 0.8, 1.2, 1.5, 1.8];
pub const CAMERA_STEP_M: f64 = 0.4;
pub const CAMERA_STEP_DEG: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Add,
    Remove,
    Translate,
    Rotate,
    Replace,
    ColorChange,
    MaterialChange,
    SizeChange,
    ViewpointChange,
    BackgroundChange,
}

impl OpKind {
    pub const ALL: [OpKind; 10] = [
        OpKind::Add,
        OpKind::Remove,
        OpKind::Translate,
        OpKind::Rotate,
        OpKind::Replace,
        OpKind::ColorChange,
        OpKind::MaterialChange,
        OpKind::SizeChange,
        OpKind::ViewpointChange,
        OpKind::BackgroundChange,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Add => "add",
            OpKind::Remove => "remove",
            OpKind::Translate => "translate",
            OpKind::Rotate => "rotate",
            OpKind::Replace => "replace",
            OpKind::ColorChange => "color_change",
            OpKind::MaterialChange => "material_change",
            OpKind::SizeChange => "size_change",
            OpKind::ViewpointChange => "viewpoint_change",
            OpKind::BackgroundChange => "background_change",
        }
    }

    /// Whether an op of this kind may carry a dependency annotation.
    pub fn dependency_eligible(self) -> bool {
        !matches!(self, OpKind::ViewpointChange | OpKind::BackgroundChange)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Camera-relative horizontal direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Left,
    Right,
    Forward,
    Backward,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Left, Direction::Right, Direction::Forward, Direction::Backward];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationDirection {
    Cw,
    Ccw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraMotion {
    Translate,
    Pan,
    Tilt,
    Yaw,
}

impl CameraMotion {
    pub const ALL: [CameraMotion; 4] = [CameraMotion::Translate, CameraMotion::Pan, CameraMotion::Tilt, CameraMotion::Yaw];

    pub fn directions(self) -> [CameraDirection; 2] {
        match self {
            CameraMotion::Translate => [CameraDirection::Forward, CameraDirection::Backward],
            CameraMotion::Pan | CameraMotion::Yaw => [CameraDirection::Left, CameraDirection::Right],
            CameraMotion::Tilt => [CameraDirection::Up, CameraDirection::Down],
        }
    }

    pub fn magnitude(self) -> f64 {
        match self {
            CameraMotion::Translate | CameraMotion::Pan => CAMERA_STEP_M,
            CameraMotion::Tilt | CameraMotion::Yaw => CAMERA_STEP_DEG,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraDirection {
    Forward,
    Backward,
    Left,
    Right,
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundScope {
    FloorOnly,
    FloorAndWalls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AddPlacement {
    OnSupporter { anchor: ObjectId },
    NearObject { anchor: ObjectId },
    AtCoordinate { position: Vec3 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TranslateMode {
    ByDirection { direction: Direction },
    NearObject { anchor: ObjectId },
    OntoObject { anchor: ObjectId },
    AtCoordinate { position: Vec3 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OpParams {
    Add {
        label: String,
        #[serde(flatten)]
        placement: AddPlacement,
    },
    Remove {
        target: ObjectId,
    },
    Translate {
        target: ObjectId,
        #[serde(flatten)]
        mode: TranslateMode,
    },
    Rotate {
        target: ObjectId,
        degrees: u32,
        direction: RotationDirection,
    },
    Replace {
        target: ObjectId,
        new_label: String,
    },
    ColorChange {
        target: ObjectId,
        color: ColorName,
    },
    MaterialChange {
        target: ObjectId,
        material: MaterialName,
    },
    SizeChange {
        target: ObjectId,
        scale: f64,
    },
    ViewpointChange {
        motion: CameraMotion,
        direction: CameraDirection,
        magnitude: f64,
    },
    BackgroundChange {
        scope: BackgroundScope,
        texture: TextureId,
    },
}

impl OpParams {
    pub fn kind(&self) -> OpKind {
        match self {
            OpParams::Add { .. } => OpKind::Add,
            OpParams::Remove { .. } => OpKind::Remove,
            OpParams::Translate { .. } => OpKind::Translate,
            OpParams::Rotate { .. } => OpKind::Rotate,
            OpParams::Replace { .. } => OpKind::Replace,
            OpParams::ColorChange { .. } => OpKind::ColorChange,
            OpParams::MaterialChange { .. } => OpKind::MaterialChange,
            OpParams::SizeChange { .. } => OpKind::SizeChange,
            OpParams::ViewpointChange { .. } => OpKind::ViewpointChange,
            OpParams::BackgroundChange { .. } => OpKind::BackgroundChange,
        }
    }

    /// The existing object the op acts on, if any.
    pub fn target(&self) -> Option<ObjectId> {
        match self {
            OpParams::Remove { target }
            | OpParams::Translate { target, .. }
            | OpParams::Rotate { target, .. }
            | OpParams::Replace { target, .. }
            | OpParams::ColorChange { target, .. }
            | OpParams::MaterialChange { target, .. }
            | OpParams::SizeChange { target, .. } => Some(*target),
            _ => None,
        }
    }

    pub fn anchor(&self) -> Option<ObjectId> {
        match self {
            OpParams::Add { placement: AddPlacement::OnSupporter { anchor } | AddPlacement::NearObject { anchor }, .. }
            | OpParams::Translate {
                mode: TranslateMode::NearObject { anchor } | TranslateMode::OntoObject { anchor },
                ..
            } => Some(*anchor),
            _ => None,
        }
    }

    pub fn coordinate(&self) -> Option<Vec3> {
        match self {
            OpParams::Add { placement: AddPlacement::AtCoordinate { position }, .. }
            | OpParams::Translate { mode: TranslateMode::AtCoordinate { position }, .. } => Some(*position),
            _ => None,
        }
    }

    pub fn viewpoint(motion: CameraMotion, direction: CameraDirection) -> OpParams {
        OpParams::ViewpointChange { motion, direction, magnitude: motion.magnitude() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependencyKind {
    OperationReference,
    PositionReference,
}

/// Which part of the op a dependency describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSlot {
    Target,
    Anchor,
    Position,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyAnnotation {
    pub kind: DependencyKind,
    pub referenced_op_index: usize,
    pub referenced_object: ObjectId,
    /// Attribute phrase added when the bare action would be ambiguous.
    pub disambiguator: Option<String>,
    pub slot: ReferenceSlot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditOp {
    pub op_schema: u32,
    #[serde(flatten)]
    pub params: OpParams,
    #[serde(default)]
    pub dependency: Option<DependencyAnnotation>,
    pub verb_seed: u64,
}

impl EditOp {
    pub fn new(params: OpParams, verb_seed: u64) -> EditOp {
        EditOp { op_schema: OP_SCHEMA, params, dependency: None, verb_seed }
    }

    pub fn kind(&self) -> OpKind {
        self.params.kind()
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum OpError {
    #[error("no free position")]
    NoFreePosition,
    #[error("label {0:?} already in the scene")]
    LabelNotNovel(String),
    #[error("label {0:?} not in the catalog")]
    UnknownLabel(String),
    #[error("anchor object missing")]
    AnchorMissing,
    #[error("target object missing")]
    TargetMissing,
    #[error("target supports other objects")]
    TargetIsSupporter,
    #[error("rotation would collide")]
    CollisionAfterRotation,
    #[error("scaling would collide")]
    CollisionAfterScale,
    #[error("object already has that color")]
    SameColor,
    #[error("object already has that material")]
    SameMaterial,
    #[error("surface already has that texture")]
    SameTexture,
    #[error("an object would become invisible")]
    VisibilityBroken,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no feasible operation")]
    NoFeasibleOp,
}
