//! Core of the editforge toolkit: symbolic indoor scenes, the ten atomic edit
//! operations, multi-step editing chains with inter-step references, the
//! instruction grammar, and a deterministic software rasterizer.

pub mod canonical;
pub mod catalog;
pub mod chain;
pub mod fmath;
pub mod geometry;
pub mod ops;
pub mod render;
pub mod rng;
pub mod scene;
pub mod text;
