#![allow(dead_code)]

use std::sync::OnceLock;

use editforge_core::catalog::{AssetCatalog, AssetEntry};
use editforge_core::chain::{compose_chain, ChainRecord, ComposerConfig};
use editforge_core::geometry::Vec3;
use editforge_core::ops::{apply, EditOp, OpError, OpOutcome, OpParams};
use editforge_core::rng::SeedStream;
use editforge_core::scene::{init_scene, Camera, SceneConfig, SceneState};
use editforge_core::text::TemplateLibrary;

pub fn catalog() -> &'static AssetCatalog {
    static C: OnceLock<AssetCatalog> = OnceLock::new();
    C.get_or_init(AssetCatalog::builtin)
}

pub fn lib() -> &'static TemplateLibrary {
    static L: OnceLock<TemplateLibrary> = OnceLock::new();
    L.get_or_init(|| TemplateLibrary::builtin().with_labels(catalog().labels()))
}

pub fn entry(label: &str) -> &'static AssetEntry {
    catalog().get(label).unwrap_or_else(|| panic!("no {label}"))
}

/// A generated scene, skipping seeds whose camera search fails.
pub fn scene(seed: u64) -> SceneState {
    (0..16)
        .find_map(|k| init_scene(&SceneConfig::default(), catalog(), SeedStream(seed * 1000 + k)).ok())
        .expect("some seed initializes")
}

/// Looking at the room centre from the south.
pub fn front_camera() -> Camera {
    Camera { position: Vec3::new(0.0, -3.6, 2.4), yaw: 90.0, pitch: -26.0, fov: 60.0 }
}

pub fn blank() -> SceneState {
    SceneState::blank(&SceneConfig::default(), front_camera())
}

pub fn run(state: &SceneState, params: OpParams) -> Result<OpOutcome, OpError> {
    apply(state, &EditOp::new(params, 7), catalog())
}

pub fn step(state: &SceneState, params: OpParams) -> SceneState {
    run(state, params.clone()).unwrap_or_else(|e| panic!("{params:?}: {e}")).new_state
}

/// 1,000 default chains shared by the statistics and soundness tests.
pub fn corpus() -> &'static [ChainRecord] {
    static C: OnceLock<Vec<ChainRecord>> = OnceLock::new();
    C.get_or_init(|| {
        (0..1000u64)
            .map(|seed| {
                let init = scene(seed);
                let cfg = ComposerConfig { seed, ..Default::default() };
                compose_chain(&init, &cfg, catalog(), lib()).expect("chain composes")
            })
            .collect()
    })
}
