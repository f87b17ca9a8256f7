#![allow(dead_code)]

use std::sync::OnceLock;

use editforge_core::catalog::AssetCatalog;
use editforge_core::chain::{compose_chain, ChainRecord, ComposerConfig};
use editforge_core::rng::SeedStream;
use editforge_core::scene::{init_scene, SceneConfig, SceneState};
use editforge_core::text::TemplateLibrary;

pub fn catalog() -> &'static AssetCatalog {
    static C: OnceLock<AssetCatalog> = OnceLock::new();
    C.get_or_init(AssetCatalog::builtin)
}

pub fn lib() -> &'static TemplateLibrary {
    static L: OnceLock<TemplateLibrary> = OnceLock::new();
    L.get_or_init(|| TemplateLibrary::builtin().with_labels(catalog().labels()))
}

pub fn scene(seed: u64) -> SceneState {
    (0..16)
        .find_map(|k| init_scene(&SceneConfig::default(), catalog(), SeedStream(seed * 1000 + k)).ok())
        .expect("some seed initializes")
}

pub fn chain(seed: u64) -> ChainRecord {
    compose_chain(&scene(seed), &ComposerConfig { seed, ..Default::default() }, catalog(), lib()).expect("chain composes")
}

pub fn chains(n: u64) -> Vec<ChainRecord> {
    (0..n).map(chain).collect()
}
