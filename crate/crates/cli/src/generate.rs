//! Corpus generation and frame rendering.

use std::collections::BTreeSet;
use std::path::Path;

use editforge_core::catalog::AssetCatalog;
use editforge_core::chain::{compose_chain, ChainRecord, ComposerConfig};
use editforge_core::render::{digest, render, FrameRef, FrameSidecar, RenderConfig};
use editforge_core::rng::SeedStream;
use editforge_core::scene::init_scene;
use editforge_core::text::TemplateLibrary;
use rayon::prelude::*;

use crate::config::Config;
use crate::manifest::{DependencyMode, Header, Manifest, Split};
use crate::CliError;

/// Scenes or chains that fail to come together are retried under a derived
/// seed this many times.
pub const MAX_ATTEMPTS: u64 = 64;

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub count: usize,
    pub seed: u64,
    pub mode: DependencyMode,
    pub split: Split,
    /// Overrides the catalog's default held-out labels.
    pub holdout: Option<Vec<String>>,
}

/// Template library that knows every builtin label, so text about held-out
/// objects still parses.
pub fn template_library(catalog: &AssetCatalog) -> TemplateLibrary {
    TemplateLibrary::builtin().with_labels(catalog.labels())
}

fn involves(record: &ChainRecord, labels: &BTreeSet<&str>) -> bool {
    record.init_state.objects.values().any(|o| labels.contains(o.label.as_str()))
        || record.ops.iter().any(|op| {
            use editforge_core::ops::OpParams::*;
            match &op.params {
                Add { label, .. } => labels.contains(label.as_str()),
                Replace { new_label, .. } => labels.contains(new_label.as_str()),
                _ => false,
            }
        })
}

/// Seed of chain `index`'s `attempt`-th try.
pub fn chain_seed(seed: u64, index: usize, attempt: u64) -> u64 {
    let base = SeedStream(seed).child("chain", index as u64);
    if attempt == 0 {
        base.key()
    } else {
        base.child("retry", attempt).key()
    }
}

/// The records of a manifest, composed in parallel but ordered by index.
pub fn generate(cfg: &Config, opts: &GenerateOptions, catalog: &AssetCatalog) -> Result<Manifest, CliError> {
    cfg.validate()?;
    let holdout = match &opts.holdout {
        Some(h) => {
            if let Some(unknown) = h.iter().find(|l| catalog.get(l).is_none()) {
                return Err(CliError::Config(format!("unknown holdout label {unknown:?}")));
            }
            h.clone()
        }
        None => catalog.holdout_labels(cfg.holdout_fraction),
    };
    let held: BTreeSet<&str> = holdout.iter().map(String::as_str).collect();
    let usable = match opts.split {
        Split::Train => catalog.filtered(|e| !held.contains(e.label.as_str())),
        Split::All | Split::Benchmark => catalog.clone(),
    };
    if opts.split == Split::Benchmark && held.is_empty() {
        return Err(CliError::Config("benchmark split needs at least one held-out label".into()));
    }
    let lib = template_library(catalog);
    let mut composer = cfg.composer.clone();
    match opts.mode {
        DependencyMode::Mixed => {}
        DependencyMode::Dependent => {
            composer.enable_dependencies = true;
            composer.require_dependency = true;
        }
        DependencyMode::Independent => composer.enable_dependencies = false,
    }

    let one = |index: usize| -> Result<ChainRecord, CliError> {
        for attempt in 0..MAX_ATTEMPTS {
            let seed = chain_seed(opts.seed, index, attempt);
            let Ok(init) = init_scene(&cfg.scene, &usable, SeedStream(seed)) else { continue };
            let Ok(record) = compose_chain(&init, &ComposerConfig { seed, ..composer.clone() }, &usable, &lib) else { continue };
            if opts.split == Split::Benchmark && !involves(&record, &held) {
                continue;
            }
            return Ok(record);
        }
        Err(CliError::Config(format!("chain {index}: no valid chain in {MAX_ATTEMPTS} attempts")))
    };
    let records: Vec<ChainRecord> = (0..opts.count).into_par_iter().map(one).collect::<Result<_, _>>()?;
    let mut ids = BTreeSet::new();
    if let Some(dup) = records.iter().find(|r| !ids.insert(r.id.as_str())) {
        return Err(CliError::Config(format!("seed collision on chain id {}", dup.id)));
    }
    Ok(Manifest { header: Header::new(cfg, opts.seed, opts.count, opts.split, opts.mode, holdout), records })
}

/// Renders I_0..I_L of every record under `out/frames/<chain>/`, writing a
/// JSON sidecar next to each PNG and filling in the records' frame refs.
pub fn render_frames(out: &Path, records: &mut [ChainRecord], render_cfg: &RenderConfig, catalog: &AssetCatalog) -> Result<(), CliError> {
    render_cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    records.par_iter_mut().try_for_each(|record| {
        let states = record.replay(catalog).map_err(|e| CliError::Data(format!("chain {}: {e}", record.id)))?;
        let rel = Path::new("frames").join(&record.id);
        let dir = out.join(&rel);
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        record.frames = Vec::with_capacity(states.len());
        for (step, state) in states.iter().enumerate() {
            let png = render(state, render_cfg).to_png();
            let sum = digest(&png);
            let name = format!("{step:02}");
            let path = dir.join(format!("{name}.png"));
            std::fs::write(&path, &png).map_err(|e| CliError::io(&path, e))?;
            let sidecar = FrameSidecar { digest: sum.clone(), resolution: render_cfg.resolution, chain_id: record.id.clone(), step_index: step };
            let side = dir.join(format!("{name}.json"));
            std::fs::write(&side, serde_json::to_vec_pretty(&sidecar).expect("sidecar serializes")).map_err(|e| CliError::io(&side, e))?;
            let path = rel.join(format!("{name}.png")).to_string_lossy().replace('\\', "/");
            record.frames.push(FrameRef { chain_id: record.id.clone(), step_index: step, path, digest: sum });
        }
        Ok(())
    })
}
