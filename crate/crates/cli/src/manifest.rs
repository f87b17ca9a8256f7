//! JSONL manifests: a header line, then one chain record per line.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use editforge_core::chain::ChainRecord;
use editforge_core::render::{digest, FrameRef};
use editforge_core::rng::RNG_VERSION;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const GENERATOR_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    /// Every catalog label.
    All,
    /// Held-out labels never appear.
    Train,
    /// Every chain involves at least one held-out label.
    Benchmark,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DependencyMode {
    Mixed,
    /// Every chain carries at least one reference to an earlier edit.
    Dependent,
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema_version: u32,
    pub generator_version: String,
    pub rng_version: u32,
    pub seed: u64,
    pub count: usize,
    pub split: Split,
    pub dependency_mode: DependencyMode,
    pub holdout_labels: Vec<String>,
    pub config: Config,
}

impl Header {
    pub fn new(cfg: &Config, seed: u64, count: usize, split: Split, mode: DependencyMode, holdout: Vec<String>) -> Header {
        Header {
            schema_version: SCHEMA_VERSION,
            generator_version: GENERATOR_VERSION.to_string(),
            rng_version: RNG_VERSION,
            seed,
            count,
            split,
            dependency_mode: mode,
            holdout_labels: holdout,
            config: cfg.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: Header,
    pub records: Vec<ChainRecord>,
}

impl Manifest {
    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut line = |v: String| writeln!(out, "{v}").map_err(|e| CliError::io(path, e));
        line(serde_json::to_string(&self.header).expect("header serializes"))?;
        for r in &self.records {
            line(serde_json::to_string(r).expect("record serializes"))?;
        }
        out.flush().map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Manifest, CliError> {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        let mut lines = BufReader::new(file).lines().enumerate().filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));
        let bad = |n: usize, e: serde_json::Error| CliError::Data(format!("{}:{}: {e}", path.display(), n + 1));
        let (n, first) = lines.next().ok_or_else(|| CliError::Data(format!("{}: empty manifest", path.display())))?;
        let header: Header = serde_json::from_str(&first.map_err(|e| CliError::io(path, e))?).map_err(|e| bad(n, e))?;
        if header.schema_version != SCHEMA_VERSION {
            return Err(CliError::Data(format!("{}: schema version {} unsupported", path.display(), header.schema_version)));
        }
        let mut records = Vec::new();
        let mut ids = BTreeSet::new();
        for (n, l) in lines {
            let r: ChainRecord = serde_json::from_str(&l.map_err(|e| CliError::io(path, e))?).map_err(|e| bad(n, e))?;
            if !ids.insert(r.id.clone()) {
                return Err(CliError::Data(format!("{}: duplicate chain id {}", path.display(), r.id)));
            }
            records.push(r);
        }
        Ok(Manifest { header, records })
    }
}

/// Directory frame paths are relative to.
pub fn base_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Reads a frame and checks it against the digest recorded for it.
pub fn read_frame(base: &Path, frame: &FrameRef) -> Result<Vec<u8>, CliError> {
    let path = base.join(&frame.path);
    let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
    let got = digest(&bytes);
    if got != frame.digest {
        return Err(CliError::Data(format!("{}: digest {got} does not match manifest {}", path.display(), frame.digest)));
    }
    Ok(bytes)
}

/// Checks every frame of every record.
pub fn verify_frames(base: &Path, records: &[ChainRecord]) -> Result<usize, CliError> {
    let mut n = 0;
    for r in records {
        for f in &r.frames {
            read_frame(base, f)?;
            n += 1;
        }
    }
    Ok(n)
}
