//! Batch evaluation of predictions against a reference manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use editforge_core::catalog::AssetCatalog;
use editforge_core::chain::ChainRecord;
use editforge_core::render::Image;
use editforge_core::scene::SceneState;
use editforge_core::text::TemplateLibrary;
use editforge_eval::{score_instructions, score_state, similarity_metrics, EvalReport, JudgeClient, JudgeConfig, JudgeTask};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::manifest::{base_dir, read_frame, Header, Manifest};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Symbolic,
    Metrics,
    Judge,
}

/// One model output. Instruction texts are replayed when present, otherwise
/// the final state is compared directly. `final_image` is a PNG path,
/// relative to the prediction file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub chain_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposed_instructions: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_state: Option<SceneState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_image: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub chain_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: Mode,
    pub k: Option<usize>,
    pub chains: usize,
    pub evaluated: usize,
    /// Evaluated share of reference chains.
    pub coverage: f64,
    /// Reference chains with no prediction at all.
    pub missing: Vec<String>,
    /// Predictions lacking what the mode needs, or whose scoring failed.
    pub skipped: Vec<Skipped>,
    pub mean_sym_score: Option<f64>,
    pub mean_i_sim: Option<f64>,
    pub mean_d_sim: Option<f64>,
    pub mean_judge_score: Option<f64>,
}

impl Summary {
    pub fn complete(&self) -> bool {
        self.missing.is_empty() && self.skipped.is_empty()
    }
}

/// Predictions keyed by chain id, each with the directory its paths are
/// relative to. Accepts a directory of JSON files, a JSONL file of
/// predictions, or a manifest (whose records then act as perfect
/// predictions: reference instructions and final frames).
pub fn load_predictions(path: &Path, catalog: &AssetCatalog) -> Result<BTreeMap<String, (Prediction, PathBuf)>, CliError> {
    let mut out = BTreeMap::new();
    let mut add = |p: Prediction, base: PathBuf| -> Result<(), CliError> {
        let id = p.chain_id.clone();
        if out.insert(id.clone(), (p, base)).is_some() {
            return Err(CliError::Data(format!("{}: duplicate prediction for {id}", path.display())));
        }
        Ok(())
    };
    if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| CliError::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        for f in files {
            let text = std::fs::read_to_string(&f).map_err(|e| CliError::io(&f, e))?;
            let p = serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", f.display())))?;
            add(p, path.to_path_buf())?;
        }
        return Ok(out);
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let base = base_dir(path);
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if serde_json::from_str::<Header>(first).is_ok() {
        for r in Manifest::load(path)?.records {
            let final_state = r.replay(catalog).ok().and_then(|s| s.into_iter().last());
            let final_image = r.frames.last().map(|f| f.path.clone());
            add(Prediction { chain_id: r.id.clone(), decomposed_instructions: Some(r.step_instructions), final_state, final_image }, base.clone())?;
        }
        return Ok(out);
    }
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let p = serde_json::from_str(line).map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), n + 1)))?;
        add(p, base.clone())?;
    }
    Ok(out)
}

pub struct EvalContext<'a> {
    pub catalog: &'a AssetCatalog,
    pub lib: &'a TemplateLibrary,
    /// Directory the reference manifest's frame paths are relative to.
    pub ref_base: PathBuf,
    pub judge: Option<JudgeConfig>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn load_image(base: &Path, rel: &str) -> Result<(Vec<u8>, Image), String> {
    let path = base.join(rel);
    let bytes = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let img = Image::from_png(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((bytes, img))
}

fn symbolic(cx: &EvalContext, r: &ChainRecord, p: &Prediction, k: Option<usize>) -> Result<EvalReport, String> {
    let score = if let Some(texts) = &p.decomposed_instructions {
        let mut s = score_instructions(r, texts, cx.catalog, cx.lib).map_err(|e| e.to_string())?;
        if let Some(k) = k.filter(|k| *k != texts.len()) {
            s.failed_steps.insert(0, format!("expected {k} instructions, got {}", texts.len()));
        }
        s
    } else if let Some(state) = &p.final_state {
        score_state(r, state, cx.catalog).map_err(|e| e.to_string())?
    } else {
        return Err("prediction has neither instructions nor a final state".into());
    };
    Ok(EvalReport::new(r.id.clone(), score))
}

/// Source and target frames of a reference chain, digest-checked.
fn reference_frames(cx: &EvalContext, r: &ChainRecord) -> Result<(Vec<u8>, Vec<u8>), CliError> {
    match (r.frames.first(), r.frames.last()) {
        (Some(a), Some(b)) if r.frames.len() == r.len() + 1 => Ok((read_frame(&cx.ref_base, a)?, read_frame(&cx.ref_base, b)?)),
        _ => Err(CliError::Data(format!("reference chain {} has no rendered frames", r.id))),
    }
}

/// Scores every reference chain that has a usable prediction. Reference
/// frames whose digest does not match the manifest abort the run.
pub fn evaluate(
    cx: &EvalContext,
    reference: &[ChainRecord],
    preds: &BTreeMap<String, (Prediction, PathBuf)>,
    mode: Mode,
    k: Option<usize>,
) -> Result<(Vec<EvalReport>, Summary), CliError> {
    let mut missing = Vec::new();
    let mut todo = Vec::new();
    for r in reference {
        match preds.get(&r.id) {
            Some((p, base)) => todo.push((r, p, base)),
            None => missing.push(r.id.clone()),
        }
    }
    let judge = match mode {
        Mode::Judge => Some(JudgeClient::new(
            cx.judge.clone().ok_or_else(|| CliError::Config("judge mode needs an endpoint (FORGE_JUDGE_URL)".into()))?,
        )),
        _ => None,
    };

    let mut results: Vec<Result<EvalReport, Skipped>> = match mode {
        Mode::Symbolic => todo.par_iter().map(|(r, p, _)| symbolic(cx, r, p, k).map_err(|reason| Skipped { chain_id: r.id.clone(), reason })).collect(),
        Mode::Metrics => {
            let frames: Vec<_> = todo.iter().map(|(r, _, _)| reference_frames(cx, r)).collect::<Result<_, _>>()?;
            todo.par_iter()
                .zip(frames)
                .map(|((r, p, base), (src, tgt))| {
                    let skip = |reason: String| Skipped { chain_id: r.id.clone(), reason };
                    let rel = p.final_image.as_deref().ok_or_else(|| skip("prediction has no final image".into()))?;
                    let (_, gen) = load_image(base, rel).map_err(skip)?;
                    let src = Image::from_png(&src).map_err(|e| skip(e.to_string()))?;
                    let tgt = Image::from_png(&tgt).map_err(|e| skip(e.to_string()))?;
                    let sim = similarity_metrics(&src, &tgt, &gen).map_err(|e| skip(e.to_string()))?;
                    Ok(EvalReport::unscored(r.id.clone()).with_similarity(sim))
                })
                .collect()
        }
        Mode::Judge => {
            let mut prepared = Vec::new();
            for (r, p, base) in &todo {
                let (src, _) = reference_frames(cx, r)?;
                let image = p.final_image.as_deref().ok_or_else(|| "prediction has no final image".to_string()).and_then(|rel| load_image(base, rel));
                prepared.push((r, src, image));
            }
            let tasks: Vec<JudgeTask> = prepared
                .iter()
                .filter_map(|(r, src, img)| {
                    img.as_ref().ok().map(|(png, _)| JudgeTask { source_png: src.clone(), instruction: r.composite_instruction.clone(), generated_png: png.clone() })
                })
                .collect();
            let mut scores = judge.as_ref().expect("judge mode").judge_batch(&tasks).into_iter();
            prepared
                .into_iter()
                .map(|(r, _, img)| match img {
                    Err(reason) => Err(Skipped { chain_id: r.id.clone(), reason }),
                    Ok(_) => {
                        let mut report = EvalReport::unscored(r.id.clone());
                        match scores.next().expect("one score per task") {
                            Ok(s) => report.judge_score = Some(s),
                            Err(e) => report.judge_error = Some(e.to_string()),
                        }
                        Ok(report)
                    }
                })
                .collect()
        }
    };

    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    for r in results.drain(..) {
        match r {
            Ok(rep) => match &rep.judge_error {
                Some(e) => {
                    skipped.push(Skipped { chain_id: rep.chain_id.clone(), reason: e.clone() });
                    reports.push(rep);
                }
                None => reports.push(rep),
            },
            Err(s) => skipped.push(s),
        }
    }
    let evaluated = reports.iter().filter(|r| r.judge_error.is_none()).count();
    let summary = Summary {
        mode,
        k,
        chains: reference.len(),
        evaluated,
        coverage: if reference.is_empty() { 1.0 } else { evaluated as f64 / reference.len() as f64 },
        missing,
        skipped,
        mean_sym_score: mean(reports.iter().filter_map(|r| r.sym_score)),
        mean_i_sim: mean(reports.iter().filter_map(|r| r.i_sim)),
        mean_d_sim: mean(reports.iter().filter_map(|r| r.d_sim)),
        mean_judge_score: mean(reports.iter().filter_map(|r| r.judge_score)),
    };
    Ok((reports, summary))
}
