use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use editforge_core::catalog::AssetCatalog;
use editforge_core::render::{Image, RenderConfig};
use editforge_core::text::{TemplateLibrary, BUILTIN_TEMPLATES};
use editforge_eval::{write_summary_csv, JudgeConfig};
use editforge_guidance::{run_demo, DemoReport, GuidanceSpec, Paradigm};

use crate::config::Config;
use crate::evaluate::{evaluate, load_predictions, EvalContext, Mode};
use crate::generate::{generate, render_frames, template_library, GenerateOptions};
use crate::manifest::{base_dir, DependencyMode, Manifest, Split};
use crate::{stats, CliError};

pub const MANIFEST_NAME: &str = "manifest.jsonl";

#[derive(Debug, Parser)]
#[command(name = "editforge", version, about = "Synthetic multi-step image-editing corpora and evaluation")]
pub struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// JSON generator config; omitted fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compose chains, render their frames and write a manifest.
    Generate(GenerateArgs),
    /// (Re-)render the frames of an existing manifest.
    Render(RenderArgs),
    /// Corpus statistics of a manifest.
    Stats(StatsArgs),
    /// Score predictions against a reference manifest.
    Evaluate(EvaluateArgs),
    /// Sample the Gaussian guidance demo for one paradigm.
    Guidance(GuidanceArgs),
    /// Show, export or validate instruction templates.
    Templates(TemplatesArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    /// Every chain references at least one earlier edit.
    #[arg(long, conflicts_with = "independent")]
    pub dependent: bool,
    /// No inter-step references.
    #[arg(long)]
    pub independent: bool,
    #[arg(long, value_enum, default_value_t = Split::All)]
    pub split: Split,
    /// Comma-separated held-out labels (default: every fifth catalog entry).
    #[arg(long, value_delimiter = ',')]
    pub holdout_labels: Option<Vec<String>>,
    /// Write the manifest only.
    #[arg(long)]
    pub no_render: bool,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    pub manifest: PathBuf,
    #[arg(long)]
    pub resolution: Option<u32>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub manifest: PathBuf,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Directory of prediction JSON files, a prediction JSONL file, or a manifest.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Symbolic)]
    pub mode: Mode,
    /// Number of instructions each prediction is expected to carry.
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Custom template file used to parse predicted instructions.
    #[arg(long)]
    pub templates: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ParadigmArg {
    SingleTurn,
    Default,
    Separate,
    #[value(alias = "fcse")]
    FullContext,
    #[value(alias = "cgse")]
    ContextGuided,
}

impl From<ParadigmArg> for Paradigm {
    fn from(p: ParadigmArg) -> Paradigm {
        match p {
            ParadigmArg::SingleTurn => Paradigm::SingleTurn,
            ParadigmArg::Default => Paradigm::Default,
            ParadigmArg::Separate => Paradigm::Separate,
            ParadigmArg::FullContext => Paradigm::FullContext,
            ParadigmArg::ContextGuided => Paradigm::ContextGuided,
        }
    }
}

#[derive(Debug, Args)]
pub struct GuidanceArgs {
    #[arg(long, value_enum, default_value_t = ParadigmArg::ContextGuided)]
    pub paradigm: ParadigmArg,
    #[arg(long)]
    pub gamma_img: Option<f64>,
    #[arg(long)]
    pub gamma_text: Option<f64>,
    #[arg(long)]
    pub gamma_ctx: Option<f64>,
    /// Sequential step the guidance is built for.
    #[arg(long = "K", default_value_t = 3)]
    pub k: usize,
    /// Context window `m,n` for the context term (default: previous result).
    #[arg(long, value_parser = parse_window)]
    pub window: Option<(usize, usize)>,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Write the JSON report here as well as to stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Scatter plot PNG of the terminal samples.
    #[arg(long)]
    pub scatter: Option<PathBuf>,
}

fn parse_window(text: &str) -> Result<(usize, usize), String> {
    let (m, n) = text.split_once(',').ok_or("expected m,n")?;
    Ok((m.trim().parse().map_err(|e| format!("{e}"))?, n.trim().parse().map_err(|e| format!("{e}"))?))
}

#[derive(Debug, Args)]
pub struct TemplatesArgs {
    /// Write the builtin template file here.
    #[arg(long)]
    pub export: Option<PathBuf>,
    /// Validate a template file.
    #[arg(long)]
    pub check: Option<PathBuf>,
}

fn say(cli: &Cli, text: impl AsRef<str>) {
    use std::io::Write as _;
    if !cli.quiet {
        // A closed pipe (`| head`) is not an error worth reporting.
        let _ = writeln!(std::io::stdout(), "{}", text.as_ref());
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes")
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match cli.jobs {
        Some(0) => return Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(n) => {
            // Fails harmlessly if a pool already exists (repeated in-process runs).
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        None => {}
    }
    let catalog = AssetCatalog::builtin();
    match &cli.command {
        Command::Generate(a) => cmd_generate(cli, a, &catalog),
        Command::Render(a) => cmd_render(cli, a, &catalog),
        Command::Stats(a) => cmd_stats(cli, a),
        Command::Evaluate(a) => cmd_evaluate(cli, a, &catalog),
        Command::Guidance(a) => cmd_guidance(cli, a),
        Command::Templates(a) => cmd_templates(cli, a),
    }
}

fn cmd_generate(cli: &Cli, a: &GenerateArgs, catalog: &AssetCatalog) -> Result<(), CliError> {
    let cfg = Config::load(cli.config.as_deref())?;
    let mode = match (a.dependent, a.independent) {
        (true, _) => DependencyMode::Dependent,
        (_, true) => DependencyMode::Independent,
        _ => DependencyMode::Mixed,
    };
    let opts = GenerateOptions { count: a.count, seed: cli.seed, mode, split: a.split, holdout: a.holdout_labels.clone() };
    let mut manifest = generate(&cfg, &opts, catalog)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("editforge-out"));
    if !a.no_render {
        render_frames(&out, &mut manifest.records, &cfg.render, catalog)?;
    }
    let path = out.join(MANIFEST_NAME);
    manifest.save(&path)?;
    let frames: usize = manifest.records.iter().map(|r| r.frames.len()).sum();
    say(cli, format!("wrote {} chains and {frames} frames to {}", manifest.records.len(), path.display()));
    Ok(())
}

fn cmd_render(cli: &Cli, a: &RenderArgs, catalog: &AssetCatalog) -> Result<(), CliError> {
    let mut manifest = Manifest::load(&a.manifest)?;
    let mut render = if cli.config.is_some() { Config::load(cli.config.as_deref())?.render } else { manifest.header.config.render.clone() };
    if let Some(r) = a.resolution {
        render = RenderConfig { resolution: r, ..render };
    }
    let out = cli.out.clone().unwrap_or_else(|| base_dir(&a.manifest));
    render_frames(&out, &mut manifest.records, &render, catalog)?;
    manifest.header.config.render = render;
    let path = out.join(MANIFEST_NAME);
    manifest.save(&path)?;
    say(cli, format!("rendered {} chains into {}", manifest.records.len(), out.display()));
    Ok(())
}

fn cmd_stats(cli: &Cli, a: &StatsArgs) -> Result<(), CliError> {
    let manifest = Manifest::load(&a.manifest)?;
    let report = stats::compute(&manifest.records);
    if let Some(out) = &cli.out {
        write(&out.join("stats.json"), json(&report))?;
    }
    say(cli, if a.json { json(&report) } else { report.table() });
    Ok(())
}

fn cmd_evaluate(cli: &Cli, a: &EvaluateArgs, catalog: &AssetCatalog) -> Result<(), CliError> {
    let reference = Manifest::load(&a.reference)?;
    let lib = match &a.templates {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            TemplateLibrary::from_json(&text).map_err(|e| CliError::Config(e.to_string()))?.with_labels(catalog.labels())
        }
        None => template_library(catalog),
    };
    let preds = load_predictions(&a.pred, catalog)?;
    let cx = EvalContext { catalog, lib: &lib, ref_base: base_dir(&a.reference), judge: JudgeConfig::from_env() };
    let (reports, summary) = evaluate(&cx, &reference.records, &preds, a.mode, a.k)?;
    if let Some(out) = &cli.out {
        let lines: Vec<String> = reports.iter().map(|r| serde_json::to_string(r).expect("report serializes")).collect();
        write(&out.join("reports.jsonl"), lines.join("\n") + if lines.is_empty() { "" } else { "\n" })?;
        let mut csv = Vec::new();
        write_summary_csv(&mut csv, &reports).map_err(|e| CliError::Data(e.to_string()))?;
        write(&out.join("summary.csv"), csv)?;
        write(&out.join("summary.json"), json(&summary))?;
    }
    say(cli, json(&summary));
    if summary.complete() {
        Ok(())
    } else {
        Err(CliError::Incomplete(format!(
            "{} of {} chains evaluated ({} missing, {} skipped)",
            summary.evaluated,
            summary.chains,
            summary.missing.len(),
            summary.skipped.len()
        )))
    }
}

/// Terminal samples as grey dots, target means as black squares, the
/// predicted mean in red and the sampled mean in blue. The square view is
/// centred on the origin and fits the means and 99% of the samples.
pub fn scatter(report: &DemoReport, ends: &[Vec<f64>], size: u32) -> Image {
    let mut img = Image::new(size, size);
    img.pixels.fill(255);
    let mut reach: Vec<f64> = ends.iter().map(|e| e[0].abs().max(e[1].abs())).collect();
    reach.sort_by(f64::total_cmp);
    let mut half = reach.get(reach.len() * 99 / 100).copied().unwrap_or(0.0);
    for m in report.targets.iter().map(|(_, m)| m).chain([&report.expected_mean, &report.terminal_mean]) {
        half = half.max(m[0].abs()).max(m[1].abs());
    }
    let half = (half * 1.1).max(1.0);
    let to_px = |v: f64| ((v + half) / (2.0 * half) * size as f64).floor() as i64;
    let mut dot = |x: f64, y: f64, r: i64, rgb: [u8; 3]| {
        let (cx, cy) = (to_px(x), size as i64 - 1 - to_px(y));
        for py in cy - r..=cy + r {
            for px in cx - r..=cx + r {
                if (0..size as i64).contains(&px) && (0..size as i64).contains(&py) {
                    let i = ((py as u32 * size + px as u32) * 3) as usize;
                    img.pixels[i..i + 3].copy_from_slice(&rgb);
                }
            }
        }
    };
    for e in ends {
        dot(e[0], e[1], 0, [150, 150, 150]);
    }
    for (_, m) in &report.targets {
        dot(m[0], m[1], 3, [0, 0, 0]);
    }
    dot(report.expected_mean[0], report.expected_mean[1], 3, [220, 30, 30]);
    dot(report.terminal_mean[0], report.terminal_mean[1], 2, [30, 60, 220]);
    img
}

fn cmd_guidance(cli: &Cli, a: &GuidanceArgs) -> Result<(), CliError> {
    let d = GuidanceSpec::default();
    let spec = GuidanceSpec {
        paradigm: a.paradigm.into(),
        image_scale: a.gamma_img.unwrap_or(d.image_scale),
        text_scale: a.gamma_text.unwrap_or(d.text_scale),
        context_scale: a.gamma_ctx.unwrap_or(d.context_scale),
        context_window: a.window,
    };
    let (report, ends) = run_demo(&spec, a.k, a.steps, a.samples, cli.seed).map_err(|e| CliError::Config(e.to_string()))?;
    let text = json(&report);
    if let Some(p) = &a.report {
        write(p, &text)?;
    }
    if let Some(p) = &a.scatter {
        write(p, scatter(&report, &ends, 256).to_png())?;
    }
    say(cli, text);
    Ok(())
}

fn cmd_templates(cli: &Cli, a: &TemplatesArgs) -> Result<(), CliError> {
    if let Some(p) = &a.export {
        write(p, BUILTIN_TEMPLATES)?;
        say(cli, format!("wrote {}", p.display()));
    }
    let lib = match &a.check {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            let lib = TemplateLibrary::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            say(cli, format!("{}: {} templates, valid", p.display(), lib.templates.len()));
            return Ok(());
        }
        None => TemplateLibrary::builtin(),
    };
    if a.export.is_none() {
        for t in &lib.templates {
            say(cli, format!("{:<18} {:<16} {}", t.kind.to_string(), t.variant, t.text));
        }
    }
    Ok(())
}
