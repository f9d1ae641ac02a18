//! `synthforge` subcommands. Each returns a [`CommandOutcome`]; `main` prints
//! it and exits with its code.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use clap::{Args, Parser, Subcommand};
use synthforge_core::dataset::{
    compute_instance_size_stats, read_detections, read_ground_truth, DatasetError, ANNOTATION_FILE,
};
use synthforge_core::metrics::{evaluate, CategoryMode};
use synthforge_core::objective::{
    toy_train, write_trace_csv, GrayPatches, ObjectiveError, StripedPatches, TrainConfig,
};
use synthforge_core::pipeline::{generate, GenerateConfig, GenerateOptions, PipelineError, ASSET_DIR_ENV};
use synthforge_core::BoxXywh;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "synthforge", version, about = "Synthetic aerial aircraft imagery toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample, render and annotate scenes into a COCO dataset.
    Generate(GenerateArgs),
    /// Instance-size histogram of an annotation file.
    Stats(StatsArgs),
    /// Bind an annotation file to a directory of translated images.
    Inherit(InheritArgs),
    /// Train the toy translation objective and write its loss trace.
    GanDemo(GanDemoArgs),
    /// COCO-style evaluation of detections against ground truth.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub count: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// 0 = all logical CPUs.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// COCO annotation file.
    #[arg(long)]
    pub gt: PathBuf,
    /// CSV output; defaults to `size_stats.csv` beside the annotation file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InheritArgs {
    /// Annotation file of the source (synthetic) dataset.
    #[arg(long)]
    pub gt: PathBuf,
    /// Directory holding the translated images.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GanDemoArgs {
    #[arg(long, default_value_t = 2000)]
    pub steps: u64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value = "gan_trace.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub dets: PathBuf,
    /// Report CSV; defaults to `eval_report.csv` beside the detections.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Pool all categories.
    #[arg(long)]
    pub agnostic: bool,
}

/// Result of one subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutcome {
    pub code: i32,
    pub summary: String,
    pub errors: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

impl CommandOutcome {
    fn ok(summary: String, artifacts: Vec<PathBuf>) -> Self {
        Self {
            code: EXIT_OK,
            summary,
            errors: Vec::new(),
            artifacts,
        }
    }

    fn fail(code: i32, errors: Vec<String>) -> Self {
        Self {
            code,
            summary: String::new(),
            errors,
            artifacts: Vec::new(),
        }
    }
}

fn dataset_code(e: &DatasetError) -> i32 {
    match e {
        DatasetError::Io { .. } | DatasetError::Encode { .. } => EXIT_RUNTIME,
        _ => EXIT_VALIDATION,
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CommandOutcome> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CommandOutcome::fail(EXIT_RUNTIME, vec![format!("{}: {e}", dir.display())]))?;
    }
    fs::write(path, text).map_err(|e| CommandOutcome::fail(EXIT_RUNTIME, vec![format!("{}: {e}", path.display())]))
}

pub fn run(cli: Cli) -> CommandOutcome {
    match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Stats(a) => cmd_stats(&a),
        Command::Inherit(a) => cmd_inherit(&a),
        Command::GanDemo(a) => cmd_gan_demo(&a),
        Command::Eval(a) => cmd_eval(&a),
    }
}

fn pipeline_failure(e: PipelineError) -> CommandOutcome {
    let code = if e.is_validation() {
        EXIT_VALIDATION
    } else {
        EXIT_RUNTIME
    };
    let mut errors = match &e {
        PipelineError::Invalid(v) => v.iter().map(|v| format!("invalid config: {v}")).collect(),
        _ => vec![e.to_string()],
    };
    if let Some(i) = e.scene_index() {
        errors.push(format!("generation aborted at scene {i}"));
    }
    CommandOutcome::fail(code, errors)
}

pub fn cmd_generate(a: &GenerateArgs) -> CommandOutcome {
    let config = match GenerateConfig::load(&a.config) {
        Ok(c) => c,
        Err(e @ PipelineError::Io { .. }) => return CommandOutcome::fail(EXIT_RUNTIME, vec![e.to_string()]),
        Err(e) => return pipeline_failure(e),
    };
    if let Err(e) = config.validate() {
        return pipeline_failure(e);
    }
    let config_dir = a.config.parent().unwrap_or(Path::new("."));
    let env_root = std::env::var_os(ASSET_DIR_ENV).map(PathBuf::from);
    let root = config.asset_root(config_dir, env_root.as_deref());
    let assets = match config.load_assets(&root) {
        Ok(s) => s,
        Err(e) => return pipeline_failure(e),
    };
    let opts = GenerateOptions {
        seed: a.seed,
        count: a.count,
        out_dir: a.out.clone(),
        workers: a.workers,
    };
    let done = AtomicU64::new(0);
    let step = (a.count / 10).max(1);
    let progress = |_index: u64| {
        let n = done.fetch_add(1, Ordering::Relaxed) + 1;
        if n.is_multiple_of(step) || n == a.count {
            eprintln!("generated {n}/{}", a.count);
        }
    };
    match generate(&config, &assets, &opts, &progress) {
        Ok(m) => {
            let mut artifacts = vec![m.annotation_path.clone()];
            artifacts.extend(m.images.iter().map(|i| a.out.join(&i.file_name)));
            CommandOutcome::ok(
                format!(
                    "wrote {} images, {} annotations to {} (config {})",
                    m.images.len(),
                    m.annotation_count,
                    a.out.display(),
                    &m.config_hash[..12]
                ),
                artifacts,
            )
        }
        Err(e) => pipeline_failure(e),
    }
}

pub fn cmd_stats(a: &StatsArgs) -> CommandOutcome {
    let gt = match read_ground_truth(&a.gt) {
        Ok(g) => g,
        Err(e) => return CommandOutcome::fail(dataset_code(&e), vec![e.to_string()]),
    };
    let boxes: Vec<BoxXywh> = gt.annotations.iter().map(|x| BoxXywh::from_array(x.bbox)).collect();
    let stats = match compute_instance_size_stats(&boxes) {
        Ok(s) => s,
        Err(e) => return CommandOutcome::fail(EXIT_VALIDATION, vec![format!("{}: {e}", a.gt.display())]),
    };
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| a.gt.parent().unwrap_or(Path::new(".")).join("size_stats.csv"));
    if let Err(o) = write_file(&out, &stats.to_csv()) {
        return o;
    }
    CommandOutcome::ok(
        format!(
            "instances {}  min {}  max {}  mean {}  nonzero bins {}/{}",
            stats.count,
            stats.min,
            stats.max,
            stats.mean,
            stats.nonzero_bins(),
            stats.counts.len()
        ),
        vec![out],
    )
}

pub fn cmd_inherit(a: &InheritArgs) -> CommandOutcome {
    let gt = match read_ground_truth(&a.gt) {
        Ok(g) => g,
        Err(e) => return CommandOutcome::fail(dataset_code(&e), vec![e.to_string()]),
    };
    if gt.images.is_empty() || gt.annotations.is_empty() {
        return CommandOutcome::fail(
            EXIT_VALIDATION,
            vec![format!("{}: no images or annotations", a.gt.display())],
        );
    }
    let missing: Vec<String> = gt
        .images
        .iter()
        .filter(|i| !a.out.join(&i.file_name).is_file())
        .map(|i| format!("missing translated image: {}", i.file_name))
        .collect();
    if !missing.is_empty() {
        return CommandOutcome::fail(EXIT_VALIDATION, missing);
    }
    let text = match fs::read_to_string(&a.gt) {
        Ok(t) => t,
        Err(e) => return CommandOutcome::fail(EXIT_RUNTIME, vec![format!("{}: {e}", a.gt.display())]),
    };
    let target = a.out.join(ANNOTATION_FILE);
    let same = fs::canonicalize(&target).ok() == fs::canonicalize(&a.gt).ok();
    if !same {
        if let Err(o) = write_file(&target, &text) {
            return o;
        }
    }
    CommandOutcome::ok(
        format!(
            "{} annotations over {} images inherited by {}",
            gt.annotations.len(),
            gt.images.len(),
            a.out.display()
        ),
        vec![target],
    )
}

pub fn cmd_gan_demo(a: &GanDemoArgs) -> CommandOutcome {
    let cfg = TrainConfig {
        total_steps: a.steps,
        decay_start: TrainConfig::default().decay_start.min(a.steps),
        seed: a.seed,
        ..TrainConfig::default()
    };
    let out = match toy_train(&cfg, &GrayPatches, &StripedPatches) {
        Ok(o) => o,
        Err(e @ ObjectiveError::Divergence { .. }) => return CommandOutcome::fail(EXIT_RUNTIME, vec![e.to_string()]),
        Err(e) => return CommandOutcome::fail(EXIT_VALIDATION, vec![e.to_string()]),
    };
    let mut csv = Vec::new();
    write_trace_csv(&out.trace, &mut csv).expect("writing to memory");
    if let Err(o) = write_file(&a.out, &String::from_utf8(csv).expect("ascii csv")) {
        return o;
    }
    let summary = match out.cycle_ratio(100) {
        Some(r) => format!(
            "{} steps; cycle-loss ratio (last 100 / first 100): {r:.4}",
            out.trace.len()
        ),
        None => "0 steps; empty trace".to_string(),
    };
    CommandOutcome::ok(summary, vec![a.out.clone()])
}

pub fn cmd_eval(a: &EvalArgs) -> CommandOutcome {
    let gt = match read_ground_truth(&a.gt) {
        Ok(g) => g,
        Err(e) => return CommandOutcome::fail(dataset_code(&e), vec![e.to_string()]),
    };
    let dets = match read_detections(&a.dets) {
        Ok(d) => d,
        Err(e) => return CommandOutcome::fail(dataset_code(&e), vec![e.to_string()]),
    };
    let mode = if a.agnostic {
        CategoryMode::Agnostic
    } else {
        CategoryMode::PerCategory
    };
    let report = match evaluate(&gt, &dets, mode) {
        Ok(r) => r,
        Err(e) => return CommandOutcome::fail(EXIT_VALIDATION, vec![format!("{}: {e}", a.dets.display())]),
    };
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| a.dets.parent().unwrap_or(Path::new(".")).join("eval_report.csv"));
    if let Err(o) = write_file(&out, &report.to_csv()) {
        return o;
    }
    let mut summary = format!("mAP {:.3}  AP@0.75 {:.3}\n", report.map, report.ap75);
    summary.push_str(report.to_text().trim_end());
    CommandOutcome::ok(summary, vec![out])
}
