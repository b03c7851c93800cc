//! The `handforge` command line.
//!
//! Exit codes: 0 success, 2 configuration or usage, 3 I/O, 4 training, 5 inference.

mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{DataSelection, NetworkKind, Preset, RunConfig, StrategyCounts};

use crate::augment::{
    build_dataset, plan_frames, DatasetManifest, Hint, ManifestEntry, ManifestSource, RenderSetup, SimulatedCaptures,
    Strategy,
};
use crate::depth::{read_pgm, write_pgm, CameraIntrinsics, Pose};
use crate::eval::{axis_scores, digest, tag_frame, AxisReport, FrameTags, SplitSpec};
use crate::pipeline::{
    infer_two_stage, init_network, load_bundle, save_bundle, stage1_samples, train_stage2, ModelMetadata,
    TwoStageModel,
};
use crate::regressor::{train, write_trace};
use crate::synth::{generate_corpus, ParamStats, SkeletonTopology};
use crate::Error;

/// A failure with the process exit code it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub msg: String,
}

impl CliError {
    pub const CONFIG: i32 = 2;
    pub const IO: i32 = 3;
    pub const TRAINING: i32 = 4;
    pub const INFERENCE: i32 = 5;

    pub fn config(msg: impl Into<String>) -> Self {
        Self { code: Self::CONFIG, msg: msg.into() }
    }

    pub fn io(msg: impl Into<String>) -> Self {
        Self { code: Self::IO, msg: msg.into() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.msg)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } | Error::Format { .. } => Self::IO,
            Error::Training(_) => Self::TRAINING,
            Error::Inference(_) | Error::EmptyPatch(_) => Self::INFERENCE,
            Error::Domain(_) | Error::Shape(_) => Self::CONFIG,
        };
        Self { code, msg: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "handforge", version, about = "Synthetic depth hand data, two-stage pose regression and axis evaluation")]
struct Cli {
    /// Suppress the summaries of synth, train and eval.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a parameter corpus, training frames of every strategy and a test set.
    Synth(SynthArgs),
    /// Train a single- or two-stage model on a synthesized dataset.
    Train(TrainArgs),
    /// Score a model (or injected predictions) on the five evaluation axes.
    Eval(EvalArgs),
    /// Estimate the pose in one depth image.
    Infer(InferArgs),
    /// Summarize a dataset manifest or a model bundle.
    Inspect(InspectArgs),
    /// Print the fully resolved run configuration.
    Config(ConfigArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, conflicts_with = "config")]
    preset: Option<PresetArg>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum PresetArg {
    Desk,
    Full,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Dataset directory to create.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Defaults to the config stored with the dataset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dataset directory or manifest file.
    #[arg(long)]
    data: PathBuf,
    /// Model bundle directory to write.
    #[arg(long)]
    out: PathBuf,
    /// Initialize the second network from scratch instead of from the first.
    #[arg(long)]
    no_finetune: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, required_unless_present = "predictions")]
    model: Option<PathBuf>,
    /// JSON lines, one array of 63 camera-space coordinates (mm) per test frame.
    #[arg(long, conflicts_with = "model")]
    predictions: Option<PathBuf>,
    /// Dataset directory or manifest file.
    #[arg(long)]
    data: PathBuf,
    /// Source of the split spec; defaults to the config stored with the dataset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    split: String,
    /// Report directory to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("hint").required(true).args(["mcp", "bbox"])))]
struct InferArgs {
    #[arg(long)]
    model: PathBuf,
    /// 16-bit PGM depth image (mm).
    #[arg(long)]
    image: PathBuf,
    /// Middle-finger MCP estimate `x,y,z` in camera space (mm).
    #[arg(long, value_parser = parse_floats::<3>, allow_hyphen_values = true)]
    mcp: Option<[f64; 3]>,
    /// Hand box `u0,v0,u1,v1` in pixels.
    #[arg(long, value_parser = parse_floats::<4>, allow_hyphen_values = true)]
    bbox: Option<[f64; 4]>,
    /// Intrinsics `fx,fy,cx,cy`; defaults to the camera stored with the model.
    #[arg(long, value_parser = parse_floats::<4>)]
    camera: Option<[f64; 4]>,
    /// Directory for `pose.txt` and, with `--dump-stages`, the intermediates.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write `patch1.pgm`, `patch2.pgm` and `pose1.txt`.
    #[arg(long, requires = "out")]
    dump_stages: bool,
}

#[derive(Debug, Args)]
struct InspectArgs {
    /// Dataset directory, manifest file or model bundle directory.
    path: PathBuf,
}

fn parse_floats<const N: usize>(s: &str) -> std::result::Result<[f64; N], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

/// Entry point of the `handforge` binary.
pub fn main() -> i32 {
    run(std::env::args_os())
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { CliError::CONFIG } else { 0 };
        }
    };
    // poses, summaries of inspected artifacts and configs are the output itself
    let quiet = cli.quiet && !matches!(cli.command, Command::Infer(_) | Command::Inspect(_) | Command::Config(_));
    match configure_threads().and_then(|_| dispatch(cli)) {
        Ok(summary) => {
            if !quiet && !summary.is_empty() {
                print!("{summary}");
            }
            0
        }
        Err(e) => {
            eprintln!("handforge: {e}");
            e.code
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("HANDFORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::config(format!("HANDFORGE_THREADS: expected a positive integer, got {v:?}")))?;
    // a pool built earlier in the process keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs a command and returns the text it prints on success.
fn dispatch(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Infer(a) => cmd_infer(&a),
        Command::Inspect(a) => cmd_inspect(&a),
        Command::Config(a) => {
            let mut cfg = match (&a.config, a.preset) {
                (Some(p), _) => RunConfig::load(p)?,
                (None, Some(PresetArg::Full)) => RunConfig::preset(Preset::Full),
                (None, _) => RunConfig::default(),
            };
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            Ok(serde_json::to_string_pretty(&cfg).expect("config serializes") + "\n")
        }
    }
}

/// `dataset.json`: the resolved config a dataset was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetInfo {
    config_digest: String,
    counts: BTreeMap<String, usize>,
    config: RunConfig,
}

const MANIFEST: &str = "manifest.jsonl";
const DATASET_INFO: &str = "dataset.json";
const CORPUS: &str = "corpus.jsonl";

fn resolve_config(path: Option<&Path>, seed: Option<u64>, fallback: Option<RunConfig>) -> CliResult<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => fallback.unwrap_or_default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn cmd_synth(a: &SynthArgs) -> CliResult<String> {
    let cfg = resolve_config(a.config.as_deref(), a.seed, None)?;
    create_dir(&a.out)?;
    let topo = SkeletonTopology::hand();
    let split = cfg.split.clone();
    // held-out subjects are never drawn for training
    let subjects: Vec<u32> = (0..cfg.corpus.subjects).filter(|&s| !split.in_shape_region(Some(s))).collect();
    if subjects.is_empty() && cfg.corpus_size > 0 {
        return Err(CliError::config("split.held_out_shapes: every corpus subject is held out"));
    }
    let drawn = cfg.corpus_size.div_ceil(subjects.len().max(1)) * cfg.corpus.subjects as usize;
    let mut corpus = generate_corpus(drawn, &cfg.corpus, &topo, cfg.train_corpus_seed(), |p, _| {
        split.in_viewpoint_region(p) || split.in_articulation_region(p)
    })?;
    corpus.retain(|r| !split.in_shape_region(r.subject));
    corpus.truncate(cfg.corpus_size);
    let mut text = String::new();
    for r in &corpus {
        text.push_str(&serde_json::to_string(r).expect("corpus serializes"));
        text.push('\n');
    }
    write_file(&a.out.join(CORPUS), text.as_bytes())?;

    let setup = Arc::new(RenderSetup {
        topo: topo.clone(),
        camera: cfg.camera,
        width: cfg.width,
        height: cfg.height,
        scene: cfg.scene.clone(),
        hint: cfg.hint,
    });
    let corpus = Arc::new(corpus);
    let real = SimulatedCaptures { corpus: corpus.clone(), setup: setup.clone(), seed: cfg.capture_seed() };
    let stats = if cfg.counts.nd > 0 { Some(ParamStats::from_corpus(corpus.iter().map(|r| &r.params))?) } else { None };
    let mut manifest = DatasetManifest { root: a.out.clone(), entries: Vec::new() };
    let mut counts = BTreeMap::new();
    for s in Strategy::ALL {
        let n = cfg.counts.get(s);
        counts.insert(s.tag().to_string(), n);
        if n == 0 {
            continue;
        }
        let plans = plan_frames(s, &corpus, n, &cfg.noise, stats.as_ref(), cfg.plan_seed(s))?;
        manifest.entries.extend(build_dataset(&plans, &setup, Some(&real), &a.out, "train")?.entries);
    }
    if cfg.test_count > 0 {
        let test_corpus = generate_corpus(cfg.test_count, &cfg.corpus, &topo, cfg.test_corpus_seed(), |_, _| false)?;
        let plans = plan_frames(Strategy::RD, &test_corpus, cfg.test_count, &cfg.noise, None, cfg.test_plan_seed())?;
        manifest.entries.extend(build_dataset(&plans, &setup, None, &a.out, "test")?.entries);
    }
    counts.insert("test".to_string(), cfg.test_count);
    manifest.save(&a.out.join(MANIFEST))?;
    let info = DatasetInfo { config_digest: cfg.digest(), counts: counts.clone(), config: cfg };
    write_file(&a.out.join(DATASET_INFO), (serde_json::to_string_pretty(&info).expect("info serializes") + "\n").as_bytes())?;
    let list: Vec<String> = counts.iter().map(|(k, v)| format!("{k} {v}")).collect();
    Ok(format!("synth: {} -> {}\n", list.join(", "), a.out.display()))
}

/// Manifest and, when present, the dataset info stored next to it.
fn load_data(path: &Path) -> CliResult<(DatasetManifest, Option<DatasetInfo>)> {
    let (manifest_path, dir) = if path.is_dir() {
        (path.join(MANIFEST), path.to_path_buf())
    } else {
        (path.to_path_buf(), path.parent().map(Path::to_path_buf).unwrap_or_default())
    };
    let manifest = DatasetManifest::load(&manifest_path)?;
    let info_path = dir.join(DATASET_INFO);
    let info = if info_path.is_file() {
        let text = std::fs::read_to_string(&info_path).map_err(|e| CliError::io(format!("{}: {e}", info_path.display())))?;
        Some(serde_json::from_str(&text).map_err(|e| CliError::io(format!("{}: {e}", info_path.display())))?)
    } else {
        None
    };
    Ok((manifest, info))
}

fn subset(manifest: &DatasetManifest, split: &str, strategies: &[Strategy]) -> ManifestSource {
    let mut m = manifest.split(split);
    m.entries.retain(|e| strategies.contains(&e.strategy));
    ManifestSource { manifest: m }
}

fn cmd_train(a: &TrainArgs) -> CliResult<String> {
    let (manifest, info) = load_data(&a.data)?;
    let cfg = resolve_config(a.config.as_deref(), a.seed, info.map(|i| i.config))?;
    let mut model_cfg = cfg.seeded_model();
    model_cfg.fine_tune &= !a.no_finetune;
    let k = cfg.camera;
    let s1 = subset(&manifest, "train", &cfg.data.stage1);
    if s1.manifest.entries.is_empty() {
        return Err(CliError::config(format!("data.stage1: no training frames of {:?} in the manifest", cfg.data.stage1)));
    }
    s1.manifest.validate()?;
    create_dir(&a.out)?;
    let samples = stage1_samples(&s1, &model_cfg.recipe, &k)?;
    let (net1, t1) = train(init_network(&model_cfg, 1)?, &samples, &model_cfg.stage1)?;
    drop(samples);
    write_trace(&a.out.join("stage1_trace.csv"), &t1)?;
    let mut summary = format!("stage 1: {} frames, final loss {:.4}\n", s1.manifest.entries.len(), t1.last().map_or(f64::NAN, |t| t.mean_loss));
    let two_stage = cfg.network == NetworkKind::TwoStage;
    let net2 = if two_stage {
        let s2 = subset(&manifest, "train", &cfg.data.stage2);
        if s2.manifest.entries.is_empty() {
            return Err(CliError::config(format!("data.stage2: no training frames of {:?} in the manifest", cfg.data.stage2)));
        }
        s2.manifest.validate()?;
        let (net2, t2) = train_stage2(&net1, &s2, &model_cfg, &k)?;
        write_trace(&a.out.join("stage2_trace.csv"), &t2)?;
        let _ = writeln!(summary, "stage 2: {} frames, final loss {:.4}", s2.manifest.entries.len(), t2.last().map_or(f64::NAN, |t| t.mean_loss));
        Some(net2)
    } else {
        None
    };
    let model = TwoStageModel { net1, net2, recipe: model_cfg.recipe, refine: model_cfg.refine };
    let meta = ModelMetadata {
        format_version: 1,
        stages: if two_stage { 2 } else { 1 },
        fine_tuned: two_stage && model_cfg.fine_tune,
        recipe: model_cfg.recipe,
        refine: model_cfg.refine,
        wing: model_cfg.stage1.wing,
        layer_sizes: model.net1.sizes().to_vec(),
        camera: Some(k),
        seeds: BTreeMap::from([
            ("master".to_string(), cfg.seed),
            ("init".to_string(), model_cfg.seed),
            ("stage1_shuffle".to_string(), model_cfg.stage1.seed),
            ("stage2_shuffle".to_string(), model_cfg.stage2.seed),
        ]),
        config_digest: Some(cfg.digest()),
    };
    save_bundle(&model, &meta, &a.out)?;
    let _ = writeln!(summary, "model -> {}", a.out.display());
    Ok(summary)
}

fn read_predictions(path: &Path) -> CliResult<Vec<Pose>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            let v: Vec<f64> = serde_json::from_str(l)
                .map_err(|e| CliError::io(format!("{} line {}: {e}", path.display(), n + 1)))?;
            Pose::from_flat(&v).map_err(|e| CliError::config(format!("{} line {}: {e}", path.display(), n + 1)))
        })
        .collect()
}

fn tags_of(entry: &ManifestEntry, spec: &SplitSpec) -> FrameTags {
    match &entry.params {
        Some(p) => tag_frame(p, entry.subject, spec),
        None => {
            // only the shape axis can be decided without generating parameters
            let shape = spec.in_shape_region(entry.subject);
            FrameTags { interpolation: !shape, extrapolation: shape, shape, ..FrameTags::default() }
        }
    }
}

fn gt_mcp(pose: &Pose) -> Hint {
    let j = pose.joints()[crate::depth::joint::MIDDLE_MCP];
    Hint::Mcp([j.x, j.y, j.z])
}

fn cmd_eval(a: &EvalArgs) -> CliResult<String> {
    let (manifest, info) = load_data(&a.data)?;
    let cfg = resolve_config(a.config.as_deref(), None, info.map(|i| i.config))?;
    let test = manifest.split(&a.split);
    let gts: Vec<Pose> = test.entries.iter().map(|e| Pose::from_flat(&e.pose)).collect::<crate::Result<_>>()?;
    let preds = match (&a.predictions, &a.model) {
        (Some(p), _) => {
            let preds = read_predictions(p)?;
            if preds.len() != gts.len() {
                return Err(CliError::config(format!(
                    "{} holds {} predictions for {} frames of split {:?}",
                    p.display(),
                    preds.len(),
                    gts.len(),
                    a.split
                )));
            }
            preds
        }
        (None, Some(m)) => {
            let (model, meta) = load_bundle(m)?;
            let k = meta.camera.unwrap_or(cfg.camera);
            test.validate()?;
            (0..test.entries.len())
                .into_par_iter()
                .map(|i| {
                    let e = &test.entries[i];
                    let img = read_pgm(&test.image_path(e))?;
                    let hint = e.hint.unwrap_or_else(|| gt_mcp(&gts[i]));
                    Ok(infer_two_stage(&model, &img, &hint, &k)?.pose)
                })
                .collect::<crate::Result<_>>()?
        }
        (None, None) => return Err(CliError::config("either --model or --predictions is required")),
    };
    let tags: Vec<FrameTags> = test.entries.iter().map(|e| tags_of(e, &cfg.split)).collect();
    let mut report: AxisReport = axis_scores(&preds, &gts, &tags)?;
    report.config_digest = Some(cfg.digest());
    create_dir(&a.out)?;
    write_file(&a.out.join("report.json"), (report.to_json() + "\n").as_bytes())?;
    let table = report.to_table();
    write_file(&a.out.join("report.txt"), table.as_bytes())?;
    Ok(table)
}

fn format_pose(pose: &Pose) -> String {
    pose.joints().iter().map(|j| format!("{:.4} {:.4} {:.4}\n", j.x, j.y, j.z)).collect()
}

fn cmd_infer(a: &InferArgs) -> CliResult<String> {
    let (model, meta) = load_bundle(&a.model)?;
    let k = match (a.camera, meta.camera) {
        (Some([fx, fy, cx, cy]), _) => CameraIntrinsics::new(fx, fy, cx, cy)?,
        (None, Some(k)) => k,
        (None, None) => return Err(CliError::config("the model stores no camera; pass --camera fx,fy,cx,cy")),
    };
    let img = read_pgm(&a.image)?;
    let hint = match (a.mcp, a.bbox) {
        (Some(p), _) => Hint::Mcp(p),
        (None, Some(b)) => Hint::Bbox(b),
        (None, None) => return Err(CliError::config("one of --mcp or --bbox is required")),
    };
    let inf = infer_two_stage(&model, &img, &hint, &k).map_err(|e| match e {
        Error::Domain(m) | Error::Shape(m) => CliError { code: CliError::INFERENCE, msg: m },
        e => e.into(),
    })?;
    let text = format_pose(&inf.pose);
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        write_file(&dir.join("pose.txt"), text.as_bytes())?;
        if a.dump_stages {
            write_pgm(&inf.patch1.to_depth_image(), &dir.join("patch1.pgm"))?;
            write_pgm(&inf.patch2.to_depth_image(), &dir.join("patch2.pgm"))?;
            write_file(&dir.join("pose1.txt"), format_pose(&inf.pose1).as_bytes())?;
        }
    }
    Ok(text)
}

fn cmd_inspect(a: &InspectArgs) -> CliResult<String> {
    let p = &a.path;
    let bundle_dir = if p.is_dir() && p.join("metadata.json").is_file() {
        Some(p.clone())
    } else if p.file_name().is_some_and(|n| n == "metadata.json") {
        p.parent().map(Path::to_path_buf)
    } else {
        None
    };
    if let Some(dir) = bundle_dir {
        let (model, meta) = load_bundle(&dir)?;
        let mut out = format!("model bundle {}\n", dir.display());
        let _ = writeln!(out, "stages       {}", meta.stages);
        let _ = writeln!(out, "fine_tuned   {}", meta.fine_tuned);
        let _ = writeln!(out, "layer_sizes  {:?}", meta.layer_sizes);
        let _ = writeln!(out, "parameters   {}", model.net1.params().len() + model.net2.as_ref().map_or(0, |n| n.params().len()));
        let _ = writeln!(out, "recipe       cube {} mm, patch {}, input {}", meta.recipe.cube_size, meta.recipe.patch_res, meta.recipe.input_res);
        for (k, v) in &meta.seeds {
            let _ = writeln!(out, "seed {k:<12} {v}");
        }
        let _ = writeln!(out, "config       {}", meta.config_digest.as_deref().unwrap_or("-"));
        return Ok(out);
    }
    let manifest_path = if p.is_dir() { p.join(MANIFEST) } else { p.clone() };
    let bytes = std::fs::read(&manifest_path).map_err(|e| CliError::io(format!("{}: {e}", manifest_path.display())))?;
    let (manifest, info) = load_data(p)?;
    let mut out = format!("manifest {}\n", manifest_path.display());
    let _ = writeln!(out, "frames       {}", manifest.entries.len());
    for s in Strategy::ALL {
        let _ = writeln!(out, "strategy {}  {}", s, manifest.count(s));
    }
    let mut splits: BTreeMap<&str, usize> = BTreeMap::new();
    let mut noise: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &manifest.entries {
        for s in &e.splits {
            *splits.entry(s).or_default() += 1;
        }
        if let Some(n) = e.noise {
            *noise.entry(n.name()).or_default() += 1;
        }
    }
    for (s, n) in &splits {
        let _ = writeln!(out, "split {s:<7} {n}");
    }
    for (s, n) in &noise {
        let _ = writeln!(out, "noise {s:<12} {n}");
    }
    let _ = writeln!(out, "digest       {}", digest(&bytes));
    if let Some(i) = info {
        let _ = writeln!(out, "config       {}", i.config_digest);
    }
    Ok(out)
}
