use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pointprompt::dataset::{emit_dataset, read_scene_spec, Scene, CLOUD_FILE};
use pointprompt::error::{Error, Result};
use pointprompt::io::labels::read_labels;
use pointprompt::io::masks::Resolution;
use pointprompt::io::ply::{read_ply, write_labeled_ply, PlyFormat};
use pointprompt::pipeline::{
    ablation_csv, run_ablation, run_pipeline, PipelineConfig, ProviderSpec, RunOptions, SweepAxis,
    SCORES_FILE,
};
use pointprompt_core::eval::{
    evaluate, grouped_evaluation, predictions_from_labels, GroundTruth, DEFAULT_CONTAINMENT,
};
use pointprompt_core::mask::{JitterScope, NoiseSpec};
use pointprompt_core::selection::SelectionVariant;
use pointprompt_core::synthetic::fixtures;

/// Prints a line to stdout; a closed pipe (`| head`) is not an error.
macro_rules! say {
    ($($t:tt)*) => {{
        let _ = writeln!(io::stdout(), $($t)*);
    }};
}

#[derive(Parser)]
#[command(
    name = "pointprompt",
    version,
    about = "Zero-shot 3D instance segmentation from 2D mask prompts"
)]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "SP3D_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment a scene directory.
    Segment(SegmentArgs),
    /// Score predicted labels against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic scene directory.
    Synth(SynthArgs),
    /// Run a parameter sweep and tabulate the evaluations.
    Ablate(AblateArgs),
    /// Write a point cloud colored by instance labels.
    ExportPly(ExportPlyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderKind {
    File,
    Oracle,
    OracleNoisy,
}

#[derive(Clone, Copy, ValueEnum)]
enum JitterScopeArg {
    Prompt,
    Record,
}

impl From<JitterScopeArg> for JitterScope {
    fn from(a: JitterScopeArg) -> Self {
        match a {
            JitterScopeArg::Prompt => JitterScope::Prompt,
            JitterScopeArg::Record => JitterScope::Record,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Threshold,
    Soft,
    Topk,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON pipeline config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    provider: Option<ProviderKind>,
    /// Mask archive directory for the file provider.
    #[arg(long)]
    masks: Option<PathBuf>,
    #[arg(long)]
    noise_radius: Option<u32>,
    #[arg(long)]
    noise_jitter: Option<f32>,
    #[arg(long)]
    spill_prob: Option<f64>,
    #[arg(long)]
    noise_seed: Option<u64>,
    /// Whether confidence jitter is drawn once per prompt or per record.
    #[arg(long, value_enum)]
    jitter_scope: Option<JitterScopeArg>,
    #[arg(long)]
    prompt_ratio: Option<f64>,
    #[arg(long)]
    fps_seed: Option<u64>,
    #[arg(long)]
    occlusion_tol: Option<f64>,
    #[arg(long)]
    frame_stride: Option<u32>,
    #[arg(long)]
    theta_retain: Option<f64>,
    #[arg(long, value_enum)]
    selection_variant: Option<VariantArg>,
    #[arg(long)]
    topk: Option<usize>,
    #[arg(long)]
    min_pred_iou: Option<f64>,
    #[arg(long)]
    min_stability: Option<f64>,
    #[arg(long)]
    nms_box_iou: Option<f64>,
    #[arg(long)]
    dedup_iou: Option<f64>,
    #[arg(long)]
    no_selection: bool,
    #[arg(long)]
    no_consolidation: bool,
    #[arg(long)]
    tau_merge: Option<f64>,
    #[arg(long)]
    min_support: Option<u32>,
    #[arg(long)]
    k_neighbors: Option<usize>,
    /// Working resolution as HEIGHTxWIDTH.
    #[arg(long, value_parser = parse_resolution)]
    resolution: Option<Resolution>,
    /// Depth units per meter.
    #[arg(long)]
    depth_scale: Option<f64>,
}

fn parse_resolution(s: &str) -> std::result::Result<Resolution, String> {
    let (h, w) = s.split_once(['x', 'X']).ok_or("expected HEIGHTxWIDTH")?;
    let height = h.trim().parse().map_err(|_| format!("bad height '{h}'"))?;
    let width = w.trim().parse().map_err(|_| format!("bad width '{w}'"))?;
    Ok(Resolution { width, height })
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::config(format!("{}: {e}", p.display())))?
            }
            None => PipelineConfig::default(),
        };
        let noisy_flags = self.noise_radius.is_some()
            || self.noise_jitter.is_some()
            || self.spill_prob.is_some()
            || self.noise_seed.is_some()
            || self.jitter_scope.is_some();
        match self.provider {
            Some(ProviderKind::File) => {
                let dir = self
                    .masks
                    .clone()
                    .ok_or_else(|| Error::config("--provider file needs --masks"))?;
                cfg.provider = ProviderSpec::File { dir };
            }
            Some(ProviderKind::Oracle) => cfg.provider = ProviderSpec::Oracle,
            Some(ProviderKind::OracleNoisy) => {
                if !matches!(cfg.provider, ProviderSpec::OracleNoisy { .. }) {
                    cfg.provider = ProviderSpec::OracleNoisy {
                        noise: NoiseSpec::default(),
                    };
                }
            }
            None => {
                if let Some(dir) = &self.masks {
                    cfg.provider = ProviderSpec::File { dir: dir.clone() };
                }
            }
        }
        if noisy_flags {
            let ProviderSpec::OracleNoisy { noise } = &mut cfg.provider else {
                return Err(Error::config("noise flags need --provider oracle-noisy"));
            };
            set(&mut noise.radius, self.noise_radius);
            set(&mut noise.jitter, self.noise_jitter);
            set(&mut noise.spill_prob, self.spill_prob);
            set(&mut noise.seed, self.noise_seed);
            if let Some(scope) = self.jitter_scope {
                noise.jitter_scope = scope.into();
            }
        }
        set(&mut cfg.prompt_ratio, self.prompt_ratio);
        set(&mut cfg.fps_seed, self.fps_seed);
        set(&mut cfg.occlusion_tol, self.occlusion_tol);
        set(&mut cfg.frame_stride, self.frame_stride);
        set(&mut cfg.selection.theta_retain, self.theta_retain);
        if let Some(v) = self.selection_variant {
            cfg.selection.variant = match v {
                VariantArg::Threshold => SelectionVariant::Threshold,
                VariantArg::Soft => SelectionVariant::Soft,
                VariantArg::Topk => SelectionVariant::TopK,
            };
        }
        if self.topk.is_some() {
            cfg.selection.k = self.topk;
        }
        set(&mut cfg.selection.min_predicted_iou, self.min_pred_iou);
        set(&mut cfg.selection.min_stability, self.min_stability);
        set(&mut cfg.selection.nms_box_iou, self.nms_box_iou);
        set(&mut cfg.selection.overlap_dedup_iou, self.dedup_iou);
        if self.no_selection {
            cfg.use_selection = false;
        }
        if self.no_consolidation {
            cfg.use_consolidation = false;
        }
        set(&mut cfg.tau_merge, self.tau_merge);
        set(&mut cfg.min_support, self.min_support);
        set(&mut cfg.k_neighbors, self.k_neighbors);
        set(&mut cfg.resolution, self.resolution);
        set(&mut cfg.depth_scale, self.depth_scale);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

#[derive(Args)]
struct SegmentArgs {
    /// Scene directory (cloud.ply, frames/).
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Write per-frame pixel prompts for an external mask adapter.
    #[arg(long)]
    export_prompts: Option<PathBuf>,
    /// Write the provider's masks as an archive directory.
    #[arg(long)]
    export_masks: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Instance scores JSON ({"id": score}); defaults to instance_scores.json
    /// beside the prediction, else 1.0 for every instance.
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long)]
    grouped: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// room-8, big-floor, clutter-table, or `custom <json>`.
    #[arg(long, num_args = 1..=2, value_names = ["NAME", "JSON"])]
    scene: Vec<String>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = pointprompt::io::frames::DEFAULT_DEPTH_SCALE)]
    depth_scale: f64,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    scene: PathBuf,
    /// `key=v1,v2,...`; repeat for a grid.
    #[arg(long)]
    sweep: Vec<String>,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    grouped: bool,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ExportPlyArgs {
    /// Point cloud PLY, or a scene directory holding cloud.ply.
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    ascii: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let threads = cli.threads;
    match cli.command {
        Command::Segment(a) => segment(a, threads),
        Command::Eval(a) => eval(a),
        Command::Synth(a) => in_pool(threads, || synth(a)),
        Command::Ablate(a) => in_pool(threads, || ablate(a)),
        Command::ExportPly(a) => export_ply(a),
    }
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(Error::config)?;
    pool.install(f)
}

fn segment(a: SegmentArgs, threads: Option<usize>) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let opts = RunOptions {
        threads,
        export_prompts: a.export_prompts,
        export_masks: a.export_masks,
    };
    let out = run_pipeline(&cfg, &a.scene, &a.out, &opts)?;
    let t = &out.timings;
    say!(
        "{} points, {} frames, {} prompts, {} retained, {} pseudo-prompts, {} instances",
        out.stats.points,
        out.stats.frames,
        out.stats.prompts,
        out.stats.retained,
        out.stats.pseudo_prompts,
        out.stats.instances
    );
    say!(
        "time: proposal {:.2}s, selection {:.2}s, consolidation {:.2}s, segmentation {:.2}s, total {:.2}s",
        t.proposal, t.selection, t.consolidation, t.segmentation, t.total
    );
    if !out.uncovered.is_empty() {
        say!(
            "coverage warning: {} ground-truth instances received no prompt",
            out.uncovered.len()
        );
    }
    Ok(())
}

fn read_scores(path: &Path) -> Result<BTreeMap<u32, f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

fn eval(a: EvalArgs) -> Result<()> {
    let pred = read_labels(&a.pred)?;
    let gt = read_labels(&a.gt)?;
    if pred.len() != gt.len() {
        return Err(Error::data(format!(
            "{} predicted labels for {} ground-truth points",
            pred.len(),
            gt.len()
        )));
    }
    let beside = a.pred.parent().map(|d| d.join(SCORES_FILE));
    let scores = match (&a.scores, beside) {
        (Some(p), _) => read_scores(p)?,
        (None, Some(p)) if p.exists() => read_scores(&p)?,
        _ => BTreeMap::new(),
    };
    let gt = GroundTruth::new(gt);
    let preds = predictions_from_labels(&pred, &scores);
    let report = if a.grouped {
        grouped_evaluation(&preds, &gt, DEFAULT_CONTAINMENT)
    } else {
        evaluate(&preds, &gt)
    };
    let fmt = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
    say!(
        "AP {:.4}  AP50 {:.4}  AP25 {:.4}",
        report.ap,
        report.ap50,
        report.ap25
    );
    say!(
        "AP50 by size: tiny {}  small {}  normal {}",
        fmt(report.per_size.tiny),
        fmt(report.per_size.small),
        fmt(report.per_size.normal)
    );
    if let Some(p) = &a.report {
        let text = serde_json::to_string_pretty(&report).map_err(Error::data)?;
        fs::write(p, text + "\n").map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = match a.scene.as_slice() {
        [name, path] if name == "custom" => read_scene_spec(Path::new(path))?,
        [name] if name == "custom" => {
            return Err(Error::config("--scene custom needs a JSON path"))
        }
        [name] => fixtures::by_name(name).ok_or_else(|| {
            Error::config(format!(
                "unknown scene '{name}'; expected one of {:?} or custom <json>",
                fixtures::SCENE_NAMES
            ))
        })?,
        _ => {
            return Err(Error::config(
                "--scene takes a fixture name or `custom <json>`",
            ))
        }
    };
    let spec = match a.frames {
        Some(0) => return Err(Error::config("--frames must be at least 1")),
        Some(n) => spec.with_frames(n),
        None => spec,
    };
    let scene = emit_dataset(&spec, &a.out, a.depth_scale)?;
    let instances = scene.gt.as_ref().map(|g| g.instances().len()).unwrap_or(0);
    say!(
        "{}: {} points, {} instances, {} frames -> {}",
        spec.name,
        scene.cloud.len(),
        instances,
        scene.frames.len(),
        a.out.display()
    );
    Ok(())
}

fn ablate(a: AblateArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let axes: Vec<SweepAxis> = a.sweep.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    let scene = Scene::load(&a.scene, 1, cfg.depth_scale)?;
    let rows = run_ablation(&cfg, &scene, &axes, a.grouped)?;
    let table = ablation_csv(&axes, &rows)?;
    let _ = io::stdout().write_all(table.as_bytes());
    if let Some(p) = &a.csv {
        fs::write(p, &table).map_err(|e| Error::io(p, e))?;
    }
    if let Some(p) = &a.json {
        let text = serde_json::to_string_pretty(&rows).map_err(Error::data)?;
        fs::write(p, text + "\n").map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

fn export_ply(a: ExportPlyArgs) -> Result<()> {
    let cloud_path = if a.cloud.is_dir() {
        a.cloud.join(CLOUD_FILE)
    } else {
        a.cloud.clone()
    };
    let cloud = read_ply(&cloud_path)?;
    let labels = read_labels(&a.labels)?;
    let fmt = if a.ascii {
        PlyFormat::Ascii
    } else {
        PlyFormat::BinaryLittleEndian
    };
    write_labeled_ply(&a.out, &cloud, &labels, fmt)
}
