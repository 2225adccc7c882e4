//! Stage orchestration: propose, select, consolidate, segment.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pointprompt_core::archive::MaskArchive;
use pointprompt_core::camera::Frame;
use pointprompt_core::consolidation::{
    build_overlap_graph, compute_masked_surfaces, consolidate, ConsolidationMap,
    DEFAULT_MIN_SUPPORT, DEFAULT_TAU_MERGE,
};
use pointprompt_core::eval::{
    evaluate, grouped_evaluation, predictions_from_labels, EvalReport, GroundTruth,
};
use pointprompt_core::mask::{
    enforce_contract, ContractReport, MaskProvider, NoiseSpec, PixelPrompt,
};
use pointprompt_core::projection::{project_batch, FrameVisibility, DEFAULT_OCCLUSION_TOL};
use pointprompt_core::sampling::{farthest_point_sample, prompt_ratio_to_count, PromptSet};
use pointprompt_core::segmentation::{
    fill_unlabeled, finalize_votes, frame_votes, SegmentationResult, VoteTable, DEFAULT_K_NEIGHBORS,
};
use pointprompt_core::selection::{examine_frame, PromptState, PromptStates, SelectionConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Scene;
use crate::error::{Error, IoContext, Result};
use crate::io::labels::write_labels;
use crate::io::masks::{write_archive_dir, Resolution};
use crate::io::prompts::{write_prompt_export, PromptExport};
use crate::provider::FileMaskProvider;

/// Where masks come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProviderSpec {
    /// Mask archive directory with a `masks.json` manifest.
    File { dir: PathBuf },
    /// Exact masks from the scene's instance rasters.
    Oracle,
    /// Instance-raster masks perturbed by `noise`.
    OracleNoisy { noise: NoiseSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub prompt_ratio: f64,
    pub fps_seed: u64,
    pub occlusion_tol: f64,
    pub frame_stride: u32,
    pub selection: SelectionConfig,
    pub use_selection: bool,
    pub use_consolidation: bool,
    pub tau_merge: f64,
    pub min_support: u32,
    pub k_neighbors: usize,
    pub provider: ProviderSpec,
    pub resolution: Resolution,
    /// Depth PNG/PGM units per meter.
    pub depth_scale: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            prompt_ratio: 0.01,
            fps_seed: 0,
            occlusion_tol: DEFAULT_OCCLUSION_TOL,
            frame_stride: 1,
            selection: SelectionConfig::default(),
            use_selection: true,
            use_consolidation: true,
            tau_merge: DEFAULT_TAU_MERGE,
            min_support: DEFAULT_MIN_SUPPORT,
            k_neighbors: DEFAULT_K_NEIGHBORS,
            provider: ProviderSpec::Oracle,
            resolution: Resolution {
                width: 320,
                height: 240,
            },
            depth_scale: crate::io::frames::DEFAULT_DEPTH_SCALE,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.prompt_ratio > 0.0 && self.prompt_ratio <= 1.0) {
            return Err(Error::config(format!(
                "prompt_ratio {} must be in (0, 1]",
                self.prompt_ratio
            )));
        }
        if !(self.occlusion_tol.is_finite() && self.occlusion_tol >= 0.0) {
            return Err(Error::config("occlusion_tol must be a non-negative number"));
        }
        if self.frame_stride == 0 {
            return Err(Error::config("frame_stride must be at least 1"));
        }
        if !(self.tau_merge > 0.0 && self.tau_merge <= 1.0) {
            return Err(Error::config(format!(
                "tau_merge {} must be in (0, 1]",
                self.tau_merge
            )));
        }
        if self.min_support == 0 {
            return Err(Error::config("min_support must be at least 1"));
        }
        if self.k_neighbors == 0 {
            return Err(Error::config("k_neighbors must be at least 1"));
        }
        if self.resolution.width == 0 || self.resolution.height == 0 {
            return Err(Error::config("resolution must be non-empty"));
        }
        if !(self.depth_scale.is_finite() && self.depth_scale > 0.0) {
            return Err(Error::config("depth_scale must be positive"));
        }
        if let ProviderSpec::OracleNoisy { noise } = &self.provider {
            if !(0.0..=1.0).contains(&noise.spill_prob)
                || noise.jitter.is_nan()
                || noise.jitter < 0.0
            {
                return Err(Error::config(
                    "noise needs spill_prob in [0, 1] and jitter >= 0",
                ));
            }
        }
        self.selection.validate().map_err(Error::config)
    }

    pub fn noise_seed(&self) -> Option<u64> {
        match &self.provider {
            ProviderSpec::OracleNoisy { noise } => Some(noise.seed),
            _ => None,
        }
    }
}

/// Builds the configured provider for `scene` at the working resolution.
pub fn build_provider(cfg: &PipelineConfig, scene: &Scene) -> Result<Box<dyn MaskProvider>> {
    let Resolution { width, height } = cfg.resolution;
    let oracle = |noise: NoiseSpec| -> Result<Box<dyn MaskProvider>> {
        let o = scene.oracle(noise)?;
        let same = scene
            .rasters
            .values()
            .all(|r| (r.width(), r.height()) == (width, height));
        Ok(Box::new(if same { o } else { o.resized(width, height) }))
    };
    match &cfg.provider {
        ProviderSpec::File { dir } => Ok(Box::new(FileMaskProvider::open(dir)?)),
        ProviderSpec::Oracle => oracle(NoiseSpec::default()),
        ProviderSpec::OracleNoisy { noise } => oracle(*noise),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub proposal: f64,
    pub selection: f64,
    pub consolidation: f64,
    pub segmentation: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub points: usize,
    pub frames: usize,
    pub prompts: usize,
    /// Valid, visible prompt projections over all frames.
    pub projections: usize,
    /// Records surviving the provider contract.
    pub records: usize,
    pub dropped_records: usize,
    /// Records kept for consolidation and voting.
    pub used_records: usize,
    pub retained: usize,
    pub pseudo_prompts: usize,
    pub unlabeled_before_fill: usize,
    pub instances: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub result: SegmentationResult,
    pub prompts: PromptSet,
    /// Per frame, ascending by id: the prompts sent to the provider.
    pub frame_prompts: Vec<(u32, Vec<PixelPrompt>)>,
    /// Contract-checked provider output.
    pub archive: MaskArchive,
    pub states: PromptStates,
    pub retained: Vec<u32>,
    pub consolidation: ConsolidationMap,
    /// Ground-truth instances that received no prompt.
    pub uncovered: Vec<u32>,
    pub stats: RunStats,
    pub timings: StageTimings,
}

fn working_frames(cfg: &PipelineConfig, scene: &Scene) -> Vec<Frame> {
    let Resolution { width, height } = cfg.resolution;
    scene
        .frames
        .iter()
        .filter(|f| f.id % cfg.frame_stride == 0)
        .map(|f| {
            if (f.width(), f.height()) == (width, height) {
                f.clone()
            } else {
                f.resized(width, height)
            }
        })
        .collect()
}

/// Runs every stage in memory. Frames are processed in parallel on the
/// current rayon pool and merged in frame order, so the result does not
/// depend on the thread count.
pub fn run_stages(
    cfg: &PipelineConfig,
    scene: &Scene,
    provider: &dyn MaskProvider,
) -> Result<RunOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let mut timings = StageTimings::default();
    let cloud = &scene.cloud;
    let frames = working_frames(cfg, scene);
    if frames.is_empty() {
        return Err(Error::data("no frames at the requested stride"));
    }
    let Resolution { width, height } = cfg.resolution;

    // Proposal: prompts, projection, masks.
    let t = Instant::now();
    let stage = "proposal";
    let m = prompt_ratio_to_count(cloud.len(), cfg.prompt_ratio)
        .map_err(|e| Error::config(e).in_stage(stage))?;
    let prompts = farthest_point_sample(cloud, m, cfg.fps_seed)
        .map_err(|e| Error::data(e).in_stage(stage))?;
    let tol = cfg.occlusion_tol;
    type Proposed = (
        FrameVisibility,
        Vec<PixelPrompt>,
        Vec<pointprompt_core::mask::MaskRecord>,
        ContractReport,
    );
    let proposed: Vec<Proposed> = frames
        .par_iter()
        .map(|frame| -> Result<Proposed> {
            let proj = project_batch(prompts.indices(), cloud, frame, tol).map_err(Error::data)?;
            let pixel_prompts: Vec<PixelPrompt> = proj
                .into_iter()
                .enumerate()
                .filter(|(_, p)| p.valid)
                .map(|(id, projection)| PixelPrompt {
                    prompt_id: id as u32,
                    projection,
                })
                .collect();
            let raw = if pixel_prompts.is_empty() {
                Vec::new()
            } else {
                provider
                    .predict_masks(frame, &pixel_prompts)
                    .map_err(|e| Error::Provider(e.to_string()))?
            };
            let (records, report) = enforce_contract(frame.id, &pixel_prompts, raw);
            Ok((
                FrameVisibility::compute(cloud, frame, tol),
                pixel_prompts,
                records,
                report,
            ))
        })
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage(stage))?;
    let mut stats = RunStats {
        points: cloud.len(),
        frames: frames.len(),
        prompts: prompts.len(),
        ..Default::default()
    };
    let mut archive = MaskArchive::new(width, height, prompts.len() as u32);
    let mut visibility = Vec::with_capacity(frames.len());
    let mut frame_prompts = Vec::with_capacity(frames.len());
    for (frame, (vis, pp, records, report)) in frames.iter().zip(proposed) {
        stats.projections += pp.len();
        stats.records += records.len();
        stats.dropped_records += report.total();
        if report.total() > 0 {
            log::debug!(
                "frame {}: provider contract dropped {} records",
                frame.id,
                report.total()
            );
        }
        archive.insert_frame(frame.id, records);
        visibility.push(vis);
        frame_prompts.push((frame.id, pp));
    }
    let uncovered = scene
        .gt
        .as_ref()
        .map(|gt| uncovered_instances(gt, &prompts))
        .unwrap_or_default();
    for id in &uncovered {
        log::warn!("coverage: ground-truth instance {id} received no prompt");
    }
    timings.proposal = t.elapsed().as_secs_f64();

    // Selection.
    let t = Instant::now();
    let stage = "selection";
    let mut states = PromptStates::new(prompts.len());
    let (retained, used) = if cfg.use_selection {
        let exams: Vec<_> = frames
            .par_iter()
            .map(|f| examine_frame(f.id, archive.frame(f.id), &cfg.selection))
            .collect();
        for e in &exams {
            states
                .accumulate_frame(e)
                .map_err(|e| Error::data(e).in_stage(stage))?;
        }
        let retained = states.finalize(&cfg.selection);
        let mut used = MaskArchive::new(width, height, prompts.len() as u32);
        for e in &exams {
            let records = archive
                .frame(e.frame_id)
                .iter()
                .filter(|r| {
                    e.selected.binary_search(&r.prompt_id).is_ok()
                        && retained.binary_search(&r.prompt_id).is_ok()
                })
                .cloned()
                .collect();
            used.insert_frame(e.frame_id, records);
        }
        (retained, used)
    } else {
        for (id, records) in archive.iter() {
            let valid: Vec<u32> = records.iter().map(|r| r.prompt_id).collect();
            states
                .accumulate(&valid, &[], None)
                .map_err(|e| Error::data(format!("frame {id}: {e}")).in_stage(stage))?;
        }
        (states.retain_all_observed(), archive.clone())
    };
    stats.retained = retained.len();
    stats.used_records = used.record_count();
    timings.selection = t.elapsed().as_secs_f64();

    // Consolidation.
    let t = Instant::now();
    let stage = "consolidation";
    let map = if cfg.use_consolidation {
        let surfaces = compute_masked_surfaces(&retained, &visibility, &used, cfg.min_support);
        let edges = build_overlap_graph(&surfaces, cfg.tau_merge);
        consolidate(&edges, &retained).map_err(|e| Error::data(e).in_stage(stage))?
    } else {
        ConsolidationMap::identity(&retained)
    };
    stats.pseudo_prompts = map.roots().len();
    timings.consolidation = t.elapsed().as_secs_f64();

    // Segmentation.
    let t = Instant::now();
    let stage = "segmentation";
    let per_frame: Vec<Vec<(u32, u32)>> = visibility
        .par_iter()
        .map(|vis| frame_votes(vis, used.frame(vis.frame_id), &map))
        .collect();
    let mut votes = VoteTable::new(cloud.len());
    for v in &per_frame {
        votes.add_frame(v);
    }
    let voted = finalize_votes(&votes);
    stats.unlabeled_before_fill = voted.unlabeled_count();
    let result = fill_unlabeled(&voted, cloud, cfg.k_neighbors)
        .map_err(|e| Error::data(e).in_stage(stage))?;
    stats.instances = result.instance_ids().len();
    timings.segmentation = t.elapsed().as_secs_f64();
    timings.total = start.elapsed().as_secs_f64();

    Ok(RunOutput {
        result,
        prompts,
        frame_prompts,
        archive,
        states,
        retained,
        consolidation: map,
        uncovered,
        stats,
        timings,
    })
}

fn uncovered_instances(gt: &GroundTruth, prompts: &PromptSet) -> Vec<u32> {
    let labels = gt.labels();
    let hit: std::collections::BTreeSet<u32> = prompts
        .indices()
        .iter()
        .map(|&i| labels[i as usize])
        .collect();
    gt.instances()
        .into_iter()
        .map(|(id, _)| id)
        .filter(|id| !hit.contains(id))
        .collect()
}

/// Evaluates `result` against `gt`, optionally with containment grouping.
pub fn evaluate_result(result: &SegmentationResult, gt: &GroundTruth, grouped: bool) -> EvalReport {
    let preds = predictions_from_labels(&result.labels, &result.scores);
    if grouped {
        grouped_evaluation(&preds, gt, pointprompt_core::eval::DEFAULT_CONTAINMENT)
    } else {
        evaluate(&preds, gt)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub threads: Option<usize>,
    /// Directory for per-frame `<id>.prompts.json` files.
    pub export_prompts: Option<PathBuf>,
    /// Directory for the provider's masks as an archive.
    pub export_masks: Option<PathBuf>,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    scene: String,
    provider: &'a str,
    fps_seed: u64,
    noise_seed: Option<u64>,
    threads: usize,
    config: &'a PipelineConfig,
    stats: &'a RunStats,
    timings: &'a StageTimings,
    uncovered_instances: &'a [u32],
}

#[derive(Serialize)]
struct RetainedDump<'a> {
    retained: &'a [u32],
    states: &'a [PromptState],
}

#[derive(Serialize)]
struct ConsolidationDump {
    parent: BTreeMap<u32, u32>,
    groups: BTreeMap<u32, Vec<u32>>,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(Error::data)?;
    fs::write(path, text + "\n").at(path)
}

pub const LABELS_FILE: &str = "labels.bin";
pub const SCORES_FILE: &str = "instance_scores.json";

/// Loads the scene, runs every stage and writes the outputs to `out_dir`.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    scene_dir: &Path,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<RunOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .map_err(Error::config)?;
    pool.install(|| {
        let scene = Scene::load(scene_dir, cfg.frame_stride, cfg.depth_scale)?;
        let provider = build_provider(cfg, &scene)?;
        let out = run_stages(cfg, &scene, provider.as_ref())?;
        fs::create_dir_all(out_dir).at(out_dir)?;
        write_labels(&out_dir.join(LABELS_FILE), &out.result.labels)?;
        write_json(&out_dir.join(SCORES_FILE), &out.result.scores)?;
        write_json(
            &out_dir.join("consolidation.json"),
            &ConsolidationDump {
                parent: out.consolidation.parent().clone(),
                groups: out.consolidation.groups(),
            },
        )?;
        write_json(&out_dir.join("prompts.json"), &out.prompts.indices())?;
        write_json(
            &out_dir.join("retained.json"),
            &RetainedDump {
                retained: &out.retained,
                states: out.states.states(),
            },
        )?;
        write_json(
            &out_dir.join("run.json"),
            &RunManifest {
                scene: scene.name.clone(),
                provider: provider.name(),
                fps_seed: cfg.fps_seed,
                noise_seed: cfg.noise_seed(),
                threads: rayon::current_num_threads(),
                config: cfg,
                stats: &out.stats,
                timings: &out.timings,
                uncovered_instances: &out.uncovered,
            },
        )?;
        if let Some(dir) = &opts.export_prompts {
            export_prompts(dir, cfg.resolution, &out.frame_prompts)?;
        }
        if let Some(dir) = &opts.export_masks {
            write_archive_dir(dir, &out.archive, provider.name())?;
        }
        Ok(out)
    })
}

/// Writes one `<id>.prompts.json` per frame.
pub fn export_prompts(
    dir: &Path,
    res: Resolution,
    frame_prompts: &[(u32, Vec<PixelPrompt>)],
) -> Result<()> {
    fs::create_dir_all(dir).at(dir)?;
    for (id, pp) in frame_prompts {
        write_prompt_export(
            dir,
            &PromptExport::from_prompts(*id, res.width, res.height, pp),
        )?;
    }
    Ok(())
}

/// One sweep dimension: a config key and its values.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<String>,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    /// Parses `key=v1,v2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let (key, values) = s
            .split_once('=')
            .ok_or_else(|| Error::config(format!("sweep '{s}' is not key=v1,v2,...")))?;
        let values: Vec<String> = values
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            return Err(Error::config(format!("sweep '{key}' has no values")));
        }
        Ok(Self {
            key: key.trim().to_string(),
            values,
        })
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(format!("bad value '{v}' for {key}")))
}

fn noise_mut(cfg: &mut PipelineConfig) -> &mut NoiseSpec {
    if !matches!(cfg.provider, ProviderSpec::OracleNoisy { .. }) {
        cfg.provider = ProviderSpec::OracleNoisy {
            noise: NoiseSpec::default(),
        };
    }
    match &mut cfg.provider {
        ProviderSpec::OracleNoisy { noise } => noise,
        _ => unreachable!(),
    }
}

/// Applies one `key=value` setting and returns the row label fragment.
pub fn apply_setting(cfg: &mut PipelineConfig, key: &str, value: &str) -> Result<String> {
    let label = format!("{key}={value}");
    match key {
        "prompt_ratio" => cfg.prompt_ratio = parse(key, value)?,
        "fps_seed" => cfg.fps_seed = parse(key, value)?,
        "occlusion_tol" => cfg.occlusion_tol = parse(key, value)?,
        "frame_stride" => cfg.frame_stride = parse(key, value)?,
        "theta_retain" => cfg.selection.theta_retain = parse(key, value)?,
        "nms_box_iou" => cfg.selection.nms_box_iou = parse(key, value)?,
        "min_pred_iou" => cfg.selection.min_predicted_iou = parse(key, value)?,
        "min_stability" => cfg.selection.min_stability = parse(key, value)?,
        "dedup_iou" => cfg.selection.overlap_dedup_iou = parse(key, value)?,
        "variant" => {
            cfg.selection.variant =
                serde_json::from_value(serde_json::Value::String(value.to_string()))
                    .map_err(|_| Error::config(format!("bad selection variant '{value}'")))?
        }
        "topk" => cfg.selection.k = Some(parse(key, value)?),
        "tau_merge" => cfg.tau_merge = parse(key, value)?,
        "min_support" => cfg.min_support = parse(key, value)?,
        "k_neighbors" => cfg.k_neighbors = parse(key, value)?,
        "noise_seed" => noise_mut(cfg).seed = parse(key, value)?,
        "noise_radius" => noise_mut(cfg).radius = parse(key, value)?,
        "noise_jitter" => noise_mut(cfg).jitter = parse(key, value)?,
        "spill_prob" => noise_mut(cfg).spill_prob = parse(key, value)?,
        "jitter_scope" => {
            noise_mut(cfg).jitter_scope =
                serde_json::from_value(serde_json::Value::String(value.to_string()))
                    .map_err(|_| Error::config(format!("bad jitter scope '{value}'")))?
        }
        "off" => {
            return match value {
                "none" => Ok("full".to_string()),
                "selection" => {
                    cfg.use_selection = false;
                    Ok("w/o Sel.".to_string())
                }
                "consolidation" => {
                    cfg.use_consolidation = false;
                    Ok("w/o Con.".to_string())
                }
                _ => Err(Error::config(format!(
                    "off takes none, selection or consolidation, not '{value}'"
                ))),
            }
        }
        _ => return Err(Error::config(format!("unknown sweep key '{key}'"))),
    }
    Ok(label)
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub label: String,
    pub settings: Vec<(String, String)>,
    pub report: Option<EvalReport>,
    pub retained: Option<usize>,
    pub pseudo_prompts: Option<usize>,
    pub uncovered: Option<usize>,
    pub seconds: Option<f64>,
    pub error: Option<String>,
}

/// Cartesian product of the axes, first axis varying slowest. No axes give
/// no cells.
pub fn expand_grid(axes: &[SweepAxis]) -> Vec<Vec<(String, String)>> {
    if axes.is_empty() {
        return Vec::new();
    }
    let mut cells: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for axis in axes {
        cells = cells
            .into_iter()
            .flat_map(|cell| {
                axis.values.iter().map(move |v| {
                    let mut c = cell.clone();
                    c.push((axis.key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    cells
}

/// One run and evaluation per grid cell. Cell failures are recorded in the
/// row and do not stop the sweep.
pub fn run_ablation(
    base: &PipelineConfig,
    scene: &Scene,
    axes: &[SweepAxis],
    grouped: bool,
) -> Result<Vec<AblationRow>> {
    let gt = scene
        .gt
        .as_ref()
        .ok_or_else(|| Error::data(format!("scene {} has no ground truth", scene.name)))?;
    let mut rows = Vec::new();
    for cell in expand_grid(axes) {
        let mut cfg = base.clone();
        let mut labels = Vec::new();
        let outcome = cell
            .iter()
            .try_for_each(|(k, v)| apply_setting(&mut cfg, k, v).map(|l| labels.push(l)))
            .and_then(|_| {
                let provider = build_provider(&cfg, scene)?;
                run_stages(&cfg, scene, provider.as_ref())
            });
        let mut row = AblationRow {
            label: labels.join(" "),
            settings: cell.clone(),
            report: None,
            retained: None,
            pseudo_prompts: None,
            uncovered: None,
            seconds: None,
            error: None,
        };
        match outcome {
            Ok(out) => {
                row.report = Some(evaluate_result(&out.result, gt, grouped));
                row.retained = Some(out.stats.retained);
                row.pseudo_prompts = Some(out.stats.pseudo_prompts);
                row.uncovered = Some(out.uncovered.len());
                row.seconds = Some(out.timings.total);
            }
            Err(e) => {
                log::warn!("ablation cell '{}' failed: {e}", row.label);
                row.error = Some(e.to_string());
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

/// CSV with one column per axis key followed by the metrics.
pub fn ablation_csv(axes: &[SweepAxis], rows: &[AblationRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = vec!["label".into()];
    header.extend(axes.iter().map(|a| a.key.clone()));
    header.extend(
        [
            "ap",
            "ap50",
            "ap25",
            "ap50_tiny",
            "ap50_small",
            "ap50_normal",
            "retained",
            "pseudo_prompts",
            "uncovered",
            "seconds",
            "error",
        ]
        .map(String::from),
    );
    w.write_record(&header).map_err(Error::data)?;
    for r in rows {
        let mut rec = vec![r.label.clone()];
        rec.extend(r.settings.iter().map(|(_, v)| v.clone()));
        let rep = r.report.as_ref();
        rec.push(opt_cell(rep.map(|x| x.ap)));
        rec.push(opt_cell(rep.map(|x| x.ap50)));
        rec.push(opt_cell(rep.map(|x| x.ap25)));
        rec.push(opt_cell(rep.and_then(|x| x.per_size.tiny)));
        rec.push(opt_cell(rep.and_then(|x| x.per_size.small)));
        rec.push(opt_cell(rep.and_then(|x| x.per_size.normal)));
        rec.push(r.retained.map(|x| x.to_string()).unwrap_or_default());
        rec.push(r.pseudo_prompts.map(|x| x.to_string()).unwrap_or_default());
        rec.push(r.uncovered.map(|x| x.to_string()).unwrap_or_default());
        rec.push(r.seconds.map(|x| format!("{x:.3}")).unwrap_or_default());
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec).map_err(Error::data)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::data(e.to_string()))?;
    String::from_utf8(bytes).map_err(Error::data)
}
