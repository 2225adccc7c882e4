//! Scene directories and in-memory scenes.
//!
//! Layout: `cloud.ply`, optional `gt.labels.bin` and `scene.json`, and a
//! `frames/` directory with `intrinsics.txt`, `<id>.pose.txt`,
//! `<id>.depth.png` (or `.pgm`) and, for synthetic scenes, `<id>.inst.bin`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use pointprompt_core::camera::Frame;
use pointprompt_core::cloud::PointCloud;
use pointprompt_core::eval::GroundTruth;
use pointprompt_core::mask::{NoiseSpec, SyntheticOracle};
use pointprompt_core::synthetic::{render_frame, sample_cloud, InstanceRaster, SceneSpec};
use rayon::prelude::*;

use crate::error::{Error, IoContext, Result};
use crate::io::frames::{load_frame_manifest, write_frame, write_intrinsics, INTRINSICS_FILE};
use crate::io::labels::{read_labels, write_labels};
use crate::io::ply::{read_ply, write_ply, PlyFormat};
use crate::io::raster::{read_raster, write_raster};

pub const CLOUD_FILE: &str = "cloud.ply";
pub const GT_FILE: &str = "gt.labels.bin";
pub const SPEC_FILE: &str = "scene.json";
pub const FRAMES_DIR: &str = "frames";

#[derive(Debug, Clone)]
pub struct Scene {
    pub name: String,
    pub cloud: PointCloud,
    /// Ascending by id.
    pub frames: Vec<Frame>,
    pub gt: Option<GroundTruth>,
    /// Instance-id rasters by frame id (synthetic scenes only).
    pub rasters: BTreeMap<u32, InstanceRaster>,
}

impl Scene {
    /// Samples the cloud and renders every trajectory frame, in parallel
    /// across frames.
    pub fn synthesize(spec: &SceneSpec) -> Result<Self> {
        let (cloud, gt) = sample_cloud(spec).map_err(Error::config)?;
        let poses = spec.trajectory.poses().map_err(Error::config)?;
        let rendered: Vec<_> = poses
            .par_iter()
            .enumerate()
            .map(|(i, pose)| render_frame(spec, i as u32, pose, &spec.intrinsics))
            .collect::<std::result::Result<_, _>>()
            .map_err(Error::config)?;
        let mut frames = Vec::with_capacity(rendered.len());
        let mut rasters = BTreeMap::new();
        for r in rendered {
            rasters.insert(r.frame.id, r.instances);
            frames.push(r.frame);
        }
        Ok(Self {
            name: spec.name.clone(),
            cloud,
            frames,
            gt: Some(gt),
            rasters,
        })
    }

    /// Loads frames whose id is a multiple of `stride`.
    pub fn load(dir: &Path, stride: u32, depth_scale: f64) -> Result<Self> {
        let cloud = read_ply(&dir.join(CLOUD_FILE))?;
        let gt_path = dir.join(GT_FILE);
        let gt = if gt_path.exists() {
            let labels = read_labels(&gt_path)?;
            if labels.len() != cloud.len() {
                return Err(Error::data(format!(
                    "{}: {} labels for {} points",
                    gt_path.display(),
                    labels.len(),
                    cloud.len()
                )));
            }
            Some(GroundTruth::new(labels))
        } else {
            None
        };
        let frames_dir = dir.join(FRAMES_DIR);
        let frames = load_frame_manifest(&frames_dir, stride, depth_scale)?;
        let mut rasters = BTreeMap::new();
        for f in &frames {
            let p = frames_dir.join(format!("{}.inst.bin", f.id));
            if p.exists() {
                rasters.insert(f.id, read_raster(&p)?);
            }
        }
        let name = dir
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("scene")
            .to_string();
        Ok(Self {
            name,
            cloud,
            frames,
            gt,
            rasters,
        })
    }

    /// Keeps frames whose id is a multiple of `stride`.
    pub fn with_stride(&self, stride: u32) -> Self {
        let keep = |id: u32| id.is_multiple_of(stride.max(1));
        Self {
            name: self.name.clone(),
            cloud: self.cloud.clone(),
            frames: self.frames.iter().filter(|f| keep(f.id)).cloned().collect(),
            gt: self.gt.clone(),
            rasters: self
                .rasters
                .iter()
                .filter(|(id, _)| keep(**id))
                .map(|(id, r)| (*id, r.clone()))
                .collect(),
        }
    }

    /// Oracle answering from this scene's instance rasters. Ground-truth
    /// labels, when present, let it skip prompts that land on another
    /// instance's silhouette.
    pub fn oracle(&self, noise: NoiseSpec) -> Result<SyntheticOracle> {
        if let Some(f) = self
            .frames
            .iter()
            .find(|f| !self.rasters.contains_key(&f.id))
        {
            return Err(Error::Provider(format!(
                "frame {} has no instance raster",
                f.id
            )));
        }
        let labels = self.gt.as_ref().map(|g| g.labels().to_vec());
        Ok(SyntheticOracle::new(self.rasters.clone(), labels, noise))
    }

    /// Writes the scene directory.
    pub fn write(&self, dir: &Path, spec: Option<&SceneSpec>, depth_scale: f64) -> Result<()> {
        let frames_dir = dir.join(FRAMES_DIR);
        fs::create_dir_all(&frames_dir).at(&frames_dir)?;
        write_ply(
            &dir.join(CLOUD_FILE),
            &self.cloud,
            PlyFormat::BinaryLittleEndian,
        )?;
        if let Some(gt) = &self.gt {
            write_labels(&dir.join(GT_FILE), gt.labels())?;
        }
        if let Some(spec) = spec {
            let p = dir.join(SPEC_FILE);
            let text = serde_json::to_string_pretty(spec).map_err(Error::data)?;
            fs::write(&p, text + "\n").at(&p)?;
        }
        if let Some(f) = self.frames.first() {
            write_intrinsics(&frames_dir.join(INTRINSICS_FILE), &f.intrinsics)?;
        }
        self.frames.par_iter().try_for_each(|f| -> Result<()> {
            write_frame(&frames_dir, f, depth_scale)?;
            if let Some(r) = self.rasters.get(&f.id) {
                write_raster(&frames_dir.join(format!("{}.inst.bin", f.id)), r)?;
            }
            Ok(())
        })
    }
}

/// Generates a synthetic scene and writes it to `out_dir`.
pub fn emit_dataset(spec: &SceneSpec, out_dir: &Path, depth_scale: f64) -> Result<Scene> {
    let scene = Scene::synthesize(spec)?;
    scene.write(out_dir, Some(spec), depth_scale)?;
    Ok(scene)
}

/// Reads a scene description from JSON.
pub fn read_scene_spec(path: &Path) -> Result<SceneSpec> {
    let text = fs::read_to_string(path).at(path)?;
    let spec: SceneSpec = serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    spec.validate()
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    Ok(spec)
}
