//! Synthetic mask provider backed by rendered instance-id rasters.
//!
//! Without noise, a prompt on instance `k` receives exactly the pixels whose
//! rendered id is `k`, with both scores at 100. [`NoiseSpec`] perturbs that
//! answer per record: boundary erosion or dilation, occasional spill into a
//! neighbouring instance, and score jitter. Jitter is drawn once per prompt
//! by default, so a prompt's confidence ranks consistently across views;
//! [`JitterScope::Record`] redraws it for every record.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::provider::{MaskProvider, PixelPrompt, ProviderError};
use super::raster::BinaryMask;
use super::record::MaskRecord;
use super::rle::Rle;
use crate::camera::Frame;
use crate::synthetic::{InstanceRaster, NO_INSTANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JitterScope {
    /// One draw per prompt, shared by all its records.
    #[default]
    Prompt,
    /// One draw per (frame, prompt) record.
    Record,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Erosion/dilation radius in pixels.
    pub radius: u32,
    /// Half-width of the uniform predicted-IoU jitter, in score points.
    pub jitter: f32,
    /// Probability that a record spills into one adjacent instance.
    pub spill_prob: f64,
    pub seed: u64,
    #[serde(default)]
    pub jitter_scope: JitterScope,
}

impl NoiseSpec {
    pub fn is_noise_free(&self) -> bool {
        self.radius == 0 && self.jitter == 0.0 && self.spill_prob == 0.0
    }
}

/// Random decisions for one (frame, prompt) record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseDraw {
    pub erode: bool,
    pub spill_roll: f64,
    pub neighbour_pick: u64,
    pub jitter_unit: f64,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Jitter unit of `prompt_id` under [`JitterScope::Prompt`], from a ChaCha8
/// stream seeded with `mix64(seed ^ mix64(prompt_id) ^ PROMPT_STREAM)`.
pub fn prompt_jitter_unit(seed: u64, prompt_id: u32) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(prompt_id as u64) ^ PROMPT_STREAM));
    rng.gen::<f64>()
}

const PROMPT_STREAM: u64 = 0x5052_4F4D_5054_0001;

/// Each record draws from its own ChaCha8 stream seeded with
/// `mix64(seed ^ mix64(frame_id << 32 | prompt_id))`, in the order: erode
/// coin, spill roll, neighbour pick, jitter. Results are therefore
/// independent of prompt order and thread count.
pub fn noise_draw(seed: u64, frame_id: u32, prompt_id: u32) -> NoiseDraw {
    let key = ((frame_id as u64) << 32) | prompt_id as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(key)));
    NoiseDraw {
        erode: rng.gen::<f64>() < 0.5,
        spill_roll: rng.gen::<f64>(),
        neighbour_pick: rng.gen::<u64>(),
        jitter_unit: rng.gen::<f64>(),
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticOracle {
    rasters: BTreeMap<u32, InstanceRaster>,
    point_labels: Option<Vec<u32>>,
    noise: NoiseSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Variant {
    Exact,
    Eroded,
    Dilated,
    Spill(u32),
}

impl SyntheticOracle {
    /// `point_labels`, when given, holds each cloud point's true instance.
    /// Prompts whose pixel shows a different instance than their own point
    /// (silhouette straddlers) are then left unanswered.
    pub fn new(
        rasters: BTreeMap<u32, InstanceRaster>,
        point_labels: Option<Vec<u32>>,
        noise: NoiseSpec,
    ) -> Self {
        Self {
            rasters,
            point_labels,
            noise,
        }
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn raster(&self, frame_id: u32) -> Option<&InstanceRaster> {
        self.rasters.get(&frame_id)
    }

    /// Resamples every raster (nearest neighbour) to `width`×`height`.
    pub fn resized(&self, width: u32, height: u32) -> Self {
        Self {
            rasters: self
                .rasters
                .iter()
                .map(|(&id, r)| (id, r.resized(width, height)))
                .collect(),
            point_labels: self.point_labels.clone(),
            noise: self.noise,
        }
    }
}

struct FrameCache<'a> {
    raster: &'a InstanceRaster,
    base: BTreeMap<u32, BinaryMask>,
    encoded: BTreeMap<(u32, Variant), Option<(Rle, f64)>>,
    adjacency: Option<BTreeMap<u32, Vec<u32>>>,
}

impl<'a> FrameCache<'a> {
    fn base(&mut self, inst: u32) -> &BinaryMask {
        let raster = self.raster;
        self.base.entry(inst).or_insert_with(|| {
            BinaryMask::from_bits(
                raster.width(),
                raster.height(),
                raster.ids().iter().map(|&i| i == inst).collect(),
            )
        })
    }

    fn neighbours(&mut self, inst: u32) -> &[u32] {
        let raster = self.raster;
        let adj = self.adjacency.get_or_insert_with(|| raster.adjacency());
        adj.get(&inst).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Encoded mask and its IoU against the exact instance mask.
    fn variant(&mut self, inst: u32, variant: Variant, radius: u32) -> Option<(Rle, f64)> {
        if let Some(hit) = self.encoded.get(&(inst, variant)) {
            return hit.clone();
        }
        let exact = self.base(inst).clone();
        let mask = match variant {
            Variant::Exact => exact.clone(),
            Variant::Eroded => exact.eroded(radius),
            Variant::Dilated => exact.dilated(radius),
            Variant::Spill(other) => exact.union(self.base(other)),
        };
        let result = if mask.count() == 0 {
            None
        } else {
            let a = Rle::encode(&mask);
            let b = Rle::encode(&exact);
            let iou = a.iou(&b);
            Some((a, iou))
        };
        self.encoded.insert((inst, variant), result.clone());
        result
    }
}

impl MaskProvider for SyntheticOracle {
    fn name(&self) -> &str {
        if self.noise.is_noise_free() {
            "oracle"
        } else {
            "oracle-noisy"
        }
    }

    fn predict_masks(
        &self,
        frame: &Frame,
        prompts: &[PixelPrompt],
    ) -> Result<Vec<MaskRecord>, ProviderError> {
        let raster = self.rasters.get(&frame.id).ok_or_else(|| {
            ProviderError::ProviderUnavailable(alloc::format!(
                "no instance raster for frame {}",
                frame.id
            ))
        })?;
        if raster.width() != frame.width() || raster.height() != frame.height() {
            return Err(ProviderError::ProviderUnavailable(alloc::format!(
                "instance raster for frame {} is {}x{}, frame is {}x{}",
                frame.id,
                raster.width(),
                raster.height(),
                frame.width(),
                frame.height()
            )));
        }
        let mut cache = FrameCache {
            raster,
            base: BTreeMap::new(),
            encoded: BTreeMap::new(),
            adjacency: None,
        };
        let noisy = !self.noise.is_noise_free();
        let mut out = Vec::new();
        for p in prompts {
            let proj = &p.projection;
            if !proj.valid || proj.frame_id != frame.id {
                continue;
            }
            let (u, v) = (proj.u as u32, proj.v as u32);
            let inst = raster.get(u, v);
            if inst == NO_INSTANCE {
                continue;
            }
            if let Some(labels) = &self.point_labels {
                if labels.get(proj.point_index as usize) != Some(&inst) {
                    continue;
                }
            }
            let (variant, jitter) = if noisy {
                let d = noise_draw(self.noise.seed, frame.id, p.prompt_id);
                let neighbours = cache.neighbours(inst);
                let variant = if d.spill_roll < self.noise.spill_prob && !neighbours.is_empty() {
                    Variant::Spill(
                        neighbours[(d.neighbour_pick % neighbours.len() as u64) as usize],
                    )
                } else if self.noise.radius == 0 {
                    Variant::Exact
                } else if d.erode {
                    Variant::Eroded
                } else {
                    Variant::Dilated
                };
                let unit = match self.noise.jitter_scope {
                    JitterScope::Prompt => prompt_jitter_unit(self.noise.seed, p.prompt_id),
                    JitterScope::Record => d.jitter_unit,
                };
                (variant, (2.0 * unit - 1.0) * self.noise.jitter as f64)
            } else {
                (Variant::Exact, 0.0)
            };
            let Some((mask, iou)) = cache.variant(inst, variant, self.noise.radius) else {
                continue;
            };
            if !mask.contains(u, v) {
                continue;
            }
            let predicted = (100.0 * iou + jitter).clamp(0.0, 100.0) as f32;
            if let Ok(r) = MaskRecord::new(frame.id, p.prompt_id, mask, predicted, 100.0) {
                out.push(r);
            }
        }
        Ok(out)
    }
}
