//! The synthetic mask oracle: exactness without noise and a replay of every
//! noisy record from its published random draws.

use std::collections::BTreeMap;

use pointprompt_core::camera::Frame;
use pointprompt_core::mask::{
    noise_draw, prompt_jitter_unit, BinaryMask, JitterScope, MaskProvider, MaskRecord, NoiseSpec,
    PixelPrompt, Rle, SyntheticOracle,
};
use pointprompt_core::projection::{project_batch, DEFAULT_OCCLUSION_TOL};
use pointprompt_core::synthetic::{
    fixtures, render_sequence, sample_cloud, InstanceRaster, NO_INSTANCE,
};

struct Fixture {
    frames: Vec<Frame>,
    rasters: BTreeMap<u32, InstanceRaster>,
    labels: Vec<u32>,
    prompts: Vec<Vec<PixelPrompt>>,
}

/// Every 25th cloud point as a prompt, projected into four room frames.
fn fixture() -> Fixture {
    let spec = fixtures::room8().with_frames(4);
    let (cloud, gt) = sample_cloud(&spec).unwrap();
    let rendered = render_sequence(&spec).unwrap();
    let indices: Vec<u32> = (0..cloud.len() as u32).step_by(25).collect();
    let prompts = rendered
        .iter()
        .map(|r| {
            project_batch(&indices, &cloud, &r.frame, DEFAULT_OCCLUSION_TOL)
                .unwrap()
                .into_iter()
                .enumerate()
                .filter(|(_, p)| p.valid)
                .map(|(id, p)| PixelPrompt {
                    prompt_id: id as u32,
                    projection: p,
                })
                .collect()
        })
        .collect();
    Fixture {
        frames: rendered.iter().map(|r| r.frame.clone()).collect(),
        rasters: rendered
            .iter()
            .map(|r| (r.frame.id, r.instances.clone()))
            .collect(),
        labels: gt.labels().to_vec(),
        prompts,
    }
}

fn instance_mask(raster: &InstanceRaster, inst: u32) -> BinaryMask {
    BinaryMask::from_bits(
        raster.width(),
        raster.height(),
        raster.ids().iter().map(|&i| i == inst).collect(),
    )
}

fn run(fx: &Fixture, noise: NoiseSpec) -> Vec<Vec<MaskRecord>> {
    let oracle = SyntheticOracle::new(fx.rasters.clone(), Some(fx.labels.clone()), noise);
    fx.frames
        .iter()
        .zip(&fx.prompts)
        .map(|(f, p)| oracle.predict_masks(f, p).unwrap())
        .collect()
}

#[test]
fn noise_free_masks_union_to_each_instance() {
    let fx = fixture();
    let all = run(&fx, NoiseSpec::default());
    for ((frame, records), prompts) in fx.frames.iter().zip(&all).zip(&fx.prompts) {
        let raster = &fx.rasters[&frame.id];
        let pixel: BTreeMap<u32, (u32, u32)> = prompts
            .iter()
            .map(|p| (p.prompt_id, (p.projection.u as u32, p.projection.v as u32)))
            .collect();
        let mut union: BTreeMap<u32, BinaryMask> = BTreeMap::new();
        for r in records {
            assert_eq!((r.predicted_iou, r.stability), (100.0, 100.0));
            let (u, v) = pixel[&r.prompt_id];
            let inst = raster.get(u, v);
            assert_ne!(inst, NO_INSTANCE);
            let acc = union
                .entry(inst)
                .or_insert_with(|| BinaryMask::new(raster.width(), raster.height()));
            *acc = acc.union(&r.mask.decode());
        }
        assert!(
            union.len() >= 5,
            "frame {} covers {} instances",
            frame.id,
            union.len()
        );
        for (inst, mask) in &union {
            assert_eq!(
                mask,
                &instance_mask(raster, *inst),
                "frame {} instance {inst}",
                frame.id
            );
        }
    }
}

#[test]
fn zero_noise_with_any_seed_matches_the_perfect_oracle() {
    let fx = fixture();
    let noise = NoiseSpec {
        seed: 987_654,
        jitter_scope: JitterScope::Record,
        ..NoiseSpec::default()
    };
    assert_eq!(run(&fx, noise), run(&fx, NoiseSpec::default()));
}

#[test]
fn noisy_records_replay_from_their_draws() {
    let fx = fixture();
    for (scope, spill_prob) in [(JitterScope::Prompt, 0.2), (JitterScope::Record, 0.3)] {
        let noise = NoiseSpec {
            radius: 1,
            jitter: 10.0,
            spill_prob,
            seed: 5,
            jitter_scope: scope,
        };
        let all = run(&fx, noise);
        let (mut spills, mut total) = (0usize, 0usize);
        for ((frame, records), prompts) in fx.frames.iter().zip(&all).zip(&fx.prompts) {
            let raster = &fx.rasters[&frame.id];
            let adjacency = raster.adjacency();
            let by_id: BTreeMap<u32, &MaskRecord> =
                records.iter().map(|r| (r.prompt_id, r)).collect();
            for p in prompts {
                let (u, v) = (p.projection.u as u32, p.projection.v as u32);
                let inst = raster.get(u, v);
                if inst == NO_INSTANCE || fx.labels[p.projection.point_index as usize] != inst {
                    assert!(!by_id.contains_key(&p.prompt_id));
                    continue;
                }
                let d = noise_draw(noise.seed, frame.id, p.prompt_id);
                let exact = instance_mask(raster, inst);
                let neighbours = adjacency.get(&inst).cloned().unwrap_or_default();
                let mask = if d.spill_roll < noise.spill_prob && !neighbours.is_empty() {
                    spills += 1;
                    let other = neighbours[(d.neighbour_pick % neighbours.len() as u64) as usize];
                    exact.union(&instance_mask(raster, other))
                } else if d.erode {
                    exact.eroded(1)
                } else {
                    exact.dilated(1)
                };
                let Some(r) = by_id.get(&p.prompt_id) else {
                    // Only a mask that lost the prompt pixel goes unanswered.
                    assert!(!mask.get(u, v), "frame {} prompt {}", frame.id, p.prompt_id);
                    continue;
                };
                total += 1;
                assert_eq!(r.mask.decode(), mask);
                let unit = match scope {
                    JitterScope::Prompt => prompt_jitter_unit(noise.seed, p.prompt_id),
                    JitterScope::Record => d.jitter_unit,
                };
                let iou = Rle::encode(&mask).iou(&Rle::encode(&exact));
                let expected = (100.0 * iou + (2.0 * unit - 1.0) * 10.0).clamp(0.0, 100.0) as f32;
                assert_eq!(r.predicted_iou, expected);
                assert_eq!(r.stability, 100.0);
            }
        }
        assert!(total > 500);
        // The observed spill rate tracks the spill probability.
        let rate = spills as f64 / total as f64;
        assert!((rate - spill_prob).abs() < 0.1, "spill rate {rate} for p {spill_prob}");
    }
}

#[test]
fn answers_do_not_depend_on_prompt_order() {
    let fx = fixture();
    let noise = NoiseSpec {
        radius: 1,
        jitter: 10.0,
        spill_prob: 0.2,
        seed: 3,
        jitter_scope: JitterScope::Record,
    };
    let oracle = SyntheticOracle::new(fx.rasters.clone(), Some(fx.labels.clone()), noise);
    for (frame, prompts) in fx.frames.iter().zip(&fx.prompts) {
        let mut reversed = prompts.clone();
        reversed.reverse();
        let mut a = oracle.predict_masks(frame, prompts).unwrap();
        let mut b = oracle.predict_masks(frame, &reversed).unwrap();
        a.sort_by_key(|r| r.prompt_id);
        b.sort_by_key(|r| r.prompt_id);
        assert_eq!(a, b);
    }
}

#[test]
fn missing_raster_is_reported() {
    let fx = fixture();
    let oracle = SyntheticOracle::new(BTreeMap::new(), None, NoiseSpec::default());
    assert!(oracle.predict_masks(&fx.frames[0], &fx.prompts[0]).is_err());
}
