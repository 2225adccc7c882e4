//! Consolidation against brute-force references, plus masked surfaces built
//! from oracle masks on a rendered scene.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use pointprompt_core::archive::MaskArchive;
use pointprompt_core::consolidation::{
    build_overlap_graph, compute_masked_surface, compute_masked_surfaces, consolidate,
    MaskedSurface,
};
use pointprompt_core::mask::{MaskProvider, NoiseSpec, PixelPrompt, SyntheticOracle};
use pointprompt_core::projection::{
    project_batch, FrameVisibility, DEFAULT_OCCLUSION_TOL, NOT_VISIBLE,
};
use pointprompt_core::sampling::farthest_point_sample;
use pointprompt_core::synthetic::{fixtures, render_sequence, sample_cloud};
use proptest::prelude::*;

fn bfs_components(ids: &[u32], edges: &[(u32, u32)]) -> Vec<BTreeSet<u32>> {
    let mut adj: BTreeMap<u32, Vec<u32>> = ids.iter().map(|&i| (i, Vec::new())).collect();
    for &(a, b) in edges {
        adj.get_mut(&a).unwrap().push(b);
        adj.get_mut(&b).unwrap().push(a);
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &start in adj.keys() {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(n) = queue.pop_front() {
            for &m in &adj[&n] {
                if seen.insert(m) {
                    comp.insert(m);
                    queue.push_back(m);
                }
            }
        }
        out.push(comp);
    }
    out
}

fn graph() -> impl Strategy<Value = (Vec<u32>, Vec<(u32, u32)>)> {
    proptest::collection::btree_set(0u32..200, 1..40).prop_flat_map(|ids| {
        let ids: Vec<u32> = ids.into_iter().collect();
        let n = ids.len();
        let pick = ids.clone();
        (
            Just(ids),
            proptest::collection::vec((0..n, 0..n), 0..60).prop_map(move |e| {
                e.into_iter()
                    .map(|(a, b)| (pick[a], pick[b]))
                    .collect::<Vec<_>>()
            }),
        )
    })
}

fn surfaces() -> impl Strategy<Value = Vec<MaskedSurface>> {
    proptest::collection::vec(proptest::collection::btree_set(0u32..60, 0..30), 1..10).prop_map(
        |sets| {
            sets.into_iter()
                .enumerate()
                .map(|(i, s)| MaskedSurface {
                    prompt_id: i as u32 * 3,
                    support: vec![1; s.len()],
                    point_indices: s.into_iter().collect(),
                })
                .collect()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn components_match_breadth_first_search((ids, edges) in graph()) {
        let map = consolidate(&edges, &ids).unwrap();
        let expected = bfs_components(&ids, &edges);
        let groups: Vec<BTreeSet<u32>> = map.groups().into_values().map(|g| g.into_iter().collect()).collect();
        let mut a = groups.clone();
        let mut b = expected.clone();
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
        for comp in &expected {
            let min = *comp.iter().next().unwrap();
            for &id in comp {
                let root = map.root(id).unwrap();
                prop_assert_eq!(root, min);
                prop_assert_eq!(map.root(root), Some(root));
            }
        }
    }

    #[test]
    fn overlap_edges_match_pairwise_check(s in surfaces(), tau in 0.0f64..1.0) {
        let mut expected = Vec::new();
        for (i, a) in s.iter().enumerate() {
            for b in &s[i + 1..] {
                let sa: BTreeSet<u32> = a.point_indices.iter().copied().collect();
                let inter = b.point_indices.iter().filter(|p| sa.contains(p)).count();
                let small = a.len().min(b.len());
                if inter >= 1 && inter as f64 / small as f64 >= tau {
                    expected.push((a.prompt_id.min(b.prompt_id), a.prompt_id.max(b.prompt_id)));
                }
            }
        }
        expected.sort_unstable();
        let mut got = build_overlap_graph(&s, tau);
        got.sort_unstable();
        prop_assert_eq!(got, expected);
    }
}

#[test]
fn unknown_edge_endpoint_is_an_error() {
    assert!(consolidate(&[(1, 9)], &[1, 2]).is_err());
}

#[test]
fn oracle_surfaces_are_visible_instance_points() {
    let spec = fixtures::room8().with_frames(6);
    let (cloud, gt) = sample_cloud(&spec).unwrap();
    let rendered = render_sequence(&spec).unwrap();
    let rasters = rendered
        .iter()
        .map(|r| (r.frame.id, r.instances.clone()))
        .collect();
    let oracle = SyntheticOracle::new(rasters, Some(gt.labels().to_vec()), NoiseSpec::default());
    let prompts = farthest_point_sample(&cloud, 60, 3).unwrap();
    let (w, h) = (spec.intrinsics.width, spec.intrinsics.height);
    let mut archive = MaskArchive::new(w, h, prompts.len() as u32);
    let mut vis = Vec::new();
    for r in &rendered {
        let projs =
            project_batch(prompts.indices(), &cloud, &r.frame, DEFAULT_OCCLUSION_TOL).unwrap();
        let pix: Vec<PixelPrompt> = projs
            .iter()
            .enumerate()
            .filter(|(_, p)| p.valid)
            .map(|(id, p)| PixelPrompt {
                prompt_id: id as u32,
                projection: *p,
            })
            .collect();
        archive.insert_frame(r.frame.id, oracle.predict_masks(&r.frame, &pix).unwrap());
        vis.push(FrameVisibility::compute(
            &cloud,
            &r.frame,
            DEFAULT_OCCLUSION_TOL,
        ));
    }
    let frames: Vec<_> = rendered.iter().map(|r| r.frame.clone()).collect();
    let ids: Vec<u32> = (0..prompts.len() as u32).collect();
    let labels = gt.labels();
    let mut checked = 0;
    for min_support in [1u32, 2, 3] {
        let fast = compute_masked_surfaces(&ids, &vis, &archive, min_support);
        for (id, surf) in ids.iter().zip(&fast) {
            let direct = compute_masked_surface(
                *id,
                &frames,
                &archive,
                &cloud,
                DEFAULT_OCCLUSION_TOL,
                min_support,
            );
            assert_eq!(surf, &direct, "prompt {id} at min_support {min_support}");
            let inst = labels[prompts.point_of(*id) as usize];
            let frames_with_record: Vec<usize> = (0..vis.len())
                .filter(|&f| archive.record(vis[f].frame_id, *id).is_some())
                .collect();
            // Exact: the instance raster under each visible point decides.
            let in_mask_frames = |i: usize| {
                frames_with_record
                    .iter()
                    .filter(|&&f| {
                        let px = vis[f].pixel_of(i);
                        px != NOT_VISIBLE && rendered[f].instances.ids()[px as usize] == inst
                    })
                    .count() as u32
            };
            let expected: Vec<u32> = (0..cloud.len())
                .filter(|&i| in_mask_frames(i) >= min_support)
                .map(|i| i as u32)
                .collect();
            assert_eq!(
                surf.point_indices, expected,
                "prompt {id} on instance {inst}"
            );
            // Against ground-truth labels the surface differs only on contact
            // seams, where a neighbour lies within the depth tolerance.
            let visible_of_inst = (0..cloud.len())
                .filter(|&i| labels[i] == inst)
                .filter(|&i| {
                    frames_with_record
                        .iter()
                        .filter(|&&f| vis[f].pixel_of(i) != NOT_VISIBLE)
                        .count() as u32
                        >= min_support
                })
                .count();
            let foreign = surf
                .point_indices
                .iter()
                .filter(|&&i| labels[i as usize] != inst)
                .count();
            let own = surf.len() - foreign;
            let off = foreign + (visible_of_inst - own);
            assert!(
                off as f64 <= 0.05 * visible_of_inst.max(1) as f64,
                "prompt {id}: {off} seam points of {visible_of_inst}"
            );
            if !surf.is_empty() {
                checked += 1;
            }
        }
        if min_support > 1 {
            let looser = compute_masked_surfaces(&ids, &vis, &archive, min_support - 1);
            for (tight, loose) in fast.iter().zip(&looser) {
                let l: BTreeSet<u32> = loose.point_indices.iter().copied().collect();
                assert!(tight.point_indices.iter().all(|p| l.contains(p)));
            }
        }
    }
    assert!(checked > 50);
}
