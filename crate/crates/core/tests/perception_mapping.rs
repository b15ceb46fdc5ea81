mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use fronsim::mapping::{angular_confidence, cluster_frontiers, fuse, BeliefMap, Knowledge, ValueCell, ValueMap};
use fronsim::perception::{
    compute_semantic_field, detect, score_semantic, segment_nearest_point, verify, vram_sum, Accuracy,
    DetectionResult, SegmenterAccuracy, VerifierAccuracy,
};
use fronsim::rng::{stream, Stream};
use fronsim::sensing::{sense, AgentPose, Heading, ObjectHit, Observation, SensorConfig};
use fronsim::world::{generate_scene, CellTruth, SceneParams};
use fronsim::Cell;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn goal_view() -> Observation {
    let cells: BTreeSet<Cell> = [(5, 3), (5, 4)].map(|(x, y)| Cell::new(x, y)).into();
    let mut visible: BTreeMap<Cell, CellTruth> = (1..8)
        .flat_map(|x| (1..8).map(move |y| (Cell::new(x, y), CellTruth::Free)))
        .collect();
    visible.insert(Cell::new(0, 0), CellTruth::Obstacle);
    Observation {
        visible,
        depth: vec![],
        object_hits: vec![ObjectHit {
            object_id: 1,
            category: "chair".into(),
            visible_cells: cells,
            nearest_distance: 2.0,
        }],
    }
}

/// Box-Muller draws from an independent generator.
fn clamped_gaussian_mean(m: f64, sigma: f64, n: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(987);
    let mut total = 0.0;
    for _ in 0..n {
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random();
        let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        total += (m + sigma * z).clamp(0.0, 1.0);
    }
    total / n as f64
}

#[test]
fn scorer_mean_matches_clamped_gaussian() {
    let scene = generate_scene(4, &SceneParams::default()).unwrap();
    let goal = scene.categories()[0].clone();
    let field = compute_semantic_field(&scene, &goal, 16.0, 4).unwrap();
    let start = scene.free_cells().nth(40).unwrap();
    let obs = sense(
        &scene,
        AgentPose::new(start, Heading::EAST),
        &SensorConfig::default(),
        &mut stream(0, Stream::Sensor),
    );
    let m = obs.visible_free().map(|c| field.value(c)).fold(0.0, f64::max);
    let profile = profile("CLIP-ViT-B32");
    assert_eq!(profile.scorer().noise_sigma, 0.1);
    let mut rng = stream(3, Stream::Scorer);
    let mean = (0..10_000).map(|_| score_semantic(&profile, &obs, &field, &mut rng)).sum::<f64>() / 10_000.0;
    let oracle = clamped_gaussian_mean(m, 0.1, 400_000);
    assert!((mean - oracle).abs() <= 0.005, "mean {mean} oracle {oracle} (m={m})");
}

#[test]
fn detection_rate_is_p_tp() {
    let obs = goal_view();
    let det = profile("YOLOv7-E6E").with_detector(0.5, 0.0);
    let mut rng = stream(1, Stream::Detector);
    let hits = (0..10_000)
        .filter(|_| detect(&det, &obs, "chair", &mut rng).is_some_and(|d| d.is_true_positive))
        .count();
    let rate = hits as f64 / 10_000.0;
    assert!((rate - 0.5).abs() <= 0.01, "{rate}");
}

#[test]
fn detections_stay_inside_the_observation() {
    let mut obs = goal_view();
    obs.object_hits.push(ObjectHit {
        object_id: 0,
        category: "bed".into(),
        visible_cells: BTreeSet::from([Cell::new(2, 2)]),
        nearest_distance: 1.0,
    });
    let det = profile("YOLOv7").with_detector(0.9, 0.5);
    let mut rng = stream(2, Stream::Detector);
    for goal in ["chair", "sofa"] {
        for _ in 0..500 {
            if let Some(d) = detect(&det, &obs, goal, &mut rng) {
                assert!(!d.observed_cells.is_empty());
                assert!(d.observed_cells.iter().all(|c| obs.visible.contains_key(c)));
                assert_eq!(d.category, goal);
                assert_eq!(d.is_true_positive, d.object_id.is_some());
            }
        }
    }
}

#[test]
fn segmenter_error_is_bounded() {
    let obs = goal_view();
    let det = DetectionResult {
        object_id: Some(1),
        category: "chair".into(),
        observed_cells: obs.object_hits[0].visible_cells.clone(),
        is_true_positive: true,
    };
    let pose = AgentPose::new(Cell::new(3, 3), Heading::EAST);
    let nearest = Cell::new(5, 3);
    let mut seg = profile("MobileSAM");
    seg.accuracy = Accuracy::Segmenter(SegmenterAccuracy { point_error_cells: 2 });
    let mut rng = stream(4, Stream::Segmenter);
    let mut moved = 0;
    for _ in 0..1000 {
        let p = segment_nearest_point(&seg, &det, &obs, pose, &mut rng);
        assert!(p.chebyshev(nearest) <= 2, "{p}");
        assert!(obs.visible.contains_key(&p));
        moved += usize::from(p != nearest);
    }
    assert!(moved > 0);
    seg.accuracy = Accuracy::Segmenter(SegmenterAccuracy { point_error_cells: 0 });
    assert_eq!(segment_nearest_point(&seg, &det, &obs, pose, &mut rng), nearest);
}

#[test]
fn verifier_rejection_rate() {
    let mut ver = profile("nanoLLaVA");
    ver.accuracy = Accuracy::Verifier(VerifierAccuracy {
        p_accept_true: 0.95,
        p_reject_false: 0.8,
    });
    let fp = DetectionResult {
        object_id: None,
        category: "chair".into(),
        observed_cells: BTreeSet::from([Cell::new(1, 1)]),
        is_true_positive: false,
    };
    let mut rng = stream(5, Stream::Verifier);
    let rejected = (0..10_000).filter(|_| !verify(&ver, &fp, &mut rng)).count();
    let rate = rejected as f64 / 10_000.0;
    assert!((rate - 0.8).abs() <= 0.01, "{rate}");
}

#[test]
fn semantic_field_follows_bfs_layers() {
    for seed in 0..20 {
        let scene = generate_scene(seed, &SceneParams::default()).unwrap();
        let goal = &scene.categories()[seed as usize % scene.categories().len()];
        let field = compute_semantic_field(&scene, goal, 16.0, 4).unwrap();
        let success = scene.success_cells(goal, 4).unwrap();
        // multi-source BFS oracle
        let mut best: BTreeMap<(i32, i32), u32> = BTreeMap::new();
        for s in &success {
            for (k, d) in bfs(&scene, (s.x, s.y)) {
                let e = best.entry(k).or_insert(d);
                *e = (*e).min(d);
            }
        }
        for (c, &v) in field.values.iter() {
            match best.get(&(c.x, c.y)) {
                Some(0) => assert_eq!(v, 1.0),
                Some(&d) => assert!((v - (-(d as f64) / 16.0).exp()).abs() < 1e-12),
                None => assert_eq!(v, 0.0),
            }
        }
        let mut layers: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for (k, d) in &best {
            layers.entry(*d).or_default().push(field.value(Cell::new(k.0, k.1)));
        }
        let maxes: Vec<f64> = layers.values().map(|v| v.iter().copied().fold(0.0, f64::max)).collect();
        assert!(maxes.windows(2).all(|w| w[1] < w[0]));
    }
}

#[test]
fn vram_sum_is_permutation_invariant() {
    let names = ["BLIP-2", "YOLOv7-E6E", "MobileSAM", "nanoLLaVA"];
    let profiles: Vec<_> = names.iter().map(|n| profile(n)).collect();
    let total = vram_sum(&profiles);
    assert_eq!(total, 12496);
    let mut idx = [0, 1, 2, 3];
    for _ in 0..24 {
        // cycle through permutations by repeated adjacent swaps
        idx.swap(0, 1);
        idx.rotate_left(1);
        assert_eq!(vram_sum(idx.iter().map(|&i| &profiles[i])), total);
    }
    assert_eq!(vram_sum([&profiles[0], &profiles[1]]) + vram_sum([&profiles[2], &profiles[3]]), total);
}

#[test]
fn sweep_reveals_ground_truth() {
    let scene = generate_scene(21, &SceneParams::default()).unwrap();
    let cfg = SensorConfig {
        fov: 360.0,
        range: 40.0,
        rays: 8,
    };
    let mut belief = BeliefMap::unknown(scene.width(), scene.height());
    for c in scene.free_cells().collect::<Vec<_>>() {
        belief.integrate_observation(&sense(&scene, AgentPose::new(c, Heading::EAST), &cfg, &mut stream(0, Stream::Sensor)));
    }
    for (c, &k) in belief.grid().iter() {
        let t = scene.truth_at(c);
        match k {
            Knowledge::Unknown => assert_eq!(t, CellTruth::Obstacle, "free cell {c} never seen"),
            k => assert_eq!(k, Knowledge::from(t)),
        }
    }
    // every obstacle adjacent to free space was seen
    for c in scene.free_cells() {
        for n in c.neighbors4() {
            assert_ne!(belief.get(n), Knowledge::Unknown);
        }
    }
}

#[test]
fn two_components_two_waypoints() {
    let mut b = BeliefMap::unknown(12, 6);
    for x in 1..4 {
        b.set(Cell::new(x, 1), Knowledge::Free);
    }
    for x in 6..11 {
        b.set(Cell::new(x, 4), Knowledge::Free);
    }
    let f = b.extract_frontiers();
    assert_eq!(f.len(), 8);
    let set = cluster_frontiers(&f, &ValueMap::new(12, 6));
    let mut sizes: Vec<usize> = set.waypoints.iter().map(|w| w.cluster_size).collect();
    sizes.sort();
    assert_eq!(sizes, vec![3, 5]);
    let cells: BTreeSet<Cell> = set.waypoints.iter().map(|w| w.cell).collect();
    assert_eq!(cells, BTreeSet::from([Cell::new(2, 1), Cell::new(8, 4)]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn frontier_clusters_partition_and_sort(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let belief = random_belief(&mut rng, 20, 20);
        let mut vmap = ValueMap::new(20, 20);
        let obs = Observation {
            visible: belief.grid().cells().filter(|_| rng.random_bool(0.3)).map(|c| (c, CellTruth::Free)).collect(),
            ..Observation::default()
        };
        vmap.update(&obs, rng.random(), AgentPose::new(Cell::new(10, 10), Heading::NORTH), &SensorConfig::default());
        let frontier = belief.extract_frontiers();
        prop_assert_eq!(&frontier, &frontier_scan(&belief));
        let set = cluster_frontiers(&frontier, &vmap);
        prop_assert_eq!(set.waypoints.iter().map(|w| w.cluster_size).sum::<usize>(), frontier.len());
        for w in &set.waypoints {
            prop_assert!(frontier.contains(&w.cell));
            prop_assert!((0.0..=1.0).contains(&w.value));
        }
        for pair in set.waypoints.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            prop_assert!(a.value > b.value || (a.value == b.value && a.cell.yx() < b.cell.yx()));
        }
    }

    #[test]
    fn belief_only_learns(seed in any::<u64>()) {
        let scene = generate_scene(seed % 500, &SceneParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let free: Vec<Cell> = scene.free_cells().collect();
        let mut belief = BeliefMap::unknown(scene.width(), scene.height());
        for _ in 0..10 {
            let before = belief.clone();
            let pose = AgentPose::new(free[rng.random_range(0..free.len())], Heading::from_index(rng.random_range(0..8)));
            belief.integrate_observation(&sense(&scene, pose, &SensorConfig::default(), &mut stream(0, Stream::Sensor)));
            for (c, &k) in belief.grid().iter() {
                let old = before.get(c);
                prop_assert!(old == Knowledge::Unknown || old == k);
                if k != Knowledge::Unknown {
                    prop_assert_eq!(k, Knowledge::from(scene.truth_at(c)));
                }
            }
        }
    }

    #[test]
    fn fused_value_stays_within_scores(readings in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..30)) {
        let mut cell = ValueCell::default();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (score, c) in readings {
            cell = fuse(cell, score, c);
            if c > 0.0 {
                lo = lo.min(score);
                hi = hi.max(score);
            }
            prop_assert!((0.0..=1.0).contains(&cell.confidence));
            prop_assert_eq!(cell.confidence == 0.0, lo.is_infinite());
            if !lo.is_infinite() {
                prop_assert!(cell.value >= lo - 1e-12 && cell.value <= hi + 1e-12);
            }
        }
    }

    // Only from an unscored cell: with a prior reading the pairwise rule
    // weighs the second observation against the updated confidence.
    #[test]
    fn fusion_is_order_symmetric_at_equal_confidence(s1 in 0.0f64..=1.0, s2 in 0.0f64..=1.0, c in 0.0f64..=1.0) {
        let old = ValueCell::default();
        let a = fuse(fuse(old, s1, c), s2, c);
        let b = fuse(fuse(old, s2, c), s1, c);
        prop_assert!((a.value - b.value).abs() < 1e-9);
        prop_assert!((a.confidence - b.confidence).abs() < 1e-9);
        if c > 0.0 {
            prop_assert!((a.value - (s1 + s2) / 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn angular_confidence_bounds(offset in -180.0f64..=180.0, fov in 1.0f64..=360.0) {
        let c = angular_confidence(offset, fov);
        prop_assert!((0.0..=1.0).contains(&c));
        if offset.abs() >= fov / 2.0 {
            prop_assert!(c < 1e-12);
        }
        prop_assert_eq!(angular_confidence(0.0, fov), 1.0);
    }
}
