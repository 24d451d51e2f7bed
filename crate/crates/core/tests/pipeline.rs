//! Cross-module pipeline tests: rendered data in, instances and scores out.

use nalgebra::Vector3;

use artic_canon::clustering::segment_instances;
use artic_canon::dataset::{
    evaluate, generate, gt_segmentation, oracle_segment, Dataset, GenerateConfig, SegmentOptions,
};
use artic_canon::kinematics::{gt_offsets, ArticulatedModel, JointConfig, TargetMode};
use artic_canon::metrics::{s_assoc, ClassAveraging, MetricAccumulator};
use artic_canon::scenegen::{
    build_template, bounding_radius, SemanticClass, Subset, TemplateKind,
};
use artic_canon::sensing::{
    backproject, camera_positions, fuse_and_sample, render_posed, Intrinsics, PointCloudFrame,
    PosedModel, SequenceSample,
};

/// Renders the model at each state from a small camera sphere and fuses the
/// views down to `points` per frame.
fn render_sequence(
    model: &ArticulatedModel,
    states: &[JointConfig],
    points: usize,
) -> SequenceSample {
    let radius = bounding_radius(model, states);
    let cams = camera_positions(
        2.5 * radius,
        18,
        Intrinsics::fit_sphere(96, 96, radius, 2.5 * radius),
    );
    let frames: Vec<PointCloudFrame> = states
        .iter()
        .enumerate()
        .map(|(s, q)| {
            let posed = PosedModel::new(model, q).unwrap();
            let views: Vec<PointCloudFrame> = cams
                .iter()
                .map(|c| backproject(&render_posed(&posed, c), c, s))
                .collect();
            fuse_and_sample(&views, points).unwrap()
        })
        .collect();
    SequenceSample { frames }
}

/// Per-part target points implied by an offset field: x + o collapses every
/// point of a part onto its target.
fn part_targets(sample: &SequenceSample, field: &artic_canon::losses::OffsetField) -> Vec<(u32, Vector3<f64>)> {
    let n = sample.points_per_frame();
    let mut seen = std::collections::BTreeMap::new();
    for (s, frame) in sample.frames.iter().enumerate() {
        for i in 0..n {
            if frame.semantic[i].is_things() {
                let target = frame.positions[i] + field.target[s * n + i];
                seen.entry(frame.instance[i]).or_insert(target);
            }
        }
    }
    seen.into_iter().collect()
}

fn linear_states(model: &ArticulatedModel) -> Vec<JointConfig> {
    (0..3)
        .map(|k| {
            JointConfig(
                model
                    .joints
                    .iter()
                    .map(|j| j.limits.0 + (j.limits.1 - j.limits.0) * k as f64 / 2.0)
                    .collect(),
            )
        })
        .collect()
}

/// Oracle canonical offsets on a two-door cabinet give exactly two pure
/// instances.
#[test]
fn two_door_oracle_gives_two_pure_instances() {
    let model = build_template(
        TemplateKind::CabinetTwoDoor,
        TemplateKind::CabinetTwoDoor.default_dims(),
        5,
    )
    .unwrap();
    let states = linear_states(&model);
    let sample = render_sequence(&model, &states, 768);
    let q_c = model.canonical_config();
    let field = gt_offsets(&sample, &model, &states, &q_c, TargetMode::Canonical).unwrap();

    let n = sample.points_per_frame();
    let positions: Vec<_> = sample
        .frames
        .iter()
        .flat_map(|f| f.positions.iter().copied())
        .collect();
    let semantics: Vec<_> = sample
        .frames
        .iter()
        .flat_map(|f| f.semantic.iter().copied())
        .collect();
    let eps = 0.05 * bounding_radius(&model, &states);
    let seg = segment_instances(&field.target, &positions, &semantics, 3, n, eps, 10);

    let ids: std::collections::BTreeSet<u32> =
        seg.instance.iter().copied().filter(|&x| x > 0).collect();
    assert_eq!(ids.len(), 2, "expected exactly 2 instances");

    // Purity: each predicted instance is at least 99% one ground-truth part.
    let gt: Vec<u32> = sample
        .frames
        .iter()
        .flat_map(|f| f.instance.iter().copied())
        .collect();
    for &id in &ids {
        let members: Vec<usize> = (0..gt.len()).filter(|&i| seg.instance[i] == id).collect();
        let mut counts = std::collections::BTreeMap::new();
        for &i in &members {
            *counts.entry(gt[i]).or_insert(0usize) += 1;
        }
        let dominant = *counts.values().max().unwrap();
        assert!(
            dominant as f64 >= 0.99 * members.len() as f64,
            "instance {id} is impure: {counts:?}"
        );
    }
}

/// The 4D-centroid ablation geometry: canonical targets are frame-invariant,
/// 4D-centroid targets of distinct parts sit strictly closer together, and
/// with a clustering radius between the two separations the 4D-centroid
/// variant merges the parts while the canonical one keeps them apart.
#[test]
fn door_drawer_centroid_targets_merge_under_stress_eps() {
    let model = build_template(
        TemplateKind::CabinetDoorDrawer,
        TemplateKind::CabinetDoorDrawer.default_dims(),
        5,
    )
    .unwrap();
    let states = linear_states(&model);
    let sample = render_sequence(&model, &states, 768);
    let q_c = model.canonical_config();

    let canon = gt_offsets(&sample, &model, &states, &q_c, TargetMode::Canonical).unwrap();
    let c4d = gt_offsets(&sample, &model, &states, &q_c, TargetMode::Centroid4d).unwrap();
    let canon_targets = part_targets(&sample, &canon);
    let c4d_targets = part_targets(&sample, &c4d);
    assert_eq!(canon_targets.len(), 2);
    let sep_canon = (canon_targets[0].1 - canon_targets[1].1).norm();
    let sep_c4d = (c4d_targets[0].1 - c4d_targets[1].1).norm();
    assert!(
        sep_c4d < sep_canon,
        "4D-centroid targets should sit closer: {sep_c4d} vs {sep_canon}"
    );

    // Stress radius between the two separations.
    let eps = 0.5 * (sep_c4d + sep_canon);
    let n = sample.points_per_frame();
    let positions: Vec<_> = sample
        .frames
        .iter()
        .flat_map(|f| f.positions.iter().copied())
        .collect();
    let semantics: Vec<_> = sample
        .frames
        .iter()
        .flat_map(|f| f.semantic.iter().copied())
        .collect();
    let gt = gt_segmentation(&sample);

    let seg_canon = segment_instances(&canon.target, &positions, &semantics, 3, n, eps, 10);
    let seg_c4d = segment_instances(&c4d.target, &positions, &semantics, 3, n, eps, 10);
    let score_canon = s_assoc(&gt, &seg_canon).unwrap();
    let score_c4d = s_assoc(&gt, &seg_c4d).unwrap();
    assert!(
        score_canon > score_c4d,
        "expected a strict association gap: canonical {score_canon} vs 4D-centroid {score_c4d}"
    );
    assert!(score_canon > 0.99, "canonical should stay near-perfect");
    assert!(score_c4d < 0.8, "merged clusters should hurt the score");
}

/// Evaluating the ground truth against itself is a perfect score.
#[test]
fn gt_as_prediction_scores_one() {
    let model = build_template(
        TemplateKind::ScissorsLegs,
        TemplateKind::ScissorsLegs.default_dims(),
        2,
    )
    .unwrap();
    let states = linear_states(&model);
    let sample = render_sequence(&model, &states, 512);
    let gt = gt_segmentation(&sample);
    let mut acc = MetricAccumulator::new();
    acc.add_sequence(&gt, &gt).unwrap();
    let report = acc.finalize(ClassAveraging::AllClasses);
    assert!((report.s_cls - 1.0).abs() <= 1e-12);
    assert!((report.s_assoc - 1.0).abs() <= 1e-12);
    assert!((report.lstq - 1.0).abs() <= 1e-12);
}

/// Generate -> oracle-segment -> evaluate round trip on a small dataset:
/// the stored predictions rescore to exactly the numbers the oracle
/// reported, and a full-quality run stays near-perfect.
#[test]
fn oracle_report_matches_evaluate_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("data");
    let config = GenerateConfig {
        subset: Subset::D,
        seed: 7,
        states: 5,
        views: 12,
        points: 512,
        image_size: 96,
        train_objects: 2,
        test_objects: 1,
        ..GenerateConfig::default()
    };
    generate(&root, &config).unwrap();
    let ds = Dataset::load(&root).unwrap();

    let pred_dir = dir.path().join("oracle");
    let opts = SegmentOptions {
        frames: vec![1, 3],
        ..SegmentOptions::default()
    };
    let outcomes = oracle_segment(&ds, &pred_dir, &opts).unwrap();
    assert_eq!(outcomes.len(), 2);
    for (_, report) in &outcomes {
        assert!((report.s_cls - 1.0).abs() <= 1e-12, "gt semantics");
        assert!(report.lstq >= 0.995, "oracle run degraded: {report:?}");
    }

    let evaluated = evaluate(&ds, &pred_dir, None, ClassAveraging::AllClasses).unwrap();
    assert_eq!(evaluated.len(), 2);
    for (o, (_, reported)) in evaluated.iter().zip(&outcomes) {
        assert_eq!(o.report, *reported, "evaluate must reproduce the oracle report");
    }

    // The frames filter narrows the sweep.
    let only_three = evaluate(&ds, &pred_dir, Some(&[3]), ClassAveraging::AllClasses).unwrap();
    assert_eq!(only_three.len(), 1);
    assert_eq!(only_three[0].frames, 3);
}

/// Dataset files round-trip: the stored model matches the generated one and
/// every frame holds exactly the sampling budget.
#[test]
fn dataset_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("data");
    let config = GenerateConfig {
        subset: Subset::S,
        seed: 3,
        states: 4,
        views: 8,
        points: 256,
        image_size: 64,
        train_objects: 1,
        test_objects: 1,
        ..GenerateConfig::default()
    };
    generate(&root, &config).unwrap();
    let ds = Dataset::load(&root).unwrap();
    assert_eq!(ds.manifest.objects.len(), 2);
    assert_eq!(ds.objects(Some("train")).len(), 1);
    assert_eq!(ds.objects(Some("test")).len(), 1);
    for entry in ds.objects(None) {
        let model = ds.load_model(entry).unwrap();
        model.validate().unwrap();
        let states = ds.load_states(entry).unwrap();
        assert_eq!(states.states.len(), 4);
        assert_eq!(states.profiles.len(), model.joints.len());
        for s in 0..4 {
            let frame = ds.load_frame(entry, s).unwrap();
            assert_eq!(frame.len(), 256);
            assert_eq!(frame.state_index, s);
        }
        let (sample, configs) = ds.assemble_sequence(entry, &[0, 3]).unwrap();
        assert_eq!(sample.frames.len(), 2);
        assert_eq!(configs.len(), 2);
        assert_eq!(sample.points_per_frame(), 256);
    }
}

/// Masked stuff points never contribute to the canonical loss: perturbing
/// their predictions leaves the loss bit-identical.
#[test]
fn stuff_points_cannot_move_the_canonical_loss() {
    let model = build_template(
        TemplateKind::CabinetDoor,
        TemplateKind::CabinetDoor.default_dims(),
        1,
    )
    .unwrap();
    let states = linear_states(&model);
    let sample = render_sequence(&model, &states, 256);
    let q_c = model.canonical_config();
    let mut field = gt_offsets(&sample, &model, &states, &q_c, TargetMode::Canonical).unwrap();
    for p in field.predicted.iter_mut() {
        *p = Vector3::new(0.05, -0.02, 0.01);
    }
    let base = artic_canon::losses::l_canon(&field);
    for i in 0..field.len() {
        if !field.mask[i] {
            field.predicted[i] += Vector3::new(10.0, -5.0, 2.0);
        }
    }
    assert_eq!(artic_canon::losses::l_canon(&field), base);
    assert_eq!(
        sample
            .frames
            .iter()
            .flat_map(|f| f.semantic.iter())
            .filter(|c| **c == SemanticClass::Body)
            .count(),
        field.mask.iter().filter(|&&m| !m).count(),
        "mask must be exactly the stuff point set"
    );
}
