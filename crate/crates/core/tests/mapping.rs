mod common;

use nalgebra::Vector3;
use tvg_core::geom::Pose;
use tvg_core::mapping::{
    seed_primitives, triview_uncertainty, Keyframe, Mapper, MappingConfig, PlainInit, SeedMode,
    TriViewImages, TugiConfig,
};
use tvg_core::sim::{gen_scene, SceneSpec};
use tvg_core::splat::{logit, render, Image, RenderOptions};

#[test]
fn exact_triplets_seed_floor_sized_opaque_primitives_at_the_points() {
    let k = common::small_camera();
    let mut r = common::rng(2);
    let ([_, p1, p2], triplets) = common::exact_triplets(&mut r, &k, 40);
    let img = Image::filled(64, 48, 3, 0.4);
    let images = TriViewImages {
        prev: &img,
        key: &img,
        cur: &img,
    };
    let cfg = TugiConfig::default();
    let cur_to_key = p1.inverse().compose(&p2);
    let seeded = seed_primitives(
        &triplets,
        &images,
        &p1,
        &cur_to_key,
        1.0,
        &SeedMode::Tugi(cfg.clone()),
    );
    assert_eq!(seeded.len(), triplets.len());
    for (g, t) in seeded.iter().zip(&triplets) {
        assert!((g.mean - p1.transform_point(&t.point_from_prev_pair)).norm() < 1e-9);
        assert!((g.scale - Vector3::repeat(cfg.scale_floor)).norm() < 1e-12);
        assert!((g.opacity_logit - logit(cfg.base_opacity)).abs() < 1e-6);
        assert!((g.color - Vector3::repeat(0.4)).norm() < 1e-12);
    }
}

#[test]
fn disagreeing_estimates_seed_larger_fainter_primitives() {
    let k = common::small_camera();
    let mut r = common::rng(3);
    let ([_, p1, p2], mut triplets) = common::exact_triplets(&mut r, &k, 2);
    triplets[1].point_from_prev_pair += Vector3::new(0.0, 0.0, 0.2);
    let img = Image::filled(64, 48, 3, 0.4);
    let images = TriViewImages {
        prev: &img,
        key: &img,
        cur: &img,
    };
    let cur_to_key = p1.inverse().compose(&p2);
    let seeded = seed_primitives(
        &triplets,
        &images,
        &p1,
        &cur_to_key,
        1.0,
        &SeedMode::Tugi(TugiConfig::default()),
    );
    assert!(seeded[1].scale.x > seeded[0].scale.x);
    assert!(seeded[1].opacity() < seeded[0].opacity());
    // Three samples, one displaced by 0.2: σ² = 0.2²·(2/9).
    let shifted = [
        Vector3::zeros(),
        Vector3::zeros(),
        Vector3::new(0.0, 0.0, 0.2),
    ];
    assert!((triview_uncertainty(&shifted).unwrap().variance - 0.04 * 2.0 / 9.0).abs() < 1e-15);
    let plain = PlainInit::default();
    let fixed = seed_primitives(
        &triplets,
        &images,
        &p1,
        &cur_to_key,
        1.0,
        &SeedMode::Plain(plain.clone()),
    );
    assert!(fixed
        .iter()
        .all(|g| g.scale == Vector3::repeat(plain.scale)
            && (g.opacity() - plain.opacity).abs() < 1e-12));
}

#[test]
fn inserting_the_same_batch_twice_adds_nothing() {
    let scene = gen_scene(&SceneSpec {
        count: 200,
        min_scale: 0.02,
        max_scale: 0.04,
        ..Default::default()
    });
    let mut mapper = Mapper::new(MappingConfig::default(), 0);
    let added = mapper.insert_primitives(scene.map.primitives.clone());
    assert!(added > 150, "{added}");
    let revision = mapper.map.revision;
    assert_eq!(mapper.insert_primitives(scene.map.primitives.clone()), 0);
    assert_eq!(mapper.map.revision, revision);
}

#[test]
fn refinement_lowers_the_window_loss() {
    let k = common::small_camera();
    let opts = RenderOptions::default();
    let scene = gen_scene(&SceneSpec {
        count: 150,
        min_scale: 0.03,
        max_scale: 0.06,
        ..Default::default()
    });
    let mut mapper = Mapper::new(
        MappingConfig {
            iterations: 30,
            ..Default::default()
        },
        1,
    );
    let mut r = common::rng(4);
    let noisy: Vec<_> = scene
        .map
        .primitives
        .iter()
        .map(|g| {
            let mut g = g.clone();
            let d = common::random_pose(&mut r, 1e-9, 0.03).translation;
            g.mean += d;
            g.color = (g.color * 0.7).add_scalar(0.1);
            g
        })
        .collect();
    mapper.insert_primitives(noisy);
    for i in 0..4 {
        let pose = Pose::from_translation(Vector3::new(0.1 * i as f64, 0.0, 0.0));
        mapper.register_keyframe(Keyframe {
            id: i,
            timestamp: i as f64,
            image: Some(render(&scene.map, &pose.inverse(), &k, &opts).color),
            pose,
            matches: None,
            revision: 0,
        });
    }
    let report = mapper.refine(&k, &opts).unwrap();
    assert_eq!(report.window, vec![0, 1, 2, 3]);
    let (first, last) = (report.losses[0], *report.losses.last().unwrap());
    assert!(last < 0.8 * first, "{first} -> {last}");
}
