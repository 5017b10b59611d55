//! Sequential vs rayon comparison for the data-parallel inner loops:
//! frame rendering, per-frame cornea solves, and the library entry points.
//!
//! The library's own entry points go through `gazekit::exec`, which uses
//! rayon when the `parallel` feature (default) is enabled; the explicit
//! rayon/sequential pairs here measure the same work through both
//! strategies regardless of the feature.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::prelude::*;

use gazekit::config::SceneConfig;
use gazekit::cornea::{lift_cornea_3d, CorneaSolverConfig};
use gazekit::eval::{run_protocol, MapperKind, ProtocolConfig};
use gazekit::scene::{make_target_grid, EyePhysiology, PupilMode, Scene, Target, TargetGrid};
use gazekit::sim::{generate_dataset, render_frame, FrameIds, FrameObservation, NoiseModel};

fn setup() -> (Scene, EyePhysiology, TargetGrid) {
    let cfg = SceneConfig::default();
    let scene = cfg.build_scene().unwrap();
    let mut phys = cfg.build_physiology(&scene.camera).unwrap();
    phys.pupil_mode = PupilMode::Consistent;
    (scene, phys, make_target_grid(&cfg.build_grid_config()))
}

fn render_one(scene: &Scene, phys: &EyePhysiology, target: &Target) -> FrameObservation {
    let ids = FrameIds {
        subject: 0,
        target: target.id(),
        frame: 0,
    };
    render_frame(scene, phys, target, &NoiseModel::noiseless(1), ids)
        .unwrap()
        .0
}

fn bench_render_sweep(c: &mut Criterion) {
    let (scene, phys, grid) = setup();
    let targets: Vec<Target> = grid.targets().to_vec();
    let mut group = c.benchmark_group("render_54_targets");
    group.bench_function(BenchmarkId::new("sequential", targets.len()), |b| {
        b.iter(|| {
            targets
                .iter()
                .map(|t| render_one(&scene, &phys, t))
                .collect::<Vec<_>>()
        })
    });
    group.bench_function(BenchmarkId::new("rayon", targets.len()), |b| {
        b.iter(|| {
            targets
                .par_iter()
                .map(|t| render_one(&scene, &phys, t))
                .collect::<Vec<_>>()
        })
    });
    group.finish();
}

fn bench_cornea_lift(c: &mut Criterion) {
    let (scene, phys, grid) = setup();
    let observations: Vec<FrameObservation> = grid
        .targets()
        .iter()
        .map(|t| render_one(&scene, &phys, t))
        .collect();
    let solver = CorneaSolverConfig::default();
    let mut group = c.benchmark_group("cornea_lift_54_frames");
    group.bench_function("sequential", |b| {
        b.iter(|| {
            observations
                .iter()
                .map(|o| lift_cornea_3d(&scene.camera, &scene.rig, o, &solver).unwrap())
                .collect::<Vec<_>>()
        })
    });
    group.bench_function("rayon", |b| {
        b.iter(|| {
            observations
                .par_iter()
                .map(|o| lift_cornea_3d(&scene.camera, &scene.rig, o, &solver).unwrap())
                .collect::<Vec<_>>()
        })
    });
    group.finish();
}

fn bench_library_entry_points(c: &mut Criterion) {
    let (scene, phys, grid) = setup();
    let feature = if cfg!(feature = "parallel") {
        "parallel-feature"
    } else {
        "sequential-fallback"
    };

    let mut group = c.benchmark_group("library_entry_points");
    group.sample_size(20);
    group.bench_function(BenchmarkId::new("generate_dataset_3x54", feature), |b| {
        b.iter(|| {
            generate_dataset(
                &scene,
                std::slice::from_ref(&phys),
                &grid,
                3,
                &NoiseModel::noiseless(5),
            )
            .unwrap()
        })
    });

    let mut cfg = ProtocolConfig::new(NoiseModel::noiseless(5));
    cfg.mapper = MapperKind::Poly;
    group.bench_function(BenchmarkId::new("run_protocol_poly", feature), |b| {
        b.iter(|| run_protocol(&scene, &phys, &grid, &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_render_sweep,
    bench_cornea_lift,
    bench_library_entry_points
);
criterion_main!(benches);
