use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use adaptive_brdf::geom::{spherical_to_dir, Spherical};
use adaptive_brdf::render::SceneGeometry;
use adaptive_brdf::sampler::{lattice_point, measure, plan_measurements, Warp};
use adaptive_brdf::{fit_ward, render_sphere, LobeModel, Rgb, SceneSpec, WardParams};

fn ward() -> WardParams {
    WardParams::new(Rgb::splat(0.2), 0.1)
}

fn warp_roundtrip(c: &mut Criterion) {
    let model = LobeModel::Ward(ward());
    c.bench_function("ward_sample_inverse_1k", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for i in 0..32 {
                for j in 0..32 {
                    let u = model.inverse(model.sample(lattice_point(i, j, 32)));
                    acc += u.u1 + u.u2;
                }
            }
            black_box(acc)
        })
    });
}

fn measure_and_reconstruct(c: &mut Criterion) {
    let p = ward();
    let warp = Warp::with_default_weights(LobeModel::Ward(p));
    let plan = plan_measurements(warp, 16, 8).unwrap();
    c.bench_function("plan_16x16x8", |b| b.iter(|| plan_measurements(black_box(warp), 16, 8).unwrap()));
    c.bench_function("measure_16x16x8", |b| b.iter(|| measure(black_box(&plan), &p)));
    let table = measure(&plan, &p);
    let wi = spherical_to_dir(Spherical::clamped(0.4, 0.3));
    let wo = spherical_to_dir(Spherical::clamped(0.5, 3.0));
    c.bench_function("reconstruct_eval", |b| b.iter(|| table.reconstruct_eval(black_box(wi), black_box(wo))));
}

fn render(c: &mut Criterion) {
    let scene = SceneSpec::with_resolution(128).unwrap();
    let geometry = SceneGeometry::new(&scene);
    let p = ward();
    c.bench_function("render_ward_128", |b| b.iter(|| geometry.shade(black_box(&p))));
    let table = measure(&plan_measurements(Warp::with_default_weights(LobeModel::Ward(p)), 16, 8).unwrap(), &p);
    c.bench_function("render_table_128", |b| b.iter(|| geometry.shade(black_box(&table))));
}

fn fit(c: &mut Criterion) {
    let scene = SceneSpec::with_resolution(32).unwrap();
    let target = render_sphere(&ward(), &scene);
    let mut g = c.benchmark_group("fit");
    g.sample_size(10);
    g.bench_function("fit_ward_32", |b| b.iter(|| fit_ward(black_box(&target), &scene).unwrap()));
    g.finish();
}

criterion_group!(benches, warp_roundtrip, measure_and_reconstruct, render, fit);
criterion_main!(benches);
