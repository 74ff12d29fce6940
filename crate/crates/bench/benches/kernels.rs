use criterion::{criterion_group, criterion_main, Criterion};
use rangeseg_bench::{pyramid, Fixture};
use rangeseg_core::{
    bilinear_upsample, copy_pixel_label, estimate_normals, fid_concat, knn_postprocess, nla, project, KnnParams,
    NlaParams,
};
use std::hint::black_box;

fn projection(c: &mut Criterion) {
    let f = Fixture::pole_wall(0);
    c.bench_function("project", |b| b.iter(|| project(black_box(&f.cloud), &f.config).unwrap()));
    c.bench_function("normals", |b| b.iter(|| estimate_normals(black_box(&f.image))));
}

fn postprocess(c: &mut Criterion) {
    let f = Fixture::pole_wall(0);
    let mut g = c.benchmark_group("postprocess");
    g.bench_function("copy", |b| {
        b.iter(|| copy_pixel_label(&f.image, black_box(&f.predictions), &f.projection).unwrap())
    });
    for kernel in [3, 5, 7] {
        g.bench_function(format!("nla_k{kernel}"), |b| {
            b.iter(|| nla(&f.image, black_box(&f.predictions), &f.projection, &NlaParams { kernel }).unwrap())
        });
    }
    g.bench_function("knn_default", |b| {
        b.iter(|| knn_postprocess(&f.image, black_box(&f.predictions), &f.projection, &KnnParams::default()).unwrap())
    });
    g.finish();
}

fn decoder(c: &mut Criterion) {
    let maps = pyramid(64, 512, 16);
    c.bench_function("bilinear_x8", |b| b.iter(|| bilinear_upsample(black_box(&maps[3]), 64, 512).unwrap()));
    c.bench_function("fid_concat", |b| b.iter(|| fid_concat(black_box(&maps)).unwrap()));
}

criterion_group!(benches, projection, postprocess, decoder);
criterion_main!(benches);
