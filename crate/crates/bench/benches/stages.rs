use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use roadclass_bench::sheet;
use roadclass_core::assignment::{classify_network, AssignmentParams};
use roadclass_core::evaluation::{line_metrics, pixel_metrics, PixelMetricOptions};
use roadclass_core::morphology::{close_mask, remove_small_components, skeletonize};
use roadclass_core::network::ClassifiedNetwork;
use roadclass_core::painter::SymbologySpec;
use roadclass_core::probability::{baseline_classifier, BaselineParams};
use roadclass_core::tiling::{make_tiles, stitch_tiles};
use roadclass_core::vectorize::{simplify_network, vectorize};

fn raster_stages(c: &mut Criterion) {
    let s = sheet(1000, 15, 11);
    let mask = &s.triplet.region_mask;
    let skeleton = skeletonize(mask).unwrap();
    let mut g = c.benchmark_group("raster");
    g.sample_size(10);
    g.bench_function("tile_stitch_1000", |b| {
        b.iter(|| stitch_tiles(&make_tiles(&s.triplet.map, 500, 125).unwrap()).unwrap())
    });
    g.bench_function("morphology_1000", |b| b.iter(|| close_mask(&remove_small_components(mask, 100).unwrap()).unwrap()));
    g.bench_function("skeletonize_1000", |b| b.iter(|| skeletonize(mask).unwrap()));
    g.bench_function("vectorize_1000", |b| b.iter(|| vectorize(&skeleton, 1.9).unwrap()));
    g.finish();
}

fn vector_stages(c: &mut Criterion) {
    let s = sheet(1000, 15, 11);
    let params = AssignmentParams::default();
    let truth = ClassifiedNetwork::from_assignment(&s.network, &s.triplet.assignment);
    let predicted = classify_network(&s.network, &s.field, &params).unwrap().network;
    let mut g = c.benchmark_group("vector");
    g.sample_size(10);
    g.bench_function("simplify", |b| {
        b.iter_batched(|| s.network.clone(), |n| simplify_network(&n, 1.9), BatchSize::SmallInput)
    });
    g.bench_function("classify_network", |b| b.iter(|| classify_network(&s.network, &s.field, &params).unwrap()));
    g.bench_function("line_metrics", |b| b.iter(|| line_metrics(&truth, &predicted, 5.0).unwrap()));
    g.bench_function("pixel_metrics", |b| {
        b.iter(|| pixel_metrics(&s.field, &s.triplet.labels, None, PixelMetricOptions::default()).unwrap())
    });
    g.finish();
}

fn baseline(c: &mut Criterion) {
    let s = sheet(250, 3, 5);
    let spec = SymbologySpec::default();
    let params = BaselineParams::default();
    let mut g = c.benchmark_group("baseline");
    g.sample_size(10);
    g.bench_function("tile_250_with_region", |b| {
        b.iter(|| baseline_classifier(&s.triplet.map, &spec, &params, Some(&s.triplet.region_mask)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, raster_stages, vector_stages, baseline);
criterion_main!(benches);
