//! Rayon vs sequential throughput on the data-parallel kernels. Both
//! paths are compiled when the `parallel` feature is on, so one run
//! compares them directly; results are bit-identical across modes.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use limdep::exec::Mode;
use limdep::learners::{self, KindTag, LearnerSpec};
use limdep::synth::{self, Preset};

fn modes() -> Vec<(&'static str, Mode)> {
    vec![("sequential", Mode::Sequential), ("rayon", Mode::Parallel)]
}

fn bench_generate(c: &mut Criterion) {
    let mut group = c.benchmark_group("generate_200k");
    group.sample_size(10);
    let mut spec = Preset::RegimeWeak.spec();
    spec.n = 200_000;
    for (name, mode) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| synth::generate_with_mode(&spec, mode).unwrap())
        });
    }
    group.finish();
}

fn bench_forest_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("forest_fit_3k_60trees");
    group.sample_size(10);
    let mut pspec = Preset::RegimeStrong.spec();
    pspec.n = 3_000;
    let pop = synth::generate(&pspec).unwrap();
    let spec = LearnerSpec {
        n_trees: 60,
        seed: 1,
        ..LearnerSpec::default()
    };
    for (name, mode) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| {
                learners::fit_with_mode(&spec, &pop.features, &pop.y, KindTag::ZetaHat, mode)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn bench_forest_predict(c: &mut Criterion) {
    let mut group = c.benchmark_group("forest_predict_50k");
    group.sample_size(10);
    let mut pspec = Preset::RegimeStrong.spec();
    pspec.n = 50_000;
    let pop = synth::generate(&pspec).unwrap();
    let spec = LearnerSpec {
        n_trees: 40,
        seed: 1,
        ..LearnerSpec::default()
    };
    let model = learners::fit(&spec, &pop.features, &pop.y, KindTag::ZetaHat).unwrap();
    for (name, mode) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| learners::predict_with_mode(&model, &pop.features, mode).unwrap())
        });
    }
    group.finish();
}

fn bench_contour(c: &mut Criterion) {
    let mut group = c.benchmark_group("contour_4cells_100k");
    group.sample_size(10);
    let mut pspec = Preset::RegimeWeak.spec();
    pspec.n = 100_000;
    let pop = synth::generate(&pspec).unwrap();
    let options = synth::ContourOptions {
        r_p_grid: vec![0.3, 0.5, 0.7, 0.9],
        ..synth::ContourOptions::default()
    };
    for (name, mode) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| synth::required_correlation_contour(&pop, &options, mode).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_generate,
    bench_forest_fit,
    bench_forest_predict,
    bench_contour
);
criterion_main!(benches);
