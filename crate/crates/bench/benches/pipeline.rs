use std::collections::BTreeMap;
use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};

use levyflow_core::{
    bin_flows, extract_tail, fit_loglog, fit_power_law, kernel_smooth, sample_levy_flows,
    CountryRegistry, DistanceMatrix, DistanceModel, FlowMatrix, FlowMeta, SmoothOptions,
    SynthSpec, Year,
};

fn registry(n: usize) -> Arc<CountryRegistry> {
    let codes: Vec<String> = (0..n).map(|i| format!("C{i:03}")).collect();
    Arc::new(CountryRegistry::new(codes, BTreeMap::new()).unwrap())
}

fn world_196() -> (FlowMatrix, DistanceMatrix) {
    let reg = registry(196);
    let pairs = (196 * 195 / 2) as f64;
    let mut t = 0.0;
    let dist = DistanceMatrix::from_fn(Arc::clone(&reg), |_, _| {
        t += 1.0;
        100.0 + 19_400.0 * t / pairs
    })
    .unwrap();
    let flow = FlowMatrix::from_fn(
        Arc::clone(&reg),
        FlowMeta::new("bench", Year::Undated, "units"),
        |i, j| 1e9 * dist.get(i, j).powf(-1.6) * (1.0 + ((i * 31 + j) % 7) as f64 / 10.0),
    )
    .unwrap();
    (flow, dist)
}

fn bench_binning(c: &mut Criterion) {
    let (flow, dist) = world_196();
    c.bench_function("bin_flows_196", |b| {
        b.iter(|| bin_flows(black_box(&flow), black_box(&dist), 500.0).unwrap())
    });
}

fn bench_fit(c: &mut Criterion) {
    let (flow, dist) = world_196();
    let binned = bin_flows(&flow, &dist, 500.0).unwrap();
    let tail = extract_tail(&binned).unwrap();
    c.bench_function("fit_power_law", |b| {
        b.iter(|| fit_power_law(black_box(&tail)).unwrap())
    });
    c.bench_function("fit_loglog", |b| {
        b.iter(|| fit_loglog(black_box(&tail)).unwrap())
    });
}

fn bench_full_pipeline(c: &mut Criterion) {
    let (flow, dist) = world_196();
    c.bench_function("pipeline_bin_tail_fit_196", |b| {
        b.iter(|| {
            let binned = bin_flows(black_box(&flow), black_box(&dist), 500.0).unwrap();
            let tail = extract_tail(&binned).unwrap();
            fit_power_law(&tail).unwrap()
        })
    });
}

fn bench_synth(c: &mut Criterion) {
    let spec = SynthSpec {
        n: 100,
        distance: DistanceModel::UniformRandom {
            d_min: 100.0,
            d_max: 20_000.0,
        },
        true_beta: 2.0,
        peak_mass: 0.25,
        n_moves: 1_000_000,
        seed: 1,
        bin_width: 500.0,
    };
    c.bench_function("synth_million_moves", |b| {
        b.iter(|| sample_levy_flows(black_box(&spec)).unwrap())
    });
}

fn bench_smoothing(c: &mut Criterion) {
    let (flow, dist) = world_196();
    let grid = levyflow_core::default_grid(dist.max_offdiag(), 200);
    c.bench_function("kernel_smooth_196_grid200", |b| {
        b.iter(|| {
            kernel_smooth(
                black_box(&flow),
                black_box(&dist),
                black_box(&grid),
                &SmoothOptions {
                    bandwidth: Some(400.0),
                    degree: 0,
                },
            )
            .unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_binning,
    bench_fit,
    bench_full_pipeline,
    bench_synth,
    bench_smoothing
);
criterion_main!(benches);
