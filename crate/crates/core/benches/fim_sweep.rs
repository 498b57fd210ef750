use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use bpms::fim::{FimModel, VarianceMatrix};
use bpms::optimize::FimMaps;
use bpms::par::Exec;
use bpms::scenario::default_scenario;
use bpms::CMatrix;

fn execs() -> Vec<(&'static str, Exec)> {
    vec![
        ("sequential", Exec::Sequential),
        #[cfg(feature = "parallel")]
        ("parallel", Exec::Parallel),
    ]
}

fn bench_maps(c: &mut Criterion) {
    let (s, g) = default_scenario();
    let model = FimModel::new(&s, &g).unwrap();
    let mut group = c.benchmark_group("fim_maps");
    group.sample_size(10);
    for (name, exec) in execs() {
        group.bench_function(BenchmarkId::new("unreduced", name), |b| {
            b.iter(|| black_box(FimMaps::unreduced(&model, exec)))
        });
    }
    group.finish();
}

// CRB pairs for a batch of rank-one covariances steered across the sector.
fn bench_crb_batch(c: &mut Criterion) {
    let (s, g) = default_scenario();
    let model = FimModel::new(&s, &g).unwrap();
    let budget = s.power_budget();
    let vs: Vec<VarianceMatrix> = (0..64)
        .map(|i| {
            let a = s.tx_array.steering(-1.2 + 2.4 * i as f64 / 63.0);
            let iso = VarianceMatrix::isotropic(model.num_tx(), 0.5 * budget);
            let beam: CMatrix = &a * a.adjoint() * bpms::C64::from(0.5 * budget / a.norm_squared());
            VarianceMatrix::new(iso.matrix() + beam).unwrap()
        })
        .collect();
    let mut group = c.benchmark_group("crb_batch");
    for (name, exec) in execs() {
        group.bench_function(BenchmarkId::new("64_covariances", name), |b| {
            b.iter(|| black_box(exec.map(&vs, |v| model.crbs(v).unwrap())))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_maps, bench_crb_batch);
criterion_main!(benches);
