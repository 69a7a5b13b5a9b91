use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kdvol::kde::sup_deviation_with_oracle;
use kdvol::{kde_grid, BandwidthGrid, EvalGrid, Execution, Kernel, MultiIndex, OracleTable, ReferenceDistribution};

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn grids(c: &mut Criterion) {
    let dist = ReferenceDistribution::uniform_cube(2).unwrap();
    let sample = dist.sample(20_000, 1).unwrap();
    let grid = EvalGrid::for_distribution(&dist, 0.05).unwrap();
    let hs = [0.05, 0.1, 0.2];
    let s = MultiIndex::zero(2);
    let mut group = c.benchmark_group("kde_grid");
    group.sample_size(10);
    for kernel in [Kernel::gaussian(2), Kernel::epanechnikov(2)] {
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(kernel.name(), name), &exec, |b, &exec| {
                b.iter(|| kde_grid(&sample, &kernel, &s, &hs, &grid, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn deviation(c: &mut Criterion) {
    let dist = ReferenceDistribution::uniform_circle(1.0).unwrap();
    let kernel = Kernel::gaussian(2);
    let s = MultiIndex::zero(2);
    let sample = dist.sample(10_000, 2).unwrap();
    let grid = EvalGrid::for_distribution(&dist, 0.05).unwrap();
    let h_grid = BandwidthGrid::log_spaced(0.05, 0.4, 6).unwrap();
    let oracle = OracleTable::compute(&dist, &kernel, &s, &h_grid, &grid, Execution::Parallel).unwrap();
    let mut group = c.benchmark_group("sup_deviation");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new("circle", name), &exec, |b, &exec| {
            b.iter(|| sup_deviation_with_oracle(&sample, &kernel, &grid, &s, &oracle, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, grids, deviation);
criterion_main!(benches);
