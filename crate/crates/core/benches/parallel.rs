use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mosar::annealer::{self, AnnealConfig};
use mosar::parallel;
use mosar::problems::{reference_front, Benchmark};

fn sphere_front(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut front = reference_front("DTLZ2", n.max(100)).unwrap();
    front.truncate(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in &mut front {
        for v in p.iter_mut() {
            *v += 1e-9 * rng.random::<f64>();
        }
    }
    front.sort_by(|a, b| a[0].total_cmp(&b[0]));
    front
}

fn samples(n: usize, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n * dim).map(|_| 1.1 * rng.random::<f64>()).collect()
}

fn coverage(c: &mut Criterion) {
    let pts = samples(100_000, 3, 1);
    let mut g = c.benchmark_group("count_covered");
    for n in [100, 1000, 3000] {
        let front = sphere_front(n, 2);
        g.bench_with_input(BenchmarkId::new("seq", n), &front, |b, f| {
            b.iter(|| parallel::count_covered_seq(f, &pts, 3))
        });
        #[cfg(feature = "parallel")]
        g.bench_with_input(BenchmarkId::new("par", n), &front, |b, f| {
            b.iter(|| parallel::count_covered_par(f, &pts, 3))
        });
    }
    g.finish();
}

fn exclusive(c: &mut Criterion) {
    let pts = samples(10_000, 3, 3);
    let mut g = c.benchmark_group("exclusive_counts");
    for n in [100, 1000] {
        let front = sphere_front(n, 4);
        g.bench_with_input(BenchmarkId::new("seq", n), &front, |b, f| {
            b.iter(|| parallel::exclusive_counts_seq(f, &pts, 3))
        });
        #[cfg(feature = "parallel")]
        g.bench_with_input(BenchmarkId::new("par", n), &front, |b, f| {
            b.iter(|| parallel::exclusive_counts_par(f, &pts, 3))
        });
    }
    g.finish();
}

fn run_matrix(c: &mut Criterion) {
    let problem = Benchmark::by_name("UF1").unwrap();
    let seeds: Vec<u64> = (0..4).collect();
    let cell = |s: &u64| {
        annealer::run(
            &problem,
            AnnealConfig {
                total_iters: 2000,
                seed: *s,
                ..AnnealConfig::default()
            },
        )
        .unwrap()
        .archive
        .len()
    };
    let mut g = c.benchmark_group("run_matrix");
    g.sample_size(10);
    g.bench_function("seq", |b| b.iter(|| parallel::map_with_workers(&seeds, Some(1), cell)));
    g.bench_function("par", |b| b.iter(|| parallel::map_with_workers(&seeds, None, cell)));
    g.finish();
}

criterion_group!(benches, coverage, exclusive, run_matrix);
criterion_main!(benches);
