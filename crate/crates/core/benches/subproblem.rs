//! Specialized sort-and-scan solver versus the general min-norm-point
//! solver on the squared-cardinality subproblem. The `supseg bench`
//! subcommand covers larger sizes and emits CSV; this suite gives the
//! statistically tracked criterion view at sizes where both methods are
//! pleasant to sample.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use supseg_core::losses::LossFunction;
use supseg_core::minnorm::minimize;
use supseg_core::setfn::SetFunctionOracle;
use supseg_core::solvers::solve_symmetric_augmented;

fn instance(n: usize) -> (Vec<f64>, Vec<f64>) {
    let profile = LossFunction::square_default()
        .cardinality_profile((n / 2).max(1), n)
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7 ^ n as u64);
    let coefficients = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (profile, coefficients)
}

fn subproblem(c: &mut Criterion) {
    let mut group = c.benchmark_group("square_subproblem");
    group.sample_size(20);
    for n in [64usize, 256, 1024] {
        let (profile, coefficients) = instance(n);
        group.bench_with_input(BenchmarkId::new("sortscan", n), &n, |b, _| {
            b.iter(|| solve_symmetric_augmented(&profile, &coefficients).unwrap())
        });
        // The min-norm path grows too steep to sample comfortably past 256;
        // `supseg bench` reports it up to its 4096 cap.
        if n <= 256 {
            let shared_profile = profile.clone();
            let shared = coefficients.clone();
            let oracle = SetFunctionOracle::new(n, move |subset: &[usize]| {
                -(shared_profile[subset.len()]
                    + subset.iter().map(|&j| shared[j]).sum::<f64>())
            });
            group.bench_with_input(BenchmarkId::new("minnorm", n), &n, |b, _| {
                b.iter(|| minimize(&oracle, 1e-6).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, subproblem);
criterion_main!(benches);
