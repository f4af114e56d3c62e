use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vkp_core::adversary::{estimate_success, Attack, AttackParams, Scheme};
use vkp_bench::warm_network;

fn authenticate(c: &mut Criterion) {
    let mut g = c.benchmark_group("authenticate");
    for k in [1usize, 4, 16] {
        g.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| {
            let mut net = warm_network(32, k, 1);
            let mut i = 0;
            b.iter(|| {
                i = (i + 1) % 32;
                net.authenticate(i, k).unwrap()
            })
        });
    }
    g.finish();
}

fn attack(c: &mut Criterion) {
    let mut g = c.benchmark_group("estimate_success");
    g.sample_size(10);
    for scheme in [Scheme::StaticBaseline, Scheme::Variable] {
        let params = AttackParams {
            scheme,
            attack: Attack::Intersection,
            k: 4,
            pool: 100,
            marked_fraction: 0.0,
            rounds: 10,
            trials: 1000,
            seed: 7,
        };
        g.bench_function(scheme.as_str(), |b| b.iter(|| estimate_success(&params).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, authenticate, attack);
criterion_main!(benches);
