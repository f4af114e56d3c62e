use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use vkp_core::crypto::{hmac, milenage};
use vkp_core::{Imsi, PseudonymChain, ZucState};

fn zuc(c: &mut Criterion) {
    let mut g = c.benchmark_group("zuc");
    g.bench_function("init", |b| b.iter(|| ZucState::new(black_box(&[7; 16]), black_box(&[9; 16]))));
    g.throughput(Throughput::Bytes(4 * 1024));
    g.bench_function("keystream_1k_words", |b| {
        let mut z = ZucState::new(&[7; 16], &[9; 16]);
        b.iter(|| black_box(z.keystream(1024)))
    });
    g.finish();
}

fn chain(c: &mut Criterion) {
    let imsi = Imsi::new(460, 1, 123_456_789).unwrap();
    c.bench_function("chain/commit_auth", |b| {
        let mut ch = PseudonymChain::new([3; 16], imsi);
        ch.commit_first_auth(1).unwrap();
        let mut sqn = 1;
        b.iter(|| {
            sqn += 1;
            black_box(ch.commit_auth(sqn).unwrap())
        })
    });
    c.bench_function("chain/first_auth", |b| {
        b.iter(|| {
            let mut ch = PseudonymChain::new([3; 16], imsi);
            black_box(ch.commit_first_auth(1).unwrap())
        })
    });
}

fn primitives(c: &mut Criterion) {
    c.bench_function("milenage/vector", |b| {
        b.iter(|| milenage(black_box(&[1; 16]), black_box(&[2; 16]), 42, 0x8000))
    });
    c.bench_function("hmac/11_bytes", |b| b.iter(|| hmac(black_box(&[1; 16]), black_box(&[0; 11]))));
}

criterion_group!(benches, zuc, chain, primitives);
criterion_main!(benches);
