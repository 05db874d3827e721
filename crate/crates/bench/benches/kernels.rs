use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use dgdsim::engine::gradient_operator;
use dgdsim::{consensus_apply, max_stepsize, run, ConsensusSchedule, Method, MethodConfig, TraceRecorder};
use dgdsim_bench::{quadratic, spread_iterate};

fn consensus(c: &mut Criterion) {
    let mut group = c.benchmark_group("consensus_apply");
    for n in [10usize, 50] {
        let prepared = quadratic(n, 10);
        let x = spread_iterate(n, 10);
        for t in [1u64, 10] {
            group.bench_with_input(BenchmarkId::new(format!("n{n}"), t), &t, |b, &t| {
                b.iter(|| consensus_apply(&prepared.w, black_box(&x), t).unwrap())
            });
        }
    }
    group.finish();
}

fn gradient(c: &mut Criterion) {
    let prepared = quadratic(10, 10);
    let x = spread_iterate(10, 10);
    c.bench_function("gradient_operator/quadratic_n10_p10", |b| {
        b.iter(|| gradient_operator(prepared.objectives.as_ref(), 1e-3, black_box(&x)).unwrap())
    });
}

fn short_run(c: &mut Criterion) {
    let prepared = quadratic(10, 10);
    let obj = prepared.objectives.as_ref();
    let alpha = 0.9 * max_stepsize(Method::NearDgd, obj, &prepared.w, 1);
    let cfg = MethodConfig::near_dgd(ConsensusSchedule::Linear, alpha, 200);
    c.bench_function("run/near_dgd_plus_linear_200", |b| {
        b.iter(|| {
            let mut rec = TraceRecorder::default();
            run(&cfg, &prepared.w, obj, &prepared.truth, &mut rec).unwrap()
        })
    });
}

criterion_group!(benches, consensus, gradient, short_run);
criterion_main!(benches);
