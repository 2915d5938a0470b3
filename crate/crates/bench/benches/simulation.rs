use criterion::{criterion_group, criterion_main, Criterion};
use ehgo_core::numerics::{companion_lambda, solve_lyapunov, FnField, Rk4};
use ehgo_core::simulator::{reduced_config, simulate};
use ehgo_core::SimConfig;
use std::hint::black_box;

fn rk4_step(c: &mut Criterion) {
    let field = FnField::new(5, |_, x: &[f64], dx: &mut [f64]| {
        for i in 0..5 {
            dx[i] = -x[i] + x[(i + 1) % 5].sin();
        }
    });
    let mut rk4 = Rk4::new(5);
    let mut x = [0.5, 0.9, 0.0, 0.1, 0.0];
    c.bench_function("rk4_step_5_states", |b| {
        b.iter(|| {
            rk4.step(&field, 0.0, black_box(&mut x), 5e-5).unwrap();
        })
    });
}

fn lyapunov(c: &mut Criterion) {
    let lambda = companion_lambda(&[4.0, 6.0, 4.0, 1.0]);
    c.bench_function("lyapunov_order_4", |b| {
        b.iter(|| solve_lyapunov(black_box(&lambda)).unwrap())
    });
}

fn closed_loop(c: &mut Criterion) {
    let mut of = SimConfig::paper();
    of.t_final = 1.0;
    let red = reduced_config(&SimConfig::paper());
    let mut group = c.benchmark_group("closed_loop");
    group.sample_size(10);
    group.bench_function("output_feedback_1s_eps_0.001", |b| {
        b.iter(|| simulate(black_box(&of)).unwrap())
    });
    group.bench_function("reduced_20s", |b| {
        b.iter(|| simulate(black_box(&red)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, rk4_step, lyapunov, closed_loop);
criterion_main!(benches);
