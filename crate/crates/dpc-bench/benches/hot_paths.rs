//! Timings for the paths the closed loop hits every control step: forward
//! propagation, the analytic Jacobian, the solver family, and a short
//! end-to-end loop slice.

use criterion::{criterion_group, criterion_main, Criterion};
use dpc_bench::{input_state, loop_slice_config, operating_point, pi_chain};
use dpc_core::jacobian::{analytic_jacobian, fd_jacobian, DEFAULT_RANK_TOLERANCE};
use dpc_core::simulator::run;
use dpc_core::solvers::{solve_extended, solve_gradient_projection, solve_pinv};
use nalgebra::DVector;
use std::hint::black_box;

fn forward(c: &mut Criterion) {
    for m in [3, 4] {
        let chain = pi_chain(m);
        let phi = operating_point(m);
        let s_in = input_state();
        c.bench_function(&format!("forward_pass_{m}_stages"), |b| {
            b.iter(|| {
                black_box(
                    black_box(&chain)
                        .forward(black_box(&phi), black_box(&s_in))
                        .unwrap()
                        .output(),
                )
            })
        });
    }
}

fn jacobians(c: &mut Criterion) {
    for m in [3, 4] {
        let chain = pi_chain(m);
        let phi = operating_point(m);
        let s_in = input_state();
        c.bench_function(&format!("analytic_jacobian_{m}_stages"), |b| {
            b.iter(|| {
                black_box(
                    analytic_jacobian(black_box(&chain), black_box(&phi), black_box(&s_in))
                        .unwrap(),
                )
            })
        });
    }
    let chain = pi_chain(4);
    let phi = operating_point(4);
    let s_in = input_state();
    c.bench_function("fd_jacobian_4_stages", |b| {
        b.iter(|| {
            black_box(
                fd_jacobian(black_box(&chain), black_box(&phi), black_box(&s_in), 1e-6).unwrap(),
            )
        })
    });
}

fn solvers(c: &mut Criterion) {
    let chain = pi_chain(4);
    let phi = operating_point(4);
    let s_in = input_state();
    let j = analytic_jacobian(&chain, &phi, &s_in).unwrap();
    let ds = DVector::from_vec(vec![0.01, -0.02, 0.015]);

    c.bench_function("solve_pinv_3x4", |b| {
        b.iter(|| {
            black_box(
                solve_pinv(
                    black_box(j.matrix()),
                    black_box(&ds),
                    DEFAULT_RANK_TOLERANCE,
                )
                .unwrap(),
            )
        })
    });

    c.bench_function("solve_gradient_projection_3x4", |b| {
        b.iter(|| {
            black_box(
                solve_gradient_projection(
                    black_box(j.matrix()),
                    black_box(&ds),
                    black_box(&phi),
                    0.1,
                    DEFAULT_RANK_TOLERANCE,
                    None,
                )
                .unwrap(),
            )
        })
    });

    // A 1×3 task row squared up with the null-space rows.
    let chain3 = pi_chain(3);
    let phi3 = operating_point(3);
    let j3 = analytic_jacobian(&chain3, &phi3, &s_in).unwrap();
    let j_task = j3.matrix().rows(2, 1).into_owned();
    let ds_task = DVector::from_vec(vec![0.01]);
    c.bench_function("solve_extended_1x3", |b| {
        b.iter(|| {
            black_box(
                solve_extended(
                    black_box(&j_task),
                    black_box(&ds_task),
                    black_box(&phi3),
                    DEFAULT_RANK_TOLERANCE,
                )
                .unwrap(),
            )
        })
    });
}

fn loop_slice(c: &mut Criterion) {
    for m in [3, 4] {
        let (cfg, sc) = loop_slice_config(m);
        c.bench_function(&format!("loop_slice_1000_samples_{m}_stages"), |b| {
            b.iter(|| black_box(run(black_box(&cfg), black_box(&sc)).unwrap()))
        });
    }
}

criterion_group!(benches, forward, jacobians, solvers, loop_slice);
criterion_main!(benches);
