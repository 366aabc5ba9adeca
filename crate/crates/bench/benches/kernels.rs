use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use mtwv_core::cost::{build_cost, CostParams};
use mtwv_core::mtw::eval_mtw;
use mtwv_core::synthetic::{default_t_grid, generate_probes, ComparisonFunction};
use mtwv_core::{image_domain, CExpSolver, CostModel, ProbeStrategy, Side, Vector};

fn cost(name: &str) -> CostModel {
    build_cost(name, &CostParams::default(), None).unwrap()
}

fn c_exp(c: &mut Criterion) {
    for name in ["quadratic", "log"] {
        let cost = cost(name);
        let x = cost.x_domain().center().clone();
        let solver = CExpSolver::at_x(&cost, &x).unwrap();
        let p = solver.forward(cost.y_domain().center()).unwrap();
        c.bench_function(&format!("c_exp/{name}"), |b| b.iter(|| solver.c_exp(black_box(&p)).unwrap()));
        let guess = cost.y_domain().center() + Vector::from_element(cost.dim(), 1e-3);
        c.bench_function(&format!("c_exp_warm/{name}"), |b| {
            b.iter(|| solver.solve_from(black_box(&p), black_box(&guess)).unwrap())
        });
    }
}

fn segments(c: &mut Criterion) {
    let cost = cost("log");
    let probe = generate_probes(&cost, 1, 0, ProbeStrategy::Uniform).unwrap().remove(0);
    let f = ComparisonFunction::for_probe(&cost, &probe).unwrap();
    let ts = default_t_grid();
    c.bench_function("eval_F/log", |b| b.iter(|| f.eval(black_box(&probe.v0)).unwrap()));
    c.bench_function("grad_F/log", |b| b.iter(|| f.grad(black_box(&probe.v0)).unwrap()));
    c.bench_function("segment/log", |b| b.iter(|| f.segment(&probe.v0, &probe.v1, black_box(&ts)).unwrap()));
}

fn mtw(c: &mut Criterion) {
    let cost = cost("log");
    let x = cost.x_domain().center().clone();
    let p = CExpSolver::at_x(&cost, &x).unwrap().forward(cost.y_domain().center()).unwrap();
    let xi = Vector::from_vec(vec![1.0, 0.0]);
    let eta = Vector::from_vec(vec![0.0, 1.0]);
    c.bench_function("eval_mtw/log", |b| b.iter(|| eval_mtw(&cost, &x, black_box(&p), &xi, &eta).unwrap()));
}

fn image(c: &mut Criterion) {
    let cost = cost("log");
    let x = cost.x_domain().center().clone();
    let mut g = c.benchmark_group("image_domain");
    g.sample_size(10);
    g.bench_function("log/64", |b| b.iter(|| image_domain(&cost, black_box(&x), Side::X, 64).unwrap()));
    g.finish();
}

criterion_group!(benches, c_exp, segments, mtw, image);
criterion_main!(benches);
