use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use pptdisc::cone::check_decomposable;
use pptdisc::discrimination::{dual_qppt, optimal_global, optimal_ppt};
use pptdisc::ensembles::{example1, example3};
use pptdisc::operator::{state_family, BipartiteOperator, Family};

fn operators(c: &mut Criterion) {
    for d in [2, 3] {
        let e = example3(d, 0.5).unwrap();
        let w = &e.weighted(0) - &e.weighted(1);
        c.bench_function(&format!("partial_transpose/{d}x{d}"), |b| b.iter(|| black_box(&w).partial_transpose()));
        c.bench_function(&format!("eigen/{d}x{d}"), |b| b.iter(|| black_box(&w).spectrum().unwrap()));
    }
}

fn cones(c: &mut Criterion) {
    let e = example3(2, 0.5).unwrap();
    let w: BipartiteOperator = &e.weighted(0) - &e.weighted(1);
    // Φ₋^Γ + Φ₊: neither it nor its partial transpose is PSD, so this needs a solve
    let phi = |f| state_family(w.dims(), f).unwrap();
    let mixed = &phi(Family::PhiMinus).partial_transpose() + &phi(Family::PhiPlus);
    c.bench_function("decomposable/pt_shortcut", |b| b.iter(|| check_decomposable(black_box(&w)).unwrap()));
    c.bench_function("decomposable/solve", |b| b.iter(|| check_decomposable(black_box(&mixed)).unwrap()));
}

fn programs(c: &mut Criterion) {
    let mut g = c.benchmark_group("discrimination");
    g.sample_size(10);
    let e3 = example3(2, 0.5).unwrap();
    let (e1, _) = example1(2, 1.0, None).unwrap();
    g.bench_function("global/example3_d2", |b| b.iter(|| optimal_global(black_box(&e3)).unwrap()));
    g.bench_function("ppt/example3_d2", |b| b.iter(|| optimal_ppt(black_box(&e3)).unwrap()));
    g.bench_function("dual/example3_d2", |b| b.iter(|| dual_qppt(black_box(&e3)).unwrap()));
    g.bench_function("ppt/example1_d2", |b| b.iter(|| optimal_ppt(black_box(&e1)).unwrap()));
    g.finish();
}

criterion_group!(benches, operators, cones, programs);
criterion_main!(benches);
