use criterion::{criterion_group, criterion_main, Criterion};
use shapediff::fem::{project, Bindings};
use shapediff::mesh::generate_disk;
use shapediff::scenarios;
use shapediff::shapecalc::{DiffMode, Regularization};

fn mesh(c: &mut Criterion) {
    c.bench_function("generate_disk maxh=0.05", |b| b.iter(|| generate_disk([0.0, 0.0], 1.0, 0.05).unwrap()));
}

fn poisson(c: &mut Criterion) {
    let mut p = scenarios::poisson(0.05, 1).unwrap();
    p.solve().unwrap();
    let v = project(p.mesh(), p.vec_space(), &scenarios::taylor_field(), &Bindings::new()).unwrap().coeffs;
    let mut g = c.benchmark_group("poisson maxh=0.05");
    g.sample_size(10);
    g.bench_function("state and adjoint", |b| b.iter(|| p.solve().unwrap()));
    g.bench_function("first order, full", |b| b.iter(|| p.first_order(DiffMode::Full).unwrap()));
    g.bench_function("first order, semi", |b| b.iter(|| p.first_order(DiffMode::Semi).unwrap()));
    g.bench_function("second order along V", |b| b.iter(|| p.second_order(&v).unwrap()));
    g.finish();
}

fn newton(c: &mut Criterion) {
    let p = scenarios::ellipse(1.3, 0.05, 1).unwrap();
    let mut g = c.benchmark_group("ellipse maxh=0.05");
    g.sample_size(10);
    g.bench_function("newton system assemble+solve", |b| {
        b.iter(|| p.newton_operator(Regularization::BoundaryTangential(100.0)).unwrap().solve().unwrap())
    });
    g.finish();
}

criterion_group!(benches, mesh, poisson, newton);
criterion_main!(benches);
