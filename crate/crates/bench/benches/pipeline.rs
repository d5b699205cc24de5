use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use stokes_bench::SourceFixture;
use stokes_core::assembly::{assemble_mass, assemble_stokes, Load};
use stokes_core::expansion::compute_constants;
use stokes_core::recovery::{recover_all, Method};
use stokes_core::solver::{solve_eigs, solve_source};
use stokes_core::{Triangulation, VelocityElement};

fn mesh(c: &mut Criterion) {
    let mut g = c.benchmark_group("mesh");
    for level in [4, 6] {
        g.bench_with_input(BenchmarkId::from_parameter(level), &level, |b, &l| {
            b.iter(|| Triangulation::build_uniform(black_box(l)).unwrap())
        });
    }
    g.finish();
}

fn assembly(c: &mut Criterion) {
    let f = SourceFixture::new(VelocityElement::Ecr, 5);
    c.bench_function("assemble_ecr_l5", |b| {
        b.iter(|| {
            assemble_stokes(VelocityElement::Ecr, &f.mesh, Load::ElementMeans(&f.source)).unwrap()
        })
    });
}

fn source_and_recovery(c: &mut Criterion) {
    let f = SourceFixture::new(VelocityElement::Cr, 5);
    c.bench_function("solve_cr_l5", |b| {
        b.iter(|| solve_source(&f.system).unwrap())
    });
    let sol = solve_source(&f.system).unwrap();
    c.bench_function("recover_cr_l5", |b| {
        b.iter(|| recover_all(Method::Cr, &f.mesh, &sol.primary, Some(&sol.constraint)).unwrap())
    });
}

fn eigen(c: &mut Criterion) {
    let mesh = Triangulation::build_uniform(4).unwrap();
    let sys = assemble_stokes(VelocityElement::Cr, &mesh, Load::Zero).unwrap();
    let mass = assemble_mass(VelocityElement::Cr, &mesh).unwrap();
    let mut g = c.benchmark_group("eigen");
    g.sample_size(10);
    g.bench_function("cr_l4_k3", |b| {
        b.iter(|| solve_eigs(&sys, &mass, 3).unwrap())
    });
    g.finish();
}

fn constants(c: &mut Criterion) {
    let mesh = Triangulation::build_uniform(3).unwrap();
    c.bench_function("expansion_constants", |b| {
        b.iter(|| compute_constants(black_box(&mesh)).unwrap())
    });
}

criterion_group!(
    benches,
    mesh,
    assembly,
    source_and_recovery,
    eigen,
    constants
);
criterion_main!(benches);
