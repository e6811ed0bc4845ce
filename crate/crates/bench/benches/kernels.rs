use af_bench::{state_density, unit_grid, vortex_state, SIZES};
use af_core::{build_kernel, vector_potential, BoundaryCondition, Functional, PotentialSpec, Preconditioner};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn kernel(c: &mut Criterion) {
    let mut group = c.benchmark_group("vector_potential");
    for n in SIZES {
        let u = vortex_state(n, BoundaryCondition::Neumann, 10.0);
        let rho = state_density(&u);
        let k = build_kernel(u.grid()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &rho, |b, rho| {
            b.iter(|| vector_potential(black_box(rho), &k).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("build_kernel");
    for n in SIZES {
        let g = unit_grid(n, BoundaryCondition::Neumann);
        group.bench_with_input(BenchmarkId::from_parameter(n), &g, |b, g| {
            b.iter(|| build_kernel(black_box(g)).unwrap())
        });
    }
    group.finish();
}

fn energy(c: &mut Criterion) {
    let mut group = c.benchmark_group("evaluate");
    for n in SIZES {
        let u = vortex_state(n, BoundaryCondition::Dirichlet, 20.0);
        let k = build_kernel(u.grid()).unwrap();
        let f = Functional::new(&k, 20.0, PotentialSpec::Zero).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &u, |b, u| {
            b.iter(|| f.evaluate(black_box(u)).unwrap())
        });
    }
    group.finish();
}

fn preconditioner(c: &mut Criterion) {
    let mut group = c.benchmark_group("preconditioner");
    for bc in [BoundaryCondition::Neumann, BoundaryCondition::Dirichlet] {
        for n in SIZES {
            let u = vortex_state(n, bc, 10.0);
            let pre = Preconditioner::new(u.grid(), 80.0).unwrap();
            group.bench_with_input(BenchmarkId::new(bc.name(), n), &u, |b, u| {
                b.iter(|| {
                    let mut v = u.values().to_vec();
                    pre.apply(black_box(&mut v));
                    v
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, kernel, energy, preconditioner);
criterion_main!(benches);
