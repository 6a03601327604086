use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kpo_core::dynamics::{lindblad_evolve, EvolutionMode, EvolveSpec, SolverOptions};
use kpo_core::fock::{build_hamiltonian, fock_state};
use kpo_core::spectral::{degeneracy_detuning, diagonalize};
use kpo_core::steadystate::solve_steady_state;
use kpo_core::units::mhz;
use kpo_core::{FockSpace, KpoParams};

fn params(chi_mhz: f64, n: usize, p_mhz: f64, kappa_mhz: f64) -> KpoParams {
    let delta = degeneracy_detuning(chi_mhz, n).unwrap();
    KpoParams::new(mhz(chi_mhz), mhz(delta), mhz(p_mhz)).with_dissipation(mhz(kappa_mhz), 0.0)
}

fn diagonalize_bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("diagonalize");
    for n_trunc in [20, 40, 80] {
        let space = FockSpace::new(n_trunc).unwrap();
        let h = build_hamiltonian(space, &params(18.0, 8, 1.0, 0.0));
        group.bench_with_input(BenchmarkId::from_parameter(n_trunc), &h, |b, h| {
            b.iter(|| diagonalize(black_box(h)).unwrap())
        });
    }
    group.finish();
}

fn steady_state_bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("steady_state");
    group.sample_size(10);
    for n_trunc in [10, 16, 20] {
        let space = FockSpace::new(n_trunc).unwrap();
        let p = params(-18.729, 4, 1.0, 0.73);
        group.bench_with_input(BenchmarkId::from_parameter(n_trunc), &p, |b, p| {
            b.iter(|| solve_steady_state(space, black_box(p)).unwrap())
        });
    }
    group.finish();
}

fn lindblad_bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("lindblad");
    group.sample_size(10);
    let space = FockSpace::new(12).unwrap();
    let initial = fock_state(space, 0).unwrap();
    let p = params(18.729, 4, 1.0, 0.73);
    for (name, solver) in [("dopri5", SolverOptions::default()), ("exponential", SolverOptions::exponential())] {
        let spec = EvolveSpec::new(p, initial.clone(), 1.0, 0.1, EvolutionMode::Open).with_solver(solver);
        group.bench_function(name, |b| b.iter(|| lindblad_evolve(black_box(&spec)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, diagonalize_bench, steady_state_bench, lindblad_bench);
criterion_main!(benches);
