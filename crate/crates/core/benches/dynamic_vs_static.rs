//! Dynamic point moves against full static re-solves, and the parallel
//! structure build against a one-thread pool.
//!
//! Build with `--no-default-features` to bench the sequential fallback.

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use dynot_core::workload::{gaussian_mixture, EventMix, StreamGen};
use dynot_core::{par, IndexMode, SimplexConfig, SimplexState, Solver, SolverConfig, StaticSolver};

const SIZES: [usize; 2] = [200, 400];

fn config() -> SolverConfig {
    SolverConfig { simplex: SimplexConfig { mode: IndexMode::Vertices, ..Default::default() }, ..Default::default() }
}

fn moves(c: &mut Criterion) {
    let mut group = c.benchmark_group("move");
    group.sample_size(10);
    for nv in SIZES {
        let inst = gaussian_mixture(nv / 2, nv / 2, 2, 2, 7);
        let mut warm = StaticSolver::new(&inst).unwrap();
        warm.solve().unwrap();
        let solver = Solver::with_basis(inst.clone(), warm.into_basis(), config()).unwrap();
        let mut gen = StreamGen::new(&inst, EventMix::MOVES, 0.5, 1);
        let event = gen.next_event();
        group.bench_with_input(BenchmarkId::new("dynamic", nv), &nv, |b, _| {
            b.iter_batched(|| solver.clone(), |mut s| s.apply(&event).unwrap(), BatchSize::LargeInput)
        });
        let mut moved = solver.clone();
        moved.apply(&event).unwrap();
        let moved = moved.live_instance();
        group.bench_with_input(BenchmarkId::new("static", nv), &nv, |b, _| {
            b.iter(|| StaticSolver::new(&moved).unwrap().solve().unwrap())
        });
    }
    group.finish();
}

fn builds(c: &mut Criterion) {
    let label = if par::enabled() { "rayon" } else { "sequential" };
    let mut group = c.benchmark_group(format!("build-{label}"));
    group.sample_size(10);
    for nv in SIZES {
        let inst = gaussian_mixture(nv / 2, nv / 2, 8, 3, 9);
        let cfg = SimplexConfig { mode: IndexMode::Vertices, ..Default::default() };
        for jobs in [1usize, 0] {
            let name = if jobs == 1 { "one-thread" } else { "all-threads" };
            group.bench_with_input(BenchmarkId::new(name, nv), &nv, |b, _| {
                b.iter(|| par::with_jobs(jobs, || SimplexState::new(&inst, cfg).unwrap()))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, moves, builds);
criterion_main!(benches);
