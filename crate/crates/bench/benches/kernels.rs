use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use krylov_recycle::krylov::fgmres_cycle;
use krylov_recycle::operators::{ilu_factor, LinearOperator, Preconditioner};
use krylov_recycle::smallalg::{grassmann_distance, small_standard_eig, LuFactorization};
use krylov_recycle::DenseMatrix;
use krylov_recycle_bench::{operator, orthonormal, random_vec};
use std::hint::black_box;

fn sparse(c: &mut Criterion) {
    let mut g = c.benchmark_group("sparse");
    for grid in [48, 128] {
        let a = operator(grid);
        let x = random_vec(a.n(), 1);
        g.bench_with_input(BenchmarkId::new("spmv", grid), &grid, |b, _| b.iter(|| black_box(a.apply_vec(&x))));
        g.bench_with_input(BenchmarkId::new("ilu0", grid), &grid, |b, _| b.iter(|| black_box(ilu_factor(&a, 0).unwrap())));
        let ilu = Preconditioner::Ilu(ilu_factor(&a, 0).unwrap());
        g.bench_with_input(BenchmarkId::new("ilu0_apply", grid), &grid, |b, _| b.iter(|| black_box(ilu.apply(&a, &x))));
    }
    g.finish();
}

fn arnoldi(c: &mut Criterion) {
    let a = operator(64);
    let r0 = random_vec(a.n(), 2);
    let mut g = c.benchmark_group("arnoldi");
    for reorth in [false, true] {
        g.bench_function(BenchmarkId::new("cycle_m60", if reorth { "mgs2" } else { "mgs" }), |b| {
            b.iter(|| black_box(fgmres_cycle(&a, &Preconditioner::Identity, &r0, 60, reorth).unwrap()))
        });
    }
    g.finish();
}

fn small_dense(c: &mut Criterion) {
    let mut g = c.benchmark_group("small_dense");
    for m in [40, 120] {
        let h = DenseMatrix::from_fn(m, m, |i, j| if i <= j + 1 { random_vec(1, (i * m + j) as u64)[0] } else { 0.0 });
        g.bench_with_input(BenchmarkId::new("eig_smallest", m), &m, |b, &m| {
            b.iter(|| black_box(small_standard_eig(&h, m / 3).unwrap()))
        });
        let d = DenseMatrix::from_fn(m, m, |i, j| random_vec(1, (i * m + j + 7) as u64)[0] + if i == j { m as f64 } else { 0.0 });
        g.bench_with_input(BenchmarkId::new("lu", m), &m, |b, _| b.iter(|| black_box(LuFactorization::new(&d).unwrap())));
    }
    let (c1, c2) = (orthonormal(4096, 20, 3), orthonormal(4096, 20, 50));
    g.bench_function("grassmann_4096x20", |b| b.iter(|| black_box(grassmann_distance(&c1, &c2).unwrap())));
    g.finish();
}

criterion_group!(benches, sparse, arnoldi, small_dense);
criterion_main!(benches);
