use criterion::{criterion_group, criterion_main, Criterion};
use krylov_recycle::coupled::{lbgs_solve, reference_config, reference_problem};
use krylov_recycle::krylov::{fgcrodr_solve, gcrodr_solve, gmres_solve, gmresdr_solve, DrParams, GcroParams, RecyclePolicy};
use krylov_recycle::operators::Preconditioner;
use krylov_recycle::{SolveControl, Strategy};
use krylov_recycle_bench::{drifting_sequence, operator, random_vec};
use std::hint::black_box;

fn single_system(c: &mut Criterion) {
    let a = operator(48);
    let b = random_vec(a.n(), 4);
    let x0 = vec![0.0; a.n()];
    let control = SolveControl::new(1e-8, 1_000_000);
    let p = Preconditioner::Identity;
    let mut g = c.benchmark_group("single_48x48");
    g.sample_size(20);
    g.bench_function("gmres60", |bch| bch.iter(|| black_box(gmres_solve(&a, &p, &b, &x0, 60, &control).unwrap())));
    g.bench_function("gmresdr60_20", |bch| {
        bch.iter(|| black_box(gmresdr_solve(&a, &p, &b, &x0, DrParams::new(60, 20), &control).unwrap()))
    });
    g.finish();
}

fn sequences(c: &mut Criterion) {
    let a = operator(32);
    let seq = drifting_sequence(a.n(), 4, 9);
    let control = SolveControl::new(1e-8, 1_000_000);
    let mut g = c.benchmark_group("sequence_32x32");
    g.sample_size(10);
    for (name, policy) in [("gcrodr_cold", RecyclePolicy::Never), ("gcrodr_recycled", RecyclePolicy::Always)] {
        g.bench_function(name, |bch| {
            bch.iter(|| {
                black_box(gcrodr_solve(&a, &Preconditioner::Identity, &seq, GcroParams::new(40, 15), &control, policy).unwrap())
            })
        });
    }
    let inner = Preconditioner::inner_gmres(3, Preconditioner::Identity);
    g.bench_function("fgcrodr_c_recycled", |bch| {
        bch.iter(|| {
            let prm = GcroParams::flexible(30, 10, Strategy::C);
            black_box(fgcrodr_solve(&a, &inner, &seq, prm, &control, RecyclePolicy::Always).unwrap())
        })
    });
    g.finish();
}

fn coupled(c: &mut Criterion) {
    let p = reference_problem().unwrap();
    let mut g = c.benchmark_group("lbgs_reference");
    g.sample_size(10);
    g.bench_function("never", |b| b.iter(|| black_box(lbgs_solve(&p, &reference_config(None)).unwrap())));
    g.bench_function("recycle_from_2", |b| b.iter(|| black_box(lbgs_solve(&p, &reference_config(Some(2))).unwrap())));
    g.finish();
}

criterion_group!(benches, single_system, sequences, coupled);
criterion_main!(benches);
