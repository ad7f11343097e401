use krylov_recycle::smallalg::{
    grassmann_distance, hessenberg_lsq, principal_angles, reduced_qr, small_generalized_eig, small_standard_eig,
    EigenPairSet,
};
use krylov_recycle::DenseMatrix;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn pencil_residual(l: &DenseMatrix, r: &DenseMatrix, set: &EigenPairSet, i: usize) -> f64 {
    let g = set.vector(i);
    let n = l.rows();
    let mut acc = 0.0;
    for row in 0..n {
        let mut lg = Complex64::new(0.0, 0.0);
        let mut rg = Complex64::new(0.0, 0.0);
        for c in 0..n {
            lg += g[c] * l[(row, c)];
            rg += g[c] * r[(row, c)];
        }
        acc += (lg - set.values[i] * rg).norm_sqr();
    }
    acc.sqrt()
}

fn sorted_moduli(values: impl Iterator<Item = Complex64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.map(|z| z.norm()).collect();
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn qr_reconstructs_seeded_tall_matrix() {
    let m = random(8, 3, 7);
    let (q, r) = reduced_qr(&m).unwrap();
    assert!(q.tr_matmul(&q).sub(&DenseMatrix::identity(3)).frobenius_norm() < 1e-12);
    assert!(q.matmul(&r).sub(&m).frobenius_norm() < 1e-12);
    for j in 0..3 {
        assert!(r[(j, j)] >= 0.0);
        for i in j + 1..3 {
            assert_eq!(r[(i, j)], 0.0);
        }
    }
}

#[test]
fn standard_eig_matches_nalgebra_spectrum() {
    for seed in 0..20 {
        let n = 5 + (seed as usize * 7) % 40;
        let m = random(n, n, 100 + seed);
        let set = small_standard_eig(&m, n).unwrap();
        assert_eq!(set.len(), n);
        let ours = sorted_moduli(set.values.iter().copied());
        let oracle = sorted_moduli(to_na(&m).complex_eigenvalues().iter().copied());
        for (a, b) in ours.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10 * (1.0 + b), "seed {seed}: {a} vs {b}");
        }
        let fro = m.frobenius_norm();
        let id = DenseMatrix::identity(n);
        for i in 0..n {
            assert!(pencil_residual(&m, &id, &set, i) < 1e-9 * fro, "seed {seed} pair {i}");
            let g = set.vector(i);
            let nrm: f64 = g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!((nrm - 1.0).abs() < 1e-12);
        }
        for w in set.values.windows(2) {
            assert!(w[0].norm() <= w[1].norm() + 1e-14);
        }
    }
}

#[test]
fn hessenberg_input_and_upper_hessenberg_with_ties() {
    // symmetric tridiagonal with repeated moduli: ties resolved by real part
    let m = DenseMatrix::from_rows(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 2.0]]);
    let set = small_standard_eig(&m, 2).unwrap();
    assert!((set.values[0].re + 1.0).abs() < 1e-14);
    assert!((set.values[1].re - 1.0).abs() < 1e-14);
}

#[test]
fn generalized_matches_explicit_inverse_oracle() {
    let l = random(6, 6, 11);
    let r = random(6, 6, 12);
    let set = small_generalized_eig(&l, &r, 6).unwrap();
    let oracle = to_na(&r).try_inverse().unwrap() * to_na(&l);
    let want = sorted_moduli(oracle.complex_eigenvalues().iter().copied());
    let got = sorted_moduli(set.values.iter().copied());
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() < 1e-10 * (1.0 + b), "{a} vs {b}");
    }
    for i in 0..set.len() {
        assert!(pencil_residual(&l, &r, &set, i) < 1e-9 * l.frobenius_norm());
    }
}

#[test]
fn generalized_with_identity_is_standard() {
    let l = random(7, 7, 21);
    let a = small_generalized_eig(&l, &DenseMatrix::identity(7), 4).unwrap();
    let b = small_standard_eig(&l, 4).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).norm() < 1e-10);
    }
}

#[test]
fn lsq_matches_normal_equations_up_to_50_by_49() {
    for (seed, j) in [(1u64, 1usize), (2, 5), (3, 20), (4, 49)] {
        let mut h = random(j + 1, j, seed);
        for c in 0..j {
            for r in c + 2..=j {
                h[(r, c)] = 0.0;
            }
            // keeps HᵀH well conditioned so the normal-equations oracle is itself accurate
            h[(c, c)] += 4.0;
        }
        let c = random(j + 1, 1, seed + 50).column(0);
        let (y, rho) = hessenberg_lsq(&h, &c).unwrap();
        let hn = to_na(&h);
        let cn = nalgebra::DVector::from_vec(c.clone());
        let yn = (hn.transpose() * &hn).lu().solve(&(hn.transpose() * &cn)).unwrap();
        let rn = (&cn - &hn * &yn).norm();
        assert!((rho - rn).abs() < 1e-10, "j={j}: {rho} vs {rn}");
        let ynorm = yn.norm();
        let diff: f64 = y.iter().zip(yn.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(diff < 1e-8 * (1.0 + ynorm));
    }
}

fn orthonormal(n: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let (q, _) = reduced_qr(&random(n, k, seed)).unwrap();
    q.columns()
}

#[test]
fn principal_angles_match_nalgebra_svd() {
    let c1 = orthonormal(12, 3, 31);
    let c2 = orthonormal(12, 4, 32);
    let th = principal_angles(&c1, &c2).unwrap();
    let m = to_na(&DenseMatrix::from_columns(&c1)).transpose() * to_na(&DenseMatrix::from_columns(&c2));
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    for (t, s) in th.iter().zip(&sv) {
        assert!((t - s.clamp(0.0, 1.0).acos()).abs() < 1e-10);
    }
    for w in th.windows(2) {
        assert!(w[0] <= w[1]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn qr_is_orthonormal_and_reconstructs(seed in 0u64..10_000, n in 1usize..30, extra in 0usize..10) {
        let k = n.min(1 + extra);
        let m = random(n.max(k), k, seed);
        let (q, r) = reduced_qr(&m).unwrap();
        prop_assert!(q.tr_matmul(&q).sub(&DenseMatrix::identity(k)).frobenius_norm() < 1e-12);
        prop_assert!(q.matmul(&r).sub(&m).frobenius_norm() < 1e-12 * m.frobenius_norm());
    }

    #[test]
    fn eigen_residuals_are_small(seed in 0u64..10_000, n in 1usize..25) {
        let m = random(n, n, seed);
        let set = small_standard_eig(&m, n).unwrap();
        let id = DenseMatrix::identity(n);
        for i in 0..set.len() {
            prop_assert!(pencil_residual(&m, &id, &set, i) < 1e-9 * m.frobenius_norm());
        }
    }

    #[test]
    fn pencil_residuals_are_small(seed in 0u64..10_000, n in 1usize..16) {
        let l = random(n, n, seed);
        let r = random(n, n, seed + 1_000_000);
        let set = small_generalized_eig(&l, &r, n).unwrap();
        for i in 0..set.len() {
            prop_assert!(pencil_residual(&l, &r, &set, i) < 1e-9 * l.frobenius_norm() * (1.0 + set.values[i].norm()));
        }
    }

    #[test]
    fn grassmann_is_symmetric_and_bounded(seed in 0u64..10_000, k1 in 1usize..6, k2 in 1usize..6) {
        let c1 = orthonormal(15, k1, seed);
        let c2 = orthonormal(15, k2, seed + 99);
        let a = grassmann_distance(&c1, &c2).unwrap();
        let b = grassmann_distance(&c2, &c1).unwrap();
        prop_assert!((a.d_p - b.d_p).abs() < 1e-12);
        prop_assert_eq!(a.p, k1.min(k2));
        prop_assert!(a.d_p <= (a.p as f64).sqrt() * std::f64::consts::FRAC_PI_2 + 1e-12);
        prop_assert!(grassmann_distance(&c1, &c1).unwrap().d_p < 1e-12);
    }
}
