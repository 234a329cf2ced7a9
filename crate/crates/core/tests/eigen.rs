mod common;

use common::{dense_s, dense_t, jacobi_eigenvalues, symmetrize};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symnmf_core::certificates::{local_certificate_k1_op, local_certificate_op, global_min_eig, local_min_eig, shifted_min_eig};
use symnmf_core::matrix::power_max_eig;
use symnmf_core::{local_t_op, CertifyOptions, DenseMat, LinOp, SymProblem};

fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> DenseMat {
    DenseMat::from_fn(r, c, |_, _| rng.random_range(lo..hi))
}

#[test]
fn jacobi_oracle_known_spectra() {
    let d = DenseMat::from_rows(&[vec![3.0, 0.0, 0.0], vec![0.0, -1.0, 0.0], vec![0.0, 0.0, 2.0]]).unwrap();
    assert_eq!(jacobi_eigenvalues(&d), vec![-1.0, 2.0, 3.0]);
    let a = DenseMat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
    let ev = jacobi_eigenvalues(&a);
    assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    // trace and Frobenius norm are preserved
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = symmetrize(&rand_mat(&mut rng, 9, 9, -1.0, 1.0));
    let ev = jacobi_eigenvalues(&m);
    let tr: f64 = (0..9).map(|i| m.get(i, i)).sum();
    assert!((ev.iter().sum::<f64>() - tr).abs() < 1e-12);
    let fro2: f64 = m.as_slice().iter().map(|v| v * v).sum();
    assert!((ev.iter().map(|v| v * v).sum::<f64>() - fro2).abs() < 1e-11);
}

#[test]
fn power_method_top_eigenvalue_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let b = rand_mat(&mut rng, 7, 7, -1.0, 1.0);
        let psd = b.gram();
        let op = LinOp::from_dense(&psd);
        let r = power_max_eig(&op, 1e-12, 500_000, 3).unwrap();
        let ev = jacobi_eigenvalues(&psd);
        assert!(r.converged);
        assert!((r.value - ev[6]).abs() < 1e-8, "{} vs {}", r.value, ev[6]);
    }
}

#[test]
fn s_min_eig_matches_oracle_8x8() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = CertifyOptions::default();
    for _ in 0..20 {
        let x = rand_mat(&mut rng, 8, 2, 0.0, 1.0);
        let z = rand_mat(&mut rng, 8, 8, 0.0, 1.0);
        let prob = SymProblem::new(z.clone(), 2).unwrap();
        let e = global_min_eig(&x, &prob, &opts).unwrap();
        let oracle = jacobi_eigenvalues(&dense_s(&x, &z))[0];
        assert!(e.converged);
        assert!((e.lambda_min - oracle).abs() < 1e-6, "{} vs {oracle}", e.lambda_min);
    }
}

#[test]
fn t_operator_matches_dense_materialization() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = rand_mat(&mut rng, 5, 2, 0.0, 1.0);
    let z = rand_mat(&mut rng, 5, 5, 0.0, 1.0);
    let prob = SymProblem::new(z.clone(), 2).unwrap();
    for delta in [0.01, 0.42, 1.0] {
        let t = dense_t(&x, &z, delta);
        let op = local_t_op(&x, &prob, delta);
        for _ in 0..5 {
            let v: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
            let got = op.apply(&v);
            for (a, row) in got.iter().zip(0..10) {
                let want: f64 = t.row(row).iter().zip(&v).map(|(p, q)| p * q).sum();
                assert!((a - want).abs() < 1e-10);
            }
        }
        let sym = local_certificate_op(&x, &prob, delta).to_dense();
        let ts = symmetrize(&t);
        assert!(sym.sub(&ts).max_abs() < 1e-12);
    }
}

#[test]
fn t_min_eig_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let opts = CertifyOptions::default();
    for case in 0..20 {
        let k = 1 + case % 3;
        let n = 4 + case % 5;
        let x = rand_mat(&mut rng, n, k, 0.0, 1.0);
        let z = rand_mat(&mut rng, n, n, 0.0, 1.0);
        let prob = SymProblem::new(z.clone(), k).unwrap();
        let delta = rng.random_range(0.01..1.0);
        let e = local_min_eig(&x, &prob, delta, &opts).unwrap();
        let oracle = jacobi_eigenvalues(&symmetrize(&dense_t(&x, &z, delta)))[0];
        assert!(e.converged);
        assert!((e.lambda_min - oracle).abs() < 1e-6, "case {case}: {} vs {oracle}", e.lambda_min);
    }
}

#[test]
fn t1_min_eig_matches_oracle_n6() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let opts = CertifyOptions::default();
    for _ in 0..10 {
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..1.0)).collect();
        let z = rand_mat(&mut rng, 6, 6, 0.0, 1.0);
        let prob = SymProblem::new(z.clone(), 1).unwrap();
        let delta = 0.3;
        let xx: f64 = x.iter().map(|v| v * v).sum();
        let eta = 3.0 * xx + z.fro_norm() + 1.0;
        let e = shifted_min_eig(local_certificate_k1_op(&x, &prob, delta), eta, opts.eig_tol, opts.eig_max_iters, None, 1).unwrap();
        let xm = DenseMat::from_vec(6, 1, x.clone()).unwrap();
        let oracle = jacobi_eigenvalues(&symmetrize(&dense_t(&xm, &z, delta)))[0];
        assert!((e.lambda_min - oracle).abs() < 1e-6);
    }
}
