use ndarray::{Array1, Array2, IxDyn};
use num_complex::Complex64 as C64;
use qdml::tensornet::linalg::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

#[test]
fn identity_keeps_all() {
    let eye = Array2::from_diag(&Array1::from_elem(4, C64::new(1.0, 0.0)));
    let t = svd_truncate(eye.view(), 1e-13, usize::MAX).unwrap();
    assert_eq!(t.rank(), 4);
    assert!(t.s.iter().all(|&s| (s - 1.0).abs() < 1e-14));
    assert_eq!(t.discarded_weight, 0.0);
}

#[test]
fn rank_one_outer_product() {
    let a = random_matrix(8, 1, 1);
    let b = random_matrix(1, 8, 2);
    let t = svd_truncate(a.dot(&b).view(), 1e-13, usize::MAX).unwrap();
    assert_eq!(t.rank(), 1);
}

#[test]
fn lossless_reconstruction() {
    for (r, c, seed) in [(6, 6, 3), (4, 9, 4), (9, 4, 5)] {
        let m = random_matrix(r, c, seed);
        let t = svd_truncate(m.view(), 0.0, usize::MAX).unwrap();
        assert!(frobenius(&(&t.reconstruct() - &m)) < 1e-12);
    }
}

#[test]
fn bond_cap_and_discarded_weight() {
    let m = random_matrix(6, 6, 6);
    let full = svd_truncate(m.view(), 0.0, usize::MAX).unwrap();
    let cut = svd_truncate(m.view(), 0.0, 3).unwrap();
    assert_eq!(cut.rank(), 3);
    let total: f64 = full.s.iter().map(|s| s * s).sum();
    let dropped: f64 = full.s.iter().skip(3).map(|s| s * s).sum();
    assert!((cut.discarded_weight - dropped / total).abs() < 1e-14);
    let err = frobenius(&(&cut.reconstruct() - &m));
    assert!((err * err - dropped).abs() < 1e-10);
}

#[test]
fn empty_and_bad_cutoff() {
    let e = Array2::<C64>::zeros((0, 3));
    assert!(svd_truncate(e.view(), 1e-13, 4).is_err());
    let m = random_matrix(2, 2, 7);
    assert!(svd_truncate(m.view(), -1.0, 4).is_err());
}

#[test]
fn qr_and_lq_factor() {
    let m = random_matrix(7, 3, 8);
    let (q, r) = qr(&m).unwrap();
    assert!(frobenius(&(&q.dot(&r) - &m)) < 1e-12);
    let eye = adjoint(&q).dot(&q);
    assert!(frobenius(&(&eye - &Array2::eye(3).mapv(|x: f64| C64::new(x, 0.0)))) < 1e-12);
    let m = random_matrix(3, 7, 9);
    let (l, q) = lq(&m).unwrap();
    assert!(frobenius(&(&l.dot(&q) - &m)) < 1e-12);
    let eye = q.dot(&adjoint(&q));
    assert!(frobenius(&(&eye - &Array2::eye(3).mapv(|x: f64| C64::new(x, 0.0)))) < 1e-12);
}

#[test]
fn hermitian_eigendecomposition() {
    let a = random_matrix(9, 9, 20);
    let h = &a + &adjoint(&a);
    let (w, u) = eigh_hermitian(&h).unwrap();
    let lhs = h.dot(&u);
    let rhs = u.dot(&Array2::from_diag(&w.mapv(|x| C64::new(x, 0.0))));
    assert!(frobenius(&(&lhs - &rhs)) < 1e-12);
}

#[test]
fn contract_matches_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let a = DenseTensor::from_shape_fn(IxDyn(&[2, 3, 4]), |_| C64::new(rng.random(), rng.random()));
    let b = DenseTensor::from_shape_fn(IxDyn(&[4, 5, 2]), |_| C64::new(rng.random(), rng.random()));
    let c = contract(&a, &[0, 2], &b, &[2, 0]).unwrap();
    assert_eq!(c.shape(), &[3, 5]);
    for j in 0..3 {
        for l in 0..5 {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..2 {
                for k in 0..4 {
                    acc += a[[i, j, k]] * b[[k, l, i]];
                }
            }
            assert!((acc - c[[j, l]]).norm() < 1e-13);
        }
    }
    assert!(contract(&a, &[0], &b, &[0]).is_err());
}
