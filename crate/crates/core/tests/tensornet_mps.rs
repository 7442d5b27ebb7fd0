use ndarray::{Array1, Array3};
use num_complex::Complex64 as C64;
use qdml::tensornet::mps::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dense_dot(a: &Array1<C64>, b: &Array1<C64>) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[test]
fn product_state_is_canonical_everywhere() {
    let locals = vec![
        Array1::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]),
        Array1::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]),
        Array1::from_vec(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]),
    ];
    let mps = MatrixProductState::product(&locals).unwrap();
    for c in 0..3 {
        let can = mps.canonicalize(c).unwrap();
        assert!(can.orthonormality_residual() < 1e-12);
        let overlap = inner_product(&mps, &can).unwrap();
        assert!((overlap - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert_eq!(can.bond_dims(), vec![1, 1, 1, 1]);
    }
}

#[test]
fn canonicalization_is_gauge_only() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for dims in [vec![2, 3, 2, 3, 2, 2], vec![3, 3, 3, 3], vec![2, 2, 2]] {
        let mps = MatrixProductState::random(&dims, 4, &mut rng).unwrap();
        let dense = mps.to_dense();
        for c in [0, dims.len() - 1, dims.len() / 2] {
            let can = mps.canonicalize(c).unwrap();
            assert!(can.orthonormality_residual() < 1e-10);
            let after = can.to_dense();
            let diff = dense.iter().zip(&after).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(diff < 1e-10 * dense.iter().map(|x| x.norm()).fold(0.0, f64::max));
            assert!((can.norm() - mps.norm()).abs() < 1e-10 * mps.norm());
        }
    }
}

#[test]
fn sweeping_to_both_ends_preserves_overlap() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut mps = MatrixProductState::random(&[2, 3, 3, 2, 3, 2], 5, &mut rng).unwrap();
    mps.normalize().unwrap();
    let reference = mps.clone();
    mps.canonicalize_mut(5).unwrap();
    mps.canonicalize_mut(0).unwrap();
    let ov = inner_product(&reference, &mps).unwrap();
    assert!((ov - C64::new(1.0, 0.0)).norm() < 1e-10);
}

#[test]
fn inner_product_matches_dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let dims = [2, 3, 2, 2, 3];
    for _ in 0..5 {
        let a = MatrixProductState::random(&dims, 3, &mut rng).unwrap();
        let b = MatrixProductState::random(&dims, 4, &mut rng).unwrap();
        let mps = inner_product(&a, &b).unwrap();
        let dense = dense_dot(&a.to_dense(), &b.to_dense());
        assert!((mps - dense).norm() < 1e-12 * dense.norm().max(1.0));
    }
}

#[test]
fn orthogonal_products_and_normalized_self_overlap() {
    let e = |k: usize| {
        let mut v = Array1::<C64>::zeros(2);
        v[k] = C64::new(1.0, 0.0);
        v
    };
    let a = MatrixProductState::product(&[e(0), e(1), e(0)]).unwrap();
    let b = MatrixProductState::product(&[e(0), e(0), e(0)]).unwrap();
    assert_eq!(inner_product(&a, &b).unwrap(), C64::new(0.0, 0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut r = MatrixProductState::random(&[2, 2, 2, 2], 3, &mut rng).unwrap();
    r.normalize().unwrap();
    assert!((inner_product(&r, &r).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-12);
    let c = MatrixProductState::random(&[2, 3], 2, &mut rng).unwrap();
    assert!(inner_product(&a, &c).is_err());
}

#[test]
fn padding_keeps_state() {
    let e0 = Array1::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
    let mut mps = MatrixProductState::product(&vec![e0; 5]).unwrap();
    let before = mps.to_dense();
    mps.pad_bonds(4).unwrap();
    assert_eq!(mps.bond_dims(), vec![1, 3, 4, 4, 3, 1]);
    assert!(mps.orthonormality_residual() < 1e-12);
    let after = mps.to_dense();
    assert!(before.iter().zip(&after).all(|(x, y)| (x - y).norm() < 1e-12));
}

#[test]
fn bad_center_and_bad_bonds() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mps = MatrixProductState::random(&[2, 2], 2, &mut rng).unwrap();
    assert!(mps.canonicalize(2).is_err());
    let bad = vec![Array3::<C64>::zeros((1, 2, 2)), Array3::<C64>::zeros((3, 2, 1))];
    assert!(MatrixProductState::new(bad).is_err());
}
