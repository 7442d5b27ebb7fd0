use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use qdml::units::HBAR_EV_FS;
use qdml::tensornet::krylov::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Array1<C64> {
    Array1::from_shape_fn(n, |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> Array2<C64> {
    let a = Array2::from_shape_fn((n, n), |_| C64::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)));
    &a + &a.t().mapv(|x| x.conj())
}

fn norm(a: &Array1<C64>) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn zero_generator_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let v = random_vec(12, &mut rng);
    let out = krylov_expm_apply(|x| Array1::zeros(x.len()), &v, 0.5, TimeDirection::Forward, 1e-12).unwrap();
    assert!(out.iter().zip(&v).all(|(a, b)| (a - b).norm() < 1e-15));
}

#[test]
fn diagonal_generator_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let energies: Vec<f64> = (0..20).map(|_| rng.random_range(-0.2..0.2)).collect();
    let v = random_vec(20, &mut rng);
    let dt = 0.5;
    for dir in [TimeDirection::Forward, TimeDirection::Backward] {
        let e = energies.clone();
        let out = krylov_expm_apply(
            move |x| Array1::from_shape_fn(x.len(), |i| x[i] * e[i]),
            &v,
            dt,
            dir,
            1e-13,
        )
        .unwrap();
        for i in 0..20 {
            let expect = v[i] * C64::from_polar(1.0, -dir.sign() * energies[i] * dt / HBAR_EV_FS);
            assert!((out[i] - expect).norm() < 1e-10);
        }
    }
}

#[test]
fn unitary_on_random_hermitian() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = random_hermitian(40, &mut rng);
    let v = random_vec(40, &mut rng);
    let out = krylov_expm_apply(|x| h.dot(x), &v, 2.0, TimeDirection::Forward, 1e-12).unwrap();
    assert!((norm(&out) - norm(&v)).abs() < 1e-10);
    // forward then backward returns the start vector
    let back = krylov_expm_apply(|x| h.dot(x), &out, 2.0, TimeDirection::Backward, 1e-12).unwrap();
    assert!(back.iter().zip(&v).all(|(a, b)| (a - b).norm() < 1e-9));
}

#[test]
fn matches_eigendecomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = random_hermitian(30, &mut rng);
    let v = random_vec(30, &mut rng);
    let (w, u) = qdml::tensornet::linalg::eigh_hermitian(&h).unwrap();
    let coeff = u.t().mapv(|x| x.conj()).dot(&v);
    let dt = 1.5;
    let evolved = Array1::from_shape_fn(30, |i| coeff[i] * C64::from_polar(1.0, -w[i] * dt / HBAR_EV_FS));
    let expect = u.dot(&evolved);
    let out = krylov_expm_apply(|x| h.dot(x), &v, dt, TimeDirection::Forward, 1e-13).unwrap();
    let diff = out.iter().zip(&expect).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(diff < 1e-10, "max deviation {diff:e}");
}

#[test]
fn rejects_non_finite() {
    let v = Array1::from_vec(vec![C64::new(f64::NAN, 0.0)]);
    assert!(krylov_expm_apply(|x| x.clone(), &v, 1.0, TimeDirection::Forward, 1e-12).is_err());
}
