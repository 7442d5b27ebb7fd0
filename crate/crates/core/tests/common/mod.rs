//! Dense reference implementations for small systems.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use qdml::physmodel::{DiscretizedBath, SiteExcitonModel};
use qdml::tensornet::linalg::eigh_hermitian;
use qdml::tensornet::{ChainLayout, SiteKind};
use qdml::units::{cm_to_ev, HBAR_EV_FS};

pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| a[[i / br, j / bc]] * b[[i % br, j % bc]])
}

fn real(m: Array2<f64>) -> Array2<C64> {
    m.mapv(|x| C64::new(x, 0.0))
}

/// Places `op` at chain position `pos`, identities elsewhere.
fn embed(dims: &[usize], pos: usize, op: &Array2<C64>) -> Array2<C64> {
    let mut acc = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
    for (i, &d) in dims.iter().enumerate() {
        let factor = if i == pos { op.clone() } else { Array2::eye(d) };
        acc = kron(&acc, &factor);
    }
    acc
}

fn embed2(dims: &[usize], p1: usize, op1: &Array2<C64>, p2: usize, op2: &Array2<C64>) -> Array2<C64> {
    let mut acc = Array2::from_elem((1, 1), C64::new(1.0, 0.0));
    for (i, &d) in dims.iter().enumerate() {
        let factor = if i == p1 {
            op1.clone()
        } else if i == p2 {
            op2.clone()
        } else {
            Array2::eye(d)
        };
        acc = kron(&acc, &factor);
    }
    acc
}

/// Explicit H_S + Σ ω b†b + Σ κ |k⟩⟨k| (b + b†)/√2 in the layout's site order.
pub fn dense_hamiltonian(model: &SiteExcitonModel, bath: &DiscretizedBath, n: usize, layout: &ChainLayout) -> Array2<C64> {
    let dims = layout.local_dims(n);
    let total: usize = dims.iter().product();
    let e = layout.electronic_site();
    let mut b = Array2::<f64>::zeros((n, n));
    for k in 1..n {
        b[[k - 1, k]] = (k as f64).sqrt();
    }
    let number = real(b.t().dot(&b));
    let q = real((&b + &b.t()) / 2f64.sqrt());
    let hs = model.system_hamiltonian();
    let h_sys = real(Array2::from_shape_fn((2, 2), |(i, j)| hs[i][j]));
    let mut h = embed(&dims, e, &h_sys);
    for (p, site) in layout.sites().iter().enumerate() {
        if let SiteKind::Mode { state, index } = *site {
            let omega = cm_to_ev(bath.states[state].frequencies[index]);
            let kappa = cm_to_ev(bath.states[state].couplings[index]);
            h = h + embed(&dims, p, &number).mapv(|x| x * omega);
            let mut proj = Array2::<C64>::zeros((2, 2));
            proj[[state, state]] = C64::new(1.0, 0.0);
            h = h + embed2(&dims, e, &proj, p, &q).mapv(|x| x * kappa);
        }
    }
    assert_eq!(h.nrows(), total);
    h
}

/// Initial vector: electronic state `excited` (1-based) ⊗ vacuum.
pub fn dense_initial(layout: &ChainLayout, n: usize, excited: usize) -> Array1<C64> {
    let dims = layout.local_dims(n);
    let mut idx = 0;
    for (i, &d) in dims.iter().enumerate() {
        let s = if i == layout.electronic_site() { excited - 1 } else { 0 };
        idx = idx * d + s;
    }
    let mut v = Array1::zeros(dims.iter().product::<usize>());
    v[idx] = C64::new(1.0, 0.0);
    v
}

pub struct DensePropagator {
    energies: Array1<f64>,
    vectors: Array2<C64>,
}

impl DensePropagator {
    pub fn new(h: &Array2<C64>) -> Self {
        let (energies, vectors) = eigh_hermitian(h).unwrap();
        let recon = vectors.dot(&Array2::from_diag(&energies.mapv(|x| C64::new(x, 0.0)))).dot(&vectors.t().mapv(|x| x.conj()));
        let err = (&recon - h).iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "eigendecomposition residual {err:e}");
        Self { energies, vectors }
    }

    pub fn evolve(&self, psi0: &Array1<C64>, t: f64) -> Array1<C64> {
        let c = self.vectors.t().mapv(|x| x.conj()).dot(psi0);
        let phased = Array1::from_shape_fn(c.len(), |i| c[i] * C64::from_polar(1.0, -self.energies[i] * t / HBAR_EV_FS));
        self.vectors.dot(&phased)
    }
}

/// Electronic reduced density matrix of a dense state vector.
pub fn dense_rho(psi: &Array1<C64>, dims: &[usize], e: usize) -> Array2<C64> {
    let inner: usize = dims[e + 1..].iter().product();
    let outer: usize = dims[..e].iter().product();
    let mut rho = Array2::<C64>::zeros((2, 2));
    for o in 0..outer {
        for r in 0..inner {
            for i in 0..2 {
                for j in 0..2 {
                    let a = psi[(o * 2 + i) * inner + r];
                    let b = psi[(o * 2 + j) * inner + r];
                    rho[[i, j]] += a * b.conj();
                }
            }
        }
    }
    rho
}
