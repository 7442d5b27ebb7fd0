mod common;

use common::{dense_hamiltonian, dense_initial, kron};
use ndarray::Array2;
use num_complex::Complex64 as C64;
use qdml::physmodel::{discretize_bath, ModelId, SiteExcitonModel};
use qdml::tdvp::initial_state;
use qdml::tensornet::{build_mpo, expectation, ChainLayout, SiteKind, SiteOrdering};

fn max_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn orderings() -> Vec<SiteOrdering> {
    vec![
        SiteOrdering::CentralElectronic,
        SiteOrdering::ElectronicFirst,
        SiteOrdering::Custom(vec![
            SiteKind::Mode { state: 1, index: 0 },
            SiteKind::Mode { state: 0, index: 0 },
            SiteKind::Electronic,
        ]),
    ]
}

#[test]
fn one_mode_per_state_matches_explicit_hamiltonian() {
    for id in ModelId::ALL {
        let model = SiteExcitonModel::preset(id).with_modes_per_state(1);
        let bath = discretize_bath(&model).unwrap();
        for ordering in orderings() {
            let layout = ChainLayout::new(&ordering, &bath).unwrap();
            let mpo = build_mpo(&model, &bath, 3, &layout).unwrap();
            let dense = mpo.to_dense();
            assert_eq!(dense.dim(), (18, 18));
            let explicit = dense_hamiltonian(&model, &bath, 3, &layout);
            assert!(max_diff(&dense, &explicit) < 1e-12, "{id:?} {ordering:?}");
            assert!(max_diff(&dense, &dense.t().mapv(|x| x.conj())) < 1e-12);
        }
    }
}

#[test]
fn two_modes_per_state_match() {
    let model = SiteExcitonModel::preset(ModelId::IV).with_modes_per_state(2);
    let bath = discretize_bath(&model).unwrap();
    let ordering = SiteOrdering::Custom(vec![
        SiteKind::Mode { state: 0, index: 1 },
        SiteKind::Mode { state: 0, index: 0 },
        SiteKind::Electronic,
        SiteKind::Mode { state: 1, index: 0 },
        SiteKind::Mode { state: 1, index: 1 },
    ]);
    let layout = ChainLayout::new(&ordering, &bath).unwrap();
    let mpo = build_mpo(&model, &bath, 3, &layout).unwrap();
    let explicit = dense_hamiltonian(&model, &bath, 3, &layout);
    assert!(max_diff(&mpo.to_dense(), &explicit) < 1e-12);
}

#[test]
fn decoupled_limit_is_block_sum() {
    let model = SiteExcitonModel::preset(ModelId::III).decoupled().with_modes_per_state(1);
    let bath = discretize_bath(&model).unwrap();
    let layout = ChainLayout::new(&SiteOrdering::ElectronicFirst, &bath).unwrap();
    let mpo = build_mpo(&model, &bath, 3, &layout).unwrap();
    let hs = model.system_hamiltonian();
    let h_sys = Array2::from_shape_fn((2, 2), |(i, j)| C64::new(hs[i][j], 0.0));
    let freqs: Vec<f64> = bath.states.iter().map(|b| qdml::units::cm_to_ev(b.frequencies[0])).collect();
    let num = |w: f64| Array2::from_shape_fn((3, 3), |(i, j)| C64::new(if i == j { i as f64 * w } else { 0.0 }, 0.0));
    let eye2 = Array2::<C64>::eye(2);
    let eye3 = Array2::<C64>::eye(3);
    let expect = kron(&kron(&h_sys, &eye3), &eye3) + kron(&kron(&eye2, &num(freqs[0])), &eye3) + kron(&kron(&eye2, &eye3), &num(freqs[1]));
    assert!(max_diff(&mpo.to_dense(), &expect) < 1e-12);
}

#[test]
fn initial_energy_is_site_energy() {
    for id in [ModelId::I, ModelId::III] {
        let model = SiteExcitonModel::preset(id).with_modes_per_state(2);
        let bath = discretize_bath(&model).unwrap();
        let layout = ChainLayout::new(&SiteOrdering::default(), &bath).unwrap();
        let mpo = build_mpo(&model, &bath, 4, &layout).unwrap();
        for excited in [1, 2] {
            let psi = initial_state(&layout, 4, excited).unwrap();
            let e = expectation(&psi, &mpo, &psi).unwrap();
            assert!((e.re - model.site_energy(excited - 1)).abs() < 1e-12);
            assert!(e.im.abs() < 1e-14);
            let v = dense_initial(&layout, 4, excited);
            assert!(psi.to_dense().iter().zip(&v).all(|(a, b)| (a - b).norm() < 1e-15));
        }
    }
}
