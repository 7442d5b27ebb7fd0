use ndarray::Array1;
use num_complex::Complex64 as C64;
use qdml::physmodel::{discretize_bath, SiteExcitonModel};
use qdml::tensornet::{
    ChainLayout, MatrixProductOperator, MatrixProductState,
    SiteOrdering,
};
use qdml::tdvp::*;
use qdml::physmodel::ModelId;
use qdml::units::HBAR_EV_FS;

fn layout_for(model: &SiteExcitonModel) -> ChainLayout {
    ChainLayout::new(&SiteOrdering::default(), &discretize_bath(model).unwrap()).unwrap()
}

#[test]
fn initial_density_matrix() {
    let model = SiteExcitonModel::preset(ModelId::I).with_modes_per_state(3);
    let layout = layout_for(&model);
    let psi = initial_state(&layout, 4, 1).unwrap();
    assert!(psi.bond_dims().iter().all(|&b| b == 1));
    assert!((psi.norm() - 1.0).abs() < 1e-14);
    let rho = reduced_density_matrix(&psi, layout.electronic_site()).unwrap();
    assert_eq!(DensityRow::from_matrix(&rho), DensityRow { rho11: 1.0, rho22: 0.0, re_rho12: 0.0, im_rho12: 0.0 });
    let psi2 = initial_state(&layout, 4, 2).unwrap();
    let rho2 = reduced_density_matrix(&psi2, layout.electronic_site()).unwrap();
    assert_eq!(rho2[[1, 1]].re, 1.0);
    assert!(initial_state(&layout, 4, 3).is_err());
}

#[test]
fn superposition_density_matrix() {
    let model = SiteExcitonModel::preset(ModelId::I).with_modes_per_state(1);
    let layout = layout_for(&model);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let vac = Array1::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    let el = Array1::from_vec(vec![C64::new(h, 0.0), C64::new(h, 0.0)]);
    let psi = MatrixProductState::product(&[vac.clone(), el, vac]).unwrap();
    let rho = reduced_density_matrix(&psi, 1).unwrap();
    for x in rho.iter() {
        assert!((x - C64::new(0.5, 0.0)).norm() < 1e-15);
    }
    assert!((rho[[0, 1]] - rho[[1, 0]].conj()).norm() < 1e-12);
    assert_eq!(layout.electronic_site(), 1);
}

#[test]
fn zero_generator_leaves_state() {
    let model = SiteExcitonModel::preset(ModelId::I).with_modes_per_state(2);
    let layout = layout_for(&model);
    let mut psi = initial_state(&layout, 3, 1).unwrap();
    psi.pad_bonds(3).unwrap();
    let zero = MatrixProductOperator::zero(&layout.local_dims(3));
    for scheme in [Scheme::OneSite, Scheme::TwoSite] {
        let cfg = PropagationConfig { scheme, ..Default::default() };
        let out = tdvp_sweep(&psi, &zero, 0.5, &cfg).unwrap();
        let (a, b) = (psi.to_dense(), out.to_dense());
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).norm() < 1e-12));
    }
    let uncentered = MatrixProductState::new(psi.sites().to_vec()).unwrap();
    assert!(tdvp_sweep(&uncentered, &zero, 0.5, &PropagationConfig::default()).is_err());
}

#[test]
fn rabi_oscillation_without_bath() {
    let model = SiteExcitonModel::preset(ModelId::I).decoupled().with_modes_per_state(2);
    for scheme in [Scheme::OneSite, Scheme::TwoSite] {
        let cfg = PropagationConfig {
            t_end: 100.0,
            scheme,
            n_boson_levels: 3,
            ..Default::default()
        };
        let traj = propagate(&model, &cfg).unwrap();
        assert_eq!(traj.len(), 201);
        for (t, row) in traj.times.iter().zip(&traj.rows) {
            let expect = (model.electronic_coupling * t / HBAR_EV_FS).cos().powi(2);
            assert!((row.rho11 - expect).abs() < 1e-6, "{scheme:?} t={t}");
        }
    }
}

#[test]
fn config_validation() {
    let bad = PropagationConfig { dt: 0.0, ..Default::default() };
    assert!(bad.validate().is_err());
    let bad = PropagationConfig { t_end: 0.1, ..Default::default() };
    assert!(bad.validate().is_err());
    assert_eq!(PropagationConfig::default().n_steps(), 2000);
}
