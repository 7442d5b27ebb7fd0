use qdml::physmodel::{DiscretizedBath, SiteExcitonModel};
use qdml::tensornet::mpo::*;
use qdml::physmodel::{discretize_bath, ModelId};

fn small(ordering: SiteOrdering) -> (SiteExcitonModel, DiscretizedBath, ChainLayout) {
    let model = SiteExcitonModel::preset(ModelId::III).with_modes_per_state(2);
    let bath = discretize_bath(&model).unwrap();
    let layout = ChainLayout::new(&ordering, &bath).unwrap();
    (model, bath, layout)
}

#[test]
fn central_layout_order() {
    let (_, _, layout) = small(SiteOrdering::CentralElectronic);
    assert_eq!(
        layout.sites(),
        &[
            SiteKind::Mode { state: 0, index: 1 },
            SiteKind::Mode { state: 0, index: 0 },
            SiteKind::Electronic,
            SiteKind::Mode { state: 1, index: 0 },
            SiteKind::Mode { state: 1, index: 1 },
        ]
    );
    assert_eq!(layout.electronic_site(), 2);
    assert_eq!(layout.local_dims(3), vec![3, 3, 2, 3, 3]);
}

#[test]
fn bond_dims_are_small() {
    let (model, bath, layout) = small(SiteOrdering::CentralElectronic);
    let mpo = build_mpo(&model, &bath, 3, &layout).unwrap();
    assert_eq!(mpo.bond_dims(), vec![1, 3, 3, 3, 3, 1]);
    let (model, bath, layout) = small(SiteOrdering::ElectronicFirst);
    let mpo = build_mpo(&model, &bath, 3, &layout).unwrap();
    assert!(mpo.bond_dims().iter().all(|&b| b <= 4));
}

#[test]
fn hermitian() {
    for ord in [SiteOrdering::CentralElectronic, SiteOrdering::ElectronicFirst] {
        let (model, bath, layout) = small(ord);
        let mpo = build_mpo(&model, &bath, 3, &layout).unwrap();
        assert!(mpo.hermiticity_residual() < 1e-12);
    }
}

#[test]
fn invalid_orderings() {
    let model = SiteExcitonModel::preset(ModelId::I).with_modes_per_state(1);
    let bath = discretize_bath(&model).unwrap();
    let twice = SiteOrdering::Custom(vec![
        SiteKind::Electronic,
        SiteKind::Mode { state: 0, index: 0 },
        SiteKind::Mode { state: 0, index: 0 },
    ]);
    assert!(ChainLayout::new(&twice, &bath).is_err());
    let missing = SiteOrdering::Custom(vec![SiteKind::Electronic, SiteKind::Mode { state: 0, index: 0 }]);
    assert!(ChainLayout::new(&missing, &bath).is_err());
    let no_e = SiteOrdering::Custom(vec![
        SiteKind::Mode { state: 1, index: 0 },
        SiteKind::Mode { state: 0, index: 0 },
    ]);
    assert!(ChainLayout::new(&no_e, &bath).is_err());
    let layout = ChainLayout::new(&SiteOrdering::default(), &bath).unwrap();
    assert!(build_mpo(&model, &bath, 1, &layout).is_err());
}
