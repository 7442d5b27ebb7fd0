use qdml::units::*;
use proptest::prelude::*;

#[test]
fn ev_to_wavenumber_constant() {
    assert!((convert(1.0, Unit::ElectronVolt, Unit::Wavenumber) - 8065.54).abs() < 0.01);
}

#[test]
fn identity_and_unknown() {
    for u in [Unit::Wavenumber, Unit::ElectronVolt, Unit::InverseFemtosecond] {
        assert_eq!(convert(3.25, u, u), 3.25);
    }
    assert!(convert_named(1.0, "eV", "hartree").is_err());
    assert!((convert_named(1.0, "eV", "fs-1").unwrap() - 1.0 / HBAR_EV_FS).abs() < 1e-15);
}

proptest! {
    #[test]
    fn round_trip(x in -1e6f64..1e6) {
        for (a, b) in [
            (Unit::ElectronVolt, Unit::Wavenumber),
            (Unit::Wavenumber, Unit::InverseFemtosecond),
            (Unit::InverseFemtosecond, Unit::ElectronVolt),
        ] {
            let back = convert(convert(x, a, b), b, a);
            prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(1e-300));
        }
    }
}
