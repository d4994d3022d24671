use kppfront::media::{MediumKind, Segment};
use kppfront::{make_dirac_comb, random_medium, Error, PeriodicMedium, ReactionSpec};

#[test]
fn random_media_are_seeded_and_keep_their_mean() {
    let a = random_medium(1.5, 2.0, 1.0, 42, 5).unwrap();
    let b = random_medium(1.5, 2.0, 1.0, 42, 5).unwrap();
    let c = random_medium(1.5, 2.0, 1.0, 43, 5).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!((a.integral(0.0, 2.0) / 2.0 - 1.5).abs() < 1e-12);
    let cells = a.sample_on_grid(128).unwrap();
    assert!(cells.iter().all(|v| *v >= 0.0));
    assert!((cells.iter().sum::<f64>() / 128.0 - 1.5).abs() < 1e-12);
}

#[test]
fn mollified_comb_carries_the_atom_mass() {
    let comb = make_dirac_comb(2.0, 3.0, 1.0).unwrap();
    assert_eq!(comb.atom(), Some((1.5, 6.0)));
    let h = comb.mollify(0.3).unwrap();
    assert!((h.integral(0.0, 3.0) - 6.0).abs() < 1e-12);
    assert!((h.integral(1.35, 1.65) - 6.0).abs() < 1e-12);
    assert!(h.integral(0.0, 1.3).abs() < 1e-12);
    assert!((h.integral(-3.0, 6.0) - 18.0).abs() < 1e-11);
}

#[test]
fn atoms_are_not_sampled() {
    let comb = make_dirac_comb(1.0, 1.0, 1.0).unwrap();
    assert!(matches!(comb.sample_on_grid(64), Err(Error::UnsupportedRepresentation(_))));
    assert!(matches!(comb.mollify(1.0), Err(Error::ParameterDomain(_))));
    let flat = PeriodicMedium::constant(1.0, 1.0, 1.0).unwrap();
    assert!(matches!(flat.mollify(0.1), Err(Error::UnsupportedRepresentation(_))));
}

#[test]
fn invalid_media_are_rejected() {
    assert!(PeriodicMedium::constant(1.0, -1.0, 1.0).is_err());
    assert!(PeriodicMedium::constant(0.0, 1.0, 1.0).is_err());
    assert!(PeriodicMedium::constant(1.0, 1.0, 0.0).is_err());
    assert!(PeriodicMedium::sampled(vec![1.0, -0.5, 1.0, 1.0], 0.625, 1.0, 1.0).is_err());
    assert!(PeriodicMedium::piecewise_constant(vec![], 1.0).is_err());
    assert!(PeriodicMedium::dirac_comb_at(1.0, 1.0, 1.0, 1.5).is_err());
    assert!(random_medium(1.0, 1.0, 1.0, 0, 0).is_err());
    assert!(ReactionSpec::saturating(0.0).is_err());
}

#[test]
fn piecewise_constant_mean_and_integral() {
    let m = PeriodicMedium::piecewise_constant(
        vec![Segment { length: 0.5, value: 3.0 }, Segment { length: 1.5, value: 1.0 }],
        2.0,
    )
    .unwrap();
    assert_eq!(m.period(), 2.0);
    assert!((m.mass() - 1.5).abs() < 1e-15);
    assert!((m.effective_mass() - 3.0).abs() < 1e-15);
    assert!((m.integral(0.25, 1.0) - 1.25).abs() < 1e-14);
    assert!(!m.is_constant());
}

#[test]
fn json_round_trip() {
    for m in [
        random_medium(1.0, 1.0, 2.0, 9, 3).unwrap(),
        make_dirac_comb(1.0, 2.0, 1.0).unwrap().mollify(0.5).unwrap(),
        PeriodicMedium::constant(0.5, 4.0, 1.0).unwrap(),
    ] {
        let back = PeriodicMedium::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.hash_key(), m.hash_key());
    }
    let comb = PeriodicMedium::from_json(r#"{"kind":"dirac_comb","L":2.0,"alpha":1.0,"offset":0.5}"#).unwrap();
    assert!(matches!(comb.kind(), MediumKind::DiracComb { .. }));
    assert_eq!(comb.slope(), 1.0);
    assert!(PeriodicMedium::from_json(r#"{"kind":"dirac_comb","L":2.0,"alpha":1.0,"offset":2.5}"#).is_err());
}
