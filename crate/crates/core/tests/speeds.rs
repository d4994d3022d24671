use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4};

use kppfront::speeds::{
    asymptotic_reference, comb_c_star, direction_cos, intersect_halfplanes, minimize_speed, HalfPlane, Regime,
    SpeedOptions, SpeedSolver,
};
use kppfront::{make_dirac_comb, random_medium, Error, PeriodicMedium};

// Bounded scalar minimization of (λ² - μ)/λ over the extended-precision
// comb eigenvalue, and of c*(φ)/cos(θ - φ) on top of it.
const COMB_C_STAR: [(f64, f64, f64); 5] = [
    (1.0, 0.0, 2.081482294926024),
    (1.0, FRAC_PI_4, 2.0842278882400644),
    (1.0, FRAC_PI_2, 2.087253791183074),
    (4.0, 0.0, 2.9469481569948015),
    (4.0, FRAC_PI_2, 4.0026702976799555),
];
const COMB_W: [(f64, f64, f64); 3] = [
    (1.0, FRAC_PI_4, 2.0842199393169136),
    (4.0, FRAC_PI_4, 3.1654884046241727),
    (4.0, FRAC_PI_3, 3.365984130515881),
];

fn comb_solver(l: f64) -> SpeedSolver {
    SpeedSolver::new(&make_dirac_comb(1.0, l, 1.0).unwrap(), SpeedOptions::default()).unwrap()
}

#[test]
fn comb_speeds_match_reference_minimization() {
    for (l, theta, expected) in COMB_C_STAR {
        let c = comb_solver(l).c_star(theta).unwrap();
        assert!((c.c_star - expected).abs() < 1e-8, "L={l} θ={theta}: {}", c.c_star);
        let direct = comb_c_star(1.0, l, 1.0, theta, &SpeedOptions::default()).unwrap();
        assert!((direct.c_star - c.c_star).abs() <= 2.0 * c.tolerance);
    }
}

#[test]
fn comb_spreading_speeds_match_reference_envelope() {
    for (l, theta, expected) in COMB_W {
        let (w, phi) = comb_solver(l).spreading_speed(theta).unwrap();
        assert!((w - expected).abs() < 1e-6, "L={l} θ={theta}: {w}");
        assert!((0.0..=FRAC_PI_2).contains(&phi));
    }
}

#[test]
fn spreading_speed_on_the_axes_equals_c_star() {
    let s = comb_solver(4.0);
    for theta in [0.0, FRAC_PI_2] {
        let c = s.c_star(theta).unwrap().c_star;
        let (w, _) = s.spreading_speed(theta).unwrap();
        assert!((w - c).abs() < 1e-9 * c);
    }
}

#[test]
fn spreading_never_exceeds_the_minimal_speed() {
    let s = SpeedSolver::new(&random_medium(1.0, 2.0, 1.0, 6, 4).unwrap(), SpeedOptions::default()).unwrap();
    for i in 0..=8 {
        let theta = FRAC_PI_2 * i as f64 / 8.0;
        let c = s.c_star(theta).unwrap().c_star;
        let (w, _) = s.spreading_speed(theta).unwrap();
        assert!(w <= c * (1.0 + 1e-12));
        let (lo, _) = s.bounds();
        assert!(w >= lo * (1.0 - 1e-9));
    }
}

#[test]
fn homogeneous_wulff_shape_is_a_disc() {
    let m = PeriodicMedium::constant(1.0, 1.0, 1.0).unwrap();
    let opts = SpeedOptions { phi_grid: 2048, ..SpeedOptions::default() };
    let shape = SpeedSolver::new(&m, opts).unwrap().wulff_shape(64).unwrap();
    assert!(shape.w_values.iter().all(|w| (w - 2.0).abs() < 1e-8));
    assert_eq!(shape.vertices.len(), 4096);
    for v in &shape.vertices {
        assert!((v[0].hypot(v[1]) - 2.0).abs() < 1e-6);
    }
    assert!(shape.support_error < 1e-8);
}

#[test]
fn wulff_shape_has_the_polar_samples() {
    let s = comb_solver(4.0);
    let shape = s.wulff_shape(64).unwrap();
    assert_eq!(shape.theta_grid.len(), 64);
    for (theta, p) in shape.theta_grid.iter().zip(&shape.polygon) {
        let w = s.spreading_speed(*theta).unwrap().0;
        assert!((p[0].hypot(p[1]) - w).abs() < 1e-12 * w);
    }
    assert!(s.wulff_shape(16).is_err());
}

#[test]
fn halfplane_square() {
    let planes: Vec<HalfPlane> = (0..4)
        .map(|k| HalfPlane { phi: FRAC_PI_2 * k as f64, offset: 1.0 })
        .collect();
    let mut v = intersect_halfplanes(&planes);
    v.iter_mut().for_each(|p| p.iter_mut().for_each(|x| *x = (*x * 1e9).round() / 1e9));
    for corner in [[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]] {
        assert!(v.contains(&corner), "{v:?}");
    }
}

#[test]
fn direction_cosines_snap_on_the_axes() {
    assert_eq!(direction_cos(FRAC_PI_2), 0.0);
    assert_eq!(direction_cos(-FRAC_PI_2), 0.0);
    assert_eq!(direction_cos(std::f64::consts::PI), 1.0);
    assert_eq!(direction_cos(0.3), direction_cos(-0.3));
}

#[test]
fn asymptotic_references() {
    assert_eq!(asymptotic_reference(0.3, 4.0, 0.01, 1.0, Regime::SmallL).unwrap(), 4.0);
    assert!((asymptotic_reference(0.0, 1.0, 50.0, 1.0, Regime::LargeLCStar).unwrap() - 25.0).abs() < 1e-12);
    assert!((asymptotic_reference(FRAC_PI_2, 1.0, 50.0, 1.0, Regime::LargeLCStar).unwrap() - 50.0).abs() < 1e-12);
    assert!((asymptotic_reference(0.0, 1.0, 50.0, 1.0, Regime::LargeLW).unwrap() - 25.0).abs() < 1e-12);
    assert!(asymptotic_reference(0.0, 1.0, -1.0, 1.0, Regime::SmallL).is_err());
}

#[test]
fn minimizer_finds_a_quadratic_valley() {
    let opts = SpeedOptions::default();
    let min = minimize_speed(|l| Ok(-1.0 + 0.0 * l), 0.5, &opts).unwrap();
    assert!((min.value - 2.0).abs() < 1e-9);
    assert!((min.lambda - 1.0).abs() < 1e-4);
    let stubborn = minimize_speed(|_| Err(Error::Estimation("no".into())), 1.0, &opts);
    assert!(stubborn.is_err());
}

#[test]
fn slope_enters_only_through_the_effective_mass() {
    let a = SpeedSolver::new(&random_medium(2.0, 1.0, 0.5, 3, 3).unwrap(), SpeedOptions::default()).unwrap();
    let b = SpeedSolver::new(&random_medium(1.0, 1.0, 1.0, 3, 3).unwrap(), SpeedOptions::default()).unwrap();
    for theta in [0.0, 0.7] {
        let (ca, cb) = (a.c_star(theta).unwrap().c_star, b.c_star(theta).unwrap().c_star);
        assert!((ca - cb).abs() < 1e-8, "{ca} {cb}");
    }
}
