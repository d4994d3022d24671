use std::f64::consts::PI;

use kppfront::sim::{
    comparison_check, front_steady_state, hausdorff_distance, run_cauchy, shape_snapshot, steady_state_1d, SimConfig,
};
use kppfront::{make_dirac_comb, random_medium, Error, PeriodicMedium, ReactionSpec};

fn flat() -> PeriodicMedium {
    PeriodicMedium::constant(1.0, 1.0, 1.0).unwrap()
}

fn speed(cfg: &SimConfig) -> f64 {
    run_cauchy(cfg).unwrap().traces[0].speed.expect("fitted speed")
}

#[test]
fn homogeneous_line_spreads_near_two() {
    let cfg = SimConfig::new(flat(), ReactionSpec::F1, 120.0, 0.0, 0.1, 40.0);
    let r = run_cauchy(&cfg).unwrap();
    let c = r.traces[0].speed.unwrap();
    assert!((c - 2.0).abs() < 0.2, "{c}");
    // The logarithmic delay keeps finite-time speeds below the limit.
    assert!(c < 2.0);
    assert!(r.metadata.boundary_clear);
    assert!(r.metadata.max_u <= 1.0 + 1e-12 && r.metadata.min_u >= 0.0);
}

#[test]
fn line_speed_is_stable_under_refinement() {
    let m = random_medium(1.0, 2.0, 1.0, 5, 3).unwrap();
    let coarse = speed(&SimConfig::new(m.clone(), ReactionSpec::F1, 100.0, 0.0, 0.1, 30.0));
    let fine = speed(&SimConfig::new(m, ReactionSpec::F1, 100.0, 0.0, 0.05, 30.0));
    assert!((coarse / fine - 1.0).abs() < 0.03, "{coarse} {fine}");
}

#[test]
fn saturating_reaction_tracks_half_the_steady_state() {
    let mut cfg = SimConfig::new(flat(), ReactionSpec::saturating(2.0).unwrap(), 100.0, 0.0, 0.1, 30.0);
    cfg.initial.amplitude = 0.5;
    let p = front_steady_state(&cfg).unwrap();
    assert!((p.max() - 0.5).abs() < 1e-9 && (p.min() - 0.5).abs() < 1e-9);
    let r = run_cauchy(&cfg).unwrap();
    let c = r.traces[0].speed.unwrap();
    assert!((c - 2.0).abs() < 0.2, "{c}");
    assert!(r.metadata.max_u <= 0.5 + 1e-9);
}

#[test]
fn steady_states() {
    let p = steady_state_1d(&flat(), &ReactionSpec::F1, 32, 1e-10).unwrap();
    assert!(p.profile.values.iter().all(|v| *v == 1.0));
    let h = make_dirac_comb(1.0, 2.0, 1.0).unwrap().mollify(0.5).unwrap();
    let s = steady_state_1d(&h, &ReactionSpec::saturating(1.0).unwrap(), 64, 1e-10).unwrap();
    assert!(s.residual < 1e-9);
    // The profile peaks on the bump at x = L/2.
    assert!((s.profile.eval(1.0) - s.profile.max()).abs() < 1e-12);
    assert!(s.profile.min() > 0.0);
}

#[test]
fn solutions_stay_ordered() {
    let h = make_dirac_comb(1.0, 2.0, 1.0).unwrap().mollify(0.5).unwrap();
    let mut lower = SimConfig::new(h, ReactionSpec::F1, 20.0, 20.0, 0.2, 6.0);
    lower.snapshot_times = vec![2.0, 4.0, 6.0];
    lower.initial.amplitude = 0.3;
    lower.initial.radius = 1.5;
    let mut upper = lower.clone();
    upper.initial.amplitude = 0.8;
    upper.initial.radius = 2.5;
    let check = comparison_check(&upper, &lower).unwrap();
    assert!(check.holds, "{:?}", check.min_difference);
    assert_eq!(check.times.len(), 3);
    assert!(comparison_check(&lower, &upper).is_err());
}

#[test]
fn homogeneous_plane_grows_a_disc() {
    let mut cfg = SimConfig::new(flat(), ReactionSpec::F1, 140.0, 140.0, 0.25, 60.0);
    cfg.thetas = vec![0.0, PI / 4.0, PI / 2.0];
    let r = run_cauchy(&cfg).unwrap();
    let speeds: Vec<f64> = r.traces.iter().map(|t| t.speed.unwrap()).collect();
    assert!(speeds.iter().all(|c| (c - 2.0).abs() < 0.2), "{speeds:?}");
    let shape = shape_snapshot(&r.final_field, 0.5, &front_steady_state(&cfg).unwrap()).unwrap();
    let circle: Vec<[f64; 2]> = (0..256)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / 256.0;
            [2.0 * a.cos(), 2.0 * a.sin()]
        })
        .collect();
    let d = hausdorff_distance(&shape, &circle);
    assert!(d / 2.0 < 0.1, "relative Hausdorff distance {}", d / 2.0);
}

#[test]
fn shape_needs_a_positive_time() {
    let mut cfg = SimConfig::new(flat(), ReactionSpec::F1, 10.0, 10.0, 0.5, 0.05);
    cfg.snapshot_times = vec![0.0];
    let r = run_cauchy(&cfg).unwrap();
    let p = front_steady_state(&cfg).unwrap();
    assert!(matches!(shape_snapshot(&r.snapshots[0], 0.5, &p), Err(Error::Estimation(_))));
}

#[test]
fn invalid_configurations() {
    let comb = make_dirac_comb(1.0, 2.0, 1.0).unwrap();
    let cfg = SimConfig::new(comb.clone(), ReactionSpec::F1, 50.0, 0.0, 0.1, 10.0);
    assert!(matches!(run_cauchy(&cfg), Err(Error::UnsupportedRepresentation(_))));
    let thin = SimConfig::new(comb.mollify(0.1).unwrap(), ReactionSpec::F1, 50.0, 0.0, 0.1, 10.0);
    assert!(matches!(run_cauchy(&thin), Err(Error::ParameterDomain(_))));
    let mut unstable = SimConfig::new(flat(), ReactionSpec::F1, 50.0, 0.0, 0.1, 10.0);
    unstable.dt = Some(0.01);
    assert!(unstable.validate().is_err());
    let cramped = SimConfig::new(flat(), ReactionSpec::F1, 1.0, 0.0, 0.1, 10.0);
    assert!(cramped.validate().is_err());
}

#[test]
fn config_json_round_trip() {
    let cfg = SimConfig::new(random_medium(1.0, 1.0, 1.0, 2, 2).unwrap(), ReactionSpec::F1, 30.0, 20.0, 0.2, 5.0);
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(SimConfig::from_json(&text).unwrap(), cfg);
}

#[test]
fn runs_are_deterministic() {
    let cfg = SimConfig::new(random_medium(1.0, 1.0, 1.0, 2, 2).unwrap(), ReactionSpec::F1, 30.0, 0.0, 0.2, 5.0);
    let a = run_cauchy(&cfg).unwrap();
    let b = run_cauchy(&cfg).unwrap();
    assert_eq!(a.final_field, b.final_field);
    assert_eq!(a.traces, b.traces);
}
