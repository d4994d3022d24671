use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::process::ExitCode;
use std::time::Instant;

use kppfront::comb::{comb_mu, comb_mu_zero_lambda};
use kppfront::eigen::{adjoint_psi, mu_grid, nadin_value, transfer_matrix_mu};
use kppfront::media::Segment;
use kppfront::sim::{dichotomy_check, run_cauchy, steady_state_1d, steady_state_1d_from, SimConfig};
use kppfront::speeds::{optimality_check, SpeedOptions, SpeedSolver};
use kppfront::torus2d::{torus_c_star, torus_mu, unboundedness_demo, BumpFamily, TorusMedium};
use kppfront::{make_dirac_comb, random_medium, PeriodicMedium, ReactionSpec, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<(bool, String)>;

fn theta_grid(k: usize) -> Vec<f64> {
    (0..k).map(|i| FRAC_PI_2 * i as f64 / (k - 1) as f64).collect()
}

fn random_family() -> Vec<PeriodicMedium> {
    (0..20).map(|seed| random_medium(1.0, 1.0, 1.0, seed, 4).unwrap()).collect()
}

fn homogeneous_speed() -> Outcome {
    let start = Instant::now();
    let m = PeriodicMedium::constant(1.0, 1.0, 1.0)?;
    let solver = SpeedSolver::new(&m, SpeedOptions::default())?;
    let mut worst = 0.0_f64;
    for t in theta_grid(19) {
        worst = worst.max((solver.c_star(t)?.c_star / 2.0 - 1.0).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((worst <= 1e-3 && secs < 1.0, format!("max rel err {worst:.2e}, {secs:.3} s")))
}

fn speed_bounds() -> Outcome {
    let mut media = random_family();
    for (alpha, l) in [(0.5, 1.0), (2.0, 1.0), (1.0, 0.5), (1.0, 2.0), (3.0, 3.0)] {
        media.push(random_medium(alpha, l, 1.0, 1000 + media.len() as u64, 4)?);
        media.push(make_dirac_comb(alpha, l, 1.0)?);
    }
    let worst = media
        .par_iter()
        .map(|m| {
            let solver = SpeedSolver::new(m, SpeedOptions::default())?;
            let (lo, hi) = solver.bounds();
            let mut excess = f64::NEG_INFINITY;
            for t in theta_grid(19) {
                let c = solver.c_star(t)?.c_star;
                excess = excess.max(lo - c).max(c - hi);
            }
            Ok(excess)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((worst <= 1e-6, format!("{} media, worst bound excess {worst:.3e}", media.len())))
}

fn comb_optimality() -> Outcome {
    let opts = SpeedOptions::default();
    let margins = random_family()
        .par_iter()
        .map(|m| {
            let mut least = f64::INFINITY;
            for t in [0.0, FRAC_PI_4, FRAC_PI_2] {
                let r = optimality_check(m, t, &opts)?;
                least = least.min(r.margin_c / r.strictness);
            }
            Ok(least)
        })
        .collect::<Result<Vec<f64>>>()?;
    let least = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((least > 1.0, format!("smallest margin {least:.3e} x (10 x tolerance)")))
}

fn monotonicity() -> Outcome {
    let solver = SpeedSolver::new(&make_dirac_comb(1.0, 1.0, 1.0)?, SpeedOptions::default())?;
    let report = kppfront::speeds::monotonicity_check(&solver, &theta_grid(19), false, 0.0, 1e-8)?;
    Ok((
        report.strictly_increasing,
        format!(
            "min increments c* {:.3e}, w {:.3e}",
            report.min_c_increment, report.min_w_increment
        ),
    ))
}

fn symmetry() -> Outcome {
    let m = random_medium(1.0, 1.0, 1.0, 7, 4)?;
    let solver = SpeedSolver::new(&m, SpeedOptions::default())?;
    let mut mismatches = 0;
    for t in theta_grid(19) {
        let c = solver.c_star(t)?.c_star.to_bits();
        if solver.c_star(-t)?.c_star.to_bits() != c || solver.c_star(t + PI)?.c_star.to_bits() != c {
            mismatches += 1;
        }
    }
    Ok((mismatches == 0, format!("{mismatches} mismatches over 19 angles")))
}

fn small_period() -> Outcome {
    let start = Instant::now();
    let solver = SpeedSolver::new(&make_dirac_comb(1.0, 0.01, 1.0)?, SpeedOptions::default())?;
    let mut worst = 0.0_f64;
    for t in theta_grid(19) {
        worst = worst.max((solver.c_star(t)?.c_star - 2.0).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((worst <= 0.02 && secs < 10.0, format!("max |c* - 2| = {worst:.4}, {secs:.3} s")))
}

fn large_period() -> Outcome {
    let l = 50.0;
    let solver = SpeedSolver::new(&make_dirac_comb(1.0, l, 1.0)?, SpeedOptions::default())?;
    let c0 = solver.c_star(0.0)?.c_star / l;
    let c90 = solver.c_star(FRAC_PI_2)?.c_star / l;
    let mut w_gap = 0.0_f64;
    for t in theta_grid(19) {
        let w = solver.spreading_speed(t)?.0 / l;
        w_gap = w_gap.max((w - 1.0 / (1.0 + t.cos().abs())).abs());
    }
    let aspect = solver.spreading_speed(FRAC_PI_2)?.0 / solver.spreading_speed(0.0)?.0;
    let pass = (c0 - 0.5).abs() <= 0.025 && (c90 - 1.0).abs() <= 0.05 && w_gap <= 0.05 && (aspect - 2.0).abs() <= 0.1;
    Ok((
        pass,
        format!("c*(0)/L {c0:.4}, c*(pi/2)/L {c90:.4}, max w/L gap {w_gap:.4}, aspect {aspect:.4}"),
    ))
}

fn comb_eigenvalue_bound() -> Outcome {
    let values = [0.25, 0.5, 1.0, 2.0, 4.0];
    let (mut worst_gap, mut worst_residual) = (f64::NEG_INFINITY, 0.0_f64);
    let mut pass = true;
    for &alpha in &values {
        for &l in &values {
            let r = comb_mu_zero_lambda(alpha, l, 1.0)?;
            let bound = -alpha * alpha * l * l / 4.0;
            worst_gap = worst_gap.max(r.mu - bound);
            worst_residual = worst_residual.max(r.residual.abs() / r.tolerance());
            pass &= r.mu < bound && r.residual.abs() <= r.tolerance();
        }
    }
    Ok((
        pass,
        format!("max mu - bound {worst_gap:.3e}, max residual/tolerance {worst_residual:.3e}"),
    ))
}

fn oracle_triangle() -> Outcome {
    let layered = [
        vec![(0.3, 2.0), (0.7, 0.2)],
        vec![(0.5, 0.0), (0.25, 3.0), (0.25, 1.0)],
        vec![(1.0, 1.5), (1.0, 0.5)],
    ];
    let mut worst_pc = 0.0_f64;
    for segs in layered {
        let m = PeriodicMedium::piecewise_constant(
            segs.iter().map(|&(length, value)| Segment { length, value }).collect(),
            1.0,
        )?;
        for lambda_bar in [0.0, 0.5, 1.5] {
            let grid = mu_grid(&m, lambda_bar, 0.0, 1024)?.mu;
            worst_pc = worst_pc.max((grid - transfer_matrix_mu(&m, lambda_bar)?).abs());
        }
    }
    let comb = make_dirac_comb(1.0, 1.0, 1.0)?;
    let mut gaps = Vec::new();
    for eps in [0.1, 0.05, 0.025] {
        let h = comb.mollify(eps)?;
        let mut gap = 0.0_f64;
        for lambda_bar in [0.0, 0.5, 1.5] {
            let exact = comb_mu(1.0, 1.0, 1.0, lambda_bar)?.mu;
            gap = gap.max((mu_grid(&h, lambda_bar, 0.0, 1024)?.mu - exact).abs() / exact.abs());
        }
        gaps.push(gap);
    }
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    let pass = worst_pc <= 1e-4 && decreasing && gaps[2] <= 1e-2;
    Ok((
        pass,
        format!("piecewise gap {worst_pc:.3e}, comb relative gaps {:.3e} {:.3e} {:.3e}", gaps[0], gaps[1], gaps[2]),
    ))
}

fn variational_certificate() -> Outcome {
    let n = 256;
    let media = [
        random_medium(1.0, 1.0, 1.0, 3, 4)?,
        PeriodicMedium::piecewise_constant(
            vec![Segment { length: 0.4, value: 2.0 }, Segment { length: 0.6, value: 0.5 }],
            1.0,
        )?,
        make_dirac_comb(1.0, 1.0, 1.0)?.mollify(0.2)?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_random, mut worst_optimal, mut min_gap) = (f64::INFINITY, 0.0_f64, f64::INFINITY);
    for m in &media {
        for (lambda, theta) in [(0.7, 0.3), (1.5, 1.0)] {
            let mu = mu_grid(m, lambda, theta, n)?.mu;
            for _ in 0..100 {
                let eta: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
                let cert = nadin_value(m, lambda, theta, &eta)?;
                worst_random = worst_random.min(cert.value_h - mu);
                min_gap = min_gap.min(cert.schwarz_gap);
            }
            let psi = mu_grid(m, lambda, theta, n)?.psi;
            let adj = adjoint_psi(m, lambda, theta, n)?.psi;
            let eta: Vec<f64> = psi.iter().zip(&adj).map(|(a, b)| (a * b).sqrt()).collect();
            let cert = nadin_value(m, lambda, theta, &eta)?;
            worst_optimal = worst_optimal.max((cert.value_h - mu).abs() / mu.abs().max(1.0));
            min_gap = min_gap.min(cert.schwarz_gap);
        }
    }
    let pass = worst_random >= -1e-8 && worst_optimal <= 1e-4 && min_gap >= 0.0;
    Ok((
        pass,
        format!("min H - mu {worst_random:.3e}, optimal rel gap {worst_optimal:.3e}, min Schwarz term {min_gap:.3e}"),
    ))
}

fn eigenvalue_identity() -> Outcome {
    let m = random_medium(1.0, 2.0, 1.0, 5, 4)?;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut mismatches = 0;
    for _ in 0..20 {
        let (lambda, theta) = (rng.gen_range(0.0..3.0), rng.gen_range(-PI..PI));
        let a = mu_grid(&m, lambda, theta, 256)?.mu;
        let b = mu_grid(&m, lambda * theta.cos(), 0.0, 256)?.mu;
        if a.to_bits() != b.to_bits() {
            mismatches += 1;
        }
    }
    Ok((mismatches == 0, format!("{mismatches} mismatches over 20 draws")))
}

fn simulation() -> Outcome {
    let start = Instant::now();
    let flat = PeriodicMedium::constant(1.0, 1.0, 1.0)?;
    let one_d = run_cauchy(&SimConfig::new(flat, ReactionSpec::F1, 120.0, 0.0, 0.1, 40.0))?;
    let speed_1d = one_d.traces[0].speed.unwrap_or(f64::NAN);
    let secs_1d = start.elapsed().as_secs_f64();

    let h = make_dirac_comb(1.0, 4.0, 1.0)?.mollify(0.2)?;
    let solver = SpeedSolver::new(&make_dirac_comb(1.0, 4.0, 1.0)?, SpeedOptions::default())?;
    let result = run_cauchy(&SimConfig::new(h, ReactionSpec::F1, 165.0, 215.0, 0.1, 40.0))?;
    let mut pass = (speed_1d / 2.0 - 1.0).abs() <= 0.1 && secs_1d < 60.0;
    let mut detail = format!("1D speed {speed_1d:.4} ({secs_1d:.2} s)");
    for theta in [0.0, FRAC_PI_2] {
        let w = solver.spreading_speed(theta)?.0;
        let fitted = result.trace(theta).and_then(|t| t.speed).unwrap_or(f64::NAN);
        let d = dichotomy_check(&result, theta, w)?;
        pass &= (fitted / w - 1.0).abs() <= 0.15 && d.holds;
        detail += &format!(
            "; theta {theta:.3}: fitted {fitted:.3} vs w {w:.3}, ahead {:.1e}, behind {:.3}",
            d.ahead, d.behind_ratio
        );
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 600.0;
    Ok((pass, format!("{detail}; total {secs:.1} s")))
}

fn torus_unboundedness() -> Outcome {
    let opts = SpeedOptions { lambda_rel_tol: 1e-7, ..SpeedOptions::default() };
    let report = unboundedness_demo(1.0, 1.0, 1.0, &[1, 2, 4, 8, 16], &BumpFamily::default(), &opts)?;
    let last = report.rows.last().expect("rows");

    let m = random_medium(1.0, 1.0, 1.0, 2, 4)?;
    let layered = TorusMedium::stratified(&m, 1.0, 256, 32)?;
    let mut cross = 0.0_f64;
    for (lambda, theta) in [(0.0, 0.0), (0.8, 0.4), (1.6, 1.2)] {
        let reference = mu_grid(&m, lambda, theta, 256)?.mu;
        cross = cross.max((torus_mu(&layered, lambda, theta)? - reference).abs() / reference.abs().max(1.0));
    }
    let c_layered = torus_c_star(&layered, 0.0, &opts)?.c_star;
    let c_line = SpeedSolver::new(&m, opts.clone())?.c_star(0.0)?.c_star;
    cross = cross.max((c_layered - c_line).abs() / c_line);

    let pass = report.mu_decreasing && report.c_star_increasing && last.mu < -10.0 && last.c_star > 6.0 && cross <= 1e-4;
    Ok((
        pass,
        format!(
            "mu {:.3}, c* {:.3} at n = {}; stratified gap {cross:.2e}",
            last.mu, last.c_star, last.n
        ),
    ))
}

fn steady_states() -> Outcome {
    let tol = 1e-10;
    let flat = PeriodicMedium::constant(1.0, 1.0, 1.0)?;
    let f1 = steady_state_1d(&make_dirac_comb(1.0, 4.0, 1.0)?.mollify(0.2)?, &ReactionSpec::F1, 80, tol)?;
    let f1_exact = f1.profile.values.iter().all(|v| *v == 1.0);
    let f2 = ReactionSpec::saturating(1.0)?;
    let flat_state = steady_state_1d(&flat, &f2, 64, tol)?;
    let flat_gap = flat_state.profile.values.iter().fold(0.0_f64, |a, v| a.max((v - 1.0).abs()));
    let h = make_dirac_comb(1.0, 4.0, 1.0)?.mollify(0.2)?;
    let n = 80;
    let low = steady_state_1d_from(&h, &f2, n, tol, &vec![0.1; n])?;
    let high: Vec<f64> = (0..n).map(|i| 3.0 + (2.0 * PI * i as f64 / n as f64).sin()).collect();
    let high = steady_state_1d_from(&h, &f2, n, tol, &high)?;
    let comb_gap = low
        .profile
        .values
        .iter()
        .zip(&high.profile.values)
        .fold(0.0_f64, |a, (p, q)| a.max((p - q).abs()));
    let scale = low.profile.max();
    let pass = f1_exact && flat_gap <= tol && comb_gap <= 2.0 * tol * scale;
    Ok((
        pass,
        format!("F1 exact {f1_exact}, F2 flat gap {flat_gap:.2e}, F2 comb gap {comb_gap:.2e}"),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 14] = [
        ("homogeneous speed", homogeneous_speed),
        ("speed bounds", speed_bounds),
        ("comb optimality", comb_optimality),
        ("monotonicity in theta", monotonicity),
        ("direction symmetry", symmetry),
        ("small period limit", small_period),
        ("large period limit", large_period),
        ("comb eigenvalue bound", comb_eigenvalue_bound),
        ("oracle triangle", oracle_triangle),
        ("variational certificate", variational_certificate),
        ("eigenvalue identity", eigenvalue_identity),
        ("simulation speed and dichotomy", simulation),
        ("torus unboundedness", torus_unboundedness),
        ("steady states", steady_states),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(outcome) => outcome,
            Err(e) => (false, format!("error: {e}")),
        };
        failures += usize::from(!pass);
        println!(
            "{} criterion {:>2} {name}: {detail} [{:.2} s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
