//! `kppfront` command-line interface.
//!
//! Every subcommand writes one CSV and one JSON manifest. Exit codes: 0 on
//! success, 2 for usage errors, 3 for numerical failures, 4 when a checked
//! property does not hold.

mod manifest;

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kppfront::eigen::{dispersion_curve, mu_grid};
use kppfront::output::{self, Table};
use kppfront::sim::{run_cauchy, shape_snapshot, SimConfig};
use kppfront::speeds::{asymptotic_reference, monotonicity_check, Regime, SpeedOptions, SpeedSolver};
use kppfront::torus2d::{unboundedness_demo, BumpFamily};
use kppfront::{make_dirac_comb, Error, PeriodicMedium};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use manifest::{manifest_path, RunManifest};

const THREADS_ENV: &str = "KPPFRONT_THREADS";

#[derive(Parser, Debug)]
#[command(name = "kppfront", version, about = "Front speeds for KPP equations in stratified periodic media")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Principal eigenvalue μ(λ, θ) along a λ grid.
    Dispersion(DispersionArgs),
    /// Minimal speeds c*(θ) and spreading speeds w(θ) on [0, π/2].
    Speeds(SpeedsArgs),
    /// Spreading speeds around the circle and the Wulff polygon.
    Wulff(WulffArgs),
    /// Computed comb speeds against the small- and large-period laws.
    Asymptotics(AsymptoticsArgs),
    /// Finite-difference simulation from a JSON configuration.
    Simulate(SimulateArgs),
    /// Torus eigenvalues and speeds along a concentrating bump family.
    TorusDemo(TorusArgs),
}

#[derive(Args, Debug, Clone)]
struct MediumArgs {
    /// Medium description as JSON.
    #[arg(long, conflicts_with_all = ["comb", "constant"])]
    medium: Option<PathBuf>,
    /// Dirac comb `alpha,L`.
    #[arg(long, value_parser = parse_pair)]
    comb: Option<(f64, f64)>,
    /// Constant coefficient `alpha,L`.
    #[arg(long, value_parser = parse_pair, conflicts_with = "comb")]
    constant: Option<(f64, f64)>,
    /// Reaction slope f'(0).
    #[arg(long, default_value_t = 1.0)]
    slope: f64,
    /// Replace the comb atom by a bump of this width.
    #[arg(long)]
    mollify: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
    /// Manifest path; defaults to `<out>.manifest.json`.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DispersionArgs {
    #[command(flatten)]
    medium: MediumArgs,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    /// Inclusive grid `start:stop:step`.
    #[arg(long, value_parser = parse_range)]
    lambda_grid: Grid,
    #[arg(long, default_value_t = 256)]
    grid_n: usize,
    /// Add a reference column from the comb mollified to this width.
    #[arg(long)]
    reference_mollified: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SpeedsArgs {
    #[command(flatten)]
    medium: MediumArgs,
    /// Number of equally spaced directions on [0, π/2].
    #[arg(long, default_value_t = 19)]
    theta_grid: usize,
    #[arg(long, default_value_t = 256)]
    grid_n: usize,
    #[arg(long, default_value_t = 256)]
    phi_grid: usize,
    /// Exit with code 4 unless c* and w increase strictly on the grid.
    #[arg(long)]
    check_monotone: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct WulffArgs {
    #[command(flatten)]
    medium: MediumArgs,
    #[arg(long, default_value_t = 128)]
    directions: usize,
    #[arg(long, default_value_t = 256)]
    phi_grid: usize,
    #[arg(long, default_value_t = 256)]
    grid_n: usize,
    /// Optional CSV of the half-plane intersection vertices.
    #[arg(long)]
    vertices_out: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct AsymptoticsArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long = "L")]
    period: f64,
    #[arg(long, default_value_t = 1.0)]
    slope: f64,
    #[arg(long, default_value_t = 19)]
    theta_grid: usize,
    /// Exit with code 4 unless the chosen limit law holds to tolerance.
    #[arg(long, value_enum)]
    check: Option<Limit>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Limit {
    SmallL,
    LargeL,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Trace CSV `(theta, t, r)`.
    #[arg(long)]
    out: PathBuf,
    /// Contour CSV `(x, y)` of the final level set scaled by 1/t (2D only).
    #[arg(long)]
    contour_out: Option<PathBuf>,
    /// Run metadata JSON.
    #[arg(long)]
    metadata_out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TorusArgs {
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long = "L1", default_value_t = 1.0)]
    l1: f64,
    #[arg(long = "L2", default_value_t = 1.0)]
    l2: f64,
    /// Increasing list of concentration indices.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    n: Vec<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `a,b`, got `{s}`"))?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    Ok((a, b))
}

#[derive(Clone, Debug)]
struct Grid(Vec<f64>);

/// Inclusive `start:stop:step`; points are `start + k·step`.
fn parse_range(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, h] = parts[..] else {
        return Err(format!("expected `start:stop:step`, got `{s}`"));
    };
    let p = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x}: {e}"));
    let (a, b, h) = (p(a)?, p(b)?, p(h)?);
    if !(h > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
        return Err(format!("invalid range `{s}`"));
    }
    let count = ((b - a) / h + 1e-9).floor() as usize;
    Ok(Grid((0..=count).map(|k| a + k as f64 * h).collect()))
}

/// Maps library errors onto the exit-code contract.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ParameterDomain(_) | Error::UnsupportedRepresentation(_) | Error::Io(_) | Error::Json(_) => 2,
        Error::NumericalFailure { .. } | Error::Estimation(_) => 3,
        Error::PropertyFailure(_) => 4,
    }
}

fn load_medium(args: &MediumArgs, manifest: &mut RunManifest) -> Result<PeriodicMedium, Error> {
    let m = if let Some(path) = &args.medium {
        let text = std::fs::read(path)?;
        manifest.hash_input("medium", &text);
        PeriodicMedium::from_json(&String::from_utf8_lossy(&text))?
    } else if let Some((alpha, l)) = args.comb {
        make_dirac_comb(alpha, l, args.slope)?
    } else if let Some((alpha, l)) = args.constant {
        PeriodicMedium::constant(alpha, l, args.slope)?
    } else {
        return Err(Error::ParameterDomain("one of --medium, --comb, --constant is required".into()));
    };
    let m = match args.mollify {
        Some(eps) => m.mollify(eps)?,
        None => m,
    };
    manifest.hash_input("resolved_medium", m.to_json()?.as_bytes());
    Ok(m)
}

fn medium_params(args: &MediumArgs) -> Value {
    json!({
        "medium": args.medium,
        "comb": args.comb.map(|(a, l)| [a, l]),
        "constant": args.constant.map(|(a, l)| [a, l]),
        "slope": args.slope,
        "mollify": args.mollify,
    })
}

fn theta_grid(k: usize) -> Result<Vec<f64>, Error> {
    if k < 2 {
        return Err(Error::ParameterDomain("theta grid needs at least 2 points".into()));
    }
    Ok((0..k).map(|i| FRAC_PI_2 * i as f64 / (k - 1) as f64).collect())
}

fn write_table(table: &Table, path: &Path, manifest: &mut RunManifest) -> Result<(), Error> {
    table.write(path)?;
    manifest.outputs.push(path.to_path_buf());
    Ok(())
}

fn cmd_dispersion(a: &DispersionArgs, mf: &mut RunManifest) -> Result<(), Error> {
    let m = load_medium(&a.medium, mf)?;
    let samples = dispersion_curve(&m, a.theta, &a.lambda_grid.0, a.grid_n)?;
    let reference = match a.reference_mollified {
        Some(eps) => {
            let moll = m.mollify(eps)?;
            Some(
                a.lambda_grid
                    .0
                    .par_iter()
                    .map(|l| mu_grid(&moll, *l, a.theta, a.grid_n).map(|s| s.mu))
                    .collect::<Result<Vec<_>, _>>()?,
            )
        }
        None => None,
    };
    let table = output::dispersion_table(&samples, reference.as_deref());
    write_table(&table, &a.output.out, mf)?;
    let max_residual = samples.iter().map(|s| s.residual).fold(0.0, f64::max);
    let agreement = reference.as_ref().map(|r| {
        samples
            .iter()
            .zip(r)
            .map(|(s, x)| (s.mu - x).abs())
            .fold(0.0, f64::max)
    });
    mf.diagnostics = json!({
        "rows": samples.len(),
        "method": samples[0].method.label(),
        "max_residual": max_residual,
        "max_agreement_gap": agreement,
    });
    Ok(())
}

fn cmd_speeds(a: &SpeedsArgs, mf: &mut RunManifest) -> Result<(), Error> {
    let m = load_medium(&a.medium, mf)?;
    let opts = SpeedOptions {
        grid_n: a.grid_n,
        phi_grid: a.phi_grid,
        ..SpeedOptions::default()
    };
    let solver = SpeedSolver::new(&m, opts)?;
    let grid = theta_grid(a.theta_grid)?;
    let speeds = grid.par_iter().map(|t| solver.c_star(*t)).collect::<Result<Vec<_>, _>>()?;
    let spreading = grid
        .par_iter()
        .map(|t| solver.spreading_speed(*t))
        .collect::<Result<Vec<_>, _>>()?;
    write_table(&output::speeds_table(&speeds, &spreading), &a.output.out, mf)?;
    let (lower, upper) = solver.bounds();
    mf.diagnostics = json!({
        "bounds": [lower, upper],
        "evaluations": speeds.iter().map(|s| s.evaluations).sum::<usize>(),
        "method": speeds[0].method.label(),
    });
    if a.check_monotone {
        let report = monotonicity_check(&solver, &grid, m.is_constant(), 1e-9, 1e-8)?;
        mf.diagnostics["monotonicity"] = serde_json::to_value(&report)?;
        if !report.strictly_increasing && !report.degenerate {
            return Err(Error::PropertyFailure(format!(
                "speeds are not strictly increasing: min increments {} / {}",
                report.min_c_increment, report.min_w_increment
            )));
        }
    }
    Ok(())
}

fn cmd_wulff(a: &WulffArgs, mf: &mut RunManifest) -> Result<(), Error> {
    let m = load_medium(&a.medium, mf)?;
    let opts = SpeedOptions {
        grid_n: a.grid_n,
        phi_grid: a.phi_grid,
        ..SpeedOptions::default()
    };
    let shape = SpeedSolver::new(&m, opts)?.wulff_shape(a.directions)?;
    write_table(&output::wulff_table(&shape), &a.output.out, mf)?;
    if let Some(path) = &a.vertices_out {
        write_table(&output::vertices_table(&shape), path, mf)?;
    }
    mf.diagnostics = json!({
        "support_error": shape.support_error,
        "vertices": shape.vertices.len(),
    });
    Ok(())
}

fn cmd_asymptotics(a: &AsymptoticsArgs, mf: &mut RunManifest) -> Result<(), Error> {
    let m = make_dirac_comb(a.alpha, a.period, a.slope)?;
    let solver = SpeedSolver::new(&m, SpeedOptions::default())?;
    let grid = theta_grid(a.theta_grid)?;
    let rows = grid
        .par_iter()
        .map(|&t| -> Result<[f64; 8], Error> {
            let c = solver.c_star(t)?.c_star;
            let w = solver.spreading_speed(t)?.0;
            let small = asymptotic_reference(t, a.alpha, a.period, a.slope, Regime::SmallL)?;
            let c_ref = asymptotic_reference(t, a.alpha, a.period, a.slope, Regime::LargeLCStar)?;
            let w_ref = asymptotic_reference(t, a.alpha, a.period, a.slope, Regime::LargeLW)?;
            Ok([t, c, c_ref, c / a.period, w, w_ref, w / a.period, small])
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(&[
        "theta",
        "c_star",
        "c_star_large_L",
        "c_star_over_L",
        "w",
        "w_large_L",
        "w_over_L",
        "small_L_limit",
    ]);
    for r in &rows {
        table.push_reals(r);
    }
    write_table(&table, &a.output.out, mf)?;
    let rel = |k: usize, j: usize| rows.iter().map(|r| (r[k] / r[j] - 1.0).abs()).fold(0.0, f64::max);
    mf.diagnostics = json!({
        "max_rel_gap_c_large_L": rel(1, 2),
        "max_rel_gap_w_large_L": rel(4, 5),
        "max_rel_gap_small_L": rel(1, 7),
    });
    match a.check {
        None => Ok(()),
        Some(Limit::SmallL) => {
            let gap = rel(1, 7);
            if gap > 0.01 {
                return Err(Error::PropertyFailure(format!("c* is {gap:.3e} away from 2√α̃ in relative terms")));
            }
            Ok(())
        }
        Some(Limit::LargeL) => {
            let (first, last) = (&rows[0], &rows[rows.len() - 1]);
            let scale = a.alpha * a.slope;
            let w_gap = rows
                .iter()
                .map(|r| (r[6] - scale / (1.0 + r[0].cos().abs())).abs() / scale)
                .fold(0.0, f64::max);
            let c0 = (first[1] / first[2] - 1.0).abs();
            let c90 = (last[1] / last[2] - 1.0).abs();
            let aspect = last[4] / first[4];
            mf.diagnostics["aspect_ratio"] = json!(aspect);
            if c0 > 0.05 || c90 > 0.05 || w_gap > 0.05 || (aspect - 2.0).abs() > 0.1 {
                return Err(Error::PropertyFailure(format!(
                    "large-period laws fail: c*(0) gap {c0:.3e}, c*(π/2) gap {c90:.3e}, w/L gap {w_gap:.3e}, aspect {aspect:.4}"
                )));
            }
            Ok(())
        }
    }
}

fn cmd_simulate(a: &SimulateArgs, mf: &mut RunManifest) -> Result<(), Error> {
    let text = std::fs::read(&a.config)?;
    mf.hash_input("config", &text);
    let cfg = SimConfig::from_json(&String::from_utf8_lossy(&text))?;
    let result = run_cauchy(&cfg)?;
    write_table(&output::trace_table(&result.traces), &a.out, mf)?;
    if let Some(path) = &a.contour_out {
        if !cfg.is_two_dimensional() {
            return Err(Error::ParameterDomain("--contour-out needs a two-dimensional run".into()));
        }
        let points = shape_snapshot(&result.final_field, 0.5, &result.steady)?;
        write_table(&output::contour_table(&points), path, mf)?;
    }
    if let Some(path) = &a.metadata_out {
        std::fs::write(path, serde_json::to_string_pretty(&result.metadata)? + "\n")?;
        mf.outputs.push(path.clone());
    }
    mf.diagnostics = json!({
        "speeds": result.traces.iter().map(|t| json!({"theta": t.theta, "speed": t.speed, "stderr": t.stderr})).collect::<Vec<_>>(),
        "boundary_clear": result.metadata.boundary_clear,
        "warnings": result.metadata.warnings,
    });
    Ok(())
}

fn cmd_torus(a: &TorusArgs, mf: &mut RunManifest) -> Result<(), Error> {
    let family = BumpFamily::default();
    let opts = SpeedOptions {
        lambda_rel_tol: 1e-7,
        ..SpeedOptions::default()
    };
    mf.parameters["family"] = serde_json::to_value(&family)?;
    let report = unboundedness_demo(a.alpha, a.l1, a.l2, &a.n, &family, &opts)?;
    write_table(&output::torus_table(&report), &a.output.out, mf)?;
    mf.diagnostics = json!({
        "mu_decreasing": report.mu_decreasing,
        "c_star_increasing": report.c_star_increasing,
        "divergence_witness": report.divergence_witness,
    });
    Ok(())
}

fn configure_threads() -> Result<(), Error> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| Error::ParameterDomain(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::ParameterDomain(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> ExitCode {
    let clock = Instant::now();
    let (name, params, out, explicit) = match &cli.command {
        Command::Dispersion(a) => (
            "dispersion",
            json!({"medium": medium_params(&a.medium), "theta": a.theta, "lambda_grid": a.lambda_grid.0, "grid_n": a.grid_n, "reference_mollified": a.reference_mollified}),
            a.output.out.clone(),
            a.output.manifest.clone(),
        ),
        Command::Speeds(a) => (
            "speeds",
            json!({"medium": medium_params(&a.medium), "theta_grid": a.theta_grid, "grid_n": a.grid_n, "phi_grid": a.phi_grid, "check_monotone": a.check_monotone}),
            a.output.out.clone(),
            a.output.manifest.clone(),
        ),
        Command::Wulff(a) => (
            "wulff",
            json!({"medium": medium_params(&a.medium), "directions": a.directions, "phi_grid": a.phi_grid, "grid_n": a.grid_n}),
            a.output.out.clone(),
            a.output.manifest.clone(),
        ),
        Command::Asymptotics(a) => (
            "asymptotics",
            json!({"alpha": a.alpha, "L": a.period, "slope": a.slope, "theta_grid": a.theta_grid, "check": a.check}),
            a.output.out.clone(),
            a.output.manifest.clone(),
        ),
        Command::Simulate(a) => ("simulate", json!({"config": a.config}), a.out.clone(), a.manifest.clone()),
        Command::TorusDemo(a) => (
            "torus-demo",
            json!({"alpha": a.alpha, "L1": a.l1, "L2": a.l2, "n": a.n}),
            a.output.out.clone(),
            a.output.manifest.clone(),
        ),
    };
    let mut mf = RunManifest::new(name, params);
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Dispersion(a) => cmd_dispersion(a, &mut mf),
        Command::Speeds(a) => cmd_speeds(a, &mut mf),
        Command::Wulff(a) => cmd_wulff(a, &mut mf),
        Command::Asymptotics(a) => cmd_asymptotics(a, &mut mf),
        Command::Simulate(a) => cmd_simulate(a, &mut mf),
        Command::TorusDemo(a) => cmd_torus(a, &mut mf),
    });
    let code = match &result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            mf.status = match exit_code(e) {
                2 => "usage-error",
                3 => "numerical-failure",
                _ => "property-failure",
            };
            mf.error = Some(e.to_string());
            exit_code(e)
        }
    };
    mf.exit_code = code as i32;
    mf.wall_seconds = clock.elapsed().as_secs_f64();
    let path = manifest_path(&out, explicit.as_deref());
    if let Err(e) = mf.write(&path) {
        eprintln!("error: cannot write manifest {}: {e}", path.display());
        return ExitCode::from(if code == 0 { 2 } else { code });
    }
    ExitCode::from(code)
}

fn main() -> ExitCode {
    run(Cli::parse())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inclusive_range() {
        let g = parse_range("0:2:0.1").unwrap().0;
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 0.0);
        assert!((g[20] - 2.0).abs() < 1e-12);
        assert!(parse_range("1:0:0.1").is_err());
        assert!(parse_range("0:1").is_err());
    }

    #[test]
    fn pairs() {
        assert_eq!(parse_pair("1,0.5").unwrap(), (1.0, 0.5));
        assert!(parse_pair("1").is_err());
    }
}
