//! Explicit finite-difference solver for `u_t = Δu + b̃(x) f(u) + g(u)` in one
//! and two space dimensions, periodic steady states, front tracking and
//! front-speed estimation.
//!
//! Grids are node-centred with reflecting outer boundaries. The `y` axis is
//! always folded onto `y ≥ 0`; the `x` axis is folded onto `x ≥ 0` when the
//! sampled coefficient is even. Nodes whose value drops below `flush` are
//! set to zero, and only the bounding box of the nonzero nodes is updated.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::eigen::principal::{CyclicTridiagonal, LinearSolve};
use crate::error::{ensure_positive, Error, Result};
use crate::media::{MediumKind, PeriodicMedium, ReactionSpec};

/// Explicit step bound `dt ≤ DT_FACTOR·dx²` in one dimension; halved in two.
pub const DT_FACTOR: f64 = 0.2;
const STEADY_MAX_STEPS: usize = 20_000_000;
const NEWTON_STEPS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialDisk {
    pub radius: f64,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub medium: PeriodicMedium,
    pub reaction: ReactionSpec,
    /// Half-width of the domain along `x`.
    pub half_width_x: f64,
    /// Half-width along `y`; zero selects the one-dimensional problem.
    #[serde(default)]
    pub half_width_y: f64,
    pub dx: f64,
    #[serde(default)]
    pub dy: Option<f64>,
    /// Defaults to the largest admissible step.
    #[serde(default)]
    pub dt: Option<f64>,
    pub t_final: f64,
    pub initial: InitialDisk,
    /// Directions of the traced rays.
    #[serde(default = "default_thetas")]
    pub thetas: Vec<f64>,
    /// Time between trace samples; defaults to `T/200`.
    #[serde(default)]
    pub sample_interval: Option<f64>,
    /// Start of the fit window as a fraction of `T`.
    #[serde(default = "default_fit_start")]
    pub fit_start: f64,
    /// Times at which full fields are kept.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "default_flush")]
    pub flush: f64,
    /// Cells of the steady-state grid per period (F2 only).
    #[serde(default)]
    pub steady_cells: Option<usize>,
}

fn default_thetas() -> Vec<f64> {
    vec![0.0, std::f64::consts::FRAC_PI_2]
}

fn default_fit_start() -> f64 {
    0.5
}

fn default_flush() -> f64 {
    1e-30
}

impl SimConfig {
    pub fn new(medium: PeriodicMedium, reaction: ReactionSpec, half_width_x: f64, half_width_y: f64, dx: f64, t_final: f64) -> Self {
        SimConfig {
            medium,
            reaction,
            half_width_x,
            half_width_y,
            dx,
            dy: None,
            dt: None,
            t_final,
            initial: InitialDisk {
                radius: 2.0,
                amplitude: 1.0,
            },
            thetas: if half_width_y > 0.0 { default_thetas() } else { vec![0.0] },
            sample_interval: None,
            fit_start: default_fit_start(),
            snapshot_times: Vec::new(),
            flush: default_flush(),
            steady_cells: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn is_two_dimensional(&self) -> bool {
        self.half_width_y > 0.0
    }

    pub fn dy(&self) -> f64 {
        self.dy.unwrap_or(self.dx)
    }

    /// Largest step allowed by the stability rule.
    pub fn max_dt(&self) -> f64 {
        if self.is_two_dimensional() {
            DT_FACTOR * self.dx.min(self.dy()).powi(2) / 2.0
        } else {
            DT_FACTOR * self.dx * self.dx
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or_else(|| self.max_dt())
    }

    pub fn sample_interval(&self) -> f64 {
        self.sample_interval.unwrap_or(self.t_final / 200.0)
    }

    pub fn validate(&self) -> Result<()> {
        self.reaction.validate()?;
        for (name, v) in [
            ("half_width_x", self.half_width_x),
            ("dx", self.dx),
            ("dy", self.dy()),
            ("dt", self.dt()),
            ("t_final", self.t_final),
            ("radius", self.initial.radius),
            ("amplitude", self.initial.amplitude),
            ("sample_interval", self.sample_interval()),
            ("flush", self.flush),
        ] {
            ensure_positive(name, v)?;
        }
        if !(self.half_width_y >= 0.0) {
            return Err(Error::domain("half_width_y must be nonnegative"));
        }
        if self.dt() > self.max_dt() * (1.0 + 1e-12) {
            return Err(Error::domain(format!(
                "dt = {} exceeds the explicit bound {}",
                self.dt(),
                self.max_dt()
            )));
        }
        match self.medium.kind() {
            MediumKind::DiracComb { .. } => {
                return Err(Error::UnsupportedRepresentation(format!(
                    "Dirac combs must be mollified with width at least 2dx = {} before simulation",
                    2.0 * self.dx
                )))
            }
            MediumKind::MollifiedComb { width, .. } if *width < 2.0 * self.dx * (1.0 - 1e-12) => {
                return Err(Error::domain(format!(
                    "mollification width {width} is below 2dx = {}",
                    2.0 * self.dx
                )))
            }
            _ => {}
        }
        if !(0.0..1.0).contains(&self.fit_start) {
            return Err(Error::domain("fit_start must lie in [0, 1)"));
        }
        if self.initial.radius >= self.half_width_x
            || (self.is_two_dimensional() && self.initial.radius >= self.half_width_y)
        {
            return Err(Error::domain("initial disk does not fit in the domain"));
        }
        Ok(())
    }
}

/// `L`-periodic nodal profile with linear interpolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicProfile {
    pub period: f64,
    /// Values at `x_k = k L / n`.
    pub values: Vec<f64>,
}

impl PeriodicProfile {
    pub fn constant(period: f64, value: f64, n: usize) -> Self {
        PeriodicProfile {
            period,
            values: vec![value; n],
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let s = (x / self.period).rem_euclid(1.0) * n as f64;
        let k = (s.floor() as usize).min(n - 1);
        let frac = s - k as f64;
        if frac == 0.0 {
            return self.values[k];
        }
        (1.0 - frac) * self.values[k] + frac * self.values[(k + 1) % n]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Averages of `b̃` over `[x - h/2, x + h/2)` at the given nodes.
fn node_coefficients(m: &PeriodicMedium, nodes: impl Iterator<Item = f64>, h: f64) -> Result<Vec<f64>> {
    if m.is_atomic() {
        return Err(Error::UnsupportedRepresentation(
            "Dirac combs must be mollified before finite-difference use".into(),
        ));
    }
    Ok(nodes
        .map(|x| (m.slope() * m.integral(x - 0.5 * h, x + 0.5 * h) / h).max(0.0))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub profile: PeriodicProfile,
    /// Max-norm of the discrete steady residual relative to `max P`.
    pub residual: f64,
    /// Simulated time used by the relaxation phase.
    pub relaxation_time: f64,
}

/// Positive `L`-periodic steady state of `u_t = u_xx + b̃ f(u) + g(u)` on `n`
/// nodes, relaxed from `u ≡ α`.
pub fn steady_state_1d(m: &PeriodicMedium, reaction: &ReactionSpec, n: usize, tol: f64) -> Result<SteadyState> {
    steady_state_1d_from(m, reaction, n, tol, &vec![m.mass(); n])
}

/// As [`steady_state_1d`] from an arbitrary positive initial profile.
///
/// F1 returns `P ≡ 1`. F2 relaxes by explicit time stepping until the
/// relative change per unit time is at most `tol`, then polishes the result
/// with Newton iterations on the discrete steady equation.
pub fn steady_state_1d_from(
    m: &PeriodicMedium,
    reaction: &ReactionSpec,
    n: usize,
    tol: f64,
    initial: &[f64],
) -> Result<SteadyState> {
    ensure_positive("tol", tol)?;
    reaction.validate()?;
    let l = m.period();
    if matches!(reaction, ReactionSpec::F1) {
        return Ok(SteadyState {
            profile: PeriodicProfile::constant(l, 1.0, n.max(1)),
            residual: 0.0,
            relaxation_time: 0.0,
        });
    }
    let ReactionSpec::F2 { kappa } = *reaction else {
        unreachable!()
    };
    if n < 8 || initial.len() != n {
        return Err(Error::domain("steady state needs n ≥ 8 nodes and a matching initial profile"));
    }
    if initial.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::domain("initial profile must be positive"));
    }
    let h = l / n as f64;
    let b = node_coefficients(m, (0..n).map(|k| k as f64 * h), h)?;
    let upper = b.iter().copied().fold(0.0, f64::max) / kappa;
    let dt = (DT_FACTOR * h * h).min(0.5 / (upper * kappa + initial.iter().copied().fold(0.0, f64::max) * kappa + 1e-300));
    let r = dt / (h * h);
    let mut u = initial.to_vec();
    let mut next = vec![0.0; n];
    let mut time = 0.0;
    let mut converged = false;
    for _ in 0..STEADY_MAX_STEPS {
        let mut change: f64 = 0.0;
        for k in 0..n {
            let left = u[(k + n - 1) % n];
            let right = u[(k + 1) % n];
            next[k] = u[k] + r * (left - 2.0 * u[k] + right) + dt * reaction.rate(b[k], u[k]);
            change = change.max((next[k] - u[k]).abs());
        }
        std::mem::swap(&mut u, &mut next);
        time += dt;
        let scale = u.iter().copied().fold(0.0, f64::max);
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::numerical("steady state", "relaxation lost positivity", scale));
        }
        if change / dt <= tol * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::numerical(
            "steady state",
            format!("no convergence within {STEADY_MAX_STEPS} steps"),
            f64::NAN,
        ));
    }
    newton_polish(&mut u, &b, kappa, h)?;
    let residual = steady_residual(&u, &b, kappa, h) / u.iter().copied().fold(0.0, f64::max);
    Ok(SteadyState {
        profile: PeriodicProfile { period: l, values: u },
        residual,
        relaxation_time: time,
    })
}

fn steady_residual(u: &[f64], b: &[f64], kappa: f64, h: f64) -> f64 {
    let n = u.len();
    (0..n)
        .map(|k| {
            let lap = (u[(k + n - 1) % n] - 2.0 * u[k] + u[(k + 1) % n]) / (h * h);
            (lap + u[k] * (b[k] - kappa * u[k])).abs()
        })
        .fold(0.0, f64::max)
}

fn newton_polish(u: &mut [f64], b: &[f64], kappa: f64, h: f64) -> Result<()> {
    let n = u.len();
    let inv = 1.0 / (h * h);
    let mut rhs = vec![0.0; n];
    let mut delta = vec![0.0; n];
    for _ in 0..NEWTON_STEPS {
        // G(u) = -u'' - u(b - κu), G'(u) = -D² - b + 2κu
        for k in 0..n {
            let lap = (u[(k + n - 1) % n] - 2.0 * u[k] + u[(k + 1) % n]) * inv;
            rhs[k] = -(-lap - u[k] * (b[k] - kappa * u[k]));
        }
        let jac = CyclicTridiagonal {
            lower: -inv,
            upper: -inv,
            diag: (0..n).map(|k| 2.0 * inv - b[k] + 2.0 * kappa * u[k]).collect(),
        };
        jac.factor(0.0)?.solve(&rhs, &mut delta);
        let mut step: f64 = 0.0;
        for k in 0..n {
            u[k] += delta[k];
            step = step.max(delta[k].abs());
        }
        if u.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::numerical("steady state", "Newton iterate lost positivity", step));
        }
        if step <= 4.0 * f64::EPSILON * u.iter().copied().fold(0.0, f64::max) {
            return Ok(());
        }
    }
    Ok(())
}

/// Nodal field on the stored (possibly folded) grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub t: f64,
    pub x0: f64,
    pub dx: f64,
    pub nx: usize,
    pub dy: f64,
    pub ny: usize,
    /// `x` folded onto `x ≥ 0` by symmetry.
    pub mirror_x: bool,
    /// Row-major values, `values[j·nx + i]` at `(x0 + i dx, j dy)`.
    pub values: Vec<f64>,
}

impl Field {
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    fn x_max(&self) -> f64 {
        self.x(self.nx - 1)
    }

    fn y_max(&self) -> f64 {
        (self.ny - 1) as f64 * self.dy
    }

    /// Whether `(x, y)` lies in the represented domain.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let x = if self.mirror_x { x.abs() } else { x };
        let y = y.abs();
        x >= self.x0 && x <= self.x_max() && (self.ny == 1 || y <= self.y_max())
    }

    /// Bilinear interpolation; `None` outside the domain.
    pub fn value_at(&self, x: f64, y: f64) -> Option<f64> {
        if !self.contains(x, y) {
            return None;
        }
        let x = if self.mirror_x { x.abs() } else { x };
        let sx = ((x - self.x0) / self.dx).clamp(0.0, (self.nx - 1) as f64);
        let i = (sx.floor() as usize).min(self.nx.saturating_sub(2));
        let fx = sx - i as f64;
        let row = |j: usize| {
            let r = &self.values[j * self.nx..(j + 1) * self.nx];
            if self.nx == 1 {
                r[0]
            } else {
                (1.0 - fx) * r[i] + fx * r[i + 1]
            }
        };
        if self.ny == 1 {
            return Some(row(0));
        }
        let sy = (y.abs() / self.dy).clamp(0.0, (self.ny - 1) as f64);
        let j = (sy.floor() as usize).min(self.ny - 2);
        let fy = sy - j as f64;
        Some((1.0 - fy) * row(j) + fy * row(j + 1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontTrace {
    pub theta: f64,
    /// `(t, r(t))` with `r(t) = sup{r : u(r e_θ, t) ≥ P/2}`.
    pub samples: Vec<(f64, f64)>,
    pub fit_window: (f64, f64),
    pub speed: Option<f64>,
    pub stderr: Option<f64>,
    /// Root-mean-square deviation of the samples from the fitted line.
    pub fit_residual: Option<f64>,
    /// Time at which the front came within five cells of the boundary.
    pub boundary_hit: Option<f64>,
}

/// Least-squares slope of `r(t)` over the trace's fit window and its
/// standard error.
pub fn fit_front_speed(trace: &FrontTrace) -> Result<(f64, f64)> {
    fit_line(trace).map(|(slope, stderr, _)| (slope, stderr))
}

fn fit_line(trace: &FrontTrace) -> Result<(f64, f64, f64)> {
    let (t0, t1) = trace.fit_window;
    let pts: Vec<(f64, f64)> = trace
        .samples
        .iter()
        .copied()
        .filter(|(t, _)| *t >= t0 - 1e-12 && *t <= t1 + 1e-12)
        .collect();
    if pts.len() < 10 {
        return Err(Error::Estimation(format!(
            "front fit needs at least 10 samples in [{t0}, {t1}], found {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let rm = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let slope = pts.iter().map(|p| (p.0 - tm) * (p.1 - rm)).sum::<f64>() / stt;
    let sse: f64 = pts.iter().map(|p| (p.1 - rm - slope * (p.0 - tm)).powi(2)).sum();
    let stderr = (sse / (n - 2.0) / stt).sqrt();
    Ok((slope, stderr, (sse / n).sqrt()))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub steps: usize,
    pub dt: f64,
    pub dt_bound: f64,
    /// `1 - (2dt/dx² + 2dt/dy² + dt·max|∂ₐ(reaction)|)`; nonnegative keeps
    /// the scheme monotone.
    pub monotonicity_margin: f64,
    pub nodes: usize,
    pub mirror_x: bool,
    pub max_u: f64,
    pub min_u: f64,
    pub upper_bound: f64,
    /// Fewest cells between any node at or above the front level and the
    /// outer boundary at the final time.
    pub boundary_clearance_cells: usize,
    pub boundary_clear: bool,
    pub warnings: Vec<String>,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub traces: Vec<FrontTrace>,
    pub snapshots: Vec<Field>,
    pub final_field: Field,
    pub steady: PeriodicProfile,
    pub metadata: RunMetadata,
}

impl SimResult {
    pub fn trace(&self, theta: f64) -> Option<&FrontTrace> {
        self.traces.iter().find(|t| t.theta == theta)
    }

    /// `P(x)` at a point.
    pub fn steady_at(&self, x: f64) -> f64 {
        self.steady.eval(x)
    }
}

struct Grid {
    x0: f64,
    nx: usize,
    ny: usize,
    mirror_x: bool,
}

fn build_grid(cfg: &SimConfig) -> Result<(Grid, Vec<f64>)> {
    let dx = cfg.dx;
    let half = (cfg.half_width_x / dx).round() as usize;
    let probe = node_coefficients(&cfg.medium, (0..=half).map(|i| i as f64 * dx), dx)?;
    let mirrored = node_coefficients(&cfg.medium, (0..=half).map(|i| -(i as f64) * dx), dx)?;
    let scale = probe.iter().copied().fold(0.0, f64::max).max(1e-300);
    let even = probe
        .iter()
        .zip(&mirrored)
        .all(|(a, b)| (a - b).abs() <= 1e-12 * scale);
    let ny = if cfg.is_two_dimensional() {
        (cfg.half_width_y / cfg.dy()).round() as usize + 1
    } else {
        1
    };
    let grid = if even {
        Grid {
            x0: 0.0,
            nx: half + 1,
            ny,
            mirror_x: true,
        }
    } else {
        Grid {
            x0: -(half as f64) * dx,
            nx: 2 * half + 1,
            ny,
            mirror_x: false,
        }
    };
    if grid.nx < 3 || (cfg.is_two_dimensional() && grid.ny < 3) {
        return Err(Error::domain("simulation domain must span at least three nodes per axis"));
    }
    let b = if even {
        probe
    } else {
        node_coefficients(&cfg.medium, (0..grid.nx).map(|i| grid.x0 + i as f64 * dx), dx)?
    };
    Ok((grid, b))
}

/// Steady state used for the front level: exact `1` for F1, the relaxed
/// periodic profile for F2.
pub fn front_steady_state(cfg: &SimConfig) -> Result<PeriodicProfile> {
    let l = cfg.medium.period();
    match cfg.reaction {
        ReactionSpec::F1 => Ok(PeriodicProfile::constant(l, 1.0, 1)),
        ReactionSpec::F2 { .. } => {
            let n = cfg
                .steady_cells
                .unwrap_or_else(|| ((l / cfg.dx).round() as usize).max(64));
            Ok(steady_state_1d(&cfg.medium, &cfg.reaction, n, 1e-10)?.profile)
        }
    }
}

type Span = Option<(usize, usize)>;

fn span_union(a: Span, b: Span) -> Span {
    match (a, b) {
        (Some(x), Some(y)) => Some((x.0.min(y.0), x.1.max(y.1))),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Inclusive index range of the nonzero entries of `row` within `span`.
fn nonzero_span(row: &[f64], span: Span) -> Span {
    let (a, b) = span?;
    let first = row[a..=b].iter().position(|v| *v != 0.0)?;
    let last = row[a..=b].iter().rposition(|v| *v != 0.0)?;
    Some((a + first, a + last))
}

struct Stepper<'a> {
    cfg: &'a SimConfig,
    grid: Grid,
    b: Vec<f64>,
    u: Vec<f64>,
    next: Vec<f64>,
    /// Per row, the extent of the nonzero entries of `u`.
    spans: Vec<Span>,
    /// Per row, the extent outside which `next` is known to be zero.
    stale: Vec<Span>,
    rx: f64,
    ry: f64,
    dt: f64,
}

impl Stepper<'_> {
    fn new<'a>(cfg: &'a SimConfig, grid: Grid, b: Vec<f64>, u: Vec<f64>, rx: f64, ry: f64, dt: f64) -> Stepper<'a> {
        let nx = grid.nx;
        let spans: Vec<Span> = u.chunks(nx).map(|row| nonzero_span(row, Some((0, nx - 1)))).collect();
        Stepper {
            cfg,
            grid,
            b,
            next: u.clone(),
            u,
            stale: spans.clone(),
            spans,
            rx,
            ry,
            dt,
        }
    }

    /// One explicit step; `false` when a value leaves `[lower, upper]`.
    fn step(&mut self, lower: f64, upper: f64) -> bool {
        match self.cfg.reaction {
            ReactionSpec::F1 => self.step_with(|b, u| b * u * (1.0 - u), lower, upper),
            ReactionSpec::F2 { kappa } => self.step_with(move |b, u| u * (b - kappa * u), lower, upper),
        }
    }

    fn step_with(&mut self, rate: impl Fn(f64, f64) -> f64, lower: f64, upper: f64) -> bool {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let (rx, ry, dt, flush) = (self.rx, self.ry, self.dt, self.cfg.flush);
        let mut ok = true;
        let mut spans = vec![None; ny];
        for j in 0..ny {
            let jd = if j == 0 { 1.min(ny - 1) } else { j - 1 };
            let ju = if j + 1 == ny { j.saturating_sub(1) } else { j + 1 };
            let reach = span_union(span_union(self.spans[jd], self.spans[j]), self.spans[ju])
                .map(|(a, b)| (a.saturating_sub(1), (b + 1).min(nx - 1)));
            let out = &mut self.next[j * nx..(j + 1) * nx];
            // clear what an earlier step left outside the new reach
            if let Some((s0, s1)) = self.stale[j] {
                match reach {
                    Some((i0, i1)) => {
                        out[s0..i0.max(s0)].fill(0.0);
                        if i1 < s1 {
                            out[(i1 + 1).max(s0)..=s1].fill(0.0);
                        }
                    }
                    None => out[s0..=s1].fill(0.0),
                }
            }
            self.stale[j] = reach;
            let Some((i0, i1)) = reach else {
                continue;
            };
            let c = &self.u[j * nx..(j + 1) * nx];
            let down = &self.u[jd * nx..(jd + 1) * nx];
            let up = &self.u[ju * nx..(ju + 1) * nx];
            let b = &self.b;
            let edge = |i: usize, side: f64| {
                c[i] + rx * (2.0 * side - 2.0 * c[i]) + ry * (down[i] - 2.0 * c[i] + up[i]) + dt * rate(b[i], c[i])
            };
            let a = i0.max(1);
            let z = i1.min(nx - 2);
            if i0 == 0 {
                out[0] = edge(0, c[1]);
            }
            if a <= z {
                let n = z - a + 1;
                let cells = c[a - 1..a + n + 1].windows(3);
                let rows = down[a..a + n].iter().zip(&up[a..a + n]).zip(&b[a..a + n]);
                for ((o, w), ((d, u), bi)) in out[a..a + n].iter_mut().zip(cells).zip(rows) {
                    let ci = w[1];
                    *o = ci + rx * (w[0] - 2.0 * ci + w[2]) + ry * (d - 2.0 * ci + u) + dt * rate(*bi, ci);
                }
            }
            if i1 == nx - 1 {
                out[nx - 1] = edge(nx - 1, c[nx - 2]);
            }
            for v in &mut out[i0..=i1] {
                ok &= *v >= lower && *v <= upper;
                if *v < flush {
                    *v = 0.0;
                }
            }
            spans[j] = nonzero_span(out, reach);
        }
        std::mem::swap(&mut self.u, &mut self.next);
        // `next` now holds the previous level, nonzero only inside the old spans
        self.stale = std::mem::replace(&mut self.spans, spans);
        ok
    }

    fn field(&self, t: f64) -> Field {
        Field {
            values: self.u.clone(),
            ..self.field_shell(t)
        }
    }
}

/// Largest `r` along `e_θ` with `u ≥ level(x)`, linearly interpolated,
/// together with the flag that the scan reached the domain edge.
fn ray_crossing(field: &Field, theta: f64, level: &dyn Fn(f64) -> f64) -> (f64, bool) {
    let (c, s) = (theta.cos(), theta.sin());
    let ds = 0.5 * field.dx.min(if field.ny > 1 { field.dy } else { field.dx });
    let mut values = Vec::new();
    let mut r = 0.0;
    while let Some(u) = field.value_at(r * c, r * s) {
        values.push(u - level(r * c));
        r += ds;
    }
    match values.iter().rposition(|f| *f >= 0.0) {
        None => (0.0, false),
        Some(k) if k + 1 == values.len() => (k as f64 * ds, true),
        Some(k) => {
            let (a, b) = (values[k], values[k + 1]);
            (ds * (k as f64 + a / (a - b)), false)
        }
    }
}

/// Explicit Euler integration of the Cauchy problem from the disk datum.
pub fn run_cauchy(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let clock = Instant::now();
    let (grid, b) = build_grid(cfg)?;
    let steady = front_steady_state(cfg)?;
    let dt = cfg.dt();
    let dy = cfg.dy();
    let rx = dt / (cfg.dx * cfg.dx);
    let ry = if cfg.is_two_dimensional() { dt / (dy * dy) } else { 0.0 };
    let b_max = b.iter().copied().fold(0.0, f64::max);
    let (upper_bound, reaction_lip) = match cfg.reaction {
        ReactionSpec::F1 => {
            let top = cfg.initial.amplitude.max(1.0);
            (top, b_max * (2.0 * top - 1.0).max(1.0))
        }
        ReactionSpec::F2 { kappa } => {
            let top = cfg.initial.amplitude.max(steady.max()).max(b_max / kappa);
            (top, b_max + 2.0 * kappa * top)
        }
    };
    let margin = 1.0 - 2.0 * rx - 2.0 * ry - dt * reaction_lip;
    if margin < 0.0 {
        return Err(Error::domain(format!(
            "time step {dt} breaks monotonicity (margin {margin}); reduce dt or dx"
        )));
    }

    let (nx, ny) = (grid.nx, grid.ny);
    let mut u = vec![0.0; nx * ny];
    let r0 = cfg.initial.radius;
    for j in 0..ny {
        let y = j as f64 * dy;
        for i in 0..nx {
            let x = grid.x0 + i as f64 * cfg.dx;
            if x * x + y * y <= r0 * r0 {
                u[j * nx + i] = cfg.initial.amplitude;
            }
        }
    }
    let mut stepper = Stepper::new(cfg, grid, b, u, rx, ry, dt);

    let level = |x: f64| 0.5 * steady.eval(x);
    let steps = (cfg.t_final / dt).ceil() as usize;
    let sample_every = ((cfg.sample_interval() / dt).round() as usize).max(1);
    let mut snapshot_steps: Vec<(usize, f64)> = cfg
        .snapshot_times
        .iter()
        .map(|t| (((t / dt).round() as usize).min(steps), *t))
        .collect();
    snapshot_steps.sort_by_key(|s| s.0);
    let mut snapshots = Vec::new();
    let mut samples: Vec<Vec<(f64, f64)>> = vec![Vec::new(); cfg.thetas.len()];
    let mut hits: Vec<Option<f64>> = vec![None; cfg.thetas.len()];
    let edge_gap = 5.0 * cfg.dx.max(dy);
    let record = |field: &Field, samples: &mut Vec<Vec<(f64, f64)>>, hits: &mut Vec<Option<f64>>| {
        for (k, &theta) in cfg.thetas.iter().enumerate() {
            let (r, edge) = ray_crossing(field, theta, &level);
            let near = {
                let (x, y) = ((r + edge_gap) * theta.cos(), (r + edge_gap) * theta.sin());
                !field.contains(x, y)
            };
            if (edge || near) && hits[k].is_none() {
                hits[k] = Some(field.t);
            }
            samples[k].push((field.t, r));
        }
    };
    let (mut max_u, mut min_u) = (cfg.initial.amplitude, 0.0_f64);
    for (_, t) in snapshot_steps.iter().filter(|s| s.0 == 0) {
        snapshots.push(stepper.field(*t));
    }
    stepper.with_field(0.0, |f| record(f, &mut samples, &mut hits));
    for n in 1..=steps {
        if !stepper.step(-1e-12, upper_bound * (1.0 + 1e-9) + 1e-12) {
            let (lo, hi) = value_range(&stepper.u);
            return Err(Error::numerical(
                "simulation",
                format!(
                    "solution left [0, {upper_bound}] at step {n} (t = {}): range [{lo}, {hi}], dt = {dt}, rx = {rx}, ry = {ry}",
                    n as f64 * dt
                ),
                hi,
            ));
        }
        let t = n as f64 * dt;
        if n % sample_every == 0 || n == steps {
            let (lo, hi) = value_range(&stepper.u);
            min_u = min_u.min(lo);
            max_u = max_u.max(hi);
            stepper.with_field(t, |f| record(f, &mut samples, &mut hits));
        }
        for (_, ts) in snapshot_steps.iter().filter(|s| s.0 == n) {
            snapshots.push(stepper.field(*ts));
        }
    }
    let t_end = steps as f64 * dt;
    let final_field = stepper.field(t_end);

    let mut warnings = Vec::new();
    let traces = cfg
        .thetas
        .iter()
        .zip(samples)
        .zip(&hits)
        .map(|((&theta, samples), hit)| {
            let mut end = t_end;
            if let Some(th) = hit {
                warnings.push(format!(
                    "front at θ = {theta} reached the boundary at t = {th}; fit window shortened"
                ));
                end = *th;
            }
            let mut trace = FrontTrace {
                theta,
                samples,
                fit_window: (cfg.fit_start * t_end, end),
                speed: None,
                stderr: None,
                fit_residual: None,
                boundary_hit: *hit,
            };
            match fit_line(&trace) {
                Ok((s, e, res)) => {
                    trace.speed = Some(s);
                    trace.stderr = Some(e);
                    trace.fit_residual = Some(res);
                }
                Err(e) => warnings.push(format!("θ = {theta}: {e}")),
            }
            trace
        })
        .collect();

    let clearance = boundary_clearance(&final_field, &level);
    let metadata = RunMetadata {
        steps,
        dt,
        dt_bound: cfg.max_dt(),
        monotonicity_margin: margin,
        nodes: nx * ny,
        mirror_x: final_field.mirror_x,
        max_u,
        min_u,
        upper_bound,
        boundary_clearance_cells: clearance,
        boundary_clear: clearance >= 5,
        warnings,
        wall_seconds: clock.elapsed().as_secs_f64(),
    };
    Ok(SimResult {
        traces,
        snapshots,
        final_field,
        steady,
        metadata,
    })
}

impl Stepper<'_> {
    /// Lends the current values as a [`Field`] without copying them.
    fn with_field<R>(&mut self, t: f64, f: impl FnOnce(&Field) -> R) -> R {
        let mut field = Field {
            values: std::mem::take(&mut self.u),
            ..self.field_shell(t)
        };
        let out = f(&field);
        self.u = std::mem::take(&mut field.values);
        out
    }

    fn field_shell(&self, t: f64) -> Field {
        Field {
            t,
            x0: self.grid.x0,
            dx: self.cfg.dx,
            nx: self.grid.nx,
            dy: self.cfg.dy(),
            ny: self.grid.ny,
            mirror_x: self.grid.mirror_x,
            values: Vec::new(),
        }
    }
}

/// `(min, max)` of a slice; NaN entries propagate into both.
fn value_range(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        if lo.is_nan() || v.is_nan() {
            (f64::NAN, f64::NAN)
        } else {
            (lo.min(*v), hi.max(*v))
        }
    })
}

fn boundary_clearance(field: &Field, level: &dyn Fn(f64) -> f64) -> usize {
    let mut best = usize::MAX;
    for j in 0..field.ny {
        for i in 0..field.nx {
            let u = field.values[j * field.nx + i];
            if u > 0.0 && u >= level(field.x(i)) {
                let mut gap = field.nx - 1 - i;
                if !field.mirror_x {
                    gap = gap.min(i);
                }
                if field.ny > 1 {
                    gap = gap.min(field.ny - 1 - j);
                }
                best = best.min(gap);
            }
        }
    }
    best
}

/// Marching-squares contour of `u = level·P(x)` scaled by `1/t`, unfolded to
/// the full plane and ordered by polar angle.
pub fn shape_snapshot(field: &Field, level: f64, steady: &PeriodicProfile) -> Result<Vec<[f64; 2]>> {
    if !(field.t > 0.0) {
        return Err(Error::Estimation("shape snapshot requires t > 0".into()));
    }
    if field.ny < 2 {
        return Err(Error::Estimation("shape snapshot requires a two-dimensional field".into()));
    }
    let nx = field.nx;
    let f = |i: usize, j: usize| field.values[j * nx + i] - level * steady.eval(field.x(i));
    let mut points = Vec::new();
    for j in 0..field.ny - 1 {
        let (y0, y1) = (j as f64 * field.dy, (j + 1) as f64 * field.dy);
        for i in 0..nx - 1 {
            let (x0, x1) = (field.x(i), field.x(i + 1));
            let corners = [(x0, y0, f(i, j)), (x1, y0, f(i + 1, j)), (x1, y1, f(i + 1, j + 1)), (x0, y1, f(i, j + 1))];
            for e in 0..4 {
                let (xa, ya, fa) = corners[e];
                let (xb, yb, fb) = corners[(e + 1) % 4];
                if (fa >= 0.0) != (fb >= 0.0) {
                    let s = fa / (fa - fb);
                    points.push([xa + s * (xb - xa), ya + s * (yb - ya)]);
                }
            }
        }
    }
    if points.is_empty() {
        return Err(Error::Estimation(format!("level set u = {level}·P is empty at t = {}", field.t)));
    }
    let mut full = Vec::with_capacity(4 * points.len());
    for p in points {
        let p = [p[0] / field.t, p[1] / field.t];
        full.push(p);
        full.push([p[0], -p[1]]);
        if field.mirror_x {
            full.push([-p[0], p[1]]);
            full.push([-p[0], -p[1]]);
        }
    }
    full.sort_by(|a, b| a[1].atan2(a[0]).total_cmp(&b[1].atan2(b[0])));
    full.dedup_by(|a, b| (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    Ok(full)
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let s = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((p[0] - a[0] - s * dx).powi(2) + (p[1] - a[1] - s * dy).powi(2)).sqrt()
}

fn distance_to_closed_polyline(p: [f64; 2], poly: &[[f64; 2]]) -> f64 {
    (0..poly.len())
        .map(|k| point_segment_distance(p, poly[k], poly[(k + 1) % poly.len()]))
        .fold(f64::INFINITY, f64::min)
}

/// Hausdorff distance between two closed polylines.
pub fn hausdorff_distance(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let one_way = |p: &[[f64; 2]], q: &[[f64; 2]]| {
        p.iter()
            .map(|x| distance_to_closed_polyline(*x, q))
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DichotomyCheck {
    pub theta: f64,
    pub w: f64,
    pub t: f64,
    /// `u` at `1.3·w·t` along the ray.
    pub ahead: f64,
    /// `u / P` at `0.7·w·t`.
    pub behind_ratio: f64,
    pub holds: bool,
}

/// Values of the final field ahead of and behind the predicted front.
pub fn dichotomy_check(result: &SimResult, theta: f64, w: f64) -> Result<DichotomyCheck> {
    let f = &result.final_field;
    let at = |c: f64| -> Result<(f64, f64)> {
        let (x, y) = (c * w * f.t * theta.cos(), c * w * f.t * theta.sin());
        f.value_at(x, y)
            .map(|u| (u, result.steady_at(x)))
            .ok_or_else(|| Error::Estimation(format!("ray point at {c}·w·t lies outside the domain")))
    };
    let (ahead, _) = at(1.3)?;
    let (behind, p) = at(0.7)?;
    let behind_ratio = behind / p;
    Ok(DichotomyCheck {
        theta,
        w,
        t: f.t,
        ahead,
        behind_ratio,
        holds: ahead < 1e-3 && behind_ratio > 0.9,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCheck {
    pub times: Vec<f64>,
    /// `min (u - v)` over all nodes at each snapshot.
    pub min_difference: Vec<f64>,
    pub holds: bool,
}

/// Runs `upper` and `lower` (same grid, ordered initial data) and compares
/// their snapshots node by node.
pub fn comparison_check(upper: &SimConfig, lower: &SimConfig) -> Result<ComparisonCheck> {
    let ordered = upper.initial.amplitude >= lower.initial.amplitude && upper.initial.radius >= lower.initial.radius;
    if !ordered || upper.dx != lower.dx || upper.dy() != lower.dy() || upper.dt() != lower.dt() {
        return Err(Error::domain("comparison runs need ordered initial data on identical grids"));
    }
    if upper.snapshot_times != lower.snapshot_times || upper.snapshot_times.is_empty() {
        return Err(Error::domain("comparison runs need matching, nonempty snapshot times"));
    }
    let a = run_cauchy(upper)?;
    let b = run_cauchy(lower)?;
    let min_difference: Vec<f64> = a
        .snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(u, v)| {
            u.values
                .iter()
                .zip(&v.values)
                .map(|(x, y)| x - y)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(ComparisonCheck {
        times: a.snapshots.iter().map(|s| s.t).collect(),
        holds: min_difference.iter().all(|d| *d >= 0.0),
        min_difference,
    })
}
