//! Minimal speeds `c*(θ) = min_{λ>0} (λ² - μ(λcosθ))/λ`, spreading speeds
//! `w(θ) = min_{|φ-θ|<π/2} c*(φ)/cos(θ-φ)` and the Wulff shape.
//!
//! Directions enter only through `|cosθ|`, which is snapped to a `2⁻⁴⁰`
//! lattice. Angles that differ by a reflection therefore share every
//! floating-point operation and give bit-identical speeds.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::RwLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::comb::comb_mu;
use crate::eigen::{DispersionRelation, Method};
use crate::error::{ensure_positive, Error, Result};
use crate::media::PeriodicMedium;

const COS_LATTICE: f64 = (1u64 << 40) as f64;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// `|cosθ|` rounded to the direction lattice.
pub fn direction_cos(theta: f64) -> f64 {
    ((theta.cos().abs() * COS_LATTICE).round() / COS_LATTICE).min(1.0)
}

/// Representative of `θ` in `[0, π/2]` under both axis reflections.
pub fn fold_direction(theta: f64) -> f64 {
    direction_cos(theta).acos()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedOptions {
    /// Grid size for density media.
    pub grid_n: usize,
    /// Relative width at which golden-section search stops.
    pub lambda_rel_tol: f64,
    /// Bracket doublings before giving up.
    pub max_doublings: usize,
    /// Half the number of envelope directions on `[0, 2π)`.
    pub phi_grid: usize,
    /// Polish the envelope minimizer between grid neighbours.
    pub refine_phi: bool,
}

impl Default for SpeedOptions {
    fn default() -> Self {
        SpeedOptions {
            grid_n: 256,
            lambda_rel_tol: 1e-9,
            max_doublings: 40,
            phi_grid: 256,
            refine_phi: true,
        }
    }
}

/// Relative accuracy claimed for every minimal speed.
pub const SPEED_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedResult {
    pub theta: f64,
    pub c_star: f64,
    pub lambda_star: f64,
    pub evaluations: usize,
    pub method: Method,
    /// Absolute accuracy claimed for `c_star`.
    pub tolerance: f64,
}

/// Outcome of a one-dimensional `λ` minimization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Minimum {
    pub lambda: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Minimize `g(λ) = (λ² - μ(λ))/λ` for a concave `μ`.
///
/// The bracket starts at `[1e-3, lambda_hi]` and doubles its right end until
/// a five-point geometric probe has its smallest value strictly inside.
pub fn minimize_speed<F>(mu: F, lambda_hi: f64, opts: &SpeedOptions) -> Result<Minimum>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut evaluations = 0;
    let mut g = |lambda: f64| -> Result<f64> {
        evaluations += 1;
        Ok((lambda * lambda - mu(lambda)?) / lambda)
    };
    let lo0 = 1e-3;
    let hi = lambda_hi.max(2.0 * lo0);
    let ratio = (hi / lo0).powf(0.25);
    let mut probe: Vec<f64> = (0..5)
        .map(|k| if k == 4 { hi } else { lo0 * ratio.powi(k) })
        .collect();
    let mut values = probe.iter().map(|&l| g(l)).collect::<Result<Vec<_>>>()?;
    let best = (0..5)
        .min_by(|a, b| values[*a].total_cmp(&values[*b]))
        .unwrap_or(4);
    let mut bracket = match best {
        // g is unbounded as λ → 0, so the minimum sits left of probe[1]
        0 => Some((lo0 * 1e-3, probe[1])),
        1..=3 => Some((probe[best - 1], probe[best + 1])),
        _ => None,
    };
    // g is unimodal, so walk right by doubling until it turns upward
    let mut doublings = 0;
    while bracket.is_none() && doublings < opts.max_doublings {
        let last = *probe.last().expect("probes");
        let next = 2.0 * last;
        let value = g(next)?;
        doublings += 1;
        if value >= *values.last().expect("probes") {
            bracket = Some((probe[probe.len() - 2], next));
        }
        probe.push(next);
        values.push(value);
    }
    let (mut a, mut b) = bracket.ok_or_else(|| {
        let tail: Vec<_> = probe.iter().zip(&values).rev().take(4).collect();
        Error::numerical(
            "speed minimization",
            format!("no interior minimum after {} doublings; last probes (λ, g) = {tail:?}", opts.max_doublings),
            f64::NAN,
        )
    })?;

    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = g(x1)?;
    let mut f2 = g(x2)?;
    while b - a > opts.lambda_rel_tol * b {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = g(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = g(x2)?;
        }
    }
    let (lambda, value) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    Ok(Minimum {
        lambda,
        value,
        evaluations,
    })
}

/// Minimal and spreading speeds of one medium with shared caches.
pub struct SpeedSolver {
    relation: DispersionRelation,
    opts: SpeedOptions,
    lambda_hi: f64,
    cache: RwLock<HashMap<u64, SpeedResult>>,
}

impl SpeedSolver {
    pub fn new(m: &PeriodicMedium, opts: SpeedOptions) -> Result<Self> {
        if opts.phi_grid < 64 || opts.phi_grid % 2 != 0 {
            return Err(Error::domain(format!(
                "phi grid must be even and at least 64, got {}",
                opts.phi_grid
            )));
        }
        let relation = DispersionRelation::new(m, opts.grid_n)?;
        let a = relation.alpha_tilde();
        let l = relation.period();
        Ok(SpeedSolver {
            relation,
            lambda_hi: (a + a * a * l * l).sqrt() + 1.0,
            opts,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn options(&self) -> &SpeedOptions {
        &self.opts
    }

    pub fn relation(&self) -> &DispersionRelation {
        &self.relation
    }

    /// `[2√α̃, 2√(α̃ + α̃²L²)]`.
    pub fn bounds(&self) -> (f64, f64) {
        let a = self.relation.alpha_tilde();
        let l = self.relation.period();
        (2.0 * a.sqrt(), 2.0 * (a + a * a * l * l).sqrt())
    }

    fn solve_cos(&self, cos: f64) -> Result<SpeedResult> {
        if let Some(r) = self.cache.read().expect("cache poisoned").get(&cos.to_bits()) {
            return Ok(r.clone());
        }
        let min = minimize_speed(|lambda| self.relation.mu(lambda * cos), self.lambda_hi, &self.opts)?;
        let result = SpeedResult {
            theta: cos.acos(),
            c_star: min.value,
            lambda_star: min.lambda,
            evaluations: min.evaluations,
            method: self.relation.method(),
            tolerance: SPEED_TOLERANCE * min.value,
        };
        self.cache
            .write()
            .expect("cache poisoned")
            .insert(cos.to_bits(), result.clone());
        Ok(result)
    }

    /// `c*(θ)`; `theta` in the result is the input angle.
    pub fn c_star(&self, theta: f64) -> Result<SpeedResult> {
        let mut r = self.solve_cos(direction_cos(theta))?;
        r.theta = theta;
        Ok(r)
    }

    fn c_star_value(&self, phi: f64) -> Result<f64> {
        Ok(self.solve_cos(direction_cos(phi))?.c_star)
    }

    /// `c*` on the envelope grid `φ_j = jπ/M`, `j ∈ [0, M/2]`, in parallel.
    fn warm_grid(&self) -> Result<()> {
        let m = self.opts.phi_grid;
        (0..=m / 2)
            .into_par_iter()
            .map(|k| self.c_star_value(k as f64 * PI / m as f64).map(|_| ()))
            .collect::<Result<Vec<()>>>()?;
        Ok(())
    }

    /// `(w(θ), φ_min)`, with `φ_min` reported for the folded direction in
    /// `[0, π/2]`.
    pub fn spreading_speed(&self, theta: f64) -> Result<(f64, f64)> {
        let t = fold_direction(theta);
        let m = self.opts.phi_grid;
        let step = PI / m as f64;
        let ratio = |phi: f64| -> Result<f64> { Ok(self.c_star_value(phi)? / (t - phi).cos()) };

        let mut best = (ratio(t)?, t);
        let reach = FRAC_PI_2 - 0.5 * step;
        let first = ((t - reach) / step).ceil() as i64;
        let last = ((t + reach) / step).floor() as i64;
        for j in first..=last {
            let phi = j as f64 * step;
            if (phi - t).abs() >= reach {
                continue;
            }
            let v = ratio(phi)?;
            if v < best.0 {
                best = (v, phi);
            }
        }
        if self.opts.refine_phi {
            let mut a = (best.1 - step).max(t - reach);
            let mut b = (best.1 + step).min(t + reach);
            let mut x1 = b - INV_PHI * (b - a);
            let mut x2 = a + INV_PHI * (b - a);
            let mut f1 = ratio(x1)?;
            let mut f2 = ratio(x2)?;
            while b - a > 1e-7 {
                if f1 <= f2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - INV_PHI * (b - a);
                    f1 = ratio(x1)?;
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + INV_PHI * (b - a);
                    f2 = ratio(x2)?;
                }
            }
            for (v, phi) in [(f1, x1), (f2, x2)] {
                if v < best.0 {
                    best = (v, phi);
                }
            }
        }
        Ok(best)
    }

    /// Polar samples of `w` on `K` equally spaced directions and the
    /// half-plane intersection over `φ_j = jπ/M`, `j < 2M`.
    pub fn wulff_shape(&self, theta_grid_size: usize) -> Result<WulffShape> {
        if theta_grid_size < 64 {
            return Err(Error::domain(format!(
                "theta grid must have at least 64 directions, got {theta_grid_size}"
            )));
        }
        self.warm_grid()?;
        let thetas: Vec<f64> = (0..theta_grid_size)
            .map(|k| 2.0 * PI * k as f64 / theta_grid_size as f64)
            .collect();
        let polar = thetas
            .par_iter()
            .map(|&t| self.spreading_speed(t))
            .collect::<Result<Vec<_>>>()?;
        let m = self.opts.phi_grid;
        let halfplanes = (0..2 * m)
            .map(|j| {
                let phi = j as f64 * PI / m as f64;
                Ok(HalfPlane {
                    phi,
                    offset: self.c_star_value(phi)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let vertices = intersect_halfplanes(&halfplanes);
        let support_error = halfplanes
            .iter()
            .map(|hp| (support(&vertices, hp.phi) - hp.offset).abs() / hp.offset)
            .fold(0.0_f64, f64::max);
        let shape = WulffShape {
            polygon: thetas
                .iter()
                .zip(&polar)
                .map(|(t, (w, _))| [w * t.cos(), w * t.sin()])
                .collect(),
            theta_grid: thetas,
            w_values: polar.iter().map(|p| p.0).collect(),
            minimizer_phi: polar.iter().map(|p| p.1).collect(),
            halfplanes,
            vertices,
            support_error,
        };
        if support_error > 1e-6 {
            return Err(Error::PropertyFailure(format!(
                "half-plane polygon support deviates from c* by {support_error:e}"
            )));
        }
        Ok(shape)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    /// Outer normal direction `e_φ`.
    pub phi: f64,
    /// `x · e_φ ≤ offset`.
    pub offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WulffShape {
    pub theta_grid: Vec<f64>,
    pub w_values: Vec<f64>,
    /// Envelope minimizer for the folded direction of each grid angle.
    pub minimizer_phi: Vec<f64>,
    /// `w(θ) e_θ` in grid order.
    pub polygon: Vec<[f64; 2]>,
    pub halfplanes: Vec<HalfPlane>,
    /// Vertices of the half-plane intersection, counter-clockwise.
    pub vertices: Vec<[f64; 2]>,
    /// Largest relative gap between polygon support and `c*` on the φ grid.
    pub support_error: f64,
}

fn support(vertices: &[[f64; 2]], phi: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    vertices
        .iter()
        .map(|v| v[0] * c + v[1] * s)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Sutherland–Hodgman clipping of a large square by every half-plane.
pub fn intersect_halfplanes(halfplanes: &[HalfPlane]) -> Vec<[f64; 2]> {
    let r = 4.0 * halfplanes.iter().map(|h| h.offset.abs()).fold(1.0, f64::max);
    let mut poly = vec![[-r, -r], [r, -r], [r, r], [-r, r]];
    for hp in halfplanes {
        let (s, c) = hp.phi.sin_cos();
        let side = |p: &[f64; 2]| p[0] * c + p[1] * s - hp.offset;
        let mut next = Vec::with_capacity(poly.len() + 1);
        for i in 0..poly.len() {
            let p = poly[i];
            let q = poly[(i + 1) % poly.len()];
            let (sp, sq) = (side(&p), side(&q));
            if sp <= 0.0 {
                next.push(p);
            }
            if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
                let t = sp / (sp - sq);
                next.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
        poly = next;
        if poly.is_empty() {
            break;
        }
    }
    poly
}

/// `c*(θ)` of one medium.
pub fn c_star(m: &PeriodicMedium, theta: f64, opts: &SpeedOptions) -> Result<SpeedResult> {
    SpeedSolver::new(m, opts.clone())?.c_star(theta)
}

/// `(w(θ), φ_min)` with the given envelope resolution.
pub fn spreading_speed(m: &PeriodicMedium, theta: f64, phi_grid_size: usize) -> Result<(f64, f64)> {
    let opts = SpeedOptions {
        phi_grid: phi_grid_size,
        ..SpeedOptions::default()
    };
    SpeedSolver::new(m, opts)?.spreading_speed(theta)
}

pub fn wulff_shape(m: &PeriodicMedium, theta_grid_size: usize, phi_grid_size: usize) -> Result<WulffShape> {
    let opts = SpeedOptions {
        phi_grid: phi_grid_size,
        ..SpeedOptions::default()
    };
    SpeedSolver::new(m, opts)?.wulff_shape(theta_grid_size)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub theta: Vec<f64>,
    pub c_star: Vec<f64>,
    pub w: Vec<f64>,
    pub min_c_increment: f64,
    pub min_w_increment: f64,
    /// Every adjacent increment of both sequences exceeds the strictness probe.
    pub strictly_increasing: bool,
    /// Constant media: equality is the expected outcome.
    pub degenerate: bool,
}

/// Increments of `c*` and `w` along an increasing grid in `[0, π/2]`.
///
/// Fails when a sequence decreases by more than `slack`, or when a
/// nonconstant medium never increases by more than `probe`.
pub fn monotonicity_check(
    solver: &SpeedSolver,
    theta_grid: &[f64],
    constant: bool,
    slack: f64,
    probe: f64,
) -> Result<MonotonicityReport> {
    let c = theta_grid
        .par_iter()
        .map(|t| solver.c_star(*t).map(|r| r.c_star))
        .collect::<Result<Vec<_>>>()?;
    let w = theta_grid
        .par_iter()
        .map(|t| solver.spreading_speed(*t).map(|r| r.0))
        .collect::<Result<Vec<_>>>()?;
    let increments = |v: &[f64]| v.windows(2).map(|p| p[1] - p[0]).collect::<Vec<_>>();
    let (dc, dw) = (increments(&c), increments(&w));
    let min_of = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let report = MonotonicityReport {
        theta: theta_grid.to_vec(),
        min_c_increment: min_of(&dc),
        min_w_increment: min_of(&dw),
        strictly_increasing: dc.iter().chain(&dw).all(|d| *d > probe),
        degenerate: constant,
        c_star: c,
        w,
    };
    if constant {
        return Ok(report);
    }
    for (name, d) in [("c*", &dc), ("w", &dw)] {
        if let Some(i) = d.iter().position(|x| *x < -slack) {
            return Err(Error::PropertyFailure(format!(
                "{name} decreases from θ = {} to θ = {} by {}",
                theta_grid[i],
                theta_grid[i + 1],
                -d[i]
            )));
        }
    }
    if !dc.iter().any(|x| *x > probe) {
        return Err(Error::PropertyFailure("c* never increases strictly".into()));
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    pub theta: f64,
    pub c_comb: f64,
    pub c_medium: f64,
    pub w_comb: f64,
    pub w_medium: f64,
    pub margin_c: f64,
    pub margin_w: f64,
    /// `10 ×` the claimed speed tolerance.
    pub strictness: f64,
}

/// Compares a medium against the comb with the same `(α, L, slope)`.
pub fn optimality_check(m: &PeriodicMedium, theta: f64, opts: &SpeedOptions) -> Result<OptimalityReport> {
    let comb = crate::media::make_dirac_comb(m.mass(), m.period(), m.slope())?;
    let hs = SpeedSolver::new(&comb, opts.clone())?;
    let ms = SpeedSolver::new(m, opts.clone())?;
    let (ch, cm) = (hs.c_star(theta)?, ms.c_star(theta)?);
    let (wh, wm) = (hs.spreading_speed(theta)?.0, ms.spreading_speed(theta)?.0);
    let strictness = 10.0 * ch.tolerance.max(cm.tolerance);
    let report = OptimalityReport {
        theta,
        c_comb: ch.c_star,
        c_medium: cm.c_star,
        w_comb: wh,
        w_medium: wm,
        margin_c: ch.c_star - cm.c_star,
        margin_w: wh - wm,
        strictness,
    };
    if report.margin_c <= strictness {
        return Err(Error::PropertyFailure(format!(
            "comb does not beat the medium at θ = {theta}: margin {}",
            report.margin_c
        )));
    }
    if report.margin_w < -strictness {
        return Err(Error::PropertyFailure(format!(
            "comb spreads slower than the medium at θ = {theta}: margin {}",
            report.margin_w
        )));
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    SmallL,
    LargeLCStar,
    LargeLW,
}

/// Limiting laws: `2√α̃` as `L → 0`; `L·α̃/(2|cosθ|)` or `L·α̃|sinθ|` for `c*`
/// and `L·α̃/(1 + |cosθ|)` for `w` as `L → ∞`.
pub fn asymptotic_reference(theta: f64, alpha: f64, period: f64, slope: f64, regime: Regime) -> Result<f64> {
    ensure_positive("alpha", alpha)?;
    ensure_positive("L", period)?;
    ensure_positive("slope", slope)?;
    let a = alpha * slope;
    let c = theta.cos().abs();
    Ok(match regime {
        Regime::SmallL => 2.0 * a.sqrt(),
        Regime::LargeLCStar if c * c >= 0.5 => period * a / (2.0 * c),
        Regime::LargeLCStar => period * a * theta.sin().abs(),
        Regime::LargeLW => period * a / (1.0 + c),
    })
}

/// `c*` of the comb straight from the scalar equation, bypassing caches.
pub fn comb_c_star(alpha: f64, period: f64, slope: f64, theta: f64, opts: &SpeedOptions) -> Result<SpeedResult> {
    let cos = direction_cos(theta);
    let a = alpha * slope;
    let min = minimize_speed(
        |lambda| Ok(comb_mu(alpha, period, slope, lambda * cos)?.mu),
        (a + a * a * period * period).sqrt() + 1.0,
        opts,
    )?;
    Ok(SpeedResult {
        theta,
        c_star: min.value,
        lambda_star: min.lambda,
        evaluations: min.evaluations,
        method: Method::CombAnalytic,
        tolerance: SPEED_TOLERANCE * min.value,
    })
}
