//! Floquet transfer-matrix oracle for piecewise-constant media and the
//! single-atom comb.
//!
//! `(ψ, ψ')` is propagated across one period. On a segment with constant
//! `b̃` the propagator is `e^{λ̄ℓ}(C I + S N)` with
//! `N = [[-λ̄, 1], [-(b̃ + μ), λ̄]]`, `N² = d I`, `d = λ̄² - b̃ - μ`. An atom
//! adds `[[1, 0], [-α̃L, 1]]`. With `T = e^{λ̄L} T̂`, a periodic solution
//! exists iff `tr T̂ = 2 cosh(λ̄L)`; the principal one is the lowest such `μ`.

use crate::error::{Error, Result};
use crate::media::{MediumKind, PeriodicMedium};

const SCAN_STEPS: usize = 400;

type Mat = [[f64; 2]; 2];

fn mul(a: &Mat, b: &Mat) -> Mat {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

/// `C I + S N` over length `l`, returned as `(matrix · e^{-scale}, scale)`.
fn segment(lambda_bar: f64, b: f64, mu: f64, l: f64) -> (Mat, f64) {
    let d = lambda_bar * lambda_bar - b - mu;
    let z = d * l * l;
    let (c, s, scale) = if z.abs() < 1e-8 {
        (1.0 + 0.5 * z, l * (1.0 + z / 6.0), 0.0)
    } else if d > 0.0 {
        let r = d.sqrt();
        let e = -2.0 * r * l;
        (0.5 * (2.0 + e.exp_m1()), -0.5 * e.exp_m1() / r, r * l)
    } else {
        let r = (-d).sqrt();
        ((r * l).cos(), (r * l).sin() / r, 0.0)
    };
    (
        [
            [c - s * lambda_bar, s],
            [-s * (b + mu), c + s * lambda_bar],
        ],
        scale,
    )
}

/// Pieces of one period as `(length, b̃, atom weight α̃L after the piece)`.
fn pieces(m: &PeriodicMedium) -> Result<Vec<(f64, f64, f64)>> {
    let slope = m.slope();
    match m.kind() {
        MediumKind::PiecewiseConstant { segments } => {
            Ok(segments.iter().map(|s| (s.length, slope * s.value, 0.0)).collect())
        }
        MediumKind::DiracComb { .. } => Ok(vec![(m.period(), 0.0, m.effective_mass() * m.period())]),
        _ if m.is_constant() => Ok(vec![(m.period(), m.effective_mass(), 0.0)]),
        _ => Err(Error::UnsupportedRepresentation(
            "transfer matrix needs a piecewise-constant medium or a Dirac comb".into(),
        )),
    }
}

struct Monodromy {
    matrix: Mat,
    /// `T̂ = e^{log_scale} · matrix`.
    log_scale: f64,
}

fn monodromy(pieces: &[(f64, f64, f64)], lambda_bar: f64, mu: f64) -> Monodromy {
    let mut t: Mat = [[1.0, 0.0], [0.0, 1.0]];
    let mut log_scale = 0.0;
    for &(l, b, w) in pieces {
        let (seg, sc) = segment(lambda_bar, b, mu, l);
        t = mul(&seg, &t);
        if w != 0.0 {
            t = mul(&[[1.0, 0.0], [-w, 1.0]], &t);
        }
        let top = t.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
        t.iter_mut().flatten().for_each(|v| *v /= top);
        log_scale += sc + top.ln();
    }
    Monodromy { matrix: t, log_scale }
}

/// `(2cosh(λ̄L) - tr T̂)` normalized to `[-1, 1]`; negative below the spectrum.
fn floquet_gap(pieces: &[(f64, f64, f64)], lambda_bar: f64, period: f64, mu: f64) -> f64 {
    let mono = monodromy(pieces, lambda_bar, mu);
    let x = lambda_bar.abs() * period;
    let log_target = x + (-2.0 * x).exp().ln_1p();
    let target = (log_target - mono.log_scale).exp();
    let tr = mono.matrix[0][0] + mono.matrix[1][1];
    if target.is_infinite() {
        return 1.0;
    }
    (target - tr) / (target + tr.abs())
}

fn eigenvector_positive(pieces: &[(f64, f64, f64)], lambda_bar: f64, period: f64, mu: f64) -> bool {
    let mono = monodromy(pieces, lambda_bar, mu);
    let t = mono.matrix;
    // (T - I) v = 0 with T = e^{λ̄L + log_scale} t, rescaled by e^{-(λ̄L + log_scale)}
    let damp = (-(lambda_bar * period + mono.log_scale)).exp();
    let mut v = [t[0][1], damp - t[0][0]];
    if v[0] == 0.0 && v[1] == 0.0 {
        v = [damp - t[1][1], t[1][0]];
    }
    if v[0] < 0.0 {
        v = [-v[0], -v[1]];
    }
    if v[0] <= 0.0 {
        return false;
    }
    for &(l, b, w) in pieces {
        let (half, _) = segment(lambda_bar, b, mu, 0.5 * l);
        for _ in 0..2 {
            v = [half[0][0] * v[0] + half[0][1] * v[1], half[1][0] * v[0] + half[1][1] * v[1]];
            if v[0] <= 0.0 {
                return false;
            }
            let top = v[0].abs().max(v[1].abs());
            v = [v[0] / top, v[1] / top];
        }
        v[1] -= w * v[0];
    }
    true
}

/// Principal eigenvalue at `λ̄ = λcosθ` from the period-map condition.
pub fn transfer_matrix_mu(m: &PeriodicMedium, lambda_bar: f64) -> Result<f64> {
    let pieces = pieces(m)?;
    let period = m.period();
    let alpha_tilde = m.effective_mass();
    let max_b = pieces.iter().fold(0.0_f64, |acc, p| acc.max(p.1));
    let f = |mu: f64| floquet_gap(&pieces, lambda_bar, period, mu);

    let hi = -alpha_tilde + 1e-9 * alpha_tilde.max(1.0);
    let mut lo = -(max_b.max(alpha_tilde + alpha_tilde * alpha_tilde * period * period)) - 1.0;
    let mut expansions = 0;
    while f(lo) >= 0.0 {
        expansions += 1;
        if expansions > 60 {
            return Err(Error::numerical("transfer matrix", "no negative Floquet gap below the spectrum", f(lo)));
        }
        lo *= 2.0;
    }

    let step = (hi - lo) / SCAN_STEPS as f64;
    let mut a = lo;
    let mut b = None;
    for k in 1..=SCAN_STEPS {
        let x = if k == SCAN_STEPS { hi } else { lo + step * k as f64 };
        if f(x) >= 0.0 {
            b = Some(x);
            break;
        }
        a = x;
    }
    let mut b = b.ok_or_else(|| {
        Error::numerical("transfer matrix", format!("no sign change on [{lo}, {hi}]"), f(hi))
    })?;
    loop {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if f(mid) < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let mu = if f(a).abs() <= f(b).abs() { a } else { b };
    if !eigenvector_positive(&pieces, lambda_bar, period, mu) {
        return Err(Error::numerical(
            "transfer matrix",
            format!("Floquet vector at μ = {mu} is not positive"),
            f(mu),
        ));
    }
    Ok(mu)
}
