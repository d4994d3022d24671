//! Exact dispersion relation of the periodic Dirac comb.
//!
//! Between atoms the eigenfunction is `A e^{(λ̄+s)y} + B e^{(λ̄-s)y}` with
//! `s = √(λ̄² - μ)`, `y` the distance past the atom. Continuity and the jump
//! `ψ'(x₀⁺) - ψ'(x₀⁻) = -α̃L ψ(x₀)` leave the scalar equation
//!
//! ```text
//! 2s = α̃L [ 1/(1 - e^{(λ̄-s)L}) + 1/(e^{(λ̄+s)L} - 1) ]
//! ```
//!
//! whose right side minus left side decreases strictly in `s > |λ̄|`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

const MAX_DOUBLINGS: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombDispersion {
    pub alpha: f64,
    #[serde(rename = "L")]
    pub period: f64,
    pub slope: f64,
    pub lambda_bar: f64,
    pub mu: f64,
    pub s: f64,
    /// Right side minus left side of the comb equation at `s`.
    pub residual: f64,
}

impl CombDispersion {
    pub fn alpha_tilde(&self) -> f64 {
        self.alpha * self.slope
    }

    /// Residual bound `1e-12 (1 + αL)` used to certify a root.
    pub fn tolerance(&self) -> f64 {
        1e-12 * (1.0 + self.alpha * self.period)
    }
}

fn check(alpha: f64, period: f64, slope: f64, lambda_bar: f64) -> Result<()> {
    ensure_positive("alpha", alpha)?;
    ensure_positive("L", period)?;
    ensure_positive("slope", slope)?;
    if !lambda_bar.is_finite() {
        return Err(Error::domain(format!("lambda_bar must be finite, got {lambda_bar}")));
    }
    Ok(())
}

/// Coefficients `(A, B)` of the two exponentials; both positive for `s > |λ̄|`.
fn amplitudes(lambda_bar: f64, s: f64, period: f64) -> (f64, f64) {
    let p = lambda_bar + s;
    let q = lambda_bar - s;
    (1.0 / (p * period).exp_m1(), -1.0 / (q * period).exp_m1())
}

fn comb_gap(alpha_tilde: f64, period: f64, lambda_bar: f64, s: f64) -> f64 {
    let (a, b) = amplitudes(lambda_bar, s, period);
    alpha_tilde * period * (a + b) - 2.0 * s
}

/// Bisection of a strictly decreasing function down to adjacent floats.
/// `f(lo) > 0` is assumed, `hi` is doubled until `f(hi) ≤ 0`.
fn bisect_decreasing(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    let mut doublings = 0;
    while f(hi) > 0.0 {
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::numerical("comb root", "no sign change while doubling the bracket", f(hi)));
        }
        lo = hi;
        hi *= 2.0;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if f(lo).abs() < f(hi).abs() { lo } else { hi })
}

/// Principal eigenvalue of the comb at `λ̄ = λcosθ`.
pub fn comb_mu(alpha: f64, period: f64, slope: f64, lambda_bar: f64) -> Result<CombDispersion> {
    check(alpha, period, slope, lambda_bar)?;
    let alpha_tilde = alpha * slope;
    let abs_bar = lambda_bar.abs();
    let f = |s: f64| {
        if s <= abs_bar {
            f64::INFINITY
        } else {
            comb_gap(alpha_tilde, period, abs_bar, s)
        }
    };
    let hi = (alpha_tilde + alpha_tilde * alpha_tilde * period * period + abs_bar * abs_bar).sqrt();
    let s = bisect_decreasing(abs_bar, hi, f)?;
    Ok(CombDispersion {
        alpha,
        period,
        slope,
        lambda_bar,
        mu: -(s - abs_bar) * (s + abs_bar),
        s,
        residual: comb_gap(alpha_tilde, period, abs_bar, s),
    })
}

/// `λ̄ = 0` through the symmetric form `2s tanh(sL/2) = α̃L`.
pub fn comb_mu_zero_lambda(alpha: f64, period: f64, slope: f64) -> Result<CombDispersion> {
    check(alpha, period, slope, 0.0)?;
    let alpha_tilde = alpha * slope;
    let f = |s: f64| alpha_tilde * period - 2.0 * s * (0.5 * s * period).tanh();
    let hi = (alpha_tilde + alpha_tilde * alpha_tilde * period * period).sqrt();
    let s = bisect_decreasing(0.0, hi, f)?;
    Ok(CombDispersion {
        alpha,
        period,
        slope,
        lambda_bar: 0.0,
        mu: -s * s,
        s,
        residual: comb_gap(alpha_tilde, period, 0.0, s),
    })
}

/// Large-period asymptote `-α̃²L²/4 + λ̄²`.
pub fn comb_mu_large_l(alpha: f64, period: f64, slope: f64, lambda_bar: f64) -> f64 {
    let a = alpha * slope;
    -0.25 * a * a * period * period + lambda_bar * lambda_bar
}

/// Eigenfunction at the cell centres `(i + 1/2) L / n` for an atom at
/// `offset`, normalized to unit maximum.
pub fn comb_psi(root: &CombDispersion, offset: f64, n: usize) -> Vec<f64> {
    let period = root.period;
    let h = period / n as f64;
    let p = root.lambda_bar + root.s;
    let q = root.lambda_bar - root.s;
    let a_den = -(-p * period).exp_m1();
    let b_den = -(q * period).exp_m1();
    let mut psi: Vec<f64> = (0..n)
        .map(|i| {
            let x = (i as f64 + 0.5) * h;
            let y = (x - offset).rem_euclid(period);
            (p * (y - period)).exp() / a_den + (q * y).exp() / b_den
        })
        .collect();
    let top = psi.iter().fold(0.0_f64, |m, v| m.max(*v));
    psi.iter_mut().for_each(|v| *v /= top);
    psi
}

/// `(λ̄, μ, s, residual)` along a `λ̄` grid.
pub fn comb_curve(alpha: f64, period: f64, slope: f64, lambda_bars: &[f64]) -> Result<Vec<CombDispersion>> {
    lambda_bars
        .iter()
        .map(|&lb| comb_mu(alpha, period, slope, lb))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_comb_matches_frozen_root() {
        let r = comb_mu(1.0, 1.0, 1.0, 0.0).unwrap();
        assert!((r.mu - -1.089_157_097_202_029_3).abs() < 1e-13);
        assert!(r.residual.abs() <= r.tolerance());
        let z = comb_mu_zero_lambda(1.0, 1.0, 1.0).unwrap();
        assert!((z.mu - r.mu).abs() < 1e-12);
    }

    #[test]
    fn drift_root_matches_frozen_value() {
        let r = comb_mu(1.0, 1.0, 1.0, 0.5).unwrap();
        assert!((r.mu - -1.087_668_738_348_616_9).abs() < 1e-13);
        assert!(r.s > 0.5);
    }

    #[test]
    fn even_in_lambda_bar() {
        for lb in [0.1, 0.9, 3.0, 40.0] {
            let a = comb_mu(1.3, 0.7, 1.1, lb).unwrap();
            let b = comb_mu(1.3, 0.7, 1.1, -lb).unwrap();
            assert_eq!(a.mu.to_bits(), b.mu.to_bits());
        }
    }

    #[test]
    fn small_and_large_period_limits() {
        let small = comb_mu_zero_lambda(1.0, 0.01, 1.0).unwrap();
        assert!((small.mu - -1.000_008_333_388_889).abs() < 1e-12);
        let big = comb_mu(1.0, 50.0, 1.0, 1.0).unwrap();
        let asym = comb_mu_large_l(1.0, 50.0, 1.0, 1.0);
        assert_eq!(asym, -624.0);
        assert!(((big.mu - asym) / big.mu).abs() < 0.02);
        assert!(big.residual.abs() <= big.tolerance());
    }

    #[test]
    fn extreme_drift_stays_finite() {
        let r = comb_mu(1.0, 50.0, 1.0, 200.0).unwrap();
        assert!(r.mu.is_finite() && r.mu <= -1.0);
        let psi = comb_psi(&r, 25.0, 64);
        assert!(psi.iter().all(|v| v.is_finite() && *v > 0.0));
    }

    #[test]
    fn psi_peaks_at_atom_without_drift() {
        let r = comb_mu(1.0, 1.0, 1.0, 0.0).unwrap();
        let psi = comb_psi(&r, 0.5, 64);
        assert!(psi[31] == 1.0 || psi[32] == 1.0);
        assert!((psi[31] - psi[32]).abs() < 1e-14);
        assert!((psi[0] - psi[63]).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(comb_mu(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(comb_mu(1.0, -1.0, 1.0, 0.0).is_err());
        assert!(comb_mu(1.0, 1.0, 1.0, f64::NAN).is_err());
    }
}
