//! Variational upper bound for the principal eigenvalue.
//!
//! For positive periodic `η`,
//! `𝓗(η) = [∫(η'² - b̃η²) + λ̄²(∫η² - L²/∫η⁻²)] / ∫η²` is at least `μ`, with
//! equality at `η = √(ψψ*)`. The minimizer gives back `ψ = η e^{λ̄ξ}` where
//! `ξ' = 1 - Aη⁻²` and `A` makes `ξ` periodic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::{MediumKind, PeriodicMedium};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EtaBranch {
    /// `min η > 0`: full functional.
    Positive,
    /// `min η = 0`: `∫η⁻² = ∞`, the drift term reduces to `λ̄²`.
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalCertificate {
    pub eta: Vec<f64>,
    pub value_h: f64,
    /// `∫ η'²`.
    pub dirichlet: f64,
    /// `∫ b̃ η²`, atoms evaluated exactly.
    pub mass: f64,
    /// `λ̄² (∫η² - L²/∫η⁻²)`; zero on the degenerate branch.
    pub schwarz_gap: f64,
    pub branch: EtaBranch,
}

/// `𝓗(η)` with the branch chosen from `min η`. `η` lives at the cell centres
/// `(i + 1/2) L / n`.
pub fn nadin_value(m: &PeriodicMedium, lambda: f64, theta: f64, eta: &[f64]) -> Result<VariationalCertificate> {
    let min = eta.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    let branch = if min > 0.0 { EtaBranch::Positive } else { EtaBranch::Degenerate };
    nadin_value_on(m, lambda, theta, eta, branch)
}

/// `𝓗(η)` on a requested branch.
pub fn nadin_value_on(
    m: &PeriodicMedium,
    lambda: f64,
    theta: f64,
    eta: &[f64],
    branch: EtaBranch,
) -> Result<VariationalCertificate> {
    let n = eta.len();
    if n < 8 {
        return Err(Error::domain(format!("need at least 8 samples of eta, got {n}")));
    }
    if eta.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::domain("eta must be finite and nonnegative"));
    }
    if branch == EtaBranch::Positive && eta.iter().any(|v| *v <= 0.0) {
        return Err(Error::domain("eta has nonpositive entries; only the degenerate branch applies"));
    }
    let lambda_bar = lambda * theta.cos();
    let period = m.period();
    let h = period / n as f64;

    let dirichlet = (0..n)
        .map(|i| {
            let d = eta[(i + 1) % n] - eta[i];
            d * d
        })
        .sum::<f64>()
        / h;
    let mass = match m.kind() {
        MediumKind::DiracComb { offset } => {
            let pos = offset / h - 0.5;
            let j = pos.floor();
            let t = pos - j;
            let j = (j as i64).rem_euclid(n as i64) as usize;
            let at = (1.0 - t) * eta[j] + t * eta[(j + 1) % n];
            m.effective_mass() * period * at * at
        }
        _ => {
            let slope = m.slope();
            m.sample_on_grid(n)?
                .iter()
                .zip(eta)
                .map(|(b, e)| slope * b * e * e)
                .sum::<f64>()
                * h
        }
    };
    let sum_sq: f64 = eta.iter().map(|e| e * e).sum();
    let norm = h * sum_sq;
    let schwarz_gap = match branch {
        EtaBranch::Positive => {
            // Lagrange identity: Σe² Σe⁻² - n² = Σ_{i<j} (e_i/e_j - e_j/e_i)²
            let mut lagrange = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    let d = eta[i] / eta[j] - eta[j] / eta[i];
                    lagrange += d * d;
                }
            }
            let inv_sum: f64 = eta.iter().map(|e| 1.0 / (e * e)).sum();
            lambda_bar * lambda_bar * h * lagrange / inv_sum
        }
        EtaBranch::Degenerate => 0.0,
    };
    let drift = match branch {
        EtaBranch::Positive => schwarz_gap / norm,
        EtaBranch::Degenerate => lambda_bar * lambda_bar,
    };
    Ok(VariationalCertificate {
        eta: eta.to_vec(),
        value_h: (dirichlet - mass) / norm + drift,
        dirichlet,
        mass,
        schwarz_gap,
        branch,
    })
}

/// `ψ = η e^{λ̄ξ}` with trapezoidal `ξ`, `ξ₀ = 0`, normalized to unit maximum.
pub fn reconstruct_psi_from_eta(eta: &[f64], m: &PeriodicMedium, lambda: f64, theta: f64) -> Result<Vec<f64>> {
    let n = eta.len();
    if n < 2 || eta.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::domain("eta must have at least two strictly positive entries"));
    }
    let lambda_bar = lambda * theta.cos();
    let h = m.period() / n as f64;
    let inv: Vec<f64> = eta.iter().map(|e| 1.0 / (e * e)).collect();
    let a = n as f64 / inv.iter().sum::<f64>();
    let mut xi = 0.0;
    let mut psi = Vec::with_capacity(n);
    for i in 0..n {
        psi.push(eta[i] * (lambda_bar * xi).exp());
        xi += h * (1.0 - 0.5 * a * (inv[i] + inv[(i + 1) % n]));
    }
    let top = psi.iter().fold(0.0_f64, |acc, v| acc.max(*v));
    psi.iter_mut().for_each(|v| *v /= top);
    Ok(psi)
}
