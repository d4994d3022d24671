//! Principal eigenvalue `μ(λ, θ, b)` of the periodic operator
//! `-ψ'' + 2λcosθ ψ' - f'(0) b(x) ψ` and its eigenfunction.
//!
//! Only `λ̄ = λ cosθ` enters; every entry point reduces `(λ, θ)` to `λ̄` once
//! and discards `θ`. The grid route uses central differences on a uniform
//! cell-centred grid; Dirac combs go through [`crate::comb`] analytically.

pub(crate) mod principal;
mod transfer;
mod variational;

use std::collections::HashMap;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::comb;
use crate::error::{Error, Result};
use crate::media::{MediumKind, PeriodicMedium};
use principal::{principal_pair, CyclicFactor, CyclicTridiagonal, ShiftInvert};

pub use transfer::transfer_matrix_mu;
pub use variational::{
    nadin_value, reconstruct_psi_from_eta, EtaBranch, VariationalCertificate,
};

/// Smallest grid accepted by the grid eigensolver.
pub const MIN_GRID: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Grid,
    TransferMatrix,
    CombAnalytic,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Grid => "grid",
            Method::TransferMatrix => "transfer_matrix",
            Method::CombAnalytic => "comb_analytic",
        }
    }
}

/// One evaluation `(λ, θ) ↦ (μ, ψ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionSample {
    pub lambda: f64,
    pub theta: f64,
    pub lambda_bar: f64,
    pub mu: f64,
    /// Eigenfunction at the cell centres `(i + 1/2) L / N`, max-normalized.
    pub psi: Vec<f64>,
    pub grid_n: usize,
    pub method: Method,
    /// Relative residual of the discrete eigen-equation (0 for analytic combs).
    pub residual: f64,
}

impl DispersionSample {
    /// `max ψ / min ψ`.
    pub fn psi_ratio(&self) -> f64 {
        let (lo, hi) = self
            .psi
            .iter()
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        hi / lo
    }
}

/// `-ψ'' + 2λ̄ψ' - b̃ψ` on `N` cells with central differences.
#[derive(Clone, Debug)]
pub(crate) struct GridOperator {
    matrix: CyclicTridiagonal,
    max_b: f64,
    min_b: f64,
}

impl GridOperator {
    pub fn new(b_tilde: &[f64], period: f64, lambda_bar: f64) -> Result<Self> {
        let n = b_tilde.len();
        let h = period / n as f64;
        if lambda_bar.abs() * h > 1.0 {
            return Err(Error::domain(format!(
                "drift |λcosθ| = {} too strong for grid spacing {h}; need |λcosθ|·Δx ≤ 1",
                lambda_bar.abs()
            )));
        }
        let inv_h2 = 1.0 / (h * h);
        Ok(GridOperator {
            matrix: CyclicTridiagonal {
                lower: -inv_h2 - lambda_bar / h,
                upper: -inv_h2 + lambda_bar / h,
                diag: b_tilde.iter().map(|b| 2.0 * inv_h2 - b).collect(),
            },
            max_b: b_tilde.iter().fold(f64::NEG_INFINITY, |m, b| m.max(*b)),
            min_b: b_tilde.iter().fold(f64::INFINITY, |m, b| m.min(*b)),
        })
    }
}

impl ShiftInvert for GridOperator {
    type Factor = CyclicFactor;

    fn dim(&self) -> usize {
        self.matrix.diag.len()
    }

    fn lower_bound(&self) -> f64 {
        -self.max_b
    }

    fn upper_bound(&self) -> f64 {
        -self.min_b
    }

    fn factor(&self, shift: f64) -> Result<CyclicFactor> {
        self.matrix.factor(shift)
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.matrix.apply(x, out)
    }
}

fn grid_coefficients(m: &PeriodicMedium, n: usize) -> Result<Vec<f64>> {
    if m.is_atomic() {
        return Err(Error::UnsupportedRepresentation(
            "grid eigensolver cannot take a Dirac comb; mollify it or use the comb module".into(),
        ));
    }
    if n < MIN_GRID {
        return Err(Error::domain(format!("grid size must be at least {MIN_GRID}, got {n}")));
    }
    let slope = m.slope();
    Ok(m.sample_on_grid(n)?.into_iter().map(|b| slope * b).collect())
}

fn solve_grid(
    b_tilde: &[f64],
    period: f64,
    lambda: f64,
    theta: f64,
    lambda_bar: f64,
) -> Result<DispersionSample> {
    let op = GridOperator::new(b_tilde, period, lambda_bar)?;
    let pair = principal_pair(&op, "grid eigensolve")?;
    Ok(DispersionSample {
        lambda,
        theta,
        lambda_bar,
        mu: pair.value,
        psi: pair.vector,
        grid_n: b_tilde.len(),
        method: Method::Grid,
        residual: pair.residual / pair.value.abs().max(1.0),
    })
}

/// Principal eigenpair on the uniform `n`-cell grid.
pub fn mu_grid(m: &PeriodicMedium, lambda: f64, theta: f64, n: usize) -> Result<DispersionSample> {
    let b_tilde = grid_coefficients(m, n)?;
    let lambda_bar = lambda * theta.cos();
    solve_grid(&b_tilde, m.period(), lambda, theta, lambda_bar)
}

/// Principal eigenfunction of the adjoint `-L_{-λ,θ}`; its eigenvalue equals
/// that of `-L_{λ,θ}`. The returned sample describes the operator solved, so
/// `lambda` and `lambda_bar` carry the flipped sign.
pub fn adjoint_psi(m: &PeriodicMedium, lambda: f64, theta: f64, n: usize) -> Result<DispersionSample> {
    let b_tilde = grid_coefficients(m, n)?;
    let lambda_bar = -(lambda * theta.cos());
    solve_grid(&b_tilde, m.period(), -lambda, theta, lambda_bar)
}

/// `‖(A - μ)ψ‖∞ / (‖ψ‖∞ max(1, |μ|))` for the grid operator of `m` at `(λ, θ)`.
pub fn eigen_residual(m: &PeriodicMedium, lambda: f64, theta: f64, psi: &[f64], mu: f64) -> Result<f64> {
    let b_tilde = grid_coefficients(m, psi.len())?;
    let op = GridOperator::new(&b_tilde, m.period(), lambda * theta.cos())?;
    let mut out = vec![0.0; psi.len()];
    op.apply(psi, &mut out);
    let norm = psi.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let worst = out
        .iter()
        .zip(psi)
        .fold(0.0_f64, |acc, (a, p)| acc.max((a - mu * p).abs()));
    Ok(worst / (norm * mu.abs().max(1.0)))
}

enum Backend {
    Grid { b_tilde: Vec<f64> },
    Comb { alpha: f64, slope: f64, offset: f64 },
}

/// The map `λ̄ ↦ μ` for one medium at one resolution, with a concurrent cache
/// keyed by `(medium hash, λ̄, N)`.
pub struct DispersionRelation {
    backend: Backend,
    period: f64,
    alpha_tilde: f64,
    grid_n: usize,
    medium_key: u64,
    cache: RwLock<HashMap<(u64, u64, usize), f64>>,
}

impl DispersionRelation {
    /// Grid backend for densities, analytic backend for Dirac combs.
    pub fn new(m: &PeriodicMedium, grid_n: usize) -> Result<Self> {
        let backend = match m.kind() {
            MediumKind::DiracComb { offset } => Backend::Comb {
                alpha: m.mass(),
                slope: m.slope(),
                offset: *offset,
            },
            _ => Backend::Grid {
                b_tilde: grid_coefficients(m, grid_n)?,
            },
        };
        Ok(DispersionRelation {
            backend,
            period: m.period(),
            alpha_tilde: m.effective_mass(),
            grid_n,
            medium_key: m.hash_key(),
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn method(&self) -> Method {
        match self.backend {
            Backend::Grid { .. } => Method::Grid,
            Backend::Comb { .. } => Method::CombAnalytic,
        }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn alpha_tilde(&self) -> f64 {
        self.alpha_tilde
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    /// `μ₀(λ̄)`, cached.
    pub fn mu(&self, lambda_bar: f64) -> Result<f64> {
        let key = (self.medium_key, lambda_bar.to_bits(), self.grid_n);
        if let Some(mu) = self.cache.read().expect("cache poisoned").get(&key) {
            return Ok(*mu);
        }
        let mu = match &self.backend {
            Backend::Grid { b_tilde } => solve_grid(b_tilde, self.period, lambda_bar, 0.0, lambda_bar)?.mu,
            Backend::Comb { alpha, slope, .. } => comb::comb_mu(*alpha, self.period, *slope, lambda_bar)?.mu,
        };
        self.cache.write().expect("cache poisoned").insert(key, mu);
        Ok(mu)
    }

    /// Full sample including the eigenfunction on the `N`-cell grid.
    pub fn sample(&self, lambda: f64, theta: f64) -> Result<DispersionSample> {
        let lambda_bar = lambda * theta.cos();
        match &self.backend {
            Backend::Grid { b_tilde } => solve_grid(b_tilde, self.period, lambda, theta, lambda_bar),
            Backend::Comb { alpha, slope, offset } => {
                let root = comb::comb_mu(*alpha, self.period, *slope, lambda_bar)?;
                let psi = comb::comb_psi(&root, *offset, self.grid_n);
                Ok(DispersionSample {
                    lambda,
                    theta,
                    lambda_bar,
                    mu: root.mu,
                    psi,
                    grid_n: self.grid_n,
                    method: Method::CombAnalytic,
                    residual: root.residual.abs(),
                })
            }
        }
    }

    pub fn cached_len(&self) -> usize {
        self.cache.read().expect("cache poisoned").len()
    }
}

/// Element-wise dispersion samples along a `λ` grid at fixed `θ`.
pub fn dispersion_curve(
    m: &PeriodicMedium,
    theta: f64,
    lambda_grid: &[f64],
    n: usize,
) -> Result<Vec<DispersionSample>> {
    let relation = DispersionRelation::new(m, n)?;
    lambda_grid
        .iter()
        .map(|&lambda| relation.sample(lambda, theta))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::{random_medium, Segment};

    #[test]
    fn constant_medium_has_flat_eigenfunction() {
        let m = PeriodicMedium::constant(1.0, 1.0, 1.0).unwrap();
        let s = mu_grid(&m, 0.7, 0.0, 128).unwrap();
        assert!((s.mu + 1.0).abs() < 1e-10, "{}", s.mu);
        assert!(s.psi.iter().all(|p| (p - 1.0).abs() < 1e-10));
    }

    #[test]
    fn perpendicular_direction_drops_drift() {
        let m = random_medium(1.0, 1.0, 1.0, 3, 4).unwrap();
        let a = mu_grid(&m, 3.2, std::f64::consts::FRAC_PI_2, 128).unwrap();
        let b = mu_grid(&m, 0.0, 0.0, 128).unwrap();
        assert!((a.mu - b.mu).abs() < 1e-12);
    }

    #[test]
    fn comb_is_rejected_by_grid_route() {
        let comb = crate::make_dirac_comb(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(mu_grid(&comb, 0.0, 0.0, 64), Err(Error::UnsupportedRepresentation(_))));
        let m = PeriodicMedium::constant(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(mu_grid(&m, 0.0, 0.0, 16), Err(Error::ParameterDomain(_))));
    }

    #[test]
    fn adjoint_shares_eigenvalue() {
        let m = random_medium(1.0, 1.0, 1.0, 11, 3).unwrap();
        for lambda in [0.3, 1.0, 2.5] {
            let a = mu_grid(&m, lambda, 0.2, 256).unwrap();
            let b = adjoint_psi(&m, lambda, 0.2, 256).unwrap();
            assert!((a.mu - b.mu).abs() <= 1e-8);
            assert!(b.psi.iter().all(|p| *p > 0.0));
        }
        let c = PeriodicMedium::constant(2.0, 1.0, 1.0).unwrap();
        let s = adjoint_psi(&c, 1.3, 0.0, 64).unwrap();
        assert!((s.mu + 2.0).abs() < 1e-12);
        assert!(s.psi.iter().all(|p| (p - 1.0).abs() < 1e-10));
    }

    #[test]
    fn two_segment_medium_matches_frozen_reference() {
        // 40-digit Floquet root of the two-segment medium at λ̄ = 0.4
        let m = PeriodicMedium::piecewise_constant(
            vec![Segment { length: 0.5, value: 2.0 }, Segment { length: 0.5, value: 0.0 }],
            1.0,
        )
        .unwrap();
        let s = mu_grid(&m, 0.4, 0.0, 1024).unwrap();
        assert!((s.mu - -1.020_495_586_739_277_4).abs() < 1e-4);
        assert!(s.residual < 1e-9);
    }

    #[test]
    fn relation_caches_by_lambda_bar() {
        let m = random_medium(1.0, 1.0, 1.0, 5, 2).unwrap();
        let rel = DispersionRelation::new(&m, 64).unwrap();
        let a = rel.mu(0.5).unwrap();
        let b = rel.mu(0.5).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(rel.cached_len(), 1);
    }
}
