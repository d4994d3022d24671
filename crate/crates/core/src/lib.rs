//! Minimal pulsating-front speeds and directional spreading speeds for KPP
//! reaction–diffusion equations in two-dimensional stratified periodic media.
//!
//! The coefficient `b(x)` is `L`-periodic with cell mean `α` and may be a
//! measure (the periodic Dirac comb). The crate computes the principal
//! eigenvalue `μ(λ, θ, b)` of `-ψ'' + 2λcosθ ψ' - f'(0) b ψ`, the minimal
//! speeds `c*(θ) = min_λ (λ² - μ)/λ`, the spreading speeds
//! `w(θ) = min_φ c*(φ)/cos(θ - φ)` with their Wulff shape, the fully
//! two-dimensional torus analogue, and a finite-difference simulator used as
//! an end-to-end cross-check.

pub mod comb;
pub mod eigen;
pub mod error;
pub mod media;
pub mod output;
pub mod sim;
pub mod speeds;
pub mod torus2d;

pub use error::{Error, Result};
pub use media::{make_dirac_comb, random_medium, PeriodicMedium, ReactionSpec};
