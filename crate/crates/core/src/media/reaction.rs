use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

/// Monostable nonlinearity driving the front.
///
/// `F1` is the logistic term `b̃(x) u (1 - u)`, with the slope `f'(0)` already
/// folded into `b̃`. `F2` is `u (b̃(x) - κ u)`, i.e. `f(u) = u` and
/// `g(u) = -u g₁(u)` with `g₁(u) = κ u`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ReactionSpec {
    F1,
    F2 { kappa: f64 },
}

impl ReactionSpec {
    pub fn logistic() -> Self {
        ReactionSpec::F1
    }

    pub fn saturating(kappa: f64) -> Result<Self> {
        let spec = ReactionSpec::F2 { kappa };
        spec.validate()?;
        Ok(spec)
    }

    /// Reaction term at density `u` where the scaled coefficient is `b_tilde`.
    #[inline]
    pub fn rate(&self, b_tilde: f64, u: f64) -> f64 {
        match *self {
            ReactionSpec::F1 => b_tilde * u * (1.0 - u),
            ReactionSpec::F2 { kappa } => u * (b_tilde - kappa * u),
        }
    }

    /// Numerical sanity checks of the structural conditions on `f` and `g₁`.
    pub fn validate(&self) -> Result<()> {
        match *self {
            ReactionSpec::F1 => {
                let f = |u: f64| u * (1.0 - u);
                let slope = (f(1e-7) - f(0.0)) / 1e-7;
                if f(0.0) != 0.0 || f(1.0) != 0.0 || slope <= 0.0 {
                    return Err(Error::domain("F1 requires f(0)=f(1)=0 and f'(0)>0"));
                }
                Ok(())
            }
            ReactionSpec::F2 { kappa } => {
                ensure_positive("kappa", kappa)?;
                let g1 = |u: f64| kappa * u;
                if g1(0.0) != 0.0 {
                    return Err(Error::domain("F2 requires g1(0)=0"));
                }
                let increasing = (0..100).all(|i| g1((i + 1) as f64 * 0.1) > g1(i as f64 * 0.1));
                if !increasing {
                    return Err(Error::domain("F2 requires g1 strictly increasing"));
                }
                Ok(())
            }
        }
    }
}
