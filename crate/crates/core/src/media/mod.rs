//! Periodic coefficients `b(x)` of mean `α` and period `L`, including the
//! single-atom Dirac comb and its mollifications.
//!
//! Media are immutable once built; every constructor enforces
//! `(1/L)∫_{[0,L)} b = α` (sampled media are rescaled to hit it exactly).

pub mod bump;
mod reaction;

use std::hash::{DefaultHasher, Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

pub use reaction::ReactionSpec;

const MASS_TOLERANCE: f64 = 1e-12;
const RANDOM_SAMPLES: usize = 1024;
/// Smallest cell count accepted by the samplers.
pub const MIN_CELLS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub length: f64,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpProfile {
    /// `exp(-1/(1-t²))` normalized to unit mass.
    #[default]
    Standard,
}

/// Representation of one period of the coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MediumKind {
    /// Values on the uniform cells `[i L / n, (i + 1) L / n)`.
    Sampled { values: Vec<f64> },
    /// Consecutive segments starting at `x = 0`.
    PiecewiseConstant { segments: Vec<Segment> },
    /// One atom of weight `αL` per period at `offset`.
    DiracComb { offset: f64 },
    /// The atom spread into a bump supported on `offset ± width/2`.
    MollifiedComb {
        offset: f64,
        width: f64,
        #[serde(default)]
        profile: BumpProfile,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MediumDocument", into = "MediumDocument")]
pub struct PeriodicMedium {
    period: f64,
    mass: f64,
    slope: f64,
    kind: MediumKind,
}

/// On-disk JSON layout: `{"kind": ..., "L": ..., "alpha": ..., "slope": ..., <payload>}`.
#[derive(Serialize, Deserialize)]
struct MediumDocument {
    #[serde(rename = "L")]
    period: f64,
    alpha: f64,
    #[serde(default = "unit_slope")]
    slope: f64,
    #[serde(flatten)]
    kind: MediumKind,
}

fn unit_slope() -> f64 {
    1.0
}

impl TryFrom<MediumDocument> for PeriodicMedium {
    type Error = Error;

    fn try_from(doc: MediumDocument) -> Result<Self> {
        match doc.kind {
            MediumKind::Sampled { values } => {
                PeriodicMedium::sampled(values, doc.alpha, doc.period, doc.slope)
            }
            kind => {
                let medium = PeriodicMedium {
                    period: doc.period,
                    mass: doc.alpha,
                    slope: doc.slope,
                    kind,
                };
                medium.validate()?;
                Ok(medium)
            }
        }
    }
}

impl From<PeriodicMedium> for MediumDocument {
    fn from(m: PeriodicMedium) -> Self {
        MediumDocument {
            period: m.period,
            alpha: m.mass,
            slope: m.slope,
            kind: m.kind,
        }
    }
}

/// Single-atom comb with weight `αL` at `L/2`.
pub fn make_dirac_comb(alpha: f64, period: f64, slope: f64) -> Result<PeriodicMedium> {
    PeriodicMedium::dirac_comb_at(alpha, period, slope, 0.5 * period)
}

/// Nonnegative random trigonometric polynomial with `modes` harmonics and
/// mean exactly `alpha`. Deterministic in `seed`.
pub fn random_medium(
    alpha: f64,
    period: f64,
    slope: f64,
    seed: u64,
    modes: usize,
) -> Result<PeriodicMedium> {
    if modes == 0 {
        return Err(Error::domain("smoothness (number of modes) must be positive"));
    }
    ensure_positive("alpha", alpha)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<(f64, f64)> = (1..=modes)
        .map(|k| {
            let k = k as f64;
            (rng.gen_range(-1.0..1.0) / k, rng.gen_range(-1.0..1.0) / k)
        })
        .collect();
    let depth: f64 = rng.gen_range(0.2..0.95);
    let raw: Vec<f64> = (0..RANDOM_SAMPLES)
        .map(|i| {
            let x = i as f64 / RANDOM_SAMPLES as f64;
            coeffs
                .iter()
                .enumerate()
                .map(|(k, (a, b))| {
                    let arg = std::f64::consts::TAU * (k + 1) as f64 * x;
                    a * arg.cos() + b * arg.sin()
                })
                .sum()
        })
        .collect();
    let peak = raw.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { depth / peak } else { 0.0 };
    let values = raw.iter().map(|r| alpha * (1.0 + scale * r)).collect();
    PeriodicMedium::sampled(values, alpha, period, slope)
}

impl PeriodicMedium {
    /// `b ≡ alpha`, stored as a single constant segment.
    pub fn constant(alpha: f64, period: f64, slope: f64) -> Result<Self> {
        let medium = PeriodicMedium {
            period,
            mass: alpha,
            slope,
            kind: MediumKind::PiecewiseConstant {
                segments: vec![Segment {
                    length: period,
                    value: alpha,
                }],
            },
        };
        medium.validate()?;
        Ok(medium)
    }

    /// Grid samples, rescaled multiplicatively so that their mean is `alpha`.
    /// Samples whose mean already matches are stored untouched.
    pub fn sampled(values: Vec<f64>, alpha: f64, period: f64, slope: f64) -> Result<Self> {
        ensure_positive("alpha", alpha)?;
        if values.len() < 2 {
            return Err(Error::domain("sampled medium needs at least two values"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::domain("sampled values must be finite and nonnegative"));
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        if mean <= 0.0 {
            return Err(Error::domain("sampled values must not vanish identically"));
        }
        let factor = if (mean - alpha).abs() <= MASS_TOLERANCE * alpha { 1.0 } else { alpha / mean };
        let medium = PeriodicMedium {
            period,
            mass: alpha,
            slope,
            kind: MediumKind::Sampled {
                values: values.into_iter().map(|v| v * factor).collect(),
            },
        };
        medium.validate()?;
        Ok(medium)
    }

    /// Piecewise-constant medium; the period is the total segment length and
    /// `α` the length-weighted mean value.
    pub fn piecewise_constant(segments: Vec<Segment>, slope: f64) -> Result<Self> {
        let period: f64 = segments.iter().map(|s| s.length).sum();
        let integral: f64 = segments.iter().map(|s| s.length * s.value).sum();
        let medium = PeriodicMedium {
            period,
            mass: integral / period,
            slope,
            kind: MediumKind::PiecewiseConstant { segments },
        };
        medium.validate()?;
        Ok(medium)
    }

    pub fn dirac_comb_at(alpha: f64, period: f64, slope: f64, offset: f64) -> Result<Self> {
        let medium = PeriodicMedium {
            period,
            mass: alpha,
            slope,
            kind: MediumKind::DiracComb { offset },
        };
        medium.validate()?;
        Ok(medium)
    }

    /// Replace the atom by a bump of width `eps` carrying the same mass.
    pub fn mollify(&self, eps: f64) -> Result<Self> {
        let MediumKind::DiracComb { offset } = self.kind else {
            return Err(Error::UnsupportedRepresentation(
                "only Dirac combs can be mollified".into(),
            ));
        };
        if !(eps > 0.0 && eps < self.period) {
            return Err(Error::domain(format!(
                "mollification width must lie in (0, L={}), got {eps}",
                self.period
            )));
        }
        Ok(PeriodicMedium {
            kind: MediumKind::MollifiedComb {
                offset,
                width: eps,
                profile: BumpProfile::Standard,
            },
            ..self.clone()
        })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Cell average `α` of `b`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `f'(0)`.
    pub fn slope(&self) -> f64 {
        self.slope
    }

    /// Effective mass `α̃ = f'(0) α`.
    pub fn effective_mass(&self) -> f64 {
        self.slope * self.mass
    }

    pub fn kind(&self) -> &MediumKind {
        &self.kind
    }

    /// Atom position and weight `αL` if this is a Dirac comb.
    pub fn atom(&self) -> Option<(f64, f64)> {
        match self.kind {
            MediumKind::DiracComb { offset } => Some((offset, self.mass * self.period)),
            _ => None,
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self.kind, MediumKind::DiracComb { .. })
    }

    /// True when `b` is constant (up to rounding) on the cell.
    pub fn is_constant(&self) -> bool {
        let tol = 1e-12 * self.mass;
        match &self.kind {
            MediumKind::Sampled { values } => values.iter().all(|v| (v - self.mass).abs() <= tol),
            MediumKind::PiecewiseConstant { segments } => segments
                .iter()
                .all(|s| (s.value - self.mass).abs() <= tol),
            _ => false,
        }
    }

    fn validate(&self) -> Result<()> {
        ensure_positive("L", self.period)?;
        ensure_positive("alpha", self.mass)?;
        ensure_positive("slope", self.slope)?;
        match &self.kind {
            MediumKind::Sampled { values } => {
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::domain("sampled values must be finite and nonnegative"));
                }
            }
            MediumKind::PiecewiseConstant { segments } => {
                if segments.is_empty() {
                    return Err(Error::domain("piecewise-constant medium needs a segment"));
                }
                for s in segments {
                    ensure_positive("segment length", s.length)?;
                    if !s.value.is_finite() || s.value < 0.0 {
                        return Err(Error::domain("segment values must be nonnegative"));
                    }
                }
                let total: f64 = segments.iter().map(|s| s.length).sum();
                if (total - self.period).abs() > 1e-12 * self.period {
                    return Err(Error::domain(format!(
                        "segment lengths sum to {total}, expected L = {}",
                        self.period
                    )));
                }
            }
            MediumKind::DiracComb { offset } => self.check_offset(*offset)?,
            MediumKind::MollifiedComb { offset, width, .. } => {
                self.check_offset(*offset)?;
                if !(*width > 0.0 && *width < self.period) {
                    return Err(Error::domain("mollification width must lie in (0, L)"));
                }
            }
        }
        let mean = self.cell_total() / self.period;
        if (mean - self.mass).abs() > MASS_TOLERANCE * self.mass {
            return Err(Error::domain(format!(
                "cell mean {mean} does not match alpha = {}",
                self.mass
            )));
        }
        Ok(())
    }

    fn check_offset(&self, offset: f64) -> Result<()> {
        if offset.is_finite() && (0.0..self.period).contains(&offset) {
            Ok(())
        } else {
            Err(Error::domain(format!("atom offset {offset} outside [0, L)")))
        }
    }

    /// `∫_a^b b(x) dx` for the periodic extension (atoms counted on `[a, b)`).
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.primitive(b) - self.primitive(a)
    }

    fn primitive(&self, x: f64) -> f64 {
        let periods = (x / self.period).floor();
        let mut local = x - periods * self.period;
        if local >= self.period {
            local = 0.0;
        }
        periods * self.cell_total() + self.cell_primitive(local)
    }

    /// `∫_0^L b` computed from the payload alone.
    fn cell_total(&self) -> f64 {
        match &self.kind {
            MediumKind::Sampled { values } => values.iter().sum::<f64>() * self.period / values.len() as f64,
            MediumKind::PiecewiseConstant { segments } => segments.iter().map(|s| s.length * s.value).sum(),
            MediumKind::DiracComb { .. } | MediumKind::MollifiedComb { .. } => self.mass * self.period,
        }
    }

    /// `∫_0^y b` for `y ∈ [0, L)`.
    fn cell_primitive(&self, y: f64) -> f64 {
        match &self.kind {
            MediumKind::Sampled { values } => {
                let n = values.len();
                let h = self.period / n as f64;
                let j = ((y / h).floor() as usize).min(n - 1);
                values[..j].iter().sum::<f64>() * h + values[j] * (y - j as f64 * h)
            }
            MediumKind::PiecewiseConstant { segments } => {
                let mut start = 0.0;
                let mut acc = 0.0;
                for s in segments {
                    if y <= start + s.length {
                        return acc + s.value * (y - start).max(0.0);
                    }
                    acc += s.value * s.length;
                    start += s.length;
                }
                acc
            }
            MediumKind::DiracComb { offset } => {
                if *offset < y {
                    self.mass * self.period
                } else {
                    0.0
                }
            }
            MediumKind::MollifiedComb { offset, width, .. } => {
                let half = 0.5 * width;
                let weight = self.mass * self.period;
                (-1..=1)
                    .map(|k| {
                        let centre = offset + k as f64 * self.period;
                        bump::cdf((y - centre) / half) - bump::cdf((0.0 - centre) / half)
                    })
                    .sum::<f64>()
                    * weight
            }
        }
    }

    /// Raw averages over the cells `[origin + i h, origin + (i + 1) h)`, `h = L/n`.
    pub fn sample_cells(&self, origin: f64, n: usize) -> Result<Vec<f64>> {
        if self.is_atomic() {
            return Err(Error::UnsupportedRepresentation(
                "Dirac comb atoms cannot be sampled pointwise; mollify the medium or use the comb module"
                    .into(),
            ));
        }
        if n < MIN_CELLS {
            return Err(Error::domain(format!("grid size must be at least {MIN_CELLS}, got {n}")));
        }
        let h = self.period / n as f64;
        if let MediumKind::Sampled { values } = &self.kind {
            if origin == 0.0 && values.len() % n == 0 {
                let r = values.len() / n;
                return Ok(values.chunks(r).map(|c| c.iter().sum::<f64>() / r as f64).collect());
            }
        }
        Ok((0..n)
            .map(|i| {
                let left = origin + i as f64 * h;
                (self.integral(left, left + h) / h).max(0.0)
            })
            .collect())
    }

    /// Averages over the `n` uniform cells of `[0, L)`, rescaled so the
    /// discrete mean is exactly `α`. Grid solvers place unknown `i` at the
    /// cell centre `(i + 1/2) L / n`.
    pub fn sample_on_grid(&self, n: usize) -> Result<Vec<f64>> {
        let mut cells = self.sample_cells(0.0, n)?;
        let mean = cells.iter().sum::<f64>() / n as f64;
        let factor = self.mass / mean;
        cells.iter_mut().for_each(|v| *v *= factor);
        Ok(cells)
    }

    /// Stable hash of the full medium description, used as a cache key.
    pub fn hash_key(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.period.to_bits().hash(&mut h);
        self.mass.to_bits().hash(&mut h);
        self.slope.to_bits().hash(&mut h);
        match &self.kind {
            MediumKind::Sampled { values } => {
                0u8.hash(&mut h);
                values.iter().for_each(|v| v.to_bits().hash(&mut h));
            }
            MediumKind::PiecewiseConstant { segments } => {
                1u8.hash(&mut h);
                for s in segments {
                    s.length.to_bits().hash(&mut h);
                    s.value.to_bits().hash(&mut h);
                }
            }
            MediumKind::DiracComb { offset } => {
                2u8.hash(&mut h);
                offset.to_bits().hash(&mut h);
            }
            MediumKind::MollifiedComb { offset, width, .. } => {
                3u8.hash(&mut h);
                offset.to_bits().hash(&mut h);
                width.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
