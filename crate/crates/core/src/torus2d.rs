//! Principal eigenvalue on the `(L₁, L₂)` torus for coefficients `b(x, y)`,
//! the corresponding minimal speeds, and the concentrating-bump family whose
//! speeds grow without bound.
//!
//! The operator `-Δu + 2λcosθ u_x + 2λsinθ u_y - b̃u` is discretized by
//! finite volumes on a tensor grid (possibly graded) with central face
//! interpolation for the drift. Row sums equal `-b̃`, and the matrix is a
//! Z-matrix while `|λcosθ|·max hₓ ≤ 1` and `|λsinθ|·max h_y ≤ 1`.

use std::sync::Mutex;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::principal::{principal_pair_near, LinearSolve, ShiftInvert};
use crate::eigen::Method;
use crate::error::{ensure_positive, Error, Result};
use crate::media::{bump, PeriodicMedium};
use crate::speeds::{minimize_speed, SpeedOptions, SpeedResult, SPEED_TOLERANCE};

/// Smallest number of cells per axis.
pub const MIN_CELLS: usize = 32;

/// Cell widths along each axis of a periodic tensor grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorGrid {
    pub hx: Vec<f64>,
    pub hy: Vec<f64>,
}

fn uniform_axis(length: f64, n: usize) -> Vec<f64> {
    vec![length / n as f64; n]
}

/// Widths on `[0, L)` symmetric about `L/2`: cells of size `fine` over
/// `[L/2 - core, L/2 + core]`, then geometric growth capped at `coarse`.
fn graded_axis(length: f64, core: f64, fine: f64, growth: f64, coarse: f64) -> Vec<f64> {
    let half = 0.5 * length;
    let core_cells = (core / fine).ceil().max(1.0) as usize;
    let mut right = vec![fine; core_cells];
    let mut covered = fine * core_cells as f64;
    let mut h = fine;
    while covered < half {
        h = (h * growth).min(coarse);
        right.push(h);
        covered += h;
    }
    // shrink the graded tail so the half axis ends exactly at L/2
    let tail: f64 = right[core_cells..].iter().sum();
    let target = half - fine * core_cells as f64;
    if tail > 0.0 && target > 0.0 {
        right[core_cells..].iter_mut().for_each(|w| *w *= target / tail);
    }
    let mut axis: Vec<f64> = right.iter().rev().copied().collect();
    axis.extend_from_slice(&right);
    axis
}

impl TensorGrid {
    pub fn uniform(l1: f64, l2: f64, nx: usize, ny: usize) -> Result<Self> {
        ensure_positive("L1", l1)?;
        ensure_positive("L2", l2)?;
        TensorGrid {
            hx: uniform_axis(l1, nx),
            hy: uniform_axis(l2, ny),
        }
        .checked()
    }

    /// Grid refined around the cell centre `(L₁/2, L₂/2)` for a feature of
    /// half-width `core`.
    pub fn graded(l1: f64, l2: f64, core: f64, fine: f64, growth: f64, coarse: f64) -> Result<Self> {
        for (name, v) in [("L1", l1), ("L2", l2), ("core", core), ("fine", fine), ("coarse", coarse)] {
            ensure_positive(name, v)?;
        }
        if !(growth > 1.0) || fine > coarse || 2.0 * core >= l1.min(l2) {
            return Err(Error::domain("graded grid needs growth > 1, fine ≤ coarse and a core inside the cell"));
        }
        TensorGrid {
            hx: graded_axis(l1, core, fine, growth, coarse),
            hy: graded_axis(l2, core, fine, growth, coarse),
        }
        .checked()
    }

    fn checked(self) -> Result<Self> {
        if self.hx.len() < MIN_CELLS || self.hy.len() < MIN_CELLS {
            return Err(Error::domain(format!(
                "torus grid must have at least {MIN_CELLS} cells per axis, got {}x{}",
                self.hx.len(),
                self.hy.len()
            )));
        }
        Ok(self)
    }

    pub fn nx(&self) -> usize {
        self.hx.len()
    }

    pub fn ny(&self) -> usize {
        self.hy.len()
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lengths(&self) -> (f64, f64) {
        (self.hx.iter().sum(), self.hy.iter().sum())
    }

    fn edges(h: &[f64]) -> Vec<f64> {
        let mut e = Vec::with_capacity(h.len() + 1);
        let mut x = 0.0;
        e.push(x);
        for w in h {
            x += w;
            e.push(x);
        }
        e
    }

    /// `(max hₓ, max h_y)`.
    pub fn max_spacing(&self) -> (f64, f64) {
        let m = |h: &[f64]| h.iter().copied().fold(0.0, f64::max);
        (m(&self.hx), m(&self.hy))
    }
}

/// Doubly periodic coefficient given by cell averages on a tensor grid,
/// stored row by row (`index = j·nx + i`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusMedium {
    pub alpha: f64,
    pub slope: f64,
    pub grid: TensorGrid,
    pub values: Vec<f64>,
}

impl TorusMedium {
    /// Cell averages rescaled so the area-weighted mean is exactly `alpha`.
    pub fn new(alpha: f64, slope: f64, grid: TensorGrid, values: Vec<f64>) -> Result<Self> {
        ensure_positive("alpha", alpha)?;
        ensure_positive("slope", slope)?;
        if values.len() != grid.len() {
            return Err(Error::domain("torus values do not match the grid"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::domain("torus values must be finite and nonnegative"));
        }
        let mut m = TorusMedium {
            alpha,
            slope,
            grid,
            values,
        };
        let mean = m.mean();
        if !(mean > 0.0) {
            return Err(Error::domain("torus coefficient vanishes identically"));
        }
        let factor = alpha / mean;
        m.values.iter_mut().for_each(|v| *v *= factor);
        Ok(m)
    }

    pub fn constant(alpha: f64, grid: TensorGrid, slope: f64) -> Result<Self> {
        let n = grid.len();
        TorusMedium::new(alpha, slope, grid, vec![alpha; n])
    }

    /// `b(x, y) = b(x)` for a density medium on a uniform grid.
    pub fn stratified(m: &PeriodicMedium, l2: f64, nx: usize, ny: usize) -> Result<Self> {
        let column = m.sample_on_grid(nx)?;
        let grid = TensorGrid::uniform(m.period(), l2, nx, ny)?;
        let values = (0..ny).flat_map(|_| column.iter().copied()).collect();
        TorusMedium::new(m.mass(), m.slope(), grid, values)
    }

    /// Product bump of mass `αL₁L₂` and side `width`, centred in the cell.
    pub fn bump(alpha: f64, width: f64, grid: TensorGrid, slope: f64) -> Result<Self> {
        ensure_positive("width", width)?;
        let (l1, l2) = grid.lengths();
        if width >= l1.min(l2) {
            return Err(Error::domain("bump width must be smaller than the cell"));
        }
        let profile = |h: &[f64], centre: f64| -> Vec<f64> {
            let e = TensorGrid::edges(h);
            let half = 0.5 * width;
            h.iter()
                .enumerate()
                .map(|(i, w)| (bump::cdf((e[i + 1] - centre) / half) - bump::cdf((e[i] - centre) / half)) / w)
                .collect()
        };
        let px = profile(&grid.hx, 0.5 * l1);
        let py = profile(&grid.hy, 0.5 * l2);
        let mass = alpha * l1 * l2;
        let values = py
            .iter()
            .flat_map(|y| px.iter().map(move |x| mass * x * y))
            .collect();
        TorusMedium::new(alpha, slope, grid, values)
    }

    /// Area-weighted cell mean.
    pub fn mean(&self) -> f64 {
        let (l1, l2) = self.grid.lengths();
        let nx = self.grid.nx();
        let total: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| v * self.grid.hx[k % nx] * self.grid.hy[k / nx])
            .sum();
        total / (l1 * l2)
    }

    pub fn effective_mass(&self) -> f64 {
        self.alpha * self.slope
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Finite-volume operator with its sparsity pattern fixed for all shifts.
struct TorusOperator {
    matrix: SparseColMat<usize, f64>,
    diag_slots: Vec<usize>,
    symbolic: SymbolicLu<usize>,
    rows: Vec<[(usize, f64); 5]>,
    min_row: f64,
    max_row: f64,
}

impl TorusOperator {
    fn new(m: &TorusMedium, lambda_x: f64, lambda_y: f64) -> Result<Self> {
        let g = &m.grid;
        let (mhx, mhy) = g.max_spacing();
        if lambda_x.abs() * mhx > 1.0 || lambda_y.abs() * mhy > 1.0 {
            return Err(Error::domain(format!(
                "drift ({lambda_x}, {lambda_y}) too strong for spacing ({mhx}, {mhy}); refine the torus grid"
            )));
        }
        let (nx, ny) = (g.nx(), g.ny());
        // coefficients of (left, right, centre) for one axis
        let axis = |h: &[f64], i: usize, lam: f64| -> (f64, f64, f64) {
            let n = h.len();
            let (hm, hc, hp) = (h[(i + n - 1) % n], h[i], h[(i + 1) % n]);
            let (dm, dp) = (0.5 * (hm + hc), 0.5 * (hc + hp));
            let left = -1.0 / (hc * dm) - lam / dm;
            let right = -1.0 / (hc * dp) + lam / dp;
            let centre = 1.0 / (hc * dm) + 1.0 / (hc * dp) + 2.0 * lam / hc * (hp / (hc + hp) - hm / (hm + hc));
            (left, right, centre)
        };
        let mut rows = Vec::with_capacity(nx * ny);
        let mut triplets = Vec::with_capacity(5 * nx * ny);
        let (mut min_row, mut max_row) = (f64::INFINITY, f64::NEG_INFINITY);
        for j in 0..ny {
            let (ym, yp, yc) = axis(&g.hy, j, lambda_y);
            for i in 0..nx {
                let (xm, xp, xc) = axis(&g.hx, i, lambda_x);
                let k = j * nx + i;
                let b = m.slope * m.values[k];
                let row = [
                    (k, xc + yc - b),
                    (j * nx + (i + nx - 1) % nx, xm),
                    (j * nx + (i + 1) % nx, xp),
                    (((j + ny - 1) % ny) * nx + i, ym),
                    (((j + 1) % ny) * nx + i, yp),
                ];
                min_row = min_row.min(-b);
                max_row = max_row.max(-b);
                for (c, v) in row {
                    triplets.push(Triplet::new(k, c, v));
                }
                rows.push(row);
            }
        }
        let matrix = SparseColMat::<usize, f64>::try_new_from_triplets(nx * ny, nx * ny, &triplets)
            .map_err(|e| Error::numerical("torus assembly", format!("{e:?}"), 0.0))?;
        let mut diag_slots = vec![0; nx * ny];
        let (col_ptr, row_idx) = (matrix.col_ptr(), matrix.row_idx());
        for c in 0..nx * ny {
            for slot in col_ptr[c]..col_ptr[c + 1] {
                if row_idx[slot] == c {
                    diag_slots[c] = slot;
                }
            }
        }
        let symbolic = SymbolicLu::try_new(matrix.symbolic())
            .map_err(|e| Error::numerical("torus symbolic factorization", format!("{e:?}"), 0.0))?;
        Ok(TorusOperator {
            matrix,
            diag_slots,
            symbolic,
            rows,
            min_row,
            max_row,
        })
    }
}

struct TorusFactor(Lu<usize, f64>);

impl LinearSolve for TorusFactor {
    fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        let mut x = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        self.0.solve_in_place(x.as_mut());
        for (i, o) in out.iter_mut().enumerate() {
            *o = x[(i, 0)];
        }
    }
}

impl ShiftInvert for TorusOperator {
    type Factor = TorusFactor;

    fn dim(&self) -> usize {
        self.rows.len()
    }

    fn lower_bound(&self) -> f64 {
        self.min_row
    }

    fn upper_bound(&self) -> f64 {
        self.max_row
    }

    fn factor(&self, shift: f64) -> Result<TorusFactor> {
        let mut shifted = self.matrix.clone();
        let vals = shifted.val_mut();
        for &slot in &self.diag_slots {
            vals[slot] -= shift;
        }
        let lu = Lu::try_new_with_symbolic(self.symbolic.clone(), shifted.as_ref())
            .map_err(|e| Error::numerical("torus factorization", format!("{e:?}"), 0.0))?;
        Ok(TorusFactor(lu))
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().map(|(c, v)| v * x[*c]).sum();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusEigen {
    pub mu: f64,
    /// Principal eigenvector (cell values, row by row), unit maximum.
    pub psi: Vec<f64>,
    pub residual: f64,
}

/// Principal eigenpair, optionally seeded with an estimate of `μ`.
pub fn torus_eigen(m: &TorusMedium, lambda: f64, theta: f64, guess: Option<f64>) -> Result<TorusEigen> {
    let op = TorusOperator::new(m, lambda * theta.cos(), lambda * theta.sin())?;
    let pair = principal_pair_near(&op, "torus eigensolve", guess)?;
    Ok(TorusEigen {
        mu: pair.value,
        psi: pair.vector,
        residual: pair.residual / pair.value.abs().max(1.0),
    })
}

pub fn torus_mu(m: &TorusMedium, lambda: f64, theta: f64) -> Result<f64> {
    Ok(torus_eigen(m, lambda, theta, None)?.mu)
}

/// `c*(θ)` over the torus eigenvalue. The bracket starts like the
/// one-dimensional one but is bounded only by `opts.max_doublings` and the
/// largest `λ` the grid can carry.
pub fn torus_c_star(m: &TorusMedium, theta: f64, opts: &SpeedOptions) -> Result<SpeedResult> {
    let a = m.effective_mass();
    let (l1, l2) = m.grid.lengths();
    let l = l1.max(l2);
    let last = Mutex::new(None::<f64>);
    let (mhx, mhy) = m.grid.max_spacing();
    let lambda_cap = 1.0 / (theta.cos().abs() * mhx).max(theta.sin().abs() * mhy).max(1e-300);
    let min = minimize_speed(
        |lambda| {
            if lambda > lambda_cap {
                return Err(Error::numerical(
                    "torus speed",
                    format!("bracket reached λ = {lambda} beyond the grid limit {lambda_cap}"),
                    f64::NAN,
                ));
            }
            let guess = *last.lock().expect("poisoned");
            let mu = torus_eigen(m, lambda, theta, guess)?.mu;
            *last.lock().expect("poisoned") = Some(mu);
            Ok(mu)
        },
        (a + a * a * l * l).sqrt() + 1.0,
        opts,
    )?;
    Ok(SpeedResult {
        theta,
        c_star: min.value,
        lambda_star: min.lambda,
        evaluations: min.evaluations,
        method: Method::Grid,
        tolerance: SPEED_TOLERANCE * min.value,
    })
}

/// Mesh and bump-width choices for the concentration family `b_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpFamily {
    /// Bump side at `n = 1`; `b_n` has side `width_1 / n`.
    pub width_1: f64,
    /// Fine cells per bump side.
    pub cells_per_width: f64,
    pub growth: f64,
    /// Coarse spacing as a fraction of `min(L₁, L₂)`.
    pub coarse_fraction: f64,
}

impl Default for BumpFamily {
    fn default() -> Self {
        BumpFamily {
            width_1: 0.02,
            cells_per_width: 10.0,
            growth: 1.2,
            coarse_fraction: 1.0 / 32.0,
        }
    }
}

impl BumpFamily {
    pub fn medium(&self, alpha: f64, l1: f64, l2: f64, n: usize) -> Result<TorusMedium> {
        let width = self.width_1 / n as f64;
        let fine = width / self.cells_per_width;
        let coarse = self.coarse_fraction * l1.min(l2);
        let grid = TensorGrid::graded(l1, l2, 0.5 * width, fine, self.growth, coarse)?;
        TorusMedium::bump(alpha, width, grid, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnboundednessRow {
    pub n: usize,
    pub width: f64,
    pub cells: usize,
    pub mu: f64,
    pub c_star: f64,
    pub lambda_star: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnboundednessReport {
    pub alpha: f64,
    pub rows: Vec<UnboundednessRow>,
    pub mu_decreasing: bool,
    pub c_star_increasing: bool,
    /// Some `μ(b_n) < -10 α̃`.
    pub divergence_witness: bool,
}

/// `μ(0, 0, b_n)` and `c*(0; b_n)` along `n_list`; fails when either
/// sequence is not strictly monotone.
pub fn unboundedness_demo(
    alpha: f64,
    l1: f64,
    l2: f64,
    n_list: &[usize],
    family: &BumpFamily,
    opts: &SpeedOptions,
) -> Result<UnboundednessReport> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) || n_list[0] == 0 {
        return Err(Error::domain("n_list must be a nonempty increasing list of positive integers"));
    }
    let rows = n_list
        .par_iter()
        .map(|&n| {
            let m = family.medium(alpha, l1, l2, n)?;
            let mu = torus_mu(&m, 0.0, 0.0)?;
            let c = torus_c_star(&m, 0.0, opts)?;
            Ok(UnboundednessRow {
                n,
                width: family.width_1 / n as f64,
                cells: m.grid.len(),
                mu,
                c_star: c.c_star,
                lambda_star: c.lambda_star,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = UnboundednessReport {
        alpha,
        mu_decreasing: rows.windows(2).all(|w| w[1].mu < w[0].mu),
        c_star_increasing: rows.windows(2).all(|w| w[1].c_star > w[0].c_star),
        divergence_witness: rows.iter().any(|r| r.mu < -10.0 * alpha),
        rows,
    };
    if !report.mu_decreasing || !report.c_star_increasing {
        return Err(Error::PropertyFailure(format!(
            "bump family is not monotone: {:?}",
            report.rows.iter().map(|r| (r.n, r.mu, r.c_star)).collect::<Vec<_>>()
        )));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_torus_medium() {
        let g = TensorGrid::uniform(1.0, 2.0, 32, 40).unwrap();
        let m = TorusMedium::constant(1.5, g, 1.0).unwrap();
        let e = torus_eigen(&m, 0.8, 0.6, None).unwrap();
        assert!((e.mu + 1.5).abs() < 1e-9);
        assert!(e.psi.iter().all(|p| (p - 1.0).abs() < 1e-8));
    }

    #[test]
    fn graded_axis_is_symmetric_and_exact() {
        let g = TensorGrid::graded(1.0, 1.0, 0.01, 0.001, 1.2, 0.05).unwrap();
        let (l1, _) = g.lengths();
        assert!((l1 - 1.0).abs() < 1e-12);
        let n = g.nx();
        for i in 0..n / 2 {
            assert_eq!(g.hx[i], g.hx[n - 1 - i]);
        }
        assert!(g.max_spacing().0 <= 0.05 + 1e-15);
    }

    #[test]
    fn bump_mass_is_exact() {
        let g = TensorGrid::graded(1.0, 1.0, 0.05, 0.005, 1.2, 0.05).unwrap();
        let m = TorusMedium::bump(1.0, 0.1, g, 1.0).unwrap();
        assert!((m.mean() - 1.0).abs() < 1e-12);
        assert!(m.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn coarse_grid_rejects_strong_drift() {
        let g = TensorGrid::uniform(1.0, 1.0, 32, 32).unwrap();
        let m = TorusMedium::constant(1.0, g, 1.0).unwrap();
        assert!(matches!(torus_mu(&m, 40.0, 0.0), Err(Error::ParameterDomain(_))));
    }
}
