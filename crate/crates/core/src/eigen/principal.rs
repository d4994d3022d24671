//! Principal eigenpair of an irreducible Z-matrix by shift-and-invert power
//! iteration.
//!
//! For a positive iterate `w = (A - sI)⁻¹ v` with `s` below the principal
//! eigenvalue, the Collatz–Wielandt quotients `s + v_i / w_i` bracket the
//! principal eigenvalue from both sides. The lower end of that bracket is
//! used to pull the shift towards the eigenvalue while keeping `A - sI` a
//! nonsingular M-matrix, so every solve stays positivity preserving.

use crate::error::{Error, Result};

pub(crate) const MAX_ITERATIONS: usize = 10_000;
const RELATIVE_TOLERANCE: f64 = 1e-12;
const STAGNATION_GAP: f64 = 1e-6;
/// Width (relative) below which the shift bisection hands over to the
/// Collatz–Wielandt iteration.
const LOCATE_WIDTH: f64 = 0.05;
const MAX_LOCATE_STEPS: usize = 200;

pub(crate) trait LinearSolve {
    fn solve(&self, rhs: &[f64], out: &mut [f64]);
}

/// A Z-matrix operator that can be factored at a shift below its spectrum.
pub(crate) trait ShiftInvert {
    type Factor: LinearSolve;

    fn dim(&self) -> usize;

    /// Minimal row sum, a lower bound for the principal eigenvalue.
    fn lower_bound(&self) -> f64;

    /// Maximal row sum, an upper bound for the principal eigenvalue.
    fn upper_bound(&self) -> f64;

    fn factor(&self, shift: f64) -> Result<Self::Factor>;

    fn apply(&self, x: &[f64], out: &mut [f64]);
}

#[derive(Clone, Debug)]
pub(crate) struct PrincipalPair {
    pub value: f64,
    /// Positive, normalized to unit maximum.
    pub vector: Vec<f64>,
    /// `‖Aψ - μψ‖∞ / ‖ψ‖∞`.
    pub residual: f64,
}

/// Solve `(A - sI) w = v`; `Some((factor, min v/w, max v/w))` when `w > 0`.
fn positive_step<O: ShiftInvert>(
    op: &O,
    shift: f64,
    v: &[f64],
    w: &mut [f64],
) -> Option<(O::Factor, f64, f64)> {
    let factor = op.factor(shift).ok()?;
    factor.solve(v, w);
    if w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return None;
    }
    let (mut rmin, mut rmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for (vi, wi) in v.iter().zip(w.iter()) {
        let r = vi / wi;
        rmin = rmin.min(r);
        rmax = rmax.max(r);
    }
    Some((factor, rmin, rmax))
}

fn normalize_into(w: &[f64], v: &mut [f64]) {
    let top = w.iter().fold(0.0_f64, |m, x| m.max(*x));
    for (vi, wi) in v.iter_mut().zip(w) {
        *vi = wi / top;
    }
}

/// Principal eigenpair, optionally starting from an estimate of the value.
///
/// A positive solution of `(A - sI) w = v` with `v > 0` certifies that
/// `A - sI` is a nonsingular M-matrix, i.e. `s` lies below the principal
/// eigenvalue; a failed solve certifies the opposite. This first bisects the
/// shift between the row-sum bounds, then refines with Collatz–Wielandt
/// brackets from a shift kept just below the eigenvalue.
pub(crate) fn principal_pair_near<O: ShiftInvert>(
    op: &O,
    context: &'static str,
    guess: Option<f64>,
) -> Result<PrincipalPair> {
    let n = op.dim();
    let mut v = vec![1.0; n];
    let mut w = vec![0.0; n];
    let lb = op.lower_bound();
    let ub = op.upper_bound();
    let pad = 1e-9 * lb.abs().max(ub.abs()).max(1.0);
    let mut lo = lb - pad;
    let mut hi = ub + pad;
    let probe = |s: f64, v: &mut Vec<f64>, w: &mut Vec<f64>, lo: &mut f64, hi: &mut f64| {
        if !(s > *lo && s < *hi) {
            return;
        }
        match positive_step(op, s, v, w) {
            Some((_, rmin, rmax)) => {
                *lo = (s + rmin).max(s);
                *hi = hi.min(s + rmax);
                normalize_into(w, v);
            }
            None => *hi = s,
        }
    };
    if let Some(g) = guess.filter(|g| g.is_finite()) {
        let d = 0.02 * g.abs().max(1.0);
        probe(g - d, &mut v, &mut w, &mut lo, &mut hi);
        probe(g + d, &mut v, &mut w, &mut lo, &mut hi);
    }
    let mut steps = 0;
    while hi - lo > LOCATE_WIDTH * lo.abs().min(hi.abs()).max(1.0) {
        steps += 1;
        if steps > MAX_LOCATE_STEPS {
            return Err(Error::numerical(context, "shift bisection did not close", hi - lo));
        }
        let s = if hi < 0.0 && lo / hi > 4.0 {
            -(lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        probe(s, &mut v, &mut w, &mut lo, &mut hi);
    }

    let scale0 = lo.abs().max(1.0);
    let mut shift = lo - (hi - lo).max(1e-3 * scale0);
    let mut factor = op.factor(shift)?;
    let mut prev_mid = f64::NAN;
    let mut backoffs = 0;

    for _ in 1..=MAX_ITERATIONS {
        factor.solve(&v, &mut w);
        if w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            // rounding broke positivity: move the shift further down and restart
            backoffs += 1;
            if backoffs > 8 {
                return Err(Error::numerical(context, "iterate lost positivity", hi - lo));
            }
            shift -= (10.0 * (hi - lo)).max(1e-6 * shift.abs().max(1.0)) * 10f64.powi(backoffs);
            factor = op.factor(shift)?;
            v.iter_mut().for_each(|x| *x = 1.0);
            continue;
        }
        let (mut rmin, mut rmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for (vi, wi) in v.iter().zip(&w) {
            let r = vi / wi;
            rmin = rmin.min(r);
            rmax = rmax.max(r);
        }
        let (step_lo, step_hi) = (shift + rmin, shift + rmax);
        lo = lo.max(step_lo);
        hi = hi.min(step_hi);
        if hi < lo {
            // bounds crossed by rounding; the truth sits between them
            std::mem::swap(&mut lo, &mut hi);
        }
        normalize_into(&w, &mut v);

        let mid = 0.5 * (lo + hi);
        let scale = mid.abs().max(1.0);
        let gap = hi - lo;
        let change = (mid - prev_mid).abs();
        prev_mid = mid;
        if gap <= RELATIVE_TOLERANCE * scale
            || (change <= RELATIVE_TOLERANCE * scale && gap <= STAGNATION_GAP * scale)
        {
            let residual = residual(op, &v, mid);
            return Ok(PrincipalPair {
                value: mid,
                vector: v,
                residual,
            });
        }

        // Pull the shift up once it is far from the bracket.
        let distance = step_lo - shift;
        if distance > 4.0 * gap {
            let delta = (2.0 * gap).max(1e-9 * scale);
            let candidate = lo - delta;
            if candidate > shift {
                shift = candidate;
                factor = op.factor(shift)?;
            }
        }
    }
    Err(Error::numerical(
        context,
        format!("no convergence after {MAX_ITERATIONS} iterations"),
        hi - lo,
    ))
}

pub(crate) fn principal_pair<O: ShiftInvert>(op: &O, context: &'static str) -> Result<PrincipalPair> {
    principal_pair_near(op, context, None)
}

fn residual<O: ShiftInvert>(op: &O, psi: &[f64], mu: f64) -> f64 {
    let mut out = vec![0.0; psi.len()];
    op.apply(psi, &mut out);
    let norm = psi.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    out.iter()
        .zip(psi)
        .fold(0.0_f64, |m, (a, p)| m.max((a - mu * p).abs()))
        / norm
}

/// Cyclic tridiagonal matrix with constant off-diagonals:
/// row `i` is `lower·x[i-1] + diag[i]·x[i] + upper·x[i+1]` (indices mod n).
#[derive(Clone, Debug)]
pub(crate) struct CyclicTridiagonal {
    pub lower: f64,
    pub upper: f64,
    pub diag: Vec<f64>,
}

impl CyclicTridiagonal {
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        for i in 0..n {
            let left = x[(i + n - 1) % n];
            let right = x[(i + 1) % n];
            out[i] = self.lower * left + self.diag[i] * x[i] + self.upper * right;
        }
    }

    /// Bordered LU of `self - shift·I` without pivoting; valid while the
    /// shifted matrix is a nonsingular M-matrix.
    pub fn factor(&self, shift: f64) -> Result<CyclicFactor> {
        let n = self.diag.len();
        if n < 3 {
            return Err(Error::domain("cyclic system needs at least three unknowns"));
        }
        let m = n - 1;
        let d: Vec<f64> = self.diag.iter().map(|x| x - shift).collect();
        // Thomas factors of the leading (n-1)x(n-1) block
        let mut pivot = vec![0.0; m];
        let mut mult = vec![0.0; m];
        pivot[0] = d[0];
        for i in 1..m {
            mult[i] = self.lower / pivot[i - 1];
            pivot[i] = d[i] - mult[i] * self.upper;
        }
        if pivot.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::numerical(
                "cyclic factorization",
                "nonpositive pivot; shift is not below the spectrum",
                0.0,
            ));
        }
        let mut f = CyclicFactor {
            lower: self.lower,
            upper: self.upper,
            pivot,
            mult,
            border: vec![0.0; m],
            schur: 0.0,
        };
        // border column u: u_0 = lower (wrap), u_{m-1} = upper
        let mut u = vec![0.0; m];
        u[0] += self.lower;
        u[m - 1] += self.upper;
        let mut z = vec![0.0; m];
        f.block_solve(&u, &mut z);
        // border row v: v_0 = upper (wrap), v_{m-1} = lower
        let vz = self.upper * z[0] + self.lower * z[m - 1];
        f.schur = d[m] - vz;
        f.border = z;
        if !(f.schur.is_finite() && f.schur > 0.0) {
            return Err(Error::numerical(
                "cyclic factorization",
                "nonpositive Schur complement; shift is not below the spectrum",
                f.schur,
            ));
        }
        Ok(f)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct CyclicFactor {
    lower: f64,
    upper: f64,
    pivot: Vec<f64>,
    mult: Vec<f64>,
    border: Vec<f64>,
    schur: f64,
}

impl CyclicFactor {
    fn block_solve(&self, rhs: &[f64], out: &mut [f64]) {
        let m = self.pivot.len();
        out[0] = rhs[0];
        for i in 1..m {
            out[i] = rhs[i] - self.mult[i] * out[i - 1];
        }
        out[m - 1] /= self.pivot[m - 1];
        for i in (0..m - 1).rev() {
            out[i] = (out[i] - self.upper * out[i + 1]) / self.pivot[i];
        }
    }
}

impl LinearSolve for CyclicFactor {
    fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        let m = self.pivot.len();
        let (head, tail) = out.split_at_mut(m);
        self.block_solve(&rhs[..m], head);
        let last = (rhs[m] - self.upper * head[0] - self.lower * head[m - 1]) / self.schur;
        for (x, z) in head.iter_mut().zip(&self.border) {
            *x -= z * last;
        }
        tail[0] = last;
    }
}
