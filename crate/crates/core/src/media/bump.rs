//! The C∞ standard bump `exp(-1/(1-t²))` on `[-1, 1]`, normalized to unit mass.

use std::sync::OnceLock;

const PANELS: usize = 64;
const ORDER: usize = 16;

fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = ORDER;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(n, x);
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn profile(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

fn raw_integral(upper: f64) -> f64 {
    let upper = upper.clamp(-1.0, 1.0);
    let (nodes, weights) = gauss_legendre();
    let width = (upper + 1.0) / PANELS as f64;
    let mut total = 0.0;
    for p in 0..PANELS {
        let mid = -1.0 + (p as f64 + 0.5) * width;
        let half = 0.5 * width;
        total += nodes
            .iter()
            .zip(weights)
            .map(|(x, w)| w * profile(mid + half * x))
            .sum::<f64>()
            * half;
    }
    total
}

/// Unnormalized mass `∫_{-1}^{1} exp(-1/(1-t²)) dt`.
pub fn raw_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| raw_integral(1.0))
}

/// Density of the unit-mass bump on `[-1, 1]`.
pub fn density(t: f64) -> f64 {
    profile(t) / raw_mass()
}

/// Cumulative mass of the unit bump on `(-∞, t]`.
pub fn cdf(t: f64) -> f64 {
    if t <= -1.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else if t > 0.0 {
        1.0 - raw_integral(-t) / raw_mass()
    } else {
        raw_integral(t) / raw_mass()
    }
}
