//! Small numerical building blocks: Gauss–Legendre rules, Lagrange
//! interpolation on uniform stencils and least-squares line fits.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        GaussRule { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        let mut acc = 0.0;
        for (z, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(c + h * z);
        }
        acc * h
    }

    pub fn points(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(z, w)| (c + h * z, w * h))
    }
}

/// Lagrange basis values at `t` for integer nodes `offsets`.
pub fn lagrange_basis(offsets: &[i64], t: f64, out: &mut [f64]) {
    for (m, &om) in offsets.iter().enumerate() {
        let mut l = 1.0;
        for (k, &ok) in offsets.iter().enumerate() {
            if k != m {
                l *= (t - ok as f64) / (om - ok) as f64;
            }
        }
        out[m] = l;
    }
}

/// Interpolates uniformly spaced samples `f(k)` with a six-point stencil
/// around fractional index `u`, clamping the stencil inside `0..len`.
pub fn interp_uniform<F: Fn(usize) -> f64>(len: usize, u: f64, f: F) -> f64 {
    const W: usize = 6;
    if len < W {
        let i = (u.floor().max(0.0) as usize).min(len.saturating_sub(2));
        let t = u - i as f64;
        return f(i) * (1.0 - t) + f(i + 1) * t;
    }
    let base = (u.floor() as i64 - 2).clamp(0, (len - W) as i64);
    let offs: [i64; W] = [0, 1, 2, 3, 4, 5];
    let mut b = [0.0; W];
    lagrange_basis(&offs, u - base as f64, &mut b);
    let mut acc = 0.0;
    for m in 0..W {
        acc += b[m] * f(base as usize + m);
    }
    acc
}

/// Ordinary least-squares line `y = a + b x` with coefficient of determination.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let mut sse = 0.0;
    for (a, b) in x.iter().zip(y) {
        let r = b - intercept - slope * a;
        sse += r * r;
    }
    let r_squared = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    LineFit {
        intercept,
        slope,
        r_squared,
    }
}
