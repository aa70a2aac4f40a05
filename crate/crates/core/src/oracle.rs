//! Reference values computed without the operator's quadrature code: an
//! adaptive Gauss–Kronrod integrator, Taylor expansion near the singular
//! point and closed forms where they exist.

use statrs::function::gamma::gamma;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = WGK[7] * fc;
    let mut rg = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) with absolute tolerance `tol`.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, e) = gk15(f, a, b);
        if e <= tol || depth > 50 || (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth + 1) + rec(f, m, b, 0.5 * tol, depth + 1)
    }
    rec(f, a, b, tol, 0)
}

/// High-precision value of `∫₀^∞ (φ(x+y)+φ(x−y)−2φ(x)) y^{-1-2s} dy`.
///
/// `deriv(n)` returns the `n`-th derivative of `φ` at `x` for even `n`; the
/// disc `[0, 0.1]` is integrated through the Taylor series of the second
/// difference, the rest adaptively, and `far(Y)` supplies `[Y, ∞)`.
pub fn fraclap_oracle<P, D, T>(phi: P, deriv: D, x: f64, s: f64, y_max: f64, far: T) -> f64
where
    P: Fn(f64) -> f64,
    D: Fn(usize) -> f64,
    T: Fn(f64) -> f64,
{
    let delta: f64 = 0.1;
    let mut taylor = 0.0;
    let mut fact = 1.0;
    for k in 1..=12usize {
        let n = 2 * k;
        fact *= ((n - 1) * n) as f64;
        let e = n as f64 - 2.0 * s;
        taylor += 2.0 * deriv(n) / fact * delta.powf(e) / e;
    }
    let integrand = |y: f64| (phi(x + y) + phi(x - y) - 2.0 * phi(x)) * y.powf(-1.0 - 2.0 * s);
    let mut acc = taylor;
    let mut lo = delta;
    while lo < y_max {
        let hi = (lo * 2.0).min(y_max);
        acc += adaptive(&integrand, lo, hi, 1e-15);
        lo = hi;
    }
    acc + far(y_max)
}

/// Physicists' Hermite polynomial `H_n(x)`.
pub fn hermite(n: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * x);
    if n == 0 {
        return h0;
    }
    for k in 1..n {
        let h2 = 2.0 * x * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// Kummer's confluent hypergeometric function by its power series.
pub fn hyp1f1(a: f64, b: f64, z: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..500 {
        let k = k as f64;
        term *= (a + k) / (b + k) * z / (k + 1.0);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Closed form of the unnormalized operator on `exp(−x²)`:
/// `−Γ(1−s)/s · ₁F₁(½+s; ½; −x²)`.
pub fn gaussian_closed_form(s: f64, x: f64) -> f64 {
    -gamma(1.0 - s) / s * hyp1f1(0.5 + s, 0.5, -x * x)
}

/// Quadrature oracle on the Gaussian.
pub fn gaussian_oracle(s: f64, x: f64) -> f64 {
    let phi = |z: f64| (-z * z).exp();
    let e = (-x * x).exp();
    let deriv = |n: usize| hermite(n, x) * e * if n % 2 == 0 { 1.0 } else { -1.0 };
    fraclap_oracle(phi, deriv, x, s, 64.0, |y| -2.0 * e * y.powf(-2.0 * s) / (2.0 * s))
}

/// The explicit half-order layer `½ + arctan(x)/π`.
pub fn arctan_layer(x: f64) -> f64 {
    0.5 + x.atan() / std::f64::consts::PI
}

/// Quadrature oracle of `I_{1/2}` applied to the arctan layer.
pub fn arctan_oracle(x: f64) -> f64 {
    use std::f64::consts::PI;
    let deriv = |n: usize| {
        // d^n/dx^n arctan x = (−1)^{n−1} (n−1)! Im[(x − i)^{−n}]
        let r2 = 1.0 + x * x;
        let theta = (-1.0f64).atan2(x);
        let im = -(n as f64 * theta).sin() * r2.powf(-0.5 * n as f64);
        let mut f = 1.0;
        for k in 1..n {
            f *= k as f64;
        }
        let sign = if (n - 1) % 2 == 0 { 1.0 } else { -1.0 };
        sign * f * im / PI
    };
    let far = |y: f64| {
        let c0 = 1.0 - 2.0 * arctan_layer(x);
        c0 / y + (2.0 * x / PI) * y.powi(-3) / 3.0
    };
    fraclap_oracle(arctan_layer, deriv, x, 0.5, 1e5, far)
}
