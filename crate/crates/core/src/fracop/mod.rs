//! The fractional operator
//!
//! ```text
//! I_s φ(x) = ½ ∫ (φ(x+y) + φ(x−y) − 2φ(x)) / |y|^{1+2s} dy
//! ```
//!
//! taken without normalization constant, evaluated on uniform grids whose
//! exterior is described by an algebraic [`TailModel`].
//!
//! Writing `g(y) = φ(x+y) + φ(x−y) − 2φ(x)` the integral equals
//! `∫₀^∞ h(y) y^{1−2s} dy` with `h = g/y²`, which is smooth and even. The
//! disc `|y| < r0` uses the Taylor expansion of `h`; beyond it `h` is replaced
//! by a piecewise polynomial interpolant of the grid data and integrated
//! exactly against the weight `y^{1−2s}` (product integration). Two
//! interpolation orders are offered: cubic ([`QuadratureOrder::HighOrder`]) and
//! piecewise linear ([`QuadratureOrder::Monotone`]), the latter having
//! nonnegative off-diagonal weights so that explicit Euler steps preserve
//! ordering. Beyond the grid the tail model is integrated semi-analytically;
//! past the outer radius `R` a convergent binomial series is used.

mod grid;

pub use grid::{GridFunction, TailModel};

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{check_order, Error, Result};
use crate::quadrature::{interp_uniform, GaussRule};

/// Interpolation order of the product-integration rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QuadratureOrder {
    HighOrder,
    Monotone,
}

/// Quadrature controls. The inner radius is `r0_cells · dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureConfig {
    pub r0_cells: usize,
    pub outer_radius: f64,
    pub target_tol: f64,
    pub order: QuadratureOrder,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            r0_cells: 2,
            outer_radius: 100.0,
            target_tol: 1e-12,
            order: QuadratureOrder::HighOrder,
        }
    }
}

impl QuadratureConfig {
    /// Defaults adapted to a grid: `r0 = 2dx`, `R = max(100, 10·half-width)`.
    pub fn for_grid(g: &GridFunction) -> Self {
        let half = 0.5 * (g.x_end() - g.x0);
        QuadratureConfig {
            outer_radius: (10.0 * half).max(100.0),
            ..Default::default()
        }
    }

    pub fn with_order(mut self, order: QuadratureOrder) -> Self {
        self.order = order;
        self
    }

    pub fn inner_radius(&self, dx: f64) -> f64 {
        self.r0_cells as f64 * dx
    }

    pub fn validate(&self, dx: f64) -> Result<()> {
        let min_cells = match self.order {
            QuadratureOrder::HighOrder => 2,
            QuadratureOrder::Monotone => 1,
        };
        if self.r0_cells < min_cells {
            return Err(Error::InvalidParameter(format!(
                "r0_cells = {} below the minimum {min_cells} for {:?}",
                self.r0_cells, self.order
            )));
        }
        if !(self.outer_radius > self.inner_radius(dx)) {
            return Err(Error::InvalidParameter(format!(
                "outer radius {} must exceed r0 = {}",
                self.outer_radius,
                self.inner_radius(dx)
            )));
        }
        if !(self.target_tol > 0.0) {
            return Err(Error::InvalidParameter("target_tol must be positive".into()));
        }
        Ok(())
    }

    fn ghosts(&self) -> usize {
        self.r0_cells + 4
    }
}

/// User overrides on top of a grid-adapted [`QuadratureConfig`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct QuadratureOverrides {
    pub r0_cells: Option<usize>,
    pub outer_radius: Option<f64>,
    pub target_tol: Option<f64>,
}

impl QuadratureOverrides {
    pub fn apply(&self, mut base: QuadratureConfig) -> QuadratureConfig {
        if let Some(r) = self.r0_cells {
            base.r0_cells = r;
        }
        if let Some(r) = self.outer_radius {
            base.outer_radius = r;
        }
        if let Some(t) = self.target_tol {
            base.target_tol = t;
        }
        base
    }
}

/// Direct-sum cutoff; farther offsets go through an FFT convolution.
const NEAR: usize = 64;
const FFT_MIN_LEN: usize = 512;

/// Offset weights of the product rule on an extended grid of `len` nodes.
#[derive(Debug, Clone)]
struct Weights {
    /// `w[k]` multiplies `φ(x ± k·dx) − φ(x)` on a side that extends to infinity.
    w: Vec<f64>,
    /// `corr[K][m]` is added to `w[K−3+m]` when that side stops at offset `K`.
    corr: Vec<[f64; 4]>,
    /// Prefix sums of `w`.
    prefix: Vec<f64>,
    /// Prefix sums of `w` restricted to offsets beyond the direct-sum cutoff.
    far_prefix: Vec<f64>,
}

fn panel_contribs(j: usize, offsets: &[i64], s: f64, rule: &GaussRule, out: &mut [f64]) {
    let mut basis = [0.0; 4];
    for v in out.iter_mut() {
        *v = 0.0;
    }
    for (t, wt) in rule.points(0.0, 1.0) {
        crate::quadrature::lagrange_basis(offsets, t, &mut basis[..offsets.len()]);
        let ker = (j as f64 + t).powf(1.0 - 2.0 * s) * wt;
        for m in 0..offsets.len() {
            out[m] += basis[m] * ker;
        }
    }
    for (m, &o) in offsets.iter().enumerate() {
        let k = (j as i64 + o) as f64;
        out[m] /= k * k;
    }
}

impl Weights {
    fn build(s: f64, dx: f64, cfg: &QuadratureConfig, len: usize) -> Weights {
        let m0 = cfg.r0_cells;
        let (std_off, last_off): (&[i64], &[i64]) = match cfg.order {
            QuadratureOrder::HighOrder => (&[-1, 0, 1, 2], &[-2, -1, 0, 1]),
            QuadratureOrder::Monotone => (&[0, 1], &[0, 1]),
        };
        let ns = std_off.len();
        let fine = GaussRule::new(16);
        let coarse = GaussRule::new(8);
        let jmax = len + 2;
        let mut stdc = vec![[0.0; 4]; jmax + 1];
        let mut lastc = vec![[0.0; 4]; jmax + 1];
        for j in m0..=jmax {
            let rule = if j < 16 { &fine } else { &coarse };
            panel_contribs(j, std_off, s, rule, &mut stdc[j][..ns]);
            if cfg.order == QuadratureOrder::HighOrder {
                panel_contribs(j, last_off, s, rule, &mut lastc[j][..ns]);
            } else {
                lastc[j] = stdc[j];
            }
        }
        let scale = dx.powf(-2.0 * s);
        // Standard panels containing node k as stencil entry m satisfy j = k − off[m].
        let node_weight = |k: usize, jlo: usize, jhi: usize| -> f64 {
            let mut acc = 0.0;
            for (m, &o) in std_off.iter().enumerate() {
                let j = k as i64 - o;
                if j >= jlo as i64 && j <= jhi as i64 {
                    acc += stdc[j as usize][m];
                }
            }
            acc
        };
        let mut w = vec![0.0; len + 1];
        for (k, wk) in w.iter_mut().enumerate().skip(1) {
            *wk = node_weight(k, m0, jmax) * scale;
        }
        let r0 = m0 as f64;
        let c2 = r0.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
        match cfg.order {
            QuadratureOrder::HighOrder => {
                let c4 = r0.powf(4.0 - 2.0 * s) / (12.0 * (4.0 - 2.0 * s));
                w[1] += (16.0 * c2 / 12.0 - 4.0 * c4) * scale;
                w[2] += (-c2 / 12.0 + c4) * scale;
            }
            QuadratureOrder::Monotone => {
                w[1] += c2 * scale;
            }
        }
        let mut corr = vec![[0.0; 4]; len + 1];
        let (last_lo, std_hi_shift) = match cfg.order {
            QuadratureOrder::HighOrder => (2i64, 2usize),
            QuadratureOrder::Monotone => (0i64, 1usize),
        };
        for (big_k, ck) in corr.iter_mut().enumerate() {
            if big_k < m0 + 2 {
                continue;
            }
            let jhi = big_k - std_hi_shift;
            for (m, c) in ck.iter_mut().enumerate() {
                let k = big_k as i64 - 3 + m as i64;
                if k < 1 {
                    continue;
                }
                let k = k as usize;
                let mut trunc = node_weight(k, m0, jhi);
                if cfg.order == QuadratureOrder::HighOrder {
                    let idx = k as i64 - (big_k as i64 - 1) + last_lo;
                    if (0..4).contains(&idx) {
                        trunc += lastc[big_k - 1][idx as usize];
                    }
                }
                *c = (trunc - node_weight(k, m0, jmax)) * scale;
            }
        }
        let mut prefix = vec![0.0; len + 1];
        let mut far_prefix = vec![0.0; len + 1];
        for k in 1..=len {
            prefix[k] = prefix[k - 1] + w[k];
            far_prefix[k] = if k > NEAR { far_prefix[k - 1] + w[k] } else { 0.0 };
        }
        Weights {
            w,
            corr,
            prefix,
            far_prefix,
        }
    }
}

/// `∫_{d_edge}^∞ (y + dc)^{-p} y^{-1-2s} dy` for `d_edge > 0`, `d_edge + dc > 0`.
fn tail_moment(d_edge: f64, dc: f64, p: f64, s: f64, r_out: f64, tol: f64) -> f64 {
    let two_s = 2.0 * s;
    let series_start = r_out.max(d_edge);
    let use_series = series_start > 2.0 * dc.abs();
    let mut total = 0.0;
    let rule = GaussRule::new(16);
    let f = |w: f64| -> f64 {
        let y = d_edge * w.powf(-1.0 / two_s);
        (y + dc).powf(-p)
    };
    let w_lo = if use_series {
        (d_edge / series_start).powf(two_s)
    } else {
        0.0
    };
    if w_lo < 1.0 {
        let mut acc = 0.0;
        let mut hi: f64 = 1.0;
        let floor = if w_lo > 0.0 { w_lo } else { 1e-14 };
        loop {
            let lo = (hi * 0.1).max(floor);
            acc += rule.integrate(lo, hi, f);
            if lo <= floor {
                break;
            }
            hi = lo;
        }
        total += acc * d_edge.powf(-two_s) / two_s;
    }
    if use_series {
        let r = series_start;
        let mut coef = 1.0;
        let mut sum = 0.0;
        for j in 0..400 {
            let term = coef * dc.powi(j) * r.powf(-p - j as f64 - two_s) / (p + j as f64 + two_s);
            sum += term;
            if term.abs() <= tol * 1e-3 * sum.abs() || term == 0.0 {
                break;
            }
            coef *= (-p - j as f64) / (j as f64 + 1.0);
        }
        total += sum;
    }
    total
}

/// Exterior coefficients of one node: `(M_R, Q_R, M_L, Q_L)`.
fn exterior(x: f64, a: f64, b: f64, tail: &TailModel, s: f64, cfg: &QuadratureConfig) -> [f64; 4] {
    let two_s = 2.0 * s;
    let (dr, dl) = (b - x, x - a);
    let p = tail.exponent;
    [
        dr.powf(-two_s) / two_s,
        tail_moment(dr, x - tail.center, p, s, cfg.outer_radius, cfg.target_tol),
        dl.powf(-two_s) / two_s,
        tail_moment(dl, tail.center - x, p, s, cfg.outer_radius, cfg.target_tol),
    ]
}

struct FarField {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kernel: Vec<Complex<f64>>,
}

/// Precomputed operator on a fixed grid geometry and tail shape.
///
/// Only the tail limits and coefficients may change between applications;
/// exponent and center are baked into the exterior moments.
pub struct FracOperator {
    s: f64,
    x0: f64,
    dx: f64,
    n: usize,
    ghosts: usize,
    cfg: QuadratureConfig,
    tail_exponent: f64,
    tail_center: f64,
    weights: Weights,
    ext: Vec<[f64; 4]>,
    far: Option<FarField>,
}

impl std::fmt::Debug for FracOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FracOperator")
            .field("s", &self.s)
            .field("x0", &self.x0)
            .field("dx", &self.dx)
            .field("n", &self.n)
            .field("cfg", &self.cfg)
            .finish()
    }
}

fn check_common(phi: &GridFunction, s: f64, cfg: &QuadratureConfig) -> Result<()> {
    check_order(s)?;
    phi.validate()?;
    cfg.validate(phi.dx)
}

impl FracOperator {
    pub fn new(template: &GridFunction, s: f64, cfg: &QuadratureConfig) -> Result<Self> {
        check_common(template, s, cfg)?;
        let n = template.n();
        let g = cfg.ghosts();
        let len = n + 2 * g;
        let weights = Weights::build(s, template.dx, cfg, len);
        let a = template.x0 - g as f64 * template.dx;
        let b = template.x_end() + g as f64 * template.dx;
        let ext = (0..n)
            .map(|i| exterior(template.x(i), a, b, &template.tail, s, cfg))
            .collect();
        let far = if len >= FFT_MIN_LEN {
            let size = (2 * len).next_power_of_two();
            let mut planner = FftPlanner::new();
            let forward = planner.plan_fft_forward(size);
            let inverse = planner.plan_fft_inverse(size);
            let mut kernel = vec![Complex::new(0.0, 0.0); size];
            for k in NEAR + 1..len {
                kernel[k] = Complex::new(weights.w[k], 0.0);
                kernel[size - k] = Complex::new(weights.w[k], 0.0);
            }
            forward.process(&mut kernel);
            let norm = 1.0 / size as f64;
            for c in kernel.iter_mut() {
                *c *= norm;
            }
            Some(FarField {
                size,
                forward,
                inverse,
                kernel,
            })
        } else {
            None
        };
        Ok(FracOperator {
            s,
            x0: template.x0,
            dx: template.dx,
            n,
            ghosts: g,
            cfg: *cfg,
            tail_exponent: template.tail.exponent,
            tail_center: template.tail.center,
            weights,
            ext,
            far,
        })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn config(&self) -> &QuadratureConfig {
        &self.cfg
    }

    fn compatible(&self, phi: &GridFunction) -> Result<()> {
        let same = phi.n() == self.n
            && phi.x0 == self.x0
            && phi.dx == self.dx
            && phi.tail.exponent == self.tail_exponent
            && phi.tail.center == self.tail_center;
        if same {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "grid function does not match the operator geometry".into(),
            ))
        }
    }

    fn extended(&self, samples: &[f64], tail: &TailModel) -> Vec<f64> {
        let g = self.ghosts;
        let mut e = Vec::with_capacity(self.n + 2 * g);
        for k in 0..g {
            e.push(tail.left(self.x0 - (g - k) as f64 * self.dx));
        }
        e.extend_from_slice(samples);
        let xe = self.x0 + (self.n - 1) as f64 * self.dx;
        for k in 1..=g {
            e.push(tail.right(xe + k as f64 * self.dx));
        }
        e
    }

    /// Largest total weight on the diagonal: `Σ_k w_k` over both sides plus the
    /// exterior mass. Bounds the explicit-step stability constant.
    pub fn diagonal_bound(&self) -> f64 {
        let len = self.n + 2 * self.ghosts;
        let mut best: f64 = 0.0;
        for i in 0..self.n {
            let big_i = i + self.ghosts;
            let (kr, kl) = (len - 1 - big_i, big_i);
            let side = |k: usize| self.weights.prefix[k] + self.weights.corr[k].iter().sum::<f64>();
            let e = &self.ext[i];
            best = best.max(side(kr) + side(kl) + e[0] + e[2]);
        }
        best
    }

    /// Direct evaluation at node `i` (no FFT).
    fn node_direct(&self, e: &[f64], i: usize, tail: &TailModel) -> f64 {
        let big_i = i + self.ghosts;
        let len = e.len();
        let (kr, kl) = (len - 1 - big_i, big_i);
        let c = e[big_i];
        let w = &self.weights.w;
        let mut acc = 0.0;
        for k in 1..=kr {
            acc += w[k] * (e[big_i + k] - c);
        }
        for k in 1..=kl {
            acc += w[k] * (e[big_i - k] - c);
        }
        acc + self.edge_terms(e, i, tail)
    }

    fn edge_terms(&self, e: &[f64], i: usize, tail: &TailModel) -> f64 {
        let big_i = i + self.ghosts;
        let len = e.len();
        let (kr, kl) = (len - 1 - big_i, big_i);
        let c = e[big_i];
        let mut acc = 0.0;
        for m in 0..4 {
            let k = kr as i64 - 3 + m as i64;
            if k >= 1 {
                acc += self.weights.corr[kr][m] * (e[big_i + k as usize] - c);
            }
            let k = kl as i64 - 3 + m as i64;
            if k >= 1 {
                acc += self.weights.corr[kl][m] * (e[big_i - k as usize] - c);
            }
        }
        let x = &self.ext[i];
        acc += (tail.right_limit - c) * x[0] - tail.right_coeff * x[1];
        acc += (tail.left_limit - c) * x[2] + tail.left_coeff * x[3];
        acc
    }

    /// Evaluates the operator at every node of `phi`.
    pub fn apply(&self, phi: &GridFunction) -> Result<GridFunction> {
        self.compatible(phi)?;
        let mut out = vec![0.0; self.n];
        self.apply_into(&phi.samples, &phi.tail, &mut out);
        Ok(GridFunction {
            x0: phi.x0,
            dx: phi.dx,
            samples: out,
            tail: TailModel::flat(0.0, 0.0),
        }
        .with_center(phi.tail.center))
    }

    /// Slice-level evaluation used by time steppers.
    pub fn apply_into(&self, samples: &[f64], tail: &TailModel, out: &mut [f64]) {
        let e = self.extended(samples, tail);
        let Some(far) = &self.far else {
            for (i, o) in out.iter_mut().enumerate() {
                *o = self.node_direct(&e, i, tail);
            }
            return;
        };
        let len = e.len();
        let mean = 0.5 * (e[0] + e[len - 1]);
        let mut buf = vec![Complex::new(0.0, 0.0); far.size];
        for (b, v) in buf.iter_mut().zip(&e) {
            *b = Complex::new(*v - mean, 0.0);
        }
        far.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&far.kernel) {
            *b *= k;
        }
        far.inverse.process(&mut buf);
        let w = &self.weights.w;
        let far_sum = |k: usize| self.weights.far_prefix[k];
        for (i, o) in out.iter_mut().enumerate() {
            let big_i = i + self.ghosts;
            let (kr, kl) = (len - 1 - big_i, big_i);
            let c = e[big_i];
            let mut acc = 0.0;
            for k in 1..=NEAR.min(kr) {
                acc += w[k] * (e[big_i + k] - c);
            }
            for k in 1..=NEAR.min(kl) {
                acc += w[k] * (e[big_i - k] - c);
            }
            acc += buf[big_i].re - (c - mean) * (far_sum(kr) + far_sum(kl));
            *o = acc + self.edge_terms(&e, i, tail);
        }
    }

    /// Direct (FFT-free) evaluation at node `i`.
    pub fn at_node(&self, phi: &GridFunction, i: usize) -> Result<f64> {
        self.compatible(phi)?;
        let e = self.extended(&phi.samples, &phi.tail);
        Ok(self.node_direct(&e, i, &phi.tail))
    }
}

impl GridFunction {
    fn with_center(mut self, c: f64) -> Self {
        self.tail.center = c;
        self
    }
}

/// Pointwise evaluation of `I_s φ(x)`.
///
/// At grid nodes the value is a direct weighted sum; between nodes the nodal
/// values of the six surrounding nodes are interpolated.
pub fn frac_laplacian(phi: &GridFunction, s: f64, x: f64, cfg: &QuadratureConfig) -> Result<f64> {
    check_common(phi, s, cfg)?;
    let r0 = cfg.inner_radius(phi.dx);
    let slack = 1e-9 * phi.dx;
    if !(x >= phi.x0 + r0 - slack && x <= phi.x_end() - r0 + slack) {
        return Err(Error::OutOfDomain(format!(
            "x = {x} is not at least r0 = {r0} inside [{}, {}]",
            phi.x0,
            phi.x_end()
        )));
    }
    let n = phi.n();
    let g = cfg.ghosts();
    let len = n + 2 * g;
    let weights = Weights::build(s, phi.dx, cfg, len);
    let a = phi.x0 - g as f64 * phi.dx;
    let b = phi.x_end() + g as f64 * phi.dx;
    let op = PointEval {
        phi,
        s,
        cfg,
        weights: &weights,
        a,
        b,
        ghosts: g,
    };
    if let Some(i) = phi.node_index(x) {
        return Ok(op.node(i));
    }
    let u = (x - phi.x0) / phi.dx;
    let base = (u.floor() as i64 - 2).clamp(0, n as i64 - 6) as usize;
    let vals: Vec<f64> = (base..base + 6).map(|i| op.node(i)).collect();
    Ok(interp_uniform(6, u - base as f64, |k| vals[k]))
}

struct PointEval<'a> {
    phi: &'a GridFunction,
    s: f64,
    cfg: &'a QuadratureConfig,
    weights: &'a Weights,
    a: f64,
    b: f64,
    ghosts: usize,
}

impl PointEval<'_> {
    fn sample(&self, j: i64) -> f64 {
        let n = self.phi.n() as i64;
        if j < 0 {
            self.phi.tail.left(self.phi.x0 + j as f64 * self.phi.dx)
        } else if j >= n {
            self.phi.tail.right(self.phi.x0 + j as f64 * self.phi.dx)
        } else {
            self.phi.samples[j as usize]
        }
    }

    fn node(&self, i: usize) -> f64 {
        let n = self.phi.n();
        let len = n + 2 * self.ghosts;
        let big_i = i + self.ghosts;
        let (kr, kl) = (len - 1 - big_i, big_i);
        let ii = i as i64;
        let c = self.sample(ii);
        let w = &self.weights.w;
        let mut acc = 0.0;
        for k in 1..=kr {
            acc += w[k] * (self.sample(ii + k as i64) - c);
        }
        for k in 1..=kl {
            acc += w[k] * (self.sample(ii - k as i64) - c);
        }
        for m in 0..4 {
            let k = kr as i64 - 3 + m as i64;
            if k >= 1 {
                acc += self.weights.corr[kr][m] * (self.sample(ii + k) - c);
            }
            let k = kl as i64 - 3 + m as i64;
            if k >= 1 {
                acc += self.weights.corr[kl][m] * (self.sample(ii - k) - c);
            }
        }
        let t = &self.phi.tail;
        let x = exterior(self.phi.x(i), self.a, self.b, t, self.s, self.cfg);
        acc += (t.right_limit - c) * x[0] - t.right_coeff * x[1];
        acc += (t.left_limit - c) * x[2] + t.left_coeff * x[3];
        acc
    }
}

/// Evaluates the operator at every node; margin nodes use ghost samples drawn
/// from the tail model.
pub fn frac_laplacian_field(phi: &GridFunction, s: f64, cfg: &QuadratureConfig) -> Result<GridFunction> {
    FracOperator::new(phi, s, cfg)?.apply(phi)
}

/// `I_s φ(0)` for an even function sampled on `[0, b]` only (node 0 at the origin).
///
/// Uses `I_s φ(0) = 2 ∫₀^∞ (φ(y) − φ(0)) y^{-1-2s} dy` with the same weights as
/// the full-range rule.
pub fn frac_laplacian_even_origin(half: &GridFunction, s: f64, cfg: &QuadratureConfig) -> Result<f64> {
    check_order(s)?;
    cfg.validate(half.dx)?;
    half.tail.validate()?;
    if half.x0.abs() > 1e-12 * half.dx {
        return Err(Error::InvalidParameter("half-range grid must start at 0".into()));
    }
    let n = half.n();
    let g = cfg.ghosts();
    let len = 2 * n - 1 + 2 * g;
    let weights = Weights::build(s, half.dx, cfg, len);
    let kr = n - 1 + g;
    let c = half.samples[0];
    let t = TailModel {
        center: 0.0,
        ..half.tail
    };
    let sample = |k: usize| -> f64 {
        if k < n {
            half.samples[k]
        } else {
            t.right(k as f64 * half.dx)
        }
    };
    let mut acc = 0.0;
    for k in 1..=kr {
        acc += weights.w[k] * (sample(k) - c);
    }
    for m in 0..4 {
        let k = kr as i64 - 3 + m as i64;
        if k >= 1 {
            acc += weights.corr[kr][m] * (sample(k as usize) - c);
        }
    }
    let b = kr as f64 * half.dx;
    let x = exterior(0.0, -b, b, &t, s, cfg);
    acc += (t.right_limit - c) * x[0] - t.right_coeff * x[1];
    Ok(2.0 * acc)
}
