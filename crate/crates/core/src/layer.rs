//! Heteroclinic layer `u` solving `I_s u = W'(u)`, `u(−∞) = 0`, `u(0) = ½`,
//! `u(+∞) = 1`, and the corrector `ψ` of the linearized cell problem
//!
//! ```text
//! I_s ψ − W''(u) ψ = u' + η (W''(u) − W''(0)),   ψ(±∞) = 0,   η = 1/(γβ).
//! ```
//!
//! The layer is obtained by parabolic relaxation `u_t = I_s u − W'(u)` with
//! periodic recentering, then polished by a bordered Newton iteration in which
//! a multiplier on `u'` absorbs the translation mode. The far field is an
//! algebraic tail of exponent `2s` whose coefficient is refitted on the
//! outermost tenth of the grid.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{check_order, Error, Result};
use crate::fracop::{FracOperator, GridFunction, QuadratureConfig, QuadratureOverrides, TailModel};
use crate::potential::PeriodicPotential;
use crate::quadrature::fit_line;

pub(crate) const TAIL_FIT_FRACTION: f64 = 0.1;

/// The converged layer together with its derived constants.
#[derive(Debug, Clone)]
pub struct LayerProfile {
    pub u: GridFunction,
    pub uprime: GridFunction,
    /// Mobility `1/∫(u')²`.
    pub gamma: f64,
    pub beta: f64,
    /// Fitted exponent of the tail defect `u − 1 + 1/(2sβx^{2s})`.
    pub kappa: f64,
    pub s: f64,
    pub potential: PeriodicPotential,
    /// Final sup-norm of `I_s u − W'(u)`.
    pub residual: f64,
    /// Fitted right tail coefficient of `u`.
    pub tail_coeff: f64,
    /// `(c, C)` with `c ≤ u'(x)|x|^{1+2s} ≤ C` on `|x| ≥ 1`.
    pub uprime_bounds: (f64, f64),
    pub quad: QuadratureConfig,
    pub relaxation_steps: usize,
    pub newton_steps: usize,
}

/// Manifest of scalar layer data.
#[derive(Debug, Clone, Serialize)]
pub struct LayerSummary {
    pub s: f64,
    pub gamma: f64,
    pub beta: f64,
    pub kappa: f64,
    pub residual: f64,
    pub tail_coeff: f64,
    pub tail_coeff_theory: f64,
    pub half_width: f64,
    pub dx: f64,
}

impl LayerProfile {
    /// `u(ξ)` anywhere on the line.
    pub fn value(&self, xi: f64) -> f64 {
        self.u.value_at(xi)
    }

    /// `u'(ξ)` anywhere on the line.
    pub fn derivative(&self, xi: f64) -> f64 {
        self.uprime.value_at(xi)
    }

    pub fn half_width(&self) -> f64 {
        -self.u.x0
    }

    pub fn summary(&self) -> LayerSummary {
        LayerSummary {
            s: self.s,
            gamma: self.gamma,
            beta: self.beta,
            kappa: self.kappa,
            residual: self.residual,
            tail_coeff: self.tail_coeff,
            tail_coeff_theory: 1.0 / (2.0 * self.s * self.beta),
            half_width: self.half_width(),
            dx: self.u.dx,
        }
    }
}

/// Corrector `ψ` with `η = 1/(γβ)`.
#[derive(Debug, Clone)]
pub struct Corrector {
    pub psi: GridFunction,
    pub psiprime: GridFunction,
    pub eta: f64,
    /// Fitted `C` in `|ψ'(x)| ≤ C/(1+|x|^{1+2s})`.
    pub psiprime_bound: f64,
    /// Sup-norm residual of the bordered system.
    pub residual: f64,
    /// Multiplier on `u'`; vanishes when the discrete right-hand side is
    /// orthogonal to the kernel.
    pub solvability_defect: f64,
}

impl Corrector {
    pub fn value(&self, xi: f64) -> f64 {
        self.psi.value_at(xi)
    }

    pub fn derivative(&self, xi: f64) -> f64 {
        self.psiprime.value_at(xi)
    }
}

/// Sixth-order centered first derivative; ghost values come from the tail.
pub(crate) fn derivative_samples(g: &GridFunction) -> Vec<f64> {
    const C: [f64; 3] = [45.0 / 60.0, -9.0 / 60.0, 1.0 / 60.0];
    let n = g.n() as i64;
    let at = |j: i64| -> f64 {
        if j < 0 {
            g.tail.left(g.x0 + j as f64 * g.dx)
        } else if j >= n {
            g.tail.right(g.x0 + j as f64 * g.dx)
        } else {
            g.samples[j as usize]
        }
    };
    (0..n)
        .map(|i| {
            let mut d = 0.0;
            for (k, c) in C.iter().enumerate() {
                let k = k as i64 + 1;
                d += c * (at(i + k) - at(i - k));
            }
            d / g.dx
        })
        .collect()
}

fn layer_tail(s: f64, beta: f64) -> TailModel {
    let c = 1.0 / (2.0 * s * beta);
    TailModel::algebraic(0.0, 1.0, 2.0 * s, c, c, 0.0)
}

/// Residual `I_s u − W'(u)` on every node, after refitting the tail.
fn layer_residual(op: &FracOperator, u: &mut GridFunction, p: &PeriodicPotential, out: &mut [f64]) {
    u.fit_tails(TAIL_FIT_FRACTION);
    op.apply_into(&u.samples, &u.tail, out);
    for (o, v) in out.iter_mut().zip(&u.samples) {
        *o -= p.dw(*v);
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Position of the ½-crossing by linear interpolation between bracketing nodes.
fn half_crossing(u: &GridFunction) -> Option<f64> {
    (0..u.n() - 1).find_map(|i| {
        let (a, b) = (u.samples[i], u.samples[i + 1]);
        if a <= 0.5 && b > 0.5 {
            Some(u.x(i) + u.dx * (0.5 - a) / (b - a))
        } else {
            None
        }
    })
}

fn recenter(u: &mut GridFunction, shift: f64) {
    let old = u.clone();
    for i in 0..u.n() {
        u.samples[i] = old.value_at(u.x(i) + shift);
    }
}

fn check_monotone(u: &GridFunction) -> Result<()> {
    for i in 0..u.n() - 1 {
        if !(u.samples[i + 1] > u.samples[i]) {
            return Err(Error::SolverDiverged(format!(
                "layer lost monotonicity at x = {}",
                u.x(i)
            )));
        }
    }
    Ok(())
}

/// Applies the linearized operator `δ ↦ I_s δ − W''(u)δ` (tail refitted from
/// `δ` with zero limits) to unit vectors to assemble a dense matrix.
fn dense_linearization(op: &FracOperator, template: &GridFunction, coef: &[f64]) -> DMatrix<f64> {
    let n = template.n();
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut e = template.clone();
    e.tail.left_limit = 0.0;
    e.tail.right_limit = 0.0;
    let mut col = vec![0.0; n];
    for j in 0..n {
        e.samples.iter_mut().for_each(|v| *v = 0.0);
        e.samples[j] = 1.0;
        e.fit_tails(TAIL_FIT_FRACTION);
        op.apply_into(&e.samples, &e.tail, &mut col);
        for i in 0..n {
            m[(i, j)] = col[i];
        }
        m[(j, j)] -= coef[j];
    }
    m
}

/// Computes the layer on `[−Lx, Lx]` with spacing `dx` to residual `tol`.
pub fn solve_layer(p: &PeriodicPotential, s: f64, half_width: f64, dx: f64, tol: f64) -> Result<LayerProfile> {
    solve_layer_with(p, s, half_width, dx, tol, &QuadratureOverrides::default())
}

/// [`solve_layer`] with explicit quadrature settings.
pub fn solve_layer_with(
    p: &PeriodicPotential,
    s: f64,
    half_width: f64,
    dx: f64,
    tol: f64,
    overrides: &QuadratureOverrides,
) -> Result<LayerProfile> {
    check_order(s)?;
    if !(half_width >= 20.0) {
        return Err(Error::InvalidParameter(format!(
            "layer half-width must be at least 20, got {half_width}"
        )));
    }
    if !(dx > 0.0 && dx <= 0.05) {
        return Err(Error::InvalidParameter(format!(
            "layer spacing must lie in (0, 0.05], got {dx}"
        )));
    }
    if !(tol >= 1e-10) {
        return Err(Error::InvalidParameter(format!("tolerance must be >= 1e-10, got {tol}")));
    }
    let beta = p.beta;
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter("potential must have W''(0) > 0".into()));
    }
    let mut u = GridFunction::symmetric(
        half_width,
        dx,
        |x| 0.5 + x.atan() / std::f64::consts::PI,
        layer_tail(s, beta),
    )?;
    let n = u.n();
    let i0 = n / 2;
    let quad = overrides.apply(QuadratureConfig::for_grid(&u));
    let op = FracOperator::new(&u, s, &quad)?;
    let dt = 0.5 / (op.diagonal_bound() + beta);
    let mut res = vec![0.0; n];

    let relax_target = (1e2 * tol).max(1e-5);
    let max_relax = 200_000;
    let sweep = 25;
    let mut relaxation_steps = 0;
    layer_residual(&op, &mut u, p, &mut res);
    while sup(&res) > relax_target && relaxation_steps < max_relax {
        for _ in 0..sweep {
            for i in 0..n {
                let v = u.samples[i];
                let rhs = v + dt * (res[i] + p.dw(v));
                u.samples[i] = implicit_reaction(rhs, v, dt, p);
            }
            relaxation_steps += 1;
            layer_residual(&op, &mut u, p, &mut res);
        }
        check_monotone(&u)?;
        if let Some(xc) = half_crossing(&u) {
            if xc.abs() > 1e-3 * dx {
                recenter(&mut u, xc);
                layer_residual(&op, &mut u, p, &mut res);
            }
        }
        if !res.iter().all(|r| r.is_finite()) {
            return Err(Error::SolverDiverged("non-finite layer residual".into()));
        }
    }

    let mut newton_steps = 0;
    while sup(&res) > tol {
        if newton_steps >= 30 {
            return Err(Error::NoConvergence(format!(
                "layer residual {:e} after {newton_steps} Newton steps",
                sup(&res)
            )));
        }
        let up = derivative_samples(&u);
        let coef: Vec<f64> = u.samples.iter().map(|v| p.d2w(*v)).collect();
        let jac = dense_linearization(&op, &u, &coef);
        let mut a = DMatrix::<f64>::zeros(n + 1, n + 1);
        a.view_mut((0, 0), (n, n)).copy_from(&jac);
        for i in 0..n {
            a[(i, n)] = up[i];
        }
        a[(n, i0)] = 1.0;
        let mut b = DVector::<f64>::zeros(n + 1);
        for i in 0..n {
            b[i] = -res[i];
        }
        b[n] = 0.5 - u.samples[i0];
        let sol = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::SolverDiverged("singular layer Newton system".into()))?;
        for i in 0..n {
            u.samples[i] += sol[i];
        }
        newton_steps += 1;
        layer_residual(&op, &mut u, p, &mut res);
        if !res.iter().all(|r| r.is_finite()) {
            return Err(Error::SolverDiverged("non-finite residual in Newton".into()));
        }
    }
    check_monotone(&u)?;
    u.samples[i0] = 0.5;
    layer_residual(&op, &mut u, p, &mut res);
    let residual = sup(&res);

    let up = derivative_samples(&u);
    let c_right = u.tail.right_coeff;
    let two_s = 2.0 * s;
    let dtail = TailModel::algebraic(
        0.0,
        0.0,
        1.0 + two_s,
        two_s * u.tail.left_coeff,
        -two_s * c_right,
        0.0,
    );
    let uprime = GridFunction::new(u.x0, dx, up.clone(), dtail)?;

    let mut int = 0.0;
    for i in 0..n {
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        int += w * up[i] * up[i] * dx;
    }
    let pexp = two_s;
    let lx = half_width;
    let tail_int = |c: f64| (pexp * c).powi(2) * lx.powf(-2.0 * pexp - 1.0) / (2.0 * pexp + 1.0);
    int += tail_int(u.tail.left_coeff) + tail_int(c_right);
    let gamma = 1.0 / int;

    let kappa = fit_kappa(&u, s, beta);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for i in 0..n {
        let x = u.x(i);
        if x.abs() >= 1.0 {
            let r = up[i] * x.abs().powf(1.0 + two_s);
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }

    Ok(LayerProfile {
        u,
        uprime,
        gamma,
        beta,
        kappa,
        s,
        potential: p.clone(),
        residual,
        tail_coeff: c_right,
        uprime_bounds: (lo, hi),
        quad,
        relaxation_steps,
        newton_steps,
    })
}

/// Solves `w + dt·W'(w) = rhs` by scalar Newton from `guess`.
pub(crate) fn implicit_reaction(rhs: f64, guess: f64, dt: f64, p: &PeriodicPotential) -> f64 {
    let mut w = guess;
    for _ in 0..50 {
        let f = w + dt * p.dw(w) - rhs;
        let d = 1.0 + dt * p.d2w(w);
        let step = f / d;
        w -= step;
        if step.abs() <= 1e-15 * (1.0 + w.abs()) {
            break;
        }
    }
    w
}

/// Log-log regression of the tail defect over the largest sign-consistent
/// window inside `3 ≤ x ≤ Lx/2`.
fn fit_kappa(u: &GridFunction, s: f64, beta: f64) -> f64 {
    let c = 1.0 / (2.0 * s * beta);
    let lx = u.x_end();
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for i in 0..u.n() {
        let x = u.x(i);
        if x >= 3.0 && x <= 0.5 * lx {
            pts.push((x, u.samples[i] - 1.0 + c * x.powf(-2.0 * s)));
        }
    }
    let mut best: (usize, usize) = (0, 0);
    let mut start = 0;
    for k in 1..=pts.len() {
        if k == pts.len() || pts[k].1.signum() != pts[start].1.signum() || pts[k].1 == 0.0 {
            if k - start > best.1 - best.0 {
                best = (start, k);
            }
            start = k;
        }
    }
    let seg = &pts[best.0..best.1];
    if seg.len() < 5 {
        return f64::NAN;
    }
    let lx: Vec<f64> = seg.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = seg.iter().map(|p| p.1.abs().ln()).collect();
    -fit_line(&lx, &ly).slope
}

/// Solves the corrector equation by a bordered dense linear solve; the
/// multiplier on `u'` enforces `⟨ψ, u'⟩ = 0` and absorbs the discrete
/// solvability defect.
pub fn solve_corrector(layer: &LayerProfile, tol: f64) -> Result<Corrector> {
    if !(layer.residual.is_finite()) {
        return Err(Error::PreconditionViolated("layer not converged".into()));
    }
    let s = layer.s;
    let p = &layer.potential;
    let beta = layer.beta;
    let eta = 1.0 / (layer.gamma * beta);
    let u = &layer.u;
    let n = u.n();
    let dx = u.dx;
    let up = &layer.uprime.samples;
    let mut psi = GridFunction::new(
        u.x0,
        dx,
        vec![0.0; n],
        TailModel::algebraic(0.0, 0.0, 2.0 * s, 0.0, 0.0, 0.0),
    )?;
    let op = FracOperator::new(&psi, s, &layer.quad)?;
    let coef: Vec<f64> = u.samples.iter().map(|v| p.d2w(*v)).collect();
    let rhs: Vec<f64> = (0..n).map(|i| up[i] + eta * (coef[i] - beta)).collect();

    let jac = dense_linearization(&op, &psi, &coef);
    let mut a = DMatrix::<f64>::zeros(n + 1, n + 1);
    a.view_mut((0, 0), (n, n)).copy_from(&jac);
    for i in 0..n {
        a[(i, n)] = up[i];
        a[(n, i)] = up[i] * dx;
    }
    let mut b = DVector::<f64>::zeros(n + 1);
    for i in 0..n {
        b[i] = rhs[i];
    }
    let lu = a.lu();
    let mut sol = lu
        .solve(&b)
        .ok_or_else(|| Error::SolverDiverged("singular corrector system".into()))?;
    let mut res = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..5 {
        for i in 0..n {
            psi.samples[i] = sol[i];
        }
        psi.fit_tails(TAIL_FIT_FRACTION);
        op.apply_into(&psi.samples, &psi.tail, &mut res);
        let lam = sol[n];
        let mut r = DVector::<f64>::zeros(n + 1);
        for i in 0..n {
            res[i] -= coef[i] * psi.samples[i] + rhs[i];
            r[i] = -(res[i] + lam * up[i]);
        }
        residual = sup(r.as_slice());
        if sup(r.as_slice()) <= 1e-3 * tol {
            break;
        }
        let corr = lu
            .solve(&r)
            .ok_or_else(|| Error::SolverDiverged("singular corrector system".into()))?;
        sol += corr;
    }
    if !(residual <= tol) {
        return Err(Error::NoConvergence(format!(
            "corrector residual {residual:e} exceeds tolerance {tol:e}"
        )));
    }
    let dpsi = derivative_samples(&psi);
    let mut bound: f64 = 0.0;
    for i in 0..n {
        let x = psi.x(i);
        bound = bound.max(dpsi[i].abs() * (1.0 + x.abs().powf(1.0 + 2.0 * s)));
    }
    let two_s = 2.0 * s;
    let dtail = TailModel::algebraic(
        0.0,
        0.0,
        1.0 + two_s,
        two_s * psi.tail.left_coeff,
        -two_s * psi.tail.right_coeff,
        0.0,
    );
    let psiprime = GridFunction::new(psi.x0, dx, dpsi, dtail)?;
    Ok(Corrector {
        psi,
        psiprime,
        eta,
        psiprime_bound: bound,
        residual,
        solvability_defect: sol[n],
    })
}
