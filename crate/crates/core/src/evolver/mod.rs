//! Time integration of the scaled equation
//!
//! ```text
//! ε ∂_t v = I_s v − W'(v)/ε^{2s} + σ(t, x)
//! ```
//!
//! on a truncated window whose exterior is the algebraic tail model. The
//! fractional term and the stress are explicit, the reaction is implicit and
//! solved pointwise by scalar Newton. With the nonnegative-weight quadrature
//! and `dt·diag/ε ≤ 1`, `dt/ε^{2s+1}·max|W''| < 1` the update is monotone in
//! the data, which is what the comparison checks rely on.

pub(crate) mod barrier;

pub use barrier::{build_barrier, BarrierKind, BarrierSchedule, BarrierSpec};

use serde::Serialize;

use crate::error::{check_order, Error, Result};
use crate::fracop::{FracOperator, GridFunction, QuadratureConfig, QuadratureOrder, QuadratureOverrides, TailModel};
use crate::layer::LayerProfile;
use crate::particles::StressModel;
use crate::potential::PeriodicPotential;

/// Discretization controls for PDE runs.
#[derive(Debug, Clone, Serialize)]
pub struct PdeConfig {
    /// Grid spacing in units of ε.
    pub dx_rel: f64,
    /// Window padding beyond the outermost centers.
    pub margin: f64,
    /// Fraction of the monotonicity limit `ε/diag` used as time step.
    pub dt_safety: f64,
    /// Step cap `dt_reaction·ε^{2s+1}/β`.
    pub dt_reaction: f64,
    pub tail_fraction: f64,
    pub newton_tol: f64,
    pub max_halvings: usize,
    pub order: QuadratureOrder,
    pub quadrature: QuadratureOverrides,
}

impl Default for PdeConfig {
    fn default() -> Self {
        PdeConfig {
            dx_rel: 0.1,
            margin: 20.0,
            dt_safety: 0.9,
            dt_reaction: 0.1,
            tail_fraction: 0.1,
            newton_tol: 1e-12,
            max_halvings: 8,
            order: QuadratureOrder::Monotone,
            quadrature: QuadratureOverrides::default(),
        }
    }
}

impl PdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dx_rel > 0.0 && self.dx_rel <= 0.125) {
            return Err(Error::InvalidParameter(format!(
                "dx must resolve ε: dx_rel = {} exceeds 1/8",
                self.dx_rel
            )));
        }
        if !(self.margin > 0.0 && self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            return Err(Error::InvalidParameter("margin > 0 and dt_safety in (0, 1] required".into()));
        }
        if !(self.dt_reaction > 0.0 && self.tail_fraction > 0.0 && self.tail_fraction < 0.5) {
            return Err(Error::InvalidParameter("dt_reaction > 0, tail_fraction in (0, ½) required".into()));
        }
        Ok(())
    }
}

/// Centers, orientations and scale of a superposition datum.
#[derive(Debug, Clone, Serialize)]
pub struct InitialDatumSpec {
    pub centers: Vec<f64>,
    pub orientations: Vec<i8>,
    pub epsilon: f64,
}

impl InitialDatumSpec {
    pub fn new(centers: Vec<f64>, orientations: Vec<i8>, epsilon: f64) -> Result<Self> {
        if centers.is_empty() || centers.len() != orientations.len() {
            return Err(Error::ShapeMismatch("centers and orientations must match and be nonempty".into()));
        }
        if centers.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("centers must be strictly increasing".into()));
        }
        if orientations.iter().any(|z| z.abs() != 1) {
            return Err(Error::InvalidParameter("orientations must be ±1".into()));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        Ok(InitialDatumSpec { centers, orientations, epsilon })
    }

    pub fn n(&self) -> usize {
        self.centers.len()
    }

    /// Number of positively oriented layers.
    pub fn k(&self) -> usize {
        self.orientations.iter().filter(|z| **z > 0).count()
    }

    /// Far-field values `(0, 2K − N)` for zero stress.
    pub fn limits(&self) -> (f64, f64) {
        (0.0, 2.0 * self.k() as f64 - self.n() as f64)
    }
}

#[derive(Debug, Clone)]
pub struct PDEState {
    pub epsilon: f64,
    pub t: f64,
    pub v: GridFunction,
}

fn stress_far(stress: &StressModel, t: f64, x: f64) -> f64 {
    stress.eval(t, x)
}

/// Evaluates `Σ u(ζ_i(x − x_i)/ε)` minus the number of negative layers.
pub(crate) fn superposition(layer: &LayerProfile, centers: &[f64], zeta: &[i8], eps: f64, x: f64) -> f64 {
    let mut v = 0.0;
    for (c, z) in centers.iter().zip(zeta) {
        v += layer.value(*z as f64 * (x - c) / eps);
    }
    v - zeta.iter().filter(|z| **z < 0).count() as f64
}

/// Builds `v⁰ = ε^{2s}σ(0,·)/β + Σ u(ζ_i(x − x_i⁰)/ε) − (N − K)` on the window
/// `[min center − margin, max center + margin]` with spacing `dx_rel·ε`.
pub fn build_initial_datum(
    spec: &InitialDatumSpec,
    layer: &LayerProfile,
    stress: &StressModel,
    cfg: &PdeConfig,
) -> Result<GridFunction> {
    cfg.validate()?;
    let eps = spec.epsilon;
    let s = layer.s;
    let dx = cfg.dx_rel * eps;
    let a = spec.centers[0] - cfg.margin;
    let b = spec.centers[spec.n() - 1] + cfg.margin;
    let n = ((b - a) / dx).round() as usize + 1;
    let scale = eps.powf(2.0 * s) / layer.beta;
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let x = a + i as f64 * dx;
            scale * stress.eval(0.0, x) + superposition(layer, &spec.centers, &spec.orientations, eps, x)
        })
        .collect();
    let (l0, l1) = spec.limits();
    let (l0, l1) = (
        l0 + scale * stress_far(stress, 0.0, a),
        l1 + scale * stress_far(stress, 0.0, a + (n - 1) as f64 * dx),
    );
    let coeff: f64 = spec.orientations.iter().map(|z| *z as f64).sum::<f64>() * layer.tail_coeff * eps.powf(2.0 * s);
    let centre = a + 0.5 * (n - 1) as f64 * dx;
    let tail = TailModel::algebraic(l0, l1, 2.0 * s, coeff, coeff, centre);
    let mut v = GridFunction::new(a, dx, samples, tail)?;
    v.fit_tails(cfg.tail_fraction);
    Ok(v)
}

/// A half-integer level crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub x: f64,
    pub level: f64,
    pub up: bool,
}

/// All crossings of half-integer levels between adjacent nodes, located by
/// linear interpolation, in increasing `x`.
pub fn crossings(v: &GridFunction) -> Vec<Crossing> {
    let mut out = Vec::new();
    for i in 0..v.n() - 1 {
        let (a, b) = (v.samples[i], v.samples[i + 1]);
        if a == b {
            continue;
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let mut k = (lo - 0.5).floor();
        let mut levels = Vec::new();
        loop {
            let l = k + 0.5;
            if l > hi {
                break;
            }
            if l > lo {
                levels.push(l);
            }
            k += 1.0;
        }
        if a > b {
            levels.reverse();
        }
        for l in levels {
            out.push(Crossing {
                x: v.x(i) + v.dx * (l - a) / (b - a),
                level: l,
                up: b > a,
            });
        }
    }
    out
}

/// Scalar implicit reaction step: solves `w + a·W'(w) = rhs` from `guess`.
fn reaction_solve(rhs: f64, guess: f64, a: f64, p: &PeriodicPotential, tol: f64) -> Option<f64> {
    let mut w = guess;
    for _ in 0..40 {
        let f = w + a * p.dw(w) - rhs;
        if f.abs() <= tol {
            return Some(w);
        }
        let d = 1.0 + a * p.d2w(w);
        if !(d > 0.0) {
            return None;
        }
        w -= f / d;
    }
    let f = w + a * p.dw(w) - rhs;
    (f.abs() <= tol).then_some(w)
}

/// Precomputed stepper for a fixed window.
pub struct Evolver {
    op: FracOperator,
    potential: PeriodicPotential,
    stress: StressModel,
    s: f64,
    epsilon: f64,
    cfg: PdeConfig,
    dt_max: f64,
    iv: Vec<f64>,
    scratch: Vec<f64>,
}

impl std::fmt::Debug for Evolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Evolver")
            .field("s", &self.s)
            .field("epsilon", &self.epsilon)
            .field("dt_max", &self.dt_max)
            .finish()
    }
}

/// Per-step observation.
#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub sup_abs: f64,
    /// `max |v − round(v)|` over the window.
    pub plateau_dev: f64,
    pub crossings: Vec<Crossing>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default)]
pub struct EvolveOptions {
    pub sample_times: Vec<f64>,
    /// Record crossing tracks every this many steps (0 disables).
    pub track_every: usize,
    pub keep_fields: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrackPoint {
    pub t: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolveRecord {
    pub snapshots: Vec<Snapshot>,
    pub tracks: Vec<TrackPoint>,
    pub steps: usize,
    pub dt: f64,
    pub x0: f64,
    pub dx: f64,
}

pub fn snapshot(state: &PDEState, keep_field: bool) -> Snapshot {
    let v = &state.v.samples;
    Snapshot {
        t: state.t,
        sup_abs: v.iter().fold(0.0, |m, x| m.max(x.abs())),
        plateau_dev: v.iter().fold(0.0, |m, x| m.max((x - x.round()).abs())),
        crossings: crossings(&state.v),
        field: keep_field.then(|| v.clone()),
    }
}

impl Evolver {
    pub fn new(
        state: &PDEState,
        p: &PeriodicPotential,
        s: f64,
        stress: &StressModel,
        cfg: &PdeConfig,
    ) -> Result<Self> {
        check_order(s)?;
        cfg.validate()?;
        let eps = state.epsilon;
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        let quad = cfg.quadrature.apply(QuadratureConfig::for_grid(&state.v)).with_order(cfg.order);
        let op = FracOperator::new(&state.v, s, &quad)?;
        let curv = p.beta.abs().max(1e-300);
        let dt_max = (cfg.dt_reaction * eps.powf(2.0 * s + 1.0) / curv)
            .min(cfg.dt_safety * eps / op.diagonal_bound());
        let n = state.v.n();
        Ok(Evolver {
            op,
            potential: p.clone(),
            stress: stress.clone(),
            s,
            epsilon: eps,
            cfg: cfg.clone(),
            dt_max,
            iv: vec![0.0; n],
            scratch: vec![0.0; n],
        })
    }

    /// Largest step for which the scheme is monotone.
    pub fn dt_max(&self) -> f64 {
        self.dt_max
    }

    /// One IMEX step of size `dt`, halving internally on Newton failure.
    pub fn step(&mut self, state: &mut PDEState, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let mut h = dt;
        let mut done = 0.0;
        let mut halvings = 0;
        while done < dt {
            h = h.min(dt - done);
            if self.try_step(state, h) {
                done += h;
            } else {
                halvings += 1;
                if halvings > self.cfg.max_halvings {
                    return Err(Error::StepFailure(format!(
                        "reaction Newton failed at t = {} after {halvings} halvings",
                        state.t
                    )));
                }
                h *= 0.5;
            }
        }
        Ok(())
    }

    fn try_step(&mut self, state: &mut PDEState, dt: f64) -> bool {
        let eps = self.epsilon;
        let v = &mut state.v;
        self.op.apply_into(&v.samples, &v.tail, &mut self.iv);
        let a = dt / eps.powf(2.0 * self.s + 1.0);
        let b = dt / eps;
        let t = state.t;
        let tol = self.cfg.newton_tol;
        for i in 0..v.n() {
            let x = v.x0 + i as f64 * v.dx;
            let rhs = v.samples[i] + b * (self.iv[i] + self.stress.eval(t, x));
            match reaction_solve(rhs, v.samples[i], a, &self.potential, tol) {
                Some(w) => self.scratch[i] = w,
                None => return false,
            }
        }
        let (xa, xb) = (v.x0, v.x_end());
        let (l0, l1) = (v.tail.left_limit, v.tail.right_limit);
        let nl0 = reaction_solve(l0 + b * self.stress.eval(t, xa), l0, a, &self.potential, tol);
        let nl1 = reaction_solve(l1 + b * self.stress.eval(t, xb), l1, a, &self.potential, tol);
        let (Some(nl0), Some(nl1)) = (nl0, nl1) else {
            return false;
        };
        v.samples.copy_from_slice(&self.scratch);
        v.tail.left_limit = nl0;
        v.tail.right_limit = nl1;
        v.fit_tails(self.cfg.tail_fraction);
        state.t += dt;
        true
    }

    /// Steps to `t_end`, landing exactly on every sample time; `observe` sees
    /// the state after each step and stops the run by returning `false`.
    pub fn evolve_with<F>(
        &mut self,
        state: &mut PDEState,
        t_end: f64,
        opts: &EvolveOptions,
        mut observe: F,
    ) -> Result<EvolveRecord>
    where
        F: FnMut(&PDEState) -> bool,
    {
        let mut stops: Vec<f64> = opts
            .sample_times
            .iter()
            .copied()
            .filter(|t| *t > state.t && *t < t_end)
            .collect();
        stops.push(t_end);
        stops.sort_by(|a, b| a.partial_cmp(b).unwrap());
        stops.dedup();
        let mut rec = EvolveRecord {
            snapshots: Vec::new(),
            tracks: Vec::new(),
            steps: 0,
            dt: self.dt_max,
            x0: state.v.x0,
            dx: state.v.dx,
        };
        if opts.sample_times.contains(&state.t) {
            rec.snapshots.push(snapshot(state, opts.keep_fields));
        }
        if opts.track_every > 0 {
            rec.tracks.push(track_point(state));
        }
        let mut next = 0;
        while next < stops.len() {
            let target = stops[next];
            let remaining = target - state.t;
            let hit = remaining <= self.dt_max * (1.0 + 1e-9);
            let dt = if hit { remaining } else { self.dt_max };
            if dt > 0.0 {
                self.step(state, dt)?;
            }
            if hit {
                state.t = target;
                next += 1;
                if target < t_end || opts.sample_times.contains(&target) {
                    rec.snapshots.push(snapshot(state, opts.keep_fields));
                }
            }
            rec.steps += 1;
            if opts.track_every > 0 && rec.steps.is_multiple_of(opts.track_every) {
                rec.tracks.push(track_point(state));
            }
            if !state.v.samples.iter().all(|x| x.is_finite()) {
                return Err(Error::StepFailure(format!("non-finite field at t = {}", state.t)));
            }
            if !observe(state) {
                break;
            }
        }
        Ok(rec)
    }

    pub fn evolve(&mut self, state: &mut PDEState, t_end: f64, opts: &EvolveOptions) -> Result<EvolveRecord> {
        self.evolve_with(state, t_end, opts, |_| true)
    }
}

fn track_point(state: &PDEState) -> TrackPoint {
    TrackPoint {
        t: state.t,
        x: crossings(&state.v).iter().map(|c| c.x).collect(),
    }
}

/// Single step from a fresh operator plan.
pub fn step(
    state: &PDEState,
    dt: f64,
    p: &PeriodicPotential,
    s: f64,
    stress: &StressModel,
    cfg: &PdeConfig,
) -> Result<PDEState> {
    let mut ev = Evolver::new(state, p, s, stress, cfg)?;
    let mut next = state.clone();
    ev.step(&mut next, dt)?;
    Ok(next)
}

/// Evolves with a fresh operator plan.
pub fn evolve(
    state: &mut PDEState,
    t_end: f64,
    p: &PeriodicPotential,
    s: f64,
    stress: &StressModel,
    cfg: &PdeConfig,
    opts: &EvolveOptions,
) -> Result<EvolveRecord> {
    let mut ev = Evolver::new(state, p, s, stress, cfg)?;
    ev.evolve(state, t_end, opts)
}
