//! Explicit barrier assemblies built from the layer, the corrector and a set
//! of moving centers.
//!
//! All three kinds share the form
//!
//! ```text
//! ε^{2s}σ̄(t,x) + Σ u(ζ_i(x − x_i(t))/ε) − #{ζ_i < 0} − Σ ζ_i ε^{2s} c_i(t) ψ(ζ_i(x − x_i(t))/ε) + r(t)
//! ```
//!
//! and differ in where the centers, speeds, `σ̄` and `r` come from.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fracop::{GridFunction, TailModel};
use crate::layer::{Corrector, LayerProfile};
use crate::particles::{ode_rhs, ParticleSystem, TrajectoryRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BarrierKind {
    /// Centers and speeds of the δ-perturbed system, `σ̄ = (σ + δ)/β`.
    VBar,
    /// Surviving layers drifting apart exponentially plus `ρ_ε e^{−μt/ε^{2s+1}}`.
    HHat,
    /// Same-orientation system with drift `δ(t)`, `σ̄ = δ'(t)/β`.
    WBar,
}

/// Explicit choices for the small parameters of the barrier constructions.
#[derive(Debug, Clone, Serialize)]
pub struct BarrierSchedule {
    pub theta_eps: f64,
    pub delta_eps: f64,
    pub rho_eps: f64,
    pub k_eps: f64,
    pub mu: f64,
    pub tau_eps: f64,
    pub t_eps: f64,
    pub l_factor: f64,
    /// Exponent `α ∈ (s/(2s+1), ½)` of the near-layer region in the `ĥ` estimate.
    pub alpha: f64,
    /// Exponent `γ'` fixing the target amplitude `ε^{2s+γ'}` at `τ_ε`.
    pub gamma_prime: f64,
    /// Ratio `C/c` of the unknown estimate constants in `K_ε μ`.
    pub constant_ratio: f64,
}

impl BarrierSchedule {
    /// `θ_ε = ε^{2/5}`, `δ_ε = ε^{s/2}`, `ρ_ε = ε^{2s}θ_ε^{−2s}`, `μ = β/4`,
    /// `α` and `γ'` at the midpoints of their admissible ranges, `L = 2`.
    pub fn default_for(eps: f64, s: f64, beta: f64, gamma: f64, sup_sigma: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {eps}")));
        }
        let theta = eps.powf(0.4);
        let delta = eps.powf(0.5 * s);
        let rho = eps.powf(2.0 * s) * theta.powf(-2.0 * s);
        let mu = 0.25 * beta;
        let alpha = 0.5 * (s / (2.0 * s + 1.0) + 0.5);
        let gp = 0.5 * (4.0 * s * (1.0 - alpha) - 2.0 * s).min(alpha * (2.0 * s + 1.0) - s);
        let ratio = 1.0;
        let k_eps = ratio * eps.powf(alpha * (2.0 * s + 1.0) - 2.0 * s - gp) / mu;
        let tau = eps.powf(2.0 * s + 1.0) / mu * (rho * eps.powf(-(2.0 * s + gp))).ln();
        let l = 2.0;
        let lt = (l + 2.0_f64).powf(2.0 * s);
        let den = 1.0 - 2.0 * s * lt * theta.powf(2.0 * s) * (sup_sigma + delta);
        let t_eps = if den > 0.0 {
            4.0 * s * lt * theta.powf(2.0 * s + 1.0) / (gamma * den)
        } else {
            f64::INFINITY
        };
        Ok(BarrierSchedule {
            theta_eps: theta,
            delta_eps: delta,
            rho_eps: rho,
            k_eps,
            mu,
            tau_eps: tau,
            t_eps,
            l_factor: l,
            alpha,
            gamma_prime: gp,
            constant_ratio: ratio,
        })
    }
}

/// Everything needed to evaluate a barrier at any time.
#[derive(Debug, Clone)]
pub struct BarrierSpec {
    pub kind: BarrierKind,
    pub epsilon: f64,
    /// Drives the centers: its trajectory for `VBar`/`WBar`, its nominal
    /// positions as `x_i^ε` for `HHat`.
    pub system: ParticleSystem,
    pub trajectory: Option<TrajectoryRecord>,
    pub schedule: BarrierSchedule,
    pub x0: f64,
    pub dx: f64,
    pub n: usize,
}

impl BarrierSpec {
    /// Window `[min − margin, max + margin]` around the initial centers with spacing `dx`.
    pub fn new(
        kind: BarrierKind,
        epsilon: f64,
        system: ParticleSystem,
        trajectory: Option<TrajectoryRecord>,
        schedule: BarrierSchedule,
        margin: f64,
        dx: f64,
    ) -> Result<Self> {
        if matches!(kind, BarrierKind::VBar | BarrierKind::WBar) && trajectory.is_none() {
            return Err(Error::InvalidParameter(format!("{kind:?} barrier needs a trajectory")));
        }
        if kind == BarrierKind::WBar && !system.all_same_orientation() {
            return Err(Error::InvalidParameter("WBar barrier needs equal orientations".into()));
        }
        if !(dx > 0.0 && margin > 0.0) {
            return Err(Error::InvalidParameter("dx and margin must be positive".into()));
        }
        let a = system.positions[0] - margin;
        let b = system.positions[system.n() - 1] + margin;
        let n = ((b - a) / dx).round() as usize + 1;
        Ok(BarrierSpec {
            kind,
            epsilon,
            system,
            trajectory,
            schedule,
            x0: a,
            dx,
            n,
        })
    }

    fn decay(&self, t: f64, s: f64) -> f64 {
        (-self.schedule.mu * t / self.epsilon.powf(2.0 * s + 1.0)).exp()
    }

    /// Centers `x_i(t)` and speeds `c_i(t)`.
    pub fn centers(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        match self.kind {
            BarrierKind::HHat => {
                let s = self.system.s;
                let sc = &self.schedule;
                let e = self.decay(t, s);
                let rate = -sc.mu / self.epsilon.powf(2.0 * s + 1.0);
                let mut x = Vec::new();
                let mut c = Vec::new();
                for (p, z) in self.system.positions.iter().zip(&self.system.orientations) {
                    let z = *z as f64;
                    x.push(p + z * sc.k_eps * sc.rho_eps * (e - 1.0));
                    c.push(z * sc.k_eps * sc.rho_eps * rate * e);
                }
                Ok((x, c))
            }
            _ => {
                let rec = self.trajectory.as_ref().expect("checked in constructor");
                let x = rec.at(t)?;
                let c = ode_rhs(&self.system, t, &x)?;
                Ok((x, c))
            }
        }
    }

    /// Centers at `t + h` by one classical Runge–Kutta step from `(t, x)`.
    pub(crate) fn centers_shifted(&self, t: f64, x: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.kind == BarrierKind::HHat {
            return self.centers(t + h);
        }
        let f = |tt: f64, y: &[f64]| ode_rhs(&self.system, tt, y);
        let add = |y: &[f64], k: &[f64], a: f64| -> Vec<f64> { y.iter().zip(k).map(|(p, q)| p + a * q).collect() };
        let k1 = f(t, x)?;
        let k2 = f(t + 0.5 * h, &add(x, &k1, 0.5 * h))?;
        let k3 = f(t + 0.5 * h, &add(x, &k2, 0.5 * h))?;
        let k4 = f(t + h, &add(x, &k3, h))?;
        let y: Vec<f64> = (0..x.len())
            .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        let c = f(t + h, &y)?;
        Ok((y, c))
    }

    /// `σ̄(t, x)`.
    pub(crate) fn sigma_bar(&self, t: f64, x: f64, beta: f64) -> f64 {
        let sys = &self.system;
        match self.kind {
            BarrierKind::VBar => (sys.stress.eval(t, x) + sys.delta_const) / beta,
            BarrierKind::HHat => sys.stress.eval(t, x) / beta,
            BarrierKind::WBar => sys.delta_drift.as_ref().map_or(0.0, |d| (d.rate)(t)) / beta,
        }
    }

    pub(crate) fn offset(&self, t: f64) -> f64 {
        match self.kind {
            BarrierKind::HHat => self.schedule.rho_eps * self.decay(t, self.system.s),
            _ => 0.0,
        }
    }

    /// Smallest gap between adjacent centers at `t`.
    pub fn min_gap(&self, t: f64) -> Result<f64> {
        let (x, _) = self.centers(t)?;
        Ok(x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min))
    }
}

/// Barrier field on the barrier grid at time `t`.
pub fn build_barrier(spec: &BarrierSpec, layer: &LayerProfile, corrector: &Corrector, t: f64) -> Result<GridFunction> {
    if let Some(rec) = &spec.trajectory {
        let (lo, hi) = (rec.times[0], rec.t_last());
        if !(t >= lo && t <= hi) {
            return Err(Error::OutOfDomain(format!("t = {t} outside trajectory range [{lo}, {hi}]")));
        }
    }
    let (x, c) = spec.centers(t)?;
    barrier_field(spec, layer, corrector, t, &x, &c)
}

pub(crate) fn barrier_field(
    spec: &BarrierSpec,
    layer: &LayerProfile,
    corrector: &Corrector,
    t: f64,
    centers: &[f64],
    speeds: &[f64],
) -> Result<GridFunction> {
    let eps = spec.epsilon;
    let s = layer.s;
    let e2s = eps.powf(2.0 * s);
    let zeta = &spec.system.orientations;
    let with_corrector = spec.kind != BarrierKind::HHat;
    let extra = spec.offset(t);
    let nneg = zeta.iter().filter(|z| **z < 0).count() as f64;
    let eval = |xx: f64| -> f64 {
        let mut v = e2s * spec.sigma_bar(t, xx, layer.beta) - nneg + extra;
        for i in 0..centers.len() {
            let z = zeta[i] as f64;
            let xi = z * (xx - centers[i]) / eps;
            v += layer.value(xi);
            if with_corrector {
                v -= z * e2s * speeds[i] * corrector.value(xi);
            }
        }
        v
    };
    let samples: Vec<f64> = (0..spec.n).map(|i| eval(spec.x0 + i as f64 * spec.dx)).collect();
    let xe = spec.x0 + (spec.n - 1) as f64 * spec.dx;
    let kk = zeta.iter().filter(|z| **z > 0).count() as f64;
    let left = e2s * spec.sigma_bar(t, spec.x0, layer.beta) + extra;
    let right = e2s * spec.sigma_bar(t, xe, layer.beta) + extra + kk - nneg;
    let centre = 0.5 * (spec.x0 + xe);
    let tail = TailModel::algebraic(left, right, 2.0 * s, 0.0, 0.0, centre);
    let mut g = GridFunction::new(spec.x0, spec.dx, samples, tail)?;
    g.fit_tails(0.1);
    Ok(g)
}
