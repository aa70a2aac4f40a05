//! Post-processing: decay-law fits, PDE versus ODE agreement, discrete
//! supersolution residuals of the barriers, and a multistart search for
//! equilibria of the particle system.

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolver::{barrier::barrier_field, BarrierSpec, TrackPoint};
use crate::fracop::{FracOperator, QuadratureConfig};
use crate::layer::{Corrector, LayerProfile};
use crate::particles::{ode_rhs, ParticleSystem, StressModel, TrajectoryRecord};
use crate::potential::PeriodicPotential;
use crate::quadrature::fit_line;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayKind {
    Exponential,
    Power,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub kind: DecayKind,
    /// Decay rate `λ` in `A e^{−λt}` or exponent `q` in `A (1+t)^{−q}`.
    pub rate: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

fn check_series(times: &[f64], sups: &[f64]) -> Result<()> {
    if times.len() != sups.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} times but {} values",
            times.len(),
            sups.len()
        )));
    }
    if times.len() < 10 {
        return Err(Error::InsufficientData(format!("need ≥ 10 samples, got {}", times.len())));
    }
    if let Some(v) = sups.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidData(format!("samples must be positive and finite, found {v}")));
    }
    Ok(())
}

fn decay_fit(kind: DecayKind, x: &[f64], times: &[f64], sups: &[f64]) -> DecayFit {
    let ly: Vec<f64> = sups.iter().map(|v| v.ln()).collect();
    let fit = fit_line(x, &ly);
    let lo = times.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    DecayFit {
        kind,
        rate: -fit.slope,
        amplitude: fit.intercept.exp(),
        r_squared: fit.r_squared,
        window: (lo, hi),
        samples: times.len(),
    }
}

/// Least squares of `log v` against `t`.
pub fn fit_exponential(times: &[f64], sups: &[f64]) -> Result<DecayFit> {
    check_series(times, sups)?;
    Ok(decay_fit(DecayKind::Exponential, times, times, sups))
}

/// Least squares of `log v` against `log(1+t)`.
pub fn fit_power(times: &[f64], sups: &[f64]) -> Result<DecayFit> {
    check_series(times, sups)?;
    if times.iter().any(|t| *t <= -1.0) {
        return Err(Error::InvalidData("times must exceed −1".into()));
    }
    let lx: Vec<f64> = times.iter().map(|t| (1.0 + t).ln()).collect();
    Ok(decay_fit(DecayKind::Power, &lx, times, sups))
}

/// Per-particle `sup_t |crossing_i(t) − x_i(t)|` over track points with `t ≤ t_max`.
pub fn compare_pde_ode(tracks: &[TrackPoint], record: &TrajectoryRecord, t_max: f64) -> Result<Vec<f64>> {
    let n = record.positions[0].len();
    let mut dev = vec![0.0_f64; n];
    let mut used = 0;
    for tp in tracks.iter().filter(|tp| tp.t <= t_max) {
        if tp.x.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{} crossings at t = {} but {n} particles",
                tp.x.len(),
                tp.t
            )));
        }
        let x = record.at(tp.t)?;
        for i in 0..n {
            dev[i] = dev[i].max((tp.x[i] - x[i]).abs());
        }
        used += 1;
    }
    if used == 0 {
        return Err(Error::InsufficientData(format!("no track points with t ≤ {t_max}")));
    }
    Ok(dev)
}

/// Scenario classification with the measured asymptotic quantities.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticReport {
    pub scenario: String,
    pub l: i64,
    pub m: i64,
    /// Time of the last annihilation.
    pub relaxation_time: f64,
    /// Residual amplitude at the last annihilation.
    pub residual_amplitude: f64,
    pub drift_alpha: Option<f64>,
    pub center_bracket: Option<(f64, f64)>,
    pub decay: Option<DecayFit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub min: f64,
    pub argmin_t: f64,
    pub argmin_x: f64,
    pub samples: usize,
    pub min_gap: f64,
}

/// Minimum over the sample set of
/// `ε∂_t b − I_s b + W'(b)/ε^{2s} − σ` for the barrier `b`, with the time
/// derivative by centered differences of step `1e-4·ε^{2s+1}` and the
/// operator by the high-order quadrature on the barrier grid. Spatial samples
/// are snapped to the nearest grid node.
pub fn supersolution_residual(
    barrier: &BarrierSpec,
    layer: &LayerProfile,
    corrector: &Corrector,
    p: &PeriodicPotential,
    stress: &StressModel,
    times: &[f64],
    xs: &[f64],
) -> Result<ResidualReport> {
    if times.is_empty() || xs.is_empty() {
        return Err(Error::InsufficientData("empty sample set".into()));
    }
    let s = layer.s;
    let eps = barrier.epsilon;
    let e2s = eps.powf(2.0 * s);
    let h = 1e-4 * eps.powf(2.0 * s + 1.0);
    let floor = barrier.schedule.theta_eps;
    let mut min_gap = f64::INFINITY;
    for t in times {
        let g = barrier.min_gap(*t)?;
        if barrier.system.n() > 1 && g < floor {
            return Err(Error::PreconditionViolated(format!(
                "gap {g} below θ_ε = {floor} at t = {t}"
            )));
        }
        min_gap = min_gap.min(g);
    }
    let mut idx: Vec<usize> = xs
        .iter()
        .map(|x| (((x - barrier.x0) / barrier.dx).round().max(0.0) as usize).min(barrier.n - 1))
        .collect();
    idx.sort_unstable();
    idx.dedup();

    let mut op: Option<FracOperator> = None;
    let mut best = ResidualReport {
        min: f64::INFINITY,
        argmin_t: f64::NAN,
        argmin_x: f64::NAN,
        samples: 0,
        min_gap,
    };
    for &t in times {
        let (x, c) = barrier.centers(t)?;
        let b = barrier_field(barrier, layer, corrector, t, &x, &c)?;
        let (xp, cp) = barrier.centers_shifted(t, &x, h)?;
        let (xm, cm) = barrier.centers_shifted(t, &x, -h)?;
        let bp = barrier_field(barrier, layer, corrector, t + h, &xp, &cp)?;
        let bm = barrier_field(barrier, layer, corrector, t - h, &xm, &cm)?;
        if op.is_none() {
            op = Some(FracOperator::new(&b, s, &QuadratureConfig::for_grid(&b))?);
        }
        let lap = op.as_ref().unwrap().apply(&b)?;
        for &i in &idx {
            let xi = b.x(i);
            let dt = (bp.samples[i] - bm.samples[i]) / (2.0 * h);
            let r = eps * dt - lap.samples[i] + p.dw(b.samples[i]) / e2s - stress.eval(t, xi);
            best.samples += 1;
            if r < best.min {
                best.min = r;
                best.argmin_t = t;
                best.argmin_x = xi;
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize)]
pub struct StationaryReport {
    pub orientations: Vec<i8>,
    pub best_residual: f64,
    pub best_gaps: Vec<f64>,
    pub threshold: f64,
    pub found_below_threshold: bool,
    pub starts: usize,
}

pub const STATIONARY_THRESHOLD: f64 = 1e-6;

struct GapCost<'a> {
    sys: &'a ParticleSystem,
    lo: f64,
    hi: f64,
    bounds: (f64, f64),
}

impl GapCost<'_> {
    fn gaps(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .map(|l| l.clamp(self.lo, self.hi).exp().clamp(self.bounds.0, self.bounds.1))
            .collect()
    }

    fn value(&self, p: &[f64]) -> f64 {
        let g = self.gaps(p);
        let mut x = vec![0.0; g.len() + 1];
        for (i, d) in g.iter().enumerate() {
            x[i + 1] = x[i] + d;
        }
        match ode_rhs(self.sys, 0.0, &x) {
            Ok(v) => v.iter().map(|a| a * a).sum(),
            Err(_) => f64::INFINITY,
        }
    }
}

impl CostFunction for GapCost<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.value(p))
    }
}

/// Multistart Nelder–Mead on `‖ẋ‖²` over log-gaps clamped to `gap_bounds`,
/// with zero stress. Start `k` is seeded by `seed + k`.
pub fn stationary_search(
    orientations: &[i8],
    s: f64,
    gamma: f64,
    n_starts: usize,
    gap_bounds: (f64, f64),
    seed: u64,
) -> Result<StationaryReport> {
    let n = orientations.len();
    if n < 2 {
        return Err(Error::InvalidParameter("stationary search needs N ≥ 2".into()));
    }
    let (gmin, gmax) = gap_bounds;
    if !(gmin > 0.0 && gmax > gmin) {
        return Err(Error::InvalidParameter(format!("invalid gap bounds [{gmin}, {gmax}]")));
    }
    if n_starts == 0 {
        return Err(Error::InvalidParameter("need at least one start".into()));
    }
    let positions: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let sys = ParticleSystem::new(positions, orientations.to_vec(), s, gamma)?;
    let (lo, hi) = (gmin.ln(), gmax.ln());
    let dim = n - 1;
    let results: Vec<(f64, Vec<f64>)> = (0..n_starts)
        .into_par_iter()
        .map(|k| {
            let cost = GapCost { sys: &sys, lo, hi, bounds: gap_bounds };
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let start: Vec<f64> = (0..dim).map(|_| rng.gen_range(lo..hi)).collect();
            let step = 0.1 * (hi - lo);
            let mut simplex = vec![start.clone()];
            for j in 0..dim {
                let mut v = start.clone();
                v[j] = if v[j] + step <= hi { v[j] + step } else { v[j] - step };
                simplex.push(v);
            }
            let start_val = cost.value(&start);
            let solved = NelderMead::new(simplex)
                .with_sd_tolerance(1e-14)
                .ok()
                .and_then(|nm| {
                    Executor::new(GapCost { sys: &sys, lo, hi, bounds: gap_bounds }, nm)
                        .configure(|st| st.max_iters(4000))
                        .run()
                        .ok()
                })
                .and_then(|res| {
                    let st = res.state();
                    st.best_param.clone().map(|p| (st.best_cost, p))
                });
            let (val, p) = match solved {
                Some((v, p)) if v <= start_val => (v, p),
                _ => (start_val, start),
            };
            (val, cost.gaps(&p))
        })
        .collect();
    let (best_residual, best_gaps) = results
        .into_iter()
        .fold((f64::INFINITY, Vec::new()), |acc, r| if r.0 < acc.0 { r } else { acc });
    Ok(StationaryReport {
        orientations: orientations.to_vec(),
        best_residual,
        best_gaps,
        threshold: STATIONARY_THRESHOLD,
        found_below_threshold: best_residual < STATIONARY_THRESHOLD,
        starts: n_starts,
    })
}

/// Long-time regime of an orientation pattern, decided by `l = 2K − N`.
pub fn classify(orientations: &[i8]) -> (&'static str, i64) {
    let k = orientations.iter().filter(|z| **z > 0).count() as i64;
    let l = 2 * k - orientations.len() as i64;
    let kind = match l.rem_euclid(2) {
        _ if l == 0 => "balanced",
        0 => "unbalanced-even",
        _ => "unbalanced-odd",
    };
    (kind, l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_synthetic_laws() {
        let t: Vec<f64> = (0..20).map(|i| 2.0 * i as f64 / 19.0).collect();
        let v: Vec<f64> = t.iter().map(|t| 3.0 * (-2.0 * t).exp()).collect();
        let f = fit_exponential(&t, &v).unwrap();
        assert!((f.rate - 2.0).abs() < 1e-10 && f.r_squared >= 1.0 - 1e-10);
        assert!((f.amplitude - 3.0).abs() < 1e-10);
        let v: Vec<f64> = t.iter().map(|t| 5.0 * (1.0 + t).powf(-0.5)).collect();
        let f = fit_power(&t, &v).unwrap();
        assert!((f.rate - 0.5).abs() < 1e-10);
        let c = vec![0.7; 20];
        assert!(fit_exponential(&t, &c).unwrap().rate.abs() < 1e-10);
    }

    #[test]
    fn bad_series() {
        let t: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let mut v = vec![1.0; 12];
        v[3] = 0.0;
        assert!(matches!(fit_exponential(&t, &v), Err(Error::InvalidData(_))));
        assert!(matches!(fit_power(&t[..5], &v[..5]), Err(Error::InsufficientData(_))));
        assert!(matches!(fit_power(&t, &v[..11]), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn classification() {
        assert_eq!(classify(&[1, -1]), ("balanced", 0));
        assert_eq!(classify(&[1, 1, -1]), ("unbalanced-odd", 1));
        assert_eq!(classify(&[1, 1, -1, -1]), ("balanced", 0));
        assert_eq!(classify(&[1, -1, 1]), ("unbalanced-odd", 1));
        assert_eq!(classify(&[1, 1]), ("unbalanced-even", 2));
    }
}
