//! Signed interacting-particle systems
//!
//! ```text
//! ẋ_i = γ ( Σ_{j≠i} ζ_iζ_j (x_i − x_j) / (2s|x_i − x_j|^{1+2s}) − ζ_i σ(t, x_i) − ζ_i δ ) − δ_drift'(t)
//! ```
//!
//! integrated by an embedded Dormand–Prince 5(4) pair whose step is also capped
//! by the local collision time scale `(min gap)^{1+2s}·s/γ`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{check_order, Error, Result};
use crate::quadrature::fit_line;

type TimeSpaceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// External stress `σ(t, x)`.
#[derive(Clone)]
pub enum StressModel {
    Zero,
    Constant(f64),
    Analytic {
        name: String,
        sigma: TimeSpaceFn,
        /// Common bound on `|σ|`, `|σ_x|`, `|σ_t|`.
        bound: f64,
        holder_alpha: f64,
    },
}

impl fmt::Debug for StressModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StressModel::Zero => write!(f, "Zero"),
            StressModel::Constant(c) => write!(f, "Constant({c})"),
            StressModel::Analytic { name, bound, holder_alpha, .. } => write!(
                f,
                "Analytic {{ name: {name:?}, bound: {bound}, holder_alpha: {holder_alpha} }}"
            ),
        }
    }
}

impl StressModel {
    pub fn analytic<F>(name: &str, sigma: F, bound: f64, holder_alpha: f64, s: f64) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(Error::InvalidParameter(format!("stress bound must be finite, got {bound}")));
        }
        if !(holder_alpha > s && holder_alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "Hölder exponent {holder_alpha} must lie in (s, 1) = ({s}, 1)"
            )));
        }
        Ok(StressModel::Analytic {
            name: name.to_string(),
            sigma: Arc::new(sigma),
            bound,
            holder_alpha,
        })
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            StressModel::Zero => 0.0,
            StressModel::Constant(c) => *c,
            StressModel::Analytic { sigma, .. } => sigma(t, x),
        }
    }

    /// `sup|σ|` (the declared bound for analytic stresses).
    pub fn sup(&self) -> f64 {
        match self {
            StressModel::Zero => 0.0,
            StressModel::Constant(c) => c.abs(),
            StressModel::Analytic { bound, .. } => *bound,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, StressModel::Zero) || matches!(self, StressModel::Constant(c) if *c == 0.0)
    }
}

/// Time-dependent uniform drift `δ(t)` with its derivative.
#[derive(Clone)]
pub struct Drift {
    pub delta: TimeFn,
    pub rate: TimeFn,
}

impl fmt::Debug for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Drift {{ delta(0): {} }}", (self.delta)(0.0))
    }
}

impl Drift {
    pub fn new<D, R>(delta: D, rate: R) -> Self
    where
        D: Fn(f64) -> f64 + Send + Sync + 'static,
        R: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Drift {
            delta: Arc::new(delta),
            rate: Arc::new(rate),
        }
    }

    /// `δ(t) = a(1+t)^q`.
    pub fn power(a: f64, q: f64) -> Self {
        Drift::new(move |t| a * (1.0 + t).powf(q), move |t| a * q * (1.0 + t).powf(q - 1.0))
    }
}

/// How initial positions are derived from the nominal ones.
#[derive(Debug, Clone, PartialEq)]
pub enum ShiftRule {
    None,
    /// `x_i(0) = x_i⁰ − ζ_i δ`.
    MinusZetaDelta,
    Custom(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct ParticleSystem {
    pub positions: Vec<f64>,
    pub orientations: Vec<i8>,
    pub s: f64,
    pub gamma: f64,
    pub stress: StressModel,
    pub delta_const: f64,
    pub delta_drift: Option<Drift>,
    pub shift_rule: ShiftRule,
}

fn check_ordered(x: &[f64]) -> Result<()> {
    for w in x.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::SingularConfiguration(format!(
                "positions must be strictly increasing, found {} then {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

impl ParticleSystem {
    pub fn new(positions: Vec<f64>, orientations: Vec<i8>, s: f64, gamma: f64) -> Result<Self> {
        check_order(s)?;
        if positions.is_empty() {
            return Err(Error::InvalidParameter("need at least one particle".into()));
        }
        if positions.len() != orientations.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} positions but {} orientations",
                positions.len(),
                orientations.len()
            )));
        }
        if orientations.iter().any(|z| z.abs() != 1) {
            return Err(Error::InvalidParameter("orientations must be ±1".into()));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("positions must be finite".into()));
        }
        check_ordered(&positions)?;
        Ok(ParticleSystem {
            positions,
            orientations,
            s,
            gamma,
            stress: StressModel::Zero,
            delta_const: 0.0,
            delta_drift: None,
            shift_rule: ShiftRule::None,
        })
    }

    pub fn with_stress(mut self, stress: StressModel) -> Self {
        self.stress = stress;
        self
    }

    pub fn with_delta(mut self, delta: f64, rule: ShiftRule) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta must be nonnegative, got {delta}")));
        }
        if let ShiftRule::Custom(off) = &rule {
            if off.len() != self.n() {
                return Err(Error::ShapeMismatch("custom offsets must match particle count".into()));
            }
        }
        self.delta_const = delta;
        self.shift_rule = rule;
        Ok(self)
    }

    pub fn with_drift(mut self, drift: Drift) -> Self {
        self.delta_drift = Some(drift);
        self
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    /// Positions at `t = 0` after the shift rule.
    pub fn initial_positions(&self) -> Result<Vec<f64>> {
        let x: Vec<f64> = match &self.shift_rule {
            ShiftRule::None => self.positions.clone(),
            ShiftRule::MinusZetaDelta => self
                .positions
                .iter()
                .zip(&self.orientations)
                .map(|(x, z)| x - *z as f64 * self.delta_const)
                .collect(),
            ShiftRule::Custom(off) => self.positions.iter().zip(off).map(|(x, o)| x + o).collect(),
        };
        check_ordered(&x)?;
        Ok(x)
    }

    pub fn all_same_orientation(&self) -> bool {
        self.orientations.iter().all(|z| *z == self.orientations[0])
    }
}

/// Velocities of the system at `(t, x)`.
pub fn ode_rhs(sys: &ParticleSystem, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    let mut v = vec![0.0; x.len()];
    rhs_into(sys, t, x, &mut v)?;
    Ok(v)
}

fn rhs_into(sys: &ParticleSystem, t: f64, x: &[f64], v: &mut [f64]) -> Result<()> {
    let n = x.len();
    if n != sys.n() {
        return Err(Error::ShapeMismatch(format!("expected {} positions, got {n}", sys.n())));
    }
    let two_s = 2.0 * sys.s;
    let drift = sys.delta_drift.as_ref().map_or(0.0, |d| (d.rate)(t));
    for i in 0..n {
        let zi = sys.orientations[i] as f64;
        let mut f = 0.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let d = x[i] - x[j];
            if d == 0.0 || !d.is_finite() {
                return Err(Error::SingularConfiguration(format!(
                    "particles {i} and {j} coincide at t = {t}"
                )));
            }
            let zj = sys.orientations[j] as f64;
            f += zi * zj * d.signum() / (two_s * d.abs().powf(two_s));
        }
        f -= zi * sys.stress.eval(t, x[i]);
        f -= zi * sys.delta_const;
        v[i] = sys.gamma * f - drift;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Prefactor of the collision-scale step cap.
    pub c_step: f64,
    pub theta_stop: f64,
    pub dt_init: f64,
    pub max_steps: usize,
    /// Times the integrator must land on exactly.
    pub sample_times: Vec<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            rtol: 1e-10,
            atol: 1e-12,
            c_step: 0.05,
            theta_stop: 1e-6,
            dt_init: 1e-4,
            max_steps: 5_000_000,
            sample_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollisionEvent {
    /// Collision time extrapolated from the last gap samples.
    pub time: f64,
    /// Time at which the gap first fell below the stop threshold.
    pub detected_at: f64,
    pub pair: (usize, usize),
    pub positions: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub orientations: Vec<i8>,
    pub s: f64,
    pub collision: Option<CollisionEvent>,
    pub min_gap_series: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_last(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn gaps(&self, k: usize) -> Vec<f64> {
        self.positions[k].windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Positions at `t` by cubic Hermite interpolation between accepted steps.
    pub fn at(&self, t: f64) -> Result<Vec<f64>> {
        let (lo, hi) = if self.times[0] <= self.t_last() {
            (self.times[0], self.t_last())
        } else {
            (self.t_last(), self.times[0])
        };
        if !(t >= lo && t <= hi) {
            return Err(Error::OutOfDomain(format!("t = {t} outside recorded [{lo}, {hi}]")));
        }
        let forward = self.times[0] <= self.t_last();
        let k = if forward {
            self.times.partition_point(|s| *s < t)
        } else {
            self.times.partition_point(|s| *s > t)
        };
        if k < self.times.len() && self.times[k] == t {
            return Ok(self.positions[k].clone());
        }
        let k = k.clamp(1, self.times.len() - 1);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let h = t1 - t0;
        let u = (t - t0) / h;
        let h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
        let h10 = u * (1.0 - u) * (1.0 - u);
        let h01 = u * u * (3.0 - 2.0 * u);
        let h11 = u * u * (u - 1.0);
        Ok((0..self.positions[k].len())
            .map(|i| {
                h00 * self.positions[k - 1][i]
                    + h10 * h * self.velocities[k - 1][i]
                    + h01 * self.positions[k][i]
                    + h11 * h * self.velocities[k][i]
            })
            .collect())
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn min_gap(x: &[f64]) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (i, w) in x.windows(2).enumerate() {
        let g = w[1] - w[0];
        if g < best.0 {
            best = (g, i);
        }
    }
    best
}

/// Integrates from the system's initial positions over `[0, t_end]`.
pub fn integrate(sys: &ParticleSystem, t_end: f64, ctrl: &StepControl) -> Result<TrajectoryRecord> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("t_end must be positive, got {t_end}")));
    }
    let x0 = sys.initial_positions()?;
    integrate_span(sys, 0.0, &x0, t_end, ctrl)
}

/// Integrates from `(t0, x0)` to `t1`, which may lie before `t0`.
pub fn integrate_span(
    sys: &ParticleSystem,
    t0: f64,
    x0: &[f64],
    t1: f64,
    ctrl: &StepControl,
) -> Result<TrajectoryRecord> {
    check_ordered(x0)?;
    if !(ctrl.rtol > 0.0 && ctrl.atol > 0.0 && ctrl.c_step > 0.0 && ctrl.theta_stop > 0.0) {
        return Err(Error::InvalidParameter("step control tolerances must be positive".into()));
    }
    let n = x0.len();
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut stops: Vec<f64> = ctrl
        .sample_times
        .iter()
        .copied()
        .filter(|t| (t - t0) * dir > 0.0 && (t1 - t) * dir > 0.0)
        .collect();
    stops.push(t1);
    stops.sort_by(|a, b| (a * dir).partial_cmp(&(b * dir)).unwrap());
    stops.dedup();
    let mut next_stop = 0;

    let mut t = t0;
    let mut x = x0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    rhs_into(sys, t, &x, &mut k[0])?;
    let mut rec = TrajectoryRecord {
        times: vec![t],
        positions: vec![x.clone()],
        velocities: vec![k[0].clone()],
        orientations: sys.orientations.clone(),
        s: sys.s,
        collision: None,
        min_gap_series: vec![min_gap(&x).0],
    };
    if n >= 2 && min_gap(&x).0 <= ctrl.theta_stop {
        return Err(Error::SingularConfiguration("initial gap below collision threshold".into()));
    }
    let mut h = ctrl.dt_init.min((t1 - t0).abs());
    let mut xs = vec![0.0; n];
    let mut x5 = vec![0.0; n];
    let mut steps = 0;
    let one_p = 1.0 + 2.0 * sys.s;
    let cap_scale = ctrl.c_step * sys.s / sys.gamma;
    while next_stop < stops.len() {
        steps += 1;
        if steps > ctrl.max_steps {
            return Err(Error::StiffnessFailure(format!("step budget exhausted at t = {t}")));
        }
        if n >= 2 {
            h = h.min(cap_scale * min_gap(&x).0.powf(one_p));
        }
        let target = stops[next_stop];
        let mut hit = false;
        if h >= (target - t).abs() * (1.0 - 1e-12) {
            h = (target - t).abs();
            hit = true;
        }
        if !(h > 0.0) || t + 4.0 * h * dir == t {
            return Err(Error::StiffnessFailure(format!(
                "step size underflow at t = {t} with min gap {:e}",
                min_gap(&x).0
            )));
        }
        let hs = h * dir;
        let mut ok = true;
        for stage in 1..7 {
            for i in 0..n {
                let mut acc = x[i];
                for j in 0..stage {
                    acc += hs * A[stage][j] * k[j][i];
                }
                xs[i] = acc;
            }
            if check_ordered(&xs).is_err() {
                ok = false;
                break;
            }
            rhs_into(sys, t + C[stage] * hs, &xs, &mut k[stage])?;
        }
        let mut err = 0.0_f64;
        if ok {
            for i in 0..n {
                let mut y5 = x[i];
                let mut y4 = x[i];
                for j in 0..7 {
                    y5 += hs * B5[j] * k[j][i];
                    y4 += hs * B4[j] * k[j][i];
                }
                x5[i] = y5;
                let sc = ctrl.atol + ctrl.rtol * x[i].abs().max(y5.abs());
                err = err.max(((y5 - y4) / sc).abs());
            }
            ok = err <= 1.0 && check_ordered(&x5).is_ok();
        }
        if !ok {
            h *= if err.is_finite() && err > 0.0 {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.5)
            } else {
                0.25
            };
            continue;
        }
        t = if hit { target } else { t + hs };
        if hit {
            next_stop += 1;
        }
        x.copy_from_slice(&x5);
        let last = k[6].clone();
        k[0].copy_from_slice(&last);
        rec.times.push(t);
        rec.positions.push(x.clone());
        rec.velocities.push(last);
        let (g, gi) = if n >= 2 { min_gap(&x) } else { (f64::INFINITY, 0) };
        rec.min_gap_series.push(g);
        if g <= ctrl.theta_stop {
            let time = extrapolate_collision(&rec, gi, one_p);
            rec.collision = Some(CollisionEvent {
                time,
                detected_at: t,
                pair: (gi, gi + 1),
                positions: x.clone(),
            });
            return Ok(rec);
        }
        let grow = if err > 0.0 { (0.9 * err.powf(-0.2)).min(5.0) } else { 5.0 };
        h *= grow;
    }
    Ok(rec)
}

/// Zero of the quadratic through the last three `(t, θ^{1+2s})` samples of the
/// colliding gap.
fn extrapolate_collision(rec: &TrajectoryRecord, gi: usize, one_p: f64) -> f64 {
    let m = rec.times.len();
    let tl = rec.times[m - 1];
    if m < 3 {
        return tl;
    }
    let pt = |k: usize| {
        let x = &rec.positions[k];
        (rec.times[k], (x[gi + 1] - x[gi]).max(0.0).powf(one_p))
    };
    let (t0, g0) = pt(m - 3);
    let (t1, g1) = pt(m - 2);
    let (t2, g2) = pt(m - 1);
    let d01 = (g1 - g0) / (t1 - t0);
    let d12 = (g2 - g1) / (t2 - t1);
    let a = (d12 - d01) / (t2 - t0);
    let b = d12 + a * (t2 - t1);
    let lin = tl - g2 / b;
    if a == 0.0 || !b.is_finite() || b == 0.0 {
        return if lin.is_finite() { lin } else { tl };
    }
    let disc = b * b - 4.0 * a * g2;
    if disc < 0.0 {
        return lin;
    }
    let sq = disc.sqrt();
    let r1 = (-b + sq) / (2.0 * a);
    let r2 = (-b - sq) / (2.0 * a);
    let dt = [r1, r2]
        .into_iter()
        .filter(|r| r.is_finite())
        .min_by(|p, q| (p - (lin - tl)).abs().partial_cmp(&(q - (lin - tl)).abs()).unwrap())
        .unwrap_or(lin - tl);
    tl + dt
}

/// `sθ₀^{1+2s} / ((2s+1)γ(1 − 2sθ₀^{2s}‖σ‖))`, defined when the bracket is positive.
pub fn collision_time_bound(theta0: f64, s: f64, gamma: f64, sup_sigma: f64) -> Result<f64> {
    check_order(s)?;
    if !(theta0 > 0.0 && gamma > 0.0 && sup_sigma >= 0.0) {
        return Err(Error::InvalidParameter(
            "theta0 and gamma must be positive, sup_sigma nonnegative".into(),
        ));
    }
    let den = 1.0 - 2.0 * s * theta0.powf(2.0 * s) * sup_sigma;
    if den <= 0.0 {
        return Err(Error::NotApplicable(format!(
            "1 − 2sθ₀^(2s)‖σ‖ = {den} is not positive"
        )));
    }
    Ok(s * theta0.powf(1.0 + 2.0 * s) / ((2.0 * s + 1.0) * gamma * den))
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionFit {
    pub exponent: f64,
    /// Largest `k` with `min gap ≥ k(1+t)^{1/(1+2s)}` over the window.
    pub k: f64,
    /// `exp(intercept)` of the log-log regression.
    pub prefactor: f64,
    pub r_squared: f64,
    pub samples: usize,
}

/// Log-log regression of the minimum gap against `1+t` on `window`,
/// resampled at 64 logarithmically spaced times.
pub fn expansion_fit(record: &TrajectoryRecord, window: (f64, f64)) -> Result<ExpansionFit> {
    if record.collision.is_some() {
        return Err(Error::PreconditionViolated("expansion fit requires a collision-free run".into()));
    }
    let (a, b) = window;
    let t_end = record.t_last();
    if !(a >= 0.0 && b > a) || b > t_end {
        return Err(Error::InsufficientData(format!(
            "window [{a}, {b}] not inside recorded [0, {t_end}]"
        )));
    }
    let m = 64;
    let (la, lb) = ((1.0 + a).ln(), (1.0 + b).ln());
    let mut lx = Vec::with_capacity(m);
    let mut ly = Vec::with_capacity(m);
    let mut k = f64::INFINITY;
    let q = 1.0 / (1.0 + 2.0 * record.s);
    for i in 0..m {
        let l = la + (lb - la) * i as f64 / (m - 1) as f64;
        let t = (l.exp() - 1.0).clamp(a, b);
        let x = record.at(t)?;
        let g = min_gap(&x).0;
        lx.push(l);
        ly.push(g.ln());
        k = k.min(g / (1.0 + t).powf(q));
    }
    if lx.len() < 10 {
        return Err(Error::InsufficientData("fewer than 10 samples".into()));
    }
    let fit = fit_line(&lx, &ly);
    Ok(ExpansionFit {
        exponent: fit.slope,
        k,
        prefactor: fit.intercept.exp(),
        r_squared: fit.r_squared,
        samples: lx.len(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MidpointReport {
    pub max_deviation: f64,
    pub samples: usize,
    pub odd: bool,
}

/// Compares the central particle(s) with the drift law
/// `x_{m+1} + x_m = x_{m+1}⁰ + x_m⁰ + 2δ(0) − 2δ(t)` (even `N`) or
/// `x_{m+1} = x_{m+1}⁰ + δ(0) − δ(t)` (odd `N`) at every recorded step.
pub fn midpoint_drift_check(record: &TrajectoryRecord, drift: Option<&Drift>) -> Result<MidpointReport> {
    let x0 = &record.positions[0];
    let n = x0.len();
    if record.orientations.iter().any(|z| *z != record.orientations[0]) {
        return Err(Error::PreconditionViolated("midpoint law needs equal orientations".into()));
    }
    let centre = x0[0] + x0[n - 1];
    let scale = x0[n - 1] - x0[0];
    for i in 0..n {
        if (x0[i] + x0[n - 1 - i] - centre).abs() > 1e-12 * (1.0 + scale) {
            return Err(Error::PreconditionViolated("initial data not symmetric".into()));
        }
    }
    let delta = |t: f64| drift.map_or(0.0, |d| (d.delta)(t));
    let t0 = record.times[0];
    let odd = n % 2 == 1;
    let m = n / 2;
    let mut dev: f64 = 0.0;
    for (t, x) in record.times.iter().zip(&record.positions) {
        let shift = delta(t0) - delta(*t);
        let e = if odd {
            x[m] - (x0[m] + shift)
        } else {
            x[m] + x[m - 1] - (x0[m] + x0[m - 1] + 2.0 * shift)
        };
        dev = dev.max(e.abs());
    }
    Ok(MidpointReport {
        max_deviation: dev,
        samples: record.len(),
        odd,
    })
}
