//! Named experiments: segregate, balanced and unbalanced layer ensembles.
//!
//! A run builds the superposition datum, evolves it while watching the
//! half-integer crossings, logs every annihilation, and finally fits the
//! long-time behaviour selected by `l = 2K − N`.

pub mod verify;

pub use verify::{verify_suite, CriterionVerdict, VerifyReport};

use serde::Serialize;

use crate::analysis::{classify, fit_exponential, fit_power, AsymptoticReport, DecayFit};
use crate::error::{Error, Result};
use crate::evolver::{
    build_initial_datum, crossings, BarrierSchedule, Crossing, Evolver, EvolveOptions, InitialDatumSpec, PDEState,
    PdeConfig, TrackPoint,
};
use crate::fracop::GridFunction;
use crate::layer::{solve_layer, LayerProfile, LayerSummary};
use crate::particles::{integrate, integrate_span, ParticleSystem, StepControl, StressModel, TrajectoryRecord};
use crate::potential::{make_cosine_potential, PeriodicPotential};

pub const MAX_PARTICLES: usize = 8;
pub const MIN_EPSILON: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Segregate,
    Balanced,
    Unbalanced,
    Custom,
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "segregate" => Ok(ScenarioKind::Segregate),
            "balanced" => Ok(ScenarioKind::Balanced),
            "unbalanced" => Ok(ScenarioKind::Unbalanced),
            "custom" => Ok(ScenarioKind::Custom),
            other => Err(Error::InvalidParameter(format!(
                "unknown scenario kind {other:?} (expected segregate, balanced, unbalanced or custom)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub orientations: Vec<i8>,
    pub centers: Vec<f64>,
    pub epsilon: f64,
    pub s: f64,
    /// Amplitude `a` of the cosine potential `a(1 − cos 2πv)`.
    pub amplitude: f64,
    pub stress: StressModel,
    pub horizon: f64,
    pub pde: PdeConfig,
    pub layer_half_width: f64,
    pub layer_dx: f64,
    pub layer_tol: f64,
    /// Balanced runs stop once no crossing is left and `sup|v|` is below this.
    pub stop_sup: f64,
    /// Times at which full fields are kept, besides the start, every event and the end.
    pub snapshot_times: Vec<f64>,
}

fn unit_centers(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 - 0.5 * (n as f64 - 1.0)).collect()
}

impl Scenario {
    /// Orientations and centers as given, with default numerics.
    pub fn custom(orientations: Vec<i8>, centers: Vec<f64>, epsilon: f64, s: f64, horizon: f64) -> Result<Self> {
        let sc = Scenario {
            kind: ScenarioKind::Custom,
            orientations,
            centers,
            epsilon,
            s,
            amplitude: 1.0 / (4.0 * std::f64::consts::PI),
            stress: StressModel::Zero,
            horizon,
            pde: PdeConfig::default(),
            layer_half_width: if s < 0.5 { 40.0 } else { 20.0 },
            layer_dx: 0.05,
            layer_tol: 1e-10,
            stop_sup: 1e-11,
            snapshot_times: Vec::new(),
        };
        sc.validate()?;
        Ok(sc)
    }

    /// `K` positive layers followed by `N − K` negative ones at unit spacing.
    pub fn segregate(n: usize, k: usize, epsilon: f64, s: f64, horizon: f64) -> Result<Self> {
        if k == 0 || k >= n {
            return Err(Error::InvalidParameter(format!("segregate needs 0 < K < N, got K = {k}, N = {n}")));
        }
        let z = (0..n).map(|i| if i < k { 1 } else { -1 }).collect();
        let mut sc = Self::custom(z, unit_centers(n), epsilon, s, horizon)?;
        sc.kind = ScenarioKind::Segregate;
        Ok(sc)
    }

    /// `N = 2K` layers of alternating orientation at unit spacing.
    pub fn balanced(n: usize, epsilon: f64, s: f64, horizon: f64) -> Result<Self> {
        if n == 0 || n % 2 != 0 {
            return Err(Error::InvalidParameter(format!("balanced needs an even positive N, got {n}")));
        }
        let z = (0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let mut sc = Self::custom(z, unit_centers(n), epsilon, s, horizon)?;
        sc.kind = ScenarioKind::Balanced;
        Ok(sc)
    }

    /// `K` positive then `N − K` negative layers with `l = 2K − N > 0`.
    pub fn unbalanced(n: usize, k: usize, epsilon: f64, s: f64, horizon: f64) -> Result<Self> {
        if 2 * k <= n || k > n {
            return Err(Error::InvalidParameter(format!("unbalanced needs N/2 < K ≤ N, got K = {k}, N = {n}")));
        }
        let z = (0..n).map(|i| if i < k { 1 } else { -1 }).collect();
        let mut sc = Self::custom(z, unit_centers(n), epsilon, s, horizon)?;
        sc.kind = ScenarioKind::Unbalanced;
        Ok(sc)
    }

    pub fn with_centers(mut self, centers: Vec<f64>) -> Result<Self> {
        self.centers = centers;
        self.validate()?;
        Ok(self)
    }

    pub fn with_stress(mut self, stress: StressModel) -> Self {
        self.stress = stress;
        self
    }

    pub fn n(&self) -> usize {
        self.orientations.len()
    }

    pub fn k(&self) -> usize {
        self.orientations.iter().filter(|z| **z > 0).count()
    }

    pub fn l(&self) -> i64 {
        2 * self.k() as i64 - self.n() as i64
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 || n > MAX_PARTICLES {
            return Err(Error::InvalidParameter(format!("need 1 ≤ N ≤ {MAX_PARTICLES}, got {n}")));
        }
        if self.centers.len() != n {
            return Err(Error::ShapeMismatch(format!("{} centers for {n} orientations", self.centers.len())));
        }
        if !self.centers.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter("centers must be strictly increasing".into()));
        }
        if self.orientations.iter().any(|z| *z != 1 && *z != -1) {
            return Err(Error::InvalidParameter("orientations must be ±1".into()));
        }
        if !(self.epsilon >= MIN_EPSILON && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in [{MIN_EPSILON}, 1), got {}",
                self.epsilon
            )));
        }
        crate::error::check_order(self.s)?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {}", self.horizon)));
        }
        let k = self.k();
        let ok = match self.kind {
            ScenarioKind::Segregate => self.orientations.iter().enumerate().all(|(i, z)| (*z > 0) == (i < k)),
            ScenarioKind::Balanced => self.l() == 0,
            ScenarioKind::Unbalanced => self.l() > 0,
            ScenarioKind::Custom => true,
        };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "orientations {:?} do not fit the {:?} scenario",
                self.orientations, self.kind
            )));
        }
        self.pde.validate()
    }

    pub fn potential(&self) -> Result<PeriodicPotential> {
        make_cosine_potential(self.amplitude)
    }

    pub fn solve_layer(&self) -> Result<LayerProfile> {
        solve_layer(&self.potential()?, self.s, self.layer_half_width, self.layer_dx, self.layer_tol)
    }

    pub fn summary(&self) -> ScenarioSummary {
        ScenarioSummary {
            kind: self.kind,
            n: self.n(),
            k: self.k(),
            l: self.l(),
            orientations: self.orientations.clone(),
            centers: self.centers.clone(),
            epsilon: self.epsilon,
            s: self.s,
            amplitude: self.amplitude,
            sigma: match &self.stress {
                StressModel::Zero => Some(0.0),
                StressModel::Constant(c) => Some(*c),
                StressModel::Analytic { .. } => None,
            },
            horizon: self.horizon,
            pde: self.pde.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioSummary {
    pub kind: ScenarioKind,
    pub n: usize,
    pub k: usize,
    pub l: i64,
    pub orientations: Vec<i8>,
    pub centers: Vec<f64>,
    pub epsilon: f64,
    pub s: f64,
    pub amplitude: f64,
    /// Constant stress value, absent for space-time dependent stresses.
    pub sigma: Option<f64>,
    pub horizon: f64,
    pub pde: PdeConfig,
}

/// One annihilation of an opposite-orientation pair of crossings.
#[derive(Debug, Clone, Serialize)]
pub struct AnnihilationEvent {
    /// Time at which the two crossings first came closer than `2ε`.
    pub contact_time: Option<f64>,
    /// Time at which the crossing count dropped.
    pub time: f64,
    /// Original particle indices of the pair, when the matching is unambiguous.
    pub pair: Option<(usize, usize)>,
    pub position: f64,
    pub crossings_before: usize,
    pub crossings_after: usize,
    /// Time since the previous event (or since the start).
    pub duration: f64,
    /// Plateau deviation away from the surviving layers one relaxation time
    /// after the event, or at the next event if that comes first.
    pub residual_amplitude: Option<f64>,
}

/// Per-step scalar observables.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SeriesPoint {
    pub t: f64,
    pub sup_abs: f64,
    /// `sup|v − round v|` at distance ≥ 10ε from every crossing.
    pub plateau_dev: f64,
    pub count: usize,
    /// Regime observable: deviation from the middle plateau for even `l ≠ 0`,
    /// center of the middle crossing for odd `l`, `sup|v|` for `l = 0`.
    pub observable: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftFit {
    /// Fitted `α` in `|x(t) − x(T)| ≈ α[(1 + t − T)^{1/(1+2s)} − 1]`.
    pub alpha: f64,
    /// Sign of the net displacement over the window.
    pub direction: f64,
    pub r_squared: f64,
    pub samples: usize,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldSnapshot {
    pub t: f64,
    pub label: String,
    pub field: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioResult {
    pub scenario: ScenarioSummary,
    pub layer: LayerSummary,
    pub ode_collision: Option<(f64, (usize, usize))>,
    pub events: Vec<AnnihilationEvent>,
    /// Sum of the phase durations up to the last event.
    pub cumulative_time: f64,
    pub phase_amplitudes: Vec<f64>,
    pub report: AsymptoticReport,
    pub drift: Option<DriftFit>,
    /// Largest distance between surviving crossings and the reduced particle
    /// system after the first event.
    pub reduced_ode_deviation: Option<f64>,
    pub crossings_initial: usize,
    pub crossings_final: usize,
    pub sup_final: f64,
    pub t_final: f64,
    pub steps: usize,
    pub dt: f64,
    pub x0: f64,
    pub dx: f64,
    #[serde(skip)]
    pub series: Vec<SeriesPoint>,
    #[serde(skip)]
    pub tracks: Vec<TrackPoint>,
    #[serde(skip)]
    pub snapshots: Vec<FieldSnapshot>,
    #[serde(skip)]
    pub ode: Option<TrajectoryRecord>,
}

impl ScenarioResult {
    /// At most `max` evenly spaced entries of the step series, always including the last.
    pub fn series_thinned(&self, max: usize) -> Vec<SeriesPoint> {
        thin(&self.series, max)
    }

    pub fn tracks_thinned(&self, max: usize) -> Vec<TrackPoint> {
        thin(&self.tracks, max)
    }
}

fn thin<T: Clone>(v: &[T], max: usize) -> Vec<T> {
    if v.len() <= max || max < 2 {
        return v.to_vec();
    }
    let stride = v.len().div_ceil(max - 1);
    let mut out: Vec<T> = v.iter().step_by(stride).cloned().collect();
    if (v.len() - 1) % stride != 0 {
        out.push(v[v.len() - 1].clone());
    }
    out
}

fn plateau_dev_away(v: &GridFunction, cr: &[Crossing], dist: f64) -> f64 {
    let mut dev = 0.0_f64;
    let mut j = 0;
    for (i, val) in v.samples.iter().enumerate() {
        let x = v.x(i);
        while j + 1 < cr.len() && cr[j + 1].x <= x {
            j += 1;
        }
        let near = cr.get(j).is_some_and(|c| (c.x - x).abs() < dist)
            || cr.get(j + 1).is_some_and(|c| (c.x - x).abs() < dist);
        if !near {
            dev = dev.max((val - val.round()).abs());
        }
    }
    dev
}

fn regime_observable(v: &GridFunction, cr: &[Crossing], l: i64, sup_abs: f64) -> f64 {
    let la = l.unsigned_abs() as usize;
    if l == 0 {
        return sup_abs;
    }
    if cr.len() != la {
        return f64::NAN;
    }
    let m = la / 2;
    if la % 2 == 1 {
        return cr[m].x;
    }
    let (a, b) = (cr[m - 1].x, cr[m].x);
    let (lo, hi) = (a + 0.25 * (b - a), b - 0.25 * (b - a));
    let mid = v.value_at(0.5 * (a + b)).round();
    let i0 = ((lo - v.x0) / v.dx).ceil().max(0.0) as usize;
    let i1 = (((hi - v.x0) / v.dx).floor() as usize).min(v.n() - 1);
    (i0..=i1).map(|i| (v.samples[i] - mid).abs()).fold(0.0, f64::max)
}

/// Closest adjacent opposite-direction pair in a crossing list.
fn closest_opposite_pair(cr: &[Crossing], skip: &[usize]) -> Option<usize> {
    (0..cr.len().saturating_sub(1))
        .filter(|i| cr[*i].up != cr[*i + 1].up && !skip.contains(i) && !skip.contains(&(i + 1)))
        .min_by(|a, b| {
            let da = cr[*a + 1].x - cr[*a].x;
            let db = cr[*b + 1].x - cr[*b].x;
            da.partial_cmp(&db).unwrap()
        })
}

/// Runs the scenario, solving its layer first.
pub fn run_scenario(sc: &Scenario) -> Result<ScenarioResult> {
    sc.validate()?;
    let layer = sc.solve_layer()?;
    run_scenario_with_layer(sc, &layer)
}

/// Runs the scenario with a precomputed layer of matching order and potential.
pub fn run_scenario_with_layer(sc: &Scenario, layer: &LayerProfile) -> Result<ScenarioResult> {
    sc.validate()?;
    if (layer.s - sc.s).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("layer order {} differs from scenario order {}", layer.s, sc.s)));
    }
    let p = sc.potential()?;
    let eps = sc.epsilon;
    let (_, l) = classify(&sc.orientations);

    let ode = reference_ode(sc, layer.gamma)?;
    let ode_collision = ode.collision.as_ref().map(|c| (c.time, c.pair));

    let spec = InitialDatumSpec::new(sc.centers.clone(), sc.orientations.clone(), eps)?;
    let v = build_initial_datum(&spec, layer, &sc.stress, &sc.pde)?;
    let mut state = PDEState { epsilon: eps, t: 0.0, v };
    let mut ev = Evolver::new(&state, &p, sc.s, &sc.stress, &sc.pde)?;
    let relax = BarrierSchedule::default_for(eps, sc.s, layer.beta, layer.gamma, sc.stress.sup())?.tau_eps;

    let cr0 = crossings(&state.v);
    let crossings_initial = cr0.len();
    let sup0 = state.v.sup_norm();
    let mut series = vec![SeriesPoint {
        t: 0.0,
        sup_abs: sup0,
        plateau_dev: plateau_dev_away(&state.v, &cr0, 10.0 * eps),
        count: cr0.len(),
        observable: regime_observable(&state.v, &cr0, l, sup0),
    }];
    let mut tracks = vec![TrackPoint {
        t: 0.0,
        x: cr0.iter().map(|c| c.x).collect(),
    }];
    let mut snapshots = vec![FieldSnapshot {
        t: 0.0,
        label: "initial".into(),
        field: state.v.samples.clone(),
    }];
    let mut alive: Option<Vec<usize>> = (cr0.len() == sc.n()).then(|| (0..sc.n()).collect());
    let mut events: Vec<AnnihilationEvent> = Vec::new();
    let mut contacts: Vec<(f64, f64)> = Vec::new();
    let mut prev = cr0;
    let mut pending_amp: Option<(usize, f64)> = None;
    let mut failure: Option<Error> = None;
    let stop_sup = sc.stop_sup;
    let n_particles = sc.n();

    let opts = EvolveOptions {
        sample_times: sc.snapshot_times.clone(),
        track_every: 0,
        keep_fields: true,
    };
    let rec = ev.evolve_with(&mut state, sc.horizon, &opts, |st| {
        let cr = crossings(&st.v);
        let sup = st.v.sup_norm();
        let pd = plateau_dev_away(&st.v, &cr, 10.0 * eps);

        for w in cr.windows(2) {
            if w[0].up != w[1].up && w[1].x - w[0].x < 2.0 * eps {
                let mid = 0.5 * (w[0].x + w[1].x);
                if !contacts.iter().any(|(_, x)| (x - mid).abs() < 4.0 * eps) {
                    contacts.push((st.t, mid));
                }
            }
        }

        if let Some((idx, due)) = pending_amp {
            if st.t >= due {
                events[idx].residual_amplitude = Some(pd);
                pending_amp = None;
            }
        }

        if cr.len() + 2 <= prev.len() {
            if let Some((idx, _)) = pending_amp.take() {
                events[idx].residual_amplitude = Some(pd);
            }
            let drops = (prev.len() - cr.len()) / 2;
            let mut removed: Vec<usize> = Vec::new();
            for _ in 0..drops {
                let Some(i) = closest_opposite_pair(&prev, &removed) else {
                    break;
                };
                removed.extend([i, i + 1]);
                let position = 0.5 * (prev[i].x + prev[i + 1].x);
                let contact = contacts
                    .iter()
                    .position(|(_, x)| (x - position).abs() < 4.0 * eps)
                    .map(|k| contacts.remove(k).0);
                let pair = alive
                    .as_ref()
                    .filter(|a| a.len() == prev.len())
                    .map(|a| (a[i], a[i + 1]));
                let last = events.last().map_or(0.0, |e| e.time);
                events.push(AnnihilationEvent {
                    contact_time: contact,
                    time: st.t,
                    pair,
                    position,
                    crossings_before: prev.len(),
                    crossings_after: cr.len(),
                    duration: st.t - last,
                    residual_amplitude: None,
                });
            }
            if drops == 1 {
                pending_amp = Some((events.len() - 1, st.t + relax));
            }
            alive = alive.take().filter(|a| a.len() == prev.len()).map(|a| {
                a.iter()
                    .enumerate()
                    .filter(|(j, _)| !removed.contains(j))
                    .map(|(_, p)| *p)
                    .collect()
            });
            snapshots.push(FieldSnapshot {
                t: st.t,
                label: format!("event{}", events.len()),
                field: st.v.samples.clone(),
            });
        } else if cr.len() > prev.len() && alive.as_ref().is_some_and(|a| a.len() != cr.len()) {
            alive = None;
        }

        series.push(SeriesPoint {
            t: st.t,
            sup_abs: sup,
            plateau_dev: pd,
            count: cr.len(),
            observable: regime_observable(&st.v, &cr, l, sup),
        });
        tracks.push(TrackPoint {
            t: st.t,
            x: cr.iter().map(|c| c.x).collect(),
        });
        prev = cr;
        if series.len() > 20_000_000 {
            failure = Some(Error::StepFailure("step budget exhausted".into()));
            return false;
        }
        !(l == 0 && prev.is_empty() && sup < stop_sup)
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    for snap in rec.snapshots {
        if let Some(field) = snap.field {
            snapshots.push(FieldSnapshot {
                t: snap.t,
                label: format!("t{}", snapshots.len()),
                field,
            });
        }
    }
    snapshots.push(FieldSnapshot {
        t: state.t,
        label: "final".into(),
        field: state.v.samples.clone(),
    });

    let final_count = prev.len();
    if final_count % 2 != n_particles % 2 {
        return Err(Error::ScenarioAnomaly(format!(
            "{final_count} crossings at t = {} but N = {n_particles} (parity mismatch)",
            state.t
        )));
    }
    if let Some((idx, _)) = pending_amp {
        events[idx].residual_amplitude = Some(series.last().map_or(f64::NAN, |p| p.plateau_dev));
    }

    let t_last = events.last().map_or(0.0, |e| e.time);
    let decay = fit_decay(&series, l, t_last, final_count);
    let drift = if l.rem_euclid(2) == 1 {
        fit_drift(&series, l, t_last, sc.s)
    } else {
        None
    };
    let center_bracket = drift.as_ref().map(|_| {
        let xs: Vec<f64> = series
            .iter()
            .filter(|p| p.t >= t_last && p.observable.is_finite())
            .map(|p| p.observable)
            .collect();
        (
            xs.iter().copied().fold(f64::INFINITY, f64::min),
            xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    });
    let phase_amplitudes: Vec<f64> = events.iter().filter_map(|e| e.residual_amplitude).collect();
    let report = AsymptoticReport {
        scenario: classify(&sc.orientations).0.to_string(),
        l,
        m: l.div_euclid(2),
        relaxation_time: t_last,
        residual_amplitude: phase_amplitudes.last().copied().unwrap_or(0.0),
        drift_alpha: drift.as_ref().map(|d| d.alpha),
        center_bracket,
        decay,
    };
    let reduced_ode_deviation = match (events.first(), &ode.collision) {
        (Some(e), Some(_)) if e.crossings_after > 0 => reduced_deviation(sc, layer.gamma, &ode, &tracks, e.time)?,
        _ => None,
    };

    Ok(ScenarioResult {
        scenario: sc.summary(),
        layer: layer.summary(),
        ode_collision,
        cumulative_time: events.iter().map(|e| e.duration).sum(),
        events,
        phase_amplitudes,
        report,
        drift,
        reduced_ode_deviation,
        crossings_initial,
        crossings_final: final_count,
        sup_final: state.v.sup_norm(),
        t_final: state.t,
        steps: rec.steps,
        dt: rec.dt,
        x0: rec.x0,
        dx: rec.dx,
        series,
        tracks,
        snapshots,
        ode: Some(ode),
    })
}

fn reference_ode(sc: &Scenario, gamma: f64) -> Result<TrajectoryRecord> {
    let sys = ParticleSystem::new(sc.centers.clone(), sc.orientations.clone(), sc.s, gamma)?.with_stress(sc.stress.clone());
    integrate(&sys, sc.horizon, &StepControl::default())
}

/// Deviation of the surviving crossings from the particle system that drops
/// the first colliding pair at the particle collision time.
fn reduced_deviation(
    sc: &Scenario,
    gamma: f64,
    ode: &TrajectoryRecord,
    tracks: &[TrackPoint],
    t_event: f64,
) -> Result<Option<f64>> {
    let Some(col) = &ode.collision else {
        return Ok(None);
    };
    let (i, j) = col.pair;
    let keep: Vec<usize> = (0..sc.n()).filter(|k| *k != i && *k != j).collect();
    let x: Vec<f64> = keep.iter().map(|k| col.positions[*k]).collect();
    let z: Vec<i8> = keep.iter().map(|k| sc.orientations[*k]).collect();
    let sys = ParticleSystem::new(x.clone(), z, sc.s, gamma)?.with_stress(sc.stress.clone());
    if !(sc.horizon > col.time) {
        return Ok(None);
    }
    let rec = integrate_span(&sys, col.time, &x, sc.horizon, &StepControl::default())?;
    let t_stop = match &rec.collision {
        Some(c) => col.time + 0.8 * (c.time - col.time),
        None => rec.t_last(),
    };
    let mut dev: Option<f64> = None;
    let t_start = t_event.max(col.time);
    for tp in tracks.iter().filter(|tp| tp.t >= t_start && tp.t <= t_stop) {
        if tp.x.len() != keep.len() {
            continue;
        }
        let y = rec.at(tp.t)?;
        let d = tp.x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        dev = Some(dev.map_or(d, |m: f64| m.max(d)));
    }
    Ok(dev)
}

/// Resamples `(τ, value)` pairs at up to `k` log-spaced values of `1 + τ`.
fn log_resample(tau: &[f64], val: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
    let (a, b) = ((1.0 + tau[0]).ln(), (1.0 + tau[tau.len() - 1]).ln());
    let mut out_t = Vec::new();
    let mut out_v = Vec::new();
    let mut j = 0;
    for q in 0..k {
        let target = (a + (b - a) * q as f64 / (k - 1) as f64).exp() - 1.0;
        while j + 1 < tau.len() && tau[j + 1] <= target {
            j += 1;
        }
        if out_t.last() != Some(&tau[j]) {
            out_t.push(tau[j]);
            out_v.push(val[j]);
        }
    }
    (out_t, out_v)
}

fn fit_decay(series: &[SeriesPoint], l: i64, t_last: f64, final_count: usize) -> Option<DecayFit> {
    let tail: Vec<&SeriesPoint> = series.iter().filter(|p| p.t > t_last).collect();
    if l == 0 {
        if final_count != 0 {
            return None;
        }
        let pts: Vec<&&SeriesPoint> = tail
            .iter()
            .filter(|p| p.count == 0 && p.sup_abs <= 0.05 && p.sup_abs >= 1e-10)
            .collect();
        let picked = thin(&pts, 400);
        let t: Vec<f64> = picked.iter().map(|p| p.t).collect();
        let v: Vec<f64> = picked.iter().map(|p| p.sup_abs).collect();
        return fit_exponential(&t, &v).ok();
    }
    if l.rem_euclid(2) == 1 {
        return None;
    }
    let pts: Vec<&&SeriesPoint> = tail
        .iter()
        .filter(|p| p.observable.is_finite() && p.observable > 0.0)
        .collect();
    if pts.len() < 10 {
        return None;
    }
    let tau: Vec<f64> = pts.iter().map(|p| p.t - t_last).collect();
    let val: Vec<f64> = pts.iter().map(|p| p.observable).collect();
    let start = tau.partition_point(|x| *x < 0.1 * tau[tau.len() - 1]);
    let (tt, vv) = log_resample(&tau[start..], &val[start..], 64);
    let mut fit = fit_power(&tt, &vv).ok()?;
    fit.window = (fit.window.0 + t_last, fit.window.1 + t_last);
    Some(fit)
}

fn fit_drift(series: &[SeriesPoint], l: i64, t_last: f64, s: f64) -> Option<DriftFit> {
    let la = l.unsigned_abs() as usize;
    let pts: Vec<&SeriesPoint> = series
        .iter()
        .filter(|p| p.t >= t_last && p.count == la && p.observable.is_finite())
        .collect();
    if pts.len() < 10 {
        return None;
    }
    let c0 = pts[0].observable;
    let t0 = pts[0].t;
    let q = 1.0 / (1.0 + 2.0 * s);
    let phi: Vec<f64> = pts.iter().map(|p| (1.0 + p.t - t0).powf(q) - 1.0).collect();
    let d: Vec<f64> = pts.iter().map(|p| (p.observable - c0).abs()).collect();
    let spp: f64 = phi.iter().map(|f| f * f).sum();
    if !(spp > 0.0) {
        return None;
    }
    let alpha = phi.iter().zip(&d).map(|(f, y)| f * y).sum::<f64>() / spp;
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let ss_tot: f64 = d.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = phi.iter().zip(&d).map(|(f, y)| (y - alpha * f).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let net = pts[pts.len() - 1].observable - c0;
    Some(DriftFit {
        alpha,
        direction: if net == 0.0 { 0.0 } else { net.signum() },
        r_squared,
        samples: pts.len(),
        window: (t0, pts[pts.len() - 1].t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_enforce_orientation_invariants() {
        let s = Scenario::segregate(4, 2, 0.1, 0.5, 1.0).unwrap();
        assert_eq!(s.orientations, vec![1, 1, -1, -1]);
        assert_eq!(s.centers, vec![-1.5, -0.5, 0.5, 1.5]);
        let b = Scenario::balanced(4, 0.1, 0.5, 1.0).unwrap();
        assert_eq!(b.orientations.iter().map(|z| *z as i64).sum::<i64>(), 0);
        let u = Scenario::unbalanced(3, 2, 0.1, 0.5, 1.0).unwrap();
        assert_eq!(u.l(), 1);
        assert!(Scenario::balanced(3, 0.1, 0.5, 1.0).is_err());
        assert!(Scenario::unbalanced(4, 2, 0.1, 0.5, 1.0).is_err());
        assert!(Scenario::segregate(9, 4, 0.1, 0.5, 1.0).is_err());
        assert!(Scenario::segregate(4, 2, 0.01, 0.5, 1.0).is_err());
        let mut bad = b.clone();
        bad.kind = ScenarioKind::Segregate;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn thinning_keeps_endpoints() {
        let v: Vec<usize> = (0..1001).collect();
        let t = thin(&v, 100);
        assert!(t.len() <= 101);
        assert_eq!(t[0], 0);
        assert_eq!(*t.last().unwrap(), 1000);
    }

    #[test]
    fn closest_pair_skips_same_direction() {
        let c = |x: f64, up: bool| Crossing { x, level: 0.5, up };
        let cr = vec![c(0.0, true), c(0.1, true), c(0.5, false), c(2.0, true)];
        assert_eq!(closest_opposite_pair(&cr, &[]), Some(1));
        assert_eq!(closest_opposite_pair(&cr, &[1, 2]), None);
    }
}
