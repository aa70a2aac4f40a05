//! Command execution and deterministic result files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use dislocade::analysis::{
    compare_pde_ode, fit_exponential, fit_power, stationary_search, supersolution_residual, DecayFit,
};
use dislocade::evolver::{
    build_initial_datum, crossings, BarrierKind, BarrierSchedule, BarrierSpec, EvolveOptions, Evolver,
    InitialDatumSpec, PDEState, PdeConfig,
};
use dislocade::fracop::QuadratureOverrides;
use dislocade::layer::{solve_corrector, solve_layer_with, LayerProfile};
use dislocade::particles::{
    collision_time_bound, expansion_fit, integrate, ParticleSystem, ShiftRule, StepControl, StressModel,
    TrajectoryRecord,
};
use dislocade::potential::{make_cosine_potential, PeriodicPotential};
use dislocade::report::{fmt_f64, to_json, SCHEMA_VERSION};
use dislocade::scenarios::{run_scenario_with_layer, verify_suite, Scenario, ScenarioResult};

use crate::config::{Command, ConfigError, GammaSpec, RunConfig};

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Solver(dislocade::Error),
    Io(String),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Solver(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<dislocade::Error> for RunError {
    fn from(e: dislocade::Error) -> Self {
        RunError::Solver(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

/// Files written by one run, relative to the output directory.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: Command,
    pub seed: u64,
    pub output: PathBuf,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Done(Manifest),
    VerificationFailed(Manifest),
}

impl Outcome {
    pub fn manifest(&self) -> &Manifest {
        match self {
            Outcome::Done(m) | Outcome::VerificationFailed(m) => m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyzeKind {
    ExpFit,
    PowFit,
    Compare,
    Residual,
    Stationary,
}

impl std::str::FromStr for AnalyzeKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "expfit" => Ok(AnalyzeKind::ExpFit),
            "powfit" => Ok(AnalyzeKind::PowFit),
            "compare" => Ok(AnalyzeKind::Compare),
            "residual" => Ok(AnalyzeKind::Residual),
            "stationary" => Ok(AnalyzeKind::Stationary),
            other => Err(ConfigError(format!(
                "analyze kind must be expfit, powfit, compare, residual or stationary, got {other:?}"
            ))),
        }
    }
}

/// Options that only some commands read.
#[derive(Debug, Clone)]
pub struct Extra {
    pub analyze: AnalyzeKind,
    /// Two-column CSV `(t, value)` for the fits.
    pub input: Option<PathBuf>,
    pub barrier: BarrierKind,
    pub starts: usize,
    pub scope: String,
}

impl Default for Extra {
    fn default() -> Self {
        Extra {
            analyze: AnalyzeKind::Stationary,
            input: None,
            barrier: BarrierKind::VBar,
            starts: 100,
            scope: "all".into(),
        }
    }
}

struct Out {
    dir: PathBuf,
    files: Vec<String>,
}

impl Out {
    fn new(dir: &Path) -> Result<Self, RunError> {
        if !dir.exists() {
            fs::create_dir_all(dir)?;
            log::info!("created output directory {}", dir.display());
        }
        Ok(Out {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn csv(&mut self, name: &str, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), RunError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut w = csv::WriterBuilder::new().flexible(true).from_path(&path)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, cfg: &RunConfig, result: &T) -> Result<Manifest, RunError> {
        self.files.push(name.to_string());
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            command: cfg.command,
            seed: cfg.seed,
            output: self.dir.clone(),
            files: self.files.clone(),
        };
        #[derive(Serialize)]
        struct Doc<'a, T: Serialize> {
            manifest: &'a Manifest,
            result: &'a T,
        }
        let text = to_json(&Doc {
            manifest: &manifest,
            result,
        })?;
        fs::write(self.dir.join(name), text)?;
        Ok(manifest)
    }
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn row(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| fmt_f64(*x)).collect()
}

fn potential(cfg: &RunConfig) -> Result<PeriodicPotential, RunError> {
    Ok(make_cosine_potential(cfg.potential.amplitude)?)
}

fn overrides(cfg: &RunConfig) -> QuadratureOverrides {
    QuadratureOverrides {
        r0_cells: Some(cfg.fracop.r0_cells),
        outer_radius: cfg.fracop.outer_radius,
        target_tol: Some(cfg.fracop.tol),
    }
}

fn layer(cfg: &RunConfig) -> Result<LayerProfile, RunError> {
    let l = &cfg.layer;
    Ok(solve_layer_with(&potential(cfg)?, cfg.s, l.half_width, l.dx, l.tol, &overrides(cfg))?)
}

fn stress(sigma: f64) -> StressModel {
    if sigma == 0.0 {
        StressModel::Zero
    } else {
        StressModel::Constant(sigma)
    }
}

fn gamma(cfg: &RunConfig) -> Result<(f64, Option<LayerProfile>), RunError> {
    match cfg.ode.gamma {
        GammaSpec::Value(g) => Ok((g, None)),
        GammaSpec::Tag(_) => {
            let l = layer(cfg)?;
            Ok((l.gamma, Some(l)))
        }
    }
}

fn pde_config(cfg: &RunConfig) -> PdeConfig {
    PdeConfig {
        dx_rel: cfg.pde.dx_rel,
        margin: cfg.pde.margin,
        dt_safety: cfg.pde.dt_safety,
        quadrature: overrides(cfg),
        ..PdeConfig::default()
    }
}

fn ode_system(cfg: &RunConfig, gamma: f64) -> Result<ParticleSystem, RunError> {
    let o = &cfg.ode;
    let mut sys = ParticleSystem::new(o.positions.clone(), o.orientations.clone(), cfg.s, gamma)?
        .with_stress(stress(o.sigma));
    if o.delta > 0.0 {
        sys = sys.with_delta(o.delta, ShiftRule::MinusZetaDelta)?;
    }
    Ok(sys)
}

fn step_control(cfg: &RunConfig) -> StepControl {
    StepControl {
        rtol: cfg.ode.rtol,
        atol: cfg.ode.atol,
        ..StepControl::default()
    }
}

/// Runs the configured command and writes its files into `cfg.output`.
pub fn execute(cfg: &RunConfig, extra: &Extra) -> Result<Outcome, RunError> {
    cfg.validate()?;
    let mut out = Out::new(&cfg.output)?;
    match cfg.command {
        Command::Layer => run_layer(cfg, &mut out).map(Outcome::Done),
        Command::Ode => run_ode(cfg, &mut out).map(Outcome::Done),
        Command::Pde => run_pde(cfg, &mut out).map(Outcome::Done),
        Command::Scenario => run_scenario_cmd(cfg, &mut out).map(Outcome::Done),
        Command::Analyze => run_analyze(cfg, extra, &mut out).map(Outcome::Done),
        Command::Verify => run_verify(cfg, extra, &mut out),
    }
}

#[derive(Serialize)]
struct LayerResult {
    #[serde(flatten)]
    layer: dislocade::layer::LayerSummary,
    eta: Option<f64>,
    corrector_residual: Option<f64>,
    relaxation_steps: usize,
    newton_steps: usize,
}

fn run_layer(cfg: &RunConfig, out: &mut Out) -> Result<Manifest, RunError> {
    let l = layer(cfg)?;
    let corr = if cfg.layer.corrector {
        Some(solve_corrector(&l, 1e-8)?)
    } else {
        None
    };
    let g = &l.u;
    out.csv(
        "layer.csv",
        &header(&["x", "u", "u_prime", "psi"]),
        (0..g.n()).map(|i| {
            let x = g.x(i);
            let psi = corr.as_ref().map_or(f64::NAN, |c| c.psi.samples[i]);
            row(&[x, g.samples[i], l.uprime.samples[i], psi])
        }),
    )?;
    let res = LayerResult {
        layer: l.summary(),
        eta: corr.as_ref().map(|c| c.eta),
        corrector_residual: corr.as_ref().map(|c| c.residual),
        relaxation_steps: l.relaxation_steps,
        newton_steps: l.newton_steps,
    };
    out.json("summary.json", cfg, &res)
}

#[derive(Serialize)]
struct OdeResult {
    gamma: f64,
    collision_time: Option<f64>,
    collision_pair: Option<(usize, usize)>,
    bound: Option<f64>,
    exponent_fit: Option<dislocade::particles::ExpansionFit>,
    t_last: f64,
    final_positions: Vec<f64>,
}

fn trajectory_rows(rec: &TrajectoryRecord) -> Vec<Vec<String>> {
    (0..rec.len())
        .map(|k| {
            let x = &rec.positions[k];
            let gap = x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
            let mut v = vec![rec.times[k]];
            v.extend_from_slice(x);
            v.push(if x.len() > 1 { gap } else { f64::NAN });
            row(&v)
        })
        .collect()
}

fn run_ode(cfg: &RunConfig, out: &mut Out) -> Result<Manifest, RunError> {
    let (g, _) = gamma(cfg)?;
    let sys = ode_system(cfg, g)?;
    let rec = integrate(&sys, cfg.ode.t_end, &step_control(cfg))?;
    let n = sys.n();
    let mut head = vec!["t".to_string()];
    head.extend((1..=n).map(|i| format!("x_{i}")));
    head.push("min_gap".into());
    out.csv("trajectory.csv", &head, trajectory_rows(&rec))?;
    let bound = if n == 2 && sys.orientations[0] != sys.orientations[1] {
        let theta0 = sys.positions[1] - sys.positions[0];
        collision_time_bound(theta0, cfg.s, g, sys.stress.sup()).ok()
    } else {
        None
    };
    let exponent_fit = match cfg.ode.fit_window.as_slice() {
        [a, b] => Some(expansion_fit(&rec, (*a, *b))?),
        _ => None,
    };
    let res = OdeResult {
        gamma: g,
        collision_time: rec.collision.as_ref().map(|c| c.time),
        collision_pair: rec.collision.as_ref().map(|c| c.pair),
        bound,
        exponent_fit,
        t_last: rec.t_last(),
        final_positions: rec.positions.last().cloned().unwrap_or_default(),
    };
    out.json("summary.json", cfg, &res)
}

#[derive(Serialize)]
struct PdeResult {
    epsilon: f64,
    s: f64,
    t_final: f64,
    sup_final: f64,
    crossings_initial: usize,
    crossings_final: usize,
    steps: usize,
    dt: f64,
    x0: f64,
    dx: f64,
    snapshot_times: Vec<f64>,
}

fn run_pde(cfg: &RunConfig, out: &mut Out) -> Result<Manifest, RunError> {
    let p = potential(cfg)?;
    let l = layer(cfg)?;
    let pcfg = pde_config(cfg);
    let st = stress(cfg.pde.sigma);
    let spec = InitialDatumSpec::new(cfg.pde.centers.clone(), cfg.pde.orientations.clone(), cfg.pde.epsilon)?;
    let v = build_initial_datum(&spec, &l, &st, &pcfg)?;
    let mut state = PDEState {
        epsilon: cfg.pde.epsilon,
        t: 0.0,
        v,
    };
    let crossings_initial = crossings(&state.v).len();
    let mut times = cfg.pde.snapshot_times.clone();
    times.retain(|t| *t >= 0.0 && *t <= cfg.pde.t_end);
    times.push(0.0);
    times.push(cfg.pde.t_end);
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    let opts = EvolveOptions {
        sample_times: times.clone(),
        track_every: cfg.pde.track_every,
        keep_fields: true,
    };
    let mut ev = Evolver::new(&state, &p, cfg.s, &st, &pcfg)?;
    let rec = ev.evolve(&mut state, cfg.pde.t_end, &opts)?;
    for (k, snap) in rec.snapshots.iter().enumerate() {
        let field = snap.field.as_ref().expect("fields requested");
        out.csv(
            &format!("snapshots/snapshot_{k:03}.csv"),
            &header(&["x", "v"]),
            field.iter().enumerate().map(|(i, v)| row(&[rec.x0 + i as f64 * rec.dx, *v])),
        )?;
    }
    let width = rec.tracks.iter().map(|t| t.x.len()).max().unwrap_or(0);
    let mut head = vec!["t".to_string()];
    head.extend((1..=width).map(|i| format!("crossing_{i}")));
    out.csv(
        "tracks.csv",
        &head,
        rec.tracks.iter().map(|tp| {
            let mut v = vec![tp.t];
            v.extend_from_slice(&tp.x);
            row(&v)
        }),
    )?;
    let res = PdeResult {
        epsilon: cfg.pde.epsilon,
        s: cfg.s,
        t_final: state.t,
        sup_final: state.v.sup_norm(),
        crossings_initial,
        crossings_final: crossings(&state.v).len(),
        steps: rec.steps,
        dt: rec.dt,
        x0: rec.x0,
        dx: rec.dx,
        snapshot_times: rec.snapshots.iter().map(|s| s.t).collect(),
    };
    out.json("summary.json", cfg, &res)
}

/// Builds the named scenario from the `[scenario]` section.
pub fn scenario_from_config(cfg: &RunConfig) -> Result<Scenario, RunError> {
    let sc = &cfg.scenario;
    let mut scenario = match sc.kind.as_str() {
        "segregate" => Scenario::segregate(sc.n, sc.k, sc.epsilon, cfg.s, sc.horizon)?,
        "balanced" => Scenario::balanced(sc.n, sc.epsilon, cfg.s, sc.horizon)?,
        _ => Scenario::unbalanced(sc.n, sc.k, sc.epsilon, cfg.s, sc.horizon)?,
    }
    .with_stress(stress(sc.sigma));
    scenario.amplitude = cfg.potential.amplitude;
    scenario.pde = pde_config(cfg);
    scenario.layer_half_width = scenario.layer_half_width.max(cfg.layer.half_width);
    scenario.layer_dx = cfg.layer.dx;
    scenario.layer_tol = cfg.layer.tol;
    scenario.validate()?;
    Ok(scenario)
}

fn write_scenario(out: &mut Out, res: &ScenarioResult) -> Result<(), RunError> {
    out.csv(
        "events.csv",
        &header(&[
            "index",
            "time",
            "contact_time",
            "pair_left",
            "pair_right",
            "position",
            "crossings_before",
            "crossings_after",
            "duration",
            "residual_amplitude",
        ]),
        res.events.iter().enumerate().map(|(k, e)| {
            let (a, b) = e.pair.map_or((String::new(), String::new()), |(a, b)| (a.to_string(), b.to_string()));
            vec![
                k.to_string(),
                fmt_f64(e.time),
                e.contact_time.map_or(String::new(), fmt_f64),
                a,
                b,
                fmt_f64(e.position),
                e.crossings_before.to_string(),
                e.crossings_after.to_string(),
                fmt_f64(e.duration),
                e.residual_amplitude.map_or(String::new(), fmt_f64),
            ]
        }),
    )?;
    out.csv(
        "series.csv",
        &header(&["t", "sup_abs", "plateau_dev", "count", "observable"]),
        res.series_thinned(4000).iter().map(|p| {
            vec![
                fmt_f64(p.t),
                fmt_f64(p.sup_abs),
                fmt_f64(p.plateau_dev),
                p.count.to_string(),
                fmt_f64(p.observable),
            ]
        }),
    )?;
    let tracks = res.tracks_thinned(4000);
    let width = tracks.iter().map(|t| t.x.len()).max().unwrap_or(0);
    let mut head = vec!["t".to_string()];
    head.extend((1..=width).map(|i| format!("crossing_{i}")));
    out.csv(
        "tracks.csv",
        &head,
        tracks.iter().map(|tp| {
            let mut v = vec![tp.t];
            v.extend_from_slice(&tp.x);
            row(&v)
        }),
    )?;
    if let Some(ode) = &res.ode {
        let n = ode.positions[0].len();
        let mut head = vec!["t".to_string()];
        head.extend((1..=n).map(|i| format!("x_{i}")));
        head.push("min_gap".into());
        out.csv("trajectory.csv", &head, trajectory_rows(ode))?;
    }
    for (k, snap) in res.snapshots.iter().enumerate() {
        out.csv(
            &format!("snapshots/{k:03}_{}.csv", snap.label),
            &header(&["x", "v"]),
            snap.field.iter().enumerate().map(|(i, v)| row(&[res.x0 + i as f64 * res.dx, *v])),
        )?;
    }
    Ok(())
}

fn run_scenario_cmd(cfg: &RunConfig, out: &mut Out) -> Result<Manifest, RunError> {
    let sc = scenario_from_config(cfg)?;
    let l = sc.solve_layer()?;
    let res = run_scenario_with_layer(&sc, &l)?;
    write_scenario(out, &res)?;
    out.json("summary.json", cfg, &res)
}

fn read_series(path: &Path) -> Result<(Vec<f64>, Vec<f64>), RunError> {
    let mut r = csv::Reader::from_path(path)?;
    let (mut t, mut v) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64, RunError> {
            rec.get(i)
                .ok_or_else(|| RunError::Io(format!("{}: row with fewer than two columns", path.display())))?
                .trim()
                .parse::<f64>()
                .map_err(|e| RunError::Io(format!("{}: {e}", path.display())))
        };
        t.push(parse(0)?);
        v.push(parse(1)?);
    }
    Ok((t, v))
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum AnalyzeResult {
    Fit(DecayFit),
    Compare { t_max: f64, deviation: Vec<f64>, epsilon: f64 },
    Residual(dislocade::analysis::ResidualReport),
    Stationary { patterns: Vec<dislocade::analysis::StationaryReport>, found_any: bool },
}

fn run_analyze(cfg: &RunConfig, extra: &Extra, out: &mut Out) -> Result<Manifest, RunError> {
    let res = match extra.analyze {
        AnalyzeKind::ExpFit | AnalyzeKind::PowFit => {
            let path = extra
                .input
                .as_ref()
                .ok_or_else(|| ConfigError("analyze expfit/powfit needs --input <csv>".into()))?;
            let (t, v) = read_series(path)?;
            let fit = if extra.analyze == AnalyzeKind::ExpFit {
                fit_exponential(&t, &v)?
            } else {
                fit_power(&t, &v)?
            };
            AnalyzeResult::Fit(fit)
        }
        AnalyzeKind::Compare => {
            let p = potential(cfg)?;
            let l = layer(cfg)?;
            let pcfg = pde_config(cfg);
            let st = stress(cfg.pde.sigma);
            let spec = InitialDatumSpec::new(cfg.pde.centers.clone(), cfg.pde.orientations.clone(), cfg.pde.epsilon)?;
            let v = build_initial_datum(&spec, &l, &st, &pcfg)?;
            let mut state = PDEState {
                epsilon: cfg.pde.epsilon,
                t: 0.0,
                v,
            };
            let sys = ParticleSystem::new(cfg.pde.centers.clone(), cfg.pde.orientations.clone(), cfg.s, l.gamma)?
                .with_stress(st.clone());
            let ode = integrate(&sys, cfg.pde.t_end, &step_control(cfg))?;
            let t_max = ode.t_last().min(cfg.pde.t_end);
            let mut ev = Evolver::new(&state, &p, cfg.s, &st, &pcfg)?;
            let opts = EvolveOptions {
                track_every: cfg.pde.track_every.max(1),
                ..EvolveOptions::default()
            };
            let rec = ev.evolve(&mut state, t_max, &opts)?;
            let n = sys.n();
            let tracks: Vec<_> = rec.tracks.into_iter().filter(|t| t.x.len() == n).collect();
            AnalyzeResult::Compare {
                t_max,
                deviation: compare_pde_ode(&tracks, &ode, t_max)?,
                epsilon: cfg.pde.epsilon,
            }
        }
        AnalyzeKind::Residual => {
            let p = potential(cfg)?;
            let l = layer(cfg)?;
            let corr = solve_corrector(&l, 1e-8)?;
            let eps = cfg.pde.epsilon;
            let st = stress(cfg.ode.sigma);
            let sch = BarrierSchedule::default_for(eps, cfg.s, l.beta, l.gamma, st.sup())?;
            let dx = eps * l.u.dx;
            let x = &cfg.ode.positions;
            let xs: Vec<f64> = (0..=400)
                .map(|i| x[0] - 3.0 + (x[x.len() - 1] - x[0] + 6.0) * i as f64 / 400.0)
                .collect();
            let base = ParticleSystem::new(x.clone(), cfg.ode.orientations.clone(), cfg.s, l.gamma)?.with_stress(st.clone());
            let (spec, times) = match extra.barrier {
                BarrierKind::HHat => {
                    let times: Vec<f64> = (1..=8).map(|i| sch.tau_eps * i as f64 / 9.0).collect();
                    (BarrierSpec::new(BarrierKind::HHat, eps, base, None, sch, cfg.pde.margin, dx)?, times)
                }
                kind => {
                    let sys = if kind == BarrierKind::VBar {
                        base.with_delta(sch.delta_eps, ShiftRule::MinusZetaDelta)?
                    } else {
                        base
                    };
                    let rec = integrate(&sys, cfg.pde.t_end, &step_control(cfg))?;
                    let t1 = rec.t_last();
                    let times: Vec<f64> = (0..8).map(|i| t1 * i as f64 / 7.0).collect();
                    (BarrierSpec::new(kind, eps, sys, Some(rec), sch, cfg.pde.margin, dx)?, times)
                }
            };
            AnalyzeResult::Residual(supersolution_residual(&spec, &l, &corr, &p, &st, &times, &xs)?)
        }
        AnalyzeKind::Stationary => {
            let g = match cfg.ode.gamma {
                GammaSpec::Value(g) => g,
                GammaSpec::Tag(_) => layer(cfg)?.gamma,
            };
            let z = &cfg.ode.orientations;
            let r = stationary_search(z, cfg.s, g, extra.starts, (0.1, 100.0), cfg.seed)?;
            AnalyzeResult::Stationary {
                found_any: r.found_below_threshold,
                patterns: vec![r],
            }
        }
    };
    out.json("summary.json", cfg, &res)
}

fn run_verify(cfg: &RunConfig, extra: &Extra, out: &mut Out) -> Result<Outcome, RunError> {
    let report = verify_suite(&extra.scope)?;
    for v in &report.verdicts {
        log::info!("{}", v.line());
    }
    let manifest = out.json("verdicts.json", cfg, &report)?;
    Ok(if report.all_passed() {
        Outcome::Done(manifest)
    } else {
        Outcome::VerificationFailed(manifest)
    })
}
