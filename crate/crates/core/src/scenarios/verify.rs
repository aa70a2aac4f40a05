//! The acceptance battery A1–A11 as library code, shared by the command-line
//! `verify` subcommand and the integration tests.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::{run_scenario_with_layer, Scenario};
use crate::analysis::{compare_pde_ode, stationary_search, supersolution_residual};
use crate::error::{Error, Result};
use crate::evolver::{BarrierKind, BarrierSchedule, BarrierSpec};
use crate::fracop::{frac_laplacian, GridFunction, QuadratureConfig, TailModel};
use crate::layer::{solve_corrector, solve_layer, LayerProfile};
use crate::oracle;
use crate::particles::{expansion_fit, integrate, ParticleSystem, ShiftRule, StepControl, StressModel};
use crate::potential::PeriodicPotential;
use crate::report::to_json;

/// Outcome of one criterion. `measured` holds every number the decision used.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionVerdict {
    pub id: String,
    pub title: String,
    pub passed: bool,
    pub measured: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub runtime_s: f64,
    #[serde(skip)]
    pub budget_s: f64,
}

impl CriterionVerdict {
    fn new(id: &str, title: &str, budget_s: f64) -> Self {
        CriterionVerdict {
            id: id.into(),
            title: title.into(),
            passed: true,
            measured: BTreeMap::new(),
            notes: Vec::new(),
            runtime_s: 0.0,
            budget_s,
        }
    }

    fn put(&mut self, key: impl Into<String>, v: f64) {
        self.measured.insert(key.into(), v);
    }

    /// Records `value` and fails the verdict unless `ok`.
    fn check(&mut self, key: impl Into<String>, value: f64, ok: bool) {
        let key = key.into();
        if !ok {
            self.passed = false;
            self.notes.push(format!("{key} = {value:.6e} outside tolerance"));
        }
        self.put(key, value);
    }

    fn fail(&mut self, why: String) {
        self.passed = false;
        self.notes.push(why);
    }

    pub fn within_budget(&self) -> bool {
        self.runtime_s <= self.budget_s
    }

    /// One human-readable line.
    pub fn line(&self) -> String {
        format!(
            "{} {}: {} ({:.1} s, budget {:.0} s{})",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.runtime_s,
            self.budget_s,
            if self.within_budget() { "" } else { ", over budget" }
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub scope: String,
    pub verdicts: Vec<CriterionVerdict>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn get(&self, id: &str) -> Option<&CriterionVerdict> {
        self.verdicts.iter().find(|v| v.id == id)
    }
}

type Criterion = fn() -> CriterionVerdict;

const CRITERIA: [(&str, Criterion); 10] = [
    ("A1", a1_layer_oracle),
    ("A2", a2_operator_accuracy),
    ("A3", a3_collision_time),
    ("A4", a4_expansion_law),
    ("A5", a5_pde_ode_consistency),
    ("A6", a6_balanced_relaxation),
    ("A7", a7_unbalanced_rates),
    ("A8", a8_segregate_structure),
    ("A9", a9_no_equilibria),
    ("A10", a10_supersolution_residuals),
];

/// Runs one criterion by id (`"A1"` … `"A11"`).
pub fn run_criterion(id: &str) -> Result<CriterionVerdict> {
    if id == "A11" {
        return Ok(a11_determinism(&CRITERIA.iter().map(|(i, _)| *i).collect::<Vec<_>>()));
    }
    let (_, f) = CRITERIA
        .iter()
        .find(|(i, _)| *i == id)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown criterion {id:?}")))?;
    Ok(timed(*f))
}

fn timed(f: Criterion) -> CriterionVerdict {
    let t0 = Instant::now();
    let mut v = f();
    v.runtime_s = t0.elapsed().as_secs_f64();
    v
}

/// Scope `"ode"` runs A1–A4, `"pde"` A5–A8, `"all"` everything including the
/// determinism re-run. Criteria run concurrently.
pub fn verify_suite(scope: &str) -> Result<VerifyReport> {
    let ids: Vec<&str> = match scope {
        "ode" => vec!["A1", "A2", "A3", "A4"],
        "pde" => vec!["A5", "A6", "A7", "A8"],
        "all" => CRITERIA.iter().map(|(i, _)| *i).collect(),
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown verify scope {other:?} (expected ode, pde or all)"
            )))
        }
    };
    let mut verdicts: Vec<CriterionVerdict> = ids
        .par_iter()
        .map(|id| run_criterion(id).expect("ids come from the table"))
        .collect();
    if scope == "all" {
        let t0 = Instant::now();
        let mut a11 = compare_reruns(&verdicts);
        a11.runtime_s = t0.elapsed().as_secs_f64();
        verdicts.push(a11);
    }
    Ok(VerifyReport {
        scope: scope.into(),
        verdicts,
    })
}

fn compare_reruns(first: &[CriterionVerdict]) -> CriterionVerdict {
    let mut v = CriterionVerdict::new("A11", "re-runs give byte-identical summary JSON", f64::INFINITY);
    let second: Vec<CriterionVerdict> = first
        .par_iter()
        .map(|c| run_criterion(&c.id).expect("known id"))
        .collect();
    let mut identical = 0.0;
    for (a, b) in first.iter().zip(&second) {
        match (to_json(a), to_json(b)) {
            (Ok(x), Ok(y)) if x == y => identical += 1.0,
            (Ok(_), Ok(_)) => v.fail(format!("{} summary differs between runs", a.id)),
            (Err(e), _) | (_, Err(e)) => v.fail(format!("{}: {e}", a.id)),
        }
    }
    v.put("identical", identical);
    v.put("compared", first.len() as f64);
    v
}

fn a11_determinism(ids: &[&str]) -> CriterionVerdict {
    let t0 = Instant::now();
    let first: Vec<CriterionVerdict> = ids
        .par_iter()
        .map(|id| run_criterion(id).expect("known id"))
        .collect();
    let mut v = compare_reruns(&first);
    v.runtime_s = t0.elapsed().as_secs_f64();
    v
}

fn canonical_layer(s: f64) -> Result<LayerProfile> {
    let half = if s < 0.5 { 40.0 } else { 20.0 };
    solve_layer(&PeriodicPotential::canonical(), s, half, 0.05, 1e-10)
}

fn a1_layer_oracle() -> CriterionVerdict {
    let mut v = CriterionVerdict::new("A1", "half-order layer matches ½ + arctan(x)/π", 60.0);
    let p = PeriodicPotential::canonical();
    let layer = match solve_layer(&p, 0.5, 20.0, 0.05, 1e-10) {
        Ok(l) => l,
        Err(e) => {
            v.fail(e.to_string());
            return v;
        }
    };
    let g = &layer.u;
    let err = (0..g.n())
        .filter(|i| g.x(*i).abs() <= 20.0 + 1e-9)
        .map(|i| (g.samples[i] - oracle::arctan_layer(g.x(i))).abs())
        .fold(0.0, f64::max);
    v.check("sup_error", err, err <= 1e-3);
    let gerr = (layer.gamma - 2.0 * PI).abs() / (2.0 * PI);
    v.put("gamma", layer.gamma);
    v.check("gamma_rel_error", gerr, gerr <= 0.01);
    let res = [0.0, 0.5, 1.0, 3.0]
        .iter()
        .map(|x| (oracle::arctan_oracle(*x) - p.dw(oracle::arctan_layer(*x))).abs())
        .fold(0.0, f64::max);
    v.check("oracle_residual", res, res <= 1e-8);
    v
}

fn a2_operator_accuracy() -> CriterionVerdict {
    let mut v = CriterionVerdict::new("A2", "operator on exp(−x²) agrees with quadrature oracle", 10.0);
    let g = match GridFunction::symmetric(12.0, 0.01, |x| (-x * x).exp(), TailModel::flat(0.0, 0.0)) {
        Ok(g) => g,
        Err(e) => {
            v.fail(e.to_string());
            return v;
        }
    };
    let cfg = QuadratureConfig::for_grid(&g);
    let mut worst = 0.0_f64;
    for s in [0.25, 0.5, 0.75] {
        for x in [0.0, 0.5, -0.5, 1.0, -1.0] {
            match frac_laplacian(&g, s, x, &cfg) {
                Ok(val) => worst = worst.max((val - oracle::gaussian_oracle(s, x)).abs()),
                Err(e) => v.fail(e.to_string()),
            }
        }
    }
    v.check("max_abs_error", worst, worst <= 1e-6);
    v
}

fn a3_collision_time() -> CriterionVerdict {
    let mut v = CriterionVerdict::new("A3", "two-particle collision time 1/(8π)", 5.0);
    let run = || -> Result<f64> {
        let sys = ParticleSystem::new(vec![-0.5, 0.5], vec![1, -1], 0.5, 2.0 * PI)?;
        let rec = integrate(&sys, 1.0, &StepControl::default())?;
        rec.collision
            .map(|c| c.time)
            .ok_or_else(|| Error::NoConvergence("no collision".into()))
    };
    match run() {
        Ok(t) => {
            let exact = 1.0 / (8.0 * PI);
            v.put("t_c", t);
            v.check("rel_error", ((t - exact) / exact).abs(), ((t - exact) / exact).abs() <= 1e-3);
        }
        Err(e) => v.fail(e.to_string()),
    }
    v
}

fn a4_expansion_law() -> CriterionVerdict {
    let mut v = CriterionVerdict::new("A4", "same-orientation expansion exponent 1/(1+2s)", 30.0);
    for s in [0.25, 0.5, 0.75] {
        for n in [2usize, 4] {
            let run = || -> Result<f64> {
                let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
                let sys = ParticleSystem::new(x, vec![1; n], s, 2.0 * PI)?;
                let rec = integrate(&sys, 1e5, &StepControl::default())?;
                Ok(expansion_fit(&rec, (1e3, 1e5))?.exponent)
            };
            match run() {
                Ok(e) => {
                    let want = 1.0 / (1.0 + 2.0 * s);
                    v.put(format!("exponent_s{s}_n{n}"), e);
                    v.check(format!("error_s{s}_n{n}"), (e - want).abs(), (e - want).abs() <= 0.03);
                }
                Err(e) => v.fail(format!("s={s} N={n}: {e}")),
            }
        }
    }
    v
}

fn a5_pde_ode_consistency() -> CriterionVerdict {
    let mut v = CriterionVerdict::new("A5", "PDE crossings follow the particle ODE", 300.0);
    let run = || -> Result<Vec<f64>> {
        let layer = canonical_layer(0.5)?;
        [0.1, 0.05]
            .par_iter()
            .map(|eps| {
                let sys = ParticleSystem::new(vec![-0.5, 0.5], vec![1, -1], 0.5, layer.gamma)?;
                let tc = integrate(&sys, 1.0, &StepControl::default())?
                    .collision
                    .ok_or_else(|| Error::NoConvergence("no particle collision".into()))?
                    .time;
                let sc = Scenario::balanced(2, *eps, 0.5, 0.8 * tc)?;
                let res = run_scenario_with_layer(&sc, &layer)?;
                let ode = res.ode.as_ref().expect("scenario keeps its ODE reference");
                let dev = compare_pde_ode(&res.tracks, ode, 0.8 * tc)?;
                Ok(dev.into_iter().fold(0.0, f64::max))
            })
            .collect()
    };
    match run() {
        Ok(d) => {
            v.put("deviation_eps0.1", d[0]);
            v.check("deviation_eps0.05", d[1], d[1] <= 5.0 * 0.05);
            v.check("shrink_ratio", d[1] / d[0], d[1] < d[0]);
        }
        Err(e) => v.fail(e.to_string()),
    }
    v
}

fn a6_balanced_relaxation() -> CriterionVerdict {
    let mut v = CriterionVerdict::new("A6", "balanced pair relaxes exponentially", 300.0);
    let eps = 0.1;
    let run = || -> Result<super::ScenarioResult> {
        let layer = canonical_layer(0.5)?;
        let sc = Scenario::balanced(2, eps, 0.5, 1.0)?;
        run_scenario_with_layer(&sc, &layer)
    };
    match run() {
        Ok(res) => {
            v.check("events", res.events.len() as f64, res.events.len() == 1);
            v.check("crossings_final", res.crossings_final as f64, res.crossings_final == 0);
            match &res.report.decay {
                Some(fit) => {
                    let floor = res.layer.beta / (2.0 * eps.powf(2.0));
                    v.put("rate_floor", floor);
                    v.check("rate", fit.rate, fit.rate >= floor);
                    v.check("r_squared", fit.r_squared, fit.r_squared >= 0.99);
                    v.put("samples", fit.samples as f64);
                }
                None => v.fail("no exponential fit after the last annihilation".into()),
            }
        }
        Err(e) => v.fail(e.to_string()),
    }
    v
}

/// Two equal layers placed so that the particle separation is exactly
/// `θ₀(1+t)^{1/(1+2s)}`.
fn l2_scenario(s: f64, layer: &LayerProfile, eps: f64, horizon: f64) -> Result<Scenario> {
    let theta0 = ((1.0 + 2.0 * s) * layer.gamma / s).powf(1.0 / (1.0 + 2.0 * s));
    let mut sc = Scenario::custom(vec![1, 1], vec![-0.5 * theta0, 0.5 * theta0], eps, s, horizon)?;
    sc.kind = super::ScenarioKind::Unbalanced;
    sc.layer_half_width = layer.half_width();
    let theta_end = theta0 * (1.0 + horizon).powf(1.0 / (1.0 + 2.0 * s));
    sc.pde.margin = 20.0 + 0.5 * (theta_end - theta0);
    Ok(sc)
}

fn a7_unbalanced_rates() -> CriterionVerdict {
    let mut v = CriterionVerdict::new("A7", "unbalanced power law and odd-case drift", 600.0);
    let eps = 0.1;
    let jobs: Vec<(f64, f64)> = vec![(0.5, 10.0), (0.25, 7.0)];
    let even: Vec<Result<(f64, f64)>> = jobs
        .par_iter()
        .map(|(s, horizon)| {
            let layer = canonical_layer(*s)?;
            let sc = l2_scenario(*s, &layer, eps, *horizon)?;
            let res = run_scenario_with_layer(&sc, &layer)?;
            let fit = res
                .report
                .decay
                .ok_or_else(|| Error::InsufficientData("no power-law fit".into()))?;
            Ok((fit.rate, fit.r_squared))
        })
        .collect();
    for ((s, _), r) in jobs.iter().zip(even) {
        match r {
            Ok((rate, r2)) => {
                let want = 2.0 * s / (2.0 * s + 1.0);
                v.put(format!("exponent_s{s}"), rate);
                v.put(format!("r_squared_s{s}"), r2);
                v.check(format!("exponent_error_s{s}"), (rate - want).abs(), (rate - want).abs() <= 0.1);
            }
            Err(e) => v.fail(format!("l=2 s={s}: {e}")),
        }
    }
    let odd = || -> Result<super::ScenarioResult> {
        let layer = canonical_layer(0.5)?;
        let sc = Scenario::unbalanced(3, 2, eps, 0.5, 2.0)?;
        run_scenario_with_layer(&sc, &layer)
    };
    match odd() {
        Ok(res) => {
            v.check("odd_crossings_final", res.crossings_final as f64, res.crossings_final == 1);
            match &res.drift {
                Some(d) => {
                    v.check("odd_alpha", d.alpha, d.alpha > 0.0);
                    v.put("odd_alpha_r_squared", d.r_squared);
                    v.put("odd_direction", d.direction);
                }
                None => v.fail("no drift fit for the l=1 run".into()),
            }
        }
        Err(e) => v.fail(format!("l=1: {e}")),
    }
    v
}

fn a8_segregate_structure() -> CriterionVerdict {
    let mut v = CriterionVerdict::new("A8", "segregate N=4: middle pair annihilates first", 600.0);
    let eps = 0.05;
    let run = || -> Result<super::ScenarioResult> {
        let layer = canonical_layer(0.5)?;
        let sys = ParticleSystem::new(vec![-1.5, -0.5, 0.5, 1.5], vec![1, 1, -1, -1], 0.5, layer.gamma)?;
        let tc = integrate(&sys, 10.0, &StepControl::default())?
            .collision
            .ok_or_else(|| Error::NoConvergence("no particle collision".into()))?
            .time;
        let sc = Scenario::segregate(4, 2, eps, 0.5, tc + 0.2)?;
        run_scenario_with_layer(&sc, &layer)
    };
    match run() {
        Ok(res) => match res.events.first() {
            Some(e) => {
                let middle = e.pair == Some((1, 2));
                v.check("first_pair_is_middle", if middle { 1.0 } else { 0.0 }, middle);
                v.put("first_event_time", e.time);
                v.check(
                    "count_drop",
                    (e.crossings_before - e.crossings_after) as f64,
                    e.crossings_before == 4 && e.crossings_after == 2,
                );
                match res.reduced_ode_deviation {
                    Some(d) => v.check("reduced_deviation", d, d <= 5.0 * eps),
                    None => v.fail("no surviving-crossing comparison".into()),
                }
            }
            None => v.fail("no annihilation before the horizon".into()),
        },
        Err(e) => v.fail(e.to_string()),
    }
    v
}

fn a9_no_equilibria() -> CriterionVerdict {
    let mut v = CriterionVerdict::new("A9", "no stationary particle configurations", 120.0);
    let mut worst = f64::INFINITY;
    for n in 2..=4usize {
        for mask in 0..(1u32 << n) {
            let z: Vec<i8> = (0..n).map(|i| if mask >> i & 1 == 1 { 1 } else { -1 }).collect();
            match stationary_search(&z, 0.5, 2.0 * PI, 100, (0.1, 100.0), 7) {
                Ok(r) => worst = worst.min(r.best_residual),
                Err(e) => v.fail(format!("{z:?}: {e}")),
            }
        }
    }
    v.check("min_residual", worst, worst >= crate::analysis::STATIONARY_THRESHOLD);
    v
}

fn a10_supersolution_residuals() -> CriterionVerdict {
    let mut v = CriterionVerdict::new("A10", "barrier supersolution residuals", 300.0);
    let eps = 0.1;
    let run = || -> Result<(f64, f64)> {
        let p = PeriodicPotential::canonical();
        let layer = solve_layer(&p, 0.5, 20.0, 0.05, 1e-10)?;
        let corr = solve_corrector(&layer, 1e-8)?;
        let sch = BarrierSchedule::default_for(eps, 0.5, layer.beta, layer.gamma, 0.0)?;
        let dx = eps * layer.u.dx;

        let sys = ParticleSystem::new(vec![-0.5, 0.5], vec![1, -1], 0.5, layer.gamma)?
            .with_delta(sch.delta_eps, ShiftRule::MinusZetaDelta)?;
        let rec = integrate(&sys, 0.2, &StepControl::default())?;
        let spec = BarrierSpec::new(BarrierKind::VBar, eps, sys, Some(rec), sch.clone(), 20.0, dx)?;
        let times: Vec<f64> = (0..8).map(|i| 0.2 * i as f64 / 7.0).collect();
        let xs: Vec<f64> = (0..=400).map(|i| -3.0 + 6.0 * i as f64 / 400.0).collect();
        let vbar = supersolution_residual(&spec, &layer, &corr, &p, &StressModel::Zero, &times, &xs)?;

        let surv = ParticleSystem::new(vec![-1.5, 1.5], vec![1, -1], 0.5, layer.gamma)?;
        let spec = BarrierSpec::new(BarrierKind::HHat, eps, surv, None, sch.clone(), 20.0, dx)?;
        let times: Vec<f64> = (1..=8).map(|i| sch.tau_eps * i as f64 / 9.0).collect();
        let xs: Vec<f64> = (0..=600).map(|i| -4.5 + 9.0 * i as f64 / 600.0).collect();
        let hhat = supersolution_residual(&spec, &layer, &corr, &p, &StressModel::Zero, &times, &xs)?;
        Ok((vbar.min, hhat.min))
    };
    match run() {
        Ok((a, b)) => {
            v.check("vbar_min_residual", a, a >= -1e-3);
            v.check("hhat_min_residual", b, b >= -1e-3);
        }
        Err(e) => v.fail(e.to_string()),
    }
    v
}
