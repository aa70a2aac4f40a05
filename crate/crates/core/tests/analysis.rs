use std::f64::consts::PI;
use std::sync::OnceLock;

use dislocade::analysis::*;
use dislocade::evolver::*;
use dislocade::layer::{solve_corrector, solve_layer, Corrector, LayerProfile};
use dislocade::particles::*;
use dislocade::potential::PeriodicPotential;
use dislocade::Error;

fn profiles() -> &'static (LayerProfile, Corrector) {
    static P: OnceLock<(LayerProfile, Corrector)> = OnceLock::new();
    P.get_or_init(|| {
        let l = solve_layer(&PeriodicPotential::canonical(), 0.5, 20.0, 0.05, 1e-10).unwrap();
        let c = solve_corrector(&l, 1e-8).unwrap();
        (l, c)
    })
}

fn vbar_spec(eps: f64) -> (BarrierSpec, ParticleSystem) {
    let (l, _) = profiles();
    let sch = BarrierSchedule::default_for(eps, 0.5, l.beta, l.gamma, 0.0).unwrap();
    let sys = ParticleSystem::new(vec![-0.5, 0.5], vec![1, -1], 0.5, l.gamma)
        .unwrap()
        .with_delta(sch.delta_eps, ShiftRule::MinusZetaDelta)
        .unwrap();
    let rec = integrate(&sys, 0.2, &StepControl::default()).unwrap();
    let spec = BarrierSpec::new(BarrierKind::VBar, eps, sys.clone(), Some(rec), sch, 20.0, eps * l.u.dx).unwrap();
    (spec, sys)
}

#[test]
fn schedule_values_at_reference_point() {
    let sch = BarrierSchedule::default_for(0.1, 0.5, PI, 2.0 * PI, 0.0).unwrap();
    assert!((sch.theta_eps - 0.1f64.powf(0.4)).abs() < 1e-15);
    assert!((sch.mu - PI / 4.0).abs() < 1e-15);
    assert!(sch.alpha > 0.25 && sch.alpha < 0.5);
    assert!(sch.gamma_prime > 0.0);
    assert!(sch.tau_eps > 0.0 && sch.t_eps > 0.0);
    assert!(BarrierSchedule::default_for(1.5, 0.5, PI, 2.0 * PI, 0.0).is_err());
}

#[test]
fn upper_barrier_starts_above_the_datum() {
    let (l, c) = profiles();
    let eps = 0.1;
    let (spec, _) = vbar_spec(eps);
    let b = build_barrier(&spec, l, c, 0.0).unwrap();
    let d = InitialDatumSpec::new(vec![-0.5, 0.5], vec![1, -1], eps).unwrap();
    let cfg = PdeConfig {
        dx_rel: l.u.dx,
        ..PdeConfig::default()
    };
    let v0 = build_initial_datum(&d, l, &StressModel::Zero, &cfg).unwrap();
    assert_eq!(b.n(), v0.n());
    let worst = b
        .samples
        .iter()
        .zip(&v0.samples)
        .map(|(a, b)| b - a)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(worst <= 0.0, "datum exceeds barrier by {worst}");
}

#[test]
fn barrier_time_range_is_checked() {
    let (l, c) = profiles();
    let (spec, _) = vbar_spec(0.1);
    assert!(matches!(build_barrier(&spec, l, c, 5.0), Err(Error::OutOfDomain(_))));
}

#[test]
fn single_static_layer_has_vanishing_residual() {
    let (l, c) = profiles();
    let p = PeriodicPotential::canonical();
    let eps = 0.1;
    let sch = BarrierSchedule::default_for(eps, 0.5, l.beta, l.gamma, 0.0).unwrap();
    let sys = ParticleSystem::new(vec![0.0], vec![1], 0.5, l.gamma).unwrap();
    let rec = integrate(&sys, 0.1, &StepControl::default()).unwrap();
    let spec = BarrierSpec::new(BarrierKind::VBar, eps, sys, Some(rec), sch, 2.0, eps * l.u.dx).unwrap();
    let times = [0.02, 0.05, 0.08];
    let xs: Vec<f64> = (0..=100).map(|i| -1.0 + 0.02 * i as f64).collect();
    let r = supersolution_residual(&spec, l, c, &p, &StressModel::Zero, &times, &xs).unwrap();
    assert!(r.min.abs() < 1e-6, "residual {}", r.min);
    assert_eq!(r.samples, 3 * 101);
}

#[test]
fn residual_requires_separated_centers() {
    let (l, c) = profiles();
    let p = PeriodicPotential::canonical();
    let eps = 0.1;
    let sch = BarrierSchedule::default_for(eps, 0.5, l.beta, l.gamma, 0.0).unwrap();
    let sys = ParticleSystem::new(vec![-0.1, 0.1], vec![1, -1], 0.5, l.gamma).unwrap();
    let rec = integrate(&sys, 1e-4, &StepControl::default()).unwrap();
    let spec = BarrierSpec::new(BarrierKind::VBar, eps, sys, Some(rec), sch, 2.0, eps * l.u.dx).unwrap();
    let r = supersolution_residual(&spec, l, c, &p, &StressModel::Zero, &[0.0], &[0.0]);
    assert!(matches!(r, Err(Error::PreconditionViolated(_))));
}

#[test]
fn fits_recover_synthetic_rates() {
    let t: Vec<f64> = (0..50).map(|i| 0.01 * i as f64).collect();
    let e: Vec<f64> = t.iter().map(|t| 3.0 * (-120.0 * t).exp()).collect();
    let f = fit_exponential(&t, &e).unwrap();
    assert!((f.rate - 120.0).abs() < 1e-8 && (f.amplitude - 3.0).abs() < 1e-8);
    let t: Vec<f64> = (0..50).map(|i| 0.5 * i as f64).collect();
    let pw: Vec<f64> = t.iter().map(|t| 0.2 * (1.0 + t).powf(-0.5)).collect();
    let f = fit_power(&t, &pw).unwrap();
    assert!((f.rate - 0.5).abs() < 1e-10 && f.r_squared > 0.999_999);
    assert!(matches!(fit_power(&t[..5], &pw[..5]), Err(Error::InsufficientData(_))));
    assert!(matches!(fit_power(&t, &pw[1..]), Err(Error::ShapeMismatch(_))));
}

#[test]
fn pde_ode_comparison_on_exact_tracks() {
    let sys = ParticleSystem::new(vec![-0.5, 0.5], vec![1, -1], 0.5, 2.0 * PI).unwrap();
    let rec = integrate(&sys, 1.0, &StepControl::default()).unwrap();
    let tracks: Vec<TrackPoint> = (0..20)
        .map(|i| {
            let t = 0.001 * i as f64;
            TrackPoint { t, x: rec.at(t).unwrap() }
        })
        .collect();
    let d = compare_pde_ode(&tracks, &rec, 0.01).unwrap();
    assert!(d.iter().all(|v| *v < 1e-12));
    let bad = vec![TrackPoint { t: 0.0, x: vec![0.0] }];
    assert!(matches!(compare_pde_ode(&bad, &rec, 0.01), Err(Error::ShapeMismatch(_))));
    assert!(matches!(compare_pde_ode(&tracks, &rec, -1.0), Err(Error::InsufficientData(_))));
}

#[test]
fn stationary_search_is_reproducible_and_finds_nothing() {
    let a = stationary_search(&[1, -1, 1], 0.5, 2.0 * PI, 40, (0.1, 100.0), 3).unwrap();
    let b = stationary_search(&[1, -1, 1], 0.5, 2.0 * PI, 40, (0.1, 100.0), 3).unwrap();
    assert_eq!(a.best_residual.to_bits(), b.best_residual.to_bits());
    assert_eq!(a.best_gaps, b.best_gaps);
    assert!(!a.found_below_threshold);
    assert!(a.best_gaps.iter().all(|g| *g >= 0.1 && *g <= 100.0));
    let same = stationary_search(&[1, 1], 0.5, 2.0 * PI, 20, (0.1, 100.0), 1).unwrap();
    assert!((same.best_gaps[0] - 100.0).abs() < 1e-6);
}
