use std::sync::OnceLock;

use dislocade::evolver::*;
use dislocade::fracop::{GridFunction, QuadratureOrder, TailModel};
use dislocade::layer::{solve_layer, LayerProfile};
use dislocade::particles::StressModel;
use dislocade::potential::PeriodicPotential;
use dislocade::Error;

fn layer() -> &'static LayerProfile {
    static L: OnceLock<LayerProfile> = OnceLock::new();
    L.get_or_init(|| solve_layer(&PeriodicPotential::canonical(), 0.5, 20.0, 0.05, 1e-10).unwrap())
}

fn flat_state(value: f64, eps: f64) -> PDEState {
    let v = GridFunction::from_fn(-5.0, 0.01, 1001, |_| value, TailModel::flat(value, value)).unwrap();
    PDEState { epsilon: eps, t: 0.0, v }
}

fn datum(centers: Vec<f64>, z: Vec<i8>, eps: f64, cfg: &PdeConfig) -> PDEState {
    let spec = InitialDatumSpec::new(centers, z, eps).unwrap();
    let v = build_initial_datum(&spec, layer(), &StressModel::Zero, cfg).unwrap();
    PDEState { epsilon: eps, t: 0.0, v }
}

#[test]
fn integer_constants_are_stationary() {
    let p = PeriodicPotential::canonical();
    let cfg = PdeConfig::default();
    for value in [0.0, 1.0, -2.0] {
        let mut st = flat_state(value, 0.1);
        evolve(&mut st, 0.01, &p, 0.5, &StressModel::Zero, &cfg, &EvolveOptions::default()).unwrap();
        assert!(st.v.samples.iter().all(|x| (x - value).abs() < 1e-12));
        assert!((st.t - 0.01).abs() < 1e-15);
    }
}

#[test]
fn quarter_plateau_relaxes_monotonically_to_zero() {
    let p = PeriodicPotential::canonical();
    let cfg = PdeConfig::default();
    let mut st = flat_state(0.25, 0.1);
    let mut last = 0.25;
    let mut ev = Evolver::new(&st, &p, 0.5, &StressModel::Zero, &cfg).unwrap();
    let dt = ev.dt_max();
    for _ in 0..400 {
        ev.step(&mut st, dt).unwrap();
        let m = st.v.samples[500];
        assert!(m < last && m > 0.0);
        last = m;
    }
    assert!(last < 1e-3, "{last}");
    assert!((st.v.tail.left_limit - last).abs() < 1e-9);
}

#[test]
fn time_step_respects_both_limits() {
    let p = PeriodicPotential::canonical();
    let cfg = PdeConfig::default();
    let eps = 0.1;
    let st = datum(vec![0.0], vec![1], eps, &cfg);
    let ev = Evolver::new(&st, &p, 0.5, &StressModel::Zero, &cfg).unwrap();
    assert!(ev.dt_max() <= cfg.dt_reaction * eps.powi(2) / p.beta + 1e-18);
    assert!(ev.dt_max() > 0.0);
}

#[test]
fn datum_has_expected_plateaus_and_crossings() {
    let cfg = PdeConfig::default();
    let st = datum(vec![-1.0, 0.0, 1.0], vec![1, 1, -1], 0.1, &cfg);
    assert_eq!(st.v.tail.left_limit, 0.0);
    assert_eq!(st.v.tail.right_limit, 1.0);
    let cr = crossings(&st.v);
    let levels: Vec<f64> = cr.iter().map(|c| c.level).collect();
    assert_eq!(levels, vec![0.5, 1.5, 1.5]);
    for (c, x) in cr.iter().zip([-1.0, 0.0, 1.0]) {
        assert!((c.x - x).abs() < 0.5 * 0.1, "{} vs {x}", c.x);
    }
    assert_eq!(cr.iter().map(|c| c.up).collect::<Vec<_>>(), vec![true, true, false]);
}

#[test]
fn single_layer_stays_in_place() {
    let p = PeriodicPotential::canonical();
    let cfg = PdeConfig {
        dx_rel: layer().u.dx,
        margin: 2.0,
        order: QuadratureOrder::HighOrder,
        ..PdeConfig::default()
    };
    let eps = 0.1;
    let mut st = datum(vec![0.0], vec![1], eps, &cfg);
    let dx = st.v.dx;
    let rec = evolve(&mut st, 0.05, &p, 0.5, &StressModel::Zero, &cfg, &EvolveOptions::default()).unwrap();
    assert!(rec.steps > 10);
    let cr = crossings(&st.v);
    assert_eq!(cr.len(), 1);
    assert!(cr[0].x.abs() < 2.0 * dx, "drift {}", cr[0].x);
}

#[test]
fn ordered_data_stay_ordered() {
    let p = PeriodicPotential::canonical();
    let cfg = PdeConfig::default();
    let eps = 0.1;
    let mut lo = datum(vec![-0.5, 0.5], vec![1, -1], eps, &cfg);
    let mut hi = lo.clone();
    for (i, v) in hi.v.samples.iter_mut().enumerate() {
        let x = lo.v.x(i);
        *v += 0.05 * (-x * x).exp();
    }
    let opts = EvolveOptions::default();
    evolve(&mut lo, 0.02, &p, 0.5, &StressModel::Zero, &cfg, &opts).unwrap();
    evolve(&mut hi, 0.02, &p, 0.5, &StressModel::Zero, &cfg, &opts).unwrap();
    let worst = lo
        .v
        .samples
        .iter()
        .zip(&hi.v.samples)
        .map(|(a, b)| a - b)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(worst <= 1e-12, "order violated by {worst}");
}

#[test]
fn constant_stress_shifts_the_plateau() {
    let p = PeriodicPotential::canonical();
    let cfg = PdeConfig::default();
    let eps = 0.1;
    let sigma = 0.2;
    let mut st = flat_state(0.0, eps);
    evolve(&mut st, 0.05, &p, 0.5, &StressModel::Constant(sigma), &cfg, &EvolveOptions::default()).unwrap();
    let want = eps * sigma / p.beta;
    let got = st.v.samples[500];
    assert!((got - want).abs() < 0.05 * want, "{got} vs {want}");
}

#[test]
fn opposite_pair_annihilates() {
    let p = PeriodicPotential::canonical();
    let cfg = PdeConfig::default();
    let mut st = datum(vec![-0.5, 0.5], vec![1, -1], 0.1, &cfg);
    let opts = EvolveOptions {
        sample_times: vec![0.02],
        track_every: 50,
        keep_fields: true,
    };
    let rec = evolve(&mut st, 0.15, &p, 0.5, &StressModel::Zero, &cfg, &opts).unwrap();
    assert_eq!(rec.snapshots.len(), 1);
    assert_eq!(rec.snapshots[0].crossings.len(), 2);
    assert!(rec.snapshots[0].field.is_some());
    assert!(crossings(&st.v).is_empty());
    assert!(st.v.sup_norm() < 0.1);
    let gaps: Vec<f64> = rec.tracks.iter().filter(|t| t.x.len() == 2).map(|t| t.x[1] - t.x[0]).collect();
    assert!(gaps.windows(2).all(|w| w[1] <= w[0] + 1e-9));
}

#[test]
fn observer_can_stop_the_run() {
    let p = PeriodicPotential::canonical();
    let cfg = PdeConfig::default();
    let mut st = flat_state(0.25, 0.1);
    let mut ev = Evolver::new(&st, &p, 0.5, &StressModel::Zero, &cfg).unwrap();
    let mut calls = 0;
    let rec = ev
        .evolve_with(&mut st, 1.0, &EvolveOptions::default(), |_| {
            calls += 1;
            calls < 5
        })
        .unwrap();
    assert_eq!(rec.steps, 5);
    assert!(st.t < 1.0);
}

#[test]
fn bad_configuration_is_rejected() {
    let p = PeriodicPotential::canonical();
    let st = flat_state(0.0, 0.1);
    let cfg = PdeConfig {
        dx_rel: 0.2,
        ..PdeConfig::default()
    };
    assert!(matches!(
        Evolver::new(&st, &p, 0.5, &StressModel::Zero, &cfg),
        Err(Error::InvalidParameter(_))
    ));
    assert!(Evolver::new(&st, &p, 1.5, &StressModel::Zero, &PdeConfig::default()).is_err());
    let mut ev = Evolver::new(&st, &p, 0.5, &StressModel::Zero, &PdeConfig::default()).unwrap();
    let mut s2 = st.clone();
    assert!(ev.step(&mut s2, -1.0).is_err());
    assert!(InitialDatumSpec::new(vec![1.0, 0.0], vec![1, -1], 0.1).is_err());
}
