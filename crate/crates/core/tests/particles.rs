use std::f64::consts::PI;

use dislocade::particles::*;
use dislocade::Error;

const G: f64 = 2.0 * PI;

fn pair(z2: i8, s: f64) -> ParticleSystem {
    ParticleSystem::new(vec![0.0, 1.0], vec![1, z2], s, G).unwrap()
}

#[test]
fn opposite_pair_collides_at_closed_form_time() {
    let rec = integrate(&pair(-1, 0.5), 1.0, &StepControl::default()).unwrap();
    let ev = rec.collision.expect("collision");
    let tc = 1.0 / (8.0 * PI);
    assert!(((ev.time - tc) / tc).abs() < 1e-4, "{} vs {tc}", ev.time);
    assert_eq!(ev.pair, (0, 1));
    for w in rec.min_gap_series.windows(2) {
        assert!(w[1] < w[0]);
    }
}

#[test]
fn collision_time_matches_law_for_other_orders() {
    for s in [0.25, 0.75] {
        let rec = integrate(&pair(-1, s), 10.0, &StepControl::default()).unwrap();
        let tc = collision_time_bound(1.0, s, G, 0.0).unwrap();
        let t = rec.collision.unwrap().time;
        assert!(((t - tc) / tc).abs() < 1e-4, "s={s}: {t} vs {tc}");
    }
}

#[test]
fn repelling_pair_follows_power_law() {
    let ctrl = StepControl { sample_times: vec![1.0], ..Default::default() };
    let rec = integrate(&pair(1, 0.5), 1.0, &ctrl).unwrap();
    let x = rec.positions.last().unwrap();
    assert!((x[1] - x[0] - (1.0 + 8.0 * PI).sqrt()).abs() < 1e-4);
    assert_eq!(rec.t_last(), 1.0);
}

#[test]
fn same_orientation_preserves_centre_of_mass() {
    let sys = ParticleSystem::new(vec![-1.0, 0.2, 0.9, 3.0], vec![-1; 4], 0.5, G).unwrap();
    let rec = integrate(&sys, 5.0, &StepControl::default()).unwrap();
    let m0: f64 = rec.positions[0].iter().sum();
    for x in &rec.positions {
        assert!((x.iter().sum::<f64>() - m0).abs() < 1e-8);
    }
}

#[test]
fn expansion_exponents() {
    for (s, n, tol) in [(0.5, 2, 0.02), (0.25, 2, 0.02), (0.5, 4, 0.05)] {
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let sys = ParticleSystem::new(x, vec![1; n], s, G).unwrap();
        let rec = integrate(&sys, 1e4, &StepControl::default()).unwrap();
        let fit = expansion_fit(&rec, (100.0, 1e4)).unwrap();
        let want = 1.0 / (1.0 + 2.0 * s);
        assert!((fit.exponent - want).abs() < tol, "s={s} N={n}: {}", fit.exponent);
        assert!(fit.k > 0.0);
    }
}

#[test]
fn expansion_fit_rejects_bad_input() {
    let rec = integrate(&pair(1, 0.5), 1.0, &StepControl::default()).unwrap();
    assert!(matches!(expansion_fit(&rec, (0.5, 2.0)), Err(Error::InsufficientData(_))));
    let col = integrate(&pair(-1, 0.5), 1.0, &StepControl::default()).unwrap();
    assert!(expansion_fit(&col, (0.0, 0.01)).is_err());
}

#[test]
fn midpoint_laws() {
    let sys = ParticleSystem::new(vec![-0.5, 0.5], vec![1, 1], 0.5, G).unwrap();
    let rec = integrate(&sys, 2.0, &StepControl::default()).unwrap();
    assert!(midpoint_drift_check(&rec, None).unwrap().max_deviation < 1e-8);

    let drift = Drift::power(0.1, 2.0 / 3.0);
    let sys = ParticleSystem::new(vec![-1.0, 0.0, 1.0], vec![1; 3], 0.25, G)
        .unwrap()
        .with_drift(drift.clone());
    let rec = integrate(&sys, 3.0, &StepControl::default()).unwrap();
    let rep = midpoint_drift_check(&rec, Some(&drift)).unwrap();
    assert!(rep.odd && rep.max_deviation < 1e-6);
    for (t, x) in rec.times.iter().zip(&rec.positions) {
        assert!((x[1] + 0.1 * ((1.0 + t).powf(2.0 / 3.0) - 1.0)).abs() < 1e-6);
    }

    let c = Drift::new(|_| 0.3, |_| 0.0);
    let sys = ParticleSystem::new(vec![-1.5, -0.5, 0.5, 1.5], vec![-1; 4], 0.5, G)
        .unwrap()
        .with_drift(c.clone());
    let rec = integrate(&sys, 2.0, &StepControl::default()).unwrap();
    assert!(midpoint_drift_check(&rec, Some(&c)).unwrap().max_deviation < 1e-8);

    let asym = ParticleSystem::new(vec![0.0, 0.3, 1.0], vec![1; 3], 0.5, G).unwrap();
    let rec = integrate(&asym, 0.1, &StepControl::default()).unwrap();
    assert!(matches!(midpoint_drift_check(&rec, None), Err(Error::PreconditionViolated(_))));
}

#[test]
fn perturbed_trajectories_converge_as_delta_vanishes() {
    let base = ParticleSystem::new(vec![-1.5, -0.5, 0.5, 1.5], vec![1, 1, -1, -1], 0.5, G).unwrap();
    let t_ref = integrate(&base, 10.0, &StepControl::default()).unwrap();
    let tc = t_ref.collision.as_ref().unwrap().time;
    let horizon = 0.9 * tc;
    let samples: Vec<f64> = (1..=50).map(|i| horizon * i as f64 / 50.0).collect();
    let mut prev = f64::INFINITY;
    for d in [1e-2, 1e-3, 1e-4] {
        let sys = base.clone().with_delta(d, ShiftRule::MinusZetaDelta).unwrap();
        let rec = integrate(&sys, horizon, &StepControl::default()).unwrap();
        let mut dist: f64 = 0.0;
        for t in &samples {
            let a = rec.at(*t).unwrap();
            let b = t_ref.at(*t).unwrap();
            for i in 0..4 {
                dist = dist.max((a[i] - b[i]).abs());
            }
        }
        assert!(dist < prev, "delta={d}: {dist} !< {prev}");
        prev = dist;
    }
}

#[test]
fn segregate_keeps_outer_gaps_and_collides_in_middle() {
    let sys = ParticleSystem::new(vec![-1.5, -0.5, 0.5, 1.5], vec![1, 1, -1, -1], 0.5, G).unwrap();
    let rec = integrate(&sys, 10.0, &StepControl::default()).unwrap();
    assert_eq!(rec.collision.as_ref().unwrap().pair, (1, 2));
    for k in 0..rec.len() {
        let g = rec.gaps(k);
        assert!(g[0] >= 0.5 && g[2] >= 0.5);
    }
}

#[test]
fn translation_and_time_reversal() {
    let a = ParticleSystem::new(vec![0.0, 1.0, 2.5], vec![1, -1, 1], 0.5, G).unwrap();
    let b = ParticleSystem::new(vec![7.0, 8.0, 9.5], vec![1, -1, 1], 0.5, G).unwrap();
    let ctrl = StepControl { sample_times: vec![0.005, 0.01], ..Default::default() };
    let ra = integrate(&a, 0.01, &ctrl).unwrap();
    let rb = integrate(&b, 0.01, &ctrl).unwrap();
    for t in [0.005, 0.01] {
        let (xa, xb) = (ra.at(t).unwrap(), rb.at(t).unwrap());
        for i in 0..3 {
            assert!((xb[i] - xa[i] - 7.0).abs() < 1e-9);
        }
    }

    let sys = ParticleSystem::new(vec![0.0, 1.0, 2.0], vec![1; 3], 0.5, G).unwrap();
    let fwd = integrate(&sys, 1.0, &StepControl::default()).unwrap();
    let back = integrate_span(&sys, 1.0, fwd.positions.last().unwrap(), 0.0, &StepControl::default()).unwrap();
    for (p, q) in back.positions.last().unwrap().iter().zip(&sys.positions) {
        assert!((p - q).abs() < 1e-6);
    }
}

#[test]
fn invalid_systems() {
    assert!(matches!(
        ParticleSystem::new(vec![1.0, 0.0], vec![1, 1], 0.5, G),
        Err(Error::SingularConfiguration(_))
    ));
    assert!(ParticleSystem::new(vec![0.0, 1.0], vec![1, 2], 0.5, G).is_err());
    assert!(ParticleSystem::new(vec![0.0, 1.0], vec![1], 0.5, G).is_err());
    assert!(ParticleSystem::new(vec![0.0, 1.0], vec![1, 1], 1.0, G).is_err());
    assert!(StressModel::analytic("bad", |_, _| 0.0, 1.0, 0.3, 0.5).is_err());
    assert!(integrate(&pair(1, 0.5), -1.0, &StepControl::default()).is_err());
}
