mod common;

use std::f64::consts::PI;
use std::sync::OnceLock;

use common::arctan_layer;
use dislocade::layer::*;
use dislocade::potential::PeriodicPotential;
use dislocade::Error;

fn canonical() -> &'static (LayerProfile, Corrector) {
    static CELL: OnceLock<(LayerProfile, Corrector)> = OnceLock::new();
    CELL.get_or_init(|| {
        let l = solve_layer(&PeriodicPotential::canonical(), 0.5, 20.0, 0.05, 1e-10).unwrap();
        let c = solve_corrector(&l, 1e-8).unwrap();
        (l, c)
    })
}

#[test]
fn half_layer_matches_arctan() {
    let (l, _) = canonical();
    let mut err: f64 = 0.0;
    for i in 0..l.u.n() {
        let x = l.u.x(i);
        err = err.max((l.u.samples[i] - arctan_layer(x)).abs());
    }
    assert!(err <= 1e-3, "sup error {err:e}");
    assert!(l.residual < 1e-10);
}

#[test]
fn mobility_is_two_pi() {
    let (l, _) = canonical();
    assert!((l.gamma / (2.0 * PI) - 1.0).abs() < 0.01, "gamma {}", l.gamma);
    assert!((l.beta - PI).abs() < 1e-12);
}

#[test]
fn centered_strictly_increasing_and_bounded() {
    let (l, _) = canonical();
    assert_eq!(l.value(0.0), 0.5);
    for w in l.u.samples.windows(2) {
        assert!(w[1] > w[0]);
    }
    assert!(l.u.samples.iter().all(|v| *v > 0.0 && *v < 1.0));
}

#[test]
fn cosine_layer_is_odd_about_half() {
    let (l, _) = canonical();
    let n = l.u.n();
    for i in 0..n {
        let sum = l.u.samples[i] + l.u.samples[n - 1 - i];
        assert!((sum - 1.0).abs() < 1e-6, "i={i} sum={sum}");
    }
}

#[test]
fn tail_coefficient_and_decay_constants() {
    let (l, _) = canonical();
    let theory = 1.0 / (2.0 * l.s * l.beta);
    assert!((l.tail_coeff / theory - 1.0).abs() < 0.05);
    assert!(l.kappa > 2.0 * l.s, "kappa {}", l.kappa);
    let (c, cc) = l.uprime_bounds;
    assert!(c > 0.0 && c <= cc);
    assert!(l.uprime.samples.iter().all(|v| *v > 0.0));
    let exact = |x: f64| 1.0 / (PI * (1.0 + x * x));
    for x in [-3.0, -0.4, 0.0, 1.7, 10.0] {
        assert!((l.derivative(x) - exact(x)).abs() < 1e-4);
    }
}

#[test]
fn mobility_stable_under_refinement() {
    let p = PeriodicPotential::canonical();
    let coarse = solve_layer(&p, 0.5, 20.0, 0.05, 1e-9).unwrap();
    let fine = solve_layer(&p, 0.5, 20.0, 0.025, 1e-9).unwrap();
    assert!((coarse.gamma / fine.gamma - 1.0).abs() < 0.005);
}

#[test]
fn corrector_constants_and_decay() {
    let (l, c) = canonical();
    assert!((c.eta - 1.0 / (2.0 * PI * PI)).abs() < 1e-3 * c.eta);
    assert_eq!(c.eta, 1.0 / (l.gamma * l.beta));
    assert!(c.residual <= 1e-8);
    let lx = l.half_width();
    let tail = c.psiprime_bound / (1.0 + lx.powf(1.0 + 2.0 * l.s));
    for x in [-lx, lx] {
        assert!(c.value(x).abs() <= 10.0 * tail * lx, "psi({x}) = {}", c.value(x));
    }
}

#[test]
fn other_orders_converge() {
    let p = PeriodicPotential::canonical();
    for s in [0.25, 0.75] {
        let l = solve_layer(&p, s, 40.0, 0.05, 1e-9).unwrap();
        assert!(l.residual < 1e-9);
        assert_eq!(l.value(0.0), 0.5);
        assert!(l.gamma > 0.0);
        let c = solve_corrector(&l, 1e-8).unwrap();
        assert!(c.residual <= 1e-8);
    }
}

#[test]
fn rejects_bad_parameters() {
    let p = PeriodicPotential::canonical();
    let bad = [
        solve_layer(&p, 1.2, 20.0, 0.05, 1e-8),
        solve_layer(&p, 0.5, 10.0, 0.05, 1e-8),
        solve_layer(&p, 0.5, 20.0, 0.1, 1e-8),
        solve_layer(&p, 0.5, 20.0, 0.05, 1e-12),
    ];
    for r in bad {
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }
}
