mod common;

use common::*;
use dislocade::fracop::*;
use dislocade::Error;
use proptest::prelude::*;

fn gaussian_grid(half: f64, dx: f64) -> GridFunction {
    GridFunction::symmetric(half, dx, |x| (-x * x).exp(), TailModel::flat(0.0, 0.0)).unwrap()
}

fn arctan_grid(half: f64, dx: f64) -> GridFunction {
    let c = 1.0 / std::f64::consts::PI;
    GridFunction::symmetric(half, dx, arctan_layer, TailModel::algebraic(0.0, 1.0, 1.0, c, c, 0.0))
        .unwrap()
}

#[test]
fn gaussian_matches_oracle_to_1e6() {
    let g = gaussian_grid(12.0, 0.01);
    let cfg = QuadratureConfig::for_grid(&g);
    for s in [0.25, 0.5, 0.75] {
        for x in [0.0, 0.5, -0.5, 1.0, -1.0] {
            let v = frac_laplacian(&g, s, x, &cfg).unwrap();
            let o = gaussian_closed_form(s, x);
            assert!((v - o).abs() < 1e-6, "s={s} x={x}: {v} vs {o} err {:e}", v - o);
        }
    }
}

#[test]
fn arctan_layer_point_value() {
    let g = arctan_grid(40.0, 0.02);
    let cfg = QuadratureConfig::for_grid(&g);
    let v = frac_laplacian(&g, 0.5, 1.0, &cfg).unwrap();
    assert!((v + 0.5).abs() < 1e-4, "{v}");
    assert!((v - arctan_oracle(1.0)).abs() < 1e-4);
}

#[test]
fn arctan_layer_field_matches_reaction() {
    let g = arctan_grid(40.0, 0.02);
    let cfg = QuadratureConfig::for_grid(&g);
    let f = frac_laplacian_field(&g, 0.5, &cfg).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..g.n() {
        let x = g.x(i);
        if x.abs() <= 20.0 {
            worst = worst.max((f.samples[i] + x / (1.0 + x * x)).abs());
        }
    }
    assert!(worst <= 2e-4, "sup error {worst:e}");
}

#[test]
fn constant_field_gives_zero() {
    let g = GridFunction::symmetric(10.0, 0.05, |_| 3.5, TailModel::flat(3.5, 3.5)).unwrap();
    for order in [QuadratureOrder::HighOrder, QuadratureOrder::Monotone] {
        let cfg = QuadratureConfig::for_grid(&g).with_order(order);
        let f = frac_laplacian_field(&g, 0.5, &cfg).unwrap();
        assert!(f.sup_norm() <= 1e-12);
        assert!(frac_laplacian(&g, 0.3, 1.234, &cfg).unwrap().abs() <= 1e-12);
    }
}

#[test]
fn field_agrees_with_pointwise() {
    for s in [0.25, 0.5, 0.75] {
        let g = arctan_grid(30.0, 0.01);
        let cfg = QuadratureConfig::for_grid(&g);
        let f = frac_laplacian_field(&g, s, &cfg).unwrap();
        for i in (2..g.n() - 2).step_by(397) {
            let p = frac_laplacian(&g, s, g.x(i), &cfg).unwrap();
            assert!((p - f.samples[i]).abs() <= 1e-12, "s={s} i={i} {:e}", p - f.samples[i]);
        }
    }
}

#[test]
fn linearity() {
    let a = gaussian_grid(10.0, 0.02);
    let b = arctan_grid(10.0, 0.02);
    let (ca, cb) = (1.7, -0.4);
    let mut tail = b.tail;
    tail.left_limit *= cb;
    tail.right_limit *= cb;
    tail.left_coeff *= cb;
    tail.right_coeff *= cb;
    let combo = GridFunction::new(
        a.x0,
        a.dx,
        a.samples.iter().zip(&b.samples).map(|(x, y)| ca * x + cb * y).collect(),
        tail,
    )
    .unwrap();
    let cfg = QuadratureConfig::for_grid(&a);
    let fa = frac_laplacian_field(&a, 0.5, &cfg).unwrap();
    let fb = frac_laplacian_field(&b, 0.5, &cfg).unwrap();
    let fc = frac_laplacian_field(&combo, 0.5, &cfg).unwrap();
    for i in 0..a.n() {
        let d = fc.samples[i] - ca * fa.samples[i] - cb * fb.samples[i];
        assert!(d.abs() <= 1e-10, "{i}: {d:e}");
    }
}

#[test]
fn translation_by_whole_cells() {
    let g = arctan_grid(20.0, 0.02);
    let cfg = QuadratureConfig::for_grid(&g);
    let m = 37;
    let shift = m as f64 * g.dx;
    let mut h = g.clone();
    h.x0 += shift;
    h.tail.center += shift;
    for x in [-3.0, 0.0, 0.5, 4.0] {
        let a = frac_laplacian(&g, 0.5, x, &cfg).unwrap();
        let b = frac_laplacian(&h, 0.5, x + shift, &cfg).unwrap();
        assert!((a - b).abs() <= 1e-10, "{x}: {:e}", a - b);
    }
}

#[test]
fn scaling_identity() {
    let eps = 0.25;
    let coarse = gaussian_grid(12.0, 0.02);
    let fine = GridFunction::symmetric(12.0 * eps, 0.02 * eps, |x| (-(x / eps).powi(2)).exp(), TailModel::flat(0.0, 0.0))
        .unwrap();
    let cfg_c = QuadratureConfig::for_grid(&coarse);
    let cfg_f = QuadratureConfig::for_grid(&fine);
    for s in [0.25, 0.75] {
        for xi in [0.0, 0.4, 1.0] {
            let a = frac_laplacian(&fine, s, xi * eps, &cfg_f).unwrap();
            let b = eps.powf(-2.0 * s) * frac_laplacian(&coarse, s, xi, &cfg_c).unwrap();
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{s} {xi}: {a} {b}");
        }
    }
}

#[test]
fn refinement_reduces_error_by_two() {
    for s in [0.25, 0.5, 0.75] {
        let oracle = gaussian_oracle(s, 0.5);
        let mut prev = f64::INFINITY;
        for dx in [0.2, 0.1, 0.05] {
            let g = gaussian_grid(12.0, dx);
            let cfg = QuadratureConfig::for_grid(&g);
            let err = (frac_laplacian(&g, s, 0.5, &cfg).unwrap() - oracle).abs();
            assert!(err * 2.0 <= prev, "s={s} dx={dx} err={err:e} prev={prev:e}");
            prev = err;
        }
        let mut prev = f64::INFINITY;
        for dx in [0.2, 0.1, 0.05] {
            let g = gaussian_grid(12.0, dx);
            let cfg = QuadratureConfig::for_grid(&g).with_order(QuadratureOrder::Monotone);
            let err = (frac_laplacian(&g, s, 0.5, &cfg).unwrap() - oracle).abs();
            assert!(err * 2.0 <= prev, "monotone s={s} dx={dx} err={err:e}");
            prev = err;
        }
    }
}

#[test]
fn even_half_range_matches_full_range() {
    let full = gaussian_grid(12.0, 0.01);
    let half = GridFunction::from_fn(0.0, 0.01, 1201, |x| (-x * x).exp(), TailModel::flat(0.0, 0.0)).unwrap();
    let cfg = QuadratureConfig::for_grid(&full);
    for s in [0.25, 0.5, 0.75] {
        let a = frac_laplacian(&full, s, 0.0, &cfg).unwrap();
        let b = frac_laplacian_even_origin(&half, s, &cfg).unwrap();
        assert!((a - b).abs() <= 1e-12, "{s}: {:e}", a - b);
    }
}

#[test]
fn monotone_weights_are_nonnegative() {
    let g = gaussian_grid(5.0, 0.05);
    let cfg = QuadratureConfig::for_grid(&g).with_order(QuadratureOrder::Monotone);
    for s in [0.25, 0.5, 0.75] {
        // A nodal bump must raise the operator at every other node.
        for j in [3, 50, 100, 197] {
            let mut b = GridFunction::new(g.x0, g.dx, vec![0.0; g.n()], TailModel::flat(0.0, 0.0)).unwrap();
            b.samples[j] = 1.0;
            let f = frac_laplacian_field(&b, s, &cfg).unwrap();
            for (i, v) in f.samples.iter().enumerate() {
                if i != j {
                    assert!(*v >= -1e-15, "s={s} j={j} i={i} {v}");
                } else {
                    assert!(*v < 0.0);
                }
            }
        }
    }
}

#[test]
fn errors() {
    let g = gaussian_grid(2.0, 0.1);
    let cfg = QuadratureConfig::for_grid(&g);
    assert!(matches!(frac_laplacian(&g, 0.5, 1.95, &cfg), Err(Error::OutOfDomain(_))));
    assert!(matches!(frac_laplacian(&g, 1.0, 0.0, &cfg), Err(Error::InvalidParameter(_))));
    assert!(matches!(frac_laplacian(&g, 0.0, 0.0, &cfg), Err(Error::InvalidParameter(_))));
    assert!(frac_laplacian_field(&g, 1.5, &cfg).is_err());
    let bad = QuadratureConfig { r0_cells: 1, ..cfg };
    assert!(frac_laplacian(&g, 0.5, 0.0, &bad).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn field_is_linear_in_random_data(seed in proptest::collection::vec(-1.0f64..1.0, 60), c in -3.0f64..3.0) {
        let a = GridFunction::new(-3.0, 0.1, seed.clone(), TailModel::flat(0.0, 0.0)).unwrap();
        let b = GridFunction::new(-3.0, 0.1, seed.iter().map(|v| c * v).collect(), TailModel::flat(0.0, 0.0)).unwrap();
        let cfg = QuadratureConfig::for_grid(&a);
        let fa = frac_laplacian_field(&a, 0.4, &cfg).unwrap();
        let fb = frac_laplacian_field(&b, 0.4, &cfg).unwrap();
        for i in 0..a.n() {
            prop_assert!((fb.samples[i] - c * fa.samples[i]).abs() <= 1e-10 * (1.0 + fa.samples[i].abs()));
        }
    }

    #[test]
    fn adding_constant_changes_nothing(k in -5.0f64..5.0) {
        let a = gaussian_grid(6.0, 0.05);
        let mut b = a.clone();
        for v in b.samples.iter_mut() { *v += k; }
        b.tail.left_limit += k;
        b.tail.right_limit += k;
        let cfg = QuadratureConfig::for_grid(&a);
        let fa = frac_laplacian_field(&a, 0.6, &cfg).unwrap();
        let fb = frac_laplacian_field(&b, 0.6, &cfg).unwrap();
        for i in 0..a.n() {
            prop_assert!((fa.samples[i] - fb.samples[i]).abs() <= 1e-9);
        }
    }
}
