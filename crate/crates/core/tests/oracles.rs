mod common;

use common::*;

#[test]
fn quadrature_and_closed_form_oracles_agree_on_gaussian() {
    for s in [0.25, 0.5, 0.75] {
        for x in [0.0, 0.5, 1.0] {
            let a = gaussian_oracle(s, x);
            let b = gaussian_closed_form(s, x);
            assert!((a - b).abs() < 1e-9, "s={s} x={x}: {a} vs {b}");
        }
    }
    let v = gaussian_closed_form(0.5, 0.0);
    assert!((v + 2.0 * std::f64::consts::PI.sqrt()).abs() < 1e-12);
}

#[test]
fn arctan_oracle_matches_layer_equation() {
    for x in [0.0, 0.3, 1.0, 2.5, -4.0] {
        let w = -x / (1.0 + x * x);
        let v = arctan_oracle(x);
        assert!((v - w).abs() < 1e-8, "x={x}: {v} vs {w}");
    }
}
