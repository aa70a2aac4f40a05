//! Periodic multi-well potentials `W` with nondegenerate minima on the integers.
//!
//! The cosine family `W(v) = a(1 - cos 2πv)` is the canonical choice; arbitrary
//! analytic families can be supplied as closures together with their first two
//! derivatives.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Which analytic family a potential belongs to.
#[derive(Clone)]
pub enum PotentialFamily {
    Cosine,
    CustomAnalytic {
        name: String,
        w: RealFn,
        dw: RealFn,
        d2w: RealFn,
    },
}

/// A periodic potential together with its cached curvature `beta = W''(0)`.
#[derive(Clone)]
pub struct PeriodicPotential {
    pub family: PotentialFamily,
    pub amplitude: f64,
    pub beta: f64,
}

impl fmt::Debug for PeriodicPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicPotential")
            .field("family", &self.family_name())
            .field("amplitude", &self.amplitude)
            .field("beta", &self.beta)
            .finish()
    }
}

/// Builds `W(v) = a(1 - cos 2πv)`.
pub fn make_cosine_potential(a: f64) -> Result<PeriodicPotential> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "potential amplitude must be positive, got {a}"
        )));
    }
    Ok(PeriodicPotential {
        family: PotentialFamily::Cosine,
        amplitude: a,
        beta: 4.0 * PI * PI * a,
    })
}

impl PeriodicPotential {
    /// Canonical potential `a = 1/(4π)` whose half-order layer is `1/2 + arctan(x)/π`.
    pub fn canonical() -> Self {
        make_cosine_potential(1.0 / (4.0 * PI)).expect("positive amplitude")
    }

    /// Wraps user-supplied analytic evaluators. `beta` is taken from `d2w(0)`.
    pub fn custom<W, D, D2>(name: &str, w: W, dw: D, d2w: D2) -> Self
    where
        W: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let beta = d2w(0.0);
        PeriodicPotential {
            family: PotentialFamily::CustomAnalytic {
                name: name.to_string(),
                w: Arc::new(w),
                dw: Arc::new(dw),
                d2w: Arc::new(d2w),
            },
            amplitude: f64::NAN,
            beta,
        }
    }

    pub fn family_name(&self) -> String {
        match &self.family {
            PotentialFamily::Cosine => "cosine".to_string(),
            PotentialFamily::CustomAnalytic { name, .. } => format!("custom-analytic:{name}"),
        }
    }

    #[inline]
    pub fn w(&self, v: f64) -> f64 {
        match &self.family {
            PotentialFamily::Cosine => self.amplitude * (1.0 - (2.0 * PI * v).cos()),
            PotentialFamily::CustomAnalytic { w, .. } => w(v),
        }
    }

    #[inline]
    pub fn dw(&self, v: f64) -> f64 {
        match &self.family {
            PotentialFamily::Cosine => 2.0 * PI * self.amplitude * (2.0 * PI * v).sin(),
            PotentialFamily::CustomAnalytic { dw, .. } => dw(v),
        }
    }

    #[inline]
    pub fn d2w(&self, v: f64) -> f64 {
        match &self.family {
            PotentialFamily::Cosine => 4.0 * PI * PI * self.amplitude * (2.0 * PI * v).cos(),
            PotentialFamily::CustomAnalytic { d2w, .. } => d2w(v),
        }
    }
}

/// Outcome of one structural condition.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionCheck {
    pub name: String,
    pub passed: bool,
    /// Point where the condition is closest to failing (or fails worst).
    pub witness: f64,
    /// Value of the tested quantity at the witness point.
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<ConditionCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const COND_REGULARITY: &str = "derivatives consistent";
pub const COND_PERIODIC: &str = "W(v+1) = W(v)";
pub const COND_ZEROS: &str = "W = 0 on Z";
pub const COND_POSITIVE: &str = "W > 0 off Z";
pub const COND_CURVATURE: &str = "W''(0) > 0";

/// Samples the five structural conditions on a potential.
///
/// Regularity is probed by comparing the supplied derivatives against centered
/// finite differences of `W` and `W'`; failures are reported, never raised.
pub fn validate_potential(p: &PeriodicPotential, samples: usize) -> Result<ValidationReport> {
    if samples < 100 {
        return Err(Error::InvalidParameter(format!(
            "validation needs at least 100 samples, got {samples}"
        )));
    }
    let tol = 1e-12;
    let pts: Vec<f64> = (0..samples)
        .map(|k| -2.0 + 4.0 * (k as f64 + 0.5) / samples as f64)
        .collect();

    let h = 1e-4;
    let (mut reg_w, mut reg_v) = (0.0_f64, 0.0);
    for &v in &pts {
        let fd1 = (p.w(v + h) - p.w(v - h)) / (2.0 * h);
        let fd2 = (p.dw(v + h) - p.dw(v - h)) / (2.0 * h);
        let scale = 1.0 + p.dw(v).abs() + p.d2w(v).abs();
        let e = ((fd1 - p.dw(v)).abs() + (fd2 - p.d2w(v)).abs()) / scale;
        if e > reg_v {
            reg_v = e;
            reg_w = v;
        }
    }

    let (mut per_w, mut per_v) = (0.0_f64, 0.0);
    for &v in &pts {
        let e = (p.w(v + 1.0) - p.w(v))
            .abs()
            .max((p.dw(v + 1.0) - p.dw(v)).abs())
            .max((p.d2w(v + 1.0) - p.d2w(v)).abs());
        if e > per_v {
            per_v = e;
            per_w = v;
        }
    }

    let (mut zero_w, mut zero_v) = (0.0_f64, 0.0);
    for k in -3..=3 {
        let v = k as f64;
        let e = p.w(v).abs().max(p.dw(v).abs());
        if e >= zero_v {
            zero_v = e;
            zero_w = v;
        }
    }

    let (mut pos_w, mut pos_v) = (f64::NAN, f64::INFINITY);
    for &v in &pts {
        if (v - v.round()).abs() < 1e-3 {
            continue;
        }
        let wv = p.w(v);
        if wv < pos_v {
            pos_v = wv;
            pos_w = v;
        }
    }

    let b = p.d2w(0.0);
    Ok(ValidationReport {
        checks: vec![
            ConditionCheck {
                name: COND_REGULARITY.into(),
                passed: reg_v < 1e-5,
                witness: reg_w,
                value: reg_v,
            },
            ConditionCheck {
                name: COND_PERIODIC.into(),
                passed: per_v <= tol,
                witness: per_w,
                value: per_v,
            },
            ConditionCheck {
                name: COND_ZEROS.into(),
                passed: zero_v <= tol,
                witness: zero_w,
                value: zero_v,
            },
            ConditionCheck {
                name: COND_POSITIVE.into(),
                passed: pos_v > 0.0,
                witness: pos_w,
                value: pos_v,
            },
            ConditionCheck {
                name: COND_CURVATURE.into(),
                passed: b > 0.0,
                witness: 0.0,
                value: b,
            },
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_beta_and_values() {
        let p = make_cosine_potential(1.0).unwrap();
        assert!((p.beta - 4.0 * PI * PI).abs() < 1e-12 * p.beta);
        assert!((p.w(0.5) - 2.0).abs() < 1e-14);
        let c = PeriodicPotential::canonical();
        assert!((c.beta - PI).abs() < 1e-14);
        assert!((c.d2w(0.0) - c.beta).abs() < 1e-14);
    }

    #[test]
    fn rejects_nonpositive_amplitude() {
        assert!(matches!(
            make_cosine_potential(0.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(make_cosine_potential(-1.0).is_err());
        assert!(make_cosine_potential(f64::NAN).is_err());
    }

    #[test]
    fn validation_of_cosine_passes() {
        let r = validate_potential(&make_cosine_potential(1.0).unwrap(), 1000).unwrap();
        assert!(r.all_passed(), "{r:?}");
    }

    #[test]
    fn shifted_potential_fails_zero_condition() {
        let p = PeriodicPotential::custom(
            "shifted",
            |v| 1.0 - (2.0 * PI * v).cos() + 0.1,
            |v| 2.0 * PI * (2.0 * PI * v).sin(),
            |v| 4.0 * PI * PI * (2.0 * PI * v).cos(),
        );
        let r = validate_potential(&p, 500).unwrap();
        assert!(!r.get(COND_ZEROS).unwrap().passed);
        assert!(r.get(COND_POSITIVE).unwrap().passed);
    }

    #[test]
    fn inverted_potential_fails_curvature_and_positivity() {
        let p = PeriodicPotential::custom(
            "inverted",
            |v| -(1.0 - (2.0 * PI * v).cos()),
            |v| -2.0 * PI * (2.0 * PI * v).sin(),
            |v| -4.0 * PI * PI * (2.0 * PI * v).cos(),
        );
        let r = validate_potential(&p, 500).unwrap();
        assert!(!r.get(COND_CURVATURE).unwrap().passed);
        assert!(!r.get(COND_POSITIVE).unwrap().passed);
        assert!(r.get(COND_ZEROS).unwrap().passed);
    }

    #[test]
    fn inconsistent_derivative_is_flagged() {
        let p = PeriodicPotential::custom(
            "wrong-derivative",
            |v| 1.0 - (2.0 * PI * v).cos(),
            |v| (2.0 * PI * v).sin(),
            |v| 4.0 * PI * PI * (2.0 * PI * v).cos(),
        );
        let r = validate_potential(&p, 200).unwrap();
        assert!(!r.get(COND_REGULARITY).unwrap().passed);
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(validate_potential(&PeriodicPotential::canonical(), 10).is_err());
    }
}
