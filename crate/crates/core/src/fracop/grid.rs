use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::interp_uniform;

/// Algebraic far-field model of a grid function.
///
/// Beyond the right endpoint the field is `L⁺ − c⁺ (x − x_c)^{-p}`, beyond
/// the left endpoint `L⁻ + c⁻ (x_c − x)^{-p}`, where `x_c` is the tail center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailModel {
    pub left_limit: f64,
    pub right_limit: f64,
    pub exponent: f64,
    pub left_coeff: f64,
    pub right_coeff: f64,
    pub center: f64,
}

impl TailModel {
    /// Constant limits with no algebraic correction.
    pub fn flat(left_limit: f64, right_limit: f64) -> Self {
        TailModel {
            left_limit,
            right_limit,
            exponent: 1.0,
            left_coeff: 0.0,
            right_coeff: 0.0,
            center: 0.0,
        }
    }

    pub fn algebraic(
        left_limit: f64,
        right_limit: f64,
        exponent: f64,
        left_coeff: f64,
        right_coeff: f64,
        center: f64,
    ) -> Self {
        TailModel {
            left_limit,
            right_limit,
            exponent,
            left_coeff,
            right_coeff,
            center,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.left_limit,
            self.right_limit,
            self.exponent,
            self.left_coeff,
            self.right_coeff,
            self.center,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite || !(self.exponent > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tail model needs finite entries and positive exponent: {self:?}"
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn right(&self, x: f64) -> f64 {
        self.right_limit - self.right_coeff * (x - self.center).powf(-self.exponent)
    }

    #[inline]
    pub fn left(&self, x: f64) -> f64 {
        self.left_limit + self.left_coeff * (self.center - x).powf(-self.exponent)
    }
}

/// Samples on the uniform grid `x0 + i·dx`, `i = 0..n`, plus a tail model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunction {
    pub x0: f64,
    pub dx: f64,
    pub samples: Vec<f64>,
    pub tail: TailModel,
}

impl GridFunction {
    pub fn new(x0: f64, dx: f64, samples: Vec<f64>, tail: TailModel) -> Result<Self> {
        let g = GridFunction {
            x0,
            dx,
            samples,
            tail,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn from_fn<F: Fn(f64) -> f64>(
        x0: f64,
        dx: f64,
        n: usize,
        f: F,
        tail: TailModel,
    ) -> Result<Self> {
        let samples = (0..n).map(|i| f(x0 + i as f64 * dx)).collect();
        Self::new(x0, dx, samples, tail)
    }

    /// Symmetric grid `[-half_width, half_width]` with spacing `dx` (origin is a node).
    pub fn symmetric<F: Fn(f64) -> f64>(
        half_width: f64,
        dx: f64,
        f: F,
        tail: TailModel,
    ) -> Result<Self> {
        let m = (half_width / dx).round() as usize;
        Self::from_fn(-(m as f64) * dx, dx, 2 * m + 1, f, tail)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0) || !self.dx.is_finite() || !self.x0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid needs finite x0 and dx > 0 (dx = {})",
                self.dx
            )));
        }
        if self.samples.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "grid needs n >= 3 samples, got {}",
                self.samples.len()
            )));
        }
        if let Some(i) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite sample at index {i}"
            )));
        }
        self.tail.validate()?;
        if !(self.tail.center >= self.x0 && self.tail.center <= self.x_end()) {
            return Err(Error::InvalidParameter(format!(
                "tail center {} must lie inside the grid",
                self.tail.center
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.samples.len()
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn x_end(&self) -> f64 {
        self.x(self.n() - 1)
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.x(i)).collect()
    }

    /// Index of the node at `x` if `x` is a grid node up to rounding.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let u = (x - self.x0) / self.dx;
        let r = u.round();
        if (u - r).abs() < 1e-9 && r >= 0.0 && (r as usize) < self.n() {
            Some(r as usize)
        } else {
            None
        }
    }

    /// Value at arbitrary `x`: six-point interpolation inside, tail model outside.
    pub fn value_at(&self, x: f64) -> f64 {
        if x < self.x0 {
            return self.tail.left(x);
        }
        if x > self.x_end() {
            return self.tail.right(x);
        }
        let u = (x - self.x0) / self.dx;
        interp_uniform(self.n(), u, |k| self.samples[k])
    }

    /// Refits the tail coefficients by least squares on the outermost `fraction`
    /// of nodes on each side, keeping limits, exponent and center fixed.
    pub fn fit_tails(&mut self, fraction: f64) {
        let (l, r) = fitted_tail_coeffs(self, fraction);
        self.tail.left_coeff = l;
        self.tail.right_coeff = r;
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub(crate) fn fitted_tail_coeffs(g: &GridFunction, fraction: f64) -> (f64, f64) {
    let n = g.n();
    let m = ((fraction * n as f64).ceil() as usize).clamp(1, n / 2);
    let t = &g.tail;
    let (mut num, mut den) = (0.0, 0.0);
    for i in n - m..n {
        let b = (g.x(i) - t.center).powf(-t.exponent);
        num += (t.right_limit - g.samples[i]) * b;
        den += b * b;
    }
    let right = if den > 0.0 { num / den } else { 0.0 };
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..m {
        let b = (t.center - g.x(i)).powf(-t.exponent);
        num += (g.samples[i] - t.left_limit) * b;
        den += b * b;
    }
    let left = if den > 0.0 { num / den } else { 0.0 };
    (left, right)
}
