//! Classical and quantum dynamics: potentials, Verlet and Lie–Trotter flows, split-step
//! propagators on a position grid, and audits of the propagation, splitting, observation
//! and heat-contraction bounds. Mass is 1 throughout.

pub mod classical;
pub mod heat;
pub mod observation;
pub mod propagation;
pub mod splitting;
pub mod wave;

use crate::error::{Error, Result};
use serde::Serialize;

/// Potential on the line with the constants the bounds need.
#[derive(Clone, Debug)]
pub enum Potential {
    Zero,
    /// `omega^2 x^2 / 2`.
    Harmonic { omega: f64 },
    /// `v0 cos(k x)`.
    Cosine { v0: f64, k: f64 },
    Tabulated(Tabulated),
}

/// Samples `V(x_0 + j dx)`; gradients by central differences, both interpolated
/// linearly, constant continuation outside the table.
#[derive(Clone, Debug)]
pub struct Tabulated {
    pub x0: f64,
    pub dx: f64,
    pub values: Vec<f64>,
    grads: Vec<f64>,
}

impl Tabulated {
    pub fn new(x0: f64, dx: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 || !(dx > 0.0) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("tabulated potential needs >= 3 finite samples and dx > 0".into()));
        }
        let n = values.len();
        let grads = (0..n)
            .map(|j| {
                if j == 0 {
                    (values[1] - values[0]) / dx
                } else if j == n - 1 {
                    (values[n - 1] - values[n - 2]) / dx
                } else {
                    (values[j + 1] - values[j - 1]) / (2.0 * dx)
                }
            })
            .collect();
        Ok(Tabulated { x0, dx, values, grads })
    }

    fn interp(&self, table: &[f64], x: f64) -> f64 {
        let s = (x - self.x0) / self.dx;
        if s <= 0.0 {
            return table[0];
        }
        let j = s.floor() as usize;
        if j + 1 >= table.len() {
            return table[table.len() - 1];
        }
        let t = s - j as f64;
        table[j] * (1.0 - t) + table[j + 1] * t
    }

    /// Largest difference quotient of the gradient table.
    fn lip(&self) -> f64 {
        self.grads.windows(2).map(|w| ((w[1] - w[0]) / self.dx).abs()).fold(0.0, f64::max)
    }
}

/// `Lip(grad V)`, `inf V`, `|grad V(0)|` and `Lambda = max(1, E, sup |V''|)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PotentialConstants {
    pub lip_grad: f64,
    pub lower_bound: f64,
    pub grad_at_zero: f64,
    pub lambda: f64,
    pub grad_sup: f64,
}

impl Potential {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Harmonic { omega } => 0.5 * omega * omega * x * x,
            Potential::Cosine { v0, k } => v0 * (k * x).cos(),
            Potential::Tabulated(t) => t.interp(&t.values, x),
        }
    }

    pub fn grad(&self, x: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Harmonic { omega } => omega * omega * x,
            Potential::Cosine { v0, k } => -v0 * k * (k * x).sin(),
            Potential::Tabulated(t) => t.interp(&t.grads, x),
        }
    }

    pub fn constants(&self) -> PotentialConstants {
        let (lip, low, g0, gsup) = match self {
            Potential::Zero => (0.0, 0.0, 0.0, 0.0),
            Potential::Harmonic { omega } => (omega * omega, 0.0, 0.0, f64::INFINITY),
            Potential::Cosine { v0, k } => (v0.abs() * k * k, -v0.abs(), 0.0, v0.abs() * k.abs()),
            Potential::Tabulated(t) => (
                t.lip(),
                t.values.iter().copied().fold(f64::INFINITY, f64::min),
                t.interp(&t.grads, 0.0).abs(),
                t.grads.iter().fold(0.0f64, |a, b| a.max(b.abs())),
            ),
        };
        PotentialConstants { lip_grad: lip, lower_bound: low, grad_at_zero: g0, lambda: 1f64.max(g0).max(lip), grad_sup: gsup }
    }

    /// `V(x) = V(-x)` on samples of `[-l, l]`.
    pub fn is_even(&self, l: f64, samples: usize) -> bool {
        (0..=samples).all(|j| {
            let x = l * j as f64 / samples as f64;
            (self.value(x) - self.value(-x)).abs() <= 1e-12 * (1.0 + self.value(x).abs())
        })
    }
}

/// Propagation rate `L = (lambda + Lip(grad V) / lambda) / 2`.
pub fn propagation_rate(lambda: f64, lip: f64) -> f64 {
    0.5 * (lambda + lip / lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_constants() {
        let v = Potential::Cosine { v0: 2.0, k: 3.0 };
        let c = v.constants();
        assert_eq!(c.lip_grad, 18.0);
        assert_eq!(c.lower_bound, -2.0);
        assert_eq!(c.lambda, 18.0);
        assert!(v.is_even(5.0, 100));
    }

    #[test]
    fn tabulated_matches_sampled_cosine() {
        let dx = 1e-3;
        let xs: Vec<f64> = (0..6001).map(|j| -3.0 + j as f64 * dx).collect();
        let t = Tabulated::new(-3.0, dx, xs.iter().map(|x| x.cos()).collect()).unwrap();
        let v = Potential::Tabulated(t);
        assert!((v.value(0.3) - 0.3f64.cos()).abs() < 1e-6);
        assert!((v.grad(0.3) + 0.3f64.sin()).abs() < 1e-6);
        let c = v.constants();
        assert!((c.lip_grad - 1.0).abs() < 1e-3 && c.lip_grad >= 0.999);
        assert!(Tabulated::new(0.0, 0.1, vec![1.0]).is_err());
    }
}
