//! Transport cost operators `c(z) = lambda^2 (q - x)^2 + (p - xi)^2` and
//! `C = lambda^2 (x (x) 1 - 1 (x) x)^2 + (p (x) 1 - 1 (x) p)^2`, as exact compressions
//! onto the truncated basis.

use crate::fock::FockBasis;
use crate::linalg::{self, CMat};

/// Cached pieces of the cost operators for one basis and `lambda`.
#[derive(Clone, Debug)]
pub struct CostOperators {
    pub hbar: f64,
    pub lambda: f64,
    pub n: usize,
    pub x: CMat,
    pub p: CMat,
    pub x2: CMat,
    pub p2: CMat,
}

impl CostOperators {
    pub fn new(basis: &FockBasis, lambda: f64) -> Self {
        CostOperators {
            hbar: basis.hbar,
            lambda,
            n: basis.n_modes,
            x: basis.x_hat.clone(),
            p: basis.p_hat.clone(),
            x2: basis.x_squared(),
            p2: basis.p_squared(),
        }
    }

    /// `c(z)` for `z = (q, p)`.
    pub fn cq(&self, q: f64, p: f64) -> CMat {
        let l2 = self.lambda * self.lambda;
        let n = self.n;
        faer::Mat::from_fn(n, n, |i, j| {
            let mut v = self.x2[(i, j)] * l2 + self.p2[(i, j)];
            v -= self.x[(i, j)] * (2.0 * l2 * q) + self.p[(i, j)] * (2.0 * p);
            if i == j {
                v += linalg::re(l2 * q * q + p * p);
            }
            v
        })
    }

    /// `C` on the `n^2`-dimensional tensor space, index `(i, k) -> i n + k`.
    pub fn qq(&self) -> CMat {
        let l2 = self.lambda * self.lambda;
        let id = linalg::identity(self.n);
        let mut c = linalg::scale(&linalg::kron(&self.x2, &id), l2);
        linalg::axpy(&mut c, l2, &linalg::kron(&id, &self.x2));
        linalg::axpy(&mut c, -2.0 * l2, &linalg::kron(&self.x, &self.x));
        linalg::axpy(&mut c, 1.0, &linalg::kron(&self.p2, &id));
        linalg::axpy(&mut c, 1.0, &linalg::kron(&id, &self.p2));
        linalg::axpy(&mut c, -2.0, &linalg::kron(&self.p, &self.p));
        linalg::hermitian_part(&c)
    }

    /// Lower bound `lambda d hbar` of `c(z)` (d = 1).
    pub fn cq_floor(&self) -> f64 {
        self.lambda * self.hbar
    }

    /// Lower bound `2 lambda d hbar` of `C`.
    pub fn qq_floor(&self) -> f64 {
        2.0 * self.lambda * self.hbar
    }

    /// `max(0, 2 lambda hbar - min eig C)`.
    pub fn qq_truncation_slack(&self) -> f64 {
        (self.qq_floor() - linalg::min_eig(&self.qq())).max(0.0)
    }

    /// `max(0, lambda hbar - min eig c(0))`; by covariance the same at every z up to
    /// the truncation of the displacement.
    pub fn cq_truncation_slack(&self) -> f64 {
        (self.cq_floor() - linalg::min_eig(&self.cq(0.0, 0.0))).max(0.0)
    }

    /// `trace((R (x) S) C)` evaluated without forming `C`.
    pub fn product_cost(&self, r: &CMat, s: &CMat) -> f64 {
        let t = |a: &CMat, b: &CMat| linalg::trace_prod_re(a, b);
        let l2 = self.lambda * self.lambda;
        let (rtr, str_) = (linalg::trace(r).re, linalg::trace(s).re);
        l2 * (t(r, &self.x2) * str_ - 2.0 * t(r, &self.x) * t(s, &self.x) + rtr * t(s, &self.x2))
            + (t(r, &self.p2) * str_ - 2.0 * t(r, &self.p) * t(s, &self.p) + rtr * t(s, &self.p2))
    }

    /// `trace(R c(z))`.
    pub fn point_cost(&self, r: &CMat, q: f64, p: f64) -> f64 {
        linalg::trace_prod_re(r, &self.cq(q, p))
    }

    /// Operator norm scale of `C` used for relative tolerances.
    pub fn qq_scale(&self) -> f64 {
        let e = linalg::eigvalsh(&self.qq());
        e[e.len() - 1].abs().max(e[0].abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ground_state_expectations() {
        let b = FockBasis::new(0.3, 12).unwrap();
        let c = CostOperators::new(&b, 1.0);
        let e0 = b.basis_vector(0).coeffs;
        assert_abs_diff_eq!(linalg::expectation(&c.cq(0.0, 0.0), &e0), 0.3, epsilon = 1e-14);
        let ee = linalg::kron(&b.basis_vector(0).projector(), &b.basis_vector(0).projector());
        assert_abs_diff_eq!(linalg::trace_prod_re(&ee, &c.qq()), 0.6, epsilon = 1e-14);
    }

    #[test]
    fn floors_hold_after_truncation() {
        for lambda in [0.5, 1.0, 2.0] {
            let b = FockBasis::new(0.5, 8).unwrap();
            let c = CostOperators::new(&b, lambda);
            assert!(c.qq_truncation_slack() < 1e-10);
            assert!(c.cq_truncation_slack() < 1e-10);
        }
    }

    #[test]
    fn displaced_cost_expansion() {
        let b = FockBasis::new(0.4, 10).unwrap();
        let c = CostOperators::new(&b, 1.3);
        let (q, p) = (0.7, -0.2);
        let d = linalg::sub(&c.cq(q, p), &c.cq(0.0, 0.0));
        let l2 = 1.69;
        let mut want = linalg::scale(&b.x_hat, -2.0 * l2 * q);
        linalg::axpy(&mut want, -2.0 * p, &b.p_hat);
        linalg::axpy(&mut want, l2 * q * q + p * p, &linalg::identity(10));
        assert!(linalg::max_abs(&linalg::sub(&d, &want)) < 1e-13);
    }

    #[test]
    fn product_cost_matches_tensor() {
        let b = FockBasis::new(0.5, 6).unwrap();
        let c = CostOperators::new(&b, 0.8);
        let r = b.coherent(0.3, 0.1).projector();
        let s = b.coherent(-0.2, 0.4).projector();
        let direct = linalg::trace_prod_re(&linalg::kron(&r, &s), &c.qq());
        assert_abs_diff_eq!(c.product_cost(&r, &s), direct, epsilon = 1e-12);
    }
}
