//! Quantum transport pseudometric: cost operators, coupling SDPs (quantum-quantum and
//! classical-quantum), dual certificates, rank-one closed forms, triangle audits and
//! the ground-state transport construction.

mod admm;
mod anderson;
pub mod audit;
mod cost;
pub mod transport;

pub use admm::{
    certify_cq, certify_qq, solve_cq, solve_qq, CQSolution, DualCertificateCQ, DualCertificateQQ, QQSolution,
    SolverOptions, TraceRow,
};
pub use cost::CostOperators;

use crate::densop::DensityOperator;
use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::linalg::{self, CMat, ZERO};
use crate::quantize::PhaseMeasure;
use faer::Mat;

#[derive(Clone, Debug)]
pub enum Coupling {
    QQ(CMat),
    CQ(Vec<CMat>),
}

#[derive(Clone, Debug)]
pub enum Certificate {
    QQ(DualCertificateQQ),
    CQ(DualCertificateCQ),
}

impl Certificate {
    pub fn value(&self) -> f64 {
        match self {
            Certificate::QQ(c) => c.value,
            Certificate::CQ(c) => c.value,
        }
    }

    /// Smallest eigenvalue of the slack `C - A (x) 1 - 1 (x) B` (or of `c(z_i) - a_i - B`).
    pub fn margin(&self) -> f64 {
        match self {
            Certificate::QQ(c) => c.margin,
            Certificate::CQ(c) => c.min_margin(),
        }
    }

    pub fn repair(&self) -> f64 {
        match self {
            Certificate::QQ(c) => c.repair,
            Certificate::CQ(c) => c.repair,
        }
    }
}

/// Outcome of one transport computation; `value` is the squared pseudometric.
#[derive(Clone, Debug)]
pub struct TransportResult {
    pub value: f64,
    pub dual_value: f64,
    pub relative_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub marginal_residual: f64,
    /// `2 lambda d hbar` (quantum-quantum) or `lambda d hbar` (classical-quantum).
    pub floor: f64,
    pub truncation_slack: f64,
    pub coupling: Coupling,
    pub certificate: Certificate,
    pub history: Vec<TraceRow>,
}

impl TransportResult {
    pub fn distance(&self) -> f64 {
        self.value.max(0.0).sqrt()
    }

    /// `value >= floor - slack` and weak duality `dual <= value`, both within the
    /// relative solver tolerance `tol` (the primal coupling is only feasible up to
    /// its marginal residual, so its cost may sit slightly below the certified dual).
    pub fn respects_floor(&self, tol: f64) -> bool {
        let scale = self.value.abs().max(1.0);
        self.value >= self.floor - self.truncation_slack - tol * scale && self.dual_value <= self.value + tol * scale
    }
}

fn check_operator(r: &DensityOperator, n: usize) -> Result<()> {
    if r.dim() != n {
        return Err(Error::DimensionMismatch(format!("operator has size {}, basis has {n} modes", r.dim())));
    }
    Ok(())
}

/// Squared pseudometric between two density operators on `basis`.
pub fn dd_qq(basis: &FockBasis, r: &DensityOperator, s: &DensityOperator, lambda: f64, opts: &SolverOptions) -> Result<TransportResult> {
    check_operator(r, basis.n_modes)?;
    check_operator(s, basis.n_modes)?;
    let ops = CostOperators::new(basis, lambda);
    let c = ops.qq();
    let slack = (ops.qq_floor() - linalg::min_eig(&c)).max(0.0);
    let sol = solve_qq(&c, &r.matrix, &s.matrix, opts)?;
    Ok(qq_result(sol, ops.qq_floor(), slack))
}

fn qq_result(sol: QQSolution, floor: f64, slack: f64) -> TransportResult {
    TransportResult {
        value: sol.primal,
        dual_value: sol.certificate.value,
        relative_gap: sol.relative_gap,
        iterations: sol.iterations,
        converged: sol.converged,
        marginal_residual: sol.marginal_residual,
        floor,
        truncation_slack: slack,
        coupling: Coupling::QQ(sol.coupling),
        certificate: Certificate::QQ(sol.certificate),
        history: sol.history,
    }
}

/// Squared pseudometric between a discrete phase-space measure and a density operator.
pub fn dd_cq(basis: &FockBasis, f: &PhaseMeasure, r: &DensityOperator, lambda: f64, opts: &SolverOptions) -> Result<TransportResult> {
    check_operator(r, basis.n_modes)?;
    let f = f.pruned();
    let ops = CostOperators::new(basis, lambda);
    let costs: Vec<CMat> = f.points.iter().map(|z| ops.cq(z[0], z[1])).collect();
    let slack = costs
        .iter()
        .map(|c| (ops.cq_floor() - linalg::min_eig(c)).max(0.0))
        .fold(0.0, f64::max);
    let sol = solve_cq(&costs, &f.weights, &r.matrix, opts)?;
    Ok(TransportResult {
        value: sol.primal,
        dual_value: sol.certificate.value,
        relative_gap: sol.relative_gap,
        iterations: sol.iterations,
        converged: sol.converged,
        marginal_residual: sol.marginal_residual,
        floor: ops.cq_floor(),
        truncation_slack: slack,
        coupling: Coupling::CQ(sol.blocks),
        certificate: Certificate::CQ(sol.certificate),
        history: sol.history,
    })
}

/// Closed form for a rank-one operator: the only coupling with `S` is `R (x) S`.
pub fn dd_rank1_qq(basis: &FockBasis, r: &DensityOperator, s: &DensityOperator, lambda: f64) -> Result<f64> {
    check_operator(r, basis.n_modes)?;
    check_operator(s, basis.n_modes)?;
    if r.rank_one_vector(1e-9).is_err() {
        s.rank_one_vector(1e-9)?;
    }
    Ok(CostOperators::new(basis, lambda).product_cost(&r.matrix, &s.matrix))
}

/// Closed form `sum_i f_i trace(R c(z_i))` when `R` is rank one (or `f` a point mass).
pub fn dd_rank1_cq(basis: &FockBasis, f: &PhaseMeasure, r: &DensityOperator, lambda: f64) -> Result<f64> {
    check_operator(r, basis.n_modes)?;
    if f.pruned().len() > 1 {
        r.rank_one_vector(1e-9)?;
    }
    let ops = CostOperators::new(basis, lambda);
    Ok(f.points.iter().zip(&f.weights).map(|(z, w)| w * ops.point_cost(&r.matrix, z[0], z[1])).sum())
}

/// Certificate of a result, with the feasibility check
/// `margin >= -1e-8 ||C||` that declares it a valid Kantorovich pair.
pub fn extract_dual(result: &TransportResult, cost_scale: f64) -> (Certificate, bool) {
    let feasible = result.certificate.margin() >= -1e-8 * cost_scale;
    (result.certificate.clone(), feasible)
}

/// Cost on `(H^N) (x) (H^N)`: the sum of single-particle costs acting on factor pairs
/// `(r_k, s_k)`. Index layout `(r_1 .. r_N, s_1 .. s_N)`, row-major.
pub fn cost_qq_particles(ops: &CostOperators, n_particles: usize) -> CMat {
    let n = ops.n;
    let c = ops.qq();
    let side = n.pow(n_particles as u32);
    let dim = side * side;
    let digits = |mut idx: usize| -> Vec<usize> {
        let mut d = vec![0; 2 * n_particles];
        for k in (0..2 * n_particles).rev() {
            d[k] = idx % n;
            idx /= n;
        }
        d
    };
    let all: Vec<Vec<usize>> = (0..dim).map(digits).collect();
    Mat::from_fn(dim, dim, |row, col| {
        let a = &all[row];
        let b = &all[col];
        let mut v = ZERO;
        for k in 0..n_particles {
            let others_equal = (0..2 * n_particles).all(|t| t == k || t == n_particles + k || a[t] == b[t]);
            if others_equal {
                v += c[(a[k] * n + a[n_particles + k], b[k] * n + b[n_particles + k])];
            }
        }
        v
    })
}

/// Squared pseudometric between `N`-particle operators on `basis^{(x) N}`.
pub fn dd_qq_particles(
    basis: &FockBasis,
    r: &DensityOperator,
    s: &DensityOperator,
    n_particles: usize,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<TransportResult> {
    let side = basis.n_modes.pow(n_particles as u32);
    check_operator(r, side)?;
    check_operator(s, side)?;
    let ops = CostOperators::new(basis, lambda);
    let c = cost_qq_particles(&ops, n_particles);
    let floor = n_particles as f64 * ops.qq_floor();
    let slack = (floor - linalg::min_eig(&c)).max(0.0);
    let sol = solve_qq(&c, &r.matrix, &s.matrix, opts)?;
    Ok(qq_result(sol, floor, slack))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantize::toeplitz;

    #[test]
    fn particle_cost_reduces_to_single() {
        let b = FockBasis::new(0.5, 3).unwrap();
        let ops = CostOperators::new(&b, 1.0);
        let c1 = cost_qq_particles(&ops, 1);
        assert!(linalg::max_abs(&linalg::sub(&c1, &ops.qq())) < 1e-15);
        let c2 = cost_qq_particles(&ops, 2);
        // product state (r1 r2) (x) (s1 s2): cost splits
        let r1 = b.coherent(0.2, 0.0).normalized().projector();
        let r2 = b.basis_vector(0).projector();
        let s1 = b.coherent(-0.1, 0.1).normalized().projector();
        let s2 = b.basis_vector(1).projector();
        let t = linalg::kron(&linalg::kron(&r1, &r2), &linalg::kron(&s1, &s2));
        let want = ops.product_cost(&r1, &s1) + ops.product_cost(&r2, &s2);
        assert!((linalg::trace_prod_re(&t, &c2) - want).abs() < 1e-12);
    }

    #[test]
    fn coherent_pair_closed_form() {
        let b = FockBasis::new(0.5, 24).unwrap();
        let r = toeplitz(&b, &PhaseMeasure::dirac(0.5, 0.0));
        let s = toeplitz(&b, &PhaseMeasure::dirac(-0.5, 0.5));
        let v = dd_rank1_qq(&b, &r, &s, 1.0).unwrap();
        assert!((v - (1.0 + 0.25 + 1.0)).abs() < 1e-9);
        let w = dd_rank1_cq(&b, &PhaseMeasure::dirac(0.5, 0.0), &r, 1.0).unwrap();
        assert!((w - 0.5).abs() < 1e-9);
    }
}
