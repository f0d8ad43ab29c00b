//! Inequality audits: restricted and generalized triangle inequalities, Husimi/W2
//! comparisons, and the Husimi lower bound for the quantum-quantum cost.

use super::{dd_cq, dd_qq, SolverOptions, TransportResult};
use crate::classical_ot;
use crate::densop::DensityOperator;
use crate::error::Result;
use crate::fock::FockBasis;
use crate::quantize::{self, PhaseGrid, PhaseMeasure};
use serde::Serialize;

/// A point of the joint space: a phase-space probability measure or a density operator.
#[derive(Clone, Debug)]
pub enum State {
    Classical(PhaseMeasure),
    Quantum(DensityOperator),
}

impl State {
    fn is_rank_one(&self) -> bool {
        match self {
            State::Classical(_) => false,
            State::Quantum(r) => r.rank_one_vector(1e-9).is_ok(),
        }
    }
}

/// Certified bracket `[lower, upper]` for a squared transport cost.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
}

impl Bracket {
    fn from_result(r: &TransportResult) -> Self {
        Bracket { lower: r.dual_value.min(r.value), upper: r.value }
    }

    fn exact(v: f64) -> Self {
        Bracket { lower: v, upper: v }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Squared pseudometric between any two states (W2^2 when both are classical).
pub fn pair_cost(basis: &FockBasis, a: &State, b: &State, lambda: f64, opts: &SolverOptions) -> Result<Bracket> {
    Ok(match (a, b) {
        (State::Classical(f), State::Classical(g)) => {
            let (w, _) = classical_ot::w2_discrete(f, g)?;
            Bracket::exact(w * w)
        }
        (State::Classical(f), State::Quantum(r)) | (State::Quantum(r), State::Classical(f)) => {
            Bracket::from_result(&dd_cq(basis, f, r, lambda, opts)?)
        }
        (State::Quantum(r), State::Quantum(s)) => Bracket::from_result(&dd_qq(basis, r, s, lambda, opts)?),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TriangleKind {
    /// Middle point classical or some point rank one: no correction term.
    Restricted,
    /// General case: correction `sqrt(d hbar)`.
    Generalized,
}

#[derive(Clone, Debug, Serialize)]
pub struct TriangleReport {
    pub kind: TriangleKind,
    pub d12: Bracket,
    pub d23: Bracket,
    pub d13: Bracket,
    /// `sqrt(lower d13) - (sqrt(upper d12) + sqrt(upper d23))`; negative is good.
    pub plain_excess: f64,
    /// `sqrt(lower d13) - sqrt(upper d12 + d hbar) - sqrt(upper d23 + d hbar)`.
    pub sharpened_excess: f64,
    /// `sqrt(lower d13) - (d12 + d23 + sqrt(d hbar))`.
    pub generalized_excess: f64,
    pub passed: bool,
}

/// Evaluates the three pairwise costs and asserts the inequality that applies.
pub fn triangle_audit(basis: &FockBasis, s1: &State, s2: &State, s3: &State, opts: &SolverOptions, tol: f64) -> Result<TriangleReport> {
    let d12 = pair_cost(basis, s1, s2, 1.0, opts)?;
    let d23 = pair_cost(basis, s2, s3, 1.0, opts)?;
    let d13 = pair_cost(basis, s1, s3, 1.0, opts)?;
    let restricted = matches!(s2, State::Classical(_)) || s1.is_rank_one() || s2.is_rank_one() || s3.is_rank_one();
    let kind = if restricted { TriangleKind::Restricted } else { TriangleKind::Generalized };
    let dh = basis.hbar;
    let l13 = d13.lower.max(0.0).sqrt();
    let (u12, u23) = (d12.upper.max(0.0).sqrt(), d23.upper.max(0.0).sqrt());
    let plain_excess = l13 - u12 - u23;
    let sharpened_excess = l13 - (d12.upper + dh).sqrt() - (d23.upper + dh).sqrt();
    let generalized_excess = l13 - u12 - u23 - dh.sqrt();
    let passed = match kind {
        TriangleKind::Restricted => plain_excess <= tol,
        TriangleKind::Generalized => generalized_excess < tol && sharpened_excess <= tol,
    };
    Ok(TriangleReport { kind, d12, d23, d13, plain_excess, sharpened_excess, generalized_excess, passed })
}

/// Husimi density of `R` on `grid` as a discrete measure, with a W2 bound between
/// the cell-center measure and the continuous density (cell quantization plus
/// mass outside the window).
pub fn husimi_measure(basis: &FockBasis, r: &DensityOperator, grid: &PhaseGrid) -> Result<(PhaseMeasure, f64)> {
    let h = quantize::husimi(basis, &r.matrix, grid);
    let mass = h.integral();
    let m = h.to_measure()?;
    let (dq, dp) = (grid.dq(), grid.dp());
    let cell = ((dq * dq + dp * dp) / 12.0).sqrt();
    let span = (grid.q[grid.q.len() - 1] - grid.q[0]).hypot(grid.p[grid.p.len() - 1] - grid.p[0]);
    let lost = (1.0 - mass).max(0.0);
    Ok((m.pruned_below(1e-14), cell + lost.sqrt() * (span + 2.0 * r_max(grid))))
}

fn r_max(grid: &PhaseGrid) -> f64 {
    let q = grid.q.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let p = grid.p.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    q.hypot(p)
}

#[derive(Clone, Debug, Serialize)]
pub struct HusimiComparison {
    /// `W2(H[R], H[S])^2` (or `W2(f, H[R])^2`) from the grid LP.
    pub w2_sq: f64,
    /// `d^2 + 2 d hbar` (or `d^2 + d hbar`).
    pub bound: f64,
    /// Discretization allowance on W2.
    pub w2_slack: f64,
    pub passed: bool,
}

/// `W2(H[R], H[S])^2 <= d(R, S)^2 + 2 d hbar`, with `d(R,S)^2` given.
pub fn husimi_comparison_qq(basis: &FockBasis, r: &DensityOperator, s: &DensityOperator, dd_sq: f64, grid: &PhaseGrid) -> Result<HusimiComparison> {
    let (hr, er) = husimi_measure(basis, r, grid)?;
    let (hs, es) = husimi_measure(basis, s, grid)?;
    let (w, _) = classical_ot::w2_discrete(&hr, &hs)?;
    let slack = er + es;
    let bound = dd_sq + 2.0 * basis.hbar;
    let lower = (w - slack).max(0.0);
    Ok(HusimiComparison { w2_sq: w * w, bound, w2_slack: slack, passed: lower * lower <= bound })
}

/// `W2(f, H[R])^2 <= d(f, R)^2 + d hbar`.
pub fn husimi_comparison_cq(basis: &FockBasis, f: &PhaseMeasure, r: &DensityOperator, dd_sq: f64, grid: &PhaseGrid) -> Result<HusimiComparison> {
    let (hr, er) = husimi_measure(basis, r, grid)?;
    let (w, _) = classical_ot::w2_discrete(f, &hr)?;
    let bound = dd_sq + basis.hbar;
    let lower = (w - er).max(0.0);
    Ok(HusimiComparison { w2_sq: w * w, bound, w2_slack: er, passed: lower * lower <= bound })
}

#[derive(Clone, Debug, Serialize)]
pub struct HusimiLowerBound {
    pub qq: Bracket,
    pub cq: Bracket,
    pub w2_slack: f64,
    /// `(sqrt(lower cq) - slack)_+^2 - d hbar - upper qq`; nonpositive when the bound holds.
    pub excess: f64,
    pub passed: bool,
}

/// `d(R, S)^2 >= d(H[S], R)^2 - d hbar`, with `H[S]` discretized on `grid`.
pub fn husimi_lower_bound(basis: &FockBasis, r: &DensityOperator, s: &DensityOperator, grid: &PhaseGrid, opts: &SolverOptions) -> Result<HusimiLowerBound> {
    let qq = Bracket::from_result(&dd_qq(basis, r, s, 1.0, opts)?);
    let (hs, slack) = husimi_measure(basis, s, grid)?;
    let cq = Bracket::from_result(&dd_cq(basis, &hs, r, 1.0, opts)?);
    let lhs = (cq.lower.max(0.0).sqrt() - slack).max(0.0).powi(2) - basis.hbar;
    let excess = lhs - qq.upper;
    Ok(HusimiLowerBound { qq, cq, w2_slack: slack, excess, passed: excess <= 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classical_triangle_is_exact() {
        let b = FockBasis::new(0.5, 4).unwrap();
        let a = State::Classical(PhaseMeasure::dirac(0.0, 0.0));
        let m = State::Classical(PhaseMeasure::dirac(1.0, 0.0));
        let c = State::Classical(PhaseMeasure::dirac(2.0, 0.0));
        let rep = triangle_audit(&b, &a, &m, &c, &SolverOptions::default(), 1e-12).unwrap();
        assert_eq!(rep.kind, TriangleKind::Restricted);
        assert!(rep.plain_excess.abs() < 1e-12);
        assert!(rep.passed);
    }
}
