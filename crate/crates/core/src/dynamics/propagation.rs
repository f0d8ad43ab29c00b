//! Quantum evolution of Fock-basis density operators and the audit of the
//! propagation estimate `d_lambda(t) <= d_lambda(0) e^{L t}` together with its
//! classical-quantum variant and the Husimi/W2 consequences.

use super::classical::{classical_flow, harmonic_flow, FlowState};
use super::wave::{Ensemble, Propagator, WaveGrid};
use super::{propagation_rate, Potential};
use crate::classical_ot;
use crate::densop::DensityOperator;
use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::linalg::{self, CMat, C64};
use crate::qot::audit::husimi_measure;
use crate::qot::{dd_cq, dd_qq, SolverOptions, TransportResult};
use crate::quantize::{toeplitz, PhaseGrid, PhaseMeasure};
use serde::Serialize;

/// `exp(-i t (N + 1/2))`: the exact propagator of `(p^2 + x^2)/2` in the Fock basis,
/// whose oscillator frequency is 1 at every `hbar`.
pub fn harmonic_fock_unitary(basis: &FockBasis, t: f64) -> CMat {
    let d: Vec<C64> = (0..basis.n_modes).map(|k| C64::from_polar(1.0, -t * (k as f64 + 0.5))).collect();
    let mut u = linalg::zeros(basis.n_modes, basis.n_modes);
    for (k, c) in d.into_iter().enumerate() {
        u[(k, k)] = c;
    }
    u
}

/// How a Fock-basis state is carried forward in time.
#[derive(Clone, Debug)]
pub enum Evolution {
    /// Unit-frequency oscillator, exact in the truncated basis.
    UnitHarmonic,
    /// Any potential: lift to a wave grid, split-step with steps `dt_ref`, project back.
    Grid { grid: WaveGrid, potential: Potential, dt_ref: f64 },
}

impl Evolution {
    /// Picks the exact route for `omega = 1` and a grid otherwise.
    pub fn for_potential(basis: &FockBasis, v: &Potential, dt_ref: f64) -> Result<Self> {
        if let Potential::Harmonic { omega } = v {
            if (omega - 1.0).abs() < 1e-15 {
                return Ok(Evolution::UnitHarmonic);
            }
        }
        let half = 2.0 * (2.0 * basis.hbar * basis.n_modes as f64).sqrt() + 4.0;
        let dx = 0.25 * std::f64::consts::PI * (basis.hbar / (2.0 * basis.n_modes as f64)).sqrt();
        let m = ((2.0 * half / dx).ceil() as usize).next_power_of_two();
        Ok(Evolution::Grid { grid: WaveGrid::new(0.0, 2.0 * half, m)?, potential: v.clone(), dt_ref })
    }

    /// `R(t)` and the trace lost by projecting back onto the basis (renormalized away).
    pub fn apply(&self, basis: &FockBasis, r: &DensityOperator, t: f64) -> Result<(DensityOperator, f64)> {
        match self {
            Evolution::UnitHarmonic => {
                let u = harmonic_fock_unitary(basis, t);
                Ok((DensityOperator::unchecked(linalg::conjugate_by(&u, &r.matrix), r.dims.clone())?, 0.0))
            }
            Evolution::Grid { grid, potential, dt_ref } => {
                let p = Propagator::new(grid, basis.hbar, potential)?;
                let e = p.evolve(&Ensemble::from_fock(grid, basis, r)?, t, *dt_ref)?;
                let m = linalg::hermitian_part(&e.to_fock(grid, basis));
                let tr = linalg::trace(&m).re;
                let lost = (1.0 - tr).max(0.0);
                Ok((DensityOperator::unchecked(linalg::scale(&m, 1.0 / tr), r.dims.clone())?, lost))
            }
        }
    }

    /// Classical flow matching the quantum Hamiltonian.
    pub fn push(&self, v: &Potential, f: &PhaseMeasure, t: f64) -> Result<PhaseMeasure> {
        match self {
            Evolution::UnitHarmonic => {
                PhaseMeasure::new(f.points.iter().map(|&z| harmonic_flow(z, 1.0, t)).collect(), f.weights.clone())
            }
            Evolution::Grid { dt_ref, .. } => classical_flow(v, &FlowState::from_measure(f), t, *dt_ref)?.to_measure(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PropagationRow {
    pub time: f64,
    /// `d_lambda(t)^2` (primal upper value).
    pub value: f64,
    pub dual_value: f64,
    /// `d_lambda(0)^2 e^{2 L t}` from the certified lower value at time 0.
    pub bound: f64,
    /// `d_lambda(t) / d_lambda(0)`.
    pub ratio: f64,
    pub exp_lt: f64,
    pub projection_loss: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct HusimiRow {
    pub time: f64,
    /// `W2(f o Phi(-t), H[R_1(t)])^2` and its bound.
    pub cq_w2_sq: f64,
    pub cq_bound: f64,
    /// `W2(H[R_1(t)], H[R_2(t)])^2` and its bound.
    pub qq_w2_sq: f64,
    pub qq_bound: f64,
    /// Discretization allowance on `W2` for the classical-quantum and the
    /// quantum-quantum comparison.
    pub cq_w2_slack: f64,
    pub w2_slack: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PropagationReport {
    pub lambda: f64,
    pub rate: f64,
    pub qq: Vec<PropagationRow>,
    pub cq: Vec<PropagationRow>,
    pub husimi: Vec<HusimiRow>,
    pub converged: bool,
    pub passed: bool,
}

/// Inputs of the propagation audit: `R_i = T[g_i]` and a classical density `f`.
#[derive(Clone, Debug)]
pub struct PropagationSetup {
    pub f: PhaseMeasure,
    pub g1: PhaseMeasure,
    pub g2: PhaseMeasure,
    pub potential: Potential,
    pub lambda: f64,
    pub times: Vec<f64>,
    /// Relative slack on top of the solver tolerance.
    pub tol: f64,
    pub husimi_cells: usize,
    pub dt_ref: f64,
}

fn row(time: f64, r: &TransportResult, first: Option<&TransportResult>, rate: f64, tol: f64, solver_tol: f64, lost: f64) -> PropagationRow {
    let exp_lt = (rate * time).exp();
    let (v0, ratio) = match first {
        Some(f) => (f.dual_value.min(f.value), (r.value / f.value).max(0.0).sqrt()),
        None => (r.value, 1.0),
    };
    let bound = v0 * exp_lt * exp_lt;
    let slack = (1.0 + tol + solver_tol).powi(2) * (1.0 + lost);
    PropagationRow {
        time,
        value: r.value,
        dual_value: r.dual_value,
        bound,
        ratio,
        exp_lt,
        projection_loss: lost,
        passed: r.value <= bound * slack,
    }
}

/// Evaluates `d_lambda(U R_1 U*, U R_2 U*)`, `d_lambda(f o Phi(-t), U R_1 U*)` and the
/// Husimi/W2 consequences at each time. The Husimi bounds use `e^{2 L t}` on squared
/// distances.
pub fn propagation_audit(basis: &FockBasis, s: &PropagationSetup, opts: &SolverOptions) -> Result<PropagationReport> {
    if !(s.lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {}", s.lambda)));
    }
    let rate = propagation_rate(s.lambda, s.potential.constants().lip_grad);
    let ev = Evolution::for_potential(basis, &s.potential, s.dt_ref)?;
    let r1 = toeplitz(basis, &s.g1);
    let r2 = toeplitz(basis, &s.g2);
    let (mut qq, mut cq, mut husimi) = (Vec::new(), Vec::new(), Vec::new());
    let (mut qq0, mut cq0): (Option<TransportResult>, Option<TransportResult>) = (None, None);
    let mut converged = true;
    let (l2, hb) = (s.lambda * s.lambda, basis.hbar);
    let (mx, mn) = (l2.max(1.0), l2.min(1.0));
    let w_f_g1 = classical_ot::w2_discrete(&s.f, &s.g1)?.0;
    let w_g1_g2 = classical_ot::w2_discrete(&s.g1, &s.g2)?.0;
    for &t in &s.times {
        let (a, la) = ev.apply(basis, &r1, t)?;
        let (b, lb) = ev.apply(basis, &r2, t)?;
        let ft = ev.push(&s.potential, &s.f, t)?;
        let rq = dd_qq(basis, &a, &b, s.lambda, opts)?;
        let rc = dd_cq(basis, &ft, &a, s.lambda, opts)?;
        converged &= rq.converged && rc.converged;
        qq.push(row(t, &rq, qq0.as_ref(), rate, s.tol, opts.tol, la + lb));
        cq.push(row(t, &rc, cq0.as_ref(), rate, s.tol, opts.tol, la));
        if qq0.is_none() {
            qq0 = Some(rq);
            cq0 = Some(rc);
        }
        let e2 = (2.0 * rate * t).exp();
        let centers: Vec<[f64; 2]> = ft.points.iter().chain(&s.g1.points).chain(&s.g2.points).copied().collect();
        let grid = husimi_grid(basis, &centers, t, s.husimi_cells);
        let (ha, ea) = husimi_measure(basis, &a, &grid)?;
        let (hbm, eb) = husimi_measure(basis, &b, &grid)?;
        let cq_w = classical_ot::w2_discrete(&ft, &ha)?.0;
        let qq_w = classical_ot::w2_discrete(&ha, &hbm)?.0;
        let cq_bound = e2 * mx / mn * w_f_g1 * w_f_g1 + (1.0 + l2) * hb / (2.0 * mn) * (e2 + 1.0);
        let qq_bound = e2 * mx / mn * w_g1_g2 * w_g1_g2 + (1.0 + l2) * hb / mn * (e2 + 1.0);
        let ok = (cq_w - ea).max(0.0).powi(2) <= cq_bound && (qq_w - ea - eb).max(0.0).powi(2) <= qq_bound;
        husimi.push(HusimiRow { time: t, cq_w2_sq: cq_w * cq_w, cq_bound, qq_w2_sq: qq_w * qq_w, qq_bound, cq_w2_slack: ea, w2_slack: ea + eb, passed: ok });
    }
    let passed = qq.iter().chain(&cq).all(|r| r.passed) && husimi.iter().all(|r| r.passed);
    Ok(PropagationReport { lambda: s.lambda, rate, qq, cq, husimi, converged, passed })
}

/// Phase grid covering the supports, widened by the coherent spread and the flow.
fn husimi_grid(basis: &FockBasis, centers: &[[f64; 2]], t: f64, cells: usize) -> PhaseGrid {
    let r = centers.iter().map(|z| z[0].hypot(z[1])).fold(0.0, f64::max);
    let half = r * (1.0 + t) + 5.0 * basis.hbar.sqrt();
    PhaseGrid::square([0.0, 0.0], half, cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_harmonic_rotates_coherent_states() {
        let b = FockBasis::new(0.2, 30).unwrap();
        let r = toeplitz(&b, &PhaseMeasure::dirac(1.0, 0.0));
        let (rt, lost) = Evolution::UnitHarmonic.apply(&b, &r, 0.7).unwrap();
        let z = harmonic_flow([1.0, 0.0], 1.0, 0.7);
        let expect = toeplitz(&b, &PhaseMeasure::dirac(z[0], z[1]));
        assert_eq!(lost, 0.0);
        assert!(linalg::max_abs(&linalg::sub(&rt.matrix, &expect.matrix)) < 1e-10);
    }

    #[test]
    fn grid_route_agrees_with_exact_harmonic() {
        let b = FockBasis::new(0.25, 12).unwrap();
        let r = toeplitz(&b, &PhaseMeasure::dirac(0.3, 0.2));
        let (exact, _) = Evolution::UnitHarmonic.apply(&b, &r, 0.5).unwrap();
        let v = Potential::Harmonic { omega: 1.0 + 1e-12 };
        let ev = Evolution::for_potential(&b, &v, 1e-3).unwrap();
        let (grid, lost) = ev.apply(&b, &r, 0.5).unwrap();
        assert!(lost < 1e-6);
        assert!(linalg::max_abs(&linalg::sub(&exact.matrix, &grid.matrix)) < 1e-5);
    }

    #[test]
    fn ratio_is_one_at_time_zero() {
        let b = FockBasis::new(0.25, 10).unwrap();
        let s = PropagationSetup {
            f: PhaseMeasure::dirac(0.5, 0.0),
            g1: PhaseMeasure::dirac(0.0, 0.0),
            g2: PhaseMeasure::dirac(0.5, 0.0),
            potential: Potential::Harmonic { omega: 1.0 },
            lambda: 1.0,
            times: vec![0.0, 0.5],
            tol: 1e-3,
            husimi_cells: 16,
            dt_ref: 1e-3,
        };
        let rep = propagation_audit(&b, &s, &SolverOptions::default()).unwrap();
        assert_eq!(rep.qq[0].ratio, 1.0);
        assert!(rep.passed, "{rep:?}");
    }
}
