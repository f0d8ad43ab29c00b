//! Quantum heat semigroup `dR/dt = -[p,[p,R]]/hbar^2 - [q,[q,R]]/hbar^2` and the audit of
//! its contraction of the pseudometric.
//!
//! Both double commutators are solved exactly: the position factor multiplies the
//! kernel `r(x, x')` by `exp(-t (x - x')^2 / hbar^2)`, the momentum factor does the same
//! to the momentum kernel. The two factors commute, so their product is the semigroup.

use super::wave::WaveGrid;
use crate::densop::DensityOperator;
use crate::error::{Error, Result};
use crate::fock::{self, FockBasis};
use crate::linalg::{self, CMat, C64};
use crate::qot::{dd_qq, SolverOptions};
use faer::Mat;
use rustfft::FftPlanner;
use serde::Serialize;

/// Heat flow of a grid kernel `K_ij = r(x_i, x_j) dx`.
pub fn heat_evolve_kernel(grid: &WaveGrid, kernel: &CMat, hbar: f64, t: f64) -> Result<CMat> {
    let m = grid.len();
    if kernel.nrows() != m || kernel.ncols() != m {
        return Err(Error::DimensionMismatch("kernel size differs from grid".into()));
    }
    if t < 0.0 || !(hbar > 0.0) {
        return Err(Error::InvalidParameter(format!("need t >= 0 and hbar > 0 (got {t}, {hbar})")));
    }
    if t == 0.0 {
        return Ok(kernel.clone());
    }
    let xs = &grid.xs;
    let mut k = Mat::from_fn(m, m, |i, j| kernel[(i, j)] * (-t * (xs[i] - xs[j]).powi(2) / (hbar * hbar)).exp());
    // momentum kernel: F K F^dagger with the unitary DFT F
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let s = 1.0 / m as f64;
    transform(&mut k, &*fwd, &*inv, true);
    let ks = &grid.ks;
    for j in 0..m {
        for i in 0..m {
            k[(i, j)] *= s * s * (-t * (ks[i] - ks[j]).powi(2)).exp();
        }
    }
    transform(&mut k, &*fwd, &*inv, false);
    Ok(k)
}

/// `forward`: `K -> F K F^dagger` (unnormalized); otherwise `K -> F^dagger K F`.
fn transform(k: &mut CMat, fwd: &dyn rustfft::Fft<f64>, inv: &dyn rustfft::Fft<f64>, forward: bool) {
    let m = k.nrows();
    let (a, b) = if forward { (fwd, inv) } else { (inv, fwd) };
    let mut col = vec![C64::new(0.0, 0.0); m];
    for j in 0..m {
        for i in 0..m {
            col[i] = k[(i, j)];
        }
        a.process(&mut col);
        for i in 0..m {
            k[(i, j)] = col[i];
        }
    }
    // right multiplication by F^dagger acts on rows as the conjugate transform
    for i in 0..m {
        for j in 0..m {
            col[j] = k[(i, j)];
        }
        b.process(&mut col);
        for j in 0..m {
            k[(i, j)] = col[j];
        }
    }
}

/// Grid carrying the first `n` Hermite functions with room for spreading by `t`.
pub fn heat_grid(basis: &FockBasis, t_max: f64) -> Result<WaveGrid> {
    let n = basis.n_modes as f64;
    let half = (2.0 * basis.hbar * n).sqrt() + 8.0 * (0.5 * basis.hbar + 2.0 * t_max).sqrt() + 2.0;
    let dx = 0.25 * std::f64::consts::PI * (basis.hbar / (2.0 * n)).sqrt();
    let m = ((2.0 * half / dx).ceil() as usize).next_power_of_two();
    WaveGrid::new(0.0, 2.0 * half, m)
}

fn fock_to_grid(grid: &WaveGrid, basis: &FockBasis) -> CMat {
    let phi = fock::hermite_functions(basis.hbar, basis.n_modes, &grid.xs);
    let w = grid.dx().sqrt();
    Mat::from_fn(grid.len(), basis.n_modes, |j, k| linalg::re(phi[k][j] * w))
}

/// `R(t)` projected back onto the basis and renormalized; also returns the trace lost
/// to the projection.
pub fn quantum_heat_evolve(basis: &FockBasis, grid: &WaveGrid, r: &DensityOperator, t: f64) -> Result<(DensityOperator, f64)> {
    let f = fock_to_grid(grid, basis);
    let k = linalg::conjugate_by(&f, &r.matrix);
    let kt = heat_evolve_kernel(grid, &k, basis.hbar, t)?;
    let back = linalg::hermitian_part(&linalg::mul(&linalg::adj_mul(&f, &kt), &f));
    let tr = linalg::trace(&back).re;
    Ok((DensityOperator::unchecked(linalg::scale(&back, 1.0 / tr), r.dims.clone())?, (1.0 - tr).max(0.0)))
}

#[derive(Clone, Debug, Serialize)]
pub struct HeatRow {
    pub time: f64,
    pub value: f64,
    pub dual_value: f64,
    pub projection_loss: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct HeatReport {
    pub rows: Vec<HeatRow>,
    /// Largest `lower(t_k) - upper(t_{k-1})`; nonpositive means non-increasing.
    pub max_increase: f64,
    pub passed: bool,
}

/// `d(R_1(t), R_2(t))^2` on increasing times; passes when each certified lower value is
/// at most the previous upper value plus `tol` times the scale.
pub fn heat_contraction_audit(basis: &FockBasis, r1: &DensityOperator, r2: &DensityOperator, times: &[f64], opts: &SolverOptions, tol: f64) -> Result<HeatReport> {
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("times must increase".into()));
    }
    let grid = heat_grid(basis, times.iter().copied().fold(0.0, f64::max))?;
    let mut rows = Vec::new();
    for &t in times {
        let (a, la) = quantum_heat_evolve(basis, &grid, r1, t)?;
        let (b, lb) = quantum_heat_evolve(basis, &grid, r2, t)?;
        let res = dd_qq(basis, &a, &b, 1.0, opts)?;
        rows.push(HeatRow { time: t, value: res.value, dual_value: res.dual_value, projection_loss: la + lb, converged: res.converged });
    }
    let max_increase = rows
        .windows(2)
        .map(|w| w[1].dual_value.min(w[1].value) - w[0].value)
        .fold(f64::NEG_INFINITY, f64::max);
    let scale = rows.iter().map(|r| r.value.abs()).fold(1.0, f64::max);
    let passed = max_increase <= tol * scale && rows.iter().all(|r| r.converged);
    Ok(HeatReport { rows, max_increase, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantize::{toeplitz, PhaseMeasure};

    #[test]
    fn zero_time_is_identity() {
        let b = FockBasis::new(1.0, 8).unwrap();
        let g = heat_grid(&b, 0.0).unwrap();
        let r = toeplitz(&b, &PhaseMeasure::dirac(0.5, 0.0));
        let (rt, _) = quantum_heat_evolve(&b, &g, &r, 0.0).unwrap();
        assert!(linalg::max_abs(&linalg::sub(&rt.matrix, &r.matrix)) < 1e-10);
    }

    #[test]
    fn gaussian_spreads_by_two_t_per_axis() {
        // the Wigner function solves the phase-space heat equation: variances grow by 2t
        let hbar = 1.0;
        let g = WaveGrid::new(0.0, 40.0, 512).unwrap();
        let psi: Vec<C64> = g.xs.iter().map(|&x| fock::coherent_wavefunction(hbar, 0.5, 0.3, x) * g.dx().sqrt()).collect();
        let k = linalg::outer(&psi, &psi);
        let t = 0.4;
        let kt = heat_evolve_kernel(&g, &k, hbar, t).unwrap();
        let tr: f64 = (0..g.len()).map(|i| kt[(i, i)].re).sum();
        assert!((tr - 1.0).abs() < 1e-12);
        let mx: f64 = (0..g.len()).map(|i| kt[(i, i)].re * g.xs[i]).sum();
        let vx: f64 = (0..g.len()).map(|i| kt[(i, i)].re * (g.xs[i] - mx).powi(2)).sum();
        assert!((mx - 0.5).abs() < 1e-10);
        assert!((vx - (0.5 * hbar + 2.0 * t)).abs() < 1e-8, "{vx}");
        assert!(linalg::min_eig(&linalg::hermitian_part(&kt)) > -1e-12);
    }

    #[test]
    fn contraction_on_two_coherent_states() {
        let b = FockBasis::new(1.0, 8).unwrap();
        let r1 = toeplitz(&b, &PhaseMeasure::dirac(0.5, 0.0));
        let r2 = toeplitz(&b, &PhaseMeasure::dirac(-0.5, 0.0));
        let rep = heat_contraction_audit(&b, &r1, &r2, &[0.0, 0.1], &SolverOptions::default(), 1e-5).unwrap();
        assert!(rep.passed, "{rep:?}");
    }
}
