//! Truncated Fock (Hermite) basis, coherent states, and the position-grid carrier.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, ZERO};
use faer::Mat;
use serde::{Deserialize, Serialize};

/// Deficit above which a truncated coherent vector is considered unreliable.
pub const TRUNCATION_WARN: f64 = 1e-8;

/// Truncated harmonic-oscillator basis `e_0 .. e_{n-1}` with ladder, position and
/// momentum matrices at a given `hbar`.
#[derive(Clone, Debug)]
pub struct FockBasis {
    pub hbar: f64,
    pub dim_space: usize,
    pub n_modes: usize,
    pub a: CMat,
    pub a_dag: CMat,
    pub x_hat: CMat,
    pub p_hat: CMat,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisParams {
    pub hbar: f64,
    pub n_modes: usize,
}

impl FockBasis {
    pub fn new(hbar: f64, n_modes: usize) -> Result<Self> {
        if n_modes < 2 {
            return Err(Error::InvalidParameter(format!("n_modes must be >= 2, got {n_modes}")));
        }
        if !(hbar > 0.0) || !hbar.is_finite() {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {hbar}")));
        }
        let a = lowering(n_modes);
        let a_dag = linalg::adjoint(&a);
        let s = (hbar / 2.0).sqrt();
        let x_hat = Mat::from_fn(n_modes, n_modes, |i, j| (a[(i, j)] + a_dag[(i, j)]) * s);
        let p_hat = Mat::from_fn(n_modes, n_modes, |i, j| {
            (a_dag[(i, j)] - a[(i, j)]) * C64::new(0.0, s)
        });
        Ok(FockBasis { hbar, dim_space: 1, n_modes, a, a_dag, x_hat, p_hat })
    }

    pub fn params(&self) -> BasisParams {
        BasisParams { hbar: self.hbar, n_modes: self.n_modes }
    }

    pub fn n(&self) -> usize {
        self.n_modes
    }

    /// `a^† a`, diagonal `0, 1, .., n-1`.
    pub fn number(&self) -> CMat {
        linalg::mul(&self.a_dag, &self.a)
    }

    /// Compression of `x^2` onto the first `n` modes (formed with one extra mode).
    pub fn x_squared(&self) -> CMat {
        compressed_square(self.hbar, self.n_modes, false)
    }

    /// Compression of `p^2` onto the first `n` modes.
    pub fn p_squared(&self) -> CMat {
        compressed_square(self.hbar, self.n_modes, true)
    }

    /// `x^2 + p^2` compressed: `diag(hbar (2k+1))`.
    pub fn oscillator(&self) -> CMat {
        let d: Vec<f64> = (0..self.n_modes).map(|k| self.hbar * (2 * k + 1) as f64).collect();
        linalg::diag_real(&d)
    }

    /// `[x_hat, p_hat]`.
    pub fn commutator_xp(&self) -> CMat {
        let xp = linalg::mul(&self.x_hat, &self.p_hat);
        let px = linalg::mul(&self.p_hat, &self.x_hat);
        linalg::sub(&xp, &px)
    }

    pub fn coherent(&self, q: f64, p: f64) -> StateVector {
        coherent_vector(self, q, p)
    }

    pub fn basis_vector(&self, k: usize) -> StateVector {
        let mut c = vec![ZERO; self.n_modes];
        c[k] = linalg::ONE;
        StateVector { coeffs: c, truncation_deficit: 0.0 }
    }
}

fn lowering(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if j == i + 1 { linalg::re((j as f64).sqrt()) } else { ZERO })
}

fn compressed_square(hbar: f64, n: usize, momentum: bool) -> CMat {
    let big = n + 1;
    let a = lowering(big);
    let ad = linalg::adjoint(&a);
    let s = (hbar / 2.0).sqrt();
    let op = if momentum {
        Mat::from_fn(big, big, |i, j| (ad[(i, j)] - a[(i, j)]) * C64::new(0.0, s))
    } else {
        Mat::from_fn(big, big, |i, j| (a[(i, j)] + ad[(i, j)]) * s)
    };
    let sq = linalg::mul(&op, &op);
    Mat::from_fn(n, n, |i, j| sq[(i, j)])
}

/// Coefficient vector in a truncated Fock basis.
#[derive(Clone, Debug)]
pub struct StateVector {
    pub coeffs: Vec<C64>,
    /// `1 - ||coeffs||^2` for states that are normalized in the full space.
    pub truncation_deficit: f64,
}

impl StateVector {
    pub fn norm(&self) -> f64 {
        linalg::norm(&self.coeffs)
    }

    pub fn normalized(&self) -> StateVector {
        let nrm = self.norm();
        StateVector {
            coeffs: self.coeffs.iter().map(|c| c / nrm).collect(),
            truncation_deficit: self.truncation_deficit,
        }
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        linalg::dot(&self.coeffs, &other.coeffs)
    }

    pub fn projector(&self) -> CMat {
        linalg::outer(&self.coeffs, &self.coeffs)
    }

    pub fn is_reliable(&self) -> bool {
        self.truncation_deficit <= TRUNCATION_WARN
    }
}

/// Coherent state `|q,p>`: coefficients `e^{-|alpha|^2/2} alpha^k / sqrt(k!)` with
/// `alpha = (q + i p)/sqrt(2 hbar)`, i.e. the wave packet
/// `(pi hbar)^{-1/4} exp(-(x-q)^2/2hbar) exp(i p (x - q/2)/hbar)`.
pub fn coherent_vector(basis: &FockBasis, q: f64, p: f64) -> StateVector {
    let v = coherent_vector_quiet(basis, q, p);
    if v.truncation_deficit > TRUNCATION_WARN {
        log::warn!("coherent state at ({q}, {p}) loses {:e} of its norm to truncation", v.truncation_deficit);
    }
    v
}

/// [`coherent_vector`] without the truncation warning, for evaluating transforms on
/// grids that reach past the Fock support.
pub fn coherent_vector_quiet(basis: &FockBasis, q: f64, p: f64) -> StateVector {
    let alpha = C64::new(q, p) / (2.0 * basis.hbar).sqrt();
    let mut c = Vec::with_capacity(basis.n_modes);
    let mut term = linalg::re((-alpha.norm_sqr() / 2.0).exp());
    for k in 0..basis.n_modes {
        c.push(term);
        term = term * alpha / ((k + 1) as f64).sqrt();
    }
    let nrm2: f64 = c.iter().map(|z| z.norm_sqr()).sum();
    StateVector { coeffs: c, truncation_deficit: (1.0 - nrm2).max(0.0) }
}

/// Uniform position grid on `[-L/2, L/2)` carrying Fock objects.
#[derive(Clone, Debug)]
pub struct PositionGrid {
    pub m_points: usize,
    pub extent: f64,
    pub points: Vec<f64>,
    /// `phi_k(x_j) sqrt(dx)`, an `m x n` real matrix.
    pub fock_to_grid: Mat<f64>,
    pub hbar: f64,
}

impl PositionGrid {
    /// Default carrier for a basis: 256 points on `8 sqrt(hbar n)`.
    pub fn for_basis(basis: &FockBasis) -> Result<Self> {
        let l = 8.0 * (basis.hbar * basis.n_modes as f64).sqrt();
        Self::new(basis, 256, l)
    }

    pub fn new(basis: &FockBasis, m_points: usize, extent: f64) -> Result<Self> {
        let points = uniform_points(m_points, extent);
        let dx = extent / m_points as f64;
        check_resolution(basis.hbar, basis.n_modes, extent, dx)?;
        let phi = hermite_functions(basis.hbar, basis.n_modes, &points);
        let w = dx.sqrt();
        let f = Mat::from_fn(m_points, basis.n_modes, |j, k| phi[k][j] * w);
        Ok(PositionGrid { m_points, extent, points, fock_to_grid: f, hbar: basis.hbar })
    }

    pub fn dx(&self) -> f64 {
        self.extent / self.m_points as f64
    }

    pub fn n_modes(&self) -> usize {
        self.fock_to_grid.ncols()
    }

    /// Largest deviation of `F^T F` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let f = &self.fock_to_grid;
        let n = f.ncols();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..=a {
                let s: f64 = (0..f.nrows()).map(|j| f[(j, a)] * f[(j, b)]).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }

    /// Grid samples `psi(x_j) sqrt(dx)` of a Fock state.
    pub fn state_to_grid(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.n_modes() {
            return Err(Error::DimensionMismatch(format!(
                "state has {} modes, grid carries {}",
                v.len(),
                self.n_modes()
            )));
        }
        let f = &self.fock_to_grid;
        Ok((0..self.m_points)
            .map(|j| (0..v.len()).map(|k| v[k] * f[(j, k)]).sum())
            .collect())
    }

    pub fn state_to_fock(&self, g: &[C64]) -> Result<Vec<C64>> {
        if g.len() != self.m_points {
            return Err(Error::DimensionMismatch(format!(
                "grid vector has {} points, grid has {}",
                g.len(),
                self.m_points
            )));
        }
        let f = &self.fock_to_grid;
        Ok((0..self.n_modes())
            .map(|k| (0..g.len()).map(|j| g[j] * f[(j, k)]).sum())
            .collect())
    }

    fn f_complex(&self) -> CMat {
        let f = &self.fock_to_grid;
        Mat::from_fn(f.nrows(), f.ncols(), |i, j| linalg::re(f[(i, j)]))
    }

    /// `F R F^T`: kernel samples `r(x_i, x_j) dx`.
    pub fn operator_to_grid(&self, r: &CMat) -> Result<CMat> {
        if r.nrows() != self.n_modes() || r.ncols() != self.n_modes() {
            return Err(Error::DimensionMismatch("operator size differs from grid modes".into()));
        }
        let f = self.f_complex();
        Ok(linalg::conjugate_by(&f, r))
    }

    /// `F^T R_grid F`.
    pub fn operator_to_fock(&self, g: &CMat) -> Result<CMat> {
        if g.nrows() != self.m_points || g.ncols() != self.m_points {
            return Err(Error::DimensionMismatch("grid operator size differs from grid".into()));
        }
        let f = self.f_complex();
        Ok(linalg::mul(&linalg::adj_mul(&f, g), &f))
    }

    /// Compression of the multiplication operator by `g(x)` onto the basis.
    pub fn multiplication_operator(&self, g: impl Fn(f64) -> f64) -> CMat {
        let f = &self.fock_to_grid;
        let n = f.ncols();
        let vals: Vec<f64> = self.points.iter().map(|&x| g(x)).collect();
        Mat::from_fn(n, n, |a, b| {
            linalg::re((0..self.m_points).map(|j| f[(j, a)] * vals[j] * f[(j, b)]).sum())
        })
    }
}

pub fn uniform_points(m: usize, extent: f64) -> Vec<f64> {
    let dx = extent / m as f64;
    (0..m).map(|j| -extent / 2.0 + j as f64 * dx).collect()
}

fn check_resolution(hbar: f64, n: usize, extent: f64, dx: f64) -> Result<()> {
    let need_half = (2.0 * hbar * n as f64).sqrt();
    let max_dx = std::f64::consts::PI * (hbar / (2.0 * n as f64)).sqrt();
    if extent / 2.0 < need_half {
        return Err(Error::UnderResolved(format!(
            "half extent {} below turning point {need_half:.4} of mode {}",
            extent / 2.0,
            n - 1
        )));
    }
    if dx > max_dx {
        return Err(Error::UnderResolved(format!("spacing {dx:.4} exceeds {max_dx:.4}")));
    }
    Ok(())
}

/// Hermite functions `phi_0 .. phi_{n-1}` at scale `hbar`, evaluated at `xs`, by the
/// three-term recurrence. Result is indexed `[k][point]`.
pub fn hermite_functions(hbar: f64, n: usize, xs: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; xs.len()]; n];
    let c0 = (std::f64::consts::PI * hbar).powf(-0.25);
    let sh = hbar.sqrt();
    for (j, &x) in xs.iter().enumerate() {
        let u = x / sh;
        let mut prev = 0.0;
        let mut cur = c0 * (-u * u / 2.0).exp();
        for k in 0..n {
            out[k][j] = cur;
            let next = (2.0 / (k + 1) as f64).sqrt() * u * cur - (k as f64 / (k + 1) as f64).sqrt() * prev;
            prev = cur;
            cur = next;
        }
    }
    out
}

/// Hermite-function values on a grid, as an `m x n` matrix (no quadrature weight).
pub fn hermite_grid(basis: &FockBasis, grid: &PositionGrid) -> Result<Mat<f64>> {
    check_resolution(basis.hbar, basis.n_modes, grid.extent, grid.dx())?;
    let phi = hermite_functions(basis.hbar, basis.n_modes, &grid.points);
    Ok(Mat::from_fn(grid.m_points, basis.n_modes, |j, k| phi[k][j]))
}

/// Closed-form coherent wave packet at `x`.
pub fn coherent_wavefunction(hbar: f64, q: f64, p: f64, x: f64) -> C64 {
    let amp = (std::f64::consts::PI * hbar).powf(-0.25) * (-(x - q).powi(2) / (2.0 * hbar)).exp();
    C64::from_polar(amp, p * (x - q / 2.0) / hbar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ladder_two_modes() {
        let b = FockBasis::new(1.0, 2).unwrap();
        assert_abs_diff_eq!(b.a[(0, 1)].re, 1.0);
        assert_abs_diff_eq!(b.a[(1, 0)].norm(), 0.0);
        let n = b.number();
        assert_abs_diff_eq!(n[(0, 0)].re, 0.0);
        assert_abs_diff_eq!(n[(1, 1)].re, 1.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(FockBasis::new(1.0, 1).is_err());
        assert!(FockBasis::new(0.0, 4).is_err());
        assert!(FockBasis::new(-1.0, 4).is_err());
    }

    #[test]
    fn number_spectrum() {
        let b = FockBasis::new(1.0, 8).unwrap();
        let ev = linalg::eigvalsh(&b.number());
        for (k, v) in ev.iter().enumerate() {
            assert_abs_diff_eq!(*v, k as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn ground_energy() {
        let b = FockBasis::new(0.1, 16).unwrap();
        let e0 = b.basis_vector(0);
        let h = linalg::add(&b.x_squared(), &b.p_squared());
        assert_abs_diff_eq!(linalg::expectation(&h, &e0.coeffs), 0.1, epsilon = 1e-14);
        let osc = b.oscillator();
        assert!(linalg::fro_norm(&linalg::sub(&h, &osc)) < 1e-12);
    }

    #[test]
    fn commutator_block() {
        let b = FockBasis::new(0.7, 10).unwrap();
        let c = b.commutator_xp();
        for i in 0..9 {
            for j in 0..9 {
                let target = if i == j { C64::new(0.0, 0.7) } else { ZERO };
                assert!((c[(i, j)] - target).norm() < 1e-12);
            }
        }
        assert!(linalg::hermitian_defect(&b.x_hat) < 1e-15);
        assert!(linalg::hermitian_defect(&b.p_hat) < 1e-15);
    }

    #[test]
    fn raising_builds_basis() {
        let b = FockBasis::new(1.0, 6).unwrap();
        let mut v = b.basis_vector(0).coeffs;
        for k in 1..6 {
            v = linalg::mat_vec(&b.a_dag, &v);
            let nrm = linalg::norm(&v);
            let u: Vec<C64> = v.iter().map(|z| z / nrm).collect();
            for (i, z) in u.iter().enumerate() {
                let t = if i == k { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(z.re, t, epsilon = 1e-14);
                assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn coherent_origin_is_vacuum() {
        let b = FockBasis::new(1.0, 12).unwrap();
        let c = b.coherent(0.0, 0.0);
        assert_eq!(c.truncation_deficit, 0.0);
        assert_abs_diff_eq!(c.coeffs[0].re, 1.0);
    }

    #[test]
    fn coherent_matches_wave_packet() {
        let b = FockBasis::new(0.5, 40).unwrap();
        let g = PositionGrid::for_basis(&b).unwrap();
        let (q, p) = (1.0, -0.7);
        let v = g.state_to_grid(&b.coherent(q, p).coeffs).unwrap();
        let w = g.dx().sqrt();
        let mut peak = (0.0, 0);
        for (j, &x) in g.points.iter().enumerate() {
            let exact = coherent_wavefunction(0.5, q, p, x) * w;
            assert!((v[j] - exact).norm() < 1e-10);
            if v[j].norm() > peak.0 {
                peak = (v[j].norm(), j);
            }
        }
        assert!((g.points[peak.1] - q).abs() <= g.dx());
    }

    #[test]
    fn phi0_at_origin() {
        let v = hermite_functions(1.0, 1, &[0.0]);
        assert_abs_diff_eq!(v[0][0], std::f64::consts::PI.powf(-0.25), epsilon = 1e-15);
    }

    #[test]
    fn quadrature_orthonormality() {
        let b = FockBasis::new(1.0, 8).unwrap();
        let g = PositionGrid::for_basis(&b).unwrap();
        let f = &g.fock_to_grid;
        let d01: f64 = (0..g.m_points).map(|j| f[(j, 0)] * f[(j, 1)]).sum();
        let d77: f64 = (0..g.m_points).map(|j| f[(j, 7)] * f[(j, 7)]).sum();
        assert!(d01.abs() < 1e-10);
        assert!((d77 - 1.0).abs() < 1e-8);
        assert!(g.orthonormality_defect() < 1e-8);
    }

    #[test]
    fn under_resolved_grid_rejected() {
        let b = FockBasis::new(1.0, 16).unwrap();
        assert!(PositionGrid::new(&b, 16, 20.0).is_err());
        assert!(PositionGrid::new(&b, 256, 2.0).is_err());
    }
}
