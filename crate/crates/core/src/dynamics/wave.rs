//! Density operators on a periodic position grid as weighted orbital ensembles
//! `R = sum_i w_i |psi_i><psi_i|`, with split-step spectral propagators.
//!
//! Orbitals hold `psi(x_j) sqrt(dx)`, so the discrete l2 norm is the L2 norm.

use super::Potential;
use crate::densop::DensityOperator;
use crate::error::{Error, Result};
use crate::fock::{self, FockBasis};
use crate::linalg::{self, CMat, C64};
use crate::quantize::{self, PhaseFunction, PhaseGrid, PhaseMeasure};
use faer::Mat;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

/// Periodic grid `center + [-L/2, L/2)` with `m` points and FFT plans.
#[derive(Clone)]
pub struct WaveGrid {
    pub center: f64,
    pub extent: f64,
    pub xs: Vec<f64>,
    pub ks: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for WaveGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WaveGrid").field("center", &self.center).field("extent", &self.extent).field("m", &self.xs.len()).finish()
    }
}

impl WaveGrid {
    pub fn new(center: f64, extent: f64, m: usize) -> Result<Self> {
        if m < 8 || !(extent > 0.0) || !center.is_finite() {
            return Err(Error::InvalidParameter(format!("wave grid needs m >= 8 and extent > 0 (got {m}, {extent})")));
        }
        let xs = fock::uniform_points(m, extent).into_iter().map(|x| x + center).collect();
        let ks = quantize::wavenumbers(m, extent / m as f64);
        let mut planner = FftPlanner::new();
        Ok(WaveGrid { center, extent, xs, ks, forward: planner.plan_fft_forward(m), inverse: planner.plan_fft_inverse(m) })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn dx(&self) -> f64 {
        self.extent / self.xs.len() as f64
    }

    pub fn k_max(&self) -> f64 {
        PI / self.dx()
    }

    pub fn sample(&self, v: &Potential) -> Vec<f64> {
        self.xs.iter().map(|&x| v.value(x)).collect()
    }

    fn coherent(&self, hbar: f64, q: f64, p: f64) -> Vec<C64> {
        let w = self.dx().sqrt();
        let mut v: Vec<C64> = self.xs.iter().map(|&x| fock::coherent_wavefunction(hbar, q, p, x) * w).collect();
        let n = linalg::norm(&v);
        v.iter_mut().for_each(|c| *c /= n);
        v
    }

    /// Spectral weight of `psi` in the outer fifth of the frequency band.
    pub fn spectral_tail(&self, psi: &[C64]) -> f64 {
        let mut buf = psi.to_vec();
        self.forward.process(&mut buf);
        let total: f64 = buf.iter().map(|c| c.norm_sqr()).sum();
        let cut = 0.8 * self.k_max();
        let tail: f64 = buf.iter().zip(&self.ks).filter(|(_, k)| k.abs() > cut).map(|(c, _)| c.norm_sqr()).sum();
        tail / total.max(1e-300)
    }
}

/// `sum_i w_i |psi_i><psi_i|` on a [`WaveGrid`].
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub orbitals: Vec<Vec<C64>>,
    pub weights: Vec<f64>,
}

/// Tail weight above which a state counts as under-resolved by the grid.
pub const TAIL_WARN: f64 = 1e-10;

impl Ensemble {
    pub fn pure(psi: Vec<C64>) -> Self {
        Ensemble { orbitals: vec![psi], weights: vec![1.0] }
    }

    /// Coherent packet at `(q, p)`.
    pub fn coherent(grid: &WaveGrid, hbar: f64, q: f64, p: f64) -> Self {
        Self::pure(grid.coherent(hbar, q, p))
    }

    /// `T[m]` for a discrete measure: one coherent orbital per support point.
    pub fn toeplitz(grid: &WaveGrid, hbar: f64, m: &PhaseMeasure) -> Self {
        let m = m.pruned();
        Ensemble { orbitals: m.points.iter().map(|z| grid.coherent(hbar, z[0], z[1])).collect(), weights: m.weights }
    }

    /// Spectral decomposition of a Fock-basis operator placed on the grid.
    pub fn from_fock(grid: &WaveGrid, basis: &FockBasis, r: &DensityOperator) -> Result<Self> {
        let n = basis.n_modes;
        if r.dim() != n {
            return Err(Error::DimensionMismatch(format!("operator has size {}, basis has {n} modes", r.dim())));
        }
        let phi = fock::hermite_functions(basis.hbar, n, &grid.xs);
        let w = grid.dx().sqrt();
        let e = linalg::eigh(&r.matrix);
        let mut orbitals = Vec::new();
        let mut weights = Vec::new();
        for k in 0..n {
            let lam = e.values[k];
            if lam <= 1e-14 {
                continue;
            }
            let v = e.vector(k);
            orbitals.push((0..grid.len()).map(|j| (0..n).map(|a| v[a] * phi[a][j]).sum::<C64>() * w).collect());
            weights.push(lam);
        }
        let s: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|x| *x /= s);
        Ok(Ensemble { orbitals, weights })
    }

    pub fn trace(&self) -> f64 {
        self.orbitals.iter().zip(&self.weights).map(|(o, w)| w * linalg::norm(o).powi(2)).sum()
    }

    fn gram(&self) -> Vec<Vec<C64>> {
        self.orbitals.iter().map(|a| self.orbitals.iter().map(|b| linalg::dot(a, b)).collect()).collect()
    }

    /// `trace(R^2)`.
    pub fn purity(&self) -> f64 {
        let g = self.gram();
        let mut s = 0.0;
        for (i, wi) in self.weights.iter().enumerate() {
            for (j, wj) in self.weights.iter().enumerate() {
                s += wi * wj * g[i][j].norm_sqr();
            }
        }
        s
    }

    /// Position density `rho(x_j)`.
    pub fn density(&self, grid: &WaveGrid) -> Vec<f64> {
        let dx = grid.dx();
        let mut rho = vec![0.0; grid.len()];
        for (o, w) in self.orbitals.iter().zip(&self.weights) {
            for (r, c) in rho.iter_mut().zip(o) {
                *r += w * c.norm_sqr() / dx;
            }
        }
        rho
    }

    /// `trace(1_A R)` for the grid cells whose centers lie in `A`.
    pub fn indicator_trace(&self, grid: &WaveGrid, inside: impl Fn(f64) -> bool) -> f64 {
        let mask: Vec<bool> = grid.xs.iter().map(|&x| inside(x)).collect();
        self.orbitals
            .iter()
            .zip(&self.weights)
            .map(|(o, w)| w * o.iter().zip(&mask).filter(|(_, &m)| m).map(|(c, _)| c.norm_sqr()).sum::<f64>())
            .sum()
    }

    /// `trace(V R)`.
    pub fn potential_energy(&self, grid: &WaveGrid, v: &[f64]) -> f64 {
        self.density(grid).iter().zip(v).map(|(r, v)| r * v).sum::<f64>() * grid.dx()
    }

    /// `trace(-hbar^2/2 Laplacian R)` spectrally.
    pub fn kinetic_energy(&self, grid: &WaveGrid, hbar: f64) -> f64 {
        let m = grid.len() as f64;
        self.orbitals
            .iter()
            .zip(&self.weights)
            .map(|(o, w)| {
                let mut b = o.clone();
                grid.forward.process(&mut b);
                w * b.iter().zip(&grid.ks).map(|(c, k)| 0.5 * hbar * hbar * k * k * c.norm_sqr()).sum::<f64>() / m
            })
            .sum()
    }

    /// Largest spectral tail over the orbitals.
    pub fn spectral_tail(&self, grid: &WaveGrid) -> f64 {
        self.orbitals.iter().map(|o| grid.spectral_tail(o)).fold(0.0, f64::max)
    }

    /// Galerkin projection `F^T R F` onto the first `n` Hermite functions.
    pub fn to_fock(&self, grid: &WaveGrid, basis: &FockBasis) -> CMat {
        let n = basis.n_modes;
        let phi = fock::hermite_functions(basis.hbar, n, &grid.xs);
        let w = grid.dx().sqrt();
        let coeffs: Vec<Vec<C64>> = self
            .orbitals
            .iter()
            .map(|o| (0..n).map(|a| o.iter().zip(&phi[a]).map(|(c, f)| c * (f * w)).sum()).collect())
            .collect();
        let mut r = linalg::zeros(n, n);
        for (c, wt) in coeffs.iter().zip(&self.weights) {
            for a in 0..n {
                for b in 0..n {
                    r[(a, b)] += c[a] * c[b].conj() * *wt;
                }
            }
        }
        r
    }

    /// Per-orbital `(<x>, <p>, Var x, Var p)`.
    pub fn orbital_moments(&self, grid: &WaveGrid, hbar: f64) -> Vec<[f64; 4]> {
        let m = grid.len() as f64;
        self.orbitals
            .iter()
            .map(|o| {
                let (mut mx, mut mxx) = (0.0, 0.0);
                for (c, &x) in o.iter().zip(&grid.xs) {
                    mx += c.norm_sqr() * x;
                    mxx += c.norm_sqr() * x * x;
                }
                let mut b = o.clone();
                grid.forward.process(&mut b);
                let (mut mp, mut mpp) = (0.0, 0.0);
                for (c, &k) in b.iter().zip(&grid.ks) {
                    let pr = c.norm_sqr() / m;
                    mp += pr * hbar * k;
                    mpp += pr * hbar * hbar * k * k;
                }
                [mx, mp, mxx - mx * mx, mpp - mp * mp]
            })
            .collect()
    }

    /// Ensemble mean `(<x>, <p>)` and variances of position and momentum.
    pub fn moments(&self, grid: &WaveGrid, hbar: f64) -> [f64; 4] {
        let per = self.orbital_moments(grid, hbar);
        let mut mean = [0.0; 2];
        for (o, w) in per.iter().zip(&self.weights) {
            mean[0] += w * o[0];
            mean[1] += w * o[1];
        }
        let mut var = [0.0; 2];
        for (o, w) in per.iter().zip(&self.weights) {
            var[0] += w * (o[2] + (o[0] - mean[0]).powi(2));
            var[1] += w * (o[3] + (o[1] - mean[1]).powi(2));
        }
        [mean[0], mean[1], var[0], var[1]]
    }

    /// Husimi density `(2 pi hbar)^{-1} sum_i w_i |<q,p|psi_i>|^2` on `pg` by direct
    /// sums over the grid points within nine packet widths of `q`.
    pub fn husimi(&self, grid: &WaveGrid, hbar: f64, pg: &PhaseGrid) -> PhaseFunction {
        let dx = grid.dx();
        let amp = (PI * hbar).powf(-0.25) * dx.sqrt();
        let reach = 9.0 * hbar.sqrt();
        let phases: Vec<Vec<C64>> = pg.p.iter().map(|&p| grid.xs.iter().map(|&x| C64::from_polar(1.0, -p * x / hbar)).collect()).collect();
        let mut values = vec![0.0; pg.len()];
        let np = pg.p.len();
        let mut buf = Vec::with_capacity(grid.len());
        for (i, &q) in pg.q.iter().enumerate() {
            let lo = grid.xs.partition_point(|&x| x < q - reach);
            let hi = grid.xs.partition_point(|&x| x <= q + reach);
            let win: Vec<f64> = grid.xs[lo..hi].iter().map(|&x| amp * (-(x - q).powi(2) / (2.0 * hbar)).exp()).collect();
            for (o, w) in self.orbitals.iter().zip(&self.weights) {
                buf.clear();
                buf.extend(o[lo..hi].iter().zip(&win).map(|(c, g)| c * g));
                for (j, ph) in phases.iter().enumerate() {
                    let s: C64 = buf.iter().zip(&ph[lo..hi]).map(|(a, b)| a * b).sum();
                    values[i * np + j] += w * s.norm_sqr() / (2.0 * PI * hbar);
                }
            }
        }
        PhaseFunction { grid: pg.clone(), values }
    }

    /// `||R - S||_1` from the Gram matrix of the joint orbital set.
    pub fn trace_distance(&self, other: &Ensemble) -> f64 {
        let all: Vec<&Vec<C64>> = self.orbitals.iter().chain(&other.orbitals).collect();
        let d: Vec<f64> = self.weights.iter().copied().chain(other.weights.iter().map(|w| -w)).collect();
        let k = all.len();
        let g = Mat::from_fn(k, k, |i, j| linalg::dot(all[i], all[j]));
        let e = linalg::eigh(&g);
        let sq = e.apply(|x| x.max(0.0).sqrt());
        let dm = linalg::diag_real(&d);
        let m = linalg::mul(&linalg::mul(&sq, &dm), &sq);
        linalg::eigvalsh(&linalg::hermitian_part(&m)).iter().map(|x| x.abs()).sum()
    }
}

/// `2 sqrt(1 - |<psi|phi>|^2)`, the trace distance of two pure states.
pub fn pure_trace_distance(psi: &[C64], phi: &[C64]) -> f64 {
    2.0 * (1.0 - linalg::dot(psi, phi).norm_sqr()).max(0.0).sqrt()
}

/// Cost of the product coupling of two pure states, which is their only coupling:
/// `lambda^2 [(dx)^2 + Var x + Var y] + (dp)^2 + Var p + Var q`.
pub fn pure_pair_cost(a: [f64; 4], b: [f64; 4], lambda: f64) -> f64 {
    lambda * lambda * ((a[0] - b[0]).powi(2) + a[2] + b[2]) + (a[1] - b[1]).powi(2) + a[3] + b[3]
}

/// Split-step propagator for `-hbar^2/2 Laplacian + V`.
pub struct Propagator<'a> {
    grid: &'a WaveGrid,
    hbar: f64,
    potential: Vec<f64>,
}

impl<'a> Propagator<'a> {
    pub fn new(grid: &'a WaveGrid, hbar: f64, v: &Potential) -> Result<Self> {
        Self::from_samples(grid, hbar, grid.sample(v))
    }

    pub fn from_samples(grid: &'a WaveGrid, hbar: f64, potential: Vec<f64>) -> Result<Self> {
        if !(hbar > 0.0) {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {hbar}")));
        }
        if potential.len() != grid.len() || potential.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("potential samples must be finite, one per grid point".into()));
        }
        Ok(Propagator { grid, hbar, potential })
    }

    pub fn set_potential(&mut self, v: Vec<f64>) {
        self.potential = v;
    }

    pub fn kinetic(&self, psi: &mut [C64], dt: f64) {
        let g = self.grid;
        g.forward.process(psi);
        let s = 1.0 / g.len() as f64;
        for (c, k) in psi.iter_mut().zip(&g.ks) {
            *c *= C64::from_polar(s, -0.5 * self.hbar * k * k * dt);
        }
        g.inverse.process(psi);
    }

    pub fn potential(&self, psi: &mut [C64], dt: f64) {
        for (c, v) in psi.iter_mut().zip(&self.potential) {
            *c *= C64::from_polar(1.0, -v * dt / self.hbar);
        }
    }

    /// `n` steps of potential after kinetic.
    pub fn lie_trotter(&self, e: &Ensemble, dt: f64, n: usize) -> Ensemble {
        self.map(e, |psi| {
            for _ in 0..n {
                self.kinetic(psi, dt);
                self.potential(psi, dt);
            }
        })
    }

    /// `n` symmetric steps: half potential, kinetic, half potential.
    pub fn strang(&self, e: &Ensemble, dt: f64, n: usize) -> Ensemble {
        self.map(e, |psi| {
            if n == 0 {
                return;
            }
            self.potential(psi, 0.5 * dt);
            for s in 0..n {
                self.kinetic(psi, dt);
                self.potential(psi, if s + 1 == n { 0.5 * dt } else { dt });
            }
        })
    }

    /// Reference propagator: Strang steps of at most `dt_ref` over `[0, t]`.
    pub fn evolve(&self, e: &Ensemble, t: f64, dt_ref: f64) -> Result<Ensemble> {
        if !(dt_ref > 0.0) || t < 0.0 {
            return Err(Error::InvalidParameter(format!("need t >= 0 and dt_ref > 0 (got {t}, {dt_ref})")));
        }
        let n = (t / dt_ref).ceil() as usize;
        if n == 0 {
            return Ok(e.clone());
        }
        let out = self.strang(e, t / n as f64, n);
        let tail = out.spectral_tail(self.grid);
        if tail > TAIL_WARN {
            log::warn!("state carries {tail:e} of its weight near the grid Nyquist frequency; hbar oscillations under-resolved");
        }
        Ok(out)
    }

    fn map(&self, e: &Ensemble, f: impl Fn(&mut [C64])) -> Ensemble {
        let orbitals = e
            .orbitals
            .iter()
            .map(|o| {
                let mut psi = o.clone();
                f(&mut psi);
                psi
            })
            .collect();
        Ensemble { orbitals, weights: e.weights.clone() }
    }
}

/// Snapshots `R(t_k)`, `t_k = k t / n`, of the reference propagator.
pub fn snapshots(p: &Propagator, e: &Ensemble, t: f64, n: usize, dt_ref: f64) -> Result<Vec<Ensemble>> {
    let h = t / n as f64;
    let mut out = vec![e.clone()];
    for _ in 0..n {
        let next = p.evolve(out.last().unwrap_or(e), h, dt_ref)?;
        out.push(next);
    }
    Ok(out)
}

/// Cell masses of a phase function normalized to 1, row-major.
pub fn cell_masses(h: &PhaseFunction) -> Vec<f64> {
    let s: f64 = h.values.iter().map(|v| v.max(0.0)).sum();
    h.values.iter().map(|v| v.max(0.0) / s).collect()
}

/// Square-ish window covering `mean +- k sd` of both Husimi densities given as
/// `[<x>, <p>, Var x, Var p]` state moments.
pub fn husimi_window(a: [f64; 4], b: [f64; 4], hbar: f64, k: f64, cells: usize) -> PhaseGrid {
    let sd = |v: f64| (v + 0.5 * hbar).sqrt();
    let q0 = (a[0] - k * sd(a[2])).min(b[0] - k * sd(b[2]));
    let q1 = (a[0] + k * sd(a[2])).max(b[0] + k * sd(b[2]));
    let p0 = (a[1] - k * sd(a[3])).min(b[1] - k * sd(b[3]));
    let p1 = (a[1] + k * sd(a[3])).max(b[1] + k * sd(b[3]));
    PhaseGrid::new((q0, q1), (p0, p1), cells, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::classical::harmonic_flow;

    fn grid() -> WaveGrid {
        WaveGrid::new(0.0, 16.0, 512).unwrap()
    }

    #[test]
    fn free_lie_trotter_matches_reference() {
        let g = grid();
        let p = Propagator::new(&g, 0.5, &Potential::Zero).unwrap();
        let e = Ensemble::coherent(&g, 0.5, 0.0, 1.0);
        let a = p.lie_trotter(&e, 0.1, 10);
        let b = p.evolve(&e, 1.0, 1e-3).unwrap();
        let diff = a.orbitals[0].iter().zip(&b.orbitals[0]).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
        assert!((a.trace() - 1.0).abs() < 1e-12);
        assert!((a.kinetic_energy(&g, 0.5) - e.kinetic_energy(&g, 0.5)).abs() < 1e-12);
    }

    #[test]
    fn harmonic_coherent_center_follows_orbit() {
        let g = grid();
        let hbar = 0.2;
        let p = Propagator::new(&g, hbar, &Potential::Harmonic { omega: 1.0 }).unwrap();
        let e = Ensemble::coherent(&g, hbar, 1.0, 0.5);
        let out = p.evolve(&e, 2.0, 1e-3).unwrap();
        let m = out.moments(&g, hbar);
        let z = harmonic_flow([1.0, 0.5], 1.0, 2.0);
        assert!((m[0] - z[0]).abs() < 1e-5 && (m[1] - z[1]).abs() < 1e-5, "{m:?} vs {z:?}");
        assert!((m[2] - hbar / 2.0).abs() < 1e-5 && (m[3] - hbar / 2.0).abs() < 1e-5);
        assert!((out.purity() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fock_round_trip() {
        let g = WaveGrid::new(0.0, 12.0, 256).unwrap();
        let b = FockBasis::new(0.5, 10).unwrap();
        let r = quantize::toeplitz(&b, &PhaseMeasure::uniform(vec![[0.5, 0.0], [-0.5, 0.3]]));
        let e = Ensemble::from_fock(&g, &b, &r).unwrap();
        let back = e.to_fock(&g, &b);
        assert!(linalg::max_abs(&linalg::sub(&back, &r.matrix)) < 1e-10);
    }

    #[test]
    fn husimi_of_coherent_is_normalized_gaussian() {
        let g = grid();
        let hbar = 0.3;
        let e = Ensemble::coherent(&g, hbar, 0.4, -0.2);
        let pg = PhaseGrid::square([0.4, -0.2], 7.0 * hbar.sqrt(), 96);
        let h = e.husimi(&g, hbar, &pg);
        assert!((h.integral() - 1.0).abs() < 1e-6);
        let (m, c) = h.moments();
        assert!((m[0] - 0.4).abs() < 1e-6 && (m[1] + 0.2).abs() < 1e-6);
        assert!((c[0][0] / hbar - 1.0).abs() < 0.02 && (c[1][1] / hbar - 1.0).abs() < 0.02);
    }

    #[test]
    fn trace_distance_of_pure_states() {
        let g = grid();
        let a = Ensemble::coherent(&g, 0.5, 0.0, 0.0);
        let b = Ensemble::coherent(&g, 0.5, 0.5, 0.0);
        let exact = pure_trace_distance(&a.orbitals[0], &b.orbitals[0]);
        assert!((a.trace_distance(&b) - exact).abs() < 1e-10);
        assert!(a.trace_distance(&a) < 1e-7);
    }

    #[test]
    fn pure_pair_cost_of_coherent_states() {
        let g = grid();
        let hbar = 0.25;
        let a = Ensemble::coherent(&g, hbar, 0.0, 0.0).orbital_moments(&g, hbar)[0];
        let b = Ensemble::coherent(&g, hbar, 1.0, 0.0).orbital_moments(&g, hbar)[0];
        assert!((pure_pair_cost(a, b, 1.0) - (1.0 + 2.0 * hbar)).abs() < 1e-9);
    }
}
