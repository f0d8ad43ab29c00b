//! Mean-field laboratory at small `N`: the Hartree equation on a position grid, the
//! two-particle von Neumann equation for product coherent ensembles, Vlasov particles,
//! and the audit of the first-marginal mean-field bounds.
//!
//! The two-body Hamiltonian is `-hbar^2/2 (D_1 + D_2) + V(x_1 - x_2) / 2`; the Hartree
//! potential is `V * rho` and the Vlasov force `-sum_j w_j grad V(x_i - x_j)`.

use crate::classical_ot;
use crate::densop::{self, DensityOperator};
use crate::dynamics::wave::{Ensemble, Propagator, WaveGrid};
use crate::dynamics::Potential;
use crate::error::{Error, Result};
use crate::fock::{self, FockBasis};
use crate::linalg::{self, CMat, C64};
use crate::qot::audit::husimi_measure;
use crate::qot::{dd_cq, dd_qq, dd_qq_particles, SolverOptions};
use crate::quantize::{PhaseGrid, PhaseMeasure};
use crate::rng::{self, Stream};
use faer::Mat;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;
use std::sync::Arc;

/// `L = 2 (1 + 4 Lip(grad V)^2)`.
pub fn meanfield_rate(lip_grad: f64) -> f64 {
    2.0 * (1.0 + 4.0 * lip_grad * lip_grad)
}

/// Right-hand side `k d hbar e^{L t} + 8 |grad V|_inf / (N - 1) (e^{L t} - 1) / L`, with
/// `k = 2` for the quantum comparison and `k = 1` for the classical one.
pub fn meanfield_bound(k: f64, d: usize, hbar: f64, l: f64, grad_sup: f64, n: usize, t: f64) -> f64 {
    k * d as f64 * hbar * (l * t).exp() + 8.0 * grad_sup / (n as f64 - 1.0) * (l * t).exp_m1() / l
}

/// Husimi variant: `k d hbar (e^{L t} + 1) + 8 |grad V|_inf / (N - 1) (e^{L t} - 1) / L`.
pub fn meanfield_husimi_bound(k: f64, d: usize, hbar: f64, l: f64, grad_sup: f64, n: usize, t: f64) -> f64 {
    k * d as f64 * hbar * ((l * t).exp() + 1.0) + 8.0 * grad_sup / (n as f64 - 1.0) * (l * t).exp_m1() / l
}

/// `V(x_i - x_j) dx`, so that `(K rho)_i` is the convolution `V * rho` at `x_i`.
fn convolution_kernel(grid: &WaveGrid, v: &Potential) -> Mat<f64> {
    let dx = grid.dx();
    Mat::from_fn(grid.len(), grid.len(), |i, j| v.value(grid.xs[i] - grid.xs[j]) * dx)
}

fn convolve(k: &Mat<f64>, rho: &[f64]) -> Vec<f64> {
    (0..k.nrows()).map(|i| (0..k.ncols()).map(|j| k[(i, j)] * rho[j]).sum()).collect()
}

/// Kinetic energy plus `1/2 int int V(x - y) rho(x) rho(y)`.
pub fn hartree_energy(grid: &WaveGrid, hbar: f64, v: &Potential, e: &Ensemble) -> f64 {
    let rho = e.density(grid);
    let vr = convolve(&convolution_kernel(grid, v), &rho);
    e.kinetic_energy(grid, hbar) + 0.5 * rho.iter().zip(&vr).map(|(a, b)| a * b).sum::<f64>() * grid.dx()
}

#[derive(Clone, Debug)]
pub struct HartreeRun {
    pub state: Ensemble,
    pub energy_start: f64,
    pub energy_end: f64,
    /// Largest `dt |V_{n+1} - V_n|_inf / hbar` over the steps: the phase error a stale
    /// potential would carry.
    pub max_potential_update: f64,
    pub trace_defect: f64,
}

impl HartreeRun {
    pub fn energy_drift(&self) -> f64 {
        (self.energy_end - self.energy_start).abs()
    }
}

/// Phase change per step above which the self-consistent potential counts as stale.
pub const POTENTIAL_UPDATE_WARN: f64 = 0.05;

/// Strang splitting of `i hbar dR/dt = [-hbar^2/2 D + V * rho, R]`. The potential
/// step does not change `rho`, so the second half step uses the potential of the
/// density after the kinetic step and the scheme stays explicit.
pub fn hartree_evolve(grid: &WaveGrid, hbar: f64, v: &Potential, e: &Ensemble, t: f64, dt: f64) -> Result<HartreeRun> {
    if !(dt > 0.0) || t < 0.0 {
        return Err(Error::InvalidParameter(format!("need t >= 0 and dt > 0 (got {t}, {dt})")));
    }
    let kernel = convolution_kernel(grid, v);
    let n = (t / dt).ceil() as usize;
    let h = if n == 0 { 0.0 } else { t / n as f64 };
    let energy_start = hartree_energy(grid, hbar, v, e);
    let mut state = e.clone();
    let mut pot = convolve(&kernel, &state.density(grid));
    let mut prop = Propagator::from_samples(grid, hbar, pot.clone())?;
    let mut max_update: f64 = 0.0;
    for _ in 0..n {
        for psi in state.orbitals.iter_mut() {
            prop.potential(psi, 0.5 * h);
            prop.kinetic(psi, h);
        }
        let next = convolve(&kernel, &state.density(grid));
        let upd = next.iter().zip(&pot).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) * h / hbar;
        max_update = max_update.max(upd);
        prop.set_potential(next.clone());
        pot = next;
        for psi in state.orbitals.iter_mut() {
            prop.potential(psi, 0.5 * h);
        }
    }
    if max_update > POTENTIAL_UPDATE_WARN {
        log::warn!("self-consistent potential moves by {max_update:.3} rad per step; reduce dt");
    }
    let energy_end = hartree_energy(grid, hbar, v, &state);
    let trace_defect = (state.trace() - e.trace()).abs();
    Ok(HartreeRun { state, energy_start, energy_end, max_potential_update: max_update, trace_defect })
}

/// How the product ensemble `T[f (x) f]` is represented.
#[derive(Clone, Copy, Debug, Serialize)]
pub enum Sampling {
    /// Every pair of support points with its product weight.
    Exhaustive,
    /// `size` pairs drawn i.i.d. from `f (x) f`, equal weights.
    Sampled { size: usize, seed: u64 },
}

/// Two-particle wavefunction on the tensor grid, row-major in `(x_1, x_2)`, holding
/// `psi(x_i, x_j) dx`.
#[derive(Clone, Debug)]
pub struct PairState {
    pub weight: f64,
    pub psi: Vec<C64>,
}

/// Two-body ensemble `sum_k w_k |Psi_k><Psi_k|` on `grid x grid`.
#[derive(Clone, Debug)]
pub struct TwoBody {
    pub members: Vec<PairState>,
    pub sampling: Sampling,
    m: usize,
}

fn outer_state(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

impl TwoBody {
    /// `T[f] (x) T[f]` as product coherent states.
    pub fn product_coherent(grid: &WaveGrid, hbar: f64, f: &PhaseMeasure, sampling: Sampling) -> Result<Self> {
        let f = f.pruned();
        let single = Ensemble::toeplitz(grid, hbar, &f);
        let members = match sampling {
            Sampling::Exhaustive => f
                .product_pairs()
                .into_iter()
                .map(|(i, j, w)| PairState { weight: w, psi: outer_state(&single.orbitals[i], &single.orbitals[j]) })
                .collect(),
            Sampling::Sampled { size, seed } => {
                if size == 0 {
                    return Err(Error::InvalidParameter("ensemble size must be positive".into()));
                }
                let mut r = rng::stream(seed, Stream::Ensemble);
                let mut draw = || {
                    let u: f64 = r.random();
                    let mut acc = 0.0;
                    for (k, w) in f.weights.iter().enumerate() {
                        acc += w;
                        if u < acc {
                            return k;
                        }
                    }
                    f.len() - 1
                };
                (0..size)
                    .map(|_| {
                        let (i, j) = (draw(), draw());
                        PairState { weight: 1.0 / size as f64, psi: outer_state(&single.orbitals[i], &single.orbitals[j]) }
                    })
                    .collect()
            }
        };
        Ok(TwoBody { members, sampling, m: grid.len() })
    }

    pub fn trace(&self) -> f64 {
        self.members.iter().map(|s| s.weight * linalg::norm(&s.psi).powi(2)).sum()
    }

    /// Coefficients `Phi^T Psi` of each member in the first `n` Hermite functions of
    /// particle 1, as `n x m` matrices.
    fn first_particle_coefficients(&self, phi: &Mat<f64>) -> Vec<CMat> {
        let (m, n) = (self.m, phi.ncols());
        self.members
            .iter()
            .map(|s| Mat::from_fn(n, m, |a, j| (0..m).map(|i| s.psi[i * m + j] * phi[(i, a)]).sum()))
            .collect()
    }

    /// First marginal on the Fock basis, unnormalized.
    pub fn marginal_fock(&self, grid: &WaveGrid, basis: &FockBasis) -> CMat {
        let phi = hermite_matrix(grid, basis);
        let coeffs = self.first_particle_coefficients(&phi);
        let mut r = linalg::zeros(basis.n_modes, basis.n_modes);
        for (c, s) in coeffs.iter().zip(&self.members) {
            linalg::axpy(&mut r, s.weight, &linalg::mul_adj(c, c));
        }
        r
    }

    /// Second marginal on the Fock basis, unnormalized.
    pub fn second_marginal_fock(&self, grid: &WaveGrid, basis: &FockBasis) -> CMat {
        self.swapped().marginal_fock(grid, basis)
    }

    fn swapped(&self) -> TwoBody {
        let m = self.m;
        let members = self
            .members
            .iter()
            .map(|s| PairState { weight: s.weight, psi: (0..m * m).map(|k| s.psi[(k % m) * m + k / m]).collect() })
            .collect();
        TwoBody { members, sampling: self.sampling, m }
    }

    /// The two-body operator on `basis (x) basis`, unnormalized.
    pub fn two_body_fock(&self, grid: &WaveGrid, basis: &FockBasis) -> CMat {
        let phi = hermite_matrix(grid, basis);
        let n = basis.n_modes;
        let m = self.m;
        let mut r = linalg::zeros(n * n, n * n);
        for s in &self.members {
            let half = Mat::from_fn(n, m, |a, j| (0..m).map(|i| s.psi[i * m + j] * phi[(i, a)]).sum::<C64>());
            let v: Vec<C64> = (0..n * n).map(|k| (0..m).map(|j| half[(k / n, j)] * phi[(j, k % n)]).sum()).collect();
            for a in 0..n * n {
                for b in 0..n * n {
                    r[(a, b)] += v[a] * v[b].conj() * s.weight;
                }
            }
        }
        r
    }

    /// Largest entry of the difference between the two one-particle marginals.
    pub fn swap_defect(&self, grid: &WaveGrid, basis: &FockBasis) -> f64 {
        linalg::max_abs(&linalg::sub(&self.marginal_fock(grid, basis), &self.second_marginal_fock(grid, basis)))
    }

    /// Largest standard error of the marginal entries from `batches` equal batches
    /// (zero for exhaustive ensembles).
    pub fn batch_error(&self, grid: &WaveGrid, basis: &FockBasis, batches: usize) -> f64 {
        if matches!(self.sampling, Sampling::Exhaustive) || batches < 2 || self.members.len() < batches {
            return 0.0;
        }
        let per = self.members.len() / batches;
        let ms: Vec<CMat> = (0..batches)
            .map(|b| {
                let mut part = TwoBody { members: self.members[b * per..(b + 1) * per].to_vec(), sampling: self.sampling, m: self.m };
                part.members.iter_mut().for_each(|s| s.weight = 1.0 / per as f64);
                part.marginal_fock(grid, basis)
            })
            .collect();
        let n = basis.n_modes;
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for c in 0..n {
                let vals: Vec<C64> = ms.iter().map(|m| m[(a, c)]).collect();
                let mean: C64 = vals.iter().sum::<C64>() / batches as f64;
                let var = vals.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (batches - 1) as f64;
                worst = worst.max((var / batches as f64).sqrt());
            }
        }
        worst
    }
}

fn hermite_matrix(grid: &WaveGrid, basis: &FockBasis) -> Mat<f64> {
    let phi = fock::hermite_functions(basis.hbar, basis.n_modes, &grid.xs);
    let w = grid.dx().sqrt();
    Mat::from_fn(grid.len(), basis.n_modes, |j, k| phi[k][j] * w)
}

/// Split-step propagator for the two-particle Hamiltonian on `grid x grid`.
pub struct TwoBodyPropagator<'a> {
    grid: &'a WaveGrid,
    hbar: f64,
    interaction: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl<'a> TwoBodyPropagator<'a> {
    pub fn new(grid: &'a WaveGrid, hbar: f64, v: &Potential, n_particles: usize) -> Result<Self> {
        if !(hbar > 0.0) {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {hbar}")));
        }
        let m = grid.len();
        let c = 1.0 / n_particles as f64;
        let interaction = (0..m * m).map(|k| c * v.value(grid.xs[k / m] - grid.xs[k % m])).collect();
        let mut planner = FftPlanner::new();
        Ok(TwoBodyPropagator { grid, hbar, interaction, forward: planner.plan_fft_forward(m), inverse: planner.plan_fft_inverse(m) })
    }

    fn fft2(&self, psi: &mut [C64], fft: &dyn Fft<f64>) {
        let m = self.grid.len();
        for row in psi.chunks_mut(m) {
            fft.process(row);
        }
        let mut col = vec![C64::new(0.0, 0.0); m];
        for j in 0..m {
            for i in 0..m {
                col[i] = psi[i * m + j];
            }
            fft.process(&mut col);
            for i in 0..m {
                psi[i * m + j] = col[i];
            }
        }
    }

    fn kinetic(&self, psi: &mut [C64], dt: f64) {
        let m = self.grid.len();
        let ks = &self.grid.ks;
        self.fft2(psi, &*self.forward);
        let s = 1.0 / (m * m) as f64;
        for (k, c) in psi.iter_mut().enumerate() {
            let (a, b) = (ks[k / m], ks[k % m]);
            *c *= C64::from_polar(s, -0.5 * self.hbar * (a * a + b * b) * dt);
        }
        self.fft2(psi, &*self.inverse);
    }

    fn potential(&self, psi: &mut [C64], dt: f64) {
        for (c, v) in psi.iter_mut().zip(&self.interaction) {
            *c *= C64::from_polar(1.0, -v * dt / self.hbar);
        }
    }

    /// Strang steps of at most `dt` over `[0, t]`.
    pub fn evolve(&self, e: &TwoBody, t: f64, dt: f64) -> Result<TwoBody> {
        if !(dt > 0.0) || t < 0.0 {
            return Err(Error::InvalidParameter(format!("need t >= 0 and dt > 0 (got {t}, {dt})")));
        }
        let n = (t / dt).ceil() as usize;
        let mut out = e.clone();
        if n == 0 {
            return Ok(out);
        }
        let h = t / n as f64;
        for s in out.members.iter_mut() {
            self.potential(&mut s.psi, 0.5 * h);
            for k in 0..n {
                self.kinetic(&mut s.psi, h);
                self.potential(&mut s.psi, if k + 1 == n { 0.5 * h } else { h });
            }
        }
        Ok(out)
    }
}

/// `T[f] (x) T[f]` evolved by the two-particle von Neumann equation.
pub fn nbody_evolve(grid: &WaveGrid, hbar: f64, v: &Potential, f: &PhaseMeasure, sampling: Sampling, t: f64, dt: f64) -> Result<TwoBody> {
    let e = TwoBody::product_coherent(grid, hbar, f, sampling)?;
    TwoBodyPropagator::new(grid, hbar, v, 2)?.evolve(&e, t, dt)
}

/// Weighted particle cloud `sum_i w_i delta_{(x_i, xi_i)}`.
#[derive(Clone, Debug, Serialize)]
pub struct Particles {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Particles {
    pub fn from_measure(f: &PhaseMeasure) -> Self {
        Particles { x: f.points.iter().map(|z| z[0]).collect(), xi: f.points.iter().map(|z| z[1]).collect(), weights: f.weights.clone() }
    }

    pub fn to_measure(&self) -> Result<PhaseMeasure> {
        PhaseMeasure::new(self.x.iter().zip(&self.xi).map(|(&x, &p)| [x, p]).collect(), self.weights.clone())
    }

    pub fn momentum(&self) -> f64 {
        self.weights.iter().zip(&self.xi).map(|(w, p)| w * p).sum()
    }

    pub fn center_of_mass(&self) -> f64 {
        self.weights.iter().zip(&self.x).map(|(w, x)| w * x).sum()
    }

    fn forces(&self, v: &Potential) -> Vec<f64> {
        self.x
            .iter()
            .map(|&xi| -self.x.iter().zip(&self.weights).map(|(&xj, w)| w * v.grad(xi - xj)).sum::<f64>())
            .collect()
    }
}

/// Velocity Verlet for `x'' = -sum_j w_j grad V(x_i - x_j)`. For an atomic initial
/// measure this is the exact Vlasov solution up to the time step.
pub fn vlasov_particles(f: &PhaseMeasure, v: &Potential, t: f64, dt: f64) -> Result<Particles> {
    if !(dt > 0.0) || t < 0.0 {
        return Err(Error::InvalidParameter(format!("need t >= 0 and dt > 0 (got {t}, {dt})")));
    }
    let mut p = Particles::from_measure(f);
    let n = (t / dt).ceil() as usize;
    if n == 0 {
        return Ok(p);
    }
    let h = t / n as f64;
    let mut force = p.forces(v);
    for _ in 0..n {
        for i in 0..p.x.len() {
            p.xi[i] += 0.5 * h * force[i];
            p.x[i] += h * p.xi[i];
        }
        force = p.forces(v);
        for i in 0..p.x.len() {
            p.xi[i] += 0.5 * h * force[i];
        }
    }
    Ok(p)
}

#[derive(Clone, Debug)]
pub struct MeanFieldSetup {
    pub hbar: f64,
    pub interaction: Potential,
    pub f_in: PhaseMeasure,
    pub times: Vec<f64>,
    pub dt: f64,
    pub extent: f64,
    pub points: usize,
    /// Fock modes of the single-particle comparison.
    pub n_modes: usize,
    /// Fock modes per particle for the two-body marginal chain.
    pub chain_modes: usize,
    pub sampling: Sampling,
    pub husimi_cells: usize,
    pub opts: SolverOptions,
}

impl Default for MeanFieldSetup {
    fn default() -> Self {
        MeanFieldSetup {
            hbar: 0.25,
            interaction: Potential::Cosine { v0: 0.2, k: 1.0 },
            f_in: PhaseMeasure::uniform(vec![[-0.5, 0.25], [0.5, -0.25]]),
            times: vec![0.0, 0.5],
            dt: 1e-3,
            extent: 12.0,
            points: 128,
            n_modes: 12,
            chain_modes: 3,
            sampling: Sampling::Exhaustive,
            husimi_cells: 24,
            opts: SolverOptions::with_tol(1e-7),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MeanFieldRow {
    pub time: f64,
    /// `d(R(t), R_2(t)_{:1})^2` and its certified lower value.
    pub qq_value: f64,
    pub qq_dual: f64,
    pub qq_bound: f64,
    /// `d(f(t), R_2(t)_{:1})^2` with the Vlasov solution.
    pub cq_value: f64,
    pub cq_dual: f64,
    pub cq_bound: f64,
    pub husimi_qq_w2_sq: f64,
    pub husimi_qq_bound: f64,
    pub husimi_cq_w2_sq: f64,
    pub husimi_cq_bound: f64,
    /// `W2` discretization allowances: both Husimi densities, and the marginal alone.
    pub husimi_slack: f64,
    pub husimi_cq_slack: f64,
    /// `d(R_{2:1}, S_{2:1})^2` against the certified lower value of `d(R_2, S_2)^2 / 2`
    /// on the small basis, where
    /// `S_2 = R(t) (x) R(t)`.
    pub chain_marginal: f64,
    pub chain_half_joint: f64,
    pub hartree_loss: f64,
    pub marginal_loss: f64,
    pub swap_defect: f64,
    pub ensemble_error: f64,
    pub tolerance: f64,
    pub converged: bool,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeanFieldReport {
    pub rate: f64,
    pub grad_sup: f64,
    pub lip_grad: f64,
    pub rows: Vec<MeanFieldRow>,
    pub hartree_energy_drift: f64,
    pub hartree_trace_defect: f64,
    pub vlasov_momentum_drift: f64,
    pub passed: bool,
}

fn normalized(m: CMat, dims: Vec<usize>) -> Result<(DensityOperator, f64)> {
    let tr = linalg::trace(&m).re;
    if !(tr > 0.0) {
        return Err(Error::Numerical("projected operator has no trace".into()));
    }
    Ok((DensityOperator::unchecked(linalg::scale(&linalg::hermitian_part(&m), 1.0 / tr), dims)?, (1.0 - tr).max(0.0)))
}

/// Evolves Hartree, two-body and Vlasov dynamics from `T[f]`, `T[f (x) f]` and `f`,
/// and compares them at each time with the first-marginal bounds.
pub fn meanfield_bound_audit(s: &MeanFieldSetup) -> Result<MeanFieldReport> {
    if s.times.windows(2).any(|w| w[1] <= w[0]) || s.times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidParameter("times must be nonnegative and increasing".into()));
    }
    if !s.interaction.is_even(s.extent, 1000) {
        return Err(Error::InvalidParameter("interaction must be even".into()));
    }
    let c = s.interaction.constants();
    if !c.grad_sup.is_finite() {
        return Err(Error::InvalidParameter("interaction needs a bounded gradient".into()));
    }
    let rate = meanfield_rate(c.lip_grad);
    let f_in = s.f_in.pruned();
    let grid = WaveGrid::new(0.0, s.extent, s.points)?;
    let basis = FockBasis::new(s.hbar, s.n_modes)?;
    let small = FockBasis::new(s.hbar, s.chain_modes)?;
    let two_prop = TwoBodyPropagator::new(&grid, s.hbar, &s.interaction, 2)?;

    let mut hartree = Ensemble::toeplitz(&grid, s.hbar, &f_in);
    let mut two = TwoBody::product_coherent(&grid, s.hbar, &f_in, s.sampling)?;
    let mut vlasov = Particles::from_measure(&f_in);
    let p0 = vlasov.momentum();
    let e0 = hartree_energy(&grid, s.hbar, &s.interaction, &hartree);
    let mut e_last = e0;
    let mut trace_defect: f64 = 0.0;
    let mut now = 0.0;
    let mut rows = Vec::new();
    for &t in &s.times {
        let step = t - now;
        if step > 0.0 {
            let run = hartree_evolve(&grid, s.hbar, &s.interaction, &hartree, step, s.dt)?;
            trace_defect = trace_defect.max(run.trace_defect);
            e_last = run.energy_end;
            hartree = run.state;
            two = two_prop.evolve(&two, step, s.dt)?;
            vlasov = vlasov_particles(&vlasov.to_measure()?, &s.interaction, step, s.dt)?;
            now = t;
        }
        rows.push(compare(s, &grid, &basis, &small, &hartree, &two, &vlasov, t, rate, c.grad_sup)?);
    }
    let passed = rows.iter().all(|r| r.passed);
    Ok(MeanFieldReport {
        rate,
        grad_sup: c.grad_sup,
        lip_grad: c.lip_grad,
        rows,
        hartree_energy_drift: (e_last - e0).abs(),
        hartree_trace_defect: trace_defect,
        vlasov_momentum_drift: (vlasov.momentum() - p0).abs(),
        passed,
    })
}

#[allow(clippy::too_many_arguments)]
fn compare(
    s: &MeanFieldSetup,
    grid: &WaveGrid,
    basis: &FockBasis,
    small: &FockBasis,
    hartree: &Ensemble,
    two: &TwoBody,
    vlasov: &Particles,
    t: f64,
    rate: f64,
    grad_sup: f64,
) -> Result<MeanFieldRow> {
    let n = basis.n_modes;
    let (rh, hartree_loss) = normalized(hartree.to_fock(grid, basis), vec![n])?;
    let (marg, marginal_loss) = normalized(two.marginal_fock(grid, basis), vec![n])?;
    let swap_defect = two.swap_defect(grid, basis);
    let ensemble_error = two.batch_error(grid, basis, 8);
    let f = vlasov.to_measure()?;

    let qq = dd_qq(basis, &rh, &marg, 1.0, &s.opts)?;
    let cq = dd_cq(basis, &f, &marg, 1.0, &s.opts)?;
    let qq_bound = meanfield_bound(2.0, 1, s.hbar, rate, grad_sup, 2, t);
    let cq_bound = meanfield_bound(1.0, 1, s.hbar, rate, grad_sup, 2, t);

    let half = 4.0 * s.hbar.sqrt() + f.max_radius() + 1.0;
    let pg = PhaseGrid::square([0.0, 0.0], half, s.husimi_cells);
    let (hr, er) = husimi_measure(basis, &rh, &pg)?;
    let (hm, em) = husimi_measure(basis, &marg, &pg)?;
    let (wqq, _) = classical_ot::w2_discrete(&hr, &hm)?;
    let (wcq, _) = classical_ot::w2_discrete(&f, &hm)?;
    let husimi_qq_bound = meanfield_husimi_bound(2.0, 1, s.hbar, rate, grad_sup, 2, t);
    let husimi_cq_bound = meanfield_husimi_bound(1.0, 1, s.hbar, rate, grad_sup, 2, t);

    // marginal chain on the small basis, for the projected and renormalized pair
    let nc = small.n_modes;
    let (r2, _) = normalized(two.two_body_fock(grid, small), vec![nc, nc])?;
    let (rs, _) = normalized(hartree.to_fock(grid, small), vec![nc])?;
    let s2 = densop::tensor(&rs, &rs);
    let joint = dd_qq_particles(small, &r2, &s2, 2, 1.0, &s.opts)?;
    let r21 = DensityOperator::unchecked(densop::ptrace_second(&r2.matrix, nc), vec![nc])?;
    let s21 = DensityOperator::unchecked(densop::ptrace_second(&s2.matrix, nc), vec![nc])?;
    let single = dd_qq(small, &r21, &s21, 1.0, &s.opts)?;

    let tolerance = 10.0 * s.opts.tol * qq.value.abs().max(1.0) + 4.0 * (hartree_loss + marginal_loss) * basis.hbar * n as f64 + ensemble_error;
    let converged = qq.converged && cq.converged && joint.converged && single.converged;
    let lower = |w: f64, e: f64| (w - e).max(0.0).powi(2);
    let passed = converged
        && qq.value <= qq_bound + tolerance
        && cq.value <= cq_bound + tolerance
        && lower(wqq, er + em) <= husimi_qq_bound
        && lower(wcq, em) <= husimi_cq_bound
        && single.value <= 0.5 * joint.dual_value.min(joint.value) + tolerance
        && swap_defect < 1e-10 + ensemble_error;
    Ok(MeanFieldRow {
        time: t,
        qq_value: qq.value,
        qq_dual: qq.dual_value,
        qq_bound,
        cq_value: cq.value,
        cq_dual: cq.dual_value,
        cq_bound,
        husimi_qq_w2_sq: wqq * wqq,
        husimi_qq_bound,
        husimi_cq_w2_sq: wcq * wcq,
        husimi_cq_bound,
        husimi_slack: er + em,
        husimi_cq_slack: em,
        chain_marginal: single.value,
        chain_half_joint: 0.5 * joint.dual_value.min(joint.value),
        hartree_loss,
        marginal_loss,
        swap_defect,
        ensemble_error,
        tolerance,
        converged,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid() -> WaveGrid {
        WaveGrid::new(0.0, 12.0, 64).unwrap()
    }

    #[test]
    fn bound_at_zero_is_floor() {
        let l = meanfield_rate(0.2);
        assert!((l - 2.32).abs() < 1e-12);
        assert_eq!(meanfield_bound(2.0, 1, 0.25, l, 0.2, 2, 0.0), 0.5);
        assert_eq!(meanfield_bound(1.0, 3, 0.1, l, 0.2, 5, 0.0), 0.30000000000000004);
        let want = 0.5 * 1.16f64.exp() + 1.6 * 1.16f64.exp_m1() / 2.32;
        assert!((meanfield_bound(2.0, 1, 0.25, l, 0.2, 2, 0.5) - want).abs() < 1e-14);
        assert!((meanfield_husimi_bound(1.0, 1, 0.25, l, 0.2, 2, 0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hartree_without_interaction_is_free_flow() {
        let g = small_grid();
        let f = PhaseMeasure::uniform(vec![[-0.5, 0.3], [0.5, 0.0]]);
        let e = Ensemble::toeplitz(&g, 0.25, &f);
        let run = hartree_evolve(&g, 0.25, &Potential::Zero, &e, 0.4, 0.01).unwrap();
        let free = Propagator::new(&g, 0.25, &Potential::Zero).unwrap().strang(&e, 0.01, 40);
        for (a, b) in run.state.orbitals.iter().zip(&free.orbitals) {
            let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(d < 1e-12);
        }
        // a constant interaction only adds a global phase
        let run_c = hartree_evolve(&g, 0.25, &Potential::Cosine { v0: 0.7, k: 0.0 }, &e, 0.4, 0.01).unwrap();
        let inner = linalg::dot(&run_c.state.orbitals[0], &free.orbitals[0]).norm();
        assert!((inner - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hartree_conserves_energy() {
        let g = WaveGrid::new(0.0, 12.0, 128).unwrap();
        let f = PhaseMeasure::uniform(vec![[-0.5, 0.25], [0.5, -0.25]]);
        let e = Ensemble::toeplitz(&g, 0.25, &f);
        let run = hartree_evolve(&g, 0.25, &Potential::Cosine { v0: 0.2, k: 1.0 }, &e, 1.0, 1e-3).unwrap();
        assert!(run.energy_drift() < 1e-4, "{}", run.energy_drift());
        assert!(run.trace_defect < 1e-12);
        assert!(run.max_potential_update < POTENTIAL_UPDATE_WARN);
    }

    #[test]
    fn decoupled_particles_give_free_marginal() {
        let g = small_grid();
        let b = FockBasis::new(0.25, 6).unwrap();
        let f = PhaseMeasure::uniform(vec![[-0.5, 0.3], [0.5, 0.0]]);
        let two = nbody_evolve(&g, 0.25, &Potential::Zero, &f, Sampling::Exhaustive, 0.3, 0.01).unwrap();
        let one = Propagator::new(&g, 0.25, &Potential::Zero).unwrap().strang(&Ensemble::toeplitz(&g, 0.25, &f), 0.01, 30);
        let d = linalg::max_abs(&linalg::sub(&two.marginal_fock(&g, &b), &one.to_fock(&g, &b)));
        assert!(d < 1e-12, "{d}");
        assert!((two.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn initial_marginal_is_toeplitz_and_symmetric() {
        let g = small_grid();
        let b = FockBasis::new(0.25, 6).unwrap();
        let f = PhaseMeasure::new(vec![[-0.5, 0.3], [0.5, 0.0], [0.0, -0.4]], vec![0.2, 0.5, 0.3]).unwrap();
        let two = TwoBody::product_coherent(&g, 0.25, &f, Sampling::Exhaustive).unwrap();
        let d = linalg::max_abs(&linalg::sub(&two.marginal_fock(&g, &b), &Ensemble::toeplitz(&g, 0.25, &f).to_fock(&g, &b)));
        assert!(d < 1e-12);
        let later = TwoBodyPropagator::new(&g, 0.25, &Potential::Cosine { v0: 0.5, k: 1.0 }, 2).unwrap().evolve(&two, 0.3, 0.01).unwrap();
        assert!(later.swap_defect(&g, &b) < 1e-10);
        let r2 = later.two_body_fock(&g, &FockBasis::new(0.25, 3).unwrap());
        assert!(linalg::max_abs(&linalg::sub(&r2, &densop::swap_conjugate(&r2, 3))) < 1e-10);
    }

    #[test]
    fn sampled_ensemble_reports_spread() {
        let g = small_grid();
        let b = FockBasis::new(0.25, 4).unwrap();
        let f = PhaseMeasure::uniform(vec![[-0.5, 0.0], [0.5, 0.0]]);
        let two = TwoBody::product_coherent(&g, 0.25, &f, Sampling::Sampled { size: 64, seed: 3 }).unwrap();
        assert!((two.trace() - 1.0).abs() < 1e-12);
        let err = two.batch_error(&g, &b, 8);
        assert!(err > 0.0 && err < 0.2);
    }

    #[test]
    fn vlasov_conserves_momentum() {
        let f = PhaseMeasure::new(vec![[-0.5, 0.3], [0.5, -0.1], [0.1, 0.7]], vec![0.2, 0.5, 0.3]).unwrap();
        let v = Potential::Cosine { v0: 0.8, k: 1.3 };
        let p = vlasov_particles(&f, &v, 1.0, 1e-3).unwrap();
        let p0 = Particles::from_measure(&f).momentum();
        assert!((p.momentum() - p0).abs() < 1e-8);
        // two equal particles at rest: center of mass stays put
        let pair = PhaseMeasure::uniform(vec![[-0.4, 0.0], [0.6, 0.0]]);
        let q = vlasov_particles(&pair, &v, 1.0, 1e-3).unwrap();
        assert!((q.center_of_mass() - 0.1).abs() < 1e-12);
        let free = vlasov_particles(&pair, &Potential::Zero, 1.0, 1e-2).unwrap();
        assert_eq!(free.x, vec![-0.4, 0.6]);
    }
}
