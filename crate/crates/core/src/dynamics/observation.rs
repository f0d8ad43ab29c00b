//! Observation constants of the classical flow and the quantum observation inequality
//! `int_0^T trace(1_{Omega_delta} R(t)) dt >= C[K, Omega, T] - (1/delta) inf_lambda (...)`.

use super::classical::verlet_path;
use super::wave::{Ensemble, Propagator, WaveGrid};
use super::{propagation_rate, Potential};
use crate::error::{Error, Result};
use serde::Serialize;

/// Open set on the line as a union of open intervals.
#[derive(Clone, Debug, Serialize)]
pub struct OpenSet {
    pub intervals: Vec<(f64, f64)>,
}

impl OpenSet {
    pub fn interval(a: f64, b: f64) -> Self {
        OpenSet { intervals: vec![(a, b)] }
    }

    pub fn whole_line() -> Self {
        Self::interval(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a < x && x < b)
    }

    /// `Omega + B(0, delta)`.
    pub fn widened(&self, delta: f64) -> Self {
        OpenSet { intervals: self.intervals.iter().map(|&(a, b)| (a - delta, b + delta)).collect() }
    }
}

/// Closed phase-space rectangle `[x0, x1] x [xi0, xi1]`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Rectangle {
    pub x: (f64, f64),
    pub xi: (f64, f64),
}

impl Rectangle {
    pub fn contains(&self, z: [f64; 2]) -> bool {
        self.x.0 <= z[0] && z[0] <= self.x.1 && self.xi.0 <= z[1] && z[1] <= self.xi.1
    }

    fn samples(&self, m: usize) -> Vec<[f64; 2]> {
        let at = |(a, b): (f64, f64), i: usize| if m == 1 { 0.5 * (a + b) } else { a + (b - a) * i as f64 / (m - 1) as f64 };
        (0..m * m).map(|k| [at(self.x, k / m), at(self.xi, k % m)]).collect()
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ObservationConstant {
    /// Minimum over the `m x m` samples of `K` of the time spent in `Omega`.
    pub value: f64,
    /// `|C(m) - C(2m - 1)|` with halved time step.
    pub refinement_delta: f64,
    pub argmin: [f64; 2],
    /// Zero means the geometric condition fails on the sampled `K`.
    pub condition_holds: bool,
}

fn time_in(v: &Potential, z: [f64; 2], omega: &OpenSet, t: f64, steps: usize) -> Result<f64> {
    let path = verlet_path(v, z, t, steps)?;
    let h = t / steps as f64;
    let ind: Vec<f64> = path.iter().map(|p| if omega.contains(p[0]) { 1.0 } else { 0.0 }).collect();
    Ok(ind.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum())
}

fn constant_at(v: &Potential, k: &Rectangle, omega: &OpenSet, t: f64, m: usize, steps: usize) -> Result<(f64, [f64; 2])> {
    let mut best = (f64::INFINITY, [0.0; 2]);
    for z in k.samples(m) {
        let c = time_in(v, z, omega, t, steps)?;
        if c < best.0 {
            best = (c, z);
        }
    }
    Ok(best)
}

/// `C[K, Omega, T] = inf_K int_0^T 1_Omega(X(t; x, xi)) dt` on an `m x m` sample of `K`
/// with Verlet substeps `dt_obs`.
pub fn observation_constant(k: &Rectangle, omega: &OpenSet, t: f64, v: &Potential, m: usize, dt_obs: f64) -> Result<ObservationConstant> {
    if !(t > 0.0) || m < 2 {
        return Err(Error::InvalidParameter(format!("need T > 0 and at least 2 samples per side (got {t}, {m})")));
    }
    let steps = (t / dt_obs).ceil() as usize;
    let (value, argmin) = constant_at(v, k, omega, t, m, steps)?;
    let (fine, _) = constant_at(v, k, omega, t, 2 * m - 1, 2 * steps)?;
    let condition_holds = value > 0.0;
    if !condition_holds {
        log::warn!("geometric condition fails: the trajectory from {argmin:?} never enters the set");
    }
    Ok(ObservationConstant { value, refinement_delta: (value - fine).abs(), argmin, condition_holds })
}

#[derive(Clone, Debug)]
pub struct ObservationSetup {
    pub k: Rectangle,
    pub omega: OpenSet,
    pub delta: f64,
    pub horizon: f64,
    pub hbar: f64,
    /// Center of the coherent initial state `T[delta_z0]`; must lie in `K`.
    pub z0: [f64; 2],
    pub potential: Potential,
    pub k_samples: usize,
    pub dt_obs: f64,
    pub snapshots: usize,
    pub dt_ref: f64,
    pub extent: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ObservationReport {
    pub constant: ObservationConstant,
    /// `int_0^T trace(1_{Omega_delta} R(t)) dt` by the trapezoid rule.
    pub lhs: f64,
    /// `C - (1/delta) min_lambda (1/lambda) (e^{T L} - 1)/L sqrt((lambda^2 + 1) hbar / 2)`.
    pub rhs: f64,
    pub best_lambda: f64,
    /// Subtracted term at the best `lambda`.
    pub penalty: f64,
    pub vacuous: bool,
    pub passed: bool,
    /// Husimi mass of the initial state in `K`.
    pub husimi_mass_in_k: f64,
    /// `Sigma^2 = Var x + Var p`.
    pub sigma_sq: f64,
    /// `d(H[psi], |psi><psi|)^2 = 2 Sigma^2 + hbar`.
    pub pure_dd_sq: f64,
    /// `4 (e^{(1 + Lip) T/2} - 1) / (1 + Lip)`.
    pub d_const: f64,
    /// `C * mass - D Sigma / delta`.
    pub pure_rhs: f64,
}

/// `(1/lambda) (e^{T L} - 1) / L * d` with `L = (lambda + Lip/lambda)/2`.
pub fn observation_penalty(lambda: f64, lip: f64, t: f64, dd: f64) -> f64 {
    let l = propagation_rate(lambda, lip);
    (t * l).exp_m1() / l / lambda * dd
}

/// Minimizes the penalty with `d_lambda = sqrt((lambda^2 + 1) hbar / 2)` over a log grid
/// refined by golden-section search.
pub fn best_penalty(lip: f64, t: f64, hbar: f64) -> (f64, f64) {
    let f = |lam: f64| observation_penalty(lam, lip, t, (0.5 * (lam * lam + 1.0) * hbar).sqrt());
    let mut best = (f64::INFINITY, 1.0);
    for i in 0..=400 {
        let lam = 10f64.powf(-3.0 + 6.0 * i as f64 / 400.0);
        let v = f(lam);
        if v < best.0 {
            best = (v, lam);
        }
    }
    let r = 10f64.powf(6.0 / 400.0);
    let (mut a, mut b) = ((best.1 / r).ln(), (best.1 * r).ln());
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c.exp()) < f(d.exp()) {
            b = d;
        } else {
            a = c;
        }
    }
    let lam = (0.5 * (a + b)).exp();
    let v = f(lam);
    if v < best.0 {
        (v, lam)
    } else {
        best
    }
}

pub fn observation_audit(s: &ObservationSetup) -> Result<ObservationReport> {
    if !(s.delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {}", s.delta)));
    }
    if !s.k.contains(s.z0) {
        return Err(Error::InvalidParameter(format!("initial center {:?} lies outside K", s.z0)));
    }
    if s.snapshots < 200 {
        return Err(Error::InvalidParameter("time quadrature needs at least 200 intervals".into()));
    }
    let constant = observation_constant(&s.k, &s.omega, s.horizon, &s.potential, s.k_samples, s.dt_obs)?;
    let lip = s.potential.constants().lip_grad;
    let (penalty, best_lambda) = best_penalty(lip, s.horizon, s.hbar);
    let rhs = constant.value - penalty / s.delta;

    let grid = WaveGrid::new(s.z0[0], s.extent, s.points)?;
    let prop = Propagator::new(&grid, s.hbar, &s.potential)?;
    let wide = s.omega.widened(s.delta);
    let h = s.horizon / s.snapshots as f64;
    let mut state = Ensemble::coherent(&grid, s.hbar, s.z0[0], s.z0[1]);
    let m0 = state.moments(&grid, s.hbar);
    let mut prev = state.indicator_trace(&grid, |x| wide.contains(x));
    let mut lhs = 0.0;
    for _ in 0..s.snapshots {
        state = prop.evolve(&state, h, s.dt_ref)?;
        let cur = state.indicator_trace(&grid, |x| wide.contains(x));
        lhs += 0.5 * h * (prev + cur);
        prev = cur;
    }
    let tol = 1e-9 * s.horizon;
    let husimi_mass_in_k = coherent_mass_in(&s.k, s.z0, s.hbar);
    let sigma_sq = m0[2] + m0[3];
    let d_const = 4.0 * (0.5 * (1.0 + lip) * s.horizon).exp_m1() / (1.0 + lip);
    Ok(ObservationReport {
        constant,
        lhs,
        rhs,
        best_lambda,
        penalty: penalty / s.delta,
        vacuous: rhs <= 0.0,
        passed: lhs >= rhs - tol,
        husimi_mass_in_k,
        sigma_sq,
        pure_dd_sq: 2.0 * sigma_sq + s.hbar,
        d_const,
        pure_rhs: constant.value * husimi_mass_in_k - d_const * sigma_sq.sqrt() / s.delta,
    })
}

/// Husimi mass of the coherent state at `z0` in a rectangle: a product of two normal
/// probabilities with variance `hbar` per axis.
fn coherent_mass_in(k: &Rectangle, z0: [f64; 2], hbar: f64) -> f64 {
    let s = (2.0 * hbar).sqrt();
    let p = |(a, b): (f64, f64), c: f64| 0.5 * (libm::erf((b - c) / s) - libm::erf((a - c) / s));
    p(k.x, z0[0]) * p(k.xi, z0[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> Rectangle {
        Rectangle { x: (-0.5, 0.5), xi: (0.0, 1.0) }
    }

    #[test]
    fn whole_line_gives_horizon() {
        let c = observation_constant(&k(), &OpenSet::whole_line(), 1.0, &Potential::Zero, 8, 1e-3).unwrap();
        assert!((c.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn failing_set_gives_zero() {
        let c = observation_constant(&k(), &OpenSet::interval(0.6, 2.0), 1.0, &Potential::Zero, 16, 1e-3).unwrap();
        assert_eq!(c.value, 0.0);
        assert!(!c.condition_holds);
    }

    #[test]
    fn free_flow_constant_is_exit_time() {
        // slowest exit from (-0.6, 0.8): the corner (0.5, 1) leaves at t = 0.3
        let c = observation_constant(&k(), &OpenSet::interval(-0.6, 0.8), 1.0, &Potential::Zero, 16, 1e-4).unwrap();
        assert!((c.value - 0.3).abs() < 1e-3, "{c:?}");
    }

    #[test]
    fn coherent_mass_matches_normal_tails() {
        let m = coherent_mass_in(&Rectangle { x: (-1.0, 1.0), xi: (-1e9, 1e9) }, [0.0, 0.0], 0.5);
        assert!((m - 0.842_700_792_949_715).abs() < 1e-12);
    }

    #[test]
    fn penalty_minimum_beats_endpoints() {
        let (v, lam) = best_penalty(0.0, 0.1, 0.05);
        assert!(v < observation_penalty(1.0, 0.0, 0.1, 0.05f64.sqrt()));
        assert!(lam > 1.0 && v.is_finite());
    }
}
