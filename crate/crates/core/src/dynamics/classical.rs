//! Hamiltonian flow of weighted particle clouds: Störmer–Verlet reference and the
//! Lie–Trotter splitting `P_dt o K_dt` with `K_t(y, eta) = (y + t eta, eta)` and
//! `P_t(y, eta) = (y, eta - t grad V(y))`.

use super::Potential;
use crate::classical_ot;
use crate::error::{Error, Result};
use crate::quantize::PhaseMeasure;
use serde::Serialize;

/// Weighted particles `(x_i, xi_i)` at a time.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub time: f64,
}

impl FlowState {
    pub fn from_measure(m: &PhaseMeasure) -> Self {
        FlowState { points: m.points.clone(), weights: m.weights.clone(), time: 0.0 }
    }

    pub fn to_measure(&self) -> Result<PhaseMeasure> {
        PhaseMeasure::new(self.points.clone(), self.weights.clone())
    }

    pub fn energy(&self, v: &Potential) -> f64 {
        self.points.iter().zip(&self.weights).map(|(z, w)| w * (0.5 * z[1] * z[1] + v.value(z[0]))).sum()
    }
}

/// Exact free flow `(x + t xi, xi)`.
pub fn free_flow(z: [f64; 2], t: f64) -> [f64; 2] {
    [z[0] + t * z[1], z[1]]
}

/// Exact harmonic flow with frequency `omega`.
pub fn harmonic_flow(z: [f64; 2], omega: f64, t: f64) -> [f64; 2] {
    let (s, c) = (omega * t).sin_cos();
    [z[0] * c + z[1] * s / omega, -z[0] * omega * s + z[1] * c]
}

fn check_step(v: &Potential, dt: f64) -> Result<()> {
    let lip = v.constants().lip_grad;
    if !(dt > 0.0) || dt * lip.sqrt() >= 0.5 {
        return Err(Error::InvalidParameter(format!("Verlet step {dt} violates dt sqrt(Lip) < 0.5 (Lip = {lip})")));
    }
    Ok(())
}

/// One trajectory by velocity Verlet over `[0, t]` with steps of at most `dt`.
pub fn verlet(v: &Potential, z: [f64; 2], t: f64, dt: f64) -> Result<[f64; 2]> {
    check_step(v, dt)?;
    let steps = (t.abs() / dt).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let (mut x, mut p) = (z[0], z[1]);
    let mut g = v.grad(x);
    for _ in 0..steps {
        p -= 0.5 * h * g;
        x += h * p;
        g = v.grad(x);
        p -= 0.5 * h * g;
    }
    if !(x.is_finite() && p.is_finite()) {
        return Err(Error::Numerical(format!("trajectory from ({}, {}) diverged", z[0], z[1])));
    }
    Ok([x, p])
}

/// Samples `X(t)` on `steps + 1` equally spaced times in `[0, t]`.
pub fn verlet_path(v: &Potential, z: [f64; 2], t: f64, steps: usize) -> Result<Vec<[f64; 2]>> {
    let h = t / steps as f64;
    check_step(v, h)?;
    let mut out = Vec::with_capacity(steps + 1);
    let (mut x, mut p) = (z[0], z[1]);
    let mut g = v.grad(x);
    out.push([x, p]);
    for _ in 0..steps {
        p -= 0.5 * h * g;
        x += h * p;
        g = v.grad(x);
        p -= 0.5 * h * g;
        out.push([x, p]);
    }
    Ok(out)
}

/// Pushes every particle forward by `t` with Verlet steps of at most `dt`.
pub fn classical_flow(v: &Potential, state: &FlowState, t: f64, dt: f64) -> Result<FlowState> {
    let points = state.points.iter().map(|&z| verlet(v, z, t, dt)).collect::<Result<Vec<_>>>()?;
    Ok(FlowState { points, weights: state.weights.clone(), time: state.time + t })
}

/// `n_steps` of `P_dt o K_dt`.
pub fn lie_trotter_classical(state: &FlowState, v: &Potential, dt: f64, n_steps: usize) -> FlowState {
    let points = state
        .points
        .iter()
        .map(|&z| {
            let (mut x, mut p) = (z[0], z[1]);
            for _ in 0..n_steps {
                x += dt * p;
                p -= dt * v.grad(x);
            }
            [x, p]
        })
        .collect();
    FlowState { points, weights: state.weights.clone(), time: state.time + dt * n_steps as f64 }
}

#[derive(Clone, Debug, Serialize)]
pub struct SplittingRow {
    pub dt: f64,
    pub w2: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassicalSplittingReport {
    pub rows: Vec<SplittingRow>,
    /// `w2(dt) / w2(dt / 2)` for consecutive rows.
    pub halving_ratios: Vec<f64>,
    pub reference_dt: f64,
}

/// W2 distance at time `t_end` between the Lie–Trotter cloud and a fine Verlet cloud,
/// for each step in `dts` (each must divide `t_end`).
pub fn classical_splitting_study(f_in: &FlowState, v: &Potential, dts: &[f64], t_end: f64, reference_dt: f64) -> Result<ClassicalSplittingReport> {
    let reference = classical_flow(v, f_in, t_end, reference_dt)?.to_measure()?;
    let mut rows = Vec::new();
    for &dt in dts {
        let n = (t_end / dt).round() as usize;
        if ((n as f64) * dt - t_end).abs() > 1e-9 * t_end {
            return Err(Error::InvalidParameter(format!("step {dt} does not divide {t_end}")));
        }
        let lt = lie_trotter_classical(f_in, v, dt, n).to_measure()?;
        let (w2, _) = classical_ot::w2_discrete(&lt, &reference)?;
        rows.push(SplittingRow { dt, w2 });
    }
    let halving_ratios = rows.windows(2).map(|w| w[0].w2 / w[1].w2).collect();
    Ok(ClassicalSplittingReport { rows, halving_ratios, reference_dt })
}

/// Gronwall bound for two trajectories in potentials `V` and `W` (mass 1, `L = Lip(grad V)`):
/// `|dz(t)|^2 <= |dz(0)|^2 e^{(1+L)t} + M (e^{(1+L)t} - 1) / (1+L) sup|grad(V - W)|`,
/// `M = 2 sqrt(xi^2 + 2V(x) + 2 sup|V|) + 2 sqrt(eta^2 + 2W(y) + 2 sup|W|)` at time 0.
/// Returns the largest `lhs / rhs` over the sampled times.
pub fn pair_dispersion_ratio(
    v: &Potential,
    w: &Potential,
    z1: [f64; 2],
    z2: [f64; 2],
    t: f64,
    steps: usize,
    sup_v: f64,
    sup_w: f64,
    grad_gap: f64,
) -> Result<f64> {
    let a = verlet_path(v, z1, t, steps)?;
    let b = verlet_path(w, z2, t, steps)?;
    let rate = 1.0 + v.constants().lip_grad;
    let big_m = 2.0 * (z1[1] * z1[1] + 2.0 * v.value(z1[0]) + 2.0 * sup_v).max(0.0).sqrt()
        + 2.0 * (z2[1] * z2[1] + 2.0 * w.value(z2[0]) + 2.0 * sup_w).max(0.0).sqrt();
    let d0 = (z1[0] - z2[0]).powi(2) + (z1[1] - z2[1]).powi(2);
    let mut worst = 0.0f64;
    for k in 0..=steps {
        let s = t * k as f64 / steps as f64;
        let lhs = (a[k][0] - b[k][0]).powi(2) + (a[k][1] - b[k][1]).powi(2);
        let g = (rate * s).exp();
        let rhs = d0 * g + big_m * (g - 1.0) / rate * grad_gap;
        worst = worst.max(lhs / rhs.max(1e-300));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn harmonic_orbit_closes() {
        let v = Potential::Harmonic { omega: 1.0 };
        let z = verlet(&v, [1.0, 0.0], 2.0 * PI, 1e-3).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-5 && z[1].abs() < 1e-5);
        let e = harmonic_flow([1.0, 0.0], 1.0, 2.0 * PI);
        assert!((e[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn free_flow_is_exact() {
        let s = FlowState::from_measure(&PhaseMeasure::uniform(vec![[0.1, 0.5], [-0.3, -1.0]]));
        let out = lie_trotter_classical(&s, &Potential::Zero, 0.1, 10);
        for (z, w) in out.points.iter().zip(&s.points) {
            let e = free_flow(*w, 1.0);
            assert!((z[0] - e[0]).abs() < 1e-14 && (z[1] - e[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn verlet_conserves_energy() {
        let v = Potential::Cosine { v0: 1.0, k: 1.0 };
        let s = FlowState::from_measure(&PhaseMeasure::uniform(vec![[0.2, 0.7], [1.0, -0.4]]));
        let e0 = s.energy(&v);
        let out = classical_flow(&v, &s, 1.0, 1e-3).unwrap();
        assert!((out.energy(&v) - e0).abs() < 1e-6);
    }

    #[test]
    fn unstable_step_rejected() {
        let v = Potential::Harmonic { omega: 10.0 };
        assert!(verlet(&v, [1.0, 0.0], 1.0, 0.1).is_err());
    }

    #[test]
    fn dispersion_bound_holds() {
        let v = Potential::Cosine { v0: 1.0, k: 1.0 };
        let r = pair_dispersion_ratio(&v, &v, [0.0, 1.0], [0.1, 0.9], 2.0, 2000, 1.0, 1.0, 0.0).unwrap();
        assert!(r <= 1.0);
        let w = Potential::Cosine { v0: 0.8, k: 1.0 };
        let r = pair_dispersion_ratio(&v, &w, [0.0, 1.0], [0.0, 1.0], 2.0, 2000, 1.0, 0.8, 0.2).unwrap();
        assert!(r <= 1.0 && r > 0.0);
    }
}
