//! Lie–Trotter error against a Strang reference across `hbar`: W2 between Husimi
//! densities (uniform in `hbar`) versus the trace norm (not uniform).

use super::wave::{cell_masses, husimi_window, pure_pair_cost, Ensemble, Propagator, WaveGrid};
use super::Potential;
use crate::classical_ot::w2_grid_linearized;
use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Clone, Debug)]
pub struct SplittingSetup {
    pub potential: Potential,
    /// Center of the coherent initial state `T[delta_z0]`.
    pub z0: [f64; 2],
    pub hbars: Vec<f64>,
    pub dts: Vec<f64>,
    pub t_end: f64,
    pub extent: f64,
    pub points: usize,
    /// Reference step is `min(dts) / ref_divisor`.
    pub ref_divisor: usize,
    pub husimi_cells: usize,
    /// Husimi window half-width in standard deviations.
    pub window_sd: f64,
}

impl Default for SplittingSetup {
    fn default() -> Self {
        SplittingSetup {
            potential: Potential::Cosine { v0: 1.0, k: 1.0 },
            z0: [0.0, 1.0],
            hbars: vec![1.0, 0.3, 0.1, 0.03],
            dts: vec![0.1, 0.05, 0.025],
            t_end: 1.0,
            extent: 16.0,
            points: 2048,
            ref_divisor: 32,
            husimi_cells: 96,
            window_sd: 7.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SplittingErrorRow {
    pub hbar: f64,
    pub dt: f64,
    /// Linearized `W2(H[R^n], H[R(T)])`.
    pub w2: f64,
    pub trace_norm: f64,
    /// `d(R^n, R(T))^2` from the product coupling (both states are pure).
    pub dd_sq: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HbarSummary {
    pub hbar: f64,
    /// Least-squares slope of `log w2` against `log dt`.
    pub slope: f64,
    /// Geometric mean of `w2 / dt`.
    pub constant: f64,
    /// Observed order of the reference from steps `2h, h, h/2`.
    pub reference_order: f64,
    /// Trace distance between the references at `h` and `h/2`.
    pub reference_error: f64,
    /// `2 sqrt(hbar) e^{T (1 + Lip) / 2}`.
    pub floor: f64,
    pub spectral_tail: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SplittingReport {
    pub rows: Vec<SplittingErrorRow>,
    pub summaries: Vec<HbarSummary>,
    pub min_slope: f64,
    /// `max constant / min constant` over `hbar`.
    pub constant_spread: f64,
    /// Trace-norm error at the largest step, in the order of `hbars`.
    pub trace_norm_at_largest_dt: Vec<f64>,
    /// Trace-norm error increases as `hbar` decreases.
    pub trace_norm_grows: bool,
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn steps(t: f64, dt: f64) -> Result<usize> {
    let n = (t / dt).round() as usize;
    if n == 0 || ((n as f64) * dt - t).abs() > 1e-9 * t {
        return Err(Error::InvalidParameter(format!("step {dt} does not divide {t}")));
    }
    Ok(n)
}

pub fn splitting_uniformity_study(s: &SplittingSetup) -> Result<SplittingReport> {
    if s.dts.len() < 2 || s.hbars.is_empty() {
        return Err(Error::InvalidParameter("need at least two steps and one hbar".into()));
    }
    let grid = WaveGrid::new(0.0, s.extent, s.points)?;
    let dt_min = s.dts.iter().copied().fold(f64::INFINITY, f64::min);
    let h_ref = dt_min / s.ref_divisor as f64;
    let n_ref = steps(s.t_end, h_ref)?;
    let lip = s.potential.constants().lip_grad;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &hbar in &s.hbars {
        let p = Propagator::new(&grid, hbar, &s.potential)?;
        let e0 = Ensemble::coherent(&grid, hbar, s.z0[0], s.z0[1]);
        let coarse = p.strang(&e0, 2.0 * h_ref, n_ref / 2);
        let reference = p.strang(&e0, h_ref, n_ref);
        let fine = p.strang(&e0, 0.5 * h_ref, 2 * n_ref);
        let e1 = coarse.trace_distance(&reference);
        let e2 = reference.trace_distance(&fine);
        let spectral_tail = fine.spectral_tail(&grid);
        let mref = reference.orbital_moments(&grid, hbar)[0];
        let mut errs = Vec::new();
        for &dt in &s.dts {
            let lt = p.lie_trotter(&e0, dt, steps(s.t_end, dt)?);
            let mlt = lt.orbital_moments(&grid, hbar)[0];
            let pg = husimi_window(mlt, mref, hbar, s.window_sd, s.husimi_cells);
            let fa = cell_masses(&lt.husimi(&grid, hbar, &pg));
            let fb = cell_masses(&reference.husimi(&grid, hbar, &pg));
            let w2 = w2_grid_linearized(&fa, &fb, pg.q.len(), pg.p.len(), pg.dq(), pg.dp())?.w2;
            let trace_norm = lt.trace_distance(&reference);
            errs.push(w2);
            rows.push(SplittingErrorRow { hbar, dt, w2, trace_norm, dd_sq: pure_pair_cost(mlt, mref, 1.0) });
        }
        let slope = fit_slope(&s.dts, &errs);
        let constant = (errs.iter().zip(&s.dts).map(|(e, d)| (e / d).ln()).sum::<f64>() / errs.len() as f64).exp();
        summaries.push(HbarSummary {
            hbar,
            slope,
            constant,
            reference_order: (e1 / e2).log2(),
            reference_error: e2,
            floor: 2.0 * hbar.sqrt() * (0.5 * s.t_end * (1.0 + lip)).exp(),
            spectral_tail,
        });
    }
    let min_slope = summaries.iter().map(|s| s.slope).fold(f64::INFINITY, f64::min);
    let cmax = summaries.iter().map(|s| s.constant).fold(0.0, f64::max);
    let cmin = summaries.iter().map(|s| s.constant).fold(f64::INFINITY, f64::min);
    let dt_max = s.dts.iter().copied().fold(0.0, f64::max);
    let trace_norm_at_largest_dt: Vec<f64> = s
        .hbars
        .iter()
        .map(|&h| rows.iter().find(|r| r.hbar == h && r.dt == dt_max).map_or(f64::NAN, |r| r.trace_norm))
        .collect();
    let mut order: Vec<(f64, f64)> = s.hbars.iter().copied().zip(trace_norm_at_largest_dt.iter().copied()).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));
    let trace_norm_grows = order.windows(2).all(|w| w[1].1 > w[0].1);
    Ok(SplittingReport { rows, summaries, min_slope, constant_spread: cmax / cmin, trace_norm_at_largest_dt, trace_norm_grows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let xs = [0.1, 0.05, 0.025];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        assert!((fit_slope(&xs, &ys) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn small_study_is_first_order() {
        let s = SplittingSetup { hbars: vec![0.3], points: 512, husimi_cells: 48, ref_divisor: 8, ..Default::default() };
        let rep = splitting_uniformity_study(&s).unwrap();
        assert!(rep.min_slope > 0.8, "{rep:?}");
        assert!(rep.summaries[0].reference_order > 1.8);
    }
}
