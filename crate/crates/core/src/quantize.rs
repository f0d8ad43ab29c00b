//! Phase-space measures and the maps between them and operators: Toeplitz
//! quantization, Husimi and Wigner transforms, heat smoothing on phase grids.

use crate::densop::DensityOperator;
use crate::error::{Error, Result};
use crate::fock::{self, FockBasis};
use crate::linalg::{self, CMat, C64, ZERO};
use faer::Mat;
use rustfft::FftPlanner;
use serde::Serialize;
use std::f64::consts::PI;

/// Weighted point cloud on phase space (d = 1, points are `(q, p)`).
#[derive(Clone, Debug, Serialize)]
pub struct PhaseMeasure {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// Cell sides `(dq, dp)` when the measure discretizes a density on a grid.
    pub cell: Option<(f64, f64)>,
}

impl PhaseMeasure {
    /// Builds a probability measure; weights must be nonnegative and sum to 1 within 1e-12.
    pub fn new(points: Vec<[f64; 2]>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() || points.is_empty() {
            return Err(Error::DimensionMismatch("one weight per support point required".into()));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("weights must be finite and nonnegative".into()));
        }
        if points.iter().any(|z| !z[0].is_finite() || !z[1].is_finite()) {
            return Err(Error::InvalidParameter("support points must be finite".into()));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::Unbalanced { source_mass: s, target_mass: 1.0 });
        }
        Ok(PhaseMeasure { points, weights, cell: None })
    }

    /// Normalizes arbitrary nonnegative weights to a probability measure.
    pub fn normalized(points: Vec<[f64; 2]>, weights: Vec<f64>) -> Result<Self> {
        let s: f64 = weights.iter().sum();
        if !(s > 0.0) {
            return Err(Error::InvalidParameter("total weight must be positive".into()));
        }
        Self::new(points, weights.iter().map(|w| w / s).collect())
    }

    pub fn dirac(q: f64, p: f64) -> Self {
        PhaseMeasure { points: vec![[q, p]], weights: vec![1.0], cell: None }
    }

    pub fn uniform(points: Vec<[f64; 2]>) -> Self {
        let w = 1.0 / points.len() as f64;
        let weights = vec![w; points.len()];
        PhaseMeasure { points, weights, cell: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Copy without zero-weight points.
    pub fn pruned(&self) -> Self {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.weights[i] > 0.0).collect();
        PhaseMeasure {
            points: keep.iter().map(|&i| self.points[i]).collect(),
            weights: keep.iter().map(|&i| self.weights[i]).collect(),
            cell: self.cell,
        }
    }

    /// Drops points with weight below `thresh` and renormalizes.
    pub fn pruned_below(&self, thresh: f64) -> Self {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.weights[i] >= thresh).collect();
        let total: f64 = keep.iter().map(|&i| self.weights[i]).sum();
        PhaseMeasure {
            points: keep.iter().map(|&i| self.points[i]).collect(),
            weights: keep.iter().map(|&i| self.weights[i] / total).collect(),
            cell: self.cell,
        }
    }

    pub fn second_moment(&self) -> f64 {
        self.points.iter().zip(&self.weights).map(|(z, w)| w * (z[0] * z[0] + z[1] * z[1])).sum()
    }

    pub fn mean(&self) -> [f64; 2] {
        let mut m = [0.0; 2];
        for (z, w) in self.points.iter().zip(&self.weights) {
            m[0] += w * z[0];
            m[1] += w * z[1];
        }
        m
    }

    pub fn max_radius(&self) -> f64 {
        self.points.iter().map(|z| z[0].hypot(z[1])).fold(0.0, f64::max)
    }

    /// Product measure on `(R^2)^2`, as pairs of support indices with weights.
    pub fn product_pairs(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.len() * self.len());
        for i in 0..self.len() {
            for j in 0..self.len() {
                out.push((i, j, self.weights[i] * self.weights[j]));
            }
        }
        out
    }
}

/// Uniform tensor grid on phase space.
#[derive(Clone, Debug, Serialize)]
pub struct PhaseGrid {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhaseGrid {
    /// `nq x np` cell-centered points on `[q0, q1] x [p0, p1]`.
    pub fn new(q_range: (f64, f64), p_range: (f64, f64), nq: usize, np: usize) -> Self {
        let centers = |(a, b): (f64, f64), m: usize| -> Vec<f64> {
            let h = (b - a) / m as f64;
            (0..m).map(|i| a + (i as f64 + 0.5) * h).collect()
        };
        PhaseGrid { q: centers(q_range, nq), p: centers(p_range, np) }
    }

    /// Square grid centered at `c` with half-width `half`.
    pub fn square(center: [f64; 2], half: f64, m: usize) -> Self {
        Self::new((center[0] - half, center[0] + half), (center[1] - half, center[1] + half), m, m)
    }

    /// Default window `+-(3 + max|z_i|) sqrt(hbar n)` with 128 points per axis.
    pub fn default_for(basis: &FockBasis, centers: &[[f64; 2]]) -> Self {
        let r = centers.iter().map(|z| z[0].hypot(z[1])).fold(0.0, f64::max);
        let half = (3.0 + r) * (basis.hbar * basis.n_modes as f64).sqrt();
        Self::square([0.0, 0.0], half, 128)
    }

    pub fn dq(&self) -> f64 {
        spacing(&self.q)
    }

    pub fn dp(&self) -> f64 {
        spacing(&self.p)
    }

    pub fn cell_area(&self) -> f64 {
        self.dq() * self.dp()
    }

    pub fn len(&self) -> usize {
        self.q.len() * self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Point with flat index `i * np + j`.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let np = self.p.len();
        [self.q[idx / np], self.p[idx % np]]
    }
}

fn spacing(v: &[f64]) -> f64 {
    if v.len() < 2 {
        1.0
    } else {
        v[1] - v[0]
    }
}

/// Real function sampled on a [`PhaseGrid`], row-major in `q`.
#[derive(Clone, Debug, Serialize)]
pub struct PhaseFunction {
    pub grid: PhaseGrid,
    pub values: Vec<f64>,
}

impl PhaseFunction {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.p.len() + j]
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Mean and covariance `[[qq, qp], [qp, pp]]` of the (normalized) density.
    pub fn moments(&self) -> ([f64; 2], [[f64; 2]; 2]) {
        let total: f64 = self.values.iter().sum();
        let mut m = [0.0; 2];
        for (k, v) in self.values.iter().enumerate() {
            let z = self.grid.point(k);
            m[0] += v * z[0];
            m[1] += v * z[1];
        }
        m[0] /= total;
        m[1] /= total;
        let mut c = [[0.0; 2]; 2];
        for (k, v) in self.values.iter().enumerate() {
            let z = self.grid.point(k);
            let d = [z[0] - m[0], z[1] - m[1]];
            for a in 0..2 {
                for b in 0..2 {
                    c[a][b] += v * d[a] * d[b];
                }
            }
        }
        for row in &mut c {
            for x in row.iter_mut() {
                *x /= total;
            }
        }
        (m, c)
    }

    /// Grid density as a discrete probability measure (negative values clipped).
    pub fn to_measure(&self) -> Result<PhaseMeasure> {
        let w: Vec<f64> = self.values.iter().map(|v| v.max(0.0)).collect();
        let pts = (0..self.grid.len()).map(|k| self.grid.point(k)).collect();
        let mut m = PhaseMeasure::normalized(pts, w)?;
        m.cell = Some((self.grid.dq(), self.grid.dp()));
        Ok(m)
    }

    /// Sum of `f * g` times the cell area.
    pub fn pair(&self, g: impl Fn(f64, f64) -> f64) -> f64 {
        let mut s = 0.0;
        for (k, v) in self.values.iter().enumerate() {
            let z = self.grid.point(k);
            s += v * g(z[0], z[1]);
        }
        s * self.grid.cell_area()
    }

    /// `(q, p, value)` rows.
    pub fn csv_rows(&self) -> Vec<(f64, f64, f64)> {
        (0..self.grid.len())
            .map(|k| {
                let z = self.grid.point(k);
                (z[0], z[1], self.values[k])
            })
            .collect()
    }

    /// Applies `exp(t Laplacian)` via FFT with zero padding of at least four standard
    /// deviations `sqrt(2t)` on each side.
    pub fn heat_smoothed(&self, t: f64) -> PhaseFunction {
        if t <= 0.0 {
            return self.clone();
        }
        let (nq, np) = (self.grid.q.len(), self.grid.p.len());
        let sd = (2.0 * t).sqrt();
        let padq = (4.0 * sd / self.grid.dq()).ceil() as usize;
        let padp = (4.0 * sd / self.grid.dp()).ceil() as usize;
        let mq = (nq + 2 * padq).next_power_of_two();
        let mp = (np + 2 * padp).next_power_of_two();
        let mut buf = vec![ZERO; mq * mp];
        for i in 0..nq {
            for j in 0..np {
                buf[i * mp + j] = linalg::re(self.at(i, j));
            }
        }
        let mut planner = FftPlanner::new();
        fft2(&mut buf, mq, mp, &mut planner, false);
        let kq = wavenumbers(mq, self.grid.dq());
        let kp = wavenumbers(mp, self.grid.dp());
        for i in 0..mq {
            for j in 0..mp {
                buf[i * mp + j] *= (-t * (kq[i] * kq[i] + kp[j] * kp[j])).exp();
            }
        }
        fft2(&mut buf, mq, mp, &mut planner, true);
        let norm = 1.0 / (mq * mp) as f64;
        let mut values = Vec::with_capacity(nq * np);
        for i in 0..nq {
            for j in 0..np {
                values.push(buf[i * mp + j].re * norm);
            }
        }
        PhaseFunction { grid: self.grid.clone(), values }
    }
}

/// Angular wavenumbers of an `m`-point FFT with spacing `h`.
pub fn wavenumbers(m: usize, h: f64) -> Vec<f64> {
    (0..m)
        .map(|k| {
            let kk = if k <= m / 2 { k as f64 } else { k as f64 - m as f64 };
            2.0 * PI * kk / (m as f64 * h)
        })
        .collect()
}

fn fft2(buf: &mut [C64], rows: usize, cols: usize, planner: &mut FftPlanner<f64>, inverse: bool) {
    let frow = if inverse { planner.plan_fft_inverse(cols) } else { planner.plan_fft_forward(cols) };
    for r in 0..rows {
        frow.process(&mut buf[r * cols..(r + 1) * cols]);
    }
    let fcol = if inverse { planner.plan_fft_inverse(rows) } else { planner.plan_fft_forward(rows) };
    let mut col = vec![ZERO; rows];
    for c in 0..cols {
        for r in 0..rows {
            col[r] = buf[r * cols + c];
        }
        fcol.process(&mut col);
        for r in 0..rows {
            buf[r * cols + c] = col[r];
        }
    }
}

/// Largest coherent truncation deficit over the support of `m`.
pub fn max_truncation_deficit(basis: &FockBasis, m: &PhaseMeasure) -> f64 {
    m.points
        .iter()
        .map(|z| fock::coherent_vector_quiet(basis, z[0], z[1]).truncation_deficit)
        .fold(0.0, f64::max)
}

/// Toeplitz operator `sum_i f_i |z_i><z_i|`, renormalized to unit trace (the
/// renormalization only absorbs the truncation deficit).
pub fn toeplitz(basis: &FockBasis, m: &PhaseMeasure) -> DensityOperator {
    let n = basis.n_modes;
    let mut t = linalg::zeros(n, n);
    for (z, &w) in m.points.iter().zip(&m.weights) {
        if w == 0.0 {
            continue;
        }
        let c = fock::coherent_vector(basis, z[0], z[1]);
        linalg::axpy(&mut t, w, &linalg::outer(&c.coeffs, &c.coeffs));
    }
    let tr = linalg::trace(&t).re;
    DensityOperator { matrix: linalg::scale(&t, 1.0 / tr), dims: vec![n], trace_tol: 1e-9 }
}

/// `int a(z) |z><z| dz` for a density `a` sampled on a grid (no normalization).
pub fn toeplitz_density(basis: &FockBasis, a: &PhaseFunction) -> CMat {
    let n = basis.n_modes;
    let mut t = linalg::zeros(n, n);
    let da = a.grid.cell_area();
    for k in 0..a.grid.len() {
        let v = a.values[k];
        if v == 0.0 {
            continue;
        }
        let z = a.grid.point(k);
        let c = fock::coherent_vector_quiet(basis, z[0], z[1]);
        linalg::axpy(&mut t, v * da, &linalg::outer(&c.coeffs, &c.coeffs));
    }
    t
}

/// Husimi transform `<q,p|R|q,p> / (2 pi hbar)` on a grid.
pub fn husimi(basis: &FockBasis, r: &CMat, grid: &PhaseGrid) -> PhaseFunction {
    let norm = 1.0 / (2.0 * PI * basis.hbar);
    let values = (0..grid.len())
        .map(|k| {
            let z = grid.point(k);
            let c = fock::coherent_vector_quiet(basis, z[0], z[1]);
            linalg::expectation(r, &c.coeffs) * norm
        })
        .collect();
    PhaseFunction { grid: grid.clone(), values }
}

/// Husimi density at one point.
pub fn husimi_at(basis: &FockBasis, r: &CMat, q: f64, p: f64) -> f64 {
    let c = fock::coherent_vector_quiet(basis, q, p);
    linalg::expectation(r, &c.coeffs) / (2.0 * PI * basis.hbar)
}

/// Wigner transform `(2 pi)^{-1} int r(x + hbar y/2, x - hbar y/2) e^{-i xi y} dy`,
/// evaluated by direct Hermite evaluation of the kernel and a direct Fourier sum.
pub fn wigner(basis: &FockBasis, r: &CMat, grid: &PhaseGrid) -> PhaseFunction {
    let hbar = basis.hbar;
    let n = basis.n_modes;
    let x_turn = (2.0 * hbar * n as f64).sqrt() + 6.0 * hbar.sqrt();
    let p_max = x_turn + grid.p.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let y_half = 2.0 * x_turn / hbar;
    let dy = PI / (1.5 * p_max);
    let ny = (2.0 * y_half / dy).ceil() as usize + 1;
    let ys: Vec<f64> = (0..ny).map(|s| -y_half + s as f64 * dy).collect();
    let np = grid.p.len();
    let mut values = vec![0.0; grid.len()];
    // phases e^{-i xi y} for every (xi, y)
    let phases: Vec<Vec<C64>> = grid
        .p
        .iter()
        .map(|&xi| ys.iter().map(|&y| C64::from_polar(1.0, -xi * y)).collect())
        .collect();
    for (i, &x) in grid.q.iter().enumerate() {
        let plus: Vec<f64> = ys.iter().map(|&y| x + 0.5 * hbar * y).collect();
        let minus: Vec<f64> = ys.iter().map(|&y| x - 0.5 * hbar * y).collect();
        let fp = fock::hermite_functions(hbar, n, &plus);
        let fm = fock::hermite_functions(hbar, n, &minus);
        let kernel: Vec<C64> = (0..ny)
            .map(|s| {
                let mut acc = ZERO;
                for l in 0..n {
                    let b = fm[l][s];
                    if b == 0.0 {
                        continue;
                    }
                    let mut col = ZERO;
                    for k in 0..n {
                        col += r[(k, l)] * fp[k][s];
                    }
                    acc += col * b;
                }
                acc
            })
            .collect();
        for j in 0..np {
            let s: C64 = kernel.iter().zip(&phases[j]).map(|(k, e)| k * e).sum();
            values[i * np + j] = s.re * dy / (2.0 * PI);
        }
    }
    PhaseFunction { grid: grid.clone(), values }
}

/// Hilbert–Schmidt norm squared from a Wigner function: `2 pi hbar int |W|^2`.
pub fn plancherel_hs2(w: &PhaseFunction, hbar: f64) -> f64 {
    2.0 * PI * hbar * w.values.iter().map(|v| v * v).sum::<f64>() * w.grid.cell_area()
}

/// Largest `|R - S|` difference of Husimi functions, used as an injectivity probe.
pub fn husimi_separation(basis: &FockBasis, r: &CMat, s: &CMat, grid: &PhaseGrid) -> f64 {
    let d = linalg::sub(r, s);
    husimi(basis, &d, grid).values.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Gaussian density with mean `m` and isotropic variance `var`.
pub fn gaussian_density(grid: &PhaseGrid, m: [f64; 2], var: f64) -> PhaseFunction {
    let values = (0..grid.len())
        .map(|k| {
            let z = grid.point(k);
            let r2 = (z[0] - m[0]).powi(2) + (z[1] - m[1]).powi(2);
            (-r2 / (2.0 * var)).exp() / (2.0 * PI * var)
        })
        .collect();
    PhaseFunction { grid: grid.clone(), values }
}

/// Matrix of a Fock-space operator `sum_kl R_kl |e_k><e_l|` acting on coherent vectors;
/// convenience for tests that need `R` as a plain matrix.
pub fn projector(v: &[C64]) -> CMat {
    let n = v.len();
    Mat::from_fn(n, n, |i, j| v[i] * v[j].conj())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn measure_validation() {
        assert!(PhaseMeasure::new(vec![[0.0, 0.0]], vec![0.9]).is_err());
        assert!(PhaseMeasure::new(vec![[0.0, 0.0], [1.0, 0.0]], vec![1.5, -0.5]).is_err());
        let m = PhaseMeasure::new(vec![[0.0, 0.0], [1.0, 0.0]], vec![1.0, 0.0]).unwrap();
        assert_eq!(m.pruned().len(), 1);
    }

    #[test]
    fn toeplitz_of_origin_is_vacuum() {
        let b = FockBasis::new(1.0, 10).unwrap();
        let t = toeplitz(&b, &PhaseMeasure::dirac(0.0, 0.0));
        assert_abs_diff_eq!(t.matrix[(0, 0)].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(linalg::fro_norm(&t.matrix), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn toeplitz_energy() {
        let b = FockBasis::new(0.2, 40).unwrap();
        let t = toeplitz(&b, &PhaseMeasure::dirac(0.8, -0.5));
        assert_abs_diff_eq!(t.energy(&b).unwrap(), 0.64 + 0.25 + 0.2, epsilon = 1e-9);
    }

    #[test]
    fn two_point_toeplitz_rank_two() {
        let b = FockBasis::new(0.2, 32).unwrap();
        let m = PhaseMeasure::uniform(vec![[0.5, 0.0], [-0.5, 0.0]]);
        let t = toeplitz(&b, &m);
        let ev = t.eigenvalues();
        assert!(ev[ev.len() - 3].abs() < 1e-12);
        assert!(ev[ev.len() - 2] > 1e-3);
        assert_abs_diff_eq!(t.trace(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn vacuum_husimi() {
        let b = FockBasis::new(1.0, 12).unwrap();
        let r = DensityOperator::pure(&b.basis_vector(0).coeffs).matrix;
        assert_abs_diff_eq!(husimi_at(&b, &r, 0.0, 0.0), 1.0 / (2.0 * PI), epsilon = 1e-15);
        let v = husimi_at(&b, &r, 0.6, -0.3);
        assert_abs_diff_eq!(v, (-(0.36 + 0.09) / 2.0f64).exp() / (2.0 * PI), epsilon = 1e-14);
    }

    #[test]
    fn husimi_of_coherent_is_gaussian() {
        let b = FockBasis::new(0.1, 32).unwrap();
        let r = toeplitz(&b, &PhaseMeasure::dirac(0.3, 0.2));
        let g = PhaseGrid::square([0.3, 0.2], 1.6, 96);
        let h = husimi(&b, &r.matrix, &g);
        assert!((h.integral() - 1.0).abs() < 1e-6);
        let (m, c) = h.moments();
        assert_abs_diff_eq!(m[0], 0.3, epsilon = 1e-6);
        assert_abs_diff_eq!(m[1], 0.2, epsilon = 1e-6);
        assert!((c[0][0] / 0.1 - 1.0).abs() < 0.02);
        assert!((c[1][1] / 0.1 - 1.0).abs() < 0.02);
        assert!(c[0][1].abs() < 1e-6);
    }

    #[test]
    fn wigner_values() {
        let b = FockBasis::new(1.0, 8).unwrap();
        let g = PhaseGrid::new((-0.05, 0.05), (-0.05, 0.05), 1, 1);
        let e0 = DensityOperator::pure(&b.basis_vector(0).coeffs).matrix;
        let e1 = DensityOperator::pure(&b.basis_vector(1).coeffs).matrix;
        assert_abs_diff_eq!(wigner(&b, &e0, &g).values[0], 1.0 / PI, epsilon = 1e-10);
        assert_abs_diff_eq!(wigner(&b, &e1, &g).values[0], -1.0 / PI, epsilon = 1e-10);
    }

    #[test]
    fn heat_smoothing_of_wigner_is_husimi() {
        let b = FockBasis::new(0.5, 12).unwrap();
        let m = PhaseMeasure::uniform(vec![[0.5, 0.0], [-0.3, 0.4]]);
        let mut r = toeplitz(&b, &m).matrix;
        // add a coherence that makes the Wigner function oscillate
        let e1 = b.basis_vector(2).coeffs;
        r = linalg::add(&linalg::scale(&r, 0.7), &linalg::scale(&projector(&e1), 0.3));
        let g = PhaseGrid::square([0.0, 0.0], 5.0, 96);
        let w = wigner(&b, &r, &g);
        let h = husimi(&b, &r, &g);
        let hs = w.heat_smoothed(b.hbar / 4.0);
        let err = hs.values.iter().zip(&h.values).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(err < 1e-6, "{err}");
        assert!((w.integral() - 1.0).abs() < 1e-6);
        let hs2 = linalg::inner_re(&r, &r);
        assert!((plancherel_hs2(&w, b.hbar) / hs2 - 1.0).abs() < 1e-4);
    }
}
