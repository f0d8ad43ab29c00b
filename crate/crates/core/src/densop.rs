//! Density operators on truncated (tensor) Fock spaces: validation, tensor products,
//! partial traces, norms and oscillator energy.

use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::linalg::{self, CMat, C64, ZERO};
use faer::Mat;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const PSD_REL_TOL: f64 = 1e-9;

/// Hermitian PSD unit-trace matrix on a tensor product of factors with sizes `dims`.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    pub matrix: CMat,
    pub dims: Vec<usize>,
    pub trace_tol: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub hermitian_defect: f64,
    pub min_eigenvalue: f64,
    pub trace_defect: f64,
    pub failures: Vec<String>,
}

impl Diagnostics {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct OperatorNormReport {
    pub trace_norm: f64,
    pub hs_norm: f64,
    pub op_norm: f64,
}

impl OperatorNormReport {
    pub fn chain_holds(&self, tol: f64) -> bool {
        self.op_norm <= self.hs_norm + tol && self.hs_norm <= self.trace_norm + tol
    }
}

impl DensityOperator {
    /// Wraps a matrix on a single factor; validates it.
    pub fn new(matrix: CMat) -> Result<Self> {
        let n = matrix.nrows();
        Self::with_dims(matrix, vec![n])
    }

    pub fn with_dims(matrix: CMat, dims: Vec<usize>) -> Result<Self> {
        let r = Self::unchecked(matrix, dims)?;
        let d = r.validate();
        if !d.passed() {
            return Err(Error::InvalidDensity(d.failures.join("; ")));
        }
        Ok(r)
    }

    /// Wraps without the PSD/trace checks (shape is still checked).
    pub fn unchecked(matrix: CMat, dims: Vec<usize>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch("density matrix must be square".into()));
        }
        let total: usize = dims.iter().product();
        if total != matrix.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "factor sizes {dims:?} do not multiply to {}",
                matrix.nrows()
            )));
        }
        Ok(DensityOperator { matrix, dims, trace_tol: 1e-9 })
    }

    pub fn pure(v: &[C64]) -> Self {
        let nrm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let m = linalg::scale(&linalg::outer(v, v), 1.0 / nrm2);
        DensityOperator { matrix: m, dims: vec![v.len()], trace_tol: 1e-9 }
    }

    /// Normalized identity on the first `k` of `n` modes.
    pub fn maximally_mixed(n: usize, k: usize) -> Self {
        let d: Vec<f64> = (0..n).map(|i| if i < k { 1.0 / k as f64 } else { 0.0 }).collect();
        DensityOperator { matrix: linalg::diag_real(&d), dims: vec![n], trace_tol: 1e-9 }
    }

    /// `sum_i w_i |v_i><v_i|` with unit-normalized `v_i`, weights normalized to 1.
    pub fn mixture(vectors: &[Vec<C64>], weights: &[f64]) -> Result<Self> {
        if vectors.is_empty() || vectors.len() != weights.len() {
            return Err(Error::DimensionMismatch("mixture needs one weight per vector".into()));
        }
        let n = vectors[0].len();
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w < 0.0) || !(total > 0.0) {
            return Err(Error::InvalidParameter("mixture weights must be nonnegative".into()));
        }
        let mut m = linalg::zeros(n, n);
        for (v, &w) in vectors.iter().zip(weights) {
            let nrm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            linalg::axpy(&mut m, w / (total * nrm2), &linalg::outer(v, v));
        }
        Ok(DensityOperator { matrix: m, dims: vec![n], trace_tol: 1e-9 })
    }

    /// Random state `G G^* / trace` with `G` an `n x rank` complex Gaussian matrix
    /// (the induced measure; `rank = n` is the Hilbert-Schmidt ensemble).
    pub fn random<R: Rng + ?Sized>(n: usize, rank: usize, rng: &mut R) -> Result<Self> {
        if rank == 0 || rank > n {
            return Err(Error::InvalidParameter(format!("rank {rank} outside 1..={n}")));
        }
        let g = Mat::from_fn(n, rank, |_, _| {
            C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
        });
        let m = linalg::mul_adj(&g, &g);
        let t = linalg::trace(&m).re;
        Ok(DensityOperator { matrix: linalg::hermitian_part(&linalg::scale(&m, 1.0 / t)), dims: vec![n], trace_tol: 1e-9 })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.matrix).re
    }

    pub fn validate(&self) -> Diagnostics {
        validate_matrix(&self.matrix, self.trace_tol)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.matrix)
    }

    /// Largest eigenvalue relative to the rest, as a rank-one test: returns the second
    /// largest eigenvalue.
    pub fn second_eigenvalue(&self) -> f64 {
        let ev = self.eigenvalues();
        if ev.len() < 2 {
            0.0
        } else {
            ev[ev.len() - 2]
        }
    }

    /// Leading eigenvector if the operator is rank one within `tol`.
    pub fn rank_one_vector(&self, tol: f64) -> Result<Vec<C64>> {
        let e = linalg::eigh(&self.matrix);
        let n = e.values.len();
        let second = if n >= 2 { e.values[n - 2] } else { 0.0 };
        if second.abs() > tol {
            return Err(Error::NotRankOne(second));
        }
        let s = e.values[n - 1].max(0.0).sqrt();
        Ok(e.vector(n - 1).into_iter().map(|z| z * s).collect())
    }

    /// Clip negative eigenvalues and renormalize the trace.
    pub fn clipped(&self) -> Self {
        let (p, _) = linalg::psd_part(&self.matrix);
        let t = linalg::trace(&p).re;
        DensityOperator { matrix: linalg::scale(&p, 1.0 / t), dims: self.dims.clone(), trace_tol: self.trace_tol }
    }

    pub fn purity(&self) -> f64 {
        linalg::inner_re(&self.matrix, &self.matrix)
    }

    /// `trace(R (x^2 + p^2))` for a single-factor operator.
    pub fn energy(&self, basis: &FockBasis) -> Result<f64> {
        energy(self, basis)
    }

    pub fn expectation(&self, op: &CMat) -> f64 {
        linalg::trace_prod_re(&self.matrix, op)
    }
}

pub fn validate_matrix(m: &CMat, trace_tol: f64) -> Diagnostics {
    let mut failures = Vec::new();
    let hd = linalg::hermitian_defect(m);
    if hd > HERMITIAN_TOL {
        failures.push(format!("Hermiticity defect {hd:e}"));
    }
    let min = linalg::min_eig(&linalg::hermitian_part(m));
    let scale = linalg::fro_norm(m).max(f64::MIN_POSITIVE);
    if min < -PSD_REL_TOL * scale {
        failures.push(format!("PSD violation: eigenvalue {min:e}"));
    }
    let td = (linalg::trace(m).re - 1.0).abs();
    if td > trace_tol {
        failures.push(format!("trace defect {td:e}"));
    }
    Diagnostics { hermitian_defect: hd, min_eigenvalue: min, trace_defect: td, failures }
}

/// Kronecker product of density operators; factor lists concatenate.
pub fn tensor(r: &DensityOperator, s: &DensityOperator) -> DensityOperator {
    let mut dims = r.dims.clone();
    dims.extend_from_slice(&s.dims);
    DensityOperator { matrix: linalg::kron(&r.matrix, &s.matrix), dims, trace_tol: r.trace_tol.max(s.trace_tol) }
}

/// Partial trace of a matrix on factors `dims`, keeping the factors in `keep` (in their
/// original order).
pub fn partial_trace_matrix(m: &CMat, dims: &[usize], keep: &[usize]) -> Result<CMat> {
    let nf = dims.len();
    let mut sorted = keep.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != keep.len() || sorted.iter().any(|&k| k >= nf) {
        return Err(Error::InvalidParameter(format!("bad factor set {keep:?} for {nf} factors")));
    }
    let total: usize = dims.iter().product();
    if m.nrows() != total || m.ncols() != total {
        return Err(Error::DimensionMismatch("matrix size differs from factor product".into()));
    }
    let traced: Vec<usize> = (0..nf).filter(|k| !sorted.contains(k)).collect();
    let kdim: usize = sorted.iter().map(|&k| dims[k]).product();
    let tdim: usize = traced.iter().map(|&k| dims[k]).product();
    // strides of each factor in the full row index
    let mut stride = vec![1usize; nf];
    for k in (0..nf.saturating_sub(1)).rev() {
        stride[k] = stride[k + 1] * dims[k + 1];
    }
    let compose = |digits_of: &[usize], sizes: &[usize], idx: usize, out: &mut usize| {
        let mut rem = idx;
        for (pos, &f) in digits_of.iter().enumerate().rev() {
            let d = rem % sizes[pos];
            rem /= sizes[pos];
            *out += d * stride[f];
        }
    };
    let ksizes: Vec<usize> = sorted.iter().map(|&k| dims[k]).collect();
    let tsizes: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let kbase: Vec<usize> = (0..kdim)
        .map(|i| {
            let mut o = 0;
            compose(&sorted, &ksizes, i, &mut o);
            o
        })
        .collect();
    let tbase: Vec<usize> = (0..tdim)
        .map(|i| {
            let mut o = 0;
            compose(&traced, &tsizes, i, &mut o);
            o
        })
        .collect();
    Ok(Mat::from_fn(kdim, kdim, |i, j| {
        let mut s = ZERO;
        for &t in &tbase {
            s += m[(kbase[i] + t, kbase[j] + t)];
        }
        s
    }))
}

pub fn partial_trace(t: &DensityOperator, keep: &[usize]) -> Result<DensityOperator> {
    let m = partial_trace_matrix(&t.matrix, &t.dims, keep)?;
    let mut sorted = keep.to_vec();
    sorted.sort_unstable();
    let dims = sorted.iter().map(|&k| t.dims[k]).collect();
    Ok(DensityOperator { matrix: m, dims, trace_tol: t.trace_tol })
}

/// `k`-particle marginal: keep the first `k` factors.
pub fn marginal_k(r: &DensityOperator, k: usize) -> Result<DensityOperator> {
    if k == 0 || k > r.dims.len() {
        return Err(Error::InvalidParameter(format!("marginal order {k} out of range")));
    }
    let keep: Vec<usize> = (0..k).collect();
    partial_trace(r, &keep)
}

/// `trace_2` of a matrix on `n x n` factors (keeps the first factor).
pub fn ptrace_second(m: &CMat, n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| (0..n).map(|k| m[(i * n + k, j * n + k)]).sum())
}

/// `trace_1` of a matrix on `n x n` factors (keeps the second factor).
pub fn ptrace_first(m: &CMat, n: usize) -> CMat {
    Mat::from_fn(n, n, |k, l| (0..n).map(|i| m[(i * n + k, i * n + l)]).sum())
}

/// Swap operator `U(a (x) b) = b (x) a` applied by conjugation.
pub fn swap_conjugate(m: &CMat, n: usize) -> CMat {
    Mat::from_fn(n * n, n * n, |r, c| {
        let (i, k) = (r / n, r % n);
        let (j, l) = (c / n, c % n);
        m[(k * n + i, l * n + j)]
    })
}

pub fn norms(a: &CMat) -> OperatorNormReport {
    let sv = linalg::singular_values(a);
    OperatorNormReport {
        trace_norm: sv.iter().sum(),
        hs_norm: linalg::fro_norm(a),
        op_norm: sv.first().copied().unwrap_or(0.0),
    }
}

pub fn trace_distance(r: &DensityOperator, s: &DensityOperator) -> f64 {
    let d = linalg::sub(&r.matrix, &s.matrix);
    linalg::eigvalsh(&linalg::hermitian_part(&d)).iter().map(|x| x.abs()).sum()
}

pub fn energy(r: &DensityOperator, basis: &FockBasis) -> Result<f64> {
    if r.dim() != basis.n_modes {
        return Err(Error::DimensionMismatch("operator and basis sizes differ".into()));
    }
    Ok(r.expectation(&basis.oscillator()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn random_density(n: usize, seed: u64) -> DensityOperator {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DensityOperator::random(n, n, &mut rng).unwrap()
    }

    #[test]
    fn random_states_are_valid_with_requested_rank() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let r = DensityOperator::random(6, 2, &mut rng).unwrap();
        assert!(r.validate().passed());
        let ev = r.eigenvalues();
        assert!(ev[3].abs() < 1e-12 && ev[4] > 1e-6);
        assert!(DensityOperator::random(3, 4, &mut rng).is_err());
    }

    #[test]
    fn validation_cases() {
        let b = FockBasis::new(1.0, 4).unwrap();
        assert!(DensityOperator::pure(&b.basis_vector(0).coeffs).validate().passed());
        let mm = linalg::scale(&linalg::identity(4), 0.25);
        assert!(DensityOperator::new(mm).is_ok());
        let bad = linalg::diag_real(&[0.6, 0.401, 0.0, -1e-3]);
        let err = DensityOperator::new(bad).unwrap_err();
        assert!(matches!(err, Error::InvalidDensity(ref s) if s.contains("PSD")));
    }

    #[test]
    fn partial_traces_of_products() {
        let r = random_density(3, 1);
        let s = random_density(4, 2);
        let t = tensor(&r, &s);
        let r2 = partial_trace(&t, &[0]).unwrap();
        let s2 = partial_trace(&t, &[1]).unwrap();
        assert!(linalg::max_abs(&linalg::sub(&r2.matrix, &r.matrix)) < 1e-14);
        assert!(linalg::max_abs(&linalg::sub(&s2.matrix, &s.matrix)) < 1e-14);
        assert_abs_diff_eq!(t.trace(), 1.0, epsilon = 1e-13);
        assert!(partial_trace(&t, &[2]).is_err());
        assert!(partial_trace(&t, &[0, 0]).is_err());
    }

    #[test]
    fn three_factor_trace() {
        let a = random_density(2, 3);
        let b = random_density(3, 4);
        let c = random_density(2, 5);
        let t = tensor(&tensor(&a, &b), &c);
        let ac = partial_trace(&t, &[0, 2]).unwrap();
        let want = linalg::kron(&a.matrix, &c.matrix);
        assert!(linalg::max_abs(&linalg::sub(&ac.matrix, &want)) < 1e-14);
    }

    #[test]
    fn square_helpers_agree() {
        let t = tensor(&random_density(3, 7), &random_density(3, 8));
        let a = partial_trace(&t, &[0]).unwrap().matrix;
        let b = partial_trace(&t, &[1]).unwrap().matrix;
        assert!(linalg::max_abs(&linalg::sub(&a, &ptrace_second(&t.matrix, 3))) < 1e-15);
        assert!(linalg::max_abs(&linalg::sub(&b, &ptrace_first(&t.matrix, 3))) < 1e-15);
    }

    #[test]
    fn symmetrized_state_has_equal_marginals() {
        let r = random_density(3, 9);
        let s = random_density(3, 10);
        let t = tensor(&r, &s).matrix;
        let sym = linalg::scale(&linalg::add(&t, &swap_conjugate(&t, 3)), 0.5);
        let m1 = ptrace_second(&sym, 3);
        let m2 = ptrace_first(&sym, 3);
        assert!(linalg::max_abs(&linalg::sub(&m1, &m2)) < 1e-14);
    }

    #[test]
    fn key_example_norms() {
        let b = FockBasis::new(0.25, 48).unwrap();
        let r1 = DensityOperator::pure(&b.coherent(0.0, 0.0).coeffs);
        let r2 = DensityOperator::pure(&b.coherent(1.0, 0.0).coeffs);
        let rep = norms(&linalg::sub(&r1.matrix, &r2.matrix));
        let hs2 = 2.0 * (1.0 - (-2.0f64).exp());
        assert!((rep.hs_norm.powi(2) - hs2).abs() / hs2 < 1e-10);
        assert!((rep.trace_norm - 2f64.sqrt() * rep.hs_norm).abs() < 1e-10);
        assert!(rep.chain_holds(1e-14));
        assert_abs_diff_eq!(norms(&r1.matrix).trace_norm, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn energies() {
        let b = FockBasis::new(1.0, 20).unwrap();
        let e0 = DensityOperator::pure(&b.basis_vector(0).coeffs);
        assert_abs_diff_eq!(e0.energy(&b).unwrap(), 1.0, epsilon = 1e-14);
        let c = DensityOperator::pure(&b.coherent(0.7, -0.4).coeffs);
        assert_abs_diff_eq!(c.energy(&b).unwrap(), 0.49 + 0.16 + 1.0, epsilon = 1e-9);
        let mm = DensityOperator::maximally_mixed(20, 2);
        assert_abs_diff_eq!(mm.energy(&b).unwrap(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn rank_one_detection() {
        let b = FockBasis::new(1.0, 6).unwrap();
        let p = DensityOperator::pure(&b.coherent(0.3, 0.1).coeffs);
        assert!(p.rank_one_vector(1e-9).is_ok());
        assert!(DensityOperator::maximally_mixed(6, 2).rank_one_vector(1e-9).is_err());
    }
}
