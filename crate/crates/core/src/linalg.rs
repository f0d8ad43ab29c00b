//! Dense complex matrix helpers on top of `faer`.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par, Side};
pub use num_complex::Complex64 as C64;

/// Dense complex matrix.
pub type CMat = Mat<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    Mat::zeros(r, c)
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn diag_real(d: &[f64]) -> CMat {
    let n = d.len();
    Mat::from_fn(n, n, |i, j| if i == j { re(d[i]) } else { ZERO })
}

pub fn adjoint(m: &CMat) -> CMat {
    m.adjoint().to_owned()
}

/// Matrix product `a * b`.
pub fn mul(a: &CMat, b: &CMat) -> CMat {
    let mut out = zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a.as_ref(), b.as_ref(), ONE, Par::Seq);
    out
}

/// `a * b^†`.
pub fn mul_adj(a: &CMat, b: &CMat) -> CMat {
    let mut out = zeros(a.nrows(), b.nrows());
    matmul(out.as_mut(), Accum::Replace, a.as_ref(), b.adjoint(), ONE, Par::Seq);
    out
}

/// `a^† * b`.
pub fn adj_mul(a: &CMat, b: &CMat) -> CMat {
    let mut out = zeros(a.ncols(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a.adjoint(), b.as_ref(), ONE, Par::Seq);
    out
}

/// `u * m * u^†`.
pub fn conjugate_by(u: &CMat, m: &CMat) -> CMat {
    mul_adj(&mul(u, m), u)
}

pub fn add(a: &CMat, b: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] + b[(i, j)])
}

pub fn sub(a: &CMat, b: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)])
}

pub fn scale(a: &CMat, s: f64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn scale_c(a: &CMat, s: C64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

/// `a += s * b` in place.
pub fn axpy(a: &mut CMat, s: f64, b: &CMat) {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            a[(i, j)] += b[(i, j)] * s;
        }
    }
}

pub fn trace(a: &CMat) -> C64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// `Re tr(a b)`, with no product formed.
pub fn trace_prod_re(a: &CMat, b: &CMat) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let x = a[(i, j)];
            let y = b[(j, i)];
            s += x.re * y.re - x.im * y.im;
        }
    }
    s
}

/// Frobenius inner product `Re tr(a^† b)`.
pub fn inner_re(a: &CMat, b: &CMat) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let x = a[(i, j)];
            let y = b[(i, j)];
            s += x.re * y.re + x.im * y.im;
        }
    }
    s
}

pub fn fro_norm(a: &CMat) -> f64 {
    inner_re(a, a).sqrt()
}

pub fn max_abs(a: &CMat) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

/// Largest entry of `|a - a^†|`.
pub fn hermitian_defect(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut m = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

pub fn hermitian_part(a: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ra, ca) = (a.nrows(), a.ncols());
    let (rb, cb) = (b.nrows(), b.ncols());
    Mat::from_fn(ra * rb, ca * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
}

/// `|v><w|`.
pub fn outer(v: &[C64], w: &[C64]) -> CMat {
    Mat::from_fn(v.len(), w.len(), |i, j| v[i] * w[j].conj())
}

/// `<v|a|v>`, real part.
pub fn expectation(a: &CMat, v: &[C64]) -> f64 {
    let n = v.len();
    let mut s = ZERO;
    for j in 0..n {
        let mut col = ZERO;
        for i in 0..n {
            col += v[i].conj() * a[(i, j)];
        }
        s += col * v[j];
    }
    s.re
}

pub fn mat_vec(a: &CMat, v: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; a.nrows()];
    for j in 0..a.ncols() {
        let vj = v[j];
        for i in 0..a.nrows() {
            out[i] += a[(i, j)] * vj;
        }
    }
    out
}

pub fn dot(v: &[C64], w: &[C64]) -> C64 {
    v.iter().zip(w).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl Eigh {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        (0..self.vectors.nrows()).map(|i| self.vectors[(i, k)]).collect()
    }

    /// `V f(D) V^†`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMat {
        let n = self.vectors.nrows();
        let d: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        let keep: Vec<usize> = (0..d.len()).filter(|&k| d[k] != 0.0).collect();
        if keep.is_empty() {
            return zeros(n, n);
        }
        let w = Mat::from_fn(n, keep.len(), |i, c| self.vectors[(i, keep[c])] * d[keep[c]]);
        let v = Mat::from_fn(n, keep.len(), |i, c| self.vectors[(i, keep[c])]);
        mul_adj(&w, &v)
    }
}

/// Hermitian eigendecomposition (reads the lower triangle).
pub fn eigh(a: &CMat) -> Eigh {
    let e = a
        .self_adjoint_eigen(Side::Lower)
        .expect("Hermitian eigensolver failed to converge");
    let s = e.S();
    let values = (0..a.nrows()).map(|k| s[k].re).collect();
    Eigh { values, vectors: e.U().to_owned() }
}

pub fn eigvalsh(a: &CMat) -> Vec<f64> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .expect("Hermitian eigensolver failed to converge")
}

pub fn min_eig(a: &CMat) -> f64 {
    eigvalsh(a)[0]
}

/// Positive part `a_+` of a Hermitian matrix together with its eigendecomposition.
pub fn psd_part(a: &CMat) -> (CMat, Eigh) {
    let e = eigh(a);
    let n = a.nrows();
    let npos = e.values.iter().filter(|&&x| x > 0.0).count();
    let out = if npos == 0 {
        zeros(n, n)
    } else if npos <= n / 2 {
        low_rank(&e, |x| x > 0.0)
    } else {
        let neg = low_rank(&e, |x| x < 0.0);
        let mut p = hermitian_part(a);
        axpy(&mut p, -1.0, &neg);
        p
    };
    (out, e)
}

fn low_rank(e: &Eigh, sel: impl Fn(f64) -> bool) -> CMat {
    let n = e.vectors.nrows();
    let idx: Vec<usize> = (0..n).filter(|&k| sel(e.values[k])).collect();
    if idx.is_empty() {
        return zeros(n, n);
    }
    let w = Mat::from_fn(n, idx.len(), |i, c| e.vectors[(i, idx[c])] * e.values[idx[c]].abs().sqrt());
    let p = mul_adj(&w, &w);
    if e.values[idx[0]] < 0.0 {
        scale(&p, -1.0)
    } else {
        p
    }
}

/// Singular values, descending.
pub fn singular_values(a: &CMat) -> Vec<f64> {
    a.singular_values().expect("SVD failed to converge")
}

/// Real symmetric matrix square root via eigendecomposition; negative eigenvalues clipped.
pub fn sym_sqrt_real(a: &Mat<f64>) -> Mat<f64> {
    let e = a
        .self_adjoint_eigen(Side::Lower)
        .expect("symmetric eigensolver failed to converge");
    let n = a.nrows();
    let u = e.U();
    let s = e.S();
    Mat::from_fn(n, n, |i, j| {
        (0..n).map(|k| u[(i, k)] * s[k].max(0.0).sqrt() * u[(j, k)]).sum()
    })
}

pub fn sym_eigvals_real(a: &Mat<f64>) -> Vec<f64> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .expect("symmetric eigensolver failed to converge")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn herm(n: usize, seed: u64) -> CMat {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = Mat::from_fn(n, n, |_, _| C64::new(next(), next()));
        hermitian_part(&a)
    }

    #[test]
    fn eigh_reconstructs() {
        let a = herm(7, 3);
        let e = eigh(&a);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let b = e.apply(|x| x);
        assert!(fro_norm(&sub(&a, &b)) < 1e-12);
    }

    #[test]
    fn psd_part_splits() {
        for n in [3, 8] {
            let a = herm(n, 11 + n as u64);
            let (p, _) = psd_part(&a);
            let neg = sub(&p, &a);
            assert!(min_eig(&p) > -1e-12);
            assert!(min_eig(&neg) > -1e-12);
            assert!(trace_prod_re(&p, &neg).abs() < 1e-12);
        }
    }

    #[test]
    fn kron_mixed_product() {
        let a = herm(2, 1);
        let b = herm(3, 2);
        let c = herm(2, 5);
        let d = herm(3, 7);
        let lhs = mul(&kron(&a, &b), &kron(&c, &d));
        let rhs = kron(&mul(&a, &c), &mul(&b, &d));
        assert!(fro_norm(&sub(&lhs, &rhs)) < 1e-13);
    }
}
