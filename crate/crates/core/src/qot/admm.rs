//! Operator-splitting solvers for the coupling SDPs.
//!
//! Quantum-quantum: minimize `<C, T>` over PSD `T` with `trace_2 T = R`, `trace_1 T = S`.
//! Classical-quantum: minimize `sum_i <c(z_i), Q_i>` over PSD blocks with
//! `trace Q_i = f_i` and `sum_i Q_i = R`.
//!
//! Both use over-relaxed ADMM between the affine marginal set (closed-form projection
//! through the partial-trace adjoints) and the PSD cone (eigenvalue clipping), with
//! residual-balanced penalty. Dual certificates are read from the scaled multiplier.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, ZERO};
use super::anderson::{flatten, norm, unflatten, Anderson};
use faer::Mat;
use serde::Serialize;

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Tolerance on normalized primal residual, dual residual and relative gap.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial penalty; `None` picks a scale from the cost.
    pub rho: Option<f64>,
    /// Over-relaxation factor in `(0, 2)`.
    pub alpha: f64,
    /// Iterations between penalty updates and gap evaluations.
    pub check_every: usize,
    /// Penalty updates happen every `rho_every` checks.
    pub rho_every: usize,
    /// Anderson memory on the splitting fixed point; `0` gives plain ADMM.
    pub anderson: usize,
    /// Record residual history.
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-6, max_iter: 50_000, rho: None, alpha: 1.6, check_every: 10, rho_every: 5, anderson: 10, trace: false }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions { tol, ..Default::default() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub relative_gap: f64,
    pub rho: f64,
}

/// Dual certificate `(A, B)` with `A (x) 1 + 1 (x) B <= C`.
#[derive(Clone, Debug)]
pub struct DualCertificateQQ {
    pub a: CMat,
    pub b: CMat,
    pub margin: f64,
    pub value: f64,
    /// Margin loss absorbed into `A` to make the pair feasible.
    pub repair: f64,
}

/// Dual certificate `(a, B)` with `a_i 1 + B <= c(z_i)`.
#[derive(Clone, Debug)]
pub struct DualCertificateCQ {
    pub a: Vec<f64>,
    pub b: CMat,
    pub margins: Vec<f64>,
    pub value: f64,
    pub repair: f64,
}

impl DualCertificateCQ {
    pub fn min_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug)]
pub struct QQSolution {
    pub coupling: CMat,
    pub primal: f64,
    pub certificate: DualCertificateQQ,
    pub relative_gap: f64,
    /// Frobenius norms of `trace_2 T - R` and `trace_1 T - S`.
    pub marginal_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<TraceRow>,
}

#[derive(Clone, Debug)]
pub struct CQSolution {
    pub blocks: Vec<CMat>,
    pub primal: f64,
    pub certificate: DualCertificateCQ,
    pub relative_gap: f64,
    pub marginal_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<TraceRow>,
}

fn relative_gap(primal: f64, dual: f64) -> f64 {
    (primal - dual) / primal.abs().max(dual.abs()).max(1e-300)
}

/// Partial traces of a matrix on `nr x ns` factors.
fn ptraces(t: &CMat, nr: usize, ns: usize) -> (CMat, CMat) {
    let mut g = linalg::zeros(nr, nr);
    let mut h = linalg::zeros(ns, ns);
    for j in 0..nr {
        for i in 0..nr {
            let mut s = ZERO;
            for k in 0..ns {
                s += t[(i * ns + k, j * ns + k)];
            }
            g[(i, j)] = s;
        }
    }
    for l in 0..ns {
        for k in 0..ns {
            let mut s = ZERO;
            for i in 0..nr {
                s += t[(i * ns + k, i * ns + l)];
            }
            h[(k, l)] = s;
        }
    }
    (g, h)
}

/// Solves `(A A*)(A, B) = (G, H)` choosing `trace A = trace B`.
fn solve_marginal_system(g: &CMat, h: &CMat) -> (CMat, CMat) {
    let (nr, ns) = (g.nrows(), h.nrows());
    let tr = 0.5 * (linalg::trace(g).re + linalg::trace(h).re);
    let alpha = tr / (nr + ns) as f64;
    let mut a = g.clone();
    let mut b = h.clone();
    for i in 0..nr {
        a[(i, i)] -= linalg::re(alpha);
    }
    for i in 0..ns {
        b[(i, i)] -= linalg::re(alpha);
    }
    (linalg::scale(&a, 1.0 / ns as f64), linalg::scale(&b, 1.0 / nr as f64))
}

/// `A (x) 1 + 1 (x) B`.
fn embed_sum(a: &CMat, b: &CMat) -> CMat {
    let (nr, ns) = (a.nrows(), b.nrows());
    Mat::from_fn(nr * ns, nr * ns, |r, c| {
        let (i, k) = (r / ns, r % ns);
        let (j, l) = (c / ns, c % ns);
        let mut v = ZERO;
        if k == l {
            v += a[(i, j)];
        }
        if i == j {
            v += b[(k, l)];
        }
        v
    })
}

fn project_affine(y: &CMat, r: &CMat, s: &CMat) -> CMat {
    let (nr, ns) = (r.nrows(), s.nrows());
    let (g, h) = ptraces(y, nr, ns);
    let (a, b) = solve_marginal_system(&linalg::sub(&g, r), &linalg::sub(&h, s));
    let mut out = y.clone();
    for c in 0..nr * ns {
        let (j, l) = (c / ns, c % ns);
        for row in 0..nr * ns {
            let (i, k) = (row / ns, row % ns);
            let mut v = ZERO;
            if k == l {
                v += a[(i, j)];
            }
            if i == j {
                v += b[(k, l)];
            }
            out[(row, c)] -= v;
        }
    }
    out
}

/// Certificate from a multiplier estimate `Y ~ C + rho U`.
pub fn qq_certificate(cost: &CMat, y: &CMat, r: &CMat, s: &CMat) -> DualCertificateQQ {
    let (nr, ns) = (r.nrows(), s.nrows());
    let (g, h) = ptraces(y, nr, ns);
    let (a, b) = solve_marginal_system(&g, &h);
    certify_qq(cost, a, b, r, s)
}

/// Makes `(A, B)` feasible by shifting `A` down by the negative part of the margin, then
/// balances the traces of `A` and `B`.
pub fn certify_qq(cost: &CMat, a: CMat, b: CMat, r: &CMat, s: &CMat) -> DualCertificateQQ {
    let (a, b) = (linalg::hermitian_part(&a), linalg::hermitian_part(&b));
    let slack = linalg::sub(cost, &embed_sum(&a, &b));
    let m = linalg::min_eig(&linalg::hermitian_part(&slack));
    let repair = (-m).max(0.0);
    let mut a = a;
    let (nr, ns) = (a.nrows(), b.nrows());
    for i in 0..nr {
        a[(i, i)] -= linalg::re(repair);
    }
    let sigma = (linalg::trace(&b).re / ns as f64 - linalg::trace(&a).re / nr as f64) / 2.0;
    let mut b = b;
    for i in 0..nr {
        a[(i, i)] += linalg::re(sigma);
    }
    for i in 0..ns {
        b[(i, i)] -= linalg::re(sigma);
    }
    let value = linalg::trace_prod_re(&a, r) + linalg::trace_prod_re(&b, s);
    DualCertificateQQ { a, b, margin: m + repair, value, repair }
}

/// Quantum-quantum coupling SDP for an arbitrary Hermitian cost on the `nr ns`-dimensional
/// tensor space.
///
/// Every coupling lives on `range R (x) range S`, so rank-deficient marginals are first
/// compressed to their supports; the certificate of the compressed problem is lifted back
/// with a large negative multiple of the complementary projectors.
pub fn solve_qq(cost: &CMat, r: &CMat, s: &CMat, opts: &SolverOptions) -> Result<QQSolution> {
    let (nr, ns) = (r.nrows(), s.nrows());
    if cost.nrows() != nr * ns || cost.ncols() != nr * ns {
        return Err(Error::DimensionMismatch(format!("cost is {}x{}, expected {}", cost.nrows(), cost.ncols(), nr * ns)));
    }
    let (vr, vs) = (support(r), support(s));
    if vr.is_none() && vs.is_none() {
        return admm_qq(cost, r, s, opts);
    }
    let vr = vr.unwrap_or_else(|| linalg::identity(nr));
    let vs = vs.unwrap_or_else(|| linalg::identity(ns));
    let w = linalg::kron(&vr, &vs);
    let inner = admm_qq(
        &linalg::hermitian_part(&linalg::adj_mul(&w, &linalg::mul(cost, &w))),
        &compress(&vr, r),
        &compress(&vs, s),
        opts,
    )?;
    let coupling = linalg::mul_adj(&linalg::mul(&w, &inner.coupling), &w);
    let pr = complement(&vr);
    let ps = complement(&vs);
    let a0 = linalg::mul_adj(&linalg::mul(&vr, &inner.certificate.a), &vr);
    let b0 = linalg::mul_adj(&linalg::mul(&vs, &inner.certificate.b), &vs);
    let scale = linalg::fro_norm(cost) / (nr * ns) as f64;
    let certificate = lift_weights(scale)
        .map(|big| {
            let mut a = a0.clone();
            let mut b = b0.clone();
            linalg::axpy(&mut a, -big, &pr);
            linalg::axpy(&mut b, -big, &ps);
            certify_qq(cost, a, b, r, s)
        })
        .max_by(|x, y| x.value.total_cmp(&y.value))
        .expect("nonempty");
    let primal = linalg::inner_re(cost, &coupling);
    let (g, h) = ptraces(&coupling, nr, ns);
    let marginal_residual = linalg::fro_norm(&linalg::sub(&g, r)).max(linalg::fro_norm(&linalg::sub(&h, s)));
    let relative_gap = relative_gap(primal, certificate.value);
    Ok(QQSolution {
        coupling,
        primal,
        certificate,
        relative_gap,
        marginal_residual,
        iterations: inner.iterations,
        converged: inner.converged && relative_gap.abs() < opts.tol.max(SUPPORT_TOL.sqrt()),
        history: inner.history,
    })
}

/// Eigenvalues of a marginal below this (relative to its largest) count as zero.
pub const SUPPORT_TOL: f64 = 1e-12;

/// Orthonormal basis of the range of a PSD matrix, `None` when it has full rank.
fn support(m: &CMat) -> Option<CMat> {
    let e = linalg::eigh(&linalg::hermitian_part(m));
    let n = m.nrows();
    let top = e.values[n - 1].max(0.0);
    let keep: Vec<usize> = (0..n).filter(|&k| e.values[k] > SUPPORT_TOL * top).collect();
    if keep.len() == n || keep.is_empty() {
        return None;
    }
    Some(Mat::from_fn(n, keep.len(), |i, c| e.vectors[(i, keep[c])]))
}

fn compress(v: &CMat, m: &CMat) -> CMat {
    linalg::hermitian_part(&linalg::adj_mul(v, &linalg::mul(m, v)))
}

/// `1 - V V^*`.
fn complement(v: &CMat) -> CMat {
    let mut p = linalg::scale(&linalg::mul_adj(v, v), -1.0);
    for i in 0..v.nrows() {
        p[(i, i)] += linalg::ONE;
    }
    p
}

/// Candidate weights for the complementary projectors in a lifted certificate.
fn lift_weights(scale: f64) -> impl Iterator<Item = f64> {
    (0..=8).map(move |k| scale.max(1e-300) * 10f64.powi(k))
}

fn admm_qq(cost: &CMat, r: &CMat, s: &CMat, opts: &SolverOptions) -> Result<QQSolution> {
    let (nr, ns) = (r.nrows(), s.nrows());
    let dim = nr * ns;
    if cost.nrows() != dim || cost.ncols() != dim {
        return Err(Error::DimensionMismatch(format!("cost is {}x{}, expected {dim}", cost.nrows(), cost.ncols())));
    }
    check_options(opts)?;
    let cnorm = linalg::fro_norm(cost);
    let cscale = cnorm / dim as f64;
    let mut rho = opts.rho.unwrap_or(cscale);
    // Douglas-Rachford state: Z = (W)_+, U = W - Z
    let mut w = linalg::kron(r, s);
    let mut z_prev = w.clone();
    let mut aa = Anderson::new(opts.anderson);
    let mut guard = Safeguard::new();
    let mut history = Vec::new();
    let mut best: Option<(f64, CMat, DualCertificateQQ, f64)> = None;
    let mut iter = 0;
    let mut converged = false;
    let mut last = (z_prev.clone(), linalg::zeros(dim, dim));
    while iter < opts.max_iter {
        iter += 1;
        let (z, _) = linalg::psd_part(&w);
        let u = linalg::sub(&w, &z);
        let mut y = linalg::sub(&z, &u);
        linalg::axpy(&mut y, -1.0 / rho, cost);
        let x = project_affine(&y, r, s);
        let mut fw = linalg::scale(&x, opts.alpha);
        linalg::axpy(&mut fw, 1.0 - opts.alpha, &z);
        linalg::axpy(&mut fw, 1.0, &u);
        let fw = linalg::hermitian_part(&fw);
        let rp = linalg::fro_norm(&linalg::sub(&x, &z)) / linalg::fro_norm(&x).max(linalg::fro_norm(&z)).max(1e-300);
        let rd = rho * linalg::fro_norm(&linalg::sub(&z, &z_prev)) / (rho * linalg::fro_norm(&u)).max(cscale);
        z_prev = z.clone();
        let gvec = {
            let fv = flatten(&[&fw]);
            let wv = flatten(&[&w]);
            let g: Vec<f64> = fv.iter().zip(&wv).map(|(a, b)| a - b).collect();
            (wv, g)
        };
        let gn = norm(&gvec.1);
        w = match guard.check(gn, &fw) {
            Some(fallback) => {
                aa.reset();
                fallback
            }
            None => {
                let next = aa.next(&gvec.0, &gvec.1);
                unflatten(&next, dim).pop().expect("one block")
            }
        };
        last = (z, u);
        if iter % opts.check_every == 0 || iter == opts.max_iter {
            let (z, u) = (&last.0, &last.1);
            let mut gap = f64::NAN;
            if (rp < opts.tol && rd < opts.tol) || iter == opts.max_iter {
                let mut ymul = cost.clone();
                linalg::axpy(&mut ymul, rho, u);
                let cert = qq_certificate(cost, &ymul, r, s);
                let primal = linalg::inner_re(cost, z);
                gap = relative_gap(primal, cert.value);
                let improve = best.as_ref().map(|b| gap.abs() < b.3.abs()).unwrap_or(true);
                if improve {
                    best = Some((primal, z.clone(), cert, gap));
                }
                if gap.abs() < opts.tol {
                    converged = true;
                }
            }
            if opts.trace {
                history.push(TraceRow { iteration: iter, primal_residual: rp, dual_residual: rd, relative_gap: gap, rho });
            }
            if converged {
                break;
            }
            if iter % (opts.check_every * opts.rho_every) == 0 {
                if let Some(f) = rho_factor(rp, rd) {
                    // keep Z, rescale the scaled multiplier
                    rho *= f;
                    let (zc, _) = linalg::psd_part(&w);
                    let uc = linalg::sub(&w, &zc);
                    w = linalg::add(&zc, &linalg::scale(&uc, 1.0 / f));
                    aa.reset();
                    guard = Safeguard::new();
                }
            }
        }
    }
    let (primal, coupling, certificate, gap) = match best {
        Some(b) if converged => b,
        _ => {
            let (z, u) = last;
            let mut ymul = cost.clone();
            linalg::axpy(&mut ymul, rho, &u);
            let cert = qq_certificate(cost, &ymul, r, s);
            let primal = linalg::inner_re(cost, &z);
            let g = relative_gap(primal, cert.value);
            (primal, z, cert, g)
        }
    };
    let (g, h) = ptraces(&coupling, nr, ns);
    let marginal_residual = linalg::fro_norm(&linalg::sub(&g, r)).max(linalg::fro_norm(&linalg::sub(&h, s)));
    Ok(QQSolution { coupling, primal, certificate, relative_gap: gap, marginal_residual, iterations: iter, converged, history })
}

fn check_options(opts: &SolverOptions) -> Result<()> {
    if !(opts.alpha > 0.0 && opts.alpha < 2.0) || !(opts.tol > 0.0) || opts.check_every == 0 || opts.rho_every == 0 {
        return Err(Error::InvalidParameter("alpha must lie in (0, 2), tol be positive and check intervals nonzero".into()));
    }
    Ok(())
}

/// Residual balancing: factor-2 penalty moves when one residual exceeds the other tenfold.
fn rho_factor(rp: f64, rd: f64) -> Option<f64> {
    if rp > 10.0 * rd {
        Some(2.0)
    } else if rd > 10.0 * rp {
        Some(0.5)
    } else {
        None
    }
}

/// Rejects an extrapolated point whose fixed-point residual grew too much relative to
/// the point it was extrapolated from, and returns the plain step from that point.
struct Safeguard<T> {
    reference: Option<(f64, T)>,
}

impl<T: Clone> Safeguard<T> {
    fn new() -> Self {
        Safeguard { reference: None }
    }

    fn check(&mut self, residual: f64, plain: &T) -> Option<T> {
        if let Some((r0, fallback)) = self.reference.take() {
            if residual > SAFEGUARD * r0 {
                return Some(fallback);
            }
        }
        self.reference = Some((residual, plain.clone()));
        None
    }
}

const SAFEGUARD: f64 = 2.0;

/// Solves `n a_i + tr B = g_i`, `(sum a) 1 + m B = H` with `sum a = tr B`.
fn solve_block_system(g: &[f64], h: &CMat) -> (Vec<f64>, CMat) {
    let m = g.len();
    let n = h.nrows();
    let t = 0.5 * (g.iter().sum::<f64>() + linalg::trace(h).re) / (m + n) as f64;
    let a = g.iter().map(|gi| (gi - t) / n as f64).collect();
    let mut b = h.clone();
    for i in 0..n {
        b[(i, i)] -= linalg::re(t);
    }
    (a, linalg::scale(&b, 1.0 / m as f64))
}

/// Certificate from per-block multipliers `Y_i ~ c_i + rho U_i`.
pub fn cq_certificate(costs: &[CMat], y: &[CMat], f: &[f64], r: &CMat) -> DualCertificateCQ {
    let n = r.nrows();
    let g: Vec<f64> = y.iter().map(|yi| linalg::trace(yi).re).collect();
    let mut h = linalg::zeros(n, n);
    for yi in y {
        linalg::axpy(&mut h, 1.0, yi);
    }
    let (a, b) = solve_block_system(&g, &h);
    certify_cq(costs, a, linalg::hermitian_part(&b), f, r)
}

/// Shifts each `a_i` down by the negative part of its margin.
pub fn certify_cq(costs: &[CMat], mut a: Vec<f64>, b: CMat, f: &[f64], r: &CMat) -> DualCertificateCQ {
    let mut margins = Vec::with_capacity(costs.len());
    let mut repair = 0.0;
    for (i, c) in costs.iter().enumerate() {
        let m = linalg::min_eig(&linalg::hermitian_part(&linalg::sub(c, &b))) - a[i];
        if m < 0.0 {
            a[i] += m;
            repair += -m * f[i];
            margins.push(0.0);
        } else {
            margins.push(m);
        }
    }
    let value = a.iter().zip(f).map(|(x, w)| x * w).sum::<f64>() + linalg::trace_prod_re(&b, r);
    DualCertificateCQ { a, b, margins, value, repair }
}

/// Classical-quantum coupling SDP over blocks with costs `costs[i] = c(z_i)`. Blocks
/// live on `range R`, which is used to compress the problem when `R` is rank deficient.
pub fn solve_cq(costs: &[CMat], f: &[f64], r: &CMat, opts: &SolverOptions) -> Result<CQSolution> {
    let n = r.nrows();
    if costs.iter().any(|c| c.nrows() != n || c.ncols() != n) {
        return Err(Error::DimensionMismatch("cost blocks must match the operator size".into()));
    }
    let Some(v) = support(r) else {
        return admm_cq(costs, f, r, opts);
    };
    let small: Vec<CMat> = costs.iter().map(|c| compress(&v, c)).collect();
    let inner = admm_cq(&small, f, &compress(&v, r), opts)?;
    let blocks: Vec<CMat> = inner.blocks.iter().map(|q| linalg::mul_adj(&linalg::mul(&v, q), &v)).collect();
    let p = complement(&v);
    let b0 = linalg::mul_adj(&linalg::mul(&v, &inner.certificate.b), &v);
    let scale = costs.iter().map(|c| linalg::fro_norm(c)).fold(0.0, f64::max) / n as f64;
    let certificate = lift_weights(scale)
        .map(|big| {
            let mut b = b0.clone();
            linalg::axpy(&mut b, -big, &p);
            certify_cq(costs, inner.certificate.a.clone(), b, f, r)
        })
        .max_by(|x, y| x.value.total_cmp(&y.value))
        .expect("nonempty");
    let primal: f64 = blocks.iter().zip(costs).map(|(q, c)| linalg::inner_re(c, q)).sum();
    let marginal_residual = cq_residual(&blocks, f, r);
    let relative_gap = relative_gap(primal, certificate.value);
    Ok(CQSolution {
        blocks,
        primal,
        certificate,
        relative_gap,
        marginal_residual,
        iterations: inner.iterations,
        converged: inner.converged && relative_gap.abs() < opts.tol.max(SUPPORT_TOL.sqrt()),
        history: inner.history,
    })
}

fn cq_residual(blocks: &[CMat], f: &[f64], r: &CMat) -> f64 {
    let mut sum = linalg::scale(r, -1.0);
    let mut tr_res = 0.0f64;
    for (i, q) in blocks.iter().enumerate() {
        linalg::axpy(&mut sum, 1.0, q);
        tr_res = tr_res.max((linalg::trace(q).re - f[i]).abs());
    }
    linalg::fro_norm(&sum).max(tr_res)
}

fn admm_cq(costs: &[CMat], f: &[f64], r: &CMat, opts: &SolverOptions) -> Result<CQSolution> {
    let m = costs.len();
    let n = r.nrows();
    if f.len() != m || m == 0 {
        return Err(Error::DimensionMismatch("one weight per cost block required".into()));
    }
    if costs.iter().any(|c| c.nrows() != n || c.ncols() != n) {
        return Err(Error::DimensionMismatch("cost blocks must match the operator size".into()));
    }
    let cnorm = costs.iter().map(|c| linalg::fro_norm(c).powi(2)).sum::<f64>().sqrt();
    let cscale = cnorm / ((m as f64).sqrt() * n as f64);
    let mut rho = opts.rho.unwrap_or(cscale);
    let mut z: Vec<CMat> = f.iter().map(|&w| linalg::scale(r, w)).collect();
    let mut u: Vec<CMat> = vec![linalg::zeros(n, n); m];
    let mut history = Vec::new();
    let mut best: Option<(f64, Vec<CMat>, DualCertificateCQ, f64)> = None;
    let mut converged = false;
    let mut iter = 0;
    let project = |y: &mut [CMat]| {
        let g: Vec<f64> = y.iter().zip(f).map(|(yi, fi)| linalg::trace(yi).re - fi).collect();
        let mut h = linalg::scale(r, -1.0);
        for yi in y.iter() {
            linalg::axpy(&mut h, 1.0, yi);
        }
        let (a, b) = solve_block_system(&g, &h);
        for (i, yi) in y.iter_mut().enumerate() {
            linalg::axpy(yi, -1.0, &b);
            for d in 0..n {
                yi[(d, d)] -= linalg::re(a[i]);
            }
        }
    };
    while iter < opts.max_iter {
        iter += 1;
        let mut x: Vec<CMat> = (0..m)
            .map(|i| {
                let mut y = linalg::sub(&z[i], &u[i]);
                linalg::axpy(&mut y, -1.0 / rho, &costs[i]);
                y
            })
            .collect();
        project(&mut x);
        let mut rp2 = 0.0;
        let mut dz2 = 0.0;
        let mut xn2 = 0.0;
        let mut zn2 = 0.0;
        let mut un2 = 0.0;
        for i in 0..m {
            let mut xh = linalg::scale(&x[i], opts.alpha);
            linalg::axpy(&mut xh, 1.0 - opts.alpha, &z[i]);
            let w = linalg::hermitian_part(&linalg::add(&xh, &u[i]));
            let (zi, _) = linalg::psd_part(&w);
            dz2 += linalg::fro_norm(&linalg::sub(&zi, &z[i])).powi(2);
            rp2 += linalg::fro_norm(&linalg::sub(&x[i], &zi)).powi(2);
            xn2 += linalg::fro_norm(&x[i]).powi(2);
            zn2 += linalg::fro_norm(&zi).powi(2);
            u[i] = linalg::sub(&w, &zi);
            un2 += linalg::fro_norm(&u[i]).powi(2);
            z[i] = zi;
        }
        let rp_norm = rp2.sqrt() / xn2.max(zn2).sqrt().max(1e-300);
        let rd_norm = rho * dz2.sqrt() / (rho * un2.sqrt()).max(cscale);
        if iter % opts.check_every == 0 || iter == opts.max_iter {
            let mut gap = f64::NAN;
            if (rp_norm < opts.tol && rd_norm < opts.tol) || iter == opts.max_iter {
                let y: Vec<CMat> = (0..m)
                    .map(|i| {
                        let mut yi = costs[i].clone();
                        linalg::axpy(&mut yi, rho, &u[i]);
                        yi
                    })
                    .collect();
                let cert = cq_certificate(costs, &y, f, r);
                let primal: f64 = (0..m).map(|i| linalg::inner_re(&costs[i], &z[i])).sum();
                gap = relative_gap(primal, cert.value);
                let improve = best.as_ref().map(|b| gap.abs() < b.3.abs()).unwrap_or(true);
                if improve {
                    best = Some((primal, z.clone(), cert, gap));
                }
                if gap.abs() < opts.tol {
                    converged = true;
                }
            }
            if opts.trace {
                history.push(TraceRow { iteration: iter, primal_residual: rp_norm, dual_residual: rd_norm, relative_gap: gap, rho });
            }
            if converged {
                break;
            }
            if rp_norm > 10.0 * rd_norm {
                rho *= 2.0;
                u.iter_mut().for_each(|ui| *ui = linalg::scale(ui, 0.5));
            } else if rd_norm > 10.0 * rp_norm {
                rho *= 0.5;
                u.iter_mut().for_each(|ui| *ui = linalg::scale(ui, 2.0));
            }
        }
    }
    let (primal, blocks, certificate, gap) = match best {
        Some(b) if converged => b,
        _ => {
            let y: Vec<CMat> = (0..m)
                .map(|i| {
                    let mut yi = costs[i].clone();
                    linalg::axpy(&mut yi, rho, &u[i]);
                    yi
                })
                .collect();
            let cert = cq_certificate(costs, &y, f, r);
            let primal: f64 = (0..m).map(|i| linalg::inner_re(&costs[i], &z[i])).sum();
            let g = relative_gap(primal, cert.value);
            (primal, z, cert, g)
        }
    };
    let marginal_residual = cq_residual(&blocks, f, r);
    Ok(CQSolution { blocks, primal, certificate, relative_gap: gap, marginal_residual, iterations: iter, converged, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_projection_hits_marginals() {
        let n = 3;
        let r = linalg::diag_real(&[0.5, 0.3, 0.2]);
        let s = linalg::diag_real(&[0.1, 0.6, 0.3]);
        let y = Mat::from_fn(n * n, n * n, |i, j| linalg::re(((i * 7 + j * 3) % 5) as f64 / 7.0));
        let x = project_affine(&y, &r, &s);
        let (g, h) = ptraces(&x, n, n);
        assert!(linalg::max_abs(&linalg::sub(&g, &r)) < 1e-13);
        assert!(linalg::max_abs(&linalg::sub(&h, &s)) < 1e-13);
        // idempotent
        let x2 = project_affine(&x, &r, &s);
        assert!(linalg::max_abs(&linalg::sub(&x, &x2)) < 1e-13);
    }

    #[test]
    fn unequal_factor_sizes() {
        let r = linalg::diag_real(&[0.5, 0.5]);
        let s = linalg::diag_real(&[0.2, 0.3, 0.5]);
        let y = Mat::from_fn(6, 6, |i, j| linalg::re((i + 2 * j) as f64 / 9.0));
        let x = project_affine(&y, &r, &s);
        let (g, h) = ptraces(&x, 2, 3);
        assert!(linalg::max_abs(&linalg::sub(&g, &r)) < 1e-13);
        assert!(linalg::max_abs(&linalg::sub(&h, &s)) < 1e-13);
    }
}
