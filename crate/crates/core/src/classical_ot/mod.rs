//! Classical quadratic Wasserstein distance: exact discrete LP, 1-d monotone
//! rearrangement, Gaussian closed form, optimality checks.

mod linearized;
mod simplex;

pub use linearized::{w2_grid_linearized, LinearizedReport};
pub use simplex::{solve as solve_transport, SimplexSolution};

use crate::error::{Error, Result};
use crate::quantize::PhaseMeasure;
use faer::Mat;
use serde::Serialize;

/// Optimal plan between two discrete measures; support points are kept by value.
#[derive(Clone, Debug, Serialize)]
pub struct TransportPlan {
    pub source: Vec<Vec<f64>>,
    pub target: Vec<Vec<f64>>,
    /// `(i, j, mass)` for positive entries.
    pub entries: Vec<(usize, usize, f64)>,
    pub cost: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl TransportPlan {
    pub fn w2(&self) -> f64 {
        self.cost.max(0.0).sqrt()
    }

    pub fn dual_value(&self, mu: &[f64], nu: &[f64]) -> f64 {
        self.a.iter().zip(mu).map(|(a, w)| a * w).sum::<f64>()
            + self.b.iter().zip(nu).map(|(b, w)| b * w).sum::<f64>()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.source.len()];
        for &(i, _, m) in &self.entries {
            r[i] += m;
        }
        r
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.target.len()];
        for &(_, j, m) in &self.entries {
            c[j] += m;
        }
        c
    }
}

pub fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Exact optimal transport for squared Euclidean cost between weighted point sets of
/// any dimension. Zero-weight points are dropped before solving; the plan indexes the
/// original points.
pub fn w2_points(xs: &[Vec<f64>], mu: &[f64], ys: &[Vec<f64>], nu: &[f64]) -> Result<TransportPlan> {
    if xs.len() != mu.len() || ys.len() != nu.len() {
        return Err(Error::DimensionMismatch("one weight per point required".into()));
    }
    let ki: Vec<usize> = (0..mu.len()).filter(|&i| mu[i] > 0.0).collect();
    let kj: Vec<usize> = (0..nu.len()).filter(|&j| nu[j] > 0.0).collect();
    if ki.is_empty() || kj.is_empty() {
        return Err(Error::InvalidParameter("measures must have positive mass".into()));
    }
    let cost: Vec<f64> = ki.iter().flat_map(|&i| kj.iter().map(move |&j| sq_dist(&xs[i], &ys[j]))).collect();
    let supply: Vec<f64> = ki.iter().map(|&i| mu[i]).collect();
    let demand: Vec<f64> = kj.iter().map(|&j| nu[j]).collect();
    let sol = simplex::solve(&cost, &supply, &demand)?;
    let n = kj.len();
    let mut entries = Vec::new();
    for (k, &f) in sol.flow.iter().enumerate() {
        if f > 0.0 {
            entries.push((ki[k / n], kj[k % n], f));
        }
    }
    let mut a = vec![f64::NEG_INFINITY; mu.len()];
    let mut b = vec![f64::NEG_INFINITY; nu.len()];
    for (r, &i) in ki.iter().enumerate() {
        a[i] = sol.a[r];
    }
    for (c, &j) in kj.iter().enumerate() {
        b[j] = sol.b[c];
    }
    // dropped points get the c-transform, which keeps the pair feasible
    for i in 0..mu.len() {
        if a[i] == f64::NEG_INFINITY {
            a[i] = kj.iter().map(|&j| sq_dist(&xs[i], &ys[j]) - b[j]).fold(f64::INFINITY, f64::min);
        }
    }
    for j in 0..nu.len() {
        if b[j] == f64::NEG_INFINITY {
            b[j] = (0..mu.len()).map(|i| sq_dist(&xs[i], &ys[j]) - a[i]).fold(f64::INFINITY, f64::min);
        }
    }
    Ok(TransportPlan { source: xs.to_vec(), target: ys.to_vec(), entries, cost: sol.cost, a, b })
}

/// `W2` between two phase-space measures with its optimal plan.
pub fn w2_discrete(mu: &PhaseMeasure, nu: &PhaseMeasure) -> Result<(f64, TransportPlan)> {
    let xs: Vec<Vec<f64>> = mu.points.iter().map(|z| z.to_vec()).collect();
    let ys: Vec<Vec<f64>> = nu.points.iter().map(|z| z.to_vec()).collect();
    let plan = w2_points(&xs, &mu.weights, &ys, &nu.weights)?;
    Ok((plan.w2(), plan))
}

/// Monotone rearrangement cost between weighted measures on the line.
pub fn w2_1d_weighted(xs: &[f64], mu: &[f64], ys: &[f64], nu: &[f64]) -> Result<f64> {
    if xs.len() != mu.len() || ys.len() != nu.len() || xs.is_empty() || ys.is_empty() {
        return Err(Error::DimensionMismatch("one weight per point required".into()));
    }
    let tm: f64 = mu.iter().sum();
    let tn: f64 = nu.iter().sum();
    if (tm - tn).abs() > 1e-9 * tm.max(tn) {
        return Err(Error::Unbalanced { source_mass: tm, target_mass: tn });
    }
    let mut a: Vec<(f64, f64)> = xs.iter().copied().zip(mu.iter().map(|w| w / tm)).collect();
    let mut b: Vec<(f64, f64)> = ys.iter().copied().zip(nu.iter().map(|w| w / tn)).collect();
    a.sort_by(|p, q| p.0.total_cmp(&q.0));
    b.sort_by(|p, q| p.0.total_cmp(&q.0));
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut cost = 0.0;
    loop {
        let m = ra.min(rb);
        cost += m * (a[i].0 - b[j].0).powi(2);
        ra -= m;
        rb -= m;
        if ra <= 1e-15 {
            i += 1;
            if i == a.len() {
                break;
            }
            ra += a[i].1;
        }
        if rb <= 1e-15 {
            j += 1;
            if j == b.len() {
                break;
            }
            rb += b[j].1;
        }
    }
    Ok(cost.max(0.0).sqrt())
}

/// Equal-weight samples on the line: sort and pair order statistics.
pub fn w2_1d_quantile(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        let mu = vec![1.0 / xs.len() as f64; xs.len()];
        let nu = vec![1.0 / ys.len() as f64; ys.len()];
        return w2_1d_weighted(xs, &mu, ys, &nu);
    }
    if xs.is_empty() {
        return Err(Error::InvalidParameter("empty samples".into()));
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let c: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64;
    Ok(c.sqrt())
}

/// `W2` between Gaussians `N(m1, A1)` and `N(m2, A2)`:
/// `|m1 - m2|^2 + tr(A1 + A2 - 2 (A1^{1/2} A2 A1^{1/2})^{1/2})`.
pub fn w2_gaussian(m1: &[f64], a1: &Mat<f64>, m2: &[f64], a2: &Mat<f64>) -> Result<f64> {
    let d = m1.len();
    if m2.len() != d || a1.nrows() != d || a1.ncols() != d || a2.nrows() != d || a2.ncols() != d {
        return Err(Error::DimensionMismatch("means and covariances must share dimension".into()));
    }
    for a in [a1, a2] {
        let asym = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).fold(0.0f64, |m, (i, j)| m.max((a[(i, j)] - a[(j, i)]).abs()));
        if asym > 1e-12 {
            return Err(Error::InvalidParameter("covariance must be symmetric".into()));
        }
        let ev = crate::linalg::sym_eigvals_real(a);
        if ev[0] < -1e-12 {
            return Err(Error::InvalidParameter(format!("covariance has eigenvalue {}", ev[0])));
        }
    }
    let r = crate::linalg::sym_sqrt_real(a1);
    let inner = &r * a2 * &r;
    let inner = Mat::from_fn(d, d, |i, j| 0.5 * (inner[(i, j)] + inner[(j, i)]));
    let c = crate::linalg::sym_sqrt_real(&inner);
    let tr = (0..d).map(|i| a1[(i, i)] + a2[(i, i)] - 2.0 * c[(i, i)]).sum::<f64>();
    Ok((sq_dist(m1, m2) + tr).max(0.0).sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityReport {
    pub passed: bool,
    /// Largest cost reduction found by rerouting a cycle of support pairs.
    pub worst_gain: f64,
    /// Support pairs `(i, j)` of the worst cycle.
    pub worst_cycle: Vec<(usize, usize)>,
    pub checked_three_cycles: bool,
}

/// Checks 2- and 3-cycles of the plan support for cost-decreasing reroutings.
/// Three-cycles are enumerated when the support has at most 150 pairs.
pub fn verify_cyclical_monotonicity(plan: &TransportPlan, tol: f64) -> MonotonicityReport {
    let supp: Vec<(usize, usize)> = plan.entries.iter().filter(|e| e.2 > tol).map(|e| (e.0, e.1)).collect();
    let c = |i: usize, j: usize| sq_dist(&plan.source[i], &plan.target[j]);
    let mut worst = 0.0f64;
    let mut cycle = Vec::new();
    let s = supp.len();
    for u in 0..s {
        for v in u + 1..s {
            let (i, j) = supp[u];
            let (k, l) = supp[v];
            let gain = c(i, j) + c(k, l) - c(i, l) - c(k, j);
            if gain > worst {
                worst = gain;
                cycle = vec![supp[u], supp[v]];
            }
        }
    }
    let three = s <= 150;
    if three {
        for u in 0..s {
            for v in 0..s {
                if v == u {
                    continue;
                }
                for w in 0..s {
                    if w == u || w == v {
                        continue;
                    }
                    let (i1, j1) = supp[u];
                    let (i2, j2) = supp[v];
                    let (i3, j3) = supp[w];
                    let gain = c(i1, j1) + c(i2, j2) + c(i3, j3) - c(i1, j2) - c(i2, j3) - c(i3, j1);
                    if gain > worst {
                        worst = gain;
                        cycle = vec![supp[u], supp[v], supp[w]];
                    }
                }
            }
        }
    }
    MonotonicityReport { passed: worst <= tol, worst_gain: worst, worst_cycle: cycle, checked_three_cycles: three }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(ps: &[f64]) -> Vec<Vec<f64>> {
        ps.iter().map(|&x| vec![x, 0.0]).collect()
    }

    #[test]
    fn diracs() {
        let (w, plan) = w2_discrete(&PhaseMeasure::dirac(0.0, 1.0), &PhaseMeasure::dirac(3.0, -3.0)).unwrap();
        assert!((w - 5.0).abs() < 1e-14);
        assert_eq!(plan.entries.len(), 1);
    }

    #[test]
    fn two_point_geometry() {
        let mu = PhaseMeasure::uniform(vec![[0.5, 0.0], [-0.5, 0.0]]);
        let nu = PhaseMeasure::uniform(vec![[1.0, 0.0], [-1.0, 0.0]]);
        let (w, plan) = w2_discrete(&mu, &nu).unwrap();
        assert!((w * w - 0.25).abs() < 1e-14);
        let mut e = plan.entries.clone();
        e.sort_by_key(|x| (x.0, x.1));
        assert_eq!((e[0].0, e[0].1, e[1].0, e[1].1), (0, 0, 1, 1));
        assert!(verify_cyclical_monotonicity(&plan, 1e-12).passed);
        let w1 = w2_1d_quantile(&[0.5, -0.5], &[1.0, -1.0]).unwrap();
        assert!((w1 - 0.5).abs() < 1e-14);
    }

    #[test]
    fn crossed_plan_fails_monotonicity() {
        let plan = TransportPlan {
            source: line(&[0.5, -0.5]),
            target: line(&[1.0, -1.0]),
            entries: vec![(0, 1, 0.5), (1, 0, 0.5)],
            cost: 0.0,
            a: vec![],
            b: vec![],
        };
        let r = verify_cyclical_monotonicity(&plan, 1e-12);
        assert!(!r.passed);
        // 2-cycle swap gain 4ab*2 with a = 0.5, b = 1
        assert!((r.worst_gain - 4.0).abs() < 1e-12);
        assert_eq!(r.worst_cycle.len(), 2);
    }

    #[test]
    fn self_plan_is_diagonal() {
        let mu = PhaseMeasure::new(vec![[0.0, 0.0], [1.0, 2.0], [-1.0, 0.5]], vec![0.2, 0.5, 0.3]).unwrap();
        let (w, plan) = w2_discrete(&mu, &mu).unwrap();
        assert!(w < 1e-12);
        assert!(plan.entries.iter().all(|e| e.0 == e.1));
    }

    #[test]
    fn gaussian_scalar() {
        let one = Mat::from_fn(1, 1, |_, _| 1.0);
        let four = Mat::from_fn(1, 1, |_, _| 4.0);
        assert!((w2_gaussian(&[0.0], &one, &[0.0], &four).unwrap() - 1.0).abs() < 1e-14);
        let id = Mat::<f64>::identity(2, 2);
        assert!((w2_gaussian(&[0.0, 0.0], &id, &[3.0, 4.0], &id).unwrap() - 5.0).abs() < 1e-14);
        let bad = Mat::from_fn(1, 1, |_, _| -1.0);
        assert!(w2_gaussian(&[0.0], &bad, &[0.0], &one).is_err());
    }

    #[test]
    fn weighted_quantile_matches_lp() {
        let xs = [0.0, 1.0, 3.0];
        let ys = [0.5, 2.0];
        let mu = [0.2, 0.5, 0.3];
        let nu = [0.6, 0.4];
        let q = w2_1d_weighted(&xs, &mu, &ys, &nu).unwrap();
        let lp = w2_points(&line(&xs), &mu, &line(&ys), &nu).unwrap();
        assert!((q - lp.w2()).abs() < 1e-12);
    }
}
