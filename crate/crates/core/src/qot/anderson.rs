//! Type-II Anderson acceleration for a fixed-point map `w -> F(w)` on flat real vectors.

use crate::linalg::{CMat, C64};
use faer::linalg::solvers::Solve;
use faer::Mat;
use std::collections::VecDeque;

pub(crate) struct Anderson {
    mem: usize,
    dw: VecDeque<Vec<f64>>,
    dg: VecDeque<Vec<f64>>,
    last: Option<(Vec<f64>, Vec<f64>)>,
}

impl Anderson {
    pub fn new(mem: usize) -> Self {
        Anderson { mem, dw: VecDeque::new(), dg: VecDeque::new(), last: None }
    }

    pub fn reset(&mut self) {
        self.dw.clear();
        self.dg.clear();
        self.last = None;
    }

    /// Next iterate from the point `w` and its residual `g = F(w) - w`. Falls back to
    /// `F(w)` when the memory is empty or the least-squares system is unusable.
    pub fn next(&mut self, w: &[f64], g: &[f64]) -> Vec<f64> {
        if let Some((wp, gp)) = self.last.take() {
            self.dw.push_back(w.iter().zip(&wp).map(|(a, b)| a - b).collect());
            self.dg.push_back(g.iter().zip(&gp).map(|(a, b)| a - b).collect());
            if self.dw.len() > self.mem {
                self.dw.pop_front();
                self.dg.pop_front();
            }
        }
        self.last = Some((w.to_vec(), g.to_vec()));
        let mut out: Vec<f64> = w.iter().zip(g).map(|(a, b)| a + b).collect();
        let k = self.dg.len();
        if k == 0 || self.mem == 0 {
            return out;
        }
        let mut m = Mat::<f64>::zeros(k, k);
        let mut rhs = Mat::<f64>::zeros(k, 1);
        for i in 0..k {
            for j in 0..=i {
                let v = dotf(&self.dg[i], &self.dg[j]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
            rhs[(i, 0)] = dotf(&self.dg[i], g);
        }
        let reg = 1e-10 * (0..k).map(|i| m[(i, i)]).sum::<f64>() / k as f64;
        for i in 0..k {
            m[(i, i)] += reg.max(1e-300);
        }
        let gamma = m.partial_piv_lu().solve(&rhs);
        if (0..k).any(|i| !gamma[(i, 0)].is_finite()) {
            self.reset();
            return out;
        }
        for i in 0..k {
            let c = gamma[(i, 0)];
            for ((o, s), y) in out.iter_mut().zip(&self.dw[i]).zip(&self.dg[i]) {
                *o -= c * (s + y);
            }
        }
        out
    }
}

fn dotf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn flatten(blocks: &[&CMat]) -> Vec<f64> {
    let mut v = Vec::with_capacity(blocks.iter().map(|b| 2 * b.nrows() * b.ncols()).sum());
    for b in blocks {
        for j in 0..b.ncols() {
            for i in 0..b.nrows() {
                let c = b[(i, j)];
                v.push(c.re);
                v.push(c.im);
            }
        }
    }
    v
}

/// Inverse of [`flatten`] for square blocks of size `n`.
pub(crate) fn unflatten(v: &[f64], n: usize) -> Vec<CMat> {
    v.chunks(2 * n * n)
        .map(|c| Mat::from_fn(n, n, |i, j| C64::new(c[2 * (j * n + i)], c[2 * (j * n + i) + 1])))
        .collect()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    dotf(v, v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_map_converges_fast() {
        // F(w) = M w + b with a slowly contracting M; Anderson reaches the fixed point
        // in far fewer steps than plain iteration.
        let d = [0.999, 0.99, 0.9, 0.5];
        let b = [1.0, -2.0, 0.5, 3.0];
        let fix: Vec<f64> = (0..4).map(|i| b[i] / (1.0 - d[i])).collect();
        let mut aa = Anderson::new(5);
        let mut w = vec![0.0; 4];
        for _ in 0..20 {
            let g: Vec<f64> = (0..4).map(|i| d[i] * w[i] + b[i] - w[i]).collect();
            w = aa.next(&w, &g);
        }
        for i in 0..4 {
            assert!((w[i] - fix[i]).abs() < 1e-6 * fix[i].abs().max(1.0), "{i}: {} vs {}", w[i], fix[i]);
        }
    }

    #[test]
    fn flatten_round_trip() {
        let a = Mat::from_fn(3, 3, |i, j| C64::new(i as f64, j as f64 - 1.0));
        let back = unflatten(&flatten(&[&a, &a]), 3);
        assert_eq!(back.len(), 2);
        assert_eq!(back[1], a);
    }
}
