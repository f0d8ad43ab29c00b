//! Linearized W2 between nearby densities on a common 2-d grid.
//!
//! For `nu = mu + eps s`, `W2(mu, nu)^2 = ||mu - nu||^2_{H^-1(rho)} + O(eps^3)`, where the
//! weighted negative Sobolev norm is `int rho |grad u|^2` with `-div(rho grad u) = mu - nu`
//! and `rho` the midpoint density. The elliptic problem is discretized by finite volumes
//! with Neumann boundaries and solved by Jacobi-preconditioned conjugate gradients.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LinearizedReport {
    pub w2: f64,
    pub cg_iterations: usize,
    pub relative_residual: f64,
}

/// `f`, `g`: cell masses (row-major `nq x np`, each summing to 1) on a grid with cell
/// sides `hq, hp`. Returns the linearized W2 estimate.
pub fn w2_grid_linearized(f: &[f64], g: &[f64], nq: usize, np: usize, hq: f64, hp: f64) -> Result<LinearizedReport> {
    let nc = nq * np;
    if f.len() != nc || g.len() != nc {
        return Err(Error::DimensionMismatch("densities must match the grid".into()));
    }
    let cell = hq * hp;
    let rho: Vec<f64> = f.iter().zip(g).map(|(a, b)| 0.5 * (a + b) / cell).collect();
    let rmax = rho.iter().fold(0.0f64, |a, &b| a.max(b));
    if !(rmax > 0.0) {
        return Err(Error::InvalidParameter("empty densities".into()));
    }
    let floor = 1e-12 * rmax;
    let rho: Vec<f64> = rho.iter().map(|&r| r.max(floor)).collect();
    // face transmissibilities: flux across a face = w (u_i - u_j)
    let wq: Vec<f64> = (0..(nq - 1) * np)
        .map(|k| {
            let (i, j) = (k / np, k % np);
            0.5 * (rho[i * np + j] + rho[(i + 1) * np + j]) * hp / hq
        })
        .collect();
    let wp: Vec<f64> = (0..nq * (np - 1))
        .map(|k| {
            let (i, j) = (k / (np - 1), k % (np - 1));
            0.5 * (rho[i * np + j] + rho[i * np + j + 1]) * hq / hp
        })
        .collect();
    let mut diag = vec![0.0; nc];
    for i in 0..nq - 1 {
        for j in 0..np {
            let w = wq[i * np + j];
            diag[i * np + j] += w;
            diag[(i + 1) * np + j] += w;
        }
    }
    for i in 0..nq {
        for j in 0..np - 1 {
            let w = wp[i * (np - 1) + j];
            diag[i * np + j] += w;
            diag[i * np + j + 1] += w;
        }
    }
    let apply = |u: &[f64], out: &mut [f64]| {
        for k in 0..nc {
            out[k] = diag[k] * u[k];
        }
        for i in 0..nq - 1 {
            for j in 0..np {
                let w = wq[i * np + j];
                let (a, b) = (i * np + j, (i + 1) * np + j);
                out[a] -= w * u[b];
                out[b] -= w * u[a];
            }
        }
        for i in 0..nq {
            for j in 0..np - 1 {
                let w = wp[i * (np - 1) + j];
                let (a, b) = (i * np + j, i * np + j + 1);
                out[a] -= w * u[b];
                out[b] -= w * u[a];
            }
        }
    };
    let mut rhs: Vec<f64> = f.iter().zip(g).map(|(a, b)| b - a).collect();
    let mean = rhs.iter().sum::<f64>() / nc as f64;
    rhs.iter_mut().for_each(|r| *r -= mean);
    let bnorm = rhs.iter().map(|r| r * r).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok(LinearizedReport { w2: 0.0, cg_iterations: 0, relative_residual: 0.0 });
    }
    // preconditioned CG on the singular (constant-kernel) system, rhs orthogonal to 1
    let mut u = vec![0.0; nc];
    let mut r = rhs.clone();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(a, d)| a / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; nc];
    let max_iter = 20 * nc;
    let mut it = 0;
    let mut rel = 1.0;
    while it < max_iter {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        let alpha = rz / pap;
        for k in 0..nc {
            u[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        it += 1;
        rel = r.iter().map(|x| x * x).sum::<f64>().sqrt() / bnorm;
        if rel < 1e-11 {
            break;
        }
        for k in 0..nc {
            z[k] = r[k] / diag[k];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..nc {
            p[k] = z[k] + beta * p[k];
        }
    }
    if rel > 1e-6 {
        return Err(Error::Numerical(format!("conjugate gradients stalled at residual {rel:e}")));
    }
    let w2sq: f64 = u.iter().zip(&rhs).map(|(a, b)| a * b).sum();
    Ok(LinearizedReport { w2: w2sq.max(0.0).sqrt(), cg_iterations: it, relative_residual: rel })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss_cells(xs: &[f64], m: [f64; 2], s: [[f64; 2]; 2], h: f64) -> Vec<f64> {
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        let inv = [[s[1][1] / det, -s[0][1] / det], [-s[1][0] / det, s[0][0] / det]];
        let mut v = Vec::new();
        for &x in xs {
            for &y in xs {
                let d = [x - m[0], y - m[1]];
                let q = d[0] * (inv[0][0] * d[0] + inv[0][1] * d[1]) + d[1] * (inv[1][0] * d[0] + inv[1][1] * d[1]);
                v.push((-q / 2.0).exp() * h * h);
            }
        }
        let t: f64 = v.iter().sum();
        v.iter().map(|x| x / t).collect()
    }

    #[test]
    fn translation_of_gaussian() {
        // pure translation by e: W2 = |e|
        let n = 96;
        let half = 6.0;
        let h = 2.0 * half / n as f64;
        let xs: Vec<f64> = (0..n).map(|i| -half + (i as f64 + 0.5) * h).collect();
        let s = [[1.0, 0.2], [0.2, 0.8]];
        let f = gauss_cells(&xs, [0.0, 0.0], s, h);
        let g = gauss_cells(&xs, [0.03, -0.04], s, h);
        let rep = w2_grid_linearized(&f, &g, n, n, h, h).unwrap();
        assert!((rep.w2 / 0.05 - 1.0).abs() < 5e-3, "{}", rep.w2);
    }
}
