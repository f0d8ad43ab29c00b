//! Quantization identities and classical transport checks.

use crate::catalog::{Context, Outcome};
use crate::config::{ParamSpec, Params};
use crate::record::Check;
use faer::Mat;
use qwass::classical_ot::{w2_1d_quantile, w2_discrete, w2_gaussian, w2_points};
use qwass::densop::DensityOperator;
use qwass::fock::FockBasis;
use qwass::linalg;
use qwass::quantize::{husimi, plancherel_hs2, projector, toeplitz, wigner, PhaseGrid, PhaseMeasure};
use qwass::rng::{stream, Stream};
use qwass::Result;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;
use std::f64::consts::PI;

pub const QUANTIZATION: &[ParamSpec] = &[
    ParamSpec::num("hbar", 0.5, 1e-2, 10.0, "semiclassical parameter"),
    ParamSpec::int("n_modes", 12, 2, 48, "Fock modes"),
    ParamSpec::int("husimi_cells", 128, 16, 1024, "Husimi grid cells per axis"),
    ParamSpec::int("wigner_cells", 96, 16, 512, "Wigner grid cells per axis"),
    ParamSpec::num("wigner_half", 5.0, 0.5, 100.0, "half-width of the Wigner grid"),
];

pub fn quantization(p: &Params, ctx: &Context) -> Result<Outcome> {
    let hbar = p.num("hbar");
    let n = p.int("n_modes");
    let basis = FockBasis::new(hbar, n)?;
    let nf = n as f64;
    let half = (2.0 * hbar * (nf + 8.0 * nf.sqrt() + 8.0)).sqrt() + 2.0 * hbar.sqrt();
    let grid = PhaseGrid::square([0.0, 0.0], half, p.int("husimi_cells"));

    let mut rng = stream(ctx.seed, Stream::RandomStates);
    let random = DensityOperator::random(n, n, &mut rng)?;
    let mass_random = husimi(&basis, &random.matrix, &grid).integral();
    let z = [0.3, -0.2];
    let coherent = toeplitz(&basis, &PhaseMeasure::dirac(z[0], z[1]));
    let hc = husimi(&basis, &coherent.matrix, &grid);
    let (mean, cov) = hc.moments();

    let e1 = DensityOperator::pure(&basis.basis_vector(1).coeffs);
    let origin = PhaseGrid::new((0.0, 0.0), (0.0, 0.0), 1, 1);
    let w00 = wigner(&basis, &e1.matrix, &origin).values[0];

    let mix = toeplitz(&basis, &PhaseMeasure::uniform(vec![[0.5, 0.0], [-0.3, 0.4]]));
    let r = linalg::add(&linalg::scale(&mix.matrix, 0.7), &linalg::scale(&projector(&basis.basis_vector(2).coeffs), 0.3));
    let wgrid = PhaseGrid::square([0.0, 0.0], p.num("wigner_half"), p.int("wigner_cells"));
    let w = wigner(&basis, &r, &wgrid);
    let hs2 = linalg::inner_re(&r, &r);
    let planch = plancherel_hs2(&w, hbar);

    let checks = vec![
        Check::within("husimi-mass-random", mass_random, 1.0, 1e-6),
        Check::within("husimi-mass-coherent", hc.integral(), 1.0, 1e-6),
        Check::within("coherent-mean-q", mean[0], z[0], 1e-6),
        Check::within("coherent-mean-p", mean[1], z[1], 1e-6),
        Check::within("coherent-variance-q", cov[0][0], hbar, 0.02 * hbar),
        Check::within("coherent-variance-p", cov[1][1], hbar, 0.02 * hbar),
        Check::below("wigner-first-excited-at-origin", w00, 0.0, 0.0),
        Check::within("wigner-first-excited-value", w00, -1.0 / (PI * hbar), 1e-8 / (PI * hbar)),
        Check::within("plancherel", planch, hs2, 1e-4 * hs2),
    ];
    Ok(Outcome {
        checks,
        converged: true,
        details: json!({
            "husimi_half_width": half,
            "coherent_center": z,
            "coherent_covariance": cov,
            "wigner_origin": w00,
            "hs_norm_sq": hs2,
            "plancherel_hs_norm_sq": planch,
            "wigner_integral": w.integral(),
        }),
    })
}

pub const CLASSICAL_OT: &[ParamSpec] = &[
    ParamSpec::int("samples", 200, 2, 100_000, "samples per Gaussian"),
    ParamSpec::int("replicates", 20, 2, 10_000, "independent sample sets"),
    ParamSpec::num("m1", 0.0, -100.0, 100.0, "mean of the first Gaussian"),
    ParamSpec::num("s1", 1.0, 1e-6, 100.0, "standard deviation of the first Gaussian"),
    ParamSpec::num("m2", 1.0, -100.0, 100.0, "mean of the second Gaussian"),
    ParamSpec::num("s2", 0.5, 1e-6, 100.0, "standard deviation of the second Gaussian"),
    ParamSpec::int("quantile_sets", 20, 1, 10_000, "random equal-weight supports for the quantile check"),
    ParamSpec::int("triples", 50, 1, 10_000, "random triples for the triangle inequality"),
];

fn column(xs: &[f64]) -> Vec<Vec<f64>> {
    xs.iter().map(|&x| vec![x]).collect()
}

fn random_measure(rng: &mut impl Rng) -> Result<PhaseMeasure> {
    let k = rng.random_range(3..=8);
    let points = (0..k).map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
    let weights = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    PhaseMeasure::normalized(points, weights)
}

pub fn classical_ot(p: &Params, ctx: &Context) -> Result<Outcome> {
    let mut rng = stream(ctx.seed, Stream::Samples);
    let (m1, s1, m2, s2) = (p.num("m1"), p.num("s1"), p.num("m2"), p.num("s2"));
    let exact = w2_gaussian(&[m1], &Mat::from_fn(1, 1, |_, _| s1 * s1), &[m2], &Mat::from_fn(1, 1, |_, _| s2 * s2))?;
    let n = p.int("samples");
    let uniform = vec![1.0 / n as f64; n];
    let (g1, g2) = (Normal::new(m1, s1).expect("positive sd"), Normal::new(m2, s2).expect("positive sd"));
    let mut estimates = Vec::new();
    for _ in 0..p.int("replicates") {
        let xs: Vec<f64> = (0..n).map(|_| g1.sample(&mut rng)).collect();
        let ys: Vec<f64> = (0..n).map(|_| g2.sample(&mut rng)).collect();
        estimates.push(w2_points(&column(&xs), &uniform, &column(&ys), &uniform)?.w2());
    }
    let r = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / r;
    let sd = (estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt();
    let se = sd / r.sqrt();

    let mut checks = vec![Check::within("gaussian-lp-vs-closed-form", mean, exact, 3.0 * se)];

    let mut worst_quantile: f64 = 0.0;
    for _ in 0..p.int("quantile_sets") {
        let k = rng.random_range(5..=50);
        let xs: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
        let ys: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..4.0)).collect();
        let w = vec![1.0 / k as f64; k];
        let lp = w2_points(&column(&xs), &w, &column(&ys), &w)?.w2();
        worst_quantile = worst_quantile.max((w2_1d_quantile(&xs, &ys)? - lp).abs());
    }
    checks.push(Check::at_most("quantile-vs-lp", worst_quantile, 0.0, 1e-10));

    let mut tri = Vec::new();
    for k in 0..p.int("triples") {
        let (a, b, c) = (random_measure(&mut rng)?, random_measure(&mut rng)?, random_measure(&mut rng)?);
        let (ab, bc, ac) = (w2_discrete(&a, &b)?.0, w2_discrete(&b, &c)?.0, w2_discrete(&a, &c)?.0);
        checks.push(Check::at_most(format!("triangle-{k}"), ac, ab + bc, 1e-10));
        tri.push([ab, bc, ac]);
    }
    Ok(Outcome {
        checks,
        converged: true,
        details: json!({
            "gaussian": { "closed_form": exact, "lp_mean": mean, "lp_sd": sd, "standard_error": se, "estimates": estimates },
            "quantile_worst_difference": worst_quantile,
            "triangles": tri,
        }),
    })
}
