//! Propagation, splitting, observation, heat flow and mean-field experiments.

use super::points_json;
use crate::catalog::{Context, Outcome};
use crate::config::{ParamSpec, Params};
use crate::record::Check;
use qwass::dynamics::classical::{classical_splitting_study, FlowState};
use qwass::dynamics::heat::heat_contraction_audit;
use qwass::dynamics::observation::{observation_audit, observation_constant, ObservationSetup, OpenSet, Rectangle};
use qwass::dynamics::propagation::{propagation_audit, PropagationSetup};
use qwass::dynamics::splitting::{splitting_uniformity_study, SplittingSetup};
use qwass::dynamics::Potential;
use qwass::fock::FockBasis;
use qwass::meanfield::{meanfield_bound_audit, meanfield_husimi_bound, MeanFieldSetup, Sampling};
use qwass::quantize::{toeplitz, PhaseMeasure};
use qwass::rng::{stream, Stream};
use qwass::{Error, Result};
use rand::Rng;
use serde_json::json;

fn lower_sq(w2_sq: f64, slack: f64) -> f64 {
    (w2_sq.max(0.0).sqrt() - slack).max(0.0).powi(2)
}

pub const PROPAGATION: &[ParamSpec] = &[
    ParamSpec::num("hbar", 0.25, 1e-3, 10.0, "semiclassical parameter"),
    ParamSpec::int("n_modes", 16, 4, 64, "Fock modes"),
    ParamSpec::num("omega", 1.0, 1e-3, 10.0, "harmonic frequency"),
    ParamSpec::num("lambda", 1.0, 1e-3, 1e3, "position weight in the cost"),
    ParamSpec::list("times", &[0.0, 0.5, 1.0, 2.0], 0.0, 100.0, "increasing times; the first is the reference"),
    ParamSpec::num("tol", 1e-3, 0.0, 1.0, "relative slack on top of the solver tolerance"),
    ParamSpec::int("husimi_cells", 16, 4, 128, "Husimi grid cells per axis"),
    ParamSpec::num("dt_ref", 1e-3, 1e-6, 1e-1, "split-step size for non-harmonic potentials"),
    ParamSpec::num("solver_tol", 1e-6, 1e-12, 1e-2, "SDP stopping tolerance"),
];

pub fn propagation(p: &Params, ctx: &Context) -> Result<Outcome> {
    let basis = FockBasis::new(p.num("hbar"), p.int("n_modes"))?;
    let times = p.list("times").to_vec();
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("times must increase".into()));
    }
    let setup = PropagationSetup {
        f: PhaseMeasure::dirac(0.5, 0.0),
        g1: PhaseMeasure::dirac(0.0, 0.0),
        g2: PhaseMeasure::dirac(0.5, 0.3),
        potential: Potential::Harmonic { omega: p.num("omega") },
        lambda: p.num("lambda"),
        times,
        tol: p.num("tol"),
        husimi_cells: p.int("husimi_cells"),
        dt_ref: p.num("dt_ref"),
    };
    let solver_tol = p.num("solver_tol");
    let rep = propagation_audit(&basis, &setup, &ctx.solver(solver_tol))?;
    let mut checks = Vec::new();
    for (tag, rows) in [("qq", &rep.qq), ("cq", &rep.cq)] {
        for r in rows.iter().skip(1) {
            let slack = (1.0 + setup.tol + solver_tol).powi(2) * (1.0 + r.projection_loss);
            checks.push(Check::at_most(format!("{tag}-growth@t={}", r.time), r.value, r.bound, r.bound * (slack - 1.0)));
        }
    }
    for h in &rep.husimi {
        checks.push(Check::at_most(format!("husimi-cq@t={}", h.time), lower_sq(h.cq_w2_sq, h.cq_w2_slack), h.cq_bound, 0.0));
        checks.push(Check::at_most(format!("husimi-qq@t={}", h.time), lower_sq(h.qq_w2_sq, h.w2_slack), h.qq_bound, 0.0));
    }
    Ok(Outcome {
        checks,
        converged: rep.converged,
        details: json!({ "f": points_json(&setup.f), "g1": points_json(&setup.g1), "g2": points_json(&setup.g2), "report": rep }),
    })
}

pub const SPLIT_UNIFORMITY: &[ParamSpec] = &[
    ParamSpec::list("hbars", &[1.0, 0.3, 0.1, 0.03], 1e-3, 10.0, "semiclassical parameters"),
    ParamSpec::list("dts", &[0.1, 0.05, 0.025], 1e-5, 1.0, "Lie-Trotter steps; each must divide t_end"),
    ParamSpec::num("t_end", 1.0, 1e-3, 100.0, "final time"),
    ParamSpec::num("v0", 1.0, 0.0, 100.0, "V(x) = v0 cos(k x)"),
    ParamSpec::num("k", 1.0, 0.0, 100.0, "V(x) = v0 cos(k x)"),
    ParamSpec::int("points", 2048, 64, 1 << 16, "position grid points"),
    ParamSpec::num("extent", 16.0, 1.0, 1e3, "position grid length"),
    ParamSpec::int("ref_divisor", 32, 2, 1024, "reference Strang step is min(dts) / ref_divisor"),
    ParamSpec::int("husimi_cells", 96, 8, 512, "Husimi grid cells per axis"),
    ParamSpec::num("min_slope", 0.9, 0.0, 10.0, "smallest admissible error slope in dt"),
    ParamSpec::num("max_spread", 3.0, 1.0, 1e6, "largest admissible ratio of error constants across hbar"),
];

pub fn split_uniformity(p: &Params, _: &Context) -> Result<Outcome> {
    let setup = SplittingSetup {
        potential: Potential::Cosine { v0: p.num("v0"), k: p.num("k") },
        hbars: p.list("hbars").to_vec(),
        dts: p.list("dts").to_vec(),
        t_end: p.num("t_end"),
        extent: p.num("extent"),
        points: p.int("points"),
        ref_divisor: p.int("ref_divisor"),
        husimi_cells: p.int("husimi_cells"),
        ..SplittingSetup::default()
    };
    let rep = splitting_uniformity_study(&setup)?;
    let mut checks: Vec<Check> = rep
        .summaries
        .iter()
        .map(|s| Check::at_least(format!("w2-slope@hbar={}", s.hbar), s.slope, p.num("min_slope"), 0.0))
        .collect();
    checks.push(Check::at_most("constant-spread", rep.constant_spread, p.num("max_spread"), 0.0));
    checks.push(Check::holds("trace-norm-grows-as-hbar-falls", rep.trace_norm_grows));
    Ok(Outcome { checks, converged: true, details: json!({ "z0": setup.z0, "report": rep }) })
}

pub const CLASSICAL_SPLITTING: &[ParamSpec] = &[
    ParamSpec::list("dts", &[0.1, 0.05, 0.025], 1e-5, 1.0, "Lie-Trotter steps; each must divide t_end"),
    ParamSpec::num("t_end", 1.0, 1e-3, 100.0, "final time"),
    ParamSpec::num("reference_dt", 1e-4, 1e-7, 1e-2, "Verlet step of the reference flow"),
    ParamSpec::int("particles", 64, 1, 4096, "particles in the initial cloud"),
    ParamSpec::num("v0", 1.0, 0.0, 100.0, "V(x) = v0 cos(k x)"),
    ParamSpec::num("k", 1.0, 0.0, 100.0, "V(x) = v0 cos(k x)"),
    ParamSpec::num("ratio_tol", 0.4, 0.0, 2.0, "halving ratios must lie in 2 +- ratio_tol"),
];

pub fn classical_splitting(p: &Params, ctx: &Context) -> Result<Outcome> {
    let mut rng = stream(ctx.seed, Stream::Particles);
    let n = p.int("particles");
    let points: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(-1.0..1.0), 1.0 + rng.random_range(-0.5..0.5)]).collect();
    let f_in = FlowState::from_measure(&PhaseMeasure::uniform(points));
    let v = Potential::Cosine { v0: p.num("v0"), k: p.num("k") };
    let rep = classical_splitting_study(&f_in, &v, p.list("dts"), p.num("t_end"), p.num("reference_dt"))?;
    let checks = rep
        .halving_ratios
        .iter()
        .zip(rep.rows.iter().skip(1))
        .map(|(r, row)| Check::within(format!("halving-ratio@dt={}", row.dt), *r, 2.0, p.num("ratio_tol")))
        .collect();
    Ok(Outcome { checks, converged: true, details: json!({ "report": rep }) })
}

pub const OBSERVE: &[ParamSpec] = &[
    ParamSpec::num("hbar", 0.05, 1e-3, 10.0, "semiclassical parameter"),
    ParamSpec::num("delta", 0.2, 1e-6, 10.0, "widening of the observation set"),
    ParamSpec::num("horizon", 0.1, 1e-3, 100.0, "time horizon of the quantum inequality"),
    ParamSpec::num("geometry_horizon", 1.0, 1e-3, 100.0, "time horizon of the geometric constants"),
    ParamSpec::int("k_samples", 16, 2, 256, "samples per side of K"),
    ParamSpec::num("dt_obs", 1e-3, 1e-6, 1e-1, "Verlet step for the observation constant"),
    ParamSpec::int("snapshots", 200, 200, 100_000, "time quadrature intervals"),
    ParamSpec::num("dt_ref", 1e-4, 1e-7, 1e-1, "split-step size"),
    ParamSpec::num("extent", 8.0, 1.0, 1e3, "position grid length"),
    ParamSpec::int("points", 512, 64, 1 << 16, "position grid points"),
];

pub fn observe(p: &Params, _: &Context) -> Result<Outcome> {
    let k = Rectangle { x: (-0.5, 0.5), xi: (0.0, 1.0) };
    let omega = OpenSet::interval(-0.6, 0.8);
    let failing = OpenSet::interval(0.6, 2.0);
    let (m, dt_obs, tg) = (p.int("k_samples"), p.num("dt_obs"), p.num("geometry_horizon"));
    let c_good = observation_constant(&k, &omega, tg, &Potential::Zero, m, dt_obs)?;
    let c_bad = observation_constant(&k, &failing, tg, &Potential::Zero, m, dt_obs)?;
    let setup = ObservationSetup {
        k,
        omega,
        delta: p.num("delta"),
        horizon: p.num("horizon"),
        hbar: p.num("hbar"),
        z0: [0.0, 0.5],
        potential: Potential::Zero,
        k_samples: m,
        dt_obs,
        snapshots: p.int("snapshots"),
        dt_ref: p.num("dt_ref"),
        extent: p.num("extent"),
        points: p.int("points"),
    };
    let rep = observation_audit(&setup)?;
    let tol = 1e-9 * setup.horizon;
    let checks = vec![
        Check::at_least("constant-positive", c_good.value, 0.0, 0.0),
        Check::below("constant-nonzero", 0.0, c_good.value, 0.0),
        Check::within("failing-set-constant", c_bad.value, 0.0, 0.0),
        Check::below("rhs-nonvacuous", 0.0, rep.rhs, 0.0),
        Check::at_least("observation-inequality", rep.lhs, rep.rhs, tol),
    ];
    Ok(Outcome {
        checks,
        converged: true,
        details: json!({ "geometry": { "omega": c_good, "failing": c_bad }, "report": rep }),
    })
}

pub const HEAT: &[ParamSpec] = &[
    ParamSpec::num("hbar", 1.0, 1e-2, 10.0, "semiclassical parameter"),
    ParamSpec::int("n_modes", 8, 2, 24, "Fock modes"),
    ParamSpec::list("times", &[0.0, 0.1, 0.2, 0.4], 0.0, 10.0, "increasing times"),
    ParamSpec::num("tol", 1e-5, 0.0, 1.0, "relative allowance on each step"),
    ParamSpec::num("solver_tol", 1e-6, 1e-12, 1e-2, "SDP stopping tolerance"),
];

pub fn heat_contraction(p: &Params, ctx: &Context) -> Result<Outcome> {
    let basis = FockBasis::new(p.num("hbar"), p.int("n_modes"))?;
    let g1 = PhaseMeasure::dirac(0.5, 0.0);
    let g2 = PhaseMeasure::uniform(vec![[-0.5, 0.5], [-0.5, -0.5]]);
    let tol = p.num("tol");
    let rep = heat_contraction_audit(&basis, &toeplitz(&basis, &g1), &toeplitz(&basis, &g2), p.list("times"), &ctx.solver(p.num("solver_tol")), tol)?;
    let scale = rep.rows.iter().map(|r| r.value.abs()).fold(1.0, f64::max);
    let checks = rep
        .rows
        .windows(2)
        .map(|w| Check::at_most(format!("non-increasing@t={}", w[1].time), w[1].dual_value.min(w[1].value), w[0].value, tol * scale))
        .collect();
    let converged = rep.rows.iter().all(|r| r.converged);
    Ok(Outcome { checks, converged, details: json!({ "g1": points_json(&g1), "g2": points_json(&g2), "report": rep }) })
}

pub const MEANFIELD: &[ParamSpec] = &[
    ParamSpec::num("hbar", 0.25, 1e-2, 10.0, "semiclassical parameter"),
    ParamSpec::num("v0", 0.2, 0.0, 100.0, "interaction V(x) = v0 cos(k x)"),
    ParamSpec::num("k", 1.0, 0.0, 100.0, "interaction V(x) = v0 cos(k x)"),
    ParamSpec::list("times", &[0.0, 0.5], 0.0, 100.0, "increasing audit times"),
    ParamSpec::num("dt", 1e-3, 1e-6, 1e-1, "split-step size"),
    ParamSpec::num("extent", 12.0, 1.0, 1e3, "position grid length"),
    ParamSpec::int("points", 128, 32, 1024, "position grid points per particle"),
    ParamSpec::int("n_modes", 12, 2, 32, "Fock modes of the single-particle comparison"),
    ParamSpec::int("chain_modes", 3, 2, 5, "Fock modes per particle for the marginal chain"),
    ParamSpec::int("ensemble", 0, 0, 1 << 20, "Monte Carlo ensemble size; 0 enumerates the product measure"),
    ParamSpec::int("husimi_cells", 24, 4, 128, "Husimi grid cells per axis"),
    ParamSpec::num("solver_tol", 1e-7, 1e-12, 1e-2, "SDP stopping tolerance"),
];

pub fn meanfield(p: &Params, ctx: &Context) -> Result<Outcome> {
    let setup = MeanFieldSetup {
        hbar: p.num("hbar"),
        interaction: Potential::Cosine { v0: p.num("v0"), k: p.num("k") },
        times: p.list("times").to_vec(),
        dt: p.num("dt"),
        extent: p.num("extent"),
        points: p.int("points"),
        n_modes: p.int("n_modes"),
        chain_modes: p.int("chain_modes"),
        sampling: match p.int("ensemble") {
            0 => Sampling::Exhaustive,
            size => Sampling::Sampled { size, seed: ctx.seed },
        },
        husimi_cells: p.int("husimi_cells"),
        opts: ctx.solver(p.num("solver_tol")),
        ..MeanFieldSetup::default()
    };
    let rep = meanfield_bound_audit(&setup)?;
    let (d, n) = (1.0, 2usize);
    // cosine interaction: Lip(grad V) = v0 k^2, sup |grad V| = v0 k
    let (v0, kk) = (p.num("v0"), p.num("k"));
    let rate = 2.0 * (1.0 + 4.0 * (v0 * kk * kk).powi(2));
    let mut checks = vec![Check::within("rate", rep.rate, rate, 1e-12 * rate)];
    for r in &rep.rows {
        let t = r.time;
        let qq_formula = 2.0 * d * setup.hbar * (rate * t).exp() + 8.0 * v0 * kk / (n as f64 - 1.0) * ((rate * t).exp() - 1.0) / rate;
        checks.push(Check::within(format!("qq-bound-formula@t={t}"), r.qq_bound, qq_formula, 1e-12 * qq_formula));
        checks.push(Check::at_most(format!("qq@t={t}"), r.qq_value, r.qq_bound, r.tolerance));
        checks.push(Check::at_most(format!("cq@t={t}"), r.cq_value, r.cq_bound, r.tolerance));
        checks.push(Check::at_most(format!("husimi-qq@t={t}"), lower_sq(r.husimi_qq_w2_sq, r.husimi_slack), r.husimi_qq_bound, 0.0));
        checks.push(Check::at_most(format!("husimi-cq@t={t}"), lower_sq(r.husimi_cq_w2_sq, r.husimi_cq_slack), r.husimi_cq_bound, 0.0));
        checks.push(Check::at_most(format!("marginal-chain@t={t}"), r.chain_marginal, r.chain_half_joint, r.tolerance));
        checks.push(Check::below(format!("swap-defect@t={t}"), r.swap_defect, 1e-10 + r.ensemble_error, 0.0));
        if t == 0.0 {
            checks.push(Check::within("qq-exact@t=0", r.qq_value, 2.0 * d * setup.hbar, r.tolerance));
            checks.push(Check::within("cq-exact@t=0", r.cq_value, d * setup.hbar, r.tolerance));
            checks.push(Check::within("qq-bound@t=0", r.qq_bound, 2.0 * d * setup.hbar, 1e-15));
        }
    }
    checks.push(Check::at_most("hartree-trace-defect", rep.hartree_trace_defect, 0.0, 1e-10));
    checks.push(Check::at_most("vlasov-momentum-drift", rep.vlasov_momentum_drift, 0.0, 1e-8));
    let husimi: Vec<f64> = rep.rows.iter().map(|r| meanfield_husimi_bound(2.0, 1, setup.hbar, rep.rate, rep.grad_sup, n, r.time)).collect();
    let converged = rep.rows.iter().all(|r| r.converged);
    Ok(Outcome {
        checks,
        converged,
        details: json!({ "f_in": points_json(&setup.f_in), "husimi_qq_bounds": husimi, "report": rep }),
    })
}
