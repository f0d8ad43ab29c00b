//! Duality, triangle inequalities and ground-state transport.

use super::{points_json, solve_details};
use crate::catalog::{Context, Outcome};
use crate::config::{ParamSpec, Params};
use crate::record::Check;
use qwass::densop::{norms, DensityOperator};
use qwass::fock::FockBasis;
use qwass::linalg::{self, CMat, C64};
use qwass::qot::audit::{husimi_lower_bound, triangle_audit, State, TriangleKind};
use qwass::qot::transport::{ground_state_transport as transport, legendre_gradient_check};
use qwass::qot::{dd_cq, dd_qq, CostOperators};
use qwass::quantize::{toeplitz, PhaseGrid, PhaseMeasure};
use qwass::rng::{stream, Stream};
use qwass::Result;
use rand::Rng;
use serde_json::json;

const SOLVER_TOL: ParamSpec = ParamSpec::num("solver_tol", 1e-6, 1e-12, 1e-2, "SDP stopping tolerance");

pub const DUALITY: &[ParamSpec] = &[
    ParamSpec::int("pairs", 20, 1, 1000, "number of random pairs"),
    ParamSpec::int("n_modes", 16, 2, 32, "Fock modes"),
    ParamSpec::int("rank", 3, 1, 32, "rank of the random density operators"),
    ParamSpec::num("hbar", 0.5, 1e-3, 10.0, "semiclassical parameter"),
    ParamSpec::num("margin_rel", 1e-8, 0.0, 1.0, "certificate margin must exceed -margin_rel |C|"),
    ParamSpec::num("max_gap", 1e-4, 0.0, 1.0, "largest admissible relative duality gap"),
    SOLVER_TOL,
];

/// Random pairs of Ginibre density operators; each certificate must be feasible up to
/// `margin_rel |C|` and close the gap.
pub fn duality(p: &Params, ctx: &Context) -> Result<Outcome> {
    let n = p.int("n_modes");
    let basis = FockBasis::new(p.num("hbar"), n)?;
    let c_norm = norms(&CostOperators::new(&basis, 1.0).qq()).op_norm;
    let opts = ctx.solver(p.num("solver_tol"));
    let mut rng = stream(ctx.seed, Stream::RandomStates);
    let mut checks = Vec::new();
    let mut runs = Vec::new();
    let mut converged = true;
    for k in 0..p.int("pairs") {
        let r = DensityOperator::random(n, p.int("rank"), &mut rng)?;
        let s = DensityOperator::random(n, p.int("rank"), &mut rng)?;
        let res = dd_qq(&basis, &r, &s, 1.0, &opts)?;
        converged &= res.converged;
        checks.push(Check::at_least(format!("pair-{k}-margin"), res.certificate.margin(), -p.num("margin_rel") * c_norm, 0.0));
        checks.push(Check::at_most(format!("pair-{k}-gap"), res.relative_gap.abs(), p.num("max_gap"), 0.0));
        runs.push(solve_details(&res));
    }
    Ok(Outcome { checks, converged, details: json!({ "cost_norm": c_norm, "runs": runs }) })
}

pub const TRIANGLE: &[ParamSpec] = &[
    ParamSpec::num("hbar", 0.5, 1e-3, 10.0, "semiclassical parameter"),
    ParamSpec::int("n_modes", 6, 2, 16, "Fock modes"),
    ParamSpec::int("restricted", 10, 0, 1000, "triples with classical middle or a pure member"),
    ParamSpec::int("generic", 10, 0, 1000, "triples of mixed density operators"),
    ParamSpec::int("lower_bound_pairs", 10, 0, 1000, "pairs for the Husimi lower bound"),
    ParamSpec::int("husimi_cells", 12, 4, 64, "Husimi grid cells per axis"),
    ParamSpec::num("tol", 1e-6, 0.0, 1.0, "allowance on the distance inequalities"),
    SOLVER_TOL,
];

fn random_measure(rng: &mut impl Rng, k: usize, radius: f64) -> Result<PhaseMeasure> {
    let points = (0..k).map(|_| [rng.random_range(-radius..radius), rng.random_range(-radius..radius)]).collect();
    let weights = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    PhaseMeasure::normalized(points, weights)
}

fn random_state(rng: &mut impl Rng, n: usize, rank: usize) -> Result<State> {
    Ok(State::Quantum(DensityOperator::random(n, rank, rng)?))
}

fn kind_name(k: TriangleKind) -> &'static str {
    match k {
        TriangleKind::Restricted => "restricted",
        TriangleKind::Generalized => "generalized",
    }
}

pub fn triangle(p: &Params, ctx: &Context) -> Result<Outcome> {
    let n = p.int("n_modes");
    let basis = FockBasis::new(p.num("hbar"), n)?;
    let opts = ctx.solver(p.num("solver_tol"));
    let tol = p.num("tol");
    let mut rng = stream(ctx.seed, Stream::Triangles);
    let mut checks = Vec::new();
    let mut reports = Vec::new();
    for k in 0..p.int("restricted") {
        // alternate: classical middle between quantum ends, then a pure end
        let (a, b, c) = if k % 2 == 0 {
            let mid = State::Classical(random_measure(&mut rng, 3, 1.0)?);
            (random_state(&mut rng, n, n)?, mid, random_state(&mut rng, n, n)?)
        } else {
            (random_state(&mut rng, n, 1)?, random_state(&mut rng, n, n)?, random_state(&mut rng, n, n)?)
        };
        let rep = triangle_audit(&basis, &a, &b, &c, &opts, tol)?;
        checks.push(Check::holds(format!("restricted-{k}-kind"), rep.kind == TriangleKind::Restricted));
        checks.push(Check::at_most(format!("restricted-{k}-excess"), rep.plain_excess, 0.0, tol));
        reports.push(json!({ "kind": kind_name(rep.kind), "report": rep }));
    }
    for k in 0..p.int("generic") {
        let a = random_state(&mut rng, n, n)?;
        let b = random_state(&mut rng, n, n)?;
        let c = random_state(&mut rng, n, n)?;
        let rep = triangle_audit(&basis, &a, &b, &c, &opts, tol)?;
        checks.push(Check::holds(format!("generic-{k}-kind"), rep.kind == TriangleKind::Generalized));
        checks.push(Check::at_most(format!("generic-{k}-excess"), rep.generalized_excess, 0.0, tol));
        checks.push(Check::at_most(format!("generic-{k}-sharpened-excess"), rep.sharpened_excess, 0.0, tol));
        reports.push(json!({ "kind": kind_name(rep.kind), "report": rep }));
    }
    let half = (2.0 * basis.hbar * n as f64).sqrt() + 4.0 * basis.hbar.sqrt();
    let grid = PhaseGrid::square([0.0, 0.0], half, p.int("husimi_cells"));
    let mut lower = Vec::new();
    for k in 0..p.int("lower_bound_pairs") {
        let r = DensityOperator::random(n, n, &mut rng)?;
        let s = DensityOperator::random(n, n, &mut rng)?;
        let rep = husimi_lower_bound(&basis, &r, &s, &grid, &opts)?;
        checks.push(Check::at_most(format!("husimi-lower-{k}-excess"), rep.excess, 0.0, tol));
        lower.push(rep);
    }
    Ok(Outcome { checks, converged: true, details: json!({ "triangles": reports, "husimi_lower_bound": lower }) })
}

pub const GROUND_STATE: &[ParamSpec] = &[
    ParamSpec::num("hbar", 0.5, 1e-3, 10.0, "semiclassical parameter"),
    ParamSpec::int("n_modes", 16, 4, 64, "Fock modes"),
    ParamSpec::num("perturbation", 0.05, 0.0, 1.0, "operator norm of the random B"),
    ParamSpec::num("rel_tol", 1e-4, 0.0, 1.0, "relative tolerance on primal = dual and on the SDP value"),
    ParamSpec::num("grad_tol", 1e-3, 0.0, 1.0, "tolerance on the finite-difference gradient identity"),
    ParamSpec::num("fd_step", 1e-4, 1e-8, 1e-1, "central-difference step"),
    ParamSpec::num("solver_tol", 1e-8, 1e-12, 1e-2, "SDP stopping tolerance"),
];

fn random_hermitian(rng: &mut impl Rng, n: usize, norm: f64) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let h = linalg::hermitian_part(&g);
    let s = norms(&h).op_norm;
    linalg::scale(&h, norm / s)
}

pub fn ground_state_transport(p: &Params, ctx: &Context) -> Result<Outcome> {
    let n = p.int("n_modes");
    let hbar = p.num("hbar");
    let basis = FockBasis::new(hbar, n)?;
    let f = PhaseMeasure::new(vec![[0.5, 0.2], [-0.4, 0.1], [0.1, -0.6]], vec![0.5, 0.3, 0.2])?;
    let rel = p.num("rel_tol");

    let plain = transport(&basis, &linalg::zeros(n, n), &f, 1.0)?;
    let tf = toeplitz(&basis, &f);
    let toeplitz_defect = linalg::max_abs(&linalg::sub(&plain.operator.matrix, &tf.matrix));

    let mut rng = stream(ctx.seed, Stream::Probes);
    let b = random_hermitian(&mut rng, n, p.num("perturbation"));
    let gst = transport(&basis, &b, &f, 1.0)?;
    let sdp = dd_cq(&basis, &f, &gst.operator, 1.0, &ctx.solver(p.num("solver_tol")))?;
    let zs: Vec<[f64; 2]> = (0..9).map(|k| [-0.6 + 0.6 * (k / 3) as f64, -0.6 + 0.6 * (k % 3) as f64]).collect();
    let probes: Vec<Vec<C64>> = (0..20).map(|_| (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()).collect();
    let leg = legendre_gradient_check(&basis, &b, &zs, p.num("fd_step"), &probes)?;

    let checks = vec![
        Check::at_most("zero-b-is-toeplitz", toeplitz_defect, 0.0, 1e-8),
        Check::within("zero-b-primal", plain.primal, hbar, 1e-9),
        Check::within("zero-b-primal-dual", plain.primal, plain.dual, 1e-12),
        Check::within("primal-dual", gst.primal, gst.dual, rel * gst.primal.abs()),
        Check::within("sdp-agrees", sdp.value, gst.primal, rel * gst.primal.abs()),
        Check::at_most("gradient-identity", leg.gradient_mismatch, 0.0, p.num("grad_tol")),
        Check::at_most("legendre-attainment", leg.legendre_attainment, 0.0, 1e-8),
        Check::at_most("legendre-sup", leg.legendre_violation, 0.0, 1e-8),
    ];
    Ok(Outcome {
        checks,
        converged: sdp.converged,
        details: json!({
            "f": points_json(&f),
            "zero_b": { "primal": plain.primal, "dual": plain.dual, "toeplitz_defect": toeplitz_defect },
            "perturbed": { "primal": gst.primal, "dual": gst.dual, "a_tilde": gst.a_tilde, "min_gap": gst.min_gap },
            "sdp": solve_details(&sdp),
            "legendre": leg,
        }),
    })
}
