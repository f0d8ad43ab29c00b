//! Named experiments. Each entry states the claim it reproduces in one line.

use crate::config::{ParamSpec, Params};
use crate::experiments as ex;
use crate::record::{Check, Record, Summary, SCHEMA_VERSION};
use std::time::Instant;

/// What an experiment returns before timing and flattening.
#[derive(Debug)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub converged: bool,
    pub details: serde_json::Value,
}

/// Per-run settings shared by every experiment.
#[derive(Clone, Copy, Debug)]
pub struct Context {
    pub seed: u64,
    /// Keep solver residual histories in the JSON details.
    pub trace: bool,
}

impl Context {
    pub fn solver(&self, tol: f64) -> qwass::qot::SolverOptions {
        let mut o = qwass::qot::SolverOptions::with_tol(tol);
        o.trace = self.trace;
        o
    }
}

pub type Runner = fn(&Params, &Context) -> qwass::Result<Outcome>;

pub struct Experiment {
    pub name: &'static str,
    pub claim: &'static str,
    pub params: &'static [ParamSpec],
    pub run: Runner,
}

static CATALOG: &[Experiment] = &[
    Experiment {
        name: "key-example-norms",
        claim: "two coherent projectors: |R1-R2|_2^2 = 2(1 - e^{-|z1-z2|^2/2hbar}) and |R1-R2|_1 = sqrt(2) |R1-R2|_2",
        params: ex::closed_forms::KEY_EXAMPLE,
        run: ex::closed_forms::key_example_norms,
    },
    Experiment {
        name: "self-distance",
        claim: "Toeplitz self-distances sit on the floor: d(f, T[f])^2 = d hbar and d(T[f], T[f])^2 = 2 d hbar",
        params: ex::closed_forms::SELF_DISTANCE,
        run: ex::closed_forms::self_distance,
    },
    Experiment {
        name: "equal-mass-pair",
        claim: "equal-mass two-point measures: d(T[mu], T[nu])^2 = W2(mu, nu)^2 + 2 hbar",
        params: ex::closed_forms::EQUAL_MASS,
        run: ex::closed_forms::equal_mass_pair,
    },
    Experiment {
        name: "unequal-mass-pair",
        claim: "unequal-mass two-point pair: d(T[mu], T[rho])^2 < W2(mu, rho)^2 + 2 hbar strictly",
        params: ex::closed_forms::UNEQUAL_MASS,
        run: ex::closed_forms::unequal_mass_pair,
    },
    Experiment {
        name: "duality",
        claim: "Kantorovich duality for the quantum cost: feasible certificates close the gap on random pairs",
        params: ex::duality::DUALITY,
        run: ex::duality::duality,
    },
    Experiment {
        name: "propagation",
        claim: "d_lambda between evolved states grows at most like e^{L t}, L = (lambda + Lip(grad V)/lambda)/2",
        params: ex::dynamics::PROPAGATION,
        run: ex::dynamics::propagation,
    },
    Experiment {
        name: "split-uniformity",
        claim: "Lie-Trotter error in Husimi W2 is first order in dt uniformly in hbar; the trace-norm error is not",
        params: ex::dynamics::SPLIT_UNIFORMITY,
        run: ex::dynamics::split_uniformity,
    },
    Experiment {
        name: "classical-splitting",
        claim: "classical Lie-Trotter W2 error at fixed time is first order: it halves when dt halves",
        params: ex::dynamics::CLASSICAL_SPLITTING,
        run: ex::dynamics::classical_splitting,
    },
    Experiment {
        name: "observe",
        claim: "observation constant of the classical flow and the quantum observation inequality for a coherent state",
        params: ex::dynamics::OBSERVE,
        run: ex::dynamics::observe,
    },
    Experiment {
        name: "heat-contraction",
        claim: "the quantum heat semigroup does not increase the pseudometric",
        params: ex::dynamics::HEAT,
        run: ex::dynamics::heat_contraction,
    },
    Experiment {
        name: "triangle",
        claim: "restricted and generalized (+sqrt(d hbar)) triangle inequalities and the Husimi lower bound",
        params: ex::duality::TRIANGLE,
        run: ex::duality::triangle,
    },
    Experiment {
        name: "classical-limit",
        claim: "d(T_hbar[mu], T_hbar[nu]) approaches W2(mu, nu) as hbar decreases",
        params: ex::closed_forms::CLASSICAL_LIMIT,
        run: ex::closed_forms::classical_limit,
    },
    Experiment {
        name: "ground-state-transport",
        claim: "ground-state couplings T^B[f] are optimal: primal = dual, grad a(z) = <psi_z|Z|psi_z>, B = 0 gives T[f]",
        params: ex::duality::GROUND_STATE,
        run: ex::duality::ground_state_transport,
    },
    Experiment {
        name: "meanfield",
        claim: "first marginal of the 2-body dynamics stays within 2 d hbar e^{Lt} + 8|grad V|/(N-1) (e^{Lt}-1)/L of Hartree and Vlasov",
        params: ex::dynamics::MEANFIELD,
        run: ex::dynamics::meanfield,
    },
    Experiment {
        name: "quantization",
        claim: "Husimi normalization and coherent variance, Wigner negativity, Plancherel identity",
        params: ex::classical::QUANTIZATION,
        run: ex::classical::quantization,
    },
    Experiment {
        name: "classical-ot",
        claim: "discrete W2 against the Gaussian closed form and the 1-d quantile formula; metric triangle inequality",
        params: ex::classical::CLASSICAL_OT,
        run: ex::classical::classical_ot,
    },
];

pub fn catalog() -> &'static [Experiment] {
    CATALOG
}

pub fn find(name: &str) -> Option<&'static Experiment> {
    CATALOG.iter().find(|e| e.name == name)
}

/// Runs one experiment and flattens its checks into records.
pub fn execute(exp: &Experiment, params: &Params, ctx: &Context) -> qwass::Result<Summary> {
    let start = Instant::now();
    let out = (exp.run)(params, ctx)?;
    let runtime_s = start.elapsed().as_secs_f64();
    let summary = params.summary();
    let checks: Vec<Record> = out
        .checks
        .iter()
        .map(|c| Record {
            experiment: exp.name.to_string(),
            check: c.name.clone(),
            params: summary.clone(),
            value: c.value,
            bound: c.bound,
            tolerance: c.tolerance,
            relation: c.relation,
            passed: c.passed(),
            runtime_s,
        })
        .collect();
    let passed = !checks.is_empty() && checks.iter().all(|r| r.passed);
    Ok(Summary {
        schema_version: SCHEMA_VERSION,
        experiment: exp.name.to_string(),
        claim: exp.claim.to_string(),
        seed: ctx.seed,
        params: params.clone(),
        converged: out.converged,
        passed,
        runtime_s,
        checks,
        details: out.details,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique_and_specs_are_sane() {
        for (i, e) in CATALOG.iter().enumerate() {
            assert!(CATALOG[i + 1..].iter().all(|o| o.name != e.name), "{}", e.name);
            assert!(!e.claim.is_empty());
            for s in e.params {
                assert!(s.min <= s.max, "{}.{}", e.name, s.key);
                let ok = match s.default {
                    crate::config::Default::Num(x) => x >= s.min && x <= s.max,
                    crate::config::Default::Int(k) => k as f64 >= s.min && k as f64 <= s.max,
                    crate::config::Default::List(v) => !v.is_empty() && v.iter().all(|x| *x >= s.min && *x <= s.max),
                };
                assert!(ok, "default out of range: {}.{}", e.name, s.key);
            }
        }
    }

    #[test]
    fn catalog_has_sixteen_entries() {
        assert_eq!(CATALOG.len(), 16);
    }
}
