//! Experiment bodies, grouped by the kind of computation they drive.

pub mod classical;
pub mod closed_forms;
pub mod duality;
pub mod dynamics;

use qwass::qot::TransportResult;
use qwass::quantize::PhaseMeasure;
use serde_json::{json, Value};

/// Fock size for coherent states supported in `m`: mean occupation `|z|^2 / 2 hbar`
/// plus eight Poisson standard deviations, and at least `floor`.
pub fn modes_for(hbar: f64, m: &PhaseMeasure, floor: usize) -> usize {
    let nbar = m.max_radius().powi(2) / (2.0 * hbar);
    ((nbar + 8.0 * nbar.sqrt() + 8.0).ceil() as usize).max(floor)
}

/// `n_modes` parameter, with `0` meaning "pick from the support".
pub fn modes_or_auto(n: usize, hbar: f64, m: &PhaseMeasure) -> usize {
    if n == 0 {
        modes_for(hbar, m, 8)
    } else {
        n
    }
}

/// Solver summary for the JSON details; the residual history only when traced.
pub fn solve_details(r: &TransportResult) -> Value {
    let mut v = json!({
        "value": r.value,
        "dual_value": r.dual_value,
        "relative_gap": r.relative_gap,
        "iterations": r.iterations,
        "converged": r.converged,
        "marginal_residual": r.marginal_residual,
        "certificate_margin": r.certificate.margin(),
        "certificate_repair": r.certificate.repair(),
        "floor": r.floor,
    });
    if !r.history.is_empty() {
        v["history"] = json!(r.history);
    }
    v
}

pub fn points_json(m: &PhaseMeasure) -> Value {
    json!({ "points": m.points, "weights": m.weights })
}
