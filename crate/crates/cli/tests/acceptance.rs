//! Runs every catalog experiment at its default parameters and prints one line each.
//!
//! Exits nonzero when an experiment fails that is not listed in `KNOWN_FAILURES`, or
//! when a listed one unexpectedly passes (so the list cannot go stale).

use qwass_cli::catalog::{self, Context};
use qwass_cli::config::{Params, DEFAULT_SEED};
use std::process::ExitCode;

/// Experiments whose default configuration is known not to meet its threshold, with
/// the reason. See the README for the measured values.
const KNOWN_FAILURES: &[(&str, &str)] = &[(
    "classical-limit",
    "the equal-mass pair carries an exact 2 hbar excess, so the deviation at hbar=0.05 is about 0.092 > 0.075",
)];

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let ctx = Context { seed: DEFAULT_SEED, trace: false };
    let total = catalog::catalog().len();
    let mut unexpected = 0;
    for (i, exp) in catalog::catalog().iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| exp.name.contains(f.as_str())) {
            continue;
        }
        let known = KNOWN_FAILURES.iter().find(|(n, _)| *n == exp.name).map(|(_, why)| *why);
        let params = Params::defaults(exp.params);
        let (passed, line) = match catalog::execute(exp, &params, &ctx) {
            Ok(s) => {
                let failing: Vec<&str> = s.failed_checks().map(|r| r.check.as_str()).collect();
                let note = if failing.is_empty() { String::new() } else { format!("; failing: {}", failing.join(", ")) };
                let conv = if s.converged { "" } else { "; solver did not converge" };
                (s.passed && s.converged, format!("{:.1} s, {} checks{note}{conv}", s.runtime_s, s.checks.len()))
            }
            Err(e) => (false, format!("error: {e}")),
        };
        let verdict = match (passed, known) {
            (true, None) => "PASS".to_string(),
            (false, Some(why)) => format!("FAIL (expected: {why})"),
            (false, None) => {
                unexpected += 1;
                "FAIL".to_string()
            }
            (true, Some(_)) => {
                unexpected += 1;
                "PASS (unexpected: listed as a known failure)".to_string()
            }
        };
        println!("[{:>2}/{total}] {:<24} {verdict} ({line})", i + 1, exp.name);
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} unexpected result(s)");
        ExitCode::FAILURE
    }
}
