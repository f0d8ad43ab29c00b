//! Result records: one flat CSV row per check and a nested JSON summary per run.
//!
//! CSV columns: `experiment, check, params, value, bound, tolerance, relation, passed,
//! runtime_s`. `passed` is recomputable from `value`, `bound`, `tolerance` and
//! `relation` alone, which is what `verify` does.

use serde::{Deserialize, Serialize};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// `value <= bound + tolerance`
    AtMost,
    /// `value >= bound - tolerance`
    AtLeast,
    /// `|value - bound| <= tolerance`
    Within,
    /// `value + tolerance < bound`
    Below,
}

impl Relation {
    pub fn holds(self, value: f64, bound: f64, tolerance: f64) -> bool {
        match self {
            Relation::AtMost => value <= bound + tolerance,
            Relation::AtLeast => value >= bound - tolerance,
            Relation::Within => (value - bound).abs() <= tolerance,
            Relation::Below => value + tolerance < bound,
        }
    }
}

/// One asserted comparison. NaN values fail every relation.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub relation: Relation,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, bound, tolerance, relation: Relation::AtMost }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, bound, tolerance, relation: Relation::AtLeast }
    }

    pub fn within(name: impl Into<String>, value: f64, bound: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, bound, tolerance, relation: Relation::Within }
    }

    pub fn below(name: impl Into<String>, value: f64, bound: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, bound, tolerance, relation: Relation::Below }
    }

    /// Boolean property recorded as `value in {0, 1}` against bound 1.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Check::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0, 0.0)
    }

    pub fn passed(&self) -> bool {
        self.relation.holds(self.value, self.bound, self.tolerance)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub experiment: String,
    pub check: String,
    pub params: String,
    pub value: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub passed: bool,
    pub runtime_s: f64,
}

impl Record {
    pub fn recomputed(&self) -> bool {
        self.relation.holds(self.value, self.bound, self.tolerance)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub experiment: String,
    pub claim: String,
    pub seed: u64,
    pub params: crate::config::Params,
    pub converged: bool,
    pub passed: bool,
    pub runtime_s: f64,
    pub checks: Vec<Record>,
    pub details: serde_json::Value,
}

impl Summary {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Record> {
        self.checks.iter().filter(|r| !r.passed)
    }
}

/// Writes `<experiment>.csv` and `<experiment>.json` into `dir`.
pub fn write_outputs(dir: &Path, s: &Summary) -> io::Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{}.csv", s.experiment));
    let json_path = dir.join(format!("{}.json", s.experiment));
    let mut w = csv::Writer::from_path(&csv_path)?;
    for r in &s.checks {
        w.serialize(r)?;
    }
    w.flush()?;
    fs::write(&json_path, serde_json::to_string_pretty(s)? + "\n")?;
    Ok((csv_path, json_path))
}

pub fn read_csv(path: &Path) -> Result<Vec<Record>, csv::Error> {
    csv::Reader::from_path(path)?.deserialize().collect()
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub rows: usize,
    /// Rows whose stored `passed` disagrees with the recomputed one.
    pub inconsistent: Vec<Record>,
    /// Rows that fail on recomputation.
    pub failing: Vec<Record>,
}

impl VerifyReport {
    pub fn consistent(&self) -> bool {
        self.inconsistent.is_empty()
    }
}

pub fn verify(records: &[Record]) -> VerifyReport {
    VerifyReport {
        rows: records.len(),
        inconsistent: records.iter().filter(|r| r.recomputed() != r.passed).cloned().collect(),
        failing: records.iter().filter(|r| !r.recomputed()).cloned().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations() {
        assert!(Relation::AtMost.holds(1.0, 1.0, 0.0));
        assert!(!Relation::AtMost.holds(1.1, 1.0, 0.05));
        assert!(Relation::AtLeast.holds(0.96, 1.0, 0.05));
        assert!(Relation::Within.holds(1.04, 1.0, 0.05));
        assert!(!Relation::Below.holds(1.0, 1.0, 0.0));
        assert!(Relation::Below.holds(0.9, 1.0, 0.05));
        for r in [Relation::AtMost, Relation::AtLeast, Relation::Within, Relation::Below] {
            assert!(!r.holds(f64::NAN, 1.0, 1.0));
        }
    }

    #[test]
    fn verify_flags_tampered_rows() {
        let good = Record {
            experiment: "e".into(),
            check: "c".into(),
            params: String::new(),
            value: 1.0,
            bound: 2.0,
            tolerance: 0.0,
            relation: Relation::AtMost,
            passed: true,
            runtime_s: 0.0,
        };
        let bad = Record { value: 3.0, ..good.clone() };
        let rep = verify(&[good, bad]);
        assert_eq!(rep.rows, 2);
        assert_eq!(rep.inconsistent.len(), 1);
        assert_eq!(rep.failing.len(), 1);
    }
}
