use proptest::prelude::*;
use qwass_cli::config::Params;
use qwass_cli::record::{read_csv, verify, write_outputs, Check, Record, Relation, Summary, SCHEMA_VERSION};

fn number() -> impl Strategy<Value = f64> {
    prop_oneof![
        8 => -1e6f64..1e6,
        2 => prop::num::f64::NORMAL,
        1 => Just(f64::NAN),
        1 => Just(f64::INFINITY),
        1 => Just(0.1 + 0.2),
    ]
}

fn relation() -> impl Strategy<Value = Relation> {
    prop_oneof![Just(Relation::AtMost), Just(Relation::AtLeast), Just(Relation::Within), Just(Relation::Below)]
}

fn summary(checks: Vec<Check>) -> Summary {
    let records = checks
        .iter()
        .map(|c| Record {
            experiment: "prop".into(),
            check: c.name.clone(),
            params: "a=1;b=0.5 0.25".into(),
            value: c.value,
            bound: c.bound,
            tolerance: c.tolerance,
            relation: c.relation,
            passed: c.passed(),
            runtime_s: 0.125,
        })
        .collect::<Vec<_>>();
    Summary {
        schema_version: SCHEMA_VERSION,
        experiment: "prop".into(),
        claim: "round trip".into(),
        seed: 1,
        params: Params::defaults(&[]),
        converged: true,
        passed: records.iter().all(|r| r.passed),
        runtime_s: 0.125,
        checks: records,
        details: serde_json::Value::Null,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn stored_verdicts_survive_the_csv_round_trip(
        rows in prop::collection::vec((number(), number(), 0.0f64..10.0, relation(), any::<bool>()), 1..20)
    ) {
        let checks: Vec<Check> = rows
            .iter()
            .enumerate()
            .map(|(i, &(v, b, t, rel, edge))| {
                // put some values exactly on the tolerance boundary
                let v = if edge && b.is_finite() { b + t } else { v };
                Check { name: format!("c{i}, quoted \"name\""), value: v, bound: b, tolerance: t, relation: rel }
            })
            .collect();
        let s = summary(checks);
        let dir = tempfile::tempdir().unwrap();
        let (csv, _) = write_outputs(dir.path(), &s).unwrap();
        let back = read_csv(&csv).unwrap();
        prop_assert_eq!(back.len(), s.checks.len());
        for (a, b) in back.iter().zip(&s.checks) {
            prop_assert_eq!(&a.check, &b.check);
            prop_assert!(a.value.to_bits() == b.value.to_bits() || (a.value.is_nan() && b.value.is_nan()));
            prop_assert_eq!(a.bound.to_bits(), b.bound.to_bits());
            prop_assert_eq!(a.tolerance.to_bits(), b.tolerance.to_bits());
            prop_assert_eq!(a.passed, b.passed);
        }
        let rep = verify(&back);
        prop_assert!(rep.consistent());
        prop_assert_eq!(rep.failing.len(), s.checks.iter().filter(|r| !r.passed).count());
    }
}
