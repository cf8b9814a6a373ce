//! Whitelisted function catalog exposed to the agent.

pub mod math;
mod registry;

pub use registry::{
    FunctionSpec, ParamKind, ParamSpec, Registry, ToolCall, ToolError, ToolResult, ToolStatus, NOT_CONFIGURED,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ehr::Store;
    use serde_json::{json, Map, Value};
    use proptest::prelude::*;
    use std::path::PathBuf;

    fn store() -> Store {
        Store::load(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/store")).unwrap()
    }

    fn call(name: &str, args: Value) -> ToolCall {
        let Value::Object(args) = args else { panic!() };
        ToolCall {
            call_id: "c1".into(),
            name: name.into(),
            args,
        }
    }

    #[test]
    fn catalog_contents() {
        let reg = Registry::standard();
        let names: Vec<&str> = reg.list_specs().iter().map(|s| s.name.as_str()).collect();
        for expected in [
            "get_patient_details",
            "get_patient_clinical_notes",
            "add",
            "subtract",
            "multiply",
            "divide",
            "get_pstar_data",
            "pubmed_search",
            "get_ctcae_details_by_ae_code",
            "send_dicoms_to_server",
            "get_list_of_clinical_trials",
            "get_patient_population",
        ] {
            assert!(names.contains(&expected), "{expected} missing");
        }
        let mut unique = names.clone();
        unique.sort();
        unique.dedup();
        assert_eq!(unique.len(), names.len());
        assert!(Registry::empty().list_specs().is_empty());
    }

    #[test]
    fn note_type_enum_lists_values() {
        let reg = Registry::standard();
        let notes = reg
            .list_specs()
            .iter()
            .find(|s| s.name == "get_patient_clinical_notes")
            .unwrap();
        let nt = notes.params.iter().find(|p| p.name == "note_type").unwrap();
        let ParamKind::Enum { values } = &nt.kind else { panic!() };
        assert_eq!(
            values,
            &["radiology", "pathology", "surgery", "radiation_oncology", "ent", "urology", "other"]
        );
        let wire = notes.to_wire();
        assert_eq!(wire["function"]["parameters"]["required"], json!(["patient_id"]));
    }

    #[test]
    fn math_dispatch() {
        let reg = Registry::standard();
        let s = Store::default();
        let res = reg.dispatch(&call("add", json!({"a": 2, "b": 3})), &s).unwrap();
        assert_eq!(res.status, ToolStatus::Ok);
        assert_eq!(res.body, "5");
        let res = reg.dispatch(&call("divide", json!({"a": "1", "b": 8})), &s).unwrap();
        assert_eq!(res.body, "0.125");
        assert_eq!(
            reg.dispatch(&call("divide", json!({"a": 1, "b": 0})), &s),
            Err(ToolError::DivisionByZero)
        );
    }

    #[test]
    fn stubs_fail_loudly() {
        let reg = Registry::standard();
        let res = reg
            .dispatch(&call("get_pstar_data", json!({"material": "WATER"})), &Store::default())
            .unwrap();
        assert_eq!(res.status, ToolStatus::Error);
        assert!(res.body.contains(NOT_CONFIGURED));
    }

    #[test]
    fn details_round_trip() {
        let reg = Registry::standard();
        let res = reg
            .dispatch(&call("get_patient_details", json!({"patient_id": "P0001"})), &store())
            .unwrap();
        assert_eq!(res.records_count, 1);

        let store = store();
        let d = &store.patient("P0001").unwrap().demographics;
        for (k, v) in [
            ("patient_id", d.patient_id.as_str()),
            ("first_name", &d.first_name),
            ("last_name", &d.last_name),
            ("sex", d.sex.as_str()),
            ("race", &d.race),
            ("ethnicity", &d.ethnicity),
        ] {
            assert!(res.body.contains(&format!("{k}: {v}\n")), "{k}");
        }
    }

    #[test]
    fn argument_validation_errors() {
        let reg = Registry::standard();
        let s = store();
        let cases = [
            ("get_patient_details", json!({})),
            ("get_patient_details", json!({"patient_id": "P0001", "extra": 1})),
            ("get_patient_clinical_notes", json!({"patient_id": "P0001", "note_type": "dermatology"})),
            ("get_patient_clinical_notes", json!({"patient_id": "P0001", "date_minimum": "03/01/2018"})),
            ("add", json!({"a": "two", "b": 1})),
            ("add", json!({"a": [1], "b": 1})),
        ];
        for (name, args) in cases {
            let err = reg.dispatch(&call(name, args.clone()), &s).unwrap_err();
            assert!(matches!(err, ToolError::ArgumentValidation { .. }), "{name} {args}: {err:?}");
        }
    }

    #[test]
    fn enum_values_are_case_insensitive() {
        let reg = Registry::standard();
        let res = reg
            .dispatch(
                &call("get_patient_clinical_notes", json!({"patient_id": "P0001", "note_type": "ENT"})),
                &store(),
            )
            .unwrap();
        assert_eq!(res.records_count, 1);
    }

    #[test]
    fn unknown_patient_passes_through() {
        let reg = Registry::standard();
        let err = reg
            .dispatch(&call("get_patient_details", json!({"patient_id": "nobody"})), &store())
            .unwrap_err();
        assert_eq!(err, ToolError::UnknownPatient("nobody".into()));
        let failed = ToolResult::failure("c1", &err);
        assert!(failed.body.contains("unknown_patient"));
    }

    #[test]
    fn unknown_function() {
        let reg = Registry::standard();
        let err = reg
            .dispatch(&call("rm_rf", Value::Object(Map::new())), &store())
            .unwrap_err();
        assert_eq!(err, ToolError::UnknownFunction("rm_rf".into()));
    }

    fn json_value() -> impl Strategy<Value = Value> {
        prop_oneof![
            Just(Value::Null),
            any::<bool>().prop_map(Value::from),
            any::<i64>().prop_map(Value::from),
            "[a-zA-Z0-9 ./-]{0,12}".prop_map(Value::from),
            Just(json!("P0001")),
            Just(json!("2018-03-01")),
            Just(json!("ent")),
        ]
    }

    // fixed-point text with `scale` decimals
    fn fixed(v: i128, scale: u32) -> String {
        let p = 10i128.pow(scale);
        let sign = if v < 0 { "-" } else { "" };
        let (i, f) = (v.abs() / p, v.abs() % p);
        if f == 0 {
            return format!("{sign}{i}");
        }
        let f = format!("{f:0width$}", width = scale as usize);
        format!("{sign}{i}.{}", f.trim_end_matches('0'))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn unlisted_names_are_rejected(name in "[a-z_]{1,24}") {
            let reg = Registry::standard();
            prop_assume!(!reg.contains(&name));
            let err = reg.dispatch(&call(&name, json!({})), &Store::default()).unwrap_err();
            prop_assert_eq!(err, ToolError::UnknownFunction(name));
        }

        #[test]
        fn dispatch_is_total(
            idx in 0usize..64,
            args in proptest::collection::btree_map(
                prop_oneof![Just("patient_id".to_string()), Just("a".to_string()), Just("b".to_string()),
                    Just("note_type".to_string()), Just("date_minimum".to_string()), "[a-z]{1,6}"],
                json_value(),
                0..5,
            ),
        ) {
            let reg = Registry::standard();
            let specs = reg.list_specs();
            let name = specs[idx % specs.len()].name.clone();
            let args: Map<String, Value> = args.into_iter().collect();
            let c = ToolCall { call_id: "c".into(), name, args };
            match reg.dispatch(&c, &store()) {
                Ok(res) => prop_assert!(!res.body.is_empty() || res.records_count == 0),
                Err(ToolError::UnknownFunction(_)) => prop_assert!(false, "listed function rejected"),
                Err(_) => {}
            }
        }

        #[test]
        fn integer_math_matches_i128(a in -999_999i64..=999_999, b in -999_999i64..=999_999) {
            let reg = Registry::standard();
            let s = Store::default();
            let run = |op: &str| reg.dispatch(&call(op, json!({"a": a, "b": b})), &s).map(|r| r.body);
            let (a, b) = (a as i128, b as i128);
            prop_assert_eq!(run("add").unwrap(), (a + b).to_string());
            prop_assert_eq!(run("subtract").unwrap(), (a - b).to_string());
            prop_assert_eq!(run("multiply").unwrap(), (a * b).to_string());
        }

        #[test]
        fn decimal_math_matches_fixed_point(a in -99_999_999i64..=99_999_999, b in -99_999_999i64..=99_999_999) {
            let reg = Registry::standard();
            let s = Store::default();
            let (ta, tb) = (fixed(a as i128, 2), fixed(b as i128, 2));
            let run = |op: &str| reg.dispatch(&call(op, json!({"a": ta, "b": tb})), &s).map(|r| r.body);
            let (a, b) = (a as i128, b as i128);
            prop_assert_eq!(run("add").unwrap(), fixed(a + b, 2));
            prop_assert_eq!(run("subtract").unwrap(), fixed(a - b, 2));
            // a*b has at most 12 significant digits only when small enough
            if (a * b).abs() < 1_000_000_000_000 {
                prop_assert_eq!(run("multiply").unwrap(), fixed(a * b, 4));
            }
        }

        #[test]
        fn terminating_division_is_exact(a in -999_999i64..=999_999, i in 0u32..5, j in 0u32..5) {
            let reg = Registry::standard();
            let b = 2i128.pow(i) * 5i128.pow(j);
            let res = reg
                .dispatch(&call("divide", json!({"a": a, "b": b as i64})), &Store::default())
                .unwrap();
            let scaled = a as i128 * 10_000 / b;
            prop_assert_eq!(res.body, fixed(scaled, 4));
        }
    }
}
