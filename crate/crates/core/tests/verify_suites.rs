use ddn_core::verify::{run_suite, Suite};

#[test]
fn suite_names_round_trip() {
    for s in ["props", "theorem1", "prop2", "pbpo", "all"] {
        assert_eq!(s.parse::<Suite>().unwrap().to_string(), s);
    }
    assert!("prop3".parse::<Suite>().is_err());
}

#[test]
fn theorem1_and_pbpo_suites_pass() {
    for suite in [Suite::Theorem1, Suite::Pbpo, Suite::Prop2] {
        for c in run_suite(suite) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
