//! End-to-end run of every verification suite with a fixed seed.

use rewire::theory::run_suite;

#[test]
fn all_suites_pass() {
    let report = run_suite("all", 20_260_101).expect("suite run failed");
    print!("{}", report.render());
    assert!(report.all_pass(), "\n{}", report.render());
}

#[test]
fn unknown_suite_is_a_config_error() {
    assert!(run_suite("nonsense", 1).is_err());
}
