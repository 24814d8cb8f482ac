//! Semi-invariance check of a gauge group loaded from a problem file.
use std::path::Path;

use herglotz::dynamics::PairContext;
use herglotz::report::{load_path, state_for, test_functions};
use herglotz::symmetry::check_semi_invariance;

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/delayed_growth.json");
    let loaded = load_path(&path).expect("fixture loads");
    let group = loaded.group.as_ref().expect("fixture declares a group");
    let x = state_for(&loaded, None).expect("default trajectory");
    let ctx = PairContext::from_x(&loaded.problem, &loaded.grid, &x).expect("context");
    let report =
        check_semi_invariance(&ctx, group, &test_functions(&loaded, group)).expect("check");
    for (i, t) in report.tests.iter().enumerate() {
        println!(
            "test function {i}: EQ1 {:.2e}  EQ2 {:.2e}",
            t.max_eq1, t.max_eq2
        );
    }
    println!("semi-invariant: {}", report.passes(1e-8));
}
