//! Noether currents along the damped-oscillator extremal under time translation.
use herglotz::dynamics::{compute_multipliers, PairContext};
use herglotz::euler_lagrange::{el_residual, is_extremal_interior};
use herglotz::problem::{make_grid, HerglotzProblem, StateSamples};
use herglotz::symmetry::{
    constancy_report, noether_currents, CurrentFormula, GaugeGroup, GroupSpec, StateBinding,
};

fn main() {
    let k: f64 = 0.2;
    let w = (1.0 - k * k / 4.0).sqrt();
    let exact = |t: f64| (-k * t / 2.0).exp() * (w * t).cos();
    let problem = HerglotzProblem::parse(
        1,
        1,
        (0.0, 1.0, 0.0),
        0.0,
        "x1^2/2 - x0^2/2 - 0.2*z",
        &["1"],
    )
    .expect("problem");
    let grid = make_grid(0.0, 1.0, 0.0, 1e-3).expect("grid");
    let xs = StateSamples::admissible(&problem, &grid, |t| vec![exact(t)]);
    let ctx = PairContext::from_x(&problem, &grid, &xs).expect("context");
    let mult = compute_multipliers(&ctx).expect("multipliers");
    let verdict = is_extremal_interior(&el_residual(&ctx, &mult).expect("residuals"), 1e-3);
    let spec = GroupSpec {
        q: 0,
        d: 1,
        t: "t + p0".into(),
        x: vec!["x0".into()],
        z: "z".into(),
        f: "0".into(),
        theta: vec![vec![0.0]],
        binding: StateBinding::Shifted,
        p_test_degrees: vec![],
    };
    let group = GaugeGroup::parse(&problem, &spec).expect("group");
    for formula in [CurrentFormula::General, CurrentFormula::FirstOrder] {
        let report = noether_currents(&ctx, &group, &mult, formula).expect("currents");
        for c in constancy_report(&report, &verdict, 1e-6) {
            println!(
                "{formula:?} {}: deviation {:.3e}, constant = {}",
                c.label, c.deviation, c.constant
            );
        }
    }
}
