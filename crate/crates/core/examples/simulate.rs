//! Integrate the action variable z for a fixed trajectory.
use herglotz::dynamics::integrate_z;
use herglotz::problem::{make_grid, HerglotzProblem, StateSamples};

fn main() {
    let problem =
        HerglotzProblem::parse(1, 1, (0.0, 2.0, 1.0), 1.0, "xt0*z", &["1"]).expect("valid problem");
    for h in [0.1, 0.05, 0.01] {
        let grid = make_grid(0.0, 2.0, 1.0, h).expect("grid");
        let x = StateSamples::admissible(&problem, &grid, |_| vec![1.0]);
        let pair = integrate_z(&problem, &grid, &x).expect("integration");
        let exact = 2f64.exp();
        println!(
            "h = {h:<5} z(b) = {:?}  error = {:.3e}",
            pair.z_end(),
            (pair.z_end() - exact).abs()
        );
    }
}
