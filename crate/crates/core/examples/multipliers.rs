//! Multipliers psi_z, phi_k and the Euler-Lagrange residuals of a damped oscillator.
use herglotz::dynamics::{compute_hamiltonian, compute_multipliers, PairContext};
use herglotz::euler_lagrange::{el_residual, is_extremal_interior};
use herglotz::problem::{make_grid, HerglotzProblem, StateSamples};

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
    for (label, x) in [
        ("extremal", &exact as &dyn Fn(f64) -> f64),
        ("perturbed", &|t: f64| exact(t) + 0.05 * t * t),
    ] {
        let grid = make_grid(0.0, 1.0, 0.0, 0.01).expect("grid");
        let xs = StateSamples::admissible(&problem, &grid, |t| vec![x(t)]);
        let ctx = PairContext::from_x(&problem, &grid, &xs).expect("context");
        let mult = compute_multipliers(&ctx).expect("multipliers");
        let report = el_residual(&ctx, &mult).expect("residuals");
        let verdict = is_extremal_interior(&report, 1e-3);
        let ham = compute_hamiltonian(&ctx, &mult);
        println!(
            "{label:>9}: psi_z(b) = {:.6}, H(a) = {:.6}, max EL residual = {:.3e}, extremal = {}",
            mult.psi_z[mult.psi_z.len() - 1],
            ham[0],
            report.max_residual(),
            verdict.extremal
        );
    }
}
