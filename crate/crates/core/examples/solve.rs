//! Quasi-Newton search for an extremal followed by the Euler-Lagrange certificate.
use herglotz::problem::{make_grid, HerglotzProblem};
use herglotz::solver::{solve_extremal, SolveOptions};

fn main() {
    let problem =
        HerglotzProblem::parse(1, 1, (0.0, 1.0, 0.5), 0.5, "x1^2", &["1"]).expect("problem");
    let grid = make_grid(0.0, 1.0, 0.5, 0.05).expect("grid");
    let opts = SolveOptions {
        tol_grad: 1e-10,
        jitter: 0.2,
        seed: 7,
        ..SolveOptions::default()
    };
    let result = solve_extremal(&problem, &grid, &opts).expect("solve");
    println!(
        "iterations = {}, converged = {}, objective = {:?}, |grad| = {:.3e}",
        result.iterations, result.converged, result.objective, result.grad_norm
    );
    println!(
        "certificate: extremal = {}, worst = {:?}",
        result.certificate.extremal, result.certificate.worst
    );
    let x = &result.pair.x;
    println!(
        "x(b) = {:?} (the extremal is the constant 1)",
        x.get(grid.end(), 0)
    );
}
