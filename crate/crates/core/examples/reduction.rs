//! Method of steps: the reduced delay-free problem reproduces z(b) exactly.
use herglotz::dynamics::integrate_z;
use herglotz::problem::{make_grid, HerglotzProblem, StateSamples};
use herglotz::reduction::{lift, project, reduce, reduced_terminal_z};

fn main() {
    let (a, b, tau) = (0.0, 1.0, 0.3);
    let problem = HerglotzProblem::parse(
        1,
        1,
        (a, b, tau),
        0.5,
        "x1^2 - xt0*x0 + 0.2*z*sin(t)",
        &["cos(t)"],
    )
    .expect("problem");
    let grid = make_grid(a, b, tau, 0.01).expect("grid");
    let reduced = reduce(&problem, &grid).expect("reduction");
    println!(
        "blocks = {}, padded = {}, last block length = {:?}",
        reduced.blocks,
        reduced.padded(),
        reduced.last_block_length()
    );
    let x = StateSamples::admissible(&problem, &grid, |t| vec![(t * 2.0).cos()]);
    let lifted = lift(&problem, &grid, &reduced, &x).expect("lift");
    assert_eq!(project(&reduced, &grid, &lifted), x);
    let direct = integrate_z(&problem, &grid, &x).expect("direct").z_end();
    let via_blocks = reduced_terminal_z(&problem, &grid, &x).expect("reduced");
    println!(
        "direct z(b) = {direct:?}\nreduced z(b) = {via_blocks:?}\ndifference = {:e}",
        direct - via_blocks
    );
}
