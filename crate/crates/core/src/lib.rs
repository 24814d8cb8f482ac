pub mod dynamics;
pub mod euler_lagrange;
pub mod expr;
pub mod problem;
pub mod reduction;
pub mod report;
pub mod solver;
pub mod stencil;
pub mod symmetry;
