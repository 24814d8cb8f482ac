//! Integration of z along a given x, and the multipliers ψ_z, φ_k and the
//! Hamiltonian H assembled from a trajectory pair.

use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::problem::{
    AdmissibilityError, Grid, HerglotzProblem, JetError, JetTable, LagrangianPoint, StateSamples,
    TrajectoryPair,
};
use crate::stencil::{differentiate_series, StencilError, SERIES_BOUNDARY_ORDER};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("non-finite Lagrangian value {value:?} at t={t:?}")]
    NonFinite { t: f64, value: f64 },
    #[error("cannot evaluate {what} at t={t:?}: {source}")]
    Eval {
        what: &'static str,
        t: f64,
        #[source]
        source: EvalError,
    },
    #[error(transparent)]
    Jets(#[from] JetError),
    #[error(transparent)]
    Admissibility(#[from] AdmissibilityError),
    #[error("grid too coarse for multiplier derivatives: {0}")]
    Stencil(#[from] StencilError),
    #[error("multiplier index k={k} outside 1..={n}")]
    BadIndex { k: usize, n: usize },
}

/// Which sample a one-step stage reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Stage {
    Start,
    Mid,
    End,
}

/// Classical fourth-order step; `rate(stage, z)` evaluates L.
#[inline]
pub(crate) fn rk4_step<E>(
    h: f64,
    z: f64,
    mut rate: impl FnMut(Stage, f64) -> Result<f64, E>,
) -> Result<f64, E> {
    let k1 = rate(Stage::Start, z)?;
    let k2 = rate(Stage::Mid, z + 0.5 * h * k1)?;
    let k3 = rate(Stage::Mid, z + 0.5 * h * k2)?;
    let k4 = rate(Stage::End, z + h * k3)?;
    Ok(z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

pub(crate) fn eval_lagrangian(l: &Expr, point: &LagrangianPoint<'_>) -> Result<f64, DynamicsError> {
    let value = l.eval(point).map_err(|source| DynamicsError::Eval {
        what: "the Lagrangian",
        t: point.t,
        source,
    })?;
    if !value.is_finite() {
        return Err(DynamicsError::NonFinite { t: point.t, value });
    }
    Ok(value)
}

/// z on the nodes of [a, b] from precomputed jets.
///
/// Midpoint stages read the midpoint jets of x and of the delayed x, so the
/// scheme stays fourth order without touching off-grid samples.
pub fn integrate_with_jets(
    problem: &HerglotzProblem,
    grid: &Grid,
    jets: &JetTable,
) -> Result<Vec<f64>, DynamicsError> {
    let l = problem.lagrangian();
    let mut z = Vec::with_capacity(grid.steps + 1);
    let mut current = problem.gamma();
    z.push(current);
    for s in grid.start()..grid.end() {
        current = rk4_step(grid.h, current, |stage, zv| {
            let point = match stage {
                Stage::Start => LagrangianPoint::at_node(problem, grid, jets, s, zv),
                Stage::Mid => LagrangianPoint::at_half(problem, grid, jets, s, zv),
                Stage::End => LagrangianPoint::at_node(problem, grid, jets, s + 1, zv),
            };
            eval_lagrangian(l, &point)
        })?;
        z.push(current);
    }
    Ok(z)
}

/// Integrate z for an admissible x; z(a) = gamma.
pub fn integrate_z(
    problem: &HerglotzProblem,
    grid: &Grid,
    x: &StateSamples,
) -> Result<TrajectoryPair, DynamicsError> {
    x.check_admissible(problem, grid)?;
    let jets = JetTable::build(problem, grid, x)?;
    let z = integrate_with_jets(problem, grid, &jets)?;
    Ok(TrajectoryPair { x: x.clone(), z })
}

/// A trajectory pair with L and its partials evaluated at every node of [a, b].
///
/// Domain-relative index `d` refers to node `M + d` at time `a + d h`.
#[derive(Debug, Clone)]
pub struct PairContext<'p> {
    pub problem: &'p HerglotzProblem,
    pub grid: Grid,
    pub jets: JetTable,
    pub pair: TrajectoryPair,
    /// L at domain nodes.
    pub lagrangian: Vec<f64>,
    /// ∂L/∂z at domain nodes.
    pub dl_dz: Vec<f64>,
    dl_dx: Vec<f64>,
    dl_dxt: Vec<f64>,
}

impl<'p> PairContext<'p> {
    /// Integrate z for `x` and evaluate everything along the result.
    pub fn from_x(
        problem: &'p HerglotzProblem,
        grid: &Grid,
        x: &StateSamples,
    ) -> Result<Self, DynamicsError> {
        x.check_admissible(problem, grid)?;
        let jets = JetTable::build(problem, grid, x)?;
        let z = integrate_with_jets(problem, grid, &jets)?;
        Self::assemble(problem, grid, jets, TrajectoryPair { x: x.clone(), z })
    }

    /// Use a pair whose z is already known.
    pub fn new(
        problem: &'p HerglotzProblem,
        grid: &Grid,
        pair: TrajectoryPair,
    ) -> Result<Self, DynamicsError> {
        pair.x.check_admissible(problem, grid)?;
        let jets = JetTable::build(problem, grid, &pair.x)?;
        Self::assemble(problem, grid, jets, pair)
    }

    fn assemble(
        problem: &'p HerglotzProblem,
        grid: &Grid,
        jets: JetTable,
        pair: TrajectoryPair,
    ) -> Result<Self, DynamicsError> {
        let (n, m) = (problem.n(), problem.m());
        let count = grid.steps + 1;
        let mut lagrangian = Vec::with_capacity(count);
        let mut dl_dz = Vec::with_capacity(count);
        let mut dl_dx = Vec::with_capacity(count * (n + 1) * m);
        let mut dl_dxt = Vec::with_capacity(count * (n + 1) * m);
        let eval = |e: &Expr, what: &'static str, p: &LagrangianPoint<'_>| {
            e.eval(p).map_err(|source| DynamicsError::Eval {
                what,
                t: p.t,
                source,
            })
        };
        for d in 0..count {
            let node = grid.start() + d;
            let point = LagrangianPoint::at_node(problem, grid, &jets, node, pair.z[d]);
            lagrangian.push(eval_lagrangian(problem.lagrangian(), &point)?);
            dl_dz.push(eval(problem.dl_dz(), "∂L/∂z", &point)?);
            for k in 0..=n {
                for c in 0..m {
                    dl_dx.push(eval(problem.dl_dx(k, c), "∂L/∂x", &point)?);
                }
            }
            for k in 0..=n {
                for c in 0..m {
                    dl_dxt.push(eval(problem.dl_dxt(k, c), "∂L/∂xt", &point)?);
                }
            }
        }
        Ok(PairContext {
            problem,
            grid: *grid,
            jets,
            pair,
            lagrangian,
            dl_dz,
            dl_dx,
            dl_dxt,
        })
    }

    /// ∂L/∂x^{(k)}_c at domain node `d`.
    pub fn dl_dx(&self, d: usize, k: usize, c: usize) -> f64 {
        let (n, m) = (self.problem.n(), self.problem.m());
        self.dl_dx[(d * (n + 1) + k) * m + c]
    }

    /// ∂L/∂x_τ^{(k)}_c at domain node `d`.
    pub fn dl_dxt(&self, d: usize, k: usize, c: usize) -> f64 {
        let (n, m) = (self.problem.n(), self.problem.m());
        self.dl_dxt[(d * (n + 1) + k) * m + c]
    }

    /// Number of domain nodes.
    pub fn len(&self) -> usize {
        self.grid.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Node series `f(d)` over domain nodes `lo..=hi`, differentiated `order` times.
    pub(crate) fn differentiate(
        &self,
        lo: usize,
        hi: usize,
        order: usize,
        f: impl Fn(usize) -> f64,
    ) -> Result<Vec<f64>, StencilError> {
        let values: Vec<f64> = (lo..=hi).map(f).collect();
        differentiate_series(&values, self.grid.h, order, SERIES_BOUNDARY_ORDER)
    }
}

/// ψ_z on the domain nodes: exp of the integral of ∂L/∂z from t to b.
///
/// Composite Simpson pairs running leftwards from b; nodes an odd number of
/// steps from a segment's right end start from a four-point rule on its last
/// step. Segments end at the breakpoints a + jτ, where delayed slots can put
/// kinks into ∂L/∂z, so no panel straddles one.
pub fn compute_psi_z(ctx: &PairContext<'_>) -> Vec<f64> {
    let g = &ctx.dl_dz;
    let h = ctx.grid.h;
    let k = g.len() - 1;
    let mut integral = vec![0.0; k + 1];
    let seg = match ctx.grid.delay_steps {
        0 => k,
        m => m,
    };
    let mut hi = k;
    while hi > 0 {
        let lo = if hi.is_multiple_of(seg) {
            hi - seg
        } else {
            hi - hi % seg
        };
        if hi - lo >= 3 {
            integral[hi - 1] = integral[hi]
                + h / 24.0 * (9.0 * g[hi] + 19.0 * g[hi - 1] - 5.0 * g[hi - 2] + g[hi - 3]);
        } else {
            integral[hi - 1] = integral[hi] + h / 2.0 * (g[hi] + g[hi - 1]);
        }
        for i in (lo..hi - 1).rev() {
            integral[i] = integral[i + 2] + h / 3.0 * (g[i] + 4.0 * g[i + 1] + g[i + 2]);
        }
        hi = lo;
    }
    integral.into_iter().map(f64::exp).collect()
}

/// φ_1..φ_n on every node of [a − τ, b], plus the junction mismatch at t = a.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSet {
    pub psi_z: Vec<f64>,
    /// `phi[k - 1][node * m + comp]` over all grid nodes.
    pub phi: Vec<Vec<f64>>,
    /// Largest |history branch − main branch| of φ at t = a.
    pub junction_mismatch: f64,
    m: usize,
}

impl MultiplierSet {
    pub fn phi(&self, k: usize, node: usize, comp: usize) -> f64 {
        self.phi[k - 1][node * self.m + comp]
    }
}

/// The node ranges (domain-relative) on which the advanced term is present.
pub(crate) struct Branches {
    /// [a, b − τ]; the whole of [a, b] when τ = 0.
    pub early: (usize, usize),
    /// [b − τ, b]; `None` when τ = 0.
    pub late: Option<(usize, usize)>,
}

pub(crate) fn branches(grid: &Grid) -> Branches {
    let k = grid.steps;
    if grid.delay_steps == 0 {
        Branches {
            early: (0, k),
            late: None,
        }
    } else {
        Branches {
            early: (0, k - grid.delay_steps),
            late: Some((k - grid.delay_steps, k)),
        }
    }
}

/// ψ_z(t)·∂L/∂x^{(order)} + ψ_z(t+τ)·∂L/∂x_τ^{(order)}(t+τ) at domain node `d`,
/// the second term only when t + τ ≤ b (or aliased when τ = 0).
pub(crate) fn weighted_partial(
    ctx: &PairContext<'_>,
    psi: &[f64],
    d: usize,
    order: usize,
    c: usize,
    advanced: bool,
) -> f64 {
    let main = psi[d] * ctx.dl_dx(d, order, c);
    if !advanced {
        return main;
    }
    let shift = ctx.grid.delay_steps;
    main + psi[d + shift] * ctx.dl_dxt(d + shift, order, c)
}

/// φ_k on every grid node.
pub fn compute_phi_k(
    ctx: &PairContext<'_>,
    psi: &[f64],
    k: usize,
) -> Result<(Vec<f64>, f64), DynamicsError> {
    let (n, m) = (ctx.problem.n(), ctx.problem.m());
    if k == 0 || k > n {
        return Err(DynamicsError::BadIndex { k, n });
    }
    let grid = &ctx.grid;
    let shift = grid.delay_steps;
    let mut out = vec![0.0; grid.node_count() * m];
    let br = branches(grid);
    let mut mismatch: f64 = 0.0;
    for c in 0..m {
        // Main branch, early part: both terms.
        let (lo, hi) = br.early;
        let mut early = vec![0.0; hi - lo + 1];
        for l in 0..=n - k {
            let sign = if l % 2 == 0 { -1.0 } else { 1.0 };
            let der =
                ctx.differentiate(lo, hi, l, |d| weighted_partial(ctx, psi, d, l + k, c, true))?;
            for (acc, v) in early.iter_mut().zip(der) {
                *acc += sign * v;
            }
        }
        for (i, v) in early.iter().enumerate() {
            out[(shift + lo + i) * m + c] = *v;
        }
        // Main branch, late part: the advanced term lies beyond b.
        if let Some((lo, hi)) = br.late {
            let mut late = vec![0.0; hi - lo + 1];
            for l in 0..=n - k {
                let sign = if l % 2 == 0 { -1.0 } else { 1.0 };
                let der = ctx.differentiate(lo, hi, l, |d| {
                    weighted_partial(ctx, psi, d, l + k, c, false)
                })?;
                for (acc, v) in late.iter_mut().zip(der) {
                    *acc += sign * v;
                }
            }
            // The junction t = b − τ keeps the early value.
            for (i, v) in late.iter().enumerate().skip(1) {
                out[(shift + lo + i) * m + c] = *v;
            }
        }
        // History branch on [a − τ, a]: advanced term only, at t + τ ∈ [a, a + τ].
        if shift > 0 {
            let mut hist = vec![0.0; shift + 1];
            for l in 0..=n - k {
                let sign = if l % 2 == 0 { -1.0 } else { 1.0 };
                let der = ctx.differentiate(0, shift, l, |d| psi[d] * ctx.dl_dxt(d, l + k, c))?;
                for (acc, v) in hist.iter_mut().zip(der) {
                    *acc += sign * v;
                }
            }
            for (i, v) in hist.iter().enumerate().take(shift) {
                out[i * m + c] = *v;
            }
            mismatch = mismatch.max((hist[shift] - out[shift * m + c]).abs());
        }
    }
    Ok((out, mismatch))
}

/// ψ_z and every φ_k.
pub fn compute_multipliers(ctx: &PairContext<'_>) -> Result<MultiplierSet, DynamicsError> {
    let psi_z = compute_psi_z(ctx);
    let mut phi = Vec::with_capacity(ctx.problem.n());
    let mut junction_mismatch: f64 = 0.0;
    for k in 1..=ctx.problem.n() {
        let (series, mismatch) = compute_phi_k(ctx, &psi_z, k)?;
        phi.push(series);
        junction_mismatch = junction_mismatch.max(mismatch);
    }
    Ok(MultiplierSet {
        psi_z,
        phi,
        junction_mismatch,
        m: ctx.problem.m(),
    })
}

/// H = Σ_k φ_k · x^{(k)} + ψ_z L on the domain nodes.
pub fn compute_hamiltonian(ctx: &PairContext<'_>, mult: &MultiplierSet) -> Vec<f64> {
    let (n, m) = (ctx.problem.n(), ctx.problem.m());
    let start = ctx.grid.start();
    (0..ctx.len())
        .map(|d| {
            let node = start + d;
            let jets = ctx.jets.node(node);
            let mut acc = 0.0;
            for k in 1..=n {
                for c in 0..m {
                    acc += mult.phi(k, node, c) * jets.get(k, c);
                }
            }
            acc + mult.psi_z[d] * ctx.lagrangian[d]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::make_grid;

    fn delayed_growth(gamma: f64) -> HerglotzProblem {
        HerglotzProblem::parse(1, 1, (0.0, 2.0, 1.0), gamma, "xt0*z", &["1"]).unwrap()
    }

    #[test]
    fn zero_lagrangian_keeps_gamma() {
        let p = HerglotzProblem::parse(1, 1, (0.0, 1.0, 0.0), 0.7, "0", &["1"]).unwrap();
        let g = make_grid(0.0, 1.0, 0.0, 0.1).unwrap();
        let x = StateSamples::admissible(&p, &g, |t| vec![t.sin() + 1.0]);
        let ctx = PairContext::from_x(&p, &g, &x).unwrap();
        assert!(ctx.pair.z.iter().all(|&z| z == 0.7));
        let mult = compute_multipliers(&ctx).unwrap();
        assert!(mult.phi[0].iter().all(|&v| v == 0.0));
        assert!(compute_hamiltonian(&ctx, &mult).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_history_first_block_is_exponential() {
        let c = 0.8;
        let p = HerglotzProblem::parse(1, 1, (0.0, 2.0, 1.0), 1.5, "xt0*z", &["0.8"]).unwrap();
        let g = make_grid(0.0, 2.0, 1.0, 0.01).unwrap();
        let x = StateSamples::admissible(&p, &g, |t| vec![c + 0.3 * t]);
        let pair = integrate_z(&p, &g, &x).unwrap();
        for d in 0..=g.delay_steps {
            let t = g.time(g.start() + d);
            assert!((pair.z[d] - 1.5 * (c * t).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_trajectory_gives_exp_of_length() {
        // RK4 on z' = z over [0, 2] needs h = 0.005 for 1e-9.
        let p = delayed_growth(1.0);
        let g = make_grid(0.0, 2.0, 1.0, 0.005).unwrap();
        let x = StateSamples::admissible(&p, &g, |_| vec![1.0]);
        let pair = integrate_z(&p, &g, &x).unwrap();
        assert!(
            (pair.z_end() - 2f64.exp()).abs() < 1e-9,
            "{}",
            pair.z_end() - 2f64.exp()
        );
    }

    #[test]
    fn psi_for_linear_decay() {
        let p = HerglotzProblem::parse(1, 1, (0.0, 1.0, 0.0), 1.0, "-0.3*z", &["0"]).unwrap();
        let g = make_grid(0.0, 1.0, 0.0, 0.05).unwrap();
        let x = StateSamples::admissible(&p, &g, |_| vec![0.0]);
        let ctx = PairContext::from_x(&p, &g, &x).unwrap();
        let psi = compute_psi_z(&ctx);
        assert_eq!(*psi.last().unwrap(), 1.0);
        for (d, v) in psi.iter().enumerate() {
            let t = g.time(d);
            assert!((v - (-0.3 * (1.0 - t)).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn delayed_growth_multipliers() {
        let p = delayed_growth(1.0);
        let g = make_grid(0.0, 2.0, 1.0, 0.01).unwrap();
        let x = StateSamples::admissible(&p, &g, |t| vec![1.0 + 0.2 * t]);
        let ctx = PairContext::from_x(&p, &g, &x).unwrap();
        let mult = compute_multipliers(&ctx).unwrap();
        assert!(mult.phi[0].iter().all(|&v| v == 0.0));
        let h = compute_hamiltonian(&ctx, &mult);
        for d in 0..ctx.len() {
            let xt = ctx.jets.node(d).get(0, 0);
            assert_eq!(h[d], mult.psi_z[d] * (xt * ctx.pair.z[d]));
        }
    }

    #[test]
    fn kinetic_phi_is_minus_velocity() {
        let p = HerglotzProblem::parse(1, 1, (0.0, 1.0, 0.0), 0.0, "x1^2/2", &["0"]).unwrap();
        let g = make_grid(0.0, 1.0, 0.0, 0.05).unwrap();
        let x = StateSamples::admissible(&p, &g, |t| vec![t * t]);
        let ctx = PairContext::from_x(&p, &g, &x).unwrap();
        let mult = compute_multipliers(&ctx).unwrap();
        for i in 0..g.node_count() {
            assert!((mult.phi(1, i, 0) + 2.0 * g.time(i)).abs() < 1e-10);
        }
    }
}
