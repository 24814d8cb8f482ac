use thiserror::Error;

use super::{param_value, Grid, HerglotzProblem};
use crate::expr::{SlotId, SlotValues};
use crate::stencil::{half_stencil, node_stencil, StencilError, JET_BOUNDARY_ORDER};

/// Samples of x at every grid node, flattened as `[node * m + comp]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSamples {
    m: usize,
    values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdmissibilityError {
    #[error("expected {expected} samples, got {found}")]
    Length { expected: usize, found: usize },
    #[error("x_{comp}(t={t:?}) = {found:?} differs from the history value {expected:?}", comp = .comp + 1)]
    History {
        t: f64,
        comp: usize,
        expected: f64,
        found: f64,
    },
    #[error("non-finite sample x_{comp} at t={t:?}", comp = .comp + 1)]
    NonFinite { t: f64, comp: usize },
}

impl StateSamples {
    /// Raw constructor; no admissibility check.
    pub fn from_values(m: usize, values: Vec<f64>) -> Self {
        assert!(
            m > 0 && values.len().is_multiple_of(m),
            "sample count must be a multiple of m"
        );
        StateSamples { m, values }
    }

    /// History on [a - tau, a] from the problem, `f(t)` on (a, b].
    pub fn admissible(problem: &HerglotzProblem, grid: &Grid, f: impl Fn(f64) -> Vec<f64>) -> Self {
        let m = problem.m();
        let mut values = Vec::with_capacity(grid.node_count() * m);
        for i in 0..grid.node_count() {
            let t = grid.time(i);
            if i <= grid.start() {
                values.extend((0..m).map(|c| problem.history_jet(0, c, t)));
            } else {
                let v = f(t);
                assert_eq!(v.len(), m, "trajectory function must return m components");
                values.extend(v);
            }
        }
        StateSamples { m, values }
    }

    /// History from the problem, `free` holding nodes (a, b] as `[(node - M - 1) * m + comp]`.
    pub fn from_free(problem: &HerglotzProblem, grid: &Grid, free: &[f64]) -> Self {
        let m = problem.m();
        assert_eq!(free.len(), grid.steps * m);
        let mut values = Vec::with_capacity(grid.node_count() * m);
        for i in 0..=grid.start() {
            let t = grid.time(i);
            values.extend((0..m).map(|c| problem.history_jet(0, c, t)));
        }
        values.extend_from_slice(free);
        StateSamples { m, values }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn get(&self, i: usize, comp: usize) -> f64 {
        self.values[i * self.m + comp]
    }

    pub fn set(&mut self, i: usize, comp: usize, v: f64) {
        self.values[i * self.m + comp] = v;
    }

    /// Samples at nodes (a, b], the decision variables of the direct method.
    pub fn free(&self, grid: &Grid) -> &[f64] {
        &self.values[(grid.start() + 1) * self.m..]
    }

    /// Largest absolute difference over all nodes and components.
    pub fn sup_distance(&self, other: &StateSamples) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Samples on [a - tau, a] must match the history (to 1e-9 relative).
    pub fn check_admissible(
        &self,
        problem: &HerglotzProblem,
        grid: &Grid,
    ) -> Result<(), AdmissibilityError> {
        let expected = grid.node_count() * self.m;
        if self.values.len() != expected || self.m != problem.m() {
            return Err(AdmissibilityError::Length {
                expected,
                found: self.values.len(),
            });
        }
        for i in 0..grid.node_count() {
            let t = grid.time(i);
            for c in 0..self.m {
                let v = self.get(i, c);
                if !v.is_finite() {
                    return Err(AdmissibilityError::NonFinite { t, comp: c });
                }
                if i <= grid.start() {
                    let mu = problem.history_jet(0, c, t);
                    if (v - mu).abs() > 1e-9 * mu.abs().max(1.0) {
                        return Err(AdmissibilityError::History {
                            t,
                            comp: c,
                            expected: mu,
                            found: v,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// An admissible x with its z, the latter sampled on the nodes of [a, b].
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPair {
    pub x: StateSamples,
    pub z: Vec<f64>,
}

impl TrajectoryPair {
    pub fn z_end(&self) -> f64 {
        *self.z.last().expect("z has at least one sample")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("derivative order {order} exceeds the problem order {max}")]
    OrderTooHigh { order: usize, max: usize },
    #[error("grid too coarse for trajectory jets: {0}")]
    TooCoarse(#[from] StencilError),
}

/// Derivative jets of x at every node and at every step midpoint.
///
/// Node jets run to order n + 1, midpoint jets to order n. Jets before `a`
/// come from the symbolic history; jets on [a, b] from stencils that never
/// reach across the junction at `a`.
#[derive(Debug, Clone)]
pub struct JetTable {
    m: usize,
    node_orders: usize,
    half_orders: usize,
    nodes: Vec<f64>,
    halves: Vec<f64>,
}

impl JetTable {
    pub fn build(
        problem: &HerglotzProblem,
        grid: &Grid,
        x: &StateSamples,
    ) -> Result<Self, JetError> {
        let m = problem.m();
        let node_orders = problem.n() + 2;
        let half_orders = problem.n() + 1;
        let (lo, hi) = (grid.start(), grid.end());
        let mut nodes = Vec::with_capacity(grid.node_count() * node_orders * m);
        for i in 0..grid.node_count() {
            if i < lo {
                let t = grid.time(i);
                for k in 0..node_orders {
                    nodes.extend((0..m).map(|c| problem.history_jet(k, c, t)));
                }
            } else {
                for k in 0..node_orders {
                    let st = node_stencil(k, i, lo, hi, JET_BOUNDARY_ORDER)?;
                    nodes.extend((0..m).map(|c| st.apply(grid.h, |j| x.get(j, c))));
                }
            }
        }
        let mut halves = Vec::with_capacity((grid.node_count() - 1) * half_orders * m);
        for i in 0..grid.node_count() - 1 {
            if i < lo {
                let t = grid.half_time(i);
                for k in 0..half_orders {
                    halves.extend((0..m).map(|c| problem.history_jet(k, c, t)));
                }
            } else {
                for k in 0..half_orders {
                    let st = half_stencil(k, i, lo, hi, JET_BOUNDARY_ORDER)?;
                    halves.extend((0..m).map(|c| st.apply(grid.h, |j| x.get(j, c))));
                }
            }
        }
        Ok(JetTable {
            m,
            node_orders,
            half_orders,
            nodes,
            halves,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Highest order stored at nodes.
    pub fn node_order(&self) -> usize {
        self.node_orders - 1
    }

    /// Highest order stored at step midpoints.
    pub fn half_order(&self) -> usize {
        self.half_orders - 1
    }

    /// All jets at node `i`, laid out `[order * m + comp]`.
    pub fn node(&self, i: usize) -> JetView<'_> {
        let w = self.node_orders * self.m;
        JetView {
            m: self.m,
            data: &self.nodes[i * w..(i + 1) * w],
        }
    }

    /// All jets at the midpoint of step `i` (between nodes `i` and `i + 1`).
    pub fn half(&self, i: usize) -> JetView<'_> {
        let w = self.half_orders * self.m;
        JetView {
            m: self.m,
            data: &self.halves[i * w..(i + 1) * w],
        }
    }

    /// Node series of one jet component, over nodes `range`.
    pub fn series(
        &self,
        order: usize,
        comp: usize,
        range: std::ops::RangeInclusive<usize>,
    ) -> Vec<f64> {
        range.map(|i| self.node(i).get(order, comp)).collect()
    }
}

/// Jets at one point, `[order * m + comp]`.
#[derive(Debug, Clone, Copy)]
pub struct JetView<'a> {
    m: usize,
    data: &'a [f64],
}

impl<'a> JetView<'a> {
    /// Wrap jets laid out `[order * m + comp]`.
    pub fn new(m: usize, data: &'a [f64]) -> Self {
        JetView { m, data }
    }

    pub fn data(&self) -> &'a [f64] {
        self.data
    }

    pub fn get(&self, order: usize, comp: usize) -> f64 {
        self.data[order * self.m + comp]
    }

    pub fn try_get(&self, order: usize, comp: usize) -> Option<f64> {
        self.data.get(order * self.m + comp).copied()
    }

    /// The m components of one order.
    pub fn order(&self, order: usize) -> &'a [f64] {
        &self.data[order * self.m..(order + 1) * self.m]
    }
}

/// k-th derivative of x at node `i`, computed from the samples alone.
pub fn jet(
    problem: &HerglotzProblem,
    grid: &Grid,
    x: &StateSamples,
    node: usize,
    order: usize,
) -> Result<Vec<f64>, JetError> {
    if order > problem.n() {
        return Err(JetError::OrderTooHigh {
            order,
            max: problem.n(),
        });
    }
    let m = problem.m();
    if node < grid.start() {
        let t = grid.time(node);
        return Ok((0..m).map(|c| problem.history_jet(order, c, t)).collect());
    }
    let st = node_stencil(order, node, grid.start(), grid.end(), JET_BOUNDARY_ORDER)?;
    Ok((0..m).map(|c| st.apply(grid.h, |j| x.get(j, c))).collect())
}

/// Values of every Lagrangian slot at one time.
#[derive(Debug, Clone, Copy)]
pub struct LagrangianPoint<'a> {
    pub t: f64,
    pub x: JetView<'a>,
    pub xt: JetView<'a>,
    pub z: f64,
    pub params: (f64, f64, f64),
}

impl SlotValues for LagrangianPoint<'_> {
    fn value(&self, slot: SlotId) -> Option<f64> {
        match slot {
            SlotId::Time => Some(self.t),
            SlotId::State { order, comp } => self.x.try_get(order, comp),
            SlotId::Delayed { order, comp } => self.xt.try_get(order, comp),
            SlotId::Z => Some(self.z),
            SlotId::Param(p) => Some(param_value(p, self.params.0, self.params.1, self.params.2)),
            _ => None,
        }
    }
}

impl<'a> LagrangianPoint<'a> {
    /// Point at grid node `node` of [a, b], with z supplied by the caller.
    pub fn at_node(
        problem: &HerglotzProblem,
        grid: &Grid,
        jets: &'a JetTable,
        node: usize,
        z: f64,
    ) -> Self {
        LagrangianPoint {
            t: grid.time(node),
            x: jets.node(node),
            xt: jets.node(node - grid.delay_steps),
            z,
            params: (problem.a(), problem.b(), problem.tau()),
        }
    }

    /// Point at the midpoint of step `step`.
    pub fn at_half(
        problem: &HerglotzProblem,
        grid: &Grid,
        jets: &'a JetTable,
        step: usize,
        z: f64,
    ) -> Self {
        LagrangianPoint {
            t: grid.half_time(step),
            x: jets.half(step),
            xt: jets.half(step - grid.delay_steps),
            z,
            params: (problem.a(), problem.b(), problem.tau()),
        }
    }
}

/// Environment binding t, x-jets at t, xt-jets at t - tau and z(t) at a node of [a, b].
pub fn lagrangian_env<'a>(
    problem: &HerglotzProblem,
    grid: &Grid,
    jets: &'a JetTable,
    pair: &TrajectoryPair,
    node: usize,
) -> LagrangianPoint<'a> {
    assert!(
        node >= grid.start() && node <= grid.end(),
        "node outside [a, b]"
    );
    LagrangianPoint::at_node(problem, grid, jets, node, pair.z[node - grid.start()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::make_grid;

    #[test]
    fn polynomial_jets_exact() {
        let p = HerglotzProblem::parse(2, 1, (0.0, 2.0, 1.0), 1.0, "x2", &["t^2"]).unwrap();
        let g = make_grid(0.0, 2.0, 1.0, 0.1).unwrap();
        let x = StateSamples::admissible(&p, &g, |t| vec![t * t]);
        let jets = JetTable::build(&p, &g, &x).unwrap();
        for i in 0..g.node_count() {
            let t = g.time(i);
            assert!((jets.node(i).get(1, 0) - 2.0 * t).abs() < 1e-10, "node {i}");
            assert!((jets.node(i).get(2, 0) - 2.0).abs() < 1e-8, "node {i}");
            assert_eq!(jet(&p, &g, &x, i, 0).unwrap()[0], x.get(i, 0));
        }
        for i in 0..g.node_count() - 1 {
            let t = g.half_time(i);
            assert!((jets.half(i).get(0, 0) - t * t).abs() < 1e-12);
        }
        assert!(jet(&p, &g, &x, 3, 3).is_err());
    }

    #[test]
    fn sine_second_derivative() {
        let p = HerglotzProblem::parse(2, 1, (0.0, 2.0, 0.0), 1.0, "x2", &["sin(t)"]).unwrap();
        let g = make_grid(0.0, 2.0, 0.0, 0.01).unwrap();
        let x = StateSamples::admissible(&p, &g, |t| vec![t.sin()]);
        for i in 0..g.node_count() {
            let d2 = jet(&p, &g, &x, i, 2).unwrap()[0];
            assert!((d2 + g.time(i).sin()).abs() < 1e-6, "node {i}: {d2}");
        }
    }

    #[test]
    fn delayed_slots_follow_the_indexing_rule() {
        let p = HerglotzProblem::parse(1, 1, (0.0, 2.0, 1.0), 1.0, "xt0*z", &["1 + t"]).unwrap();
        let g = make_grid(0.0, 2.0, 1.0, 0.25).unwrap();
        let x = StateSamples::admissible(&p, &g, |t| vec![5.0 * t]);
        let jets = JetTable::build(&p, &g, &x).unwrap();
        let pair = TrajectoryPair {
            x: x.clone(),
            z: vec![0.0; g.steps + 1],
        };
        let at_a = lagrangian_env(&p, &g, &jets, &pair, g.start());
        assert_eq!(at_a.value(SlotId::delayed(0, 0)), Some(0.0));
        assert_eq!(at_a.value(SlotId::delayed(1, 0)), Some(1.0));
        let at_a_tau = lagrangian_env(&p, &g, &jets, &pair, g.start() + g.delay_steps);
        assert_eq!(
            at_a_tau.value(SlotId::delayed(0, 0)),
            Some(x.get(g.start(), 0))
        );

        let p0 = HerglotzProblem::parse(1, 1, (0.0, 2.0, 0.0), 1.0, "xt0*z", &["1"]).unwrap();
        let g0 = make_grid(0.0, 2.0, 0.0, 0.25).unwrap();
        let x0 = StateSamples::admissible(&p0, &g0, |t| vec![1.0 + t * t]);
        let jets0 = JetTable::build(&p0, &g0, &x0).unwrap();
        let pair0 = TrajectoryPair {
            x: x0,
            z: vec![0.0; g0.steps + 1],
        };
        let e = lagrangian_env(&p0, &g0, &jets0, &pair0, 3);
        assert_eq!(e.value(SlotId::delayed(1, 0)), e.value(SlotId::state(1, 0)));
    }

    #[test]
    fn admissibility() {
        let p = HerglotzProblem::parse(1, 1, (0.0, 2.0, 1.0), 1.0, "z", &["1"]).unwrap();
        let g = make_grid(0.0, 2.0, 1.0, 0.25).unwrap();
        let mut x = StateSamples::admissible(&p, &g, |_| vec![3.0]);
        assert!(x.check_admissible(&p, &g).is_ok());
        x.set(1, 0, 2.0);
        assert!(matches!(
            x.check_admissible(&p, &g),
            Err(AdmissibilityError::History { .. })
        ));
    }
}
