//! Method of steps: the delayed problem on [a, b] rewritten as a first-order
//! control problem without delay on one delay block [0, τ].
//!
//! Block `i` holds the jets x^{k;i}(s) = x^{(k)}(s + a + (i − 1)τ) for
//! i = 0..=N (block 0 is the history), and z_j(s) = z(s + a + (j − 1)τ) for
//! j = 1..=N+1. The block Lagrangian L_j reads state jets from block j and
//! delayed jets from block j − 1, so the delay disappears. When b − a is not
//! a whole number of delays the last block is active only on its first
//! `b − a − (N − 1)τ` and zero afterwards. The Bolza payoff of the reduced
//! problem is z_N(τ), which equals z(b).
//!
//! Nothing is interpolated: block samples are the direct grid samples under
//! another index, so integrating the blocks in order reproduces the direct
//! integration bit for bit.

use thiserror::Error;

use crate::dynamics::{eval_lagrangian, rk4_step, DynamicsError, Stage};
use crate::problem::{Grid, HerglotzProblem, JetTable, JetView, LagrangianPoint, StateSamples};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReductionError {
    #[error("reduction not applicable; use direct mode")]
    NoDelay,
    #[error("grid misaligned: τ is not a whole number of steps")]
    Misaligned,
    #[error("linkage mismatch {gap:e} between blocks {block} and {next}", next = .block + 1)]
    Linkage { block: usize, gap: f64 },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Running cost and control set of the reduced Bolza problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedMeta {
    /// The running cost f is identically zero.
    pub running_cost: f64,
    /// z block whose value at block time τ is the payoff.
    pub payoff_block: usize,
    /// Controls u_i = x^{n;i} take values in all of ℝ^m.
    pub unconstrained_controls: bool,
}

/// Shape of the reduced problem on a given grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedOcp {
    pub n: usize,
    pub m: usize,
    /// Number of delay blocks covering [a, b].
    pub blocks: usize,
    /// Grid steps per block (τ / h).
    pub block_steps: usize,
    /// Active steps of the last block; equals `block_steps` unless padded.
    pub last_active_steps: usize,
    pub tau: f64,
    pub meta: ReducedMeta,
    grid: Grid,
}

impl ReducedOcp {
    /// Whether the last block is zero-extended.
    pub fn padded(&self) -> bool {
        self.last_active_steps < self.block_steps
    }

    /// Active length of the last block, b − (N − 1)τ in block time.
    pub fn last_block_length(&self) -> f64 {
        self.last_active_steps as f64 * self.grid.h
    }

    /// Active steps of state block i (0..=N+1) or z block j.
    pub fn active_steps(&self, block: usize) -> usize {
        match block {
            b if b < self.blocks => self.block_steps,
            b if b == self.blocks => self.last_active_steps,
            _ => 0,
        }
    }

    /// (n + 1) m (N + 1) state-jet channels.
    pub fn state_channels(&self) -> usize {
        (self.n + 1) * self.m * (self.blocks + 1)
    }

    /// N + 1 z channels.
    pub fn z_channels(&self) -> usize {
        self.blocks + 1
    }

    /// Grid node of block i at block node l (may lie beyond b).
    pub fn absolute_node(&self, block: usize, l: usize) -> usize {
        block * self.block_steps + l
    }
}

/// Block decomposition of the problem on `grid`.
pub fn reduce(problem: &HerglotzProblem, grid: &Grid) -> Result<ReducedOcp, ReductionError> {
    if !problem.has_delay() || grid.delay_steps == 0 {
        return Err(ReductionError::NoDelay);
    }
    let m_steps = grid.delay_steps;
    if ((m_steps as f64) * grid.h - problem.tau()).abs() > 1e-12 * problem.tau().max(1.0) {
        return Err(ReductionError::Misaligned);
    }
    let blocks = grid.steps.div_ceil(m_steps);
    let last_active_steps = grid.steps - (blocks - 1) * m_steps;
    Ok(ReducedOcp {
        n: problem.n(),
        m: problem.m(),
        blocks,
        block_steps: m_steps,
        last_active_steps,
        tau: problem.tau(),
        meta: ReducedMeta {
            running_cost: 0.0,
            payoff_block: blocks,
            unconstrained_controls: true,
        },
        grid: *grid,
    })
}

/// Block-wise jets: `nodes[i]` holds block i's node jets, `halves[i]` its midpoint jets.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedTrajectory {
    m: usize,
    node_width: usize,
    half_width: usize,
    nodes: Vec<Vec<f64>>,
    halves: Vec<Vec<f64>>,
}

impl LiftedTrajectory {
    /// Jets of x^{·;block} at block node `l`.
    pub fn node(&self, block: usize, l: usize) -> JetView<'_> {
        let w = self.node_width;
        JetView::new(self.m, &self.nodes[block][l * w..(l + 1) * w])
    }

    pub fn half(&self, block: usize, l: usize) -> JetView<'_> {
        let w = self.half_width;
        JetView::new(self.m, &self.halves[block][l * w..(l + 1) * w])
    }

    /// x^{k;i}(l h) for component c.
    pub fn state(&self, k: usize, block: usize, l: usize, c: usize) -> f64 {
        self.node(block, l).get(k, c)
    }

    pub fn block_count(&self) -> usize {
        self.nodes.len()
    }
}

/// Re-index the jets of x into blocks 0..=N+1 (the last a zero dummy).
pub fn lift(
    problem: &HerglotzProblem,
    grid: &Grid,
    reduced: &ReducedOcp,
    x: &StateSamples,
) -> Result<LiftedTrajectory, ReductionError> {
    let jets = JetTable::build(problem, grid, x).map_err(DynamicsError::from)?;
    Ok(lift_jets(reduced, grid, &jets))
}

pub fn lift_jets(reduced: &ReducedOcp, grid: &Grid, jets: &JetTable) -> LiftedTrajectory {
    let m = reduced.m;
    let node_width = (jets.node_order() + 1) * m;
    let half_width = (jets.half_order() + 1) * m;
    let per_block = reduced.block_steps;
    let end = grid.end();
    let mut nodes = Vec::with_capacity(reduced.blocks + 2);
    let mut halves = Vec::with_capacity(reduced.blocks + 2);
    for i in 0..=reduced.blocks + 1 {
        let mut block_nodes = vec![0.0; (per_block + 1) * node_width];
        let mut block_halves = vec![0.0; per_block * half_width];
        if i <= reduced.blocks {
            for l in 0..=per_block {
                let abs = reduced.absolute_node(i, l);
                if abs <= end {
                    block_nodes[l * node_width..(l + 1) * node_width]
                        .copy_from_slice(jets.node(abs).data());
                }
                if l < per_block && abs < end {
                    block_halves[l * half_width..(l + 1) * half_width]
                        .copy_from_slice(jets.half(abs).data());
                }
            }
        }
        nodes.push(block_nodes);
        halves.push(block_halves);
    }
    LiftedTrajectory {
        m,
        node_width,
        half_width,
        nodes,
        halves,
    }
}

/// Inverse of [`lift`] on the samples themselves.
pub fn project(reduced: &ReducedOcp, grid: &Grid, lifted: &LiftedTrajectory) -> StateSamples {
    let m = reduced.m;
    let mut values = vec![0.0; grid.node_count() * m];
    for i in 0..=reduced.blocks {
        for l in 0..=reduced.block_steps {
            let abs = reduced.absolute_node(i, l);
            if abs > grid.end() {
                continue;
            }
            for c in 0..m {
                values[abs * m + c] = lifted.state(0, i, l, c);
            }
        }
    }
    StateSamples::from_values(m, values)
}

/// Integrate z_1..z_{N+1} in order, each starting where the previous ended.
///
/// Returns `z[j - 1][l]` = z_j(l h).
pub fn integrate_reduced(
    problem: &HerglotzProblem,
    reduced: &ReducedOcp,
    lifted: &LiftedTrajectory,
) -> Result<Vec<Vec<f64>>, ReductionError> {
    let grid = &reduced.grid;
    let per_block = reduced.block_steps;
    let params = (problem.a(), problem.b(), problem.tau());
    let l_expr = problem.lagrangian();

    for i in 1..=reduced.blocks {
        for k in 0..problem.n() {
            for c in 0..reduced.m {
                let gap = (lifted.state(k, i, 0, c) - lifted.state(k, i - 1, per_block, c)).abs();
                if gap > 1e-12 {
                    return Err(ReductionError::Linkage { block: i - 1, gap });
                }
            }
        }
    }

    let mut out: Vec<Vec<f64>> = Vec::with_capacity(reduced.blocks + 1);
    let mut start = problem.gamma();
    for j in 1..=reduced.blocks + 1 {
        let mut z = Vec::with_capacity(per_block + 1);
        let mut current = start;
        z.push(current);
        let active = reduced.active_steps(j);
        for l in 0..per_block {
            if l < active {
                let abs = reduced.absolute_node(j, l);
                current = rk4_step(grid.h, current, |stage, zv| {
                    let point = match stage {
                        Stage::Start => LagrangianPoint {
                            t: grid.time(abs),
                            x: lifted.node(j, l),
                            xt: lifted.node(j - 1, l),
                            z: zv,
                            params,
                        },
                        Stage::Mid => LagrangianPoint {
                            t: grid.half_time(abs),
                            x: lifted.half(j, l),
                            xt: lifted.half(j - 1, l),
                            z: zv,
                            params,
                        },
                        Stage::End => LagrangianPoint {
                            t: grid.time(abs + 1),
                            x: lifted.node(j, l + 1),
                            xt: lifted.node(j - 1, l + 1),
                            z: zv,
                            params,
                        },
                    };
                    eval_lagrangian(l_expr, &point)
                })?;
            }
            z.push(current);
        }
        start = current;
        out.push(z);
    }
    Ok(out)
}

/// The payoff z_N(τ).
pub fn payoff(reduced: &ReducedOcp, z_blocks: &[Vec<f64>]) -> f64 {
    z_blocks[reduced.meta.payoff_block - 1][reduced.block_steps]
}

/// Reassemble z on the nodes of [a, b] from the blocks.
pub fn project_z(reduced: &ReducedOcp, z_blocks: &[Vec<f64>]) -> Vec<f64> {
    let steps = reduced.grid.steps;
    let mut z = vec![0.0; steps + 1];
    for (j0, block) in z_blocks.iter().enumerate() {
        for (l, v) in block.iter().enumerate() {
            let d = j0 * reduced.block_steps + l;
            if d <= steps {
                z[d] = *v;
            }
        }
    }
    z
}

/// z(b) by the method of steps for an admissible x.
pub fn reduced_terminal_z(
    problem: &HerglotzProblem,
    grid: &Grid,
    x: &StateSamples,
) -> Result<f64, ReductionError> {
    let reduced = reduce(problem, grid)?;
    let lifted = lift(problem, grid, &reduced, x)?;
    let z = integrate_reduced(problem, &reduced, &lifted)?;
    Ok(payoff(&reduced, &z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::integrate_z;
    use crate::problem::make_grid;

    fn problem(b: f64, l: &str) -> HerglotzProblem {
        HerglotzProblem::parse(1, 1, (0.0, b, 1.0), 1.0, l, &["1 + t/2"]).unwrap()
    }

    #[test]
    fn whole_blocks() {
        let p = problem(2.0, "xt0*z");
        let g = make_grid(0.0, 2.0, 1.0, 0.1).unwrap();
        let r = reduce(&p, &g).unwrap();
        assert_eq!(r.blocks, 2);
        assert!(!r.padded());
        assert_eq!(r.meta.payoff_block, 2);
        assert_eq!(r.state_channels(), 2 * 3);
        assert_eq!(r.z_channels(), 3);
    }

    #[test]
    fn padded_last_block() {
        let p = problem(2.5, "xt0*z");
        let g = make_grid(0.0, 2.5, 1.0, 0.1).unwrap();
        let r = reduce(&p, &g).unwrap();
        assert_eq!(r.blocks, 3);
        assert!(r.padded());
        assert!((r.last_block_length() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn no_delay_rejected() {
        let p = HerglotzProblem::parse(1, 1, (0.0, 1.0, 0.0), 1.0, "z", &["1"]).unwrap();
        let g = make_grid(0.0, 1.0, 0.0, 0.1).unwrap();
        let err = reduce(&p, &g).unwrap_err();
        assert_eq!(err.to_string(), "reduction not applicable; use direct mode");
    }

    #[test]
    fn history_block_and_round_trip() {
        let p = problem(2.5, "xt0*z + x1^2");
        let g = make_grid(0.0, 2.5, 1.0, 0.05).unwrap();
        let r = reduce(&p, &g).unwrap();
        let x = StateSamples::admissible(&p, &g, |t| vec![(3.0 * t).sin() + 1.0]);
        let lifted = lift(&p, &g, &r, &x).unwrap();
        assert_eq!(lifted.state(0, 0, 0, 0), 0.5);
        assert_eq!(project(&r, &g, &lifted), x);
        let direct = integrate_z(&p, &g, &x).unwrap();
        let blocks = integrate_reduced(&p, &r, &lifted).unwrap();
        assert_eq!(payoff(&r, &blocks), direct.z_end());
        assert_eq!(project_z(&r, &blocks), direct.z);
        assert_eq!(blocks[0][..], direct.z[..=r.block_steps]);
    }

    #[test]
    fn zero_lagrangian_blocks_stay_at_gamma() {
        let p = problem(2.0, "0");
        let g = make_grid(0.0, 2.0, 1.0, 0.1).unwrap();
        let x = StateSamples::admissible(&p, &g, |t| vec![t]);
        let r = reduce(&p, &g).unwrap();
        let z = integrate_reduced(&p, &r, &lift(&p, &g, &r, &x).unwrap()).unwrap();
        assert!(z.iter().flatten().all(|&v| v == 1.0));
    }
}
