//! Direct method: the samples of x on (a, b] are decision variables, z(b)
//! is the objective, and the Euler–Lagrange residuals certify the result.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    compute_multipliers, integrate_with_jets, DynamicsError, MultiplierSet, PairContext,
};
use crate::euler_lagrange::{el_residual, verdict_trimmed, ElReport, ExtremalVerdict};
use crate::problem::{Grid, HerglotzProblem, JetTable, StateSamples, TrajectoryPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Minimize,
    Maximize,
}

/// Quadratic penalty w·|x(b) − target|² pinning the right end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pin {
    pub target: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub mode: Mode,
    pub max_iters: usize,
    /// Central-difference step of the objective gradient.
    pub grad_step: f64,
    /// Stop when the largest gradient component is at most this.
    pub tol_grad: f64,
    /// Euler–Lagrange tolerance of the certificate.
    pub tol_el: f64,
    pub seed: u64,
    /// Amplitude of the seeded uniform perturbation of the initial guess.
    pub jitter: f64,
    pub pin: Option<Pin>,
    /// Nodes skipped at each branch end by the certificate.
    pub el_margin: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            mode: Mode::Minimize,
            max_iters: 500,
            grad_step: 1e-5,
            tol_grad: 1e-8,
            tol_el: 1e-3,
            seed: 0,
            jitter: 0.0,
            pin: None,
            el_margin: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("invalid solver options: {0}")]
    BadOptions(String),
    #[error("objective diverged at iteration {iteration}: {value:?}")]
    Diverged { iteration: usize, value: f64 },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

impl SolveOptions {
    pub fn validate(&self, m: usize) -> Result<(), SolveError> {
        let bad = |msg: String| Err(SolveError::BadOptions(msg));
        if !(1e-8..=1e-3).contains(&self.grad_step) {
            return bad(format!(
                "grad_step {:?} outside [1e-8, 1e-3]",
                self.grad_step
            ));
        }
        if !(self.tol_grad > 0.0 && self.tol_el > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return bad("jitter must be non-negative".into());
        }
        if let Some(pin) = &self.pin {
            if pin.target.len() != m {
                return bad(format!("pin target needs {m} components"));
            }
            if !(pin.weight > 0.0 && pin.weight.is_finite()) {
                return bad("pin weight must be positive".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub pair: TrajectoryPair,
    /// z(b) of `pair`.
    pub objective: f64,
    pub multipliers: MultiplierSet,
    pub el_report: ElReport,
    /// Transversality is skipped when the right end is pinned.
    pub certificate: ExtremalVerdict,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
    /// Minimized merit value after each iteration (the first entry is the start).
    pub trace: Vec<f64>,
}

/// z(b) for the decision vector `free` (samples on (a, b]).
pub fn objective(
    problem: &HerglotzProblem,
    grid: &Grid,
    free: &[f64],
) -> Result<f64, DynamicsError> {
    let x = StateSamples::from_free(problem, grid, free);
    let jets = JetTable::build(problem, grid, &x)?;
    let z = integrate_with_jets(problem, grid, &jets)?;
    Ok(*z.last().expect("non-empty"))
}

struct Merit<'a> {
    problem: &'a HerglotzProblem,
    grid: &'a Grid,
    sign: f64,
    pin: Option<&'a Pin>,
    m: usize,
}

impl Merit<'_> {
    fn value(&self, free: &[f64]) -> Result<f64, DynamicsError> {
        let mut f = self.sign * objective(self.problem, self.grid, free)?;
        if let Some(pin) = self.pin {
            let end = &free[free.len() - self.m..];
            f += pin.weight
                * end
                    .iter()
                    .zip(&pin.target)
                    .map(|(x, t)| (x - t) * (x - t))
                    .sum::<f64>();
        }
        Ok(f)
    }

    /// Non-finite or failed evaluations count as +∞ during line search.
    fn value_or_inf(&self, free: &[f64]) -> f64 {
        match self.value(free) {
            Ok(v) if v.is_finite() => v,
            _ => f64::INFINITY,
        }
    }

    fn gradient(&self, free: &[f64], step: f64) -> Result<Vec<f64>, DynamicsError> {
        (0..free.len())
            .into_par_iter()
            .map(|i| {
                let mut probe = free.to_vec();
                probe[i] = free[i] + step;
                let up = self.value(&probe)?;
                probe[i] = free[i] - step;
                let down = self.value(&probe)?;
                Ok((up - down) / (2.0 * step))
            })
            .collect()
    }
}

/// Central-difference gradient of z(b) with respect to the samples on (a, b].
pub fn objective_gradient(
    problem: &HerglotzProblem,
    grid: &Grid,
    free: &[f64],
    step: f64,
) -> Result<Vec<f64>, DynamicsError> {
    Merit {
        problem,
        grid,
        sign: 1.0,
        pin: None,
        m: problem.m(),
    }
    .gradient(free, step)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc: f64, x| acc.max(x.abs()))
}

const DIVERGENCE: f64 = 1e100;

/// Secant search for a zero of the directional derivative, which stays
/// accurate where differences of objective values have lost all digits.
fn secant_search(
    merit: &Merit<'_>,
    x: &[f64],
    f0: f64,
    dir: &[f64],
    slope: f64,
    step: f64,
) -> Option<(f64, f64)> {
    let at =
        |alpha: f64| -> Vec<f64> { x.iter().zip(dir).map(|(xi, di)| xi + alpha * di).collect() };
    let delta = step / inf_norm(dir).max(1e-300);
    let dphi = |alpha: f64| {
        let up = merit.value_or_inf(&at(alpha + delta));
        let down = merit.value_or_inf(&at(alpha - delta));
        (up - down) / (2.0 * delta)
    };
    let (mut lo, mut d_lo) = (0.0, slope);
    let mut hi: Option<(f64, f64)> = None;
    let mut alpha = 1.0;
    for _ in 0..30 {
        let d = dphi(alpha);
        if !d.is_finite() {
            hi = None;
            alpha = lo + 0.1 * (alpha - lo);
            continue;
        }
        if d.abs() <= 0.1 * slope.abs() {
            break;
        }
        let (prev, d_prev) = (lo, d_lo);
        if d < 0.0 {
            lo = alpha;
            d_lo = d;
        } else {
            hi = Some((alpha, d));
        }
        alpha = match hi {
            Some((a_hi, d_hi)) => {
                let s = lo - d_lo * (a_hi - lo) / (d_hi - d_lo);
                s.clamp(lo + 0.01 * (a_hi - lo), a_hi - 0.01 * (a_hi - lo))
            }
            // Still descending: extrapolate along the secant, by at most 8x.
            None if d > d_prev => {
                (alpha - d * (alpha - prev) / (d - d_prev)).clamp(1.5 * alpha, 8.0 * alpha)
            }
            None => 2.0 * alpha,
        };
    }
    let f = merit.value_or_inf(&at(alpha));
    (f.is_finite() && f <= f0 + 1e-12 * f0.abs().max(1.0)).then_some((alpha, f))
}

/// Backtracking with a quadratic model until Armijo holds.
fn backtrack(merit: &Merit<'_>, x: &[f64], f0: f64, dir: &[f64], slope: f64) -> Option<(f64, f64)> {
    const ARMIJO: f64 = 1e-4;
    let trial = |alpha: f64| {
        let probe: Vec<f64> = x.iter().zip(dir).map(|(xi, di)| xi + alpha * di).collect();
        merit.value_or_inf(&probe)
    };
    let mut alpha = 1.0;
    for _ in 0..40 {
        let fa = trial(alpha);
        if fa <= f0 + ARMIJO * alpha * slope {
            return Some((alpha, fa));
        }
        let curvature = (fa - f0 - slope * alpha) / (alpha * alpha);
        alpha = if fa.is_finite() && curvature > 0.0 {
            (-slope / (2.0 * curvature)).clamp(0.1 * alpha, 0.5 * alpha)
        } else {
            0.1 * alpha
        };
    }
    None
}

fn initial_guess(problem: &HerglotzProblem, grid: &Grid, opts: &SolveOptions) -> Vec<f64> {
    let m = problem.m();
    let start: Vec<f64> = (0..m)
        .map(|c| problem.history_jet(0, c, problem.a()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut free = Vec::with_capacity(grid.steps * m);
    for _ in 0..grid.steps {
        for v in &start {
            let noise = if opts.jitter > 0.0 {
                rng.gen_range(-opts.jitter..=opts.jitter)
            } else {
                0.0
            };
            free.push(v + noise);
        }
    }
    free
}

/// Quasi-Newton search for an extremizer, then the Euler–Lagrange certificate.
pub fn solve_extremal(
    problem: &HerglotzProblem,
    grid: &Grid,
    opts: &SolveOptions,
) -> Result<SolveResult, SolveError> {
    opts.validate(problem.m())?;
    let merit = Merit {
        problem,
        grid,
        sign: match opts.mode {
            Mode::Minimize => 1.0,
            Mode::Maximize => -1.0,
        },
        pin: opts.pin.as_ref(),
        m: problem.m(),
    };
    let mut x = initial_guess(problem, grid, opts);
    let dim = x.len();
    let mut f = merit.value(&x)?;
    if !f.is_finite() || f.abs() > DIVERGENCE {
        return Err(SolveError::Diverged {
            iteration: 0,
            value: f,
        });
    }
    let mut g = merit.gradient(&x, opts.grad_step)?;
    // Inverse Hessian approximation, row-major; `None` until the first curvature pair.
    let mut hinv: Option<Vec<f64>> = None;
    let mut trace = vec![f];
    let mut iterations = 0;
    let mut converged = inf_norm(&g) <= opts.tol_grad;

    while !converged && iterations < opts.max_iters {
        let mut dir: Vec<f64> = match &hinv {
            Some(hm) => (0..dim)
                .map(|i| -dot(&hm[i * dim..(i + 1) * dim], &g))
                .collect(),
            None => {
                let scale = 1.0 / inf_norm(&g).max(1e-300);
                g.iter().map(|gi| -gi * scale.min(1.0)).collect()
            }
        };
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            hinv = None;
            dir = g.iter().map(|gi| -gi).collect();
            slope = dot(&g, &dir);
        }
        let found = secant_search(&merit, &x, f, &dir, slope, opts.grad_step)
            .or_else(|| backtrack(&merit, &x, f, &dir, slope));
        let Some((alpha, f_new)) = found else {
            break;
        };
        iterations += 1;
        let s: Vec<f64> = dir.iter().map(|d| alpha * d).collect();
        let x_new: Vec<f64> = x.iter().zip(&s).map(|(a, b)| a + b).collect();
        if f_new.abs() > DIVERGENCE || inf_norm(&x_new) > 1e12 {
            return Err(SolveError::Diverged {
                iteration: iterations,
                value: f_new,
            });
        }
        let g_new = merit.gradient(&x_new, opts.grad_step)?;
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            let hm = hinv.get_or_insert_with(|| {
                let gamma = sy / dot(&y, &y);
                let mut id = vec![0.0; dim * dim];
                for i in 0..dim {
                    id[i * dim + i] = gamma;
                }
                id
            });
            bfgs_update(hm, dim, &s, &y, sy);
        }
        x = x_new;
        f = f_new;
        g = g_new;
        trace.push(f);
        converged = inf_norm(&g) <= opts.tol_grad;
    }

    let samples = StateSamples::from_free(problem, grid, &x);
    let ctx = PairContext::from_x(problem, grid, &samples)?;
    let multipliers = compute_multipliers(&ctx)?;
    let el_report = el_residual(&ctx, &multipliers)?;
    let certificate = verdict_trimmed(&el_report, opts.tol_el, opts.pin.is_none(), opts.el_margin);
    Ok(SolveResult {
        objective: ctx.pair.z_end(),
        pair: ctx.pair,
        multipliers,
        el_report,
        certificate,
        iterations,
        converged,
        grad_norm: inf_norm(&g),
        trace,
    })
}

/// H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ with ρ = 1 / (s·y).
fn bfgs_update(h: &mut [f64], dim: usize, s: &[f64], y: &[f64], sy: f64) {
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..dim)
        .map(|i| dot(&h[i * dim..(i + 1) * dim], y))
        .collect();
    let yhy = dot(y, &hy);
    let coeff = (1.0 + rho * yhy) * rho;
    for i in 0..dim {
        for j in 0..dim {
            h[i * dim + j] += coeff * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}
