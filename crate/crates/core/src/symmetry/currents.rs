use serde::{Deserialize, Serialize};

use crate::dynamics::{compute_hamiltonian, MultiplierSet, PairContext};
use crate::euler_lagrange::ExtremalVerdict;
use crate::expr::{Expr, SlotId};

use super::group::GaugeGroup;
use super::invariance::{alpha_at, eval_at, AlphaPoint, Frozen, TransformSeries, SINGULAR_RATE};
use super::testfn::GaugeTestFunction;
use super::{nan_max, SymmetryError};

/// Step of the numeric gauge partial.
pub const GAUGE_STEP: f64 = 1e-5;

/// Which assembly of the currents to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurrentFormula {
    /// Any n: Σ_k φ_k ∂(d^{k−1}/dT^{k−1} X)/∂p and the full Hamiltonian.
    #[default]
    General,
    /// n = 1: φ_1 ∂X/∂p and H = φ_1·ẋ + ψ_z L.
    FirstOrder,
    /// n = 1 with L independent of z: ψ_z ≡ 1, H = φ_1·ẋ + L, and the
    /// ψ_z ∂Z/∂p term dropped when Z = z.
    Classical,
}

/// The five summands of one current, node by node.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentTerms {
    /// ∂F/∂p_J^{(I)} at p = 0.
    pub gauge_function: Vec<f64>,
    /// θ_J^I·z(b)/(b − a).
    pub theta: f64,
    /// Σ_k φ_k·∂(d^{k−1}/dT^{k−1} X)/∂p_J^{(I)} at p = 0.
    pub state: Vec<f64>,
    /// ψ_z·∂Z/∂p_J^{(I)} at p = 0.
    pub z: Vec<f64>,
    /// −H·∂T/∂p_J^{(I)} at p = 0.
    pub hamiltonian: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoetherCurrent {
    /// Gauge derivative order I.
    pub order: usize,
    /// Gauge component J (zero-based).
    pub comp: usize,
    pub values: Vec<f64>,
    pub terms: CurrentTerms,
    /// max |C(t) − C(a)| / max(1, max |C|).
    pub deviation: f64,
}

impl NoetherCurrent {
    /// Column name, with one-based component.
    pub fn label(&self) -> String {
        format!("C_{}_{}", self.order, self.comp + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoetherReport {
    pub formula: CurrentFormula,
    /// d(q+1) currents ordered by I, then J.
    pub currents: Vec<NoetherCurrent>,
}

/// Normalized deviation of a series from its first value.
pub fn deviation(values: &[f64]) -> f64 {
    let first = values.first().copied().unwrap_or(0.0);
    let spread = values.iter().map(|v| (v - first).abs()).fold(0.0, nan_max);
    let size = values.iter().map(|v| v.abs()).fold(1.0, nan_max);
    spread / size
}

/// α at domain node `d` with every gauge jet and frozen gauge value zero.
fn zero_alpha<'a>(
    ctx: &'a PairContext<'_>,
    group: &GaugeGroup,
    frozen: &'a Frozen,
    d: usize,
) -> AlphaPoint<'a> {
    alpha_at(ctx, group, &GaugeTestFunction::zero(group.d), frozen, d)
}

fn zero_frozen(ctx: &PairContext<'_>, group: &GaugeGroup) -> Frozen {
    Frozen::new(
        &GaugeTestFunction::zero(group.d),
        ctx.grid.a,
        ctx.grid.b,
        ctx.pair.z_end(),
    )
}

/// ∂expr/∂p_J^{(I)} at p = 0 on every domain node, from the symbolic derivative.
pub fn gauge_partial_symbolic(
    ctx: &PairContext<'_>,
    group: &GaugeGroup,
    expr: &Expr,
    order: usize,
    comp: usize,
) -> Result<Vec<f64>, SymmetryError> {
    let partial = expr.differentiate(SlotId::gauge(order, comp));
    let frozen = zero_frozen(ctx, group);
    (0..ctx.len())
        .map(|d| {
            eval_at(
                &partial,
                "a gauge partial",
                &zero_alpha(ctx, group, &frozen, d),
            )
        })
        .collect()
}

/// ∂expr/∂p_J^{(I)} at p = 0 by central differences along the family
/// p_J(s) = c·(s − t)^I / I!, whose only non-zero jet at t is the I-th.
pub fn gauge_partial_numeric(
    ctx: &PairContext<'_>,
    group: &GaugeGroup,
    expr: &Expr,
    order: usize,
    comp: usize,
) -> Result<Vec<f64>, SymmetryError> {
    let frozen = zero_frozen(ctx, group);
    (0..ctx.len())
        .map(|d| {
            let t = ctx.grid.time(ctx.grid.start() + d);
            let at = |c: f64| {
                let p = GaugeTestFunction::impulse(group.d, t, order, comp, c);
                eval_at(
                    expr,
                    "a gauge partial",
                    &alpha_at(ctx, group, &p, &frozen, d),
                )
            };
            Ok((at(GAUGE_STEP)? - at(-GAUGE_STEP)?) / (2.0 * GAUGE_STEP))
        })
        .collect()
}

/// ∂(d^k/dT^k X_c)/∂p_J^{(I)} at p = 0, `[d * m + c]`, numerically: the
/// level-k series is rebuilt for each node with the impulse family centered there.
pub fn level_partial_numeric(
    ctx: &PairContext<'_>,
    group: &GaugeGroup,
    level: usize,
    order: usize,
    comp: usize,
) -> Result<Vec<f64>, SymmetryError> {
    let m = group.m;
    let frozen = zero_frozen(ctx, group);
    let mut out = vec![0.0; ctx.len() * m];
    for d in 0..ctx.len() {
        let t = ctx.grid.time(ctx.grid.start() + d);
        let at = |c: f64| -> Result<Vec<f64>, SymmetryError> {
            let p = GaugeTestFunction::impulse(group.d, t, order, comp, c);
            let series = TransformSeries::build(ctx, group, &p, &frozen, level)?;
            Ok(series.level(level, d).to_vec())
        };
        let (up, down) = (at(GAUGE_STEP)?, at(-GAUGE_STEP)?);
        for c in 0..m {
            out[d * m + c] = (up[c] - down[c]) / (2.0 * GAUGE_STEP);
        }
    }
    Ok(out)
}

/// `[d * m + c]` partials of every level 0..n−1 of the X recursion.
fn state_partials(
    ctx: &PairContext<'_>,
    group: &GaugeGroup,
    order: usize,
    comp: usize,
    levels: usize,
) -> Result<Vec<Vec<f64>>, SymmetryError> {
    let m = group.m;
    let mut out = Vec::with_capacity(levels);
    for level in 0..levels {
        let symbolic = if level == 0 {
            Some(group.x.as_slice())
        } else {
            group.level_expr(level)
        };
        let series = match symbolic {
            Some(exprs) => {
                let per_comp = exprs
                    .iter()
                    .map(|e| gauge_partial_symbolic(ctx, group, e, order, comp))
                    .collect::<Result<Vec<_>, _>>()?;
                let mut flat = vec![0.0; ctx.len() * m];
                for (c, s) in per_comp.iter().enumerate() {
                    for (d, v) in s.iter().enumerate() {
                        flat[d * m + c] = *v;
                    }
                }
                flat
            }
            None => level_partial_numeric(ctx, group, level, order, comp)?,
        };
        out.push(series);
    }
    Ok(out)
}

/// The d(q+1) currents along the pair in `ctx`.
pub fn noether_currents(
    ctx: &PairContext<'_>,
    group: &GaugeGroup,
    mult: &MultiplierSet,
    formula: CurrentFormula,
) -> Result<NoetherReport, SymmetryError> {
    let problem = ctx.problem;
    let (n, m) = (problem.n(), problem.m());
    match formula {
        CurrentFormula::General => {}
        CurrentFormula::FirstOrder if n == 1 => {}
        CurrentFormula::Classical if n == 1 && problem.z_independent() => {}
        _ => return Err(SymmetryError::Formula(formula)),
    }
    let count = ctx.len();
    let start = ctx.grid.start();
    if n >= 2 {
        let frozen = zero_frozen(ctx, group);
        for d in 0..count {
            let point = zero_alpha(ctx, group, &frozen, d);
            let rate = eval_at(&group.dt, "dT/dt", &point)?;
            if !(rate.abs() >= SINGULAR_RATE) {
                return Err(SymmetryError::Singular {
                    t: point.base.t,
                    rate,
                });
            }
        }
    }

    let psi: Vec<f64> = match formula {
        CurrentFormula::Classical => vec![1.0; count],
        _ => mult.psi_z.clone(),
    };
    let hamiltonian: Vec<f64> = match formula {
        CurrentFormula::General => compute_hamiltonian(ctx, mult),
        _ => (0..count)
            .map(|d| {
                let jets = ctx.jets.node(start + d);
                let mut acc = 0.0;
                for c in 0..m {
                    acc += mult.phi(1, start + d, c) * jets.get(1, c);
                }
                acc + psi[d] * ctx.lagrangian[d]
            })
            .collect(),
    };
    let drop_z = formula == CurrentFormula::Classical && group.z == Expr::slot(SlotId::Z);
    let z_b = ctx.pair.z_end();
    let width = ctx.grid.b - ctx.grid.a;

    let mut currents = Vec::with_capacity((group.q + 1) * group.d);
    for order in 0..=group.q {
        for comp in 0..group.d {
            let gauge_function = gauge_partial_symbolic(ctx, group, &group.f, order, comp)?;
            let theta = group.theta[order][comp] * z_b / width;
            let levels = match formula {
                CurrentFormula::General => n,
                _ => 1,
            };
            let partials = state_partials(ctx, group, order, comp, levels)?;
            let state: Vec<f64> = (0..count)
                .map(|d| {
                    let mut acc = 0.0;
                    for (k, level) in partials.iter().enumerate() {
                        for c in 0..m {
                            acc += mult.phi(k + 1, start + d, c) * level[d * m + c];
                        }
                    }
                    acc
                })
                .collect();
            let z_term = if drop_z {
                vec![0.0; count]
            } else {
                let dz = gauge_partial_symbolic(ctx, group, &group.z, order, comp)?;
                dz.iter().zip(&psi).map(|(v, s)| s * v).collect()
            };
            let dt = gauge_partial_symbolic(ctx, group, &group.t, order, comp)?;
            let ham: Vec<f64> = dt.iter().zip(&hamiltonian).map(|(v, h)| -h * v).collect();
            let values: Vec<f64> = (0..count)
                .map(|d| gauge_function[d] + theta + state[d] + z_term[d] + ham[d])
                .collect();
            currents.push(NoetherCurrent {
                order,
                comp,
                deviation: deviation(&values),
                values,
                terms: CurrentTerms {
                    gauge_function,
                    theta,
                    state,
                    z: z_term,
                    hamiltonian: ham,
                },
            });
        }
    }
    Ok(NoetherReport { formula, currents })
}

/// Constancy verdict for one current.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constancy {
    pub label: String,
    pub deviation: f64,
    /// Whether the pair passed the Euler–Lagrange certificate.
    pub extremal: bool,
    /// Largest Euler–Lagrange residual considered by the certificate.
    pub el_residual: Option<f64>,
    /// deviation ≤ tol and the pair is certified extremal.
    pub constant: bool,
}

pub fn constancy_report(
    report: &NoetherReport,
    verdict: &ExtremalVerdict,
    tol: f64,
) -> Vec<Constancy> {
    report
        .currents
        .iter()
        .map(|c| Constancy {
            label: c.label(),
            deviation: c.deviation,
            extremal: verdict.extremal,
            el_residual: verdict.worst.map(|w| w.value.abs()),
            constant: verdict.extremal && c.deviation <= tol,
        })
        .collect()
}
