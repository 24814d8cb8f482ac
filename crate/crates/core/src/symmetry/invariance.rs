use crate::dynamics::PairContext;
use crate::expr::{Expr, SlotId, SlotValues};
use crate::problem::{param_value, LagrangianPoint};
use crate::stencil::{differentiate_series, SERIES_BOUNDARY_ORDER};

use super::group::{GaugeGroup, StateBinding};
use super::testfn::GaugeTestFunction;
use super::{nan_max, SymmetryError};

/// |dT/dt| below this makes the transformation singular.
pub const SINGULAR_RATE: f64 = 1e-8;

/// Symbolic total time derivative along a trajectory: each jet slot advances
/// one order, z advances to L, and frozen slots are constants.
pub fn total_derivative(e: &Expr, lagrangian: &Expr) -> Expr {
    let mut acc = Expr::zero();
    for s in e.slots() {
        let rate = match s {
            SlotId::Time => Expr::one(),
            SlotId::State { order, comp } => Expr::slot(SlotId::state(order + 1, comp)),
            SlotId::Delayed { order, comp } => Expr::slot(SlotId::delayed(order + 1, comp)),
            SlotId::Z => lagrangian.clone(),
            SlotId::Gauge { order, comp } => Expr::slot(SlotId::gauge(order + 1, comp)),
            _ => continue,
        };
        acc = Expr::add(acc, Expr::mul(e.differentiate(s), rate));
    }
    acc.simplify()
}

/// Values frozen during differentiation: p(a), p(b) and z(b).
#[derive(Debug, Clone, PartialEq)]
pub struct Frozen {
    pub p_at_a: Vec<f64>,
    pub p_at_b: Vec<f64>,
    pub z_b: f64,
}

impl Frozen {
    pub fn new(p: &GaugeTestFunction, a: f64, b: f64, z_b: f64) -> Self {
        let d = p.d();
        Frozen {
            p_at_a: (0..d).map(|j| p.value(0, j, a)).collect(),
            p_at_b: (0..d).map(|j| p.value(0, j, b)).collect(),
            z_b,
        }
    }
}

/// Every α-slot at one node: trajectory jets, z, gauge jets and frozen values.
#[derive(Debug, Clone)]
pub struct AlphaPoint<'a> {
    pub base: LagrangianPoint<'a>,
    gauge: Vec<f64>,
    d: usize,
    frozen: &'a Frozen,
}

impl SlotValues for AlphaPoint<'_> {
    fn value(&self, slot: SlotId) -> Option<f64> {
        match slot {
            SlotId::Gauge { order, comp } => self.gauge.get(order * self.d + comp).copied(),
            SlotId::GaugeAtA { comp } => self.frozen.p_at_a.get(comp).copied(),
            SlotId::GaugeAtB { comp } => self.frozen.p_at_b.get(comp).copied(),
            SlotId::TerminalZ => Some(self.frozen.z_b),
            _ => self.base.value(slot),
        }
    }
}

/// α at domain node `d` for gauge function `p`.
pub(crate) fn alpha_at<'a>(
    ctx: &'a PairContext<'_>,
    group: &GaugeGroup,
    p: &GaugeTestFunction,
    frozen: &'a Frozen,
    d: usize,
) -> AlphaPoint<'a> {
    let base = LagrangianPoint::at_node(
        ctx.problem,
        &ctx.grid,
        &ctx.jets,
        ctx.grid.start() + d,
        ctx.pair.z[d],
    );
    AlphaPoint {
        gauge: p.jets(base.t, group.q + group.n + 2),
        d: group.d,
        base,
        frozen,
    }
}

pub(crate) fn eval_at(
    e: &Expr,
    what: &'static str,
    point: &AlphaPoint<'_>,
) -> Result<f64, SymmetryError> {
    e.eval(point).map_err(|source| SymmetryError::Eval {
        what,
        t: point.base.t,
        source,
    })
}

/// d/dt of `expr` along the pair and gauge function `p`, at domain node `d`.
pub fn total_time_derivative(
    ctx: &PairContext<'_>,
    group: &GaugeGroup,
    expr: &Expr,
    p: &GaugeTestFunction,
    d: usize,
) -> Result<f64, SymmetryError> {
    let frozen = Frozen::new(p, ctx.grid.a, ctx.grid.b, ctx.pair.z_end());
    let point = alpha_at(ctx, group, p, &frozen, d);
    eval_at(
        &total_derivative(expr, ctx.problem.lagrangian()),
        "a total derivative",
        &point,
    )
}

/// T, Z, dT/dt and d^k/dT^k X on every domain node for one gauge function.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformSeries {
    m: usize,
    pub time: Vec<f64>,
    pub z: Vec<f64>,
    pub rate: Vec<f64>,
    /// `levels[k][d * m + c]`.
    levels: Vec<Vec<f64>>,
}

impl TransformSeries {
    /// Level 0 is X itself; the symbolic levels follow from the chain rule and
    /// deeper levels differentiate the previous level's node series.
    pub fn build(
        ctx: &PairContext<'_>,
        group: &GaugeGroup,
        p: &GaugeTestFunction,
        frozen: &Frozen,
        max_level: usize,
    ) -> Result<Self, SymmetryError> {
        let m = group.m;
        let count = ctx.len();
        let mut time = Vec::with_capacity(count);
        let mut z = Vec::with_capacity(count);
        let mut rate = Vec::with_capacity(count);
        let symbolic = max_level.min(group.symbolic_levels());
        let mut levels = vec![Vec::with_capacity(count * m); symbolic + 1];
        for d in 0..count {
            let point = alpha_at(ctx, group, p, frozen, d);
            let r = eval_at(&group.dt, "dT/dt", &point)?;
            if !(r.abs() >= SINGULAR_RATE) {
                return Err(SymmetryError::Singular {
                    t: point.base.t,
                    rate: r,
                });
            }
            rate.push(r);
            time.push(eval_at(&group.t, "T", &point)?);
            z.push(eval_at(&group.z, "Z", &point)?);
            for c in 0..m {
                levels[0].push(eval_at(&group.x[c], "X", &point)?);
            }
            for k in 1..=symbolic {
                for e in &group.levels[k - 1] {
                    levels[k].push(eval_at(e, "d^k/dT^k X", &point)?);
                }
            }
        }
        for k in symbolic + 1..=max_level {
            let mut next = vec![0.0; count * m];
            for c in 0..m {
                let series: Vec<f64> = (0..count).map(|d| levels[k - 1][d * m + c]).collect();
                let der = differentiate_series(&series, ctx.grid.h, 1, SERIES_BOUNDARY_ORDER)?;
                for d in 0..count {
                    next[d * m + c] = der[d] / rate[d];
                }
            }
            levels.push(next);
        }
        Ok(TransformSeries {
            m,
            time,
            z,
            rate,
            levels,
        })
    }

    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    /// d^k/dT^k X at domain node `d`, one value per component.
    pub fn level(&self, k: usize, d: usize) -> &[f64] {
        &self.levels[k][d * self.m..(d + 1) * self.m]
    }
}

/// d^k/dT^k X at domain node `d` for gauge function `p`.
pub fn dtk_x(
    ctx: &PairContext<'_>,
    group: &GaugeGroup,
    p: &GaugeTestFunction,
    k: usize,
    d: usize,
) -> Result<Vec<f64>, SymmetryError> {
    let frozen = Frozen::new(p, ctx.grid.a, ctx.grid.b, ctx.pair.z_end());
    let series = TransformSeries::build(ctx, group, p, &frozen, k)?;
    Ok(series.level(k, d).to_vec())
}

/// Semi-invariance residuals for one test function.
#[derive(Debug, Clone, PartialEq)]
pub struct TestResidual {
    /// Human-readable form of the test function.
    pub function: String,
    pub eq1: Vec<f64>,
    pub eq2: Vec<f64>,
    pub max_eq1: f64,
    pub max_eq2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    pub tests: Vec<TestResidual>,
    pub max_eq1: f64,
    pub max_eq2: f64,
}

impl InvarianceReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_eq1 <= tol && self.max_eq2 <= tol
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, nan_max)
}

/// L with its slots bound to the transformed trajectory at domain node `d`.
struct TransformedPoint<'a> {
    series: &'a TransformSeries,
    point: &'a AlphaPoint<'a>,
    binding: StateBinding,
    d: usize,
    shift: usize,
}

impl SlotValues for TransformedPoint<'_> {
    fn value(&self, slot: SlotId) -> Option<f64> {
        let level = |k: usize, c: usize, d: usize| {
            (k <= self.series.max_level()).then(|| self.series.level(k, d)[c])
        };
        match (slot, self.binding) {
            (SlotId::Time, _) => Some(self.series.time[self.d]),
            (SlotId::Z, _) => Some(self.series.z[self.d]),
            (SlotId::State { order, comp }, StateBinding::Shifted) => level(order, comp, self.d),
            (SlotId::Delayed { order, comp }, StateBinding::Shifted) => {
                if self.d >= self.shift {
                    level(order, comp, self.d - self.shift)
                } else {
                    self.point.base.xt.try_get(order, comp)
                }
            }
            (SlotId::Delayed { order, comp }, StateBinding::SameTime) => level(order, comp, self.d),
            (SlotId::Param(p), _) => {
                let (a, b, tau) = self.point.base.params;
                Some(param_value(p, a, b, tau))
            }
            _ => self.point.base.value(slot),
        }
    }
}

/// Node-wise residuals of
///   z(b)/(b−a) + dF/dt − Z(α(b))/(T(α(b)) − T(α(a)))·dT/dt   (EQ1)
///   dZ/dt − L(g(α))·dT/dt                                   (EQ2)
/// for every test function.
pub fn check_semi_invariance(
    ctx: &PairContext<'_>,
    group: &GaugeGroup,
    tests: &[GaugeTestFunction],
) -> Result<InvarianceReport, SymmetryError> {
    let problem = ctx.problem;
    let (a, b) = (ctx.grid.a, ctx.grid.b);
    let z_b = ctx.pair.z_end();
    let l = problem.lagrangian();
    let mut out = Vec::with_capacity(tests.len());
    for p in tests {
        if p.d() != group.d {
            return Err(SymmetryError::Dimension {
                expected: group.d,
                found: p.d(),
            });
        }
        let frozen = Frozen::new(p, a, b, z_b);
        let series = TransformSeries::build(ctx, group, p, &frozen, problem.n())?;
        let last = ctx.len() - 1;
        let scale = series.z[last] / (series.time[last] - series.time[0]);
        let mut eq1 = Vec::with_capacity(ctx.len());
        let mut eq2 = Vec::with_capacity(ctx.len());
        for d in 0..ctx.len() {
            let point = alpha_at(ctx, group, p, &frozen, d);
            let rate = series.rate[d];
            let df = eval_at(&group.df, "dF/dt", &point)?;
            eq1.push(z_b / (b - a) + df - scale * rate);
            let dz = eval_at(&group.dz, "dZ/dt", &point)?;
            let transformed = TransformedPoint {
                series: &series,
                point: &point,
                binding: group.binding,
                d,
                shift: ctx.grid.delay_steps,
            };
            let lg = l.eval(&transformed).map_err(|source| SymmetryError::Eval {
                what: "the transformed Lagrangian",
                t: point.base.t,
                source,
            })?;
            eq2.push(dz - lg * rate);
        }
        out.push(TestResidual {
            function: p.to_string(),
            max_eq1: max_abs(&eq1),
            max_eq2: max_abs(&eq2),
            eq1,
            eq2,
        });
    }
    let max_eq1 = out.iter().map(|r| r.max_eq1).fold(0.0, nan_max);
    let max_eq2 = out.iter().map(|r| r.max_eq2).fold(0.0, nan_max);
    Ok(InvarianceReport {
        tests: out,
        max_eq1,
        max_eq2,
    })
}
