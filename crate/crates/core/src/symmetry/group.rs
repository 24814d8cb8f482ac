use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, Expr, ParseError, SlotId, Vocabulary};
use crate::problem::{param_value, HerglotzProblem};

use super::invariance::total_derivative;

/// Which state the transformation X acts on, and how the transformed
/// Lagrangian L(g(α)) reads it back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateBinding {
    /// X transforms x(t). State jets of L read d^k/dT^k X at t; delayed
    /// jets read the same maps at t − τ (the untransformed history before a).
    #[default]
    Shifted,
    /// X transforms x(t − τ). Delayed jets of L read d^k/dT^k X at t;
    /// state jets are left untransformed.
    SameTime,
}

/// Textual form of a gauge group as it appears in problem files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub q: usize,
    pub d: usize,
    #[serde(rename = "T")]
    pub t: String,
    #[serde(rename = "X")]
    pub x: Vec<String>,
    #[serde(rename = "Z")]
    pub z: String,
    #[serde(rename = "F", default = "zero_source")]
    pub f: String,
    /// `theta[I][J]`; empty means all zero.
    #[serde(default)]
    pub theta: Vec<Vec<f64>>,
    #[serde(default)]
    pub binding: StateBinding,
    /// Degrees of the polynomial test functions used by the invariance check.
    #[serde(default)]
    pub p_test_degrees: Vec<usize>,
}

fn zero_source() -> String {
    "0".into()
}

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("cannot parse group field {field}: {source}")]
    Parse {
        field: String,
        #[source]
        source: ParseError,
    },
    #[error("invalid group: {0}")]
    Shape(String),
}

/// A gauge transformation group g(α) = (T, X, Z) with its semi-invariance
/// function F and constants θ, bound to one problem.
#[derive(Debug, Clone)]
pub struct GaugeGroup {
    pub(crate) q: usize,
    pub(crate) d: usize,
    pub(crate) n: usize,
    pub(crate) m: usize,
    pub(crate) t: Expr,
    pub(crate) x: Vec<Expr>,
    pub(crate) z: Expr,
    pub(crate) f: Expr,
    pub(crate) theta: Vec<Vec<f64>>,
    pub(crate) binding: StateBinding,
    /// dT/dt, dZ/dt, dF/dt along trajectories.
    pub(crate) dt: Expr,
    pub(crate) dz: Expr,
    pub(crate) df: Expr,
    /// `levels[k - 1][c]` = d^k/dT^k X_c for the leading levels whose jets
    /// all exist (orders ≤ n + 1); deeper levels come from node series.
    pub(crate) levels: Vec<Vec<Expr>>,
}

impl GaugeGroup {
    pub fn parse(problem: &HerglotzProblem, spec: &GroupSpec) -> Result<Self, GroupError> {
        let (n, m) = (problem.n(), problem.m());
        if spec.d == 0 {
            return Err(GroupError::Shape(
                "gauge dimension d must be at least 1".into(),
            ));
        }
        if spec.x.len() != m {
            return Err(GroupError::Shape(format!(
                "X needs {m} components, found {}",
                spec.x.len()
            )));
        }
        let theta = if spec.theta.is_empty() {
            vec![vec![0.0; spec.d]; spec.q + 1]
        } else {
            spec.theta.clone()
        };
        if theta.len() != spec.q + 1 || theta.iter().any(|row| row.len() != spec.d) {
            return Err(GroupError::Shape(format!(
                "theta must be {}×{}",
                spec.q + 1,
                spec.d
            )));
        }
        if theta.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GroupError::Shape("theta must be finite".into()));
        }
        let alpha = Vocabulary::alpha(n, m, spec.q, spec.d);
        let read = |field: String, src: &str, vocab: &Vocabulary| {
            expr::parse(src, vocab).map_err(|source| GroupError::Parse { field, source })
        };
        let t = read("T".into(), &spec.t, &alpha)?;
        let x = spec
            .x
            .iter()
            .enumerate()
            .map(|(j, src)| read(format!("X[{j}]"), src, &alpha))
            .collect::<Result<Vec<_>, _>>()?;
        let z = read("Z".into(), &spec.z, &alpha)?;
        let f = read(
            "F".into(),
            &spec.f,
            &Vocabulary::gauge_function(n, m, spec.q, spec.d),
        )?;
        Ok(Self::assemble(
            problem,
            spec.q,
            spec.d,
            t,
            x,
            z,
            f,
            theta,
            spec.binding,
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        problem: &HerglotzProblem,
        q: usize,
        d: usize,
        t: Expr,
        x: Vec<Expr>,
        z: Expr,
        f: Expr,
        theta: Vec<Vec<f64>>,
        binding: StateBinding,
    ) -> Self {
        let l = problem.lagrangian();
        let n = problem.n();
        let dt = total_derivative(&t, l);
        let available = |e: &Expr| {
            e.slots().into_iter().all(|s| match s {
                SlotId::State { order, .. } | SlotId::Delayed { order, .. } => order <= n + 1,
                _ => true,
            })
        };
        let mut levels: Vec<Vec<Expr>> = Vec::new();
        for _ in 1..=n {
            let prev = levels.last().unwrap_or(&x);
            let next: Vec<Expr> = prev
                .iter()
                .map(|e| Expr::div(total_derivative(e, l), dt.clone()).simplify())
                .collect();
            if !next.iter().all(available) {
                break;
            }
            levels.push(next);
        }
        GaugeGroup {
            q,
            d,
            n: problem.n(),
            m: problem.m(),
            dz: total_derivative(&z, l),
            df: total_derivative(&f, l),
            dt,
            levels,
            t,
            x,
            z,
            f,
            theta,
            binding,
        }
    }

    /// T = t, X = x (or x(t − τ)), Z = z, F ≡ 0, θ = 0.
    pub fn identity(problem: &HerglotzProblem, q: usize, d: usize) -> Self {
        let x = (0..problem.m())
            .map(|c| Expr::slot(SlotId::state(0, c)))
            .collect();
        Self::assemble(
            problem,
            q,
            d,
            Expr::slot(SlotId::Time),
            x,
            Expr::slot(SlotId::Z),
            Expr::zero(),
            vec![vec![0.0; d]; q + 1],
            StateBinding::Shifted,
        )
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn binding(&self) -> StateBinding {
        self.binding
    }

    pub fn theta(&self, order: usize, comp: usize) -> f64 {
        self.theta[order][comp]
    }

    pub fn transform_time(&self) -> &Expr {
        &self.t
    }

    pub fn transform_state(&self) -> &[Expr] {
        &self.x
    }

    pub fn transform_z(&self) -> &Expr {
        &self.z
    }

    pub fn gauge_function(&self) -> &Expr {
        &self.f
    }

    /// Number of leading levels of the X recursion held symbolically.
    pub fn symbolic_levels(&self) -> usize {
        self.levels.len()
    }

    /// Level `k` ≥ 1 of the X recursion, when held symbolically.
    pub fn level_expr(&self, k: usize) -> Option<&[Expr]> {
        self.levels.get(k.checked_sub(1)?).map(Vec::as_slice)
    }

    /// Same group with F and θ multiplied by `factor`.
    pub fn scaled(&self, problem: &HerglotzProblem, factor: f64) -> Self {
        let theta = self
            .theta
            .iter()
            .map(|row| row.iter().map(|v| v * factor).collect())
            .collect();
        Self::assemble(
            problem,
            self.q,
            self.d,
            self.t.clone(),
            self.x.clone(),
            self.z.clone(),
            Expr::mul(Expr::constant(factor), self.f.clone()),
            theta,
            self.binding,
        )
    }
}

/// A failure of the identity-at-zero or monotonicity requirement.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityViolation {
    /// `T`, `X_j`, `Z` or `dT/dt`.
    pub what: String,
    pub sample: usize,
    pub value: f64,
}

/// Evaluate T − t, X − x and Z − z at random arguments with zero gauge jets,
/// and dT/dt at arguments with small gauge jets.
pub fn check_identity_at_zero(
    problem: &HerglotzProblem,
    group: &GaugeGroup,
    sample_count: usize,
) -> Vec<IdentityViolation> {
    const TOL: f64 = 1e-12;
    let (n, m, q, d) = (group.n, group.m, group.q, group.d);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut out = Vec::new();
    for sample in 0..sample_count {
        let t = rng.gen_range(problem.a()..=problem.b());
        let x: Vec<f64> = (0..(n + 2) * m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let xt: Vec<f64> = (0..(n + 2) * m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let z = rng.gen_range(-2.0..2.0);
        let small: Vec<f64> = (0..(q + 2) * d)
            .map(|_| rng.gen_range(-1e-3..1e-3))
            .collect();
        let env = |p: &[f64]| {
            let p = p.to_vec();
            let (x, xt) = (x.clone(), xt.clone());
            move |s: SlotId| match s {
                SlotId::Time => Some(t),
                SlotId::State { order, comp } => x.get(order * m + comp).copied(),
                SlotId::Delayed { order, comp } => xt.get(order * m + comp).copied(),
                SlotId::Z => Some(z),
                SlotId::Gauge { order, comp } => {
                    Some(p.get(order * d + comp).copied().unwrap_or(0.0))
                }
                SlotId::Param(pr) => Some(param_value(pr, problem.a(), problem.b(), problem.tau())),
                _ => None,
            }
        };
        let zero = env(&[]);
        let mut report = |what: String, value: f64| {
            if !(value.abs() <= TOL) {
                out.push(IdentityViolation {
                    what,
                    sample,
                    value,
                });
            }
        };
        let eval =
            |e: &Expr, env: &dyn Fn(SlotId) -> Option<f64>| e.eval(&|s| env(s)).unwrap_or(f64::NAN);
        report("T".into(), eval(&group.t, &zero) - t);
        for (c, xe) in group.x.iter().enumerate() {
            let target = match group.binding {
                StateBinding::Shifted => x[c],
                StateBinding::SameTime => xt[c],
            };
            report(format!("X_{}", c + 1), eval(xe, &zero) - target);
        }
        report("Z".into(), eval(&group.z, &zero) - z);
        let perturbed = env(&small);
        let rate = eval(&group.dt, &perturbed);
        if !(rate > 0.0) {
            out.push(IdentityViolation {
                what: "dT/dt".into(),
                sample,
                value: rate,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn delayed_growth_spec(f: &str) -> GroupSpec {
        GroupSpec {
            q: 1,
            d: 1,
            t: "t + p0".into(),
            x: vec!["xt0/(1 + p1)".into()],
            z: "z".into(),
            f: f.into(),
            theta: vec![],
            binding: StateBinding::SameTime,
            p_test_degrees: vec![],
        }
    }

    fn problem() -> HerglotzProblem {
        HerglotzProblem::parse(1, 1, (0.0, 2.0, 1.0), 1.0, "xt0*z", &["1"]).unwrap()
    }

    #[test]
    fn delayed_growth_group_is_identity_at_zero() {
        let p = problem();
        let g = GaugeGroup::parse(&p, &delayed_growth_spec("0")).unwrap();
        assert!(check_identity_at_zero(&p, &g, 50).is_empty());
    }

    #[test]
    fn scaled_state_is_reported() {
        let p = problem();
        let spec = GroupSpec {
            x: vec!["2*x0".into()],
            binding: StateBinding::Shifted,
            ..delayed_growth_spec("0")
        };
        let g = GaugeGroup::parse(&p, &spec).unwrap();
        let v = check_identity_at_zero(&p, &g, 10);
        assert!(v.iter().any(|v| v.what == "X_1"));
        assert!(v.iter().all(|v| v.what == "X_1"));
    }

    #[test]
    fn squared_gauge_in_time_passes() {
        let p = problem();
        let spec = GroupSpec {
            t: "t + p0^2".into(),
            ..delayed_growth_spec("0")
        };
        let g = GaugeGroup::parse(&p, &spec).unwrap();
        assert!(check_identity_at_zero(&p, &g, 20).is_empty());
    }

    #[test]
    fn shape_errors() {
        let p = problem();
        let spec = GroupSpec {
            theta: vec![vec![1.0]],
            ..delayed_growth_spec("0")
        };
        assert!(matches!(
            GaugeGroup::parse(&p, &spec),
            Err(GroupError::Shape(_))
        ));
        let spec = GroupSpec {
            z: "p_at_a".into(),
            ..delayed_growth_spec("0")
        };
        assert!(matches!(
            GaugeGroup::parse(&p, &spec),
            Err(GroupError::Parse { .. })
        ));
    }
}
