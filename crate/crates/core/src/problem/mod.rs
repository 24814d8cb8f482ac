//! Delayed higher-order Herglotz problems: definition, validation, grids,
//! admissible trajectories and their derivative jets.

mod grid;
mod trajectory;

use std::fmt;

use thiserror::Error;

use crate::expr::{self, Expr, Param, ParseError, SlotId, Vocabulary};

pub use grid::{make_grid, Grid, GridError};
pub use trajectory::{
    jet, lagrangian_env, AdmissibilityError, JetError, JetTable, JetView, LagrangianPoint,
    StateSamples, TrajectoryPair,
};

/// Plain problem data; may be invalid until checked by [`ProblemSpec::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    /// Highest derivative order of x in the Lagrangian.
    pub n: usize,
    /// State dimension.
    pub m: usize,
    pub a: f64,
    pub b: f64,
    pub tau: f64,
    /// Initial value z(a).
    pub gamma: f64,
    pub lagrangian: Expr,
    /// One expression in `t` per state component, prescribing x on [a - tau, a].
    pub history: Vec<Expr>,
}

/// A violated hypothesis of the problem definition.
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    OrderZero,
    DimensionZero,
    NonFinite(&'static str),
    EmptyInterval,
    DelayRange,
    GaugeSlotInLagrangian(SlotId),
    SlotNotAllowed {
        field: String,
        slot: SlotId,
    },
    HistoryCount {
        expected: usize,
        found: usize,
    },
    HistoryNotEvaluable {
        comp: usize,
        order: usize,
        t: f64,
        reason: String,
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::OrderZero => write!(f, "derivative order n must be at least 1"),
            Diagnostic::DimensionZero => write!(f, "state dimension m must be at least 1"),
            Diagnostic::NonFinite(what) => write!(f, "{what} must be finite"),
            Diagnostic::EmptyInterval => write!(f, "interval must satisfy a < b"),
            Diagnostic::DelayRange => write!(f, "delay must satisfy 0 ≤ τ < b−a"),
            Diagnostic::GaugeSlotInLagrangian(s) => write!(f, "gauge slot in Lagrangian: `{s}`"),
            Diagnostic::SlotNotAllowed { field, slot } => {
                write!(f, "`{slot}` is not allowed in {field}")
            }
            Diagnostic::HistoryCount { expected, found } => {
                write!(f, "history needs {expected} components, found {found}")
            }
            Diagnostic::HistoryNotEvaluable {
                comp,
                order,
                t,
                reason,
            } => write!(
                f,
                "history component {} (derivative {order}) cannot be evaluated at t={t:?}: {reason}",
                comp + 1
            ),
        }
    }
}

impl ProblemSpec {
    /// Empty iff every hypothesis holds.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.n == 0 {
            out.push(Diagnostic::OrderZero);
        }
        if self.m == 0 {
            out.push(Diagnostic::DimensionZero);
        }
        for (name, v) in [
            ("a", self.a),
            ("b", self.b),
            ("tau", self.tau),
            ("gamma", self.gamma),
        ] {
            if !v.is_finite() {
                out.push(Diagnostic::NonFinite(name));
            }
        }
        if !out.is_empty() {
            return out;
        }
        if self.a >= self.b {
            out.push(Diagnostic::EmptyInterval);
        } else if !(self.tau >= 0.0 && self.tau < self.b - self.a) {
            out.push(Diagnostic::DelayRange);
        }

        for slot in self.lagrangian.slots() {
            let ok = match slot {
                SlotId::Time | SlotId::Z | SlotId::Param(_) => true,
                SlotId::State { order, comp } | SlotId::Delayed { order, comp } => {
                    order <= self.n && comp < self.m
                }
                SlotId::Gauge { .. } => {
                    out.push(Diagnostic::GaugeSlotInLagrangian(slot));
                    continue;
                }
                _ => false,
            };
            if !ok {
                out.push(Diagnostic::SlotNotAllowed {
                    field: "the Lagrangian".into(),
                    slot,
                });
            }
        }

        if self.history.len() != self.m {
            out.push(Diagnostic::HistoryCount {
                expected: self.m,
                found: self.history.len(),
            });
        }
        let mut history_slots_ok = true;
        for (j, mu) in self.history.iter().enumerate() {
            for slot in mu.slots() {
                if !matches!(slot, SlotId::Time | SlotId::Param(_)) {
                    history_slots_ok = false;
                    out.push(Diagnostic::SlotNotAllowed {
                        field: format!("history component {}", j + 1),
                        slot,
                    });
                }
            }
        }
        if history_slots_ok && out.is_empty() {
            // Symbolic derivatives always exist; check they evaluate on the segment.
            let samples = [self.a - self.tau, self.a - 0.5 * self.tau, self.a];
            for (j, mu) in self.history.iter().enumerate() {
                let mut d = mu.clone();
                for order in 0..=self.n {
                    for &t in &samples {
                        let env = ParamEnv::new(self.a, self.b, self.tau, t);
                        let reason = match d.eval(&env) {
                            Ok(v) if v.is_finite() => continue,
                            Ok(v) => format!("value {v:?}"),
                            Err(e) => e.to_string(),
                        };
                        out.push(Diagnostic::HistoryNotEvaluable {
                            comp: j,
                            order,
                            t,
                            reason,
                        });
                    }
                    d = d.differentiate(SlotId::Time);
                }
            }
        }
        out
    }
}

/// Binds `t`, `a`, `b`, `tau`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ParamEnv {
    a: f64,
    b: f64,
    tau: f64,
    t: f64,
}

impl ParamEnv {
    pub(crate) fn new(a: f64, b: f64, tau: f64, t: f64) -> Self {
        ParamEnv { a, b, tau, t }
    }
}

impl expr::SlotValues for ParamEnv {
    fn value(&self, slot: SlotId) -> Option<f64> {
        match slot {
            SlotId::Time => Some(self.t),
            SlotId::Param(p) => Some(param_value(p, self.a, self.b, self.tau)),
            _ => None,
        }
    }
}

pub(crate) fn param_value(p: Param, a: f64, b: f64, tau: f64) -> f64 {
    match p {
        Param::A => a,
        Param::B => b,
        Param::Tau => tau,
    }
}

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("invalid problem: {}", join(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("cannot parse {field}: {source}")]
    Parse {
        field: String,
        #[source]
        source: ParseError,
    },
}

fn join(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// A validated problem with its symbolic partial derivatives.
#[derive(Debug, Clone)]
pub struct HerglotzProblem {
    spec: ProblemSpec,
    dz: Expr,
    /// `dx[k][c]`: partial of L with respect to the k-th derivative of x_c.
    dx: Vec<Vec<Expr>>,
    dxt: Vec<Vec<Expr>>,
    /// `history_jets[k][c]`: k-th time derivative of the history, k ≤ n + 1.
    history_jets: Vec<Vec<Expr>>,
}

impl HerglotzProblem {
    pub fn new(spec: ProblemSpec) -> Result<Self, ProblemError> {
        let diags = spec.validate();
        if !diags.is_empty() {
            return Err(ProblemError::Invalid(diags));
        }
        let l = &spec.lagrangian;
        let partials = |make: fn(usize, usize) -> SlotId| -> Vec<Vec<Expr>> {
            (0..=spec.n)
                .map(|k| (0..spec.m).map(|c| l.differentiate(make(k, c))).collect())
                .collect()
        };
        let dx = partials(SlotId::state);
        let dxt = partials(SlotId::delayed);
        let dz = l.differentiate(SlotId::Z);
        let mut history_jets = vec![spec.history.clone()];
        for k in 1..=spec.n + 1 {
            let next = history_jets[k - 1]
                .iter()
                .map(|e| e.differentiate(SlotId::Time))
                .collect();
            history_jets.push(next);
        }
        Ok(HerglotzProblem {
            spec,
            dz,
            dx,
            dxt,
            history_jets,
        })
    }

    /// Parse the Lagrangian and history from source text, then validate.
    ///
    /// The Lagrangian is read in the vocabulary of gauge arguments so that a
    /// stray gauge slot is reported by validation rather than as an unknown name.
    pub fn parse(
        n: usize,
        m: usize,
        (a, b, tau): (f64, f64, f64),
        gamma: f64,
        lagrangian: &str,
        history: &[&str],
    ) -> Result<Self, ProblemError> {
        Self::new(ProblemSpec::parse(
            n,
            m,
            (a, b, tau),
            gamma,
            lagrangian,
            history,
        )?)
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }
    pub fn n(&self) -> usize {
        self.spec.n
    }
    pub fn m(&self) -> usize {
        self.spec.m
    }
    pub fn a(&self) -> f64 {
        self.spec.a
    }
    pub fn b(&self) -> f64 {
        self.spec.b
    }
    pub fn tau(&self) -> f64 {
        self.spec.tau
    }
    pub fn gamma(&self) -> f64 {
        self.spec.gamma
    }
    pub fn lagrangian(&self) -> &Expr {
        &self.spec.lagrangian
    }
    pub fn has_delay(&self) -> bool {
        self.spec.tau > 0.0
    }

    /// Partial of L with respect to z.
    pub fn dl_dz(&self) -> &Expr {
        &self.dz
    }
    pub fn dl_dx(&self, order: usize, comp: usize) -> &Expr {
        &self.dx[order][comp]
    }
    pub fn dl_dxt(&self, order: usize, comp: usize) -> &Expr {
        &self.dxt[order][comp]
    }
    pub fn z_independent(&self) -> bool {
        self.dz.is_zero()
    }

    pub fn param(&self, p: Param) -> f64 {
        param_value(p, self.spec.a, self.spec.b, self.spec.tau)
    }

    /// k-th derivative of the history, component `comp`, at time t.
    pub fn history_jet(&self, order: usize, comp: usize, t: f64) -> f64 {
        let env = ParamEnv::new(self.spec.a, self.spec.b, self.spec.tau, t);
        // Validation guarantees the history evaluates on its segment.
        self.history_jets[order][comp]
            .eval(&env)
            .unwrap_or(f64::NAN)
    }

    /// Highest history derivative order available.
    pub fn history_order(&self) -> usize {
        self.history_jets.len() - 1
    }
}

impl ProblemSpec {
    pub fn parse(
        n: usize,
        m: usize,
        (a, b, tau): (f64, f64, f64),
        gamma: f64,
        lagrangian: &str,
        history: &[&str],
    ) -> Result<Self, ProblemError> {
        let lagrangian = expr::parse(lagrangian, &Vocabulary::alpha(n, m, 0, 1)).map_err(|e| {
            ProblemError::Parse {
                field: "lagrangian".into(),
                source: e,
            }
        })?;
        let history = history
            .iter()
            .enumerate()
            .map(|(j, src)| {
                expr::parse(src, &Vocabulary::lagrangian(n, m)).map_err(|e| ProblemError::Parse {
                    field: format!("history[{j}]"),
                    source: e,
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(ProblemSpec {
            n,
            m,
            a,
            b,
            tau,
            gamma,
            lagrangian,
            history,
        })
    }
}

/// Radius of the sup-norm neighbourhood in which a pair is compared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremizerTolerance {
    epsilon: f64,
}

impl ExtremizerTolerance {
    pub fn new(epsilon: f64) -> Option<Self> {
        (epsilon > 0.0 && epsilon.is_finite()).then_some(ExtremizerTolerance { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Whether `other` lies in the neighbourhood of `center` (max over nodes and components).
    pub fn contains(&self, center: &StateSamples, other: &StateSamples) -> bool {
        center.sup_distance(other) < self.epsilon
    }
}
