//! Residuals of the delayed higher-order Euler–Lagrange equations and the
//! transversality conditions at t = b.
//!
//! On [a, b − τ] the residual is
//! Σ_l (−1)^l d^l/dt^l (ψ_z ∂L/∂x^{(l)} + ψ_z(t+τ) ∂L/∂x_τ^{(l)}(t+τ)); on
//! [b − τ, b] the advanced term is absent. With τ = 0 there is a single
//! branch over [a, b] in which the delayed slots alias the current ones, so
//! both partials are kept; it is reported as the late branch.

use std::fmt;

use crate::dynamics::{branches, weighted_partial, DynamicsError, MultiplierSet, PairContext};

#[derive(Debug, Clone, PartialEq)]
pub struct ElReport {
    m: usize,
    h: f64,
    a: f64,
    /// Domain index of the first early node (always 0) and of the first late node.
    late_start: usize,
    /// `[d * m + c]` over [a, b − τ]; empty when τ = 0.
    pub residual_early: Vec<f64>,
    /// `[d * m + c]` over [b − τ, b] (all of [a, b] when τ = 0).
    pub residual_late: Vec<f64>,
    /// `[(k - 1) * m + c]` for k = 1..=n.
    pub transversality: Vec<f64>,
    pub max_early: f64,
    pub max_late: f64,
    pub max_transversality: f64,
    /// Largest |early − late| at t = b − τ.
    pub junction_gap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    Early { t: f64, comp: usize },
    Late { t: f64, comp: usize },
    Transversality { k: usize, comp: usize },
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Location::Early { t, comp } => {
                write!(f, "early branch, t={t:?}, component {}", comp + 1)
            }
            Location::Late { t, comp } => write!(f, "late branch, t={t:?}, component {}", comp + 1),
            Location::Transversality { k, comp } => {
                write!(f, "transversality k={k}, component {}", comp + 1)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Offender {
    pub location: Location,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremalVerdict {
    pub extremal: bool,
    /// Largest residual in absolute value, if any residual exists.
    pub worst: Option<Offender>,
}

impl ElReport {
    pub fn m(&self) -> usize {
        self.m
    }

    /// Time of the `i`-th early node.
    pub fn early_time(&self, i: usize) -> f64 {
        self.a + i as f64 * self.h
    }

    /// Time of the `i`-th late node.
    pub fn late_time(&self, i: usize) -> f64 {
        self.a + (self.late_start + i) as f64 * self.h
    }

    /// Domain index of the first late node.
    pub fn late_start(&self) -> usize {
        self.late_start
    }

    /// Largest residual of either branch.
    pub fn max_residual(&self) -> f64 {
        self.max_early.max(self.max_late)
    }

    /// Worst offender, optionally ignoring transversality (pinned right ends).
    pub fn worst(&self, include_transversality: bool) -> Option<Offender> {
        self.worst_trimmed(include_transversality, 0)
    }

    /// As [`ElReport::worst`], skipping `margin` nodes at both ends of each branch.
    pub fn worst_trimmed(&self, include_transversality: bool, margin: usize) -> Option<Offender> {
        let m = self.m;
        let keep = |i: usize, len: usize| i >= margin && i + margin < len;
        let mut best: Option<Offender> = None;
        let mut consider = |location: Location, value: f64| {
            if best.is_none_or(|b| value.abs() > b.value.abs() || value.is_nan()) {
                best = Some(Offender { location, value });
            }
        };
        let early_len = self.residual_early.len() / m;
        for (i, v) in self.residual_early.iter().enumerate() {
            if !keep(i / m, early_len) {
                continue;
            }
            let location = Location::Early {
                t: self.early_time(i / m),
                comp: i % m,
            };
            consider(location, *v);
        }
        let late_len = self.residual_late.len() / m;
        for (i, v) in self.residual_late.iter().enumerate() {
            if !keep(i / m, late_len) {
                continue;
            }
            let location = Location::Late {
                t: self.late_time(i / m),
                comp: i % m,
            };
            consider(location, *v);
        }
        if include_transversality {
            for (i, v) in self.transversality.iter().enumerate() {
                let location = Location::Transversality {
                    k: i / m + 1,
                    comp: i % m,
                };
                consider(location, *v);
            }
        }
        best
    }
}

/// True iff every residual and transversality value is within `tol`.
pub fn is_extremal(report: &ElReport, tol: f64) -> ExtremalVerdict {
    verdict(report, tol, true)
}

/// As [`is_extremal`] but without the transversality conditions, for
/// problems whose right end is pinned.
pub fn is_extremal_interior(report: &ElReport, tol: f64) -> ExtremalVerdict {
    verdict(report, tol, false)
}

/// Verdict over the branch interiors only, `margin` nodes away from every
/// branch end. Direct-method optima carry a thin boundary layer in which
/// stencil residuals stay O(1) under refinement.
pub fn verdict_trimmed(
    report: &ElReport,
    tol: f64,
    include_transversality: bool,
    margin: usize,
) -> ExtremalVerdict {
    let worst = report.worst_trimmed(include_transversality, margin);
    let extremal = worst.is_none_or(|w| w.value.abs() <= tol);
    ExtremalVerdict { extremal, worst }
}

fn verdict(report: &ElReport, tol: f64, include_transversality: bool) -> ExtremalVerdict {
    let worst = report.worst(include_transversality);
    let extremal = worst.is_none_or(|w| w.value.abs() <= tol);
    ExtremalVerdict { extremal, worst }
}

fn branch_residual(
    ctx: &PairContext<'_>,
    psi: &[f64],
    (lo, hi): (usize, usize),
    advanced: bool,
) -> Result<Vec<f64>, DynamicsError> {
    let (n, m) = (ctx.problem.n(), ctx.problem.m());
    let len = hi - lo + 1;
    if len < 2 * n + 5 {
        return Err(DynamicsError::Stencil(crate::stencil::StencilError {
            order: n,
            needed: 2 * n + 5,
            available: len,
        }));
    }
    let mut out = vec![0.0; len * m];
    for c in 0..m {
        for l in 0..=n {
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            let der =
                ctx.differentiate(lo, hi, l, |d| weighted_partial(ctx, psi, d, l, c, advanced))?;
            for (i, v) in der.into_iter().enumerate() {
                out[i * m + c] += sign * v;
            }
        }
    }
    Ok(out)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc: f64, x| {
        if x.is_nan() {
            f64::NAN
        } else {
            acc.max(x.abs())
        }
    })
}

/// Residual report for the pair in `ctx`.
pub fn el_residual(ctx: &PairContext<'_>, mult: &MultiplierSet) -> Result<ElReport, DynamicsError> {
    let (n, m) = (ctx.problem.n(), ctx.problem.m());
    let psi = &mult.psi_z;
    let br = branches(&ctx.grid);
    let (residual_early, residual_late, late_range, late_advanced) = match br.late {
        Some(late) => {
            let early = branch_residual(ctx, psi, br.early, true)?;
            let late_res = branch_residual(ctx, psi, late, false)?;
            (early, late_res, late, false)
        }
        None => (
            Vec::new(),
            branch_residual(ctx, psi, br.early, true)?,
            br.early,
            true,
        ),
    };

    let (lo, hi) = late_range;
    let mut transversality = vec![0.0; n * m];
    for k in 1..=n {
        for c in 0..m {
            let mut acc = 0.0;
            for l in 0..=n - k {
                let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                let der = ctx.differentiate(lo, hi, l, |d| {
                    weighted_partial(ctx, psi, d, l + k, c, late_advanced)
                })?;
                acc += sign * der[der.len() - 1];
            }
            transversality[(k - 1) * m + c] = acc;
        }
    }

    let junction_gap = br.late.map(|_| {
        let last_early = residual_early.len() / m - 1;
        (0..m)
            .map(|c| (residual_early[last_early * m + c] - residual_late[c]).abs())
            .fold(0.0, f64::max)
    });

    Ok(ElReport {
        m,
        h: ctx.grid.h,
        a: ctx.grid.a,
        late_start: lo,
        max_early: max_abs(&residual_early),
        max_late: max_abs(&residual_late),
        max_transversality: max_abs(&transversality),
        residual_early,
        residual_late,
        transversality,
        junction_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::compute_multipliers;
    use crate::problem::{make_grid, HerglotzProblem, StateSamples};

    const K: f64 = 0.2;

    fn oscillator_residual(h: f64) -> f64 {
        let w = (1.0 - K * K / 4.0).sqrt();
        let b = 1.0;
        let phase = (-K / (2.0 * w)).atan() - w * b;
        let x = move |t: f64| (-K * t / 2.0).exp() * (w * t + phase).cos();
        let p = HerglotzProblem::parse(
            1,
            1,
            (0.0, b, 0.0),
            0.0,
            "x1^2/2 - x0^2/2 - 0.2*z",
            &[&format!("{:?}", x(0.0))],
        )
        .unwrap();
        let g = make_grid(0.0, b, 0.0, h).unwrap();
        let xs = StateSamples::admissible(&p, &g, |t| vec![x(t)]);
        let ctx = PairContext::from_x(&p, &g, &xs).unwrap();
        let mult = compute_multipliers(&ctx).unwrap();
        let r = el_residual(&ctx, &mult).unwrap();
        assert!(r.residual_early.is_empty());
        assert!(r.max_transversality < 1e-6, "{}", r.max_transversality);
        r.max_late
    }

    #[test]
    fn oscillator_converges_at_second_order() {
        let coarse = oscillator_residual(1e-2);
        let fine = oscillator_residual(5e-3);
        let order = (coarse / fine).log2();
        assert!(
            (1.8..=2.2).contains(&order),
            "order {order}, {coarse:e} -> {fine:e}"
        );
    }

    #[test]
    fn verdicts() {
        let mut r = zero_report();
        assert!(is_extremal(&r, 1e-6).extremal);
        r.residual_late[3] = 1e-3;
        let v = is_extremal(&r, 1e-6);
        assert!(!v.extremal);
        assert_eq!(
            v.worst.unwrap().location,
            Location::Late {
                t: 0.30000000000000004,
                comp: 0
            }
        );
        r.residual_late[3] = 0.0;
        r.transversality[0] = 1.0;
        assert!(!is_extremal(&r, 1e-6).extremal);
        assert!(is_extremal_interior(&r, 1e-6).extremal);
        r.transversality[0] = 0.0;
        r.residual_late[0] = 1.0;
        assert!(!is_extremal(&r, 1e-6).extremal);
        assert!(verdict_trimmed(&r, 1e-6, true, 1).extremal);
        assert!(!verdict_trimmed(&r, 1e-6, true, 0).extremal);
    }

    #[test]
    fn delayed_growth_with_zero_gamma_vanishes() {
        let p = HerglotzProblem::parse(1, 1, (0.0, 2.0, 1.0), 0.0, "xt0*z", &["1"]).unwrap();
        let g = make_grid(0.0, 2.0, 1.0, 0.01).unwrap();
        let xs = StateSamples::admissible(&p, &g, |t| vec![1.0 + t]);
        let ctx = PairContext::from_x(&p, &g, &xs).unwrap();
        let r = el_residual(&ctx, &compute_multipliers(&ctx).unwrap()).unwrap();
        assert_eq!(r.max_early, 0.0);
        assert_eq!(r.max_late, 0.0);
        assert_eq!(r.junction_gap, Some(0.0));
    }

    #[test]
    fn non_extremal_is_flagged() {
        let p =
            HerglotzProblem::parse(1, 1, (0.0, 1.0, 0.0), 0.0, "x1^2/2 - x0^2/2", &["0"]).unwrap();
        let g = make_grid(0.0, 1.0, 0.0, 0.01).unwrap();
        let xs = StateSamples::admissible(&p, &g, |t| vec![(7.0 * t).sin() * 3.0]);
        let ctx = PairContext::from_x(&p, &g, &xs).unwrap();
        let r = el_residual(&ctx, &compute_multipliers(&ctx).unwrap()).unwrap();
        assert!(r.max_residual() > 0.1);
        let v = is_extremal(&r, 1e-6);
        assert!(!v.extremal);
        assert!(v.worst.is_some());
    }

    fn zero_report() -> ElReport {
        ElReport {
            m: 1,
            h: 0.1,
            a: 0.0,
            late_start: 0,
            residual_early: vec![],
            residual_late: vec![0.0; 5],
            transversality: vec![0.0],
            max_early: 0.0,
            max_late: 0.0,
            max_transversality: 0.0,
            junction_gap: None,
        }
    }
}
