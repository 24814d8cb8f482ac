//! Gauge symmetry groups, semi-invariance checks and Noether currents.

mod currents;
mod group;
mod invariance;
mod testfn;

use thiserror::Error;

use crate::expr::EvalError;
use crate::stencil::StencilError;

pub use currents::{
    constancy_report, deviation, gauge_partial_numeric, gauge_partial_symbolic,
    level_partial_numeric, noether_currents, Constancy, CurrentFormula, CurrentTerms,
    NoetherCurrent, NoetherReport, GAUGE_STEP,
};
pub use group::{
    check_identity_at_zero, GaugeGroup, GroupError, GroupSpec, IdentityViolation, StateBinding,
};
pub use invariance::{
    check_semi_invariance, dtk_x, total_derivative, total_time_derivative, AlphaPoint, Frozen,
    InvarianceReport, TestResidual, TransformSeries, SINGULAR_RATE,
};
pub use testfn::GaugeTestFunction;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymmetryError {
    #[error("singular transformation: dT/dt = {rate:?} at t={t:?}")]
    Singular { t: f64, rate: f64 },
    #[error("cannot evaluate {what} at t={t:?}: {source}")]
    Eval {
        what: &'static str,
        t: f64,
        #[source]
        source: EvalError,
    },
    #[error("grid too coarse for the transformation recursion: {0}")]
    Stencil(#[from] StencilError),
    #[error("test function has {found} components, the group has {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("the {0:?} current formula does not apply to this problem")]
    Formula(CurrentFormula),
}

/// Maximum that propagates NaN.
pub(crate) fn nan_max(acc: f64, v: f64) -> f64 {
    if acc.is_nan() || v.is_nan() {
        f64::NAN
    } else {
        acc.max(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{compute_multipliers, PairContext};
    use crate::euler_lagrange::{el_residual, is_extremal};
    use crate::expr::SlotId;
    use crate::problem::{make_grid, Grid, HerglotzProblem, StateSamples};

    const DELAYED_GROWTH_F: &str = "z_b/(b - a + p_at_b - p_at_a)*(t + p0) - z_b/(b - a)*t";

    fn delayed_growth_group(
        problem: &HerglotzProblem,
        f: &str,
        theta: Vec<Vec<f64>>,
    ) -> GaugeGroup {
        let spec = GroupSpec {
            q: 1,
            d: 1,
            t: "t + p0".into(),
            x: vec!["xt0/(1 + p1)".into()],
            z: "z".into(),
            f: f.into(),
            theta,
            binding: StateBinding::SameTime,
            p_test_degrees: vec![],
        };
        GaugeGroup::parse(problem, &spec).unwrap()
    }

    fn delayed_growth(gamma: f64) -> (HerglotzProblem, Grid) {
        let p = HerglotzProblem::parse(1, 1, (0.0, 2.0, 1.0), gamma, "xt0*z", &["1"]).unwrap();
        let g = make_grid(0.0, 2.0, 1.0, 0.01).unwrap();
        (p, g)
    }

    #[test]
    fn delayed_growth_is_semi_invariant() {
        let (p, g) = delayed_growth(1.0);
        let xs = StateSamples::admissible(&p, &g, |t| vec![1.0 + 0.3 * t - 0.1 * t * t]);
        let ctx = PairContext::from_x(&p, &g, &xs).unwrap();
        let group = delayed_growth_group(&p, DELAYED_GROWTH_F, vec![]);
        let tests = GaugeTestFunction::family(5, 1, 1, 3, 0.0, 2.0);
        let r = check_semi_invariance(&ctx, &group, &tests).unwrap();
        assert!(r.passes(1e-8), "{} {}", r.max_eq1, r.max_eq2);

        let without_f = delayed_growth_group(&p, "0", vec![]);
        let r = check_semi_invariance(&ctx, &without_f, &tests).unwrap();
        assert!(r.max_eq1 > 1e-3);
        assert!(r.max_eq2 <= 1e-8);
    }

    #[test]
    fn identity_group_is_trivially_invariant() {
        let p = HerglotzProblem::parse(2, 1, (0.0, 1.0, 0.0), 0.5, "x1^2 - x2*x0 + 0.1*z", &["1"])
            .unwrap();
        let g = make_grid(0.0, 1.0, 0.0, 0.02).unwrap();
        let xs = StateSamples::admissible(&p, &g, |t| vec![(2.0 * t).sin() + 1.0]);
        let ctx = PairContext::from_x(&p, &g, &xs).unwrap();
        let group = GaugeGroup::identity(&p, 1, 1);
        let r = check_semi_invariance(
            &ctx,
            &group,
            &GaugeTestFunction::family(2, 3, 1, 3, 0.0, 1.0),
        )
        .unwrap();
        assert!(
            r.max_eq1 <= 1e-12 && r.max_eq2 <= 1e-12,
            "{} {}",
            r.max_eq1,
            r.max_eq2
        );
        let mult = compute_multipliers(&ctx).unwrap();
        let rep = noether_currents(&ctx, &group, &mult, CurrentFormula::General).unwrap();
        assert_eq!(rep.currents.len(), 2);
        for c in &rep.currents {
            assert!(c.values.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn total_derivatives_by_hand() {
        let (p, g) = delayed_growth(1.0);
        let xs = StateSamples::admissible(&p, &g, |t| vec![1.0 + t]);
        let ctx = PairContext::from_x(&p, &g, &xs).unwrap();
        let group = delayed_growth_group(&p, "0", vec![]);
        let test = GaugeTestFunction::new(0.0, vec![vec![0.1, 0.2, 0.3]]);
        for d in [0, 50, 150, 200] {
            let t = g.time(g.start() + d);
            let td = total_time_derivative(&ctx, &group, group.transform_time(), &test, d).unwrap();
            assert!((td - (1.0 + 0.2 + 0.6 * t)).abs() < 1e-14);
            let xt = if t <= 1.0 { 1.0 } else { t };
            let zd = total_time_derivative(&ctx, &group, group.transform_z(), &test, d).unwrap();
            assert!((zd - xt * ctx.pair.z[d]).abs() < 1e-9 * zd.abs());
            let time = total_time_derivative(
                &ctx,
                &group,
                &crate::expr::Expr::slot(SlotId::Time),
                &test,
                d,
            );
            assert_eq!(time.unwrap(), 1.0);
        }
    }

    #[test]
    fn recursion_for_time_reparametrization() {
        // n = 2, T = t + p, X = x: d/dT X = ẋ/(1 + ṗ).
        let p = HerglotzProblem::parse(2, 1, (0.0, 1.0, 0.0), 0.0, "x2^2", &["0"]).unwrap();
        let g = make_grid(0.0, 1.0, 0.0, 0.01).unwrap();
        let xs = StateSamples::admissible(&p, &g, |t| vec![t * t * t]);
        let ctx = PairContext::from_x(&p, &g, &xs).unwrap();
        let spec = GroupSpec {
            q: 1,
            d: 1,
            t: "t + p0".into(),
            x: vec!["x0".into()],
            z: "z".into(),
            f: "0".into(),
            theta: vec![],
            binding: StateBinding::Shifted,
            p_test_degrees: vec![],
        };
        let group = GaugeGroup::parse(&p, &spec).unwrap();
        let test = GaugeTestFunction::new(0.0, vec![vec![0.0, 0.1, 0.2]]);
        for d in [0, 30, 100] {
            let t = g.time(d);
            let rate = 1.0 + 0.1 + 0.4 * t;
            assert_eq!(dtk_x(&ctx, &group, &test, 0, d).unwrap()[0], t * t * t);
            let first = dtk_x(&ctx, &group, &test, 1, d).unwrap()[0];
            assert!((first - 3.0 * t * t / rate).abs() < 1e-10);
            // d/dt(3t²/r) / r = (6t r − 3t²·0.4) / r³
            let second = dtk_x(&ctx, &group, &test, 2, d).unwrap()[0];
            let expected = (6.0 * t * rate - 1.2 * t * t) / rate.powi(3);
            assert!(
                (second - expected).abs() < 1e-9,
                "{d}: {second} vs {expected}"
            );
        }
        assert_eq!(group.symbolic_levels(), 2);

        // X depending on x2 needs x4 at level 2, beyond the stored jets: the
        // second level then comes from a stencil on the first.
        let spec = GroupSpec {
            x: vec!["x0 + p0*x2".into()],
            ..spec
        };
        let group = GaugeGroup::parse(&p, &spec).unwrap();
        assert_eq!(group.symbolic_levels(), 1);
        let zero = GaugeTestFunction::zero(1);
        for d in [0, 40, 100] {
            let second = dtk_x(&ctx, &group, &zero, 2, d).unwrap()[0];
            assert!((second - 6.0 * g.time(d)).abs() < 1e-8, "{d}: {second}");
        }
    }

    #[test]
    fn gauge_partials_agree() {
        let (p, g) = delayed_growth(1.0);
        let xs = StateSamples::admissible(&p, &g, |t| vec![1.0 + 0.5 * t]);
        let ctx = PairContext::from_x(&p, &g, &xs).unwrap();
        let group = delayed_growth_group(&p, DELAYED_GROWTH_F, vec![]);
        let exprs = [
            group.transform_time().clone(),
            group.transform_state()[0].clone(),
            group.transform_z().clone(),
            group.gauge_function().clone(),
        ];
        for e in &exprs {
            for order in 0..=1 {
                let s = gauge_partial_symbolic(&ctx, &group, e, order, 0).unwrap();
                let n = gauge_partial_numeric(&ctx, &group, e, order, 0).unwrap();
                for (a, b) in s.iter().zip(&n) {
                    assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{e}: {a} vs {b}");
                }
            }
        }
        // ∂X/∂p1 = −x(t − τ), ∂T/∂p0 = 1.
        let dx = gauge_partial_symbolic(&ctx, &group, &group.transform_state()[0], 1, 0).unwrap();
        for (d, v) in dx.iter().enumerate() {
            let t = g.time(g.start() + d);
            let xt = if t <= 1.0 { 1.0 } else { 1.0 + 0.5 * (t - 1.0) };
            assert!((v + xt).abs() < 1e-12);
        }
        let dt = gauge_partial_symbolic(&ctx, &group, group.transform_time(), 0, 0).unwrap();
        assert!(dt.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn delayed_growth_currents() {
        let (p, g) = delayed_growth(1.0);
        let xs = StateSamples::admissible(&p, &g, |t| vec![1.0 + 0.2 * t]);
        let ctx = PairContext::from_x(&p, &g, &xs).unwrap();
        let mult = compute_multipliers(&ctx).unwrap();
        let theta = vec![vec![0.5], vec![2.0]];
        let group = delayed_growth_group(&p, DELAYED_GROWTH_F, theta);
        let rep = noether_currents(&ctx, &group, &mult, CurrentFormula::General).unwrap();
        let z_b = ctx.pair.z_end();
        let c0 = &rep.currents[0];
        for d in 0..ctx.len() {
            let xt = ctx.jets.node(d).get(0, 0);
            let expected = 1.5 * z_b / 2.0 - mult.psi_z[d] * xt * ctx.pair.z[d];
            assert!((c0.values[d] - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        }
        let c1 = &rep.currents[1];
        assert!(c1
            .values
            .iter()
            .all(|v| (v - 2.0 * z_b / 2.0).abs() <= 1e-12 * z_b));
        assert!(c1.deviation <= 1e-12);
    }

    #[test]
    fn zero_gamma_extremal_has_constant_currents() {
        let (p, g) = delayed_growth(0.0);
        let xs = StateSamples::admissible(&p, &g, |t| vec![1.0 + t * t]);
        let ctx = PairContext::from_x(&p, &g, &xs).unwrap();
        let mult = compute_multipliers(&ctx).unwrap();
        let el = el_residual(&ctx, &mult).unwrap();
        let verdict = is_extremal(&el, 1e-9);
        let group = delayed_growth_group(&p, DELAYED_GROWTH_F, vec![vec![0.3], vec![0.7]]);
        let rep = noether_currents(&ctx, &group, &mult, CurrentFormula::General).unwrap();
        let summary = constancy_report(&rep, &verdict, 1e-12);
        assert!(
            summary.iter().all(|c| c.constant && c.deviation == 0.0),
            "{summary:?}"
        );
    }

    #[test]
    fn non_extremal_pair_is_not_constant() {
        let p =
            HerglotzProblem::parse(1, 1, (0.0, 1.0, 0.0), 0.0, "x1^2/2 - x0^2/2", &["0"]).unwrap();
        let g = make_grid(0.0, 1.0, 0.0, 0.01).unwrap();
        let xs = StateSamples::admissible(&p, &g, |t| vec![3.0 * (7.0 * t).sin()]);
        let ctx = PairContext::from_x(&p, &g, &xs).unwrap();
        let mult = compute_multipliers(&ctx).unwrap();
        let verdict = is_extremal(&el_residual(&ctx, &mult).unwrap(), 1e-3);
        let spec = GroupSpec {
            q: 0,
            d: 1,
            t: "t + p0".into(),
            x: vec!["x0".into()],
            z: "z".into(),
            f: "0".into(),
            theta: vec![],
            binding: StateBinding::Shifted,
            p_test_degrees: vec![],
        };
        let group = GaugeGroup::parse(&p, &spec).unwrap();
        let rep = noether_currents(&ctx, &group, &mult, CurrentFormula::General).unwrap();
        let summary = constancy_report(&rep, &verdict, 1e-3);
        assert!(summary[0].deviation > 1e-3);
        assert!(!summary[0].constant && !summary[0].extremal);
    }

    #[test]
    fn oscillator_energy_current_is_constant() {
        let k: f64 = 0.2;
        let w = (1.0 - k * k / 4.0).sqrt();
        let phase = (-k / (2.0 * w)).atan() - w;
        let x = move |t: f64| (-k * t / 2.0).exp() * (w * t + phase).cos();
        let p = HerglotzProblem::parse(
            1,
            1,
            (0.0, 1.0, 0.0),
            0.0,
            "x1^2/2 - x0^2/2 - 0.2*z",
            &[&format!("{:?}", x(0.0))],
        )
        .unwrap();
        let g = make_grid(0.0, 1.0, 0.0, 1e-3).unwrap();
        let xs = StateSamples::admissible(&p, &g, |t| vec![x(t)]);
        let ctx = PairContext::from_x(&p, &g, &xs).unwrap();
        let mult = compute_multipliers(&ctx).unwrap();
        let verdict = is_extremal(&el_residual(&ctx, &mult).unwrap(), 1e-3);
        let spec = GroupSpec {
            q: 0,
            d: 1,
            t: "t + p0".into(),
            x: vec!["x0".into()],
            z: "z".into(),
            f: "0".into(),
            theta: vec![],
            binding: StateBinding::Shifted,
            p_test_degrees: vec![],
        };
        let group = GaugeGroup::parse(&p, &spec).unwrap();
        let rep = noether_currents(&ctx, &group, &mult, CurrentFormula::General).unwrap();
        let summary = constancy_report(&rep, &verdict, 1e-3);
        assert!(summary[0].constant, "{summary:?}");
    }

    #[test]
    fn formulas_require_their_hypotheses() {
        let (p, g) = delayed_growth(1.0);
        let xs = StateSamples::admissible(&p, &g, |_| vec![1.0]);
        let ctx = PairContext::from_x(&p, &g, &xs).unwrap();
        let mult = compute_multipliers(&ctx).unwrap();
        let group = delayed_growth_group(&p, DELAYED_GROWTH_F, vec![]);
        assert!(noether_currents(&ctx, &group, &mult, CurrentFormula::FirstOrder).is_ok());
        assert_eq!(
            noether_currents(&ctx, &group, &mult, CurrentFormula::Classical),
            Err(SymmetryError::Formula(CurrentFormula::Classical))
        );
    }
}
