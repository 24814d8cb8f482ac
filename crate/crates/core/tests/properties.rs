use herglotz::dynamics::{integrate_z, PairContext};
use herglotz::euler_lagrange::is_extremal;
use herglotz::expr::{parse, BinaryOp, Expr, SlotId, UnaryOp, Vocabulary};
use herglotz::problem::{make_grid, HerglotzProblem, JetTable, StateSamples};
use herglotz::reduction::{lift, project, reduce, reduced_terminal_z};
use herglotz::solver::{objective, objective_gradient, solve_extremal, SolveOptions};
use herglotz::symmetry::{
    constancy_report, gauge_partial_symbolic, level_partial_numeric, noether_currents,
    CurrentFormula, GaugeGroup, GroupSpec, StateBinding,
};
use proptest::prelude::*;

const SLOTS: [SlotId; 8] = [
    SlotId::Time,
    SlotId::State { order: 0, comp: 0 },
    SlotId::State { order: 1, comp: 0 },
    SlotId::State { order: 2, comp: 1 },
    SlotId::Delayed { order: 0, comp: 0 },
    SlotId::Delayed { order: 1, comp: 1 },
    SlotId::Z,
    SlotId::State { order: 0, comp: 1 },
];

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        3 => (0..SLOTS.len()).prop_map(|i| Expr::slot(SLOTS[i])),
        1 => (-200i32..200).prop_map(|k| Expr::constant(k as f64 / 100.0)),
    ]
}

/// Trees whose value is finite and smooth for arguments in [−1, 1].
fn smooth_expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::sub(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::mul(a, b)),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::div(a, Expr::add(Expr::one(), Expr::powi(b, 2)))),
            inner.clone().prop_map(|a| Expr::unary(UnaryOp::Sin, a)),
            inner.clone().prop_map(|a| Expr::unary(UnaryOp::Cos, a)),
            inner.clone().prop_map(|a| Expr::unary(UnaryOp::Neg, a)),
            inner
                .clone()
                .prop_map(|a| Expr::unary(UnaryOp::Exp, Expr::unary(UnaryOp::Sin, a))),
            inner.clone().prop_map(|a| Expr::unary(
                UnaryOp::Log,
                Expr::add(Expr::constant(2.0), Expr::unary(UnaryOp::Cos, a))
            )),
            inner
                .clone()
                .prop_map(|a| Expr::unary(UnaryOp::Sqrt, Expr::add(Expr::one(), Expr::powi(a, 2)))),
            (inner, 1i32..4).prop_map(|(a, k)| Expr::powi(a, k)),
        ]
    })
}

fn env_values() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, SLOTS.len())
}

fn lookup(values: &[f64]) -> impl Fn(SlotId) -> Option<f64> + '_ {
    move |s| SLOTS.iter().position(|k| *k == s).map(|i| values[i])
}

/// Independent tree walk used as the evaluation oracle.
fn oracle_eval(e: &Expr, values: &[f64]) -> f64 {
    match e {
        Expr::Const(c) => *c,
        Expr::Slot(s) => values[SLOTS.iter().position(|k| k == s).unwrap()],
        Expr::Unary(op, a) => {
            let v = oracle_eval(a, values);
            match op {
                UnaryOp::Neg => -v,
                UnaryOp::Sin => v.sin(),
                UnaryOp::Cos => v.cos(),
                UnaryOp::Exp => v.exp(),
                UnaryOp::Log => v.ln(),
                UnaryOp::Sqrt => v.sqrt(),
            }
        }
        Expr::Binary(op, a, b) => {
            let (x, y) = (oracle_eval(a, values), oracle_eval(b, values));
            match op {
                BinaryOp::Add => x + y,
                BinaryOp::Sub => x - y,
                BinaryOp::Mul => x * y,
                BinaryOp::Div => x / y,
            }
        }
        Expr::Pow(a, k) => oracle_eval(a, values).powi(*k),
    }
}

fn vocab() -> Vocabulary {
    Vocabulary::lagrangian(2, 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn derivative_matches_finite_differences(e in smooth_expr(), values in env_values(), pick in 0..SLOTS.len()) {
        let slot = SLOTS[pick];
        let symbolic = e.differentiate(slot).eval(&lookup(&values)).unwrap();
        let at = |shift: f64| {
            let mut v = values.clone();
            v[pick] += shift;
            let env = lookup(&v);
            e.eval(&env).unwrap()
        };
        let h = 1e-3;
        let fd = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
        prop_assert!((symbolic - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "{e}: {symbolic} vs {fd}");
    }

    #[test]
    fn evaluation_matches_tree_walk_oracle(e in smooth_expr(), values in env_values()) {
        let v = e.eval(&lookup(&values)).unwrap();
        prop_assert_eq!(v.to_bits(), oracle_eval(&e, &values).to_bits());
        prop_assert_eq!(v.to_bits(), e.eval(&lookup(&values)).unwrap().to_bits());
    }

    #[test]
    fn print_parse_round_trip(e in smooth_expr()) {
        let once = parse(&e.to_string(), &vocab()).unwrap();
        let twice = parse(&once.to_string(), &vocab()).unwrap();
        prop_assert_eq!(&once, &twice);
        let values = vec![0.3, -0.2, 0.7, 0.1, -0.9, 0.4, 0.5, -0.6];
        prop_assert_eq!(once.eval(&lookup(&values)).unwrap().to_bits(), e.eval(&lookup(&values)).unwrap().to_bits());
    }

    #[test]
    fn simplify_preserves_values(e in smooth_expr(), values in env_values()) {
        let v = e.eval(&lookup(&values)).unwrap();
        let s = e.simplify().eval(&lookup(&values)).unwrap();
        prop_assert!((v - s).abs() <= 1e-13 * (1.0 + v.abs()), "{e}: {v} vs {s}");
    }
}

fn cubic_problem(c: [f64; 4], n: usize, tau: f64) -> (HerglotzProblem, herglotz::problem::Grid) {
    let hist = format!(
        "{:?} + {:?}*t + {:?}*t^2 + {:?}*t^3",
        c[0], c[1], c[2], c[3]
    );
    let p = HerglotzProblem::parse(n, 1, (0.0, 1.0, tau), 0.0, "x0*z", &[&hist]).unwrap();
    let g = make_grid(0.0, 1.0, tau, 0.05).unwrap();
    (p, g)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jets_of_cubics_are_exact(c in proptest::array::uniform4(-1.0f64..1.0), n in 1usize..3) {
        let (p, g) = cubic_problem(c, n, 0.25);
        let poly = |k: usize, t: f64| match k {
            0 => c[0] + c[1] * t + c[2] * t * t + c[3] * t * t * t,
            1 => c[1] + 2.0 * c[2] * t + 3.0 * c[3] * t * t,
            2 => 2.0 * c[2] + 6.0 * c[3] * t,
            3 => 6.0 * c[3],
            _ => 0.0,
        };
        let xs = StateSamples::admissible(&p, &g, |t| vec![poly(0, t)]);
        let jets = JetTable::build(&p, &g, &xs).unwrap();
        for i in g.start()..=g.end() {
            for k in 0..=n + 1 {
                let got = jets.node(i).get(k, 0);
                let want = poly(k, g.time(i));
                prop_assert!((got - want).abs() <= 1e-8, "k={} t={}: {} vs {}", k, g.time(i), got, want);
            }
        }
    }

    #[test]
    fn lift_then_project_is_identity(
        c in proptest::array::uniform4(-1.0f64..1.0),
        freq in 0.5f64..4.0,
        padded in any::<bool>(),
    ) {
        let tau = 0.4;
        let b = if padded { 1.0 } else { 0.8 };
        let hist = format!("{:?} + {:?}*t", c[0], c[1]);
        let p = HerglotzProblem::parse(1, 1, (0.0, b, tau), c[2], "x1*xt0 + 0.3*z*x0", &[&hist]).unwrap();
        let g = make_grid(0.0, b, tau, 0.02).unwrap();
        let xs = StateSamples::admissible(&p, &g, |t| vec![c[0] + c[1] * t + c[3] * (freq * t).sin()]);
        let reduced = reduce(&p, &g).unwrap();
        prop_assert_eq!(reduced.padded(), padded);
        let lifted = lift(&p, &g, &reduced, &xs).unwrap();
        prop_assert_eq!(project(&reduced, &g, &lifted), xs.clone());
        let direct = integrate_z(&p, &g, &xs).unwrap().z_end();
        prop_assert_eq!(direct.to_bits(), reduced_terminal_z(&p, &g, &xs).unwrap().to_bits());
    }
}

fn small_problem() -> (HerglotzProblem, herglotz::problem::Grid) {
    let p = HerglotzProblem::parse(
        1,
        1,
        (0.0, 1.0, 0.5),
        0.2,
        "x1^2 + 0.5*xt0*x0 + 0.1*z*x0",
        &["1 + t"],
    )
    .unwrap();
    let g = make_grid(0.0, 1.0, 0.5, 0.05).unwrap();
    (p, g)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gradient_matches_one_sided_differences(free in proptest::collection::vec(0.0f64..2.0, 20)) {
        let (p, g) = small_problem();
        let grad = objective_gradient(&p, &g, &free, 1e-5).unwrap();
        let f0 = objective(&p, &g, &free).unwrap();
        let scale = grad.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 0..free.len() {
            let step = 1e-7;
            let mut moved = free.clone();
            moved[i] += step;
            let one_sided = (objective(&p, &g, &moved).unwrap() - f0) / step;
            prop_assert!((grad[i] - one_sided).abs() <= 1e-5 * scale.max(1e-3), "{}: {} vs {}", i, grad[i], one_sided);
        }
    }

    #[test]
    fn solver_is_deterministic(seed in any::<u64>()) {
        let (p, g) = small_problem();
        let opts = SolveOptions { seed, jitter: 0.1, max_iters: 15, ..SolveOptions::default() };
        let a = solve_extremal(&p, &g, &opts).unwrap();
        let b = solve_extremal(&p, &g, &opts).unwrap();
        prop_assert_eq!(a.trace, b.trace);
        prop_assert_eq!(a.pair.x, b.pair.x);
    }
}

fn oscillator_context() -> (HerglotzProblem, herglotz::problem::Grid, StateSamples) {
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
    let g = make_grid(0.0, 1.0, 0.0, 2e-3).unwrap();
    let xs = StateSamples::admissible(&p, &g, |t| vec![x(t)]);
    (p, g, xs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn scaling_f_and_theta_keeps_verdicts(factor in prop_oneof![-3.0f64..-0.1, 0.1f64..3.0]) {
        let (p, g, xs) = oscillator_context();
        let ctx = PairContext::from_x(&p, &g, &xs).unwrap();
        let mult = herglotz::dynamics::compute_multipliers(&ctx).unwrap();
        let verdict = is_extremal(&herglotz::euler_lagrange::el_residual(&ctx, &mult).unwrap(), 1e-3);
        let spec = GroupSpec {
            q: 0,
            d: 1,
            t: "t + p0".into(),
            x: vec!["x0".into()],
            z: "z".into(),
            f: "0.01*p0*x0".into(),
            theta: vec![vec![0.0]],
            binding: StateBinding::Shifted,
            p_test_degrees: vec![],
        };
        let group = GaugeGroup::parse(&p, &spec).unwrap();
        let base = noether_currents(&ctx, &group, &mult, CurrentFormula::General).unwrap();
        let scaled = noether_currents(&ctx, &group.scaled(&p, factor), &mult, CurrentFormula::General).unwrap();
        for (a, b) in base.currents.iter().zip(&scaled.currents) {
            for d in 0..a.values.len() {
                let expected = a.terms.gauge_function[d] * factor;
                prop_assert!((b.terms.gauge_function[d] - expected).abs() <= 1e-15 * (1.0 + expected.abs()));
                prop_assert_eq!(a.terms.state[d], b.terms.state[d]);
                prop_assert_eq!(a.terms.hamiltonian[d], b.terms.hamiltonian[d]);
            }
        }
        let before: Vec<bool> = constancy_report(&base, &verdict, 1e-3).iter().map(|c| c.constant).collect();
        let after: Vec<bool> = constancy_report(&scaled, &verdict, 1e-3).iter().map(|c| c.constant).collect();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn numeric_level_partial_matches_symbolic(shift in 0.1f64..0.9) {
        let p = HerglotzProblem::parse(2, 1, (0.0, 1.0, 0.0), 0.1, "x1^2 - x2*x0", &["1"]).unwrap();
        let g = make_grid(0.0, 1.0, 0.0, 0.02).unwrap();
        let xs = StateSamples::admissible(&p, &g, |t| vec![1.0 + (2.0 * t + shift).sin() - shift.sin()]);
        let ctx = PairContext::from_x(&p, &g, &xs).unwrap();
        let spec = GroupSpec {
            q: 1,
            d: 1,
            t: "t + p0".into(),
            x: vec!["x0 + p1*x0".into()],
            z: "z".into(),
            f: "0".into(),
            theta: vec![],
            binding: StateBinding::Shifted,
            p_test_degrees: vec![],
        };
        let group = GaugeGroup::parse(&p, &spec).unwrap();
        let level = group.level_expr(1).expect("level 1 is symbolic");
        for (order, comp) in [(0, 0), (1, 0)] {
            let symbolic = gauge_partial_symbolic(&ctx, &group, &level[0], order, comp).unwrap();
            let numeric = level_partial_numeric(&ctx, &group, 1, order, comp).unwrap();
            for (d, (s, n)) in symbolic.iter().zip(&numeric).enumerate() {
                prop_assert!((s - n).abs() <= 1e-6 * (1.0 + s.abs()), "I={} d={}: {} vs {}", order, d, s, n);
            }
        }
    }
}
