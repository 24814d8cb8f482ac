use super::eval::{apply_binary, apply_unary};
use super::{BinaryOp, Expr, SlotId, UnaryOp};

impl Expr {
    /// Exact partial derivative with respect to `slot`, simplified.
    pub fn differentiate(&self, slot: SlotId) -> Expr {
        derive(self, slot).simplify()
    }

    /// Value-preserving rewrites: constant folding and the identities
    /// `0*x -> 0`, `x+0 -> x`, `1*x -> x`, `x/1 -> x`, `x^1 -> x`, `x^0 -> 1`.
    pub fn simplify(&self) -> Expr {
        match self {
            Expr::Const(_) | Expr::Slot(_) => self.clone(),
            Expr::Unary(op, a) => simplify_unary(*op, a.simplify()),
            Expr::Binary(op, a, b) => simplify_binary(*op, a.simplify(), b.simplify()),
            Expr::Pow(a, k) => simplify_pow(a.simplify(), *k),
        }
    }
}

fn derive(e: &Expr, s: SlotId) -> Expr {
    if !e.depends_on(s) {
        return Expr::zero();
    }
    match e {
        Expr::Const(_) => Expr::zero(),
        Expr::Slot(v) => {
            if *v == s {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Unary(op, a) => {
            let da = derive(a, s);
            let a = (**a).clone();
            let outer = match op {
                UnaryOp::Neg => return Expr::neg(da),
                UnaryOp::Sin => Expr::unary(UnaryOp::Cos, a),
                UnaryOp::Cos => Expr::neg(Expr::unary(UnaryOp::Sin, a)),
                UnaryOp::Exp => Expr::unary(UnaryOp::Exp, a),
                UnaryOp::Log => return Expr::div(da, a),
                UnaryOp::Sqrt => {
                    return Expr::div(
                        da,
                        Expr::mul(Expr::Const(2.0), Expr::unary(UnaryOp::Sqrt, a)),
                    )
                }
            };
            Expr::mul(outer, da)
        }
        Expr::Binary(op, a, b) => {
            let da = derive(a, s);
            let db = derive(b, s);
            match op {
                BinaryOp::Add => Expr::add(da, db),
                BinaryOp::Sub => Expr::sub(da, db),
                BinaryOp::Mul => {
                    Expr::add(Expr::mul(da, (**b).clone()), Expr::mul((**a).clone(), db))
                }
                BinaryOp::Div => Expr::div(
                    Expr::sub(Expr::mul(da, (**b).clone()), Expr::mul((**a).clone(), db)),
                    Expr::powi((**b).clone(), 2),
                ),
            }
        }
        Expr::Pow(a, k) => {
            if *k == 0 {
                return Expr::zero();
            }
            let da = derive(a, s);
            Expr::mul(
                Expr::mul(Expr::Const(*k as f64), Expr::powi((**a).clone(), k - 1)),
                da,
            )
        }
    }
}

fn finite_const(v: Option<f64>) -> Option<Expr> {
    v.filter(|x| x.is_finite()).map(Expr::Const)
}

fn simplify_unary(op: UnaryOp, a: Expr) -> Expr {
    if let Expr::Const(c) = a {
        if let Some(folded) = finite_const(apply_unary(op, c)) {
            return folded;
        }
    }
    if op == UnaryOp::Neg {
        if let Expr::Unary(UnaryOp::Neg, inner) = a {
            return *inner;
        }
    }
    Expr::unary(op, a)
}

fn simplify_binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
    if let (Expr::Const(x), Expr::Const(y)) = (&a, &b) {
        if let Some(folded) = finite_const(apply_binary(op, *x, *y)) {
            return folded;
        }
    }
    match op {
        BinaryOp::Add => {
            if a.is_zero() {
                return b;
            }
            if b.is_zero() {
                return a;
            }
        }
        BinaryOp::Sub => {
            if b.is_zero() {
                return a;
            }
            if a.is_zero() {
                return simplify_unary(UnaryOp::Neg, b);
            }
        }
        BinaryOp::Mul => {
            if a.is_zero() || b.is_zero() {
                return Expr::zero();
            }
            if a.is_one() {
                return b;
            }
            if b.is_one() {
                return a;
            }
        }
        BinaryOp::Div => {
            if b.is_one() {
                return a;
            }
        }
    }
    Expr::binary(op, a, b)
}

fn simplify_pow(a: Expr, k: i32) -> Expr {
    if k == 0 {
        return Expr::one();
    }
    if k == 1 {
        return a;
    }
    if let Expr::Const(c) = a {
        if c != 0.0 || k > 0 {
            if let Some(folded) = finite_const(Some(c.powi(k))) {
                return folded;
            }
        }
    }
    Expr::powi(a, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Vocabulary};
    use std::collections::HashMap;

    fn lag(src: &str) -> Expr {
        parse(src, &Vocabulary::lagrangian(1, 1)).unwrap()
    }

    #[test]
    fn partial_of_delayed_product_in_z() {
        let e = lag("xt0*z");
        assert_eq!(e.differentiate(SlotId::Z), lag("xt0"));
    }

    #[test]
    fn absent_slot_gives_zero() {
        assert_eq!(lag("t").differentiate(SlotId::state(0, 0)), Expr::zero());
    }

    #[test]
    fn half_square_matches_central_difference() {
        let e = lag("x1^2/2");
        let slot = SlotId::state(1, 0);
        let de = e.differentiate(slot);
        let at = |v: f64| {
            let env: HashMap<SlotId, f64> = [(slot, v)].into_iter().collect();
            env
        };
        let step = 1e-5;
        let fd =
            (e.eval(&at(0.7 + step)).unwrap() - e.eval(&at(0.7 - step)).unwrap()) / (2.0 * step);
        let exact = de.eval(&at(0.7)).unwrap();
        assert!((fd - exact).abs() <= 1e-8, "{fd} vs {exact}");
    }

    #[test]
    fn rewrites() {
        let v = Vocabulary::lagrangian(1, 1);
        let cases = [
            ("0*x0 + z", "z"),
            ("1*x0 - 0", "x0"),
            ("x0^1 / 1", "x0"),
            ("(2+3)*x0^0", "5"),
            ("--z", "z"),
            ("0 - z", "-z"),
        ];
        for (src, want) in cases {
            assert_eq!(
                parse(src, &v).unwrap().simplify(),
                parse(want, &v).unwrap(),
                "{src}"
            );
        }
        // Division by a zero literal is left for evaluation to report.
        let e = parse("1/0", &v).unwrap().simplify();
        assert!(matches!(e, Expr::Binary(BinaryOp::Div, ..)));
    }
}
