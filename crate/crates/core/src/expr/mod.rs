//! Scalar expressions over named slots.
//!
//! One engine serves the Lagrangian (state and delayed jets, `z`), the
//! history functions (time only) and gauge transformations (gauge jets).
//! Every partial derivative the rest of the crate needs comes from
//! [`Expr::differentiate`].
//!
//! Grammar (standard precedence, `^` binds tightest and takes an integer
//! literal exponent, no implicit multiplication):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' int | '^' '(' '-'? int ')' | '^' '-' int)?
//! primary := number | name | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | exp | log | sqrt
//! ```

mod diff;
mod eval;
mod parse;
mod print;
mod slot;

use std::collections::BTreeSet;

pub use eval::{EvalError, SlotValues};
pub use parse::{parse, ParseError, ParseErrorKind};
pub use slot::{NameError, Param, SlotId, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

/// Immutable expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Slot(SlotId),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    /// Integer power `base ^ exponent`.
    Pow(Box<Expr>, i32),
}

impl Expr {
    pub fn constant(value: f64) -> Self {
        Expr::Const(value)
    }

    pub fn slot(slot: SlotId) -> Self {
        Expr::Slot(slot)
    }

    pub fn zero() -> Self {
        Expr::Const(0.0)
    }

    pub fn one() -> Self {
        Expr::Const(1.0)
    }

    pub fn unary(op: UnaryOp, arg: Expr) -> Self {
        Expr::Unary(op, Box::new(arg))
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn add(lhs: Expr, rhs: Expr) -> Self {
        Self::binary(BinaryOp::Add, lhs, rhs)
    }

    pub fn sub(lhs: Expr, rhs: Expr) -> Self {
        Self::binary(BinaryOp::Sub, lhs, rhs)
    }

    pub fn mul(lhs: Expr, rhs: Expr) -> Self {
        Self::binary(BinaryOp::Mul, lhs, rhs)
    }

    pub fn div(lhs: Expr, rhs: Expr) -> Self {
        Self::binary(BinaryOp::Div, lhs, rhs)
    }

    pub fn neg(arg: Expr) -> Self {
        Self::unary(UnaryOp::Neg, arg)
    }

    pub fn powi(base: Expr, exponent: i32) -> Self {
        Expr::Pow(Box::new(base), exponent)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 1.0)
    }

    /// Every slot referenced by the tree.
    pub fn slots(&self) -> BTreeSet<SlotId> {
        let mut out = BTreeSet::new();
        self.collect_slots(&mut out);
        out
    }

    fn collect_slots(&self, out: &mut BTreeSet<SlotId>) {
        match self {
            Expr::Const(_) => {}
            Expr::Slot(s) => {
                out.insert(*s);
            }
            Expr::Unary(_, a) | Expr::Pow(a, _) => a.collect_slots(out),
            Expr::Binary(_, a, b) => {
                a.collect_slots(out);
                b.collect_slots(out);
            }
        }
    }

    pub fn depends_on(&self, slot: SlotId) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Slot(s) => *s == slot,
            Expr::Unary(_, a) | Expr::Pow(a, _) => a.depends_on(slot),
            Expr::Binary(_, a, b) => a.depends_on(slot) || b.depends_on(slot),
        }
    }

    /// Number of operator nodes (unary, binary and power).
    pub fn operator_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Slot(_) => 0,
            Expr::Unary(_, a) | Expr::Pow(a, _) => 1 + a.operator_count(),
            Expr::Binary(_, a, b) => 1 + a.operator_count() + b.operator_count(),
        }
    }

    /// Replace slots by expressions; slots mapped to `None` are kept.
    pub fn substitute(&self, map: &impl Fn(SlotId) -> Option<Expr>) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Slot(s) => map(*s).unwrap_or(Expr::Slot(*s)),
            Expr::Unary(op, a) => Expr::unary(*op, a.substitute(map)),
            Expr::Pow(a, k) => Expr::powi(a.substitute(map), *k),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.substitute(map), b.substitute(map)),
        }
    }
}

impl std::fmt::Display for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&print::to_source(self))
    }
}
