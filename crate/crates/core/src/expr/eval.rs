use std::collections::HashMap;

use thiserror::Error;

use super::{BinaryOp, Expr, SlotId, UnaryOp};

/// Source of slot values during evaluation.
pub trait SlotValues {
    fn value(&self, slot: SlotId) -> Option<f64>;
}

impl SlotValues for HashMap<SlotId, f64> {
    fn value(&self, slot: SlotId) -> Option<f64> {
        self.get(&slot).copied()
    }
}

impl<F: Fn(SlotId) -> Option<f64>> SlotValues for F {
    fn value(&self, slot: SlotId) -> Option<f64> {
        self(slot)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("slot `{0}` is not bound")]
    Unbound(SlotId),
    #[error("domain error in `{node}`: {reason}")]
    Domain { node: String, reason: &'static str },
}

impl Expr {
    /// Tree-walk evaluation in IEEE double precision.
    pub fn eval(&self, env: &impl SlotValues) -> Result<f64, EvalError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Slot(s) => env.value(*s).ok_or(EvalError::Unbound(*s)),
            Expr::Unary(op, a) => {
                let v = a.eval(env)?;
                apply_unary(*op, v).ok_or_else(|| domain(self, unary_reason(*op)))
            }
            Expr::Binary(op, a, b) => {
                let lhs = a.eval(env)?;
                let rhs = b.eval(env)?;
                apply_binary(*op, lhs, rhs).ok_or_else(|| domain(self, "division by zero"))
            }
            Expr::Pow(a, k) => {
                let base = a.eval(env)?;
                if base == 0.0 && *k < 0 {
                    return Err(domain(self, "zero raised to a negative power"));
                }
                Ok(base.powi(*k))
            }
        }
    }
}

fn domain(node: &Expr, reason: &'static str) -> EvalError {
    EvalError::Domain {
        node: node.to_string(),
        reason,
    }
}

fn unary_reason(op: UnaryOp) -> &'static str {
    match op {
        UnaryOp::Log => "logarithm of a non-positive value",
        UnaryOp::Sqrt => "square root of a negative value",
        _ => "invalid argument",
    }
}

/// `None` signals a domain error.
pub(crate) fn apply_unary(op: UnaryOp, v: f64) -> Option<f64> {
    Some(match op {
        UnaryOp::Neg => -v,
        UnaryOp::Sin => v.sin(),
        UnaryOp::Cos => v.cos(),
        UnaryOp::Exp => v.exp(),
        UnaryOp::Log => {
            if v <= 0.0 {
                return None;
            }
            v.ln()
        }
        UnaryOp::Sqrt => {
            if v < 0.0 {
                return None;
            }
            v.sqrt()
        }
    })
}

pub(crate) fn apply_binary(op: BinaryOp, lhs: f64, rhs: f64) -> Option<f64> {
    Some(match op {
        BinaryOp::Add => lhs + rhs,
        BinaryOp::Sub => lhs - rhs,
        BinaryOp::Mul => lhs * rhs,
        BinaryOp::Div => {
            if rhs == 0.0 {
                return None;
            }
            lhs / rhs
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Vocabulary};

    fn env(pairs: &[(SlotId, f64)]) -> HashMap<SlotId, f64> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn product_of_delayed_state_and_z() {
        let e = parse("xt0*z", &Vocabulary::lagrangian(1, 1)).unwrap();
        let v = e
            .eval(&env(&[(SlotId::delayed(0, 0), 2.0), (SlotId::Z, 3.0)]))
            .unwrap();
        assert_eq!(v, 6.0);
    }

    #[test]
    fn exp_of_zero() {
        let e = parse("exp(0)", &Vocabulary::history()).unwrap();
        assert_eq!(e.eval(&env(&[])).unwrap(), 1.0);
    }

    #[test]
    fn unbound_and_domain_errors() {
        let vocab = Vocabulary::lagrangian(1, 1);
        let e = parse("x0 + z", &vocab).unwrap();
        assert_eq!(
            e.eval(&env(&[(SlotId::Z, 1.0)])),
            Err(EvalError::Unbound(SlotId::state(0, 0)))
        );
        let e = parse("log(x0)", &vocab).unwrap();
        let err = e.eval(&env(&[(SlotId::state(0, 0), -1.0)])).unwrap_err();
        assert!(matches!(err, EvalError::Domain { ref node, .. } if node == "log(x0_1)"));
        let e = parse("1/(x0-x0)", &vocab).unwrap();
        assert!(e.eval(&env(&[(SlotId::state(0, 0), 2.0)])).is_err());
    }
}
