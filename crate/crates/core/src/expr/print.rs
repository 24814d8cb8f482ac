use super::{BinaryOp, Expr, UnaryOp};

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

/// Source text that parses back to the same tree.
pub(crate) fn to_source(expr: &Expr) -> String {
    let mut out = String::new();
    write_expr(expr, &mut out);
    out
}

fn precedence(expr: &Expr) -> u8 {
    match expr {
        Expr::Const(_) | Expr::Slot(_) => PREC_ATOM,
        Expr::Unary(UnaryOp::Neg, _) => PREC_UNARY,
        Expr::Unary(..) => PREC_ATOM,
        Expr::Pow(..) => PREC_POW,
        Expr::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => PREC_ADD,
        Expr::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => PREC_MUL,
    }
}

fn write_wrapped(expr: &Expr, wrap: bool, out: &mut String) {
    if wrap {
        out.push('(');
        write_expr(expr, out);
        out.push(')');
    } else {
        write_expr(expr, out);
    }
}

fn write_expr(expr: &Expr, out: &mut String) {
    match expr {
        Expr::Const(c) => {
            if c.is_sign_negative() {
                // Parses back to the same negative literal.
                out.push_str(&format!("(-{:?})", -c));
            } else {
                out.push_str(&format!("{c:?}"));
            }
        }
        Expr::Slot(s) => out.push_str(&s.to_string()),
        Expr::Unary(UnaryOp::Neg, a) => {
            out.push('-');
            // A literal operand would fold into a negative constant on re-parse.
            let wrap = precedence(a) < PREC_UNARY || matches!(**a, Expr::Const(_));
            write_wrapped(a, wrap, out);
        }
        Expr::Unary(op, a) => {
            out.push_str(op.name());
            out.push('(');
            write_expr(a, out);
            out.push(')');
        }
        Expr::Pow(a, k) => {
            write_wrapped(a, precedence(a) <= PREC_POW, out);
            if *k < 0 {
                out.push_str(&format!("^(-{})", -(*k as i64)));
            } else {
                out.push_str(&format!("^{k}"));
            }
        }
        Expr::Binary(op, a, b) => {
            let p = precedence(expr);
            write_wrapped(a, precedence(a) < p, out);
            out.push(' ');
            out.push(op.symbol());
            out.push(' ');
            // Left associativity: an equal-precedence right operand needs parens.
            write_wrapped(b, precedence(b) <= p, out);
        }
    }
}
