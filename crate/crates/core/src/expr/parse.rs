use std::fmt;

use thiserror::Error;

use super::slot::NameError;
use super::{BinaryOp, Expr, UnaryOp, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    UnknownSlot(String),
    OrderOutOfRange { name: String, max: usize },
    ComponentOutOfRange { name: String, max: usize },
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Syntax(msg) => write!(f, "syntax error: {msg}"),
            ParseErrorKind::UnknownSlot(name) => write!(f, "unknown slot name `{name}`"),
            ParseErrorKind::OrderOutOfRange { name, max } => {
                write!(f, "derivative order of `{name}` out of range (max {max})")
            }
            ParseErrorKind::ComponentOutOfRange { name, max } => {
                write!(f, "component of `{name}` out of range (dimension {max})")
            }
        }
    }
}

/// Parse failure with a one-based source position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(source: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let (mut line, mut column) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, column);
        if c == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            column += 1;
            i += 1;
            continue;
        }
        let tok = if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            column += i - start;
            let value = text.parse::<f64>().map_err(|_| ParseError {
                kind: ParseErrorKind::Syntax(format!("malformed number `{text}`")),
                line: start_line,
                column: start_col,
            })?;
            tokens.push(Token {
                tok: Tok::Num(value),
                line: start_line,
                column: start_col,
            });
            continue;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            column += i - start;
            tokens.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: start_line,
                column: start_col,
            });
            continue;
        } else {
            match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => {
                    return Err(ParseError {
                        kind: ParseErrorKind::Syntax(format!("unexpected character `{c}`")),
                        line,
                        column,
                    })
                }
            }
        };
        tokens.push(Token {
            tok,
            line: start_line,
            column: start_col,
        });
        i += 1;
        column += 1;
    }
    tokens.push(Token {
        tok: Tok::End,
        line,
        column,
    });
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    vocab: &'a Vocabulary,
}

/// Parse `source` against the slot vocabulary `vocab`.
pub fn parse(source: &str, vocab: &Vocabulary) -> Result<Expr, ParseError> {
    let tokens = lex(source)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        vocab,
    };
    let expr = parser.expr()?;
    match parser.peek() {
        Tok::End => Ok(expr),
        other => Err(parser.error_here(format!("unexpected {}", describe(other)))),
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("number `{v}`"),
        Tok::Ident(s) => format!("name `{s}`"),
        Tok::Op(c) => format!("operator `{c}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::End => "end of input".into(),
    }
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, msg: String) -> ParseError {
        let t = &self.tokens[self.pos];
        ParseError {
            kind: ParseErrorKind::Syntax(msg),
            line: t.line,
            column: t.column,
        }
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.advance();
            Ok(())
        } else {
            Err(self.error_here(format!(
                "expected {}, found {}",
                describe(&want),
                describe(self.peek())
            )))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinaryOp::Add,
                Tok::Op('-') => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinaryOp::Mul,
                Tok::Op('/') => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Op('-') {
            self.advance();
            // `-3` is a negative literal unless a power follows.
            if let Tok::Num(v) = *self.peek() {
                if *self.peek_at(1) != Tok::Op('^') {
                    self.advance();
                    return Ok(Expr::Const(-v));
                }
            }
            let arg = self.unary()?;
            return Ok(Expr::neg(arg));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() != Tok::Op('^') {
            return Ok(base);
        }
        self.advance();
        let exponent = self.integer_exponent()?;
        Ok(Expr::powi(base, exponent))
    }

    fn integer_exponent(&mut self) -> Result<i32, ParseError> {
        let parenthesized = *self.peek() == Tok::LParen;
        if parenthesized {
            self.advance();
        }
        let negative = *self.peek() == Tok::Op('-');
        if negative {
            self.advance();
        }
        let value = match *self.peek() {
            Tok::Num(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => v as i32,
            _ => {
                return Err(self.error_here(
                    "exponent must be an integer literal; use exp/log for general powers".into(),
                ))
            }
        };
        self.advance();
        if parenthesized {
            self.expect(Tok::RParen)?;
        }
        Ok(if negative { -value } else { value })
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let token = self.tokens[self.pos].clone();
        if matches!(token.tok, Tok::Num(_) | Tok::LParen | Tok::Ident(_)) {
            self.advance();
        }
        match token.tok {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if let Some(op) = UnaryOp::from_name(&name) {
                    self.expect(Tok::LParen)?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen)?;
                    return Ok(Expr::unary(op, arg));
                }
                let at = |kind| ParseError {
                    kind,
                    line: token.line,
                    column: token.column,
                };
                match self.vocab.resolve(&name) {
                    Ok(slot) => Ok(Expr::Slot(slot)),
                    Err(NameError::Unknown) => Err(at(ParseErrorKind::UnknownSlot(name))),
                    Err(NameError::OrderOutOfRange { max }) => {
                        Err(at(ParseErrorKind::OrderOutOfRange { name, max }))
                    }
                    Err(NameError::ComponentOutOfRange { max }) => {
                        Err(at(ParseErrorKind::ComponentOutOfRange { name, max }))
                    }
                }
            }
            other => Err(self.error_here(format!("unexpected {}", describe(&other)))),
        }
    }
}
