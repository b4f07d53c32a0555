//! A small arithmetic language for transforming column values before they
//! reach a synth parameter.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | variable | builtin '(' args ')' | '(' expr ')'
//! ```
//!
//! Variables: `x` (cell value), `i` (row index from 0), `n` (row count),
//! `min`/`max` (column range). Builtins: `lin(v,a,b,c,d)`, `clamp(v,lo,hi)`,
//! `log`, `exp`, `pow(v,e)`, `abs`, `floor`, `round`.

mod eval;
mod lexer;
mod parser;

use std::fmt;

use thiserror::Error;

pub use eval::{apply_builtin, eval, EvalEnv, Program};
pub use parser::parse;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    I,
    N,
    Min,
    Max,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::I => "i",
            Var::N => "n",
            Var::Min => "min",
            Var::Max => "max",
        }
    }

    fn from_name(name: &str) -> Option<Var> {
        Some(match name {
            "x" => Var::X,
            "i" => Var::I,
            "n" => Var::N,
            "min" => Var::Min,
            "max" => Var::Max,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Lin,
    Clamp,
    Log,
    Exp,
    Pow,
    Abs,
    Floor,
    Round,
}

impl Builtin {
    pub const ALL: [Builtin; 8] = [
        Builtin::Lin,
        Builtin::Clamp,
        Builtin::Log,
        Builtin::Exp,
        Builtin::Pow,
        Builtin::Abs,
        Builtin::Floor,
        Builtin::Round,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Lin => "lin",
            Builtin::Clamp => "clamp",
            Builtin::Log => "log",
            Builtin::Exp => "exp",
            Builtin::Pow => "pow",
            Builtin::Abs => "abs",
            Builtin::Floor => "floor",
            Builtin::Round => "round",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Lin => 5,
            Builtin::Clamp => 3,
            Builtin::Pow => 2,
            Builtin::Log | Builtin::Exp | Builtin::Abs | Builtin::Floor | Builtin::Round => 1,
        }
    }

    fn from_name(name: &str) -> Option<Builtin> {
        Builtin::ALL.into_iter().find(|b| b.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Builtin, Vec<Expr>),
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Neg(_) => 3,
            Expr::Num(_) | Expr::Var(_) | Expr::Call(..) => 5,
        }
    }
}

/// The mapping applied when a region has none attached: `x`.
pub fn identity_mapping() -> Expr {
    Expr::Var(Var::X)
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

/// Prints with the minimum parentheses needed to parse back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Neg(inner) => {
                f.write_str("-")?;
                write_operand(f, inner, inner.precedence() < 3)
            }
            Expr::Binary(BinOp::Pow, lhs, rhs) => {
                write_operand(f, lhs, lhs.precedence() <= 4)?;
                f.write_str(" ^ ")?;
                // the exponent parses as a unary expression
                write_operand(f, rhs, rhs.precedence() < 3)
            }
            Expr::Binary(op, lhs, rhs) => {
                let p = op.precedence();
                write_operand(f, lhs, lhs.precedence() < p)?;
                write!(f, " {} ", op.symbol())?;
                write_operand(f, rhs, rhs.precedence() <= p)
            }
            Expr::Call(b, args) => {
                write!(f, "{}(", b.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}
