//! A small expression language for user-supplied targets.
//!
//! Real mode binds `x` (one dimension) or `x1 .. xp`; complex mode binds the
//! single variable `s = sigma + i t`. Supported syntax:
//!
//! * literals `2`, `0.5`, `1e-3`, imaginary `1i`, `0.5i` (complex mode only)
//! * `+ - * / ^` with `^` right-associative and binding tighter than unary minus
//! * `sin cos tan exp log sqrt abs re im conj`
//!
//! Vector-valued targets separate their components with `;`. Constraints are
//! comparisons (`< <= > >= == !=`) joined with `&&` / `||`.

mod eval;
mod lexer;
mod parser;

use std::fmt;

use thiserror::Error;

pub use eval::{Compiled, CompiledConstraint};
pub use parser::{parse, parse_constraint, Condition, RelOp};

use crate::target::{EvalError, TargetFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Real arguments in `p` dimensions.
    Real(usize),
    /// One complex argument, laid out as `(sigma, t)`.
    Complex,
}

impl EvalMode {
    pub fn dim(self) -> usize {
        match self {
            EvalMode::Real(p) => p,
            EvalMode::Complex => 2,
        }
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
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Re,
    Im,
    Conj,
}

impl Func {
    pub const ALL: [Func; 10] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
        Func::Re,
        Func::Im,
        Func::Conj,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Re => "re",
            Func::Im => "im",
            Func::Conj => "conj",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }
}

/// Bound variable: a real axis (0-based) or the complex argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Axis(usize),
    S,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// `c i`
    Imag(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl fmt::Display for Expr {
    /// Fully parenthesized; reparses to the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Imag(v) => write!(f, "{v}i"),
            Expr::Var(Var::Axis(i)) => write!(f, "x{}", i + 1),
            Expr::Var(Var::S) => f.write_str("s"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    Unbound(String),
    UnknownFunction(String),
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
    Mode(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("at byte {offset}: {}", describe(.kind))]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

fn describe(kind: &ParseErrorKind) -> String {
    match kind {
        ParseErrorKind::Syntax(m) => m.clone(),
        ParseErrorKind::Unbound(v) => format!("unbound variable {v:?}"),
        ParseErrorKind::UnknownFunction(n) => format!("unknown function {n:?}"),
        ParseErrorKind::Arity {
            name,
            expected,
            got,
        } => format!("{name} takes {expected} argument(s), got {got}"),
        ParseErrorKind::Mode(m) => m.clone(),
    }
}

/// Compiles `src` into a target function. A `;` in real mode yields a
/// vector-valued target with one component per segment.
pub fn to_target(src: &str, mode: EvalMode) -> Result<TargetFunction, ParseError> {
    let parts: Vec<&str> = src.split(';').collect();
    let label = src.trim().to_string();
    if parts.len() == 1 {
        let prog = Compiled::new(&parse(src, mode)?, mode);
        return Ok(match mode {
            EvalMode::Real(p) => {
                TargetFunction::real(p, move |x| prog.eval_real(x)).with_label(label)
            }
            EvalMode::Complex => {
                TargetFunction::complex(move |s| prog.eval_complex(s)).with_label(label)
            }
        });
    }
    let EvalMode::Real(p) = mode else {
        return Err(ParseError {
            offset: src.find(';').unwrap_or(0),
            kind: ParseErrorKind::Mode("vector components are only supported in real mode".into()),
        });
    };
    let mut progs = Vec::with_capacity(parts.len());
    let mut offset = 0;
    for part in &parts {
        let e = parse(part, mode).map_err(|mut e| {
            e.offset += offset;
            e
        })?;
        progs.push(Compiled::new(&e, mode));
        offset += part.len() + 1;
    }
    let q = progs.len();
    Ok(TargetFunction::vector(p, q, move |x, out: &mut [f64]| {
        for (o, prog) in out.iter_mut().zip(&progs) {
            *o = prog.eval_real(x)?;
        }
        Ok::<(), EvalError>(())
    })
    .with_label(label))
}
