use num_complex::Complex64;

use super::parser::{Condition, RelOp};
use super::{BinOp, EvalMode, Expr, Func, Var};
use crate::target::{EvalError, Value};

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    ConstC(Complex64),
    Var(usize),
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    PowInt(i32),
    Call(Func),
}

const INLINE_STACK: usize = 32;

/// Postfix program compiled from an [`Expr`].
#[derive(Debug, Clone)]
pub struct Compiled {
    ops: Vec<Op>,
    depth: usize,
    mode: EvalMode,
}

fn integral_exponent(v: f64) -> Option<i32> {
    (v.fract() == 0.0 && v.abs() <= i32::MAX as f64).then_some(v as i32)
}

impl Compiled {
    pub fn new(e: &Expr, mode: EvalMode) -> Self {
        let mut ops = Vec::new();
        emit(e, &mut ops);
        let mut depth = 0usize;
        let mut max = 0usize;
        for op in &ops {
            match op {
                Op::Const(_) | Op::ConstC(_) | Op::Var(_) => depth += 1,
                Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Pow => depth -= 1,
                Op::Neg | Op::PowInt(_) | Op::Call(_) => {}
            }
            max = max.max(depth);
        }
        Compiled {
            ops,
            depth: max,
            mode,
        }
    }

    pub fn mode(&self) -> EvalMode {
        self.mode
    }

    pub fn eval(&self, x: &[f64]) -> Result<Value, EvalError> {
        match self.mode {
            EvalMode::Real(_) => self.eval_real(x).map(Value::Real),
            EvalMode::Complex => self
                .eval_complex(Complex64::new(x[0], x[1]))
                .map(Value::Complex),
        }
    }

    pub fn eval_real(&self, x: &[f64]) -> Result<f64, EvalError> {
        if self.depth <= INLINE_STACK {
            let mut stack = [0.0f64; INLINE_STACK];
            self.run_real(x, &mut stack)
        } else {
            let mut stack = vec![0.0f64; self.depth];
            self.run_real(x, &mut stack)
        }
    }

    pub fn eval_complex(&self, s: Complex64) -> Result<Complex64, EvalError> {
        if self.depth <= INLINE_STACK {
            let mut stack = [Complex64::new(0.0, 0.0); INLINE_STACK];
            self.run_complex(s, &mut stack)
        } else {
            let mut stack = vec![Complex64::new(0.0, 0.0); self.depth];
            self.run_complex(s, &mut stack)
        }
    }

    fn run_real(&self, x: &[f64], stack: &mut [f64]) -> Result<f64, EvalError> {
        let mut sp = 0usize;
        for op in &self.ops {
            match *op {
                Op::Const(v) => {
                    stack[sp] = v;
                    sp += 1;
                }
                Op::ConstC(_) => return Err(EvalError::new("complex literal in real mode")),
                Op::Var(i) => {
                    stack[sp] = x[i];
                    sp += 1;
                }
                Op::Neg => stack[sp - 1] = -stack[sp - 1],
                Op::PowInt(n) => stack[sp - 1] = stack[sp - 1].powi(n),
                Op::Call(f) => stack[sp - 1] = real_call(f, stack[sp - 1])?,
                Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Pow => {
                    sp -= 1;
                    let (a, b) = (stack[sp - 1], stack[sp]);
                    stack[sp - 1] = match *op {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        Op::Div => a / b,
                        _ => real_pow(a, b)?,
                    };
                }
            }
        }
        Ok(stack[0])
    }

    fn run_complex(&self, s: Complex64, stack: &mut [Complex64]) -> Result<Complex64, EvalError> {
        let mut sp = 0usize;
        for op in &self.ops {
            match *op {
                Op::Const(v) => {
                    stack[sp] = Complex64::new(v, 0.0);
                    sp += 1;
                }
                Op::ConstC(z) => {
                    stack[sp] = z;
                    sp += 1;
                }
                Op::Var(_) => {
                    stack[sp] = s;
                    sp += 1;
                }
                Op::Neg => stack[sp - 1] = -stack[sp - 1],
                Op::PowInt(n) => stack[sp - 1] = stack[sp - 1].powi(n),
                Op::Call(f) => stack[sp - 1] = complex_call(f, stack[sp - 1])?,
                Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Pow => {
                    sp -= 1;
                    let (a, b) = (stack[sp - 1], stack[sp]);
                    stack[sp - 1] = match *op {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        Op::Div => a / b,
                        _ => complex_pow(a, b)?,
                    };
                }
            }
        }
        Ok(stack[0])
    }
}

fn emit(e: &Expr, ops: &mut Vec<Op>) {
    match e {
        Expr::Num(v) => ops.push(Op::Const(*v)),
        Expr::Imag(v) => ops.push(Op::ConstC(Complex64::new(0.0, *v))),
        Expr::Var(Var::Axis(i)) => ops.push(Op::Var(*i)),
        Expr::Var(Var::S) => ops.push(Op::Var(0)),
        Expr::Neg(a) => {
            emit(a, ops);
            ops.push(Op::Neg);
        }
        Expr::Call(f, a) => {
            emit(a, ops);
            ops.push(Op::Call(*f));
        }
        Expr::Bin(op, a, b) => {
            emit(a, ops);
            if *op == BinOp::Pow {
                if let Expr::Num(v) = **b {
                    if let Some(n) = integral_exponent(v) {
                        ops.push(Op::PowInt(n));
                        return;
                    }
                }
            }
            emit(b, ops);
            ops.push(match op {
                BinOp::Add => Op::Add,
                BinOp::Sub => Op::Sub,
                BinOp::Mul => Op::Mul,
                BinOp::Div => Op::Div,
                BinOp::Pow => Op::Pow,
            });
        }
    }
}

/// Real `a^b`: integer exponents by `powi`, otherwise `powf` on a
/// non-negative base.
pub(crate) fn real_pow(a: f64, b: f64) -> Result<f64, EvalError> {
    if let Some(n) = integral_exponent(b) {
        return Ok(a.powi(n));
    }
    if a < 0.0 {
        return Err(EvalError::new(format!(
            "negative base {a} with non-integer exponent {b}"
        )));
    }
    Ok(a.powf(b))
}

/// Complex `a^b`: integer real exponents by repeated squaring, otherwise the
/// principal branch `exp(b log a)`.
pub(crate) fn complex_pow(a: Complex64, b: Complex64) -> Result<Complex64, EvalError> {
    if b.im == 0.0 {
        if let Some(n) = integral_exponent(b.re) {
            return Ok(a.powi(n));
        }
    }
    if a.re == 0.0 && a.im == 0.0 {
        if b.re > 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        return Err(EvalError::new(format!("0 raised to {b}")));
    }
    Ok((b * a.ln()).exp())
}

pub(crate) fn real_call(f: Func, v: f64) -> Result<f64, EvalError> {
    Ok(match f {
        Func::Sin => v.sin(),
        Func::Cos => v.cos(),
        Func::Tan => v.tan(),
        Func::Exp => v.exp(),
        Func::Log => {
            if v <= 0.0 {
                return Err(EvalError::new(format!("log of non-positive value {v}")));
            }
            v.ln()
        }
        Func::Sqrt => {
            if v < 0.0 {
                return Err(EvalError::new(format!("sqrt of negative value {v}")));
            }
            v.sqrt()
        }
        Func::Abs => v.abs(),
        Func::Re | Func::Conj => v,
        Func::Im => 0.0,
    })
}

pub(crate) fn complex_call(f: Func, z: Complex64) -> Result<Complex64, EvalError> {
    Ok(match f {
        Func::Sin => z.sin(),
        Func::Cos => z.cos(),
        Func::Tan => z.tan(),
        Func::Exp => z.exp(),
        Func::Log => {
            if z.re == 0.0 && z.im == 0.0 {
                return Err(EvalError::new("log of zero"));
            }
            z.ln()
        }
        Func::Sqrt => z.sqrt(),
        Func::Abs => Complex64::new(z.norm(), 0.0),
        Func::Re => Complex64::new(z.re, 0.0),
        Func::Im => Complex64::new(z.im, 0.0),
        Func::Conj => z.conj(),
    })
}

impl Expr {
    /// One-off evaluation; compile once with [`Compiled`] for repeated use.
    pub fn eval(&self, x: &[f64], mode: EvalMode) -> Result<Value, EvalError> {
        if x.len() != mode.dim() {
            return Err(EvalError::new(format!(
                "expected {} coordinates, got {}",
                mode.dim(),
                x.len()
            )));
        }
        Compiled::new(self, mode).eval(x)
    }
}

#[derive(Debug, Clone)]
enum CondNode {
    Cmp(RelOp, Compiled, Compiled),
    And(Box<CondNode>, Box<CondNode>),
    Or(Box<CondNode>, Box<CondNode>),
}

/// Compiled boolean constraint.
#[derive(Debug, Clone)]
pub struct CompiledConstraint {
    root: CondNode,
}

impl CompiledConstraint {
    pub fn new(c: &Condition, mode: EvalMode) -> Self {
        fn build(c: &Condition, mode: EvalMode) -> CondNode {
            match c {
                Condition::Cmp(op, a, b) => {
                    CondNode::Cmp(*op, Compiled::new(a, mode), Compiled::new(b, mode))
                }
                Condition::And(a, b) => {
                    CondNode::And(Box::new(build(a, mode)), Box::new(build(b, mode)))
                }
                Condition::Or(a, b) => {
                    CondNode::Or(Box::new(build(a, mode)), Box::new(build(b, mode)))
                }
            }
        }
        CompiledConstraint {
            root: build(c, mode),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<bool, EvalError> {
        fn real_of(p: &Compiled, x: &[f64]) -> Result<f64, EvalError> {
            match p.eval(x)? {
                Value::Real(v) => Ok(v),
                Value::Complex(z) if z.im == 0.0 => Ok(z.re),
                Value::Complex(z) => {
                    Err(EvalError::new(format!("cannot compare complex value {z}")))
                }
                Value::Vector(_) => unreachable!(),
            }
        }
        fn go(n: &CondNode, x: &[f64]) -> Result<bool, EvalError> {
            match n {
                CondNode::Cmp(op, a, b) => Ok(op.apply(real_of(a, x)?, real_of(b, x)?)),
                CondNode::And(a, b) => Ok(go(a, x)? && go(b, x)?),
                CondNode::Or(a, b) => Ok(go(a, x)? || go(b, x)?),
            }
        }
        go(&self.root, x)
    }
}
