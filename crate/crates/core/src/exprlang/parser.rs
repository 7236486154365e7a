use super::lexer::{tokenize, Tok, Token};
use super::{BinOp, EvalMode, Expr, Func, ParseError, ParseErrorKind, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl RelOp {
    pub fn apply(self, a: f64, b: f64) -> bool {
        match self {
            RelOp::Lt => a < b,
            RelOp::Le => a <= b,
            RelOp::Gt => a > b,
            RelOp::Ge => a >= b,
            RelOp::Eq => a == b,
            RelOp::Ne => a != b,
        }
    }
}

/// Boolean condition over expressions.
#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    Cmp(RelOp, Expr, Expr),
    And(Box<Condition>, Box<Condition>),
    Or(Box<Condition>, Box<Condition>),
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    src: &'a str,
    mode: EvalMode,
}

/// Parses an expression; every variable must be bound by `mode`.
pub fn parse(src: &str, mode: EvalMode) -> Result<Expr, ParseError> {
    let mut p = Parser::new(src, mode)?;
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

/// Parses a constraint such as `x1 + x2 >= 1 && x1 < 0.5`.
pub fn parse_constraint(src: &str, mode: EvalMode) -> Result<Condition, ParseError> {
    let mut p = Parser::new(src, mode)?;
    let c = p.condition()?;
    p.finish()?;
    Ok(c)
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, mode: EvalMode) -> Result<Self, ParseError> {
        let toks = tokenize(src)?;
        if toks.is_empty() {
            return Err(ParseError {
                offset: 0,
                kind: ParseErrorKind::Syntax("empty expression".into()),
            });
        }
        Ok(Parser {
            toks,
            pos: 0,
            src,
            mode,
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn offset(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|t| t.offset)
            .unwrap_or(self.src.len())
    }

    fn syntax<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            offset: self.offset(),
            kind: ParseErrorKind::Syntax(msg.into()),
        })
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> Result<(), ParseError> {
        if self.eat(tok) {
            Ok(())
        } else {
            self.syntax(format!("expected {what}"))
        }
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => self.syntax(format!("unexpected trailing token {t:?}")),
        }
    }

    fn condition(&mut self) -> Result<Condition, ParseError> {
        let mut lhs = self.conjunction()?;
        while self.eat(&Tok::Or) {
            let rhs = self.conjunction()?;
            lhs = Condition::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Condition, ParseError> {
        let mut lhs = self.comparison()?;
        while self.eat(&Tok::And) {
            let rhs = self.comparison()?;
            lhs = Condition::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn comparison(&mut self) -> Result<Condition, ParseError> {
        // `( cond )` and `( expr ) < ...` share a prefix; try the grouped
        // condition first and fall back to a plain comparison
        if self.peek() == Some(&Tok::LParen) {
            let save = self.pos;
            self.pos += 1;
            if let Ok(c) = self.condition() {
                if self.eat(&Tok::RParen) && !matches!(self.peek(), Some(t) if relop(t).is_some()) {
                    return Ok(c);
                }
            }
            self.pos = save;
        }
        let lhs = self.expr()?;
        let Some(op) = self.peek().and_then(relop) else {
            return self.syntax("expected a comparison operator");
        };
        self.pos += 1;
        let rhs = self.expr()?;
        Ok(Condition::Cmp(op, lhs, rhs))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Tok::Minus) {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat(&Tok::Plus) {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.eat(&Tok::Caret) {
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        let Some(tok) = self.peek().cloned() else {
            return self.syntax("unexpected end of input");
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Imag(v) => {
                if self.mode == EvalMode::Complex {
                    Ok(Expr::Imag(v))
                } else {
                    Err(ParseError {
                        offset,
                        kind: ParseErrorKind::Mode("imaginary literal in real mode".into()),
                    })
                }
            }
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(&Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.peek() == Some(&Tok::LParen) {
                    return self.call(name, offset);
                }
                if Func::from_name(&name).is_some() {
                    return Err(ParseError {
                        offset,
                        kind: ParseErrorKind::Arity {
                            name,
                            expected: 1,
                            got: 0,
                        },
                    });
                }
                self.variable(&name).map(Expr::Var).ok_or(ParseError {
                    offset,
                    kind: ParseErrorKind::Unbound(name),
                })
            }
            other => Err(ParseError {
                offset,
                kind: ParseErrorKind::Syntax(format!("unexpected token {other:?}")),
            }),
        }
    }

    fn call(&mut self, name: String, offset: usize) -> Result<Expr, ParseError> {
        let Some(func) = Func::from_name(&name) else {
            return Err(ParseError {
                offset,
                kind: ParseErrorKind::UnknownFunction(name),
            });
        };
        self.expect(&Tok::LParen, "'('")?;
        let mut args = Vec::new();
        if self.peek() != Some(&Tok::RParen) {
            args.push(self.expr()?);
            while self.eat(&Tok::Comma) {
                args.push(self.expr()?);
            }
        }
        self.expect(&Tok::RParen, "')'")?;
        if args.len() != 1 {
            return Err(ParseError {
                offset,
                kind: ParseErrorKind::Arity {
                    name,
                    expected: 1,
                    got: args.len(),
                },
            });
        }
        Ok(Expr::Call(func, Box::new(args.pop().unwrap())))
    }

    fn variable(&self, name: &str) -> Option<Var> {
        match self.mode {
            EvalMode::Complex => (name == "s").then_some(Var::S),
            EvalMode::Real(p) => {
                if name == "x" && p == 1 {
                    return Some(Var::Axis(0));
                }
                let idx: usize = name.strip_prefix('x')?.parse().ok()?;
                // reject forms like `x01`
                if name[1..].starts_with('0') {
                    return None;
                }
                (1..=p).contains(&idx).then(|| Var::Axis(idx - 1))
            }
        }
    }
}

fn relop(t: &Tok) -> Option<RelOp> {
    Some(match t {
        Tok::Lt => RelOp::Lt,
        Tok::Le => RelOp::Le,
        Tok::Gt => RelOp::Gt,
        Tok::Ge => RelOp::Ge,
        Tok::EqEq => RelOp::Eq,
        Tok::Ne => RelOp::Ne,
        _ => return None,
    })
}
