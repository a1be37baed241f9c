//! Small arithmetic expression language used by model spec files.
//!
//! Grammar (usual precedence, `^` right-associative and binding tighter than
//! unary minus):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('+' | '-') unary | power
//! power := atom ('^' unary)?
//! atom  := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Identifiers resolve to the variables the caller declares (for example
//! `x`, `y` or `a`) or to the constants `pi` and `e`. Functions: `exp`,
//! `log` (alias `ln`), `sqrt`, `abs`, `tanh`, `sinh`, `cosh`, `sech`, `sin`,
//! `cos`, `min`, `max`, `pow`, `step` (Heaviside, `step(0) = 1`).

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("parse error at byte {pos} in `{source_text}`: {message}")]
    Parse {
        pos: usize,
        source_text: String,
        message: String,
    },
    #[error("unknown identifier `{0}`")]
    UnknownIdent(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("function `{name}` takes {expected} argument(s), got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Exp,
    Log,
    Sqrt,
    Abs,
    Tanh,
    Sinh,
    Cosh,
    Sech,
    Sin,
    Cos,
    Step,
    Min,
    Max,
    Pow,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "tanh" => Func::Tanh,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "sech" => Func::Sech,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "step" => Func::Step,
            "min" => Func::Min,
            "max" => Func::Max,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max | Func::Pow => 2,
            _ => 1,
        }
    }

    fn apply(self, args: &[f64]) -> f64 {
        let a = args[0];
        match self {
            Func::Exp => a.exp(),
            Func::Log => a.ln(),
            Func::Sqrt => a.sqrt(),
            Func::Abs => a.abs(),
            Func::Tanh => a.tanh(),
            Func::Sinh => a.sinh(),
            Func::Cosh => a.cosh(),
            Func::Sech => 1.0 / a.cosh(),
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Step => {
                if a >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Func::Min => a.min(args[1]),
            Func::Max => a.max(args[1]),
            Func::Pow => a.powf(args[1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    fn eval(&self, vars: &[f64]) -> f64 {
        match self {
            Node::Const(c) => *c,
            Node::Var(i) => vars[*i],
            Node::Neg(a) => -a.eval(vars),
            Node::Add(a, b) => a.eval(vars) + b.eval(vars),
            Node::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Node::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Node::Div(a, b) => a.eval(vars) / b.eval(vars),
            Node::Pow(a, b) => {
                let base = a.eval(vars);
                match b.as_ref() {
                    Node::Const(c) if c.fract() == 0.0 && c.abs() < 64.0 => base.powi(*c as i32),
                    other => base.powf(other.eval(vars)),
                }
            }
            Node::Call(f, args) => {
                let mut buf = [0.0; 2];
                for (slot, arg) in buf.iter_mut().zip(args) {
                    *slot = arg.eval(vars);
                }
                f.apply(&buf[..args.len()])
            }
        }
    }
}

/// A compiled expression over a fixed list of variables.
#[derive(Clone, PartialEq)]
pub struct Expr {
    source: String,
    vars: Vec<String>,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?} in {:?})", self.source, self.vars)
    }
}

impl Expr {
    /// Parses `source`, resolving identifiers against `vars`.
    pub fn parse(source: &str, vars: &[&str]) -> Result<Expr, ExprError> {
        let mut parser = Parser {
            src: source,
            bytes: source.as_bytes(),
            pos: 0,
            vars,
        };
        let root = parser.expr()?;
        parser.skip_ws();
        if parser.pos != parser.bytes.len() {
            return Err(parser.error("unexpected trailing input"));
        }
        Ok(Expr {
            source: source.to_string(),
            vars: vars.iter().map(|s| s.to_string()).collect(),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Evaluates with `values` bound positionally to the declared variables.
    pub fn eval(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.vars.len());
        self.root.eval(values)
    }

    /// Wraps a one-variable expression as a shareable closure.
    pub fn into_fn1(self) -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
        Arc::new(move |x| self.root.eval(&[x]))
    }

    /// Wraps a two-variable expression as a shareable closure.
    pub fn into_fn2(self) -> Arc<dyn Fn(f64, f64) -> f64 + Send + Sync> {
        Arc::new(move |x, y| self.root.eval(&[x, y]))
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    vars: &'a [&'a str],
}

impl<'a> Parser<'a> {
    fn error(&self, message: &str) -> ExprError {
        ExprError::Parse {
            pos: self.pos,
            source_text: self.src.to_string(),
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat(b'-') {
            Ok(Node::Neg(Box::new(self.unary()?)))
        } else if self.eat(b'+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exponent = self.unary()?;
            Ok(Node::Pow(Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_digit() || self.bytes[self.pos] == b'.')
        {
            self.pos += 1;
        }
        if self.pos < self.bytes.len() && matches!(self.bytes[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.bytes.len() && matches!(self.bytes[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        self.src[start..self.pos]
            .parse::<f64>()
            .map(Node::Const)
            .map_err(|_| ExprError::Parse {
                pos: start,
                source_text: self.src.to_string(),
                message: "malformed number".into(),
            })
    }

    fn ident(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        if self.eat(b'(') {
            let func = Func::lookup(name).ok_or_else(|| ExprError::UnknownFunction(name.into()))?;
            let mut args = vec![self.expr()?];
            while self.eat(b',') {
                args.push(self.expr()?);
            }
            if !self.eat(b')') {
                return Err(self.error("expected `)` after arguments"));
            }
            if args.len() != func.arity() {
                return Err(ExprError::Arity {
                    name: name.into(),
                    expected: func.arity(),
                    got: args.len(),
                });
            }
            return Ok(Node::Call(func, args));
        }
        if let Some(i) = self.vars.iter().position(|v| *v == name) {
            return Ok(Node::Var(i));
        }
        match name {
            "pi" => Ok(Node::Const(std::f64::consts::PI)),
            "e" => Ok(Node::Const(std::f64::consts::E)),
            _ => Err(ExprError::UnknownIdent(name.into())),
        }
    }
}
