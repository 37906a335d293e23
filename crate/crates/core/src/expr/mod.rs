//! Scalar arithmetic expressions over named variables.
//!
//! Formulas (Lyapunov candidates, feedbacks, plant vector fields) are supplied as
//! text, parsed into an [`Expr`] tree, evaluated in double precision and
//! differentiated symbolically. Exponents are restricted to non-negative integer
//! literals so that every derivative stays closed-form.

mod diff;
mod parse;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use parse::{parse, parse_with_params};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("exponent at byte {offset} must be a non-negative integer literal")]
    NonIntegerExponent { offset: usize },
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of negative value {0}")]
    SqrtOfNegative(f64),
    #[error("variable `{0}` is not bound")]
    UnboundVariable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Abs,
    Sqrt,
    /// Sign with `sign(0) = 0`; appears as the derivative of `abs`.
    Sign,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Abs => "abs",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Sign => "sign",
        }
    }

    pub(crate) fn from_function_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "abs" => UnaryOp::Abs,
            "sqrt" => UnaryOp::Sqrt,
            "sign" => UnaryOp::Sign,
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
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinaryOp::Add | BinaryOp::Sub => PREC_SUM,
            BinaryOp::Mul | BinaryOp::Div => PREC_PRODUCT,
        }
    }
}

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

/// Expression tree.
///
/// Variable nodes carry both the identifier and its position in the variable
/// list the expression was parsed against, so [`Expr::eval_at`] can index a
/// plain slice.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var { name: Arc<str>, index: usize },
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

/// Variable bindings for [`Expr::eval`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalContext {
    bindings: BTreeMap<String, f64>,
}

impl EvalContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, value: f64) -> Self {
        self.bindings.insert(name.into(), value);
        self
    }

    pub fn bind(&mut self, name: impl Into<String>, value: f64) {
        self.bindings.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.bindings.get(name).copied()
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for EvalContext {
    fn from_iter<I: IntoIterator<Item = (S, f64)>>(iter: I) -> Self {
        Self {
            bindings: iter.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }
}

fn apply_unary(op: UnaryOp, v: f64) -> Result<f64, ExprError> {
    Ok(match op {
        UnaryOp::Neg => -v,
        UnaryOp::Sin => v.sin(),
        UnaryOp::Cos => v.cos(),
        UnaryOp::Exp => v.exp(),
        UnaryOp::Abs => v.abs(),
        UnaryOp::Sqrt => {
            if v < 0.0 {
                return Err(ExprError::SqrtOfNegative(v));
            }
            v.sqrt()
        }
        UnaryOp::Sign => {
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
    })
}

fn apply_binary(op: BinaryOp, a: f64, b: f64) -> Result<f64, ExprError> {
    Ok(match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => {
            if b == 0.0 {
                return Err(ExprError::DivisionByZero);
            }
            a / b
        }
    })
}

impl Expr {
    pub fn constant(value: f64) -> Self {
        Expr::Const(value)
    }

    pub fn var(name: &str, index: usize) -> Self {
        Expr::Var {
            name: Arc::from(name),
            index,
        }
    }

    /// Evaluate with bindings looked up by name.
    pub fn eval(&self, ctx: &EvalContext) -> Result<f64, ExprError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var { name, .. } => ctx
                .get(name)
                .ok_or_else(|| ExprError::UnboundVariable(name.to_string())),
            Expr::Unary(op, a) => apply_unary(*op, a.eval(ctx)?),
            Expr::Binary(op, a, b) => apply_binary(*op, a.eval(ctx)?, b.eval(ctx)?),
            Expr::Pow(a, n) => Ok(a.eval(ctx)?.powi(*n as i32)),
        }
    }

    /// Evaluate with values given positionally, in the order of the variable
    /// list the expression was parsed against.
    pub fn eval_at(&self, values: &[f64]) -> Result<f64, ExprError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var { name, index } => values
                .get(*index)
                .copied()
                .ok_or_else(|| ExprError::UnboundVariable(name.to_string())),
            Expr::Unary(op, a) => apply_unary(*op, a.eval_at(values)?),
            Expr::Binary(op, a, b) => apply_binary(*op, a.eval_at(values)?, b.eval_at(values)?),
            Expr::Pow(a, n) => Ok(a.eval_at(values)?.powi(*n as i32)),
        }
    }

    /// Names of the variables that occur in the tree, sorted and deduplicated.
    pub fn free_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Var { name, .. } = e {
                out.push(name.to_string());
            }
        });
        out.sort();
        out.dedup();
        out
    }

    pub fn depends_on(&self, var: &str) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            if let Expr::Var { name, .. } = e {
                found |= &**name == var;
            }
        });
        found
    }

    /// True when every occurrence of `var` is the direct argument of `sin` or
    /// `cos`, so the expression depends on `var` only through a point on the
    /// unit circle.
    pub fn var_only_in_trig(&self, var: &str) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var { name, .. } => &**name != var,
            Expr::Unary(UnaryOp::Sin | UnaryOp::Cos, a)
                if matches!(&**a, Expr::Var { name, .. } if &**name == var) =>
            {
                true
            }
            Expr::Unary(_, a) | Expr::Pow(a, _) => a.var_only_in_trig(var),
            Expr::Binary(_, a, b) => a.var_only_in_trig(var) && b.var_only_in_trig(var),
        }
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var { .. } => 1,
            Expr::Unary(_, a) | Expr::Pow(a, _) => 1 + a.depth(),
            Expr::Binary(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    pub fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Const(_) | Expr::Var { .. } => {}
            Expr::Unary(_, a) | Expr::Pow(a, _) => a.visit(f),
            Expr::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 1.0)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Const(c) if c.is_sign_negative() => PREC_ATOM,
            Expr::Const(_) | Expr::Var { .. } => PREC_ATOM,
            Expr::Unary(UnaryOp::Neg, _) => PREC_NEG,
            Expr::Unary(..) => PREC_ATOM,
            Expr::Pow(..) => PREC_POW,
            Expr::Binary(op, ..) => op.precedence(),
        }
    }

    fn write_with(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let parens = self.precedence() < min_prec;
        if parens {
            f.write_str("(")?;
        }
        match self {
            Expr::Const(c) => {
                if c.is_sign_negative() {
                    write!(f, "(-{:?})", -c)?;
                } else {
                    write!(f, "{c:?}")?;
                }
            }
            Expr::Var { name, .. } => f.write_str(name)?,
            Expr::Unary(UnaryOp::Neg, a) => {
                f.write_str("-")?;
                a.write_with(f, PREC_NEG)?;
            }
            Expr::Unary(op, a) => {
                write!(f, "{}(", op.name())?;
                a.write_with(f, 0)?;
                f.write_str(")")?;
            }
            Expr::Pow(a, n) => {
                a.write_with(f, PREC_POW)?;
                write!(f, "^{n}")?;
            }
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                a.write_with(f, p)?;
                write!(f, " {} ", op.symbol())?;
                b.write_with(f, p + 1)?;
            }
        }
        if parens {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_with(f, 0)
    }
}

// Smart constructors used by differentiation. They fold the identities that
// show up constantly in derivative trees (x*0, x*1, x+0) and nothing else.

pub(crate) fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Unary(UnaryOp::Neg, inner) => *inner,
        a => Expr::Unary(UnaryOp::Neg, Box::new(a)),
    }
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        (a, b) if a.is_zero() => b,
        (a, b) if b.is_zero() => a,
        (a, b) => Expr::Binary(BinaryOp::Add, Box::new(a), Box::new(b)),
    }
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
        (a, b) if b.is_zero() => a,
        (a, b) if a.is_zero() => neg(b),
        (a, b) => Expr::Binary(BinaryOp::Sub, Box::new(a), Box::new(b)),
    }
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        (a, b) if a.is_zero() || b.is_zero() => Expr::Const(0.0),
        (a, b) if a.is_one() => b,
        (a, b) if b.is_one() => a,
        (a, b) => Expr::Binary(BinaryOp::Mul, Box::new(a), Box::new(b)),
    }
}

pub(crate) fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (a, b) if a.is_zero() && !b.is_zero() => Expr::Const(0.0),
        (a, b) if b.is_one() => a,
        (a, b) => Expr::Binary(BinaryOp::Div, Box::new(a), Box::new(b)),
    }
}

pub(crate) fn pow(a: Expr, n: u32) -> Expr {
    match n {
        0 => Expr::Const(1.0),
        1 => a,
        n => Expr::Pow(Box::new(a), n),
    }
}

pub(crate) fn unary(op: UnaryOp, a: Expr) -> Expr {
    Expr::Unary(op, Box::new(a))
}
