//! Scalar expressions over chart coordinates.
//!
//! Grammar (standard precedence, `^` right-associative):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := base ('^' factor)?
//! base   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')' | '-' base
//! ```
//!
//! Variables are `x0 .. x{n-1}`; `s` aliases the last coordinate. Functions
//! are `exp`, `log`, `sqrt`, `sin`, `cos` and the two-argument `pow`.
//! Note that unary minus binds tighter than `^`, so `-x0^2` is `(-x0)^2`.

mod parse;

use std::fmt;

use thiserror::Error;

use crate::jet::{Jet, MAX_ORDER};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier '{name}' at {pos}")]
    UnknownIdent { pos: usize, name: String },
    #[error("variable x{index} at {pos} is out of range for dimension {dim}")]
    VariableOutOfRange { pos: usize, index: usize, dim: usize },
    #[error("dimension must be positive")]
    ZeroDimension,
}

/// Failure while evaluating a field at a point.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("derivative order {0} exceeds the supported maximum of 3")]
    OrderTooHigh(usize),
    #[error("point has {got} coordinates, expected {want}")]
    Arity { got: usize, want: usize },
    #[error("singular matrix: {0}")]
    Singular(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn collect_vars(&self, out: &mut Vec<usize>) {
        match self {
            Node::Num(_) => {}
            Node::Var(i) => {
                if !out.contains(i) {
                    out.push(*i)
                }
            }
            Node::Neg(a) | Node::Call(_, a) => a.collect_vars(out),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    fn constant_value(&self) -> Option<f64> {
        let mut vars = Vec::new();
        self.collect_vars(&mut vars);
        if !vars.is_empty() {
            return None;
        }
        eval_f64(self, &[]).ok()
    }
}

/// A parsed scalar function on a chart of dimension `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct Expression {
    root: Node,
    dim: usize,
}

impl Expression {
    pub fn parse(src: &str, dim: usize) -> Result<Self, ExprError> {
        if dim == 0 {
            return Err(ExprError::ZeroDimension);
        }
        let root = parse::Parser::new(src, dim)?.parse_all()?;
        Ok(Expression { root, dim })
    }

    pub fn constant(value: f64, dim: usize) -> Self {
        Expression {
            root: Node::Num(value),
            dim,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant(0.0, dim)
    }

    /// The same function viewed on a chart of dimension `dim`, whose first
    /// coordinates are this chart's. `s` keeps the index it was parsed with.
    pub fn lift(&self, dim: usize) -> Self {
        assert!(dim >= self.dim, "cannot lift to a smaller chart");
        Expression {
            root: self.root.clone(),
            dim,
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of distinct variables referenced.
    pub fn arity(&self) -> usize {
        let mut v = Vec::new();
        self.root.collect_vars(&mut v);
        v.len()
    }

    /// True when the tree is a literal zero.
    pub fn is_zero(&self) -> bool {
        matches!(self.root, Node::Num(v) if v == 0.0)
    }

    pub fn eval(&self, p: &[f64]) -> Result<f64, EvalError> {
        check_arity(p.len(), self.dim)?;
        eval_f64(&self.root, p)
    }

    /// Evaluates at jet-valued coordinates; the variables of the jets need
    /// not be the chart coordinates, which makes this a composition.
    pub fn eval_jets(&self, x: &[Jet]) -> Result<Jet, EvalError> {
        check_arity(x.len(), self.dim)?;
        let nv = x.first().map(Jet::nvars).unwrap_or(0);
        let order = crate::jet::point_order(x);
        let out = eval_jet_node(&self.root, x, nv, order)?;
        if !out.is_finite() {
            return Err(EvalError::Domain("non-finite derivative".into()));
        }
        Ok(out)
    }
}

fn check_arity(got: usize, want: usize) -> Result<(), EvalError> {
    if got != want {
        Err(EvalError::Arity { got, want })
    } else {
        Ok(())
    }
}

/// Derivative jet of `expr` at `p` truncated to `order` (at most 3).
pub fn eval_jet(expr: &Expression, p: &[f64], order: usize) -> Result<Jet, EvalError> {
    if order > MAX_ORDER {
        return Err(EvalError::OrderTooHigh(order));
    }
    check_arity(p.len(), expr.dim)?;
    expr.eval_jets(&Jet::identity_point(p, order))
}

fn finite(v: f64, what: &str) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::Domain(format!("{what} is not finite")))
    }
}

fn eval_f64(node: &Node, p: &[f64]) -> Result<f64, EvalError> {
    Ok(match node {
        Node::Num(v) => *v,
        Node::Var(i) => p[*i],
        Node::Neg(a) => -eval_f64(a, p)?,
        Node::Add(a, b) => eval_f64(a, p)? + eval_f64(b, p)?,
        Node::Sub(a, b) => eval_f64(a, p)? - eval_f64(b, p)?,
        Node::Mul(a, b) => eval_f64(a, p)? * eval_f64(b, p)?,
        Node::Div(a, b) => {
            let d = eval_f64(b, p)?;
            if d == 0.0 {
                return Err(EvalError::Domain("division by zero".into()));
            }
            eval_f64(a, p)? / d
        }
        Node::Pow(a, b) => {
            let base = eval_f64(a, p)?;
            let e = eval_f64(b, p)?;
            if e.fract() == 0.0 && e.abs() < i32::MAX as f64 {
                if base == 0.0 && e < 0.0 {
                    return Err(EvalError::Domain("zero to a negative power".into()));
                }
                base.powi(e as i32)
            } else {
                if base <= 0.0 {
                    return Err(EvalError::Domain(format!("non-positive base {base} to a real power")));
                }
                base.powf(e)
            }
        }
        Node::Call(f, a) => {
            let x = eval_f64(a, p)?;
            match f {
                Func::Exp => x.exp(),
                Func::Log => {
                    if x <= 0.0 {
                        return Err(EvalError::Domain(format!("log of non-positive {x}")));
                    }
                    x.ln()
                }
                Func::Sqrt => {
                    if x <= 0.0 {
                        return Err(EvalError::Domain(format!("sqrt of non-positive {x}")));
                    }
                    x.sqrt()
                }
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
            }
        }
    })
    .and_then(|v| finite(v, "value"))
}

fn eval_jet_node(node: &Node, x: &[Jet], nv: usize, order: usize) -> Result<Jet, EvalError> {
    Ok(match node {
        Node::Num(v) => Jet::constant(nv, order, *v),
        Node::Var(i) => x[*i].clone(),
        Node::Neg(a) => -eval_jet_node(a, x, nv, order)?,
        Node::Add(a, b) => eval_jet_node(a, x, nv, order)? + eval_jet_node(b, x, nv, order)?,
        Node::Sub(a, b) => eval_jet_node(a, x, nv, order)? - eval_jet_node(b, x, nv, order)?,
        Node::Mul(a, b) => eval_jet_node(a, x, nv, order)? * eval_jet_node(b, x, nv, order)?,
        Node::Div(a, b) => {
            let d = eval_jet_node(b, x, nv, order)?;
            if d.value() == 0.0 {
                return Err(EvalError::Domain("division by zero".into()));
            }
            eval_jet_node(a, x, nv, order)? * d.recip()
        }
        Node::Pow(a, b) => {
            let base = eval_jet_node(a, x, nv, order)?;
            match b.constant_value() {
                Some(e) if e.fract() == 0.0 && e.abs() < i32::MAX as f64 => {
                    if base.value() == 0.0 && e < 0.0 {
                        return Err(EvalError::Domain("zero to a negative power".into()));
                    }
                    base.powi(e as i32)
                }
                Some(e) => {
                    if base.value() <= 0.0 {
                        return Err(EvalError::Domain(format!(
                            "non-positive base {} to a real power",
                            base.value()
                        )));
                    }
                    base.powf(e)
                }
                None => {
                    if base.value() <= 0.0 {
                        return Err(EvalError::Domain(format!(
                            "non-positive base {} to a variable power",
                            base.value()
                        )));
                    }
                    let e = eval_jet_node(b, x, nv, order)?;
                    (e * base.ln()).exp()
                }
            }
        }
        Node::Call(f, a) => {
            let v = eval_jet_node(a, x, nv, order)?;
            match f {
                Func::Exp => v.exp(),
                Func::Log => {
                    if v.value() <= 0.0 {
                        return Err(EvalError::Domain(format!("log of non-positive {}", v.value())));
                    }
                    v.ln()
                }
                Func::Sqrt => {
                    if v.value() <= 0.0 {
                        return Err(EvalError::Domain(format!("sqrt of non-positive {}", v.value())));
                    }
                    v.sqrt()
                }
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
            }
        }
    })
}

impl fmt::Display for Node {
    /// Fully parenthesized; re-parsing yields a structurally equal tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(v) => write!(f, "{v:?}"),
            Node::Var(i) => write!(f, "x{i}"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "({a} * {b})"),
            Node::Div(a, b) => write!(f, "({a} / {b})"),
            Node::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}
