//! Pointwise-evaluable tensor fields.
//!
//! Every field is evaluated at a point given as coordinate jets and returns
//! jets of the same order, so a caller gets the value together with as many
//! derivatives as it asked for. Index layouts:
//!
//! * metric `g_ij` at `i * n + j`
//! * connection `Γ^k_ij` at `(k * n + i) * n + j`
//! * one-form `θ_i` and vector `ξ^i` at `i`

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{EvalError, Expression};
use crate::jet::{self, Jet, MAX_ORDER};

pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[Jet]) -> Result<Jet, EvalError>;
}

pub trait MetricField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[Jet]) -> Result<Vec<Jet>, EvalError>;
}

pub trait ConnectionField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[Jet]) -> Result<Vec<Jet>, EvalError>;
    /// Declared to vanish identically in this chart.
    fn is_flat_affine(&self) -> bool {
        false
    }
}

pub trait OneFormField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[Jet]) -> Result<Vec<Jet>, EvalError>;
}

pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[Jet]) -> Result<Vec<Jet>, EvalError>;
}

pub type Scalar = Arc<dyn ScalarField>;
pub type Metric = Arc<dyn MetricField>;
pub type Connection = Arc<dyn ConnectionField>;
pub type OneForm = Arc<dyn OneFormField>;
pub type Vector = Arc<dyn VectorField>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("expected {want} components, got {got}")]
    Shape { want: usize, got: usize },
    #[error("expression dimension {got} does not match field dimension {want}")]
    Dimension { want: usize, got: usize },
    #[error("metric entries ({0},{1}) and ({1},{0}) differ")]
    Asymmetric(usize, usize),
    #[error("connection has torsion: Γ^{0}_{{{1}{2}}} differs from Γ^{0}_{{{2}{1}}}")]
    Torsion(usize, usize, usize),
    #[error("connection declared flat-affine has a nonzero symbol Γ^{0}_{{{1}{2}}}")]
    NotFlat(usize, usize, usize),
}

fn check_dims(exprs: &[Expression], n: usize) -> Result<(), FieldError> {
    for e in exprs {
        if e.dim() != n {
            return Err(FieldError::Dimension { want: n, got: e.dim() });
        }
    }
    Ok(())
}

fn eval_all(exprs: &[Expression], x: &[Jet]) -> Result<Vec<Jet>, EvalError> {
    exprs.iter().map(|e| e.eval_jets(x)).collect()
}

/// Evaluates `f` at chart-coordinate jets `extra` orders above the
/// requested point and maps the result back onto the point's variables.
/// `f` must return jets of order at least that of `x`.
pub fn at_chart_point<F>(x: &[Jet], extra: usize, f: F) -> Result<Vec<Jet>, EvalError>
where
    F: FnOnce(&[Jet]) -> Result<Vec<Jet>, EvalError>,
{
    let k = jet::point_order(x);
    if k + extra > MAX_ORDER {
        return Err(EvalError::OrderTooHigh(k + extra));
    }
    let p = jet::values(x);
    let id = Jet::identity_point(&p, k + extra);
    let out = f(&id)?;
    if jet::is_identity(x) {
        Ok(out.iter().map(|j| j.truncate(k)).collect())
    } else {
        Ok(out.iter().map(|j| j.truncate(k).compose(x)).collect())
    }
}

impl ScalarField for Expression {
    fn dim(&self) -> usize {
        Expression::dim(self)
    }

    fn eval(&self, x: &[Jet]) -> Result<Jet, EvalError> {
        self.eval_jets(x)
    }
}

/// Metric with expression entries.
#[derive(Clone, Debug)]
pub struct ExprMetric {
    n: usize,
    entries: Vec<Expression>,
}

impl ExprMetric {
    pub fn new(rows: Vec<Vec<Expression>>) -> Result<Self, FieldError> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(FieldError::Shape {
                    want: n,
                    got: row.len(),
                });
            }
            entries.extend(row);
        }
        check_dims(&entries, n)?;
        for i in 0..n {
            for j in i + 1..n {
                if entries[i * n + j] != entries[j * n + i] {
                    return Err(FieldError::Asymmetric(i, j));
                }
            }
        }
        Ok(ExprMetric { n, entries })
    }

    pub fn parse(rows: &[&[&str]]) -> Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        let n = rows.len();
        let parsed = rows
            .iter()
            .map(|r| r.iter().map(|s| Expression::parse(s, n)).collect())
            .collect::<Result<Vec<Vec<_>>, _>>()?;
        Ok(Self::new(parsed)?)
    }

    /// Diagonal metric `factor * δ_ij`.
    pub fn conformal_identity(factor: &Expression) -> Self {
        let n = factor.dim();
        let entries = (0..n * n)
            .map(|ij| {
                if ij / n == ij % n {
                    factor.clone()
                } else {
                    Expression::zero(n)
                }
            })
            .collect();
        ExprMetric { n, entries }
    }
}

impl MetricField for ExprMetric {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, x: &[Jet]) -> Result<Vec<Jet>, EvalError> {
        eval_all(&self.entries, x)
    }
}

/// Connection with expression Christoffel symbols.
#[derive(Clone, Debug)]
pub struct ExprConnection {
    n: usize,
    symbols: Vec<Expression>,
    flat: bool,
}

impl ExprConnection {
    /// `symbols[k][i][j]` is `Γ^k_ij`.
    pub fn new(symbols: Vec<Vec<Vec<Expression>>>, flat: bool) -> Result<Self, FieldError> {
        let n = symbols.len();
        let mut flat_symbols = Vec::with_capacity(n * n * n);
        for plane in symbols {
            if plane.len() != n {
                return Err(FieldError::Shape {
                    want: n,
                    got: plane.len(),
                });
            }
            for row in plane {
                if row.len() != n {
                    return Err(FieldError::Shape {
                        want: n,
                        got: row.len(),
                    });
                }
                flat_symbols.extend(row);
            }
        }
        check_dims(&flat_symbols, n)?;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let e = &flat_symbols[(k * n + i) * n + j];
                    if *e != flat_symbols[(k * n + j) * n + i] {
                        return Err(FieldError::Torsion(k, i, j));
                    }
                    if flat && !e.is_zero() {
                        return Err(FieldError::NotFlat(k, i, j));
                    }
                }
            }
        }
        Ok(ExprConnection {
            n,
            symbols: flat_symbols,
            flat,
        })
    }

    /// The standard connection of the chart, `Γ ≡ 0`.
    pub fn flat(n: usize) -> Self {
        ExprConnection {
            n,
            symbols: vec![Expression::zero(n); n * n * n],
            flat: true,
        }
    }
}

impl ConnectionField for ExprConnection {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, x: &[Jet]) -> Result<Vec<Jet>, EvalError> {
        eval_all(&self.symbols, x)
    }

    fn is_flat_affine(&self) -> bool {
        self.flat
    }
}

#[derive(Clone, Debug)]
pub struct ExprOneForm {
    components: Vec<Expression>,
}

impl ExprOneForm {
    pub fn new(components: Vec<Expression>) -> Result<Self, FieldError> {
        check_dims(&components, components.len())?;
        Ok(ExprOneForm { components })
    }

    pub fn parse(src: &[&str]) -> Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        let n = src.len();
        let c = src
            .iter()
            .map(|s| Expression::parse(s, n))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(c)?)
    }
}

impl OneFormField for ExprOneForm {
    fn dim(&self) -> usize {
        self.components.len()
    }

    fn eval(&self, x: &[Jet]) -> Result<Vec<Jet>, EvalError> {
        eval_all(&self.components, x)
    }
}

#[derive(Clone, Debug)]
pub struct ExprVectorField {
    components: Vec<Expression>,
}

impl ExprVectorField {
    pub fn new(components: Vec<Expression>) -> Result<Self, FieldError> {
        check_dims(&components, components.len())?;
        Ok(ExprVectorField { components })
    }

    pub fn parse(src: &[&str]) -> Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        let n = src.len();
        let c = src
            .iter()
            .map(|s| Expression::parse(s, n))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(c)?)
    }
}

impl VectorField for ExprVectorField {
    fn dim(&self) -> usize {
        self.components.len()
    }

    fn eval(&self, x: &[Jet]) -> Result<Vec<Jet>, EvalError> {
        eval_all(&self.components, x)
    }
}

/// Levi-Civita connection of a metric.
#[derive(Clone)]
pub struct LeviCivita {
    metric: Metric,
}

impl LeviCivita {
    pub fn new(metric: Metric) -> Self {
        LeviCivita { metric }
    }
}

impl fmt::Debug for LeviCivita {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LeviCivita").field("dim", &self.metric.dim()).finish()
    }
}

impl ConnectionField for LeviCivita {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn eval(&self, x: &[Jet]) -> Result<Vec<Jet>, EvalError> {
        let n = self.dim();
        at_chart_point(x, 1, |id| {
            let g = self.metric.eval(id)?;
            // dg[(l * n + i) * n + j] = ∂_l g_ij
            let mut dg = Vec::with_capacity(n * n * n);
            for l in 0..n {
                for ij in 0..n * n {
                    dg.push(g[ij].derivative(l));
                }
            }
            let order = dg[0].order();
            let g_low: Vec<Jet> = g.iter().map(|j| j.truncate(order)).collect();
            let ginv = jet::inverse(&g_low, n).ok_or_else(|| EvalError::Singular("metric is not invertible".into()))?;
            let d = |l: usize, i: usize, j: usize| &dg[(l * n + i) * n + j];
            let mut out = Vec::with_capacity(n * n * n);
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut acc = Jet::constant(n, order, 0.0);
                        for l in 0..n {
                            let first = d(i, j, l) + d(j, i, l) - d(l, i, j);
                            acc += &(&ginv[k * n + l] * &first);
                        }
                        out.push(acc.scale(0.5));
                    }
                }
            }
            Ok(out)
        })
    }
}

/// `factor * g` for a scalar `factor`.
pub struct ConformalMetric {
    inner: Metric,
    factor: Scalar,
}

impl ConformalMetric {
    pub fn new(inner: Metric, factor: Scalar) -> Self {
        ConformalMetric { inner, factor }
    }
}

impl MetricField for ConformalMetric {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, x: &[Jet]) -> Result<Vec<Jet>, EvalError> {
        let f = self.factor.eval(x)?;
        Ok(self.inner.eval(x)?.iter().map(|g| &f * g).collect())
    }
}

/// `a + factor * b`.
pub struct OneFormSum {
    a: OneForm,
    b: OneForm,
    factor: f64,
}

impl OneFormSum {
    pub fn new(a: OneForm, b: OneForm, factor: f64) -> Self {
        OneFormSum { a, b, factor }
    }
}

impl OneFormField for OneFormSum {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn eval(&self, x: &[Jet]) -> Result<Vec<Jet>, EvalError> {
        let a = self.a.eval(x)?;
        let b = self.b.eval(x)?;
        Ok(a.iter().zip(&b).map(|(p, q)| p + &q.scale(self.factor)).collect())
    }
}

/// `factor * v`.
pub struct ScaledVector {
    inner: Vector,
    factor: f64,
}

impl ScaledVector {
    pub fn new(inner: Vector, factor: f64) -> Self {
        ScaledVector { inner, factor }
    }
}

impl VectorField for ScaledVector {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, x: &[Jet]) -> Result<Vec<Jet>, EvalError> {
        Ok(self.inner.eval(x)?.iter().map(|j| j.scale(self.factor)).collect())
    }
}

/// Exterior derivative of a scalar, `dφ`.
pub struct Differential {
    scalar: Scalar,
}

impl Differential {
    pub fn new(scalar: Scalar) -> Self {
        Differential { scalar }
    }
}

impl OneFormField for Differential {
    fn dim(&self) -> usize {
        self.scalar.dim()
    }

    fn eval(&self, x: &[Jet]) -> Result<Vec<Jet>, EvalError> {
        let n = self.dim();
        at_chart_point(x, 1, |id| {
            let f = self.scalar.eval(id)?;
            Ok((0..n).map(|i| f.derivative(i)).collect())
        })
    }
}
