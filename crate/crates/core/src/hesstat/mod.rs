//! Hessian, statistical, self-similar and radiant structures.

mod cone;
mod levelset;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::expr::EvalError;
use crate::geom::ops::{self, constant_curvature_model, total_symmetry_residual};
use crate::geom::sample::{evaluate, sample_points};
use crate::geom::{
    at_chart_point, relative_diff, relative_size, Chart, CheckReport, Connection, ConnectionField, Metric, MetricField,
    OneFormField, SamplePlan, Scalar, ScalarField, Tensor, Vector, VectorField,
};
use crate::jet::{self, Jet};

pub use cone::{
    build_cone_structure, fiber_recovery, potential_identity_residual, ConeConnection, ConeMetric, ConePotential,
    ConeStructure,
};
pub use levelset::{level_set_statistical, LevelSet, SurfaceMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HesstatError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("λ(2−λ) = {0} has no real solution")]
    NoRealLambda(f64),
    #[error("λ = {0} is degenerate: cone structures require λ ∉ {{0, 2}}")]
    DegenerateLambda(f64),
    #[error("λ = {lambda} gives λ(2−λ) = {got}, but the base curvature is {c}")]
    LambdaMismatch { lambda: f64, got: f64, c: f64 },
    #[error("precondition '{check}' failed: residual {residual:e} exceeds {tolerance:e}")]
    Precondition {
        check: String,
        residual: f64,
        tolerance: f64,
    },
    #[error("postcondition failed: {}", .0.name)]
    Postcondition(Box<CheckReport>),
    #[error("surface map must have one fewer parameter than the ambient dimension")]
    NotHypersurface,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("transversal field is tangent to the surface near {0:?}")]
    Transversality(Vec<f64>),
    #[error("surface leaves the level set: relative deviation {0:e}")]
    LevelSet(f64),
}

/// Chart, torsion-free connection `D` and metric `g`.
#[derive(Clone)]
pub struct StatisticalStructure {
    pub chart: Chart,
    pub conn: Connection,
    pub metric: Metric,
}

impl StatisticalStructure {
    pub fn new(chart: Chart, conn: Connection, metric: Metric) -> Result<Self, HesstatError> {
        if conn.dim() != chart.dim() || metric.dim() != chart.dim() {
            return Err(HesstatError::Dimension(format!(
                "chart {}, connection {}, metric {}",
                chart.dim(),
                conn.dim(),
                metric.dim()
            )));
        }
        Ok(StatisticalStructure { chart, conn, metric })
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }
}

/// Hessian `∇dφ` of a scalar as a metric field.
pub struct HessianMetric {
    conn: Connection,
    phi: Scalar,
}

impl HessianMetric {
    pub fn new(conn: Connection, phi: Scalar) -> Self {
        HessianMetric { conn, phi }
    }
}

impl MetricField for HessianMetric {
    fn dim(&self) -> usize {
        self.phi.dim()
    }

    fn eval(&self, x: &[Jet]) -> Result<Vec<Jet>, EvalError> {
        let n = self.dim();
        let k = jet::point_order(x);
        at_chart_point(x, 2, |id| {
            let f = self.phi.eval(id)?;
            let df: Vec<Jet> = (0..n).map(|i| f.derivative(i)).collect();
            let gamma = if self.conn.is_flat_affine() {
                None
            } else {
                let low: Vec<Jet> = id.iter().map(|j| j.truncate(k)).collect();
                Some(self.conn.eval(&low)?)
            };
            let mut out = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    let mut v = df[i].derivative(j);
                    if let Some(g) = &gamma {
                        for (l, dl) in df.iter().enumerate() {
                            v = &v - &(&g[(l * n + i) * n + j] * dl);
                        }
                    }
                    out.push(v);
                }
            }
            Ok(out)
        })
    }
}

/// `factor * g(ξ, ξ)`.
pub struct QuadraticScalar {
    metric: Metric,
    field: Vector,
    factor: f64,
}

impl QuadraticScalar {
    pub fn new(metric: Metric, field: Vector, factor: f64) -> Self {
        QuadraticScalar { metric, field, factor }
    }
}

impl ScalarField for QuadraticScalar {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn eval(&self, x: &[Jet]) -> Result<Jet, EvalError> {
        let n = self.dim();
        let g = self.metric.eval(x)?;
        let v = self.field.eval(x)?;
        let mut acc = Jet::constant(x[0].nvars(), jet::point_order(x), 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += &(&g[i * n + j] * &(&v[i] * &v[j]));
            }
        }
        Ok(acc.scale(self.factor))
    }
}

/// `ι_ξ g`, the one-form `g(ξ, ·)`.
pub struct Lowered {
    metric: Metric,
    field: Vector,
}

impl Lowered {
    pub fn new(metric: Metric, field: Vector) -> Self {
        Lowered { metric, field }
    }
}

impl OneFormField for Lowered {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn eval(&self, x: &[Jet]) -> Result<Vec<Jet>, EvalError> {
        let n = self.dim();
        let g = self.metric.eval(x)?;
        let v = self.field.eval(x)?;
        Ok((0..n)
            .map(|j| {
                let mut acc = Jet::constant(x[0].nvars(), jet::point_order(x), 0.0);
                for i in 0..n {
                    acc += &(&g[i * n + j] * &v[i]);
                }
                acc
            })
            .collect())
    }
}

/// Connection dual to `D` with respect to `g`:
/// `Γ̄^k_il = g^{kj} (∂_i g_jl − Γ^m_ij g_ml)`.
pub struct DualConnection {
    conn: Connection,
    metric: Metric,
}

impl ConnectionField for DualConnection {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn eval(&self, x: &[Jet]) -> Result<Vec<Jet>, EvalError> {
        let n = self.dim();
        let k = jet::point_order(x);
        at_chart_point(x, 1, |id| {
            let g = self.metric.eval(id)?;
            let low: Vec<Jet> = id.iter().map(|j| j.truncate(k)).collect();
            let gamma = self.conn.eval(&low)?;
            let g_low: Vec<Jet> = g.iter().map(|j| j.truncate(k)).collect();
            let ginv = jet::inverse(&g_low, n).ok_or_else(|| EvalError::Singular("metric is not invertible".into()))?;
            // a[(i * n + j) * n + l] = ∂_i g_jl − Γ^m_ij g_ml
            let mut a = Vec::with_capacity(n * n * n);
            for i in 0..n {
                for j in 0..n {
                    for l in 0..n {
                        let mut v = g[j * n + l].derivative(i);
                        for m in 0..n {
                            v = &v - &(&gamma[(m * n + i) * n + j] * &g_low[m * n + l]);
                        }
                        a.push(v);
                    }
                }
            }
            let mut out = Vec::with_capacity(n * n * n);
            for kk in 0..n {
                for i in 0..n {
                    for l in 0..n {
                        let mut acc = Jet::constant(n, k, 0.0);
                        for j in 0..n {
                            acc += &(&ginv[kk * n + j] * &a[(i * n + j) * n + l]);
                        }
                        out.push(acc);
                    }
                }
            }
            Ok(out)
        })
    }
}

pub fn dual_connection(conn: Connection, metric: Metric) -> Result<DualConnection, HesstatError> {
    if conn.dim() != metric.dim() {
        return Err(HesstatError::Dimension(format!(
            "connection {} vs metric {}",
            conn.dim(),
            metric.dim()
        )));
    }
    Ok(DualConnection { conn, metric })
}

/// `X g(Y,Z) − g(D_X Y, Z) − g(Y, D̄_X Z)` relative to `∂g`.
pub fn duality_residual(
    d: &dyn ConnectionField,
    dbar: &dyn ConnectionField,
    g: &dyn MetricField,
    p: &[f64],
) -> Result<f64, EvalError> {
    let n = g.dim();
    let gj = g.eval(&Jet::identity_point(p, 1))?;
    let a = ops::connection_at(d, p)?;
    let b = ops::connection_at(dbar, p)?;
    let mut dg = Tensor::zeros(n, 3);
    let mut rhs = Tensor::zeros(n, 3);
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                dg.set(&[i, j, l], gj[j * n + l].grad(i));
                let mut v = 0.0;
                for m in 0..n {
                    v += a.get(&[m, i, j]) * gj[m * n + l].value() + b.get(&[m, i, l]) * gj[j * n + m].value();
                }
                rhs.set(&[i, j, l], v);
            }
        }
    }
    Ok(relative_diff(&dg, &rhs))
}

/// Residual is 0 where `g` is positive definite and 1 elsewhere; the
/// smallest eigenvalue seen is reported as `min_eigenvalue`.
pub fn positive_definite_check(
    name: &str,
    g: &dyn MetricField,
    chart: &Chart,
    plan: &SamplePlan,
    tolerance: f64,
) -> CheckReport {
    let points = sample_points(chart, plan);
    let eig = evaluate(&points, |p| Ok(crate::geom::min_eigenvalue(&ops::metric_at(g, p)?)));
    let residuals: Vec<Result<f64, EvalError>> = eig
        .iter()
        .map(|r| {
            r.clone().map(|v| {
                if v > crate::geom::tensor::PD_THRESHOLD {
                    0.0
                } else {
                    1.0
                }
            })
        })
        .collect();
    let mut report = CheckReport::from_residuals(name, tolerance, &residuals);
    let mut worst: Option<(f64, &Vec<f64>)> = None;
    for (r, p) in eig.iter().zip(&points) {
        if let Ok(v) = r {
            if worst.is_none_or(|(w, _)| *v < w) {
                worst = Some((*v, p));
            }
        }
    }
    if let Some((v, p)) = worst {
        report.set_extra("min_eigenvalue", v);
        if !report.passed && report.samples > 0 {
            report
                .diagnostics
                .push(format!("not positive definite at {p:?} (smallest eigenvalue {v:e})"));
        }
    }
    report
}

fn torsion_check(conn: &dyn ConnectionField, chart: &Chart, plan: &SamplePlan, tol: f64) -> CheckReport {
    if conn.is_flat_affine() {
        return CheckReport::from_residuals("torsion", tol, &vec![Ok(0.0); plan.count()]);
    }
    crate::geom::sample_check("torsion", |p| ops::torsion_residual(conn, p), chart, plan, tol)
}

fn flatness_check(conn: &dyn ConnectionField, chart: &Chart, plan: &SamplePlan, tol: f64) -> CheckReport {
    if conn.is_flat_affine() {
        return CheckReport::from_residuals("flatness", tol, &vec![Ok(0.0); plan.count()]);
    }
    crate::geom::sample_check(
        "flatness",
        |p| Ok(relative_size(&ops::curvature(conn, p)?)),
        chart,
        plan,
        tol,
    )
}

fn symmetry_check(
    conn: &dyn ConnectionField,
    g: &dyn MetricField,
    chart: &Chart,
    plan: &SamplePlan,
    tol: f64,
) -> CheckReport {
    crate::geom::sample_check(
        "symmetry",
        |p| Ok(total_symmetry_residual(&ops::covariant_derivative_metric(g, conn, p)?)),
        chart,
        plan,
        tol,
    )
}

/// Torsion, flatness, total symmetry of `∇g` and positivity of `g`.
pub fn check_hessian_structure(
    chart: &Chart,
    conn: &dyn ConnectionField,
    g: &dyn MetricField,
    plan: &SamplePlan,
    tolerance: f64,
) -> CheckReport {
    CheckReport::combine(
        "hessian",
        tolerance,
        vec![
            torsion_check(conn, chart, plan, tolerance),
            flatness_check(conn, chart, plan, tolerance),
            symmetry_check(conn, g, chart, plan, tolerance),
            positive_definite_check("positive_definite", g, chart, plan, tolerance),
        ],
    )
}

/// Fits `∇ξ = λ Id`: λ is the mean of `tr(∇ξ)/n`, the residual the
/// relative deviation from `λ Id`.
pub fn check_radiant(
    chart: &Chart,
    conn: &dyn ConnectionField,
    xi: &dyn VectorField,
    plan: &SamplePlan,
    tolerance: f64,
) -> CheckReport {
    let n = chart.dim();
    let points = sample_points(chart, plan);
    let grads = evaluate(&points, |p| ops::covariant_derivative_vector(xi, conn, p));
    let traces: Vec<f64> = grads
        .iter()
        .filter_map(|g| g.as_ref().ok())
        .map(|g| (0..n).map(|i| g.get(&[i, i])).sum::<f64>() / n as f64)
        .collect();
    let lambda = if traces.is_empty() {
        0.0
    } else {
        traces.iter().sum::<f64>() / traces.len() as f64
    };
    let mut id = Tensor::zeros(n, 2);
    for i in 0..n {
        id.set(&[i, i], lambda);
    }
    let residuals: Vec<Result<f64, EvalError>> = grads
        .iter()
        .map(|g| g.as_ref().map(|g| relative_diff(g, &id)).map_err(Clone::clone))
        .collect();
    let mut report = CheckReport::from_residuals("radiant", tolerance, &residuals);
    if !traces.is_empty() {
        report.set_extra("lambda", lambda);
    }
    report
}

/// `L_ξ g = 2g`.
pub fn check_self_similar(
    chart: &Chart,
    g: &dyn MetricField,
    xi: &dyn VectorField,
    plan: &SamplePlan,
    tolerance: f64,
) -> CheckReport {
    crate::geom::sample_check(
        "self_similar",
        |p| {
            let l = ops::lie_derivative_metric(g, xi, p)?;
            let twice = ops::metric_at(g, p)?.scaled(2.0);
            Ok(relative_diff(&l, &twice))
        },
        chart,
        plan,
        tolerance,
    )
}

/// `L_ξ g = 0`.
pub fn check_killing(
    chart: &Chart,
    g: &dyn MetricField,
    xi: &dyn VectorField,
    plan: &SamplePlan,
    tolerance: f64,
) -> CheckReport {
    crate::geom::sample_check(
        "killing",
        |p| Ok(relative_size(&ops::lie_derivative_metric(g, xi, p)?)),
        chart,
        plan,
        tolerance,
    )
}

/// `L_ξ ∇ = 0`.
pub fn check_affine(
    chart: &Chart,
    conn: &dyn ConnectionField,
    xi: &dyn VectorField,
    plan: &SamplePlan,
    tolerance: f64,
) -> CheckReport {
    crate::geom::sample_check(
        "affine",
        |p| Ok(relative_size(&ops::lie_derivative_connection(conn, xi, p)?)),
        chart,
        plan,
        tolerance,
    )
}

/// Closedness of `ι_ξ g`. When the Levi-Civita derivative `∇ξ` is
/// constant over the samples its eigenvalues are reported as
/// `eigenvalue.<i>` (real parts, ascending).
pub fn check_potential_field(chart: &Chart, g: Metric, xi: Vector, plan: &SamplePlan, tolerance: f64) -> CheckReport {
    let form = Lowered::new(g.clone(), xi.clone());
    let mut report = crate::geom::sample_check(
        "potential",
        |p| Ok(relative_size(&ops::exterior_derivative_oneform(&form, p)?)),
        chart,
        plan,
        tolerance,
    );
    let lc = crate::geom::LeviCivita::new(g);
    let points = sample_points(chart, plan);
    let grads: Vec<Tensor> = evaluate(&points, |p| ops::covariant_derivative_vector(xi.as_ref(), &lc, p))
        .into_iter()
        .filter_map(Result::ok)
        .collect();
    let Some(first) = grads.first() else {
        return report;
    };
    let constant = grads.iter().all(|m| relative_diff(m, first) <= tolerance);
    report.set_extra("constant_derivative", if constant { 1.0 } else { 0.0 });
    if constant {
        let n = chart.dim();
        let mut mean = DMatrix::<f64>::zeros(n, n);
        for m in &grads {
            mean += m.to_matrix();
        }
        mean /= grads.len() as f64;
        let eig = mean.complex_eigenvalues();
        let mut re: Vec<f64> = eig.iter().map(|z| z.re).collect();
        if eig.iter().any(|z| z.im.abs() > tolerance * (1.0 + z.re.abs())) {
            report
                .warnings
                .push("∇ξ has complex eigenvalues; real parts reported".into());
        }
        re.sort_by(f64::total_cmp);
        for (i, v) in re.into_iter().enumerate() {
            report.set_extra(format!("eigenvalue.{i}"), v);
        }
    }
    report
}

/// Torsion-freeness and total symmetry of `Dg`.
pub fn check_statistical(s: &StatisticalStructure, plan: &SamplePlan, tolerance: f64) -> CheckReport {
    CheckReport::combine(
        "statistical",
        tolerance,
        vec![
            torsion_check(s.conn.as_ref(), &s.chart, plan, tolerance),
            symmetry_check(s.conn.as_ref(), s.metric.as_ref(), &s.chart, plan, tolerance),
        ],
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureEstimate {
    pub c: f64,
    /// Largest relative deviation `|R − c·M| / (1 + max(|R|, |c·M|))`.
    pub residual: f64,
    pub samples: usize,
    pub warnings: Vec<String>,
}

impl CurvatureEstimate {
    pub fn to_report(&self, tolerance: f64) -> CheckReport {
        let mut r = if self.samples == 0 && !self.warnings.is_empty() {
            CheckReport::trivial("constant_curvature", tolerance, self.warnings.join("; "))
        } else {
            let mut r = CheckReport::from_residuals("constant_curvature", tolerance, &[Ok(self.residual)]);
            r.samples = self.samples;
            r.mean_residual = self.residual;
            r.warnings.extend(self.warnings.iter().cloned());
            r
        };
        r.set_extra("c", self.c);
        r
    }
}

/// Least-squares fit of `R^l_ijk = c (g_jk δ^l_i − g_ik δ^l_j)` over all
/// components at all samples.
pub fn estimate_constant_curvature(
    s: &StatisticalStructure,
    plan: &SamplePlan,
) -> Result<CurvatureEstimate, HesstatError> {
    if s.dim() == 1 {
        return Ok(CurvatureEstimate {
            c: 0.0,
            residual: 0.0,
            samples: 0,
            warnings: vec!["curvature is vacuous on a 1-dimensional chart".into()],
        });
    }
    let points = sample_points(&s.chart, plan);
    let pairs = evaluate(&points, |p| {
        let r = ops::curvature(s.conn.as_ref(), p)?;
        let m = constant_curvature_model(&ops::metric_at(s.metric.as_ref(), p)?);
        Ok((r, m))
    });
    let mut first_err = None;
    let mut ok = Vec::new();
    for r in pairs {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    if ok.is_empty() {
        return Err(first_err.unwrap_or(EvalError::Domain("no samples".into())).into());
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (r, m) in &ok {
        for (a, b) in r.data().iter().zip(m.data()) {
            num += a * b;
            den += b * b;
        }
    }
    let c = if den > 0.0 { num / den } else { 0.0 };
    let residual = ok
        .iter()
        .map(|(r, m)| relative_diff(r, &m.scaled(c)))
        .fold(0.0, f64::max);
    let mut warnings = Vec::new();
    if let Some(e) = first_err {
        warnings.push(format!(
            "{} of {} points skipped (first error: {e})",
            points.len() - ok.len(),
            points.len()
        ));
    }
    Ok(CurvatureEstimate {
        c,
        residual,
        samples: ok.len(),
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LambdaRoots {
    /// Distinct roots, ascending.
    pub roots: Vec<f64>,
    /// Set when the roots are `{0, 2}`, which admit no cone structure.
    pub degenerate: bool,
}

/// Solutions of `λ(2−λ) = c`, i.e. `1 ± √(1−c)`.
pub fn solve_lambda(c: f64) -> Result<LambdaRoots, HesstatError> {
    let disc = 1.0 - c;
    if disc < 0.0 || !disc.is_finite() {
        return Err(HesstatError::NoRealLambda(c));
    }
    if disc == 0.0 {
        return Ok(LambdaRoots {
            roots: vec![1.0],
            degenerate: false,
        });
    }
    let r = disc.sqrt();
    Ok(LambdaRoots {
        roots: vec![1.0 - r, 1.0 + r],
        degenerate: c == 0.0,
    })
}

pub(crate) fn is_degenerate_lambda(lambda: f64) -> bool {
    lambda.abs() < 1e-12 || (lambda - 2.0).abs() < 1e-12
}
