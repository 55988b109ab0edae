//! Radiant Hessian cone over a statistical manifold of constant curvature.
//!
//! Chart coordinates are `(m, s)` with `s > 0` last. With `D`, `g_M` the base
//! connection and metric the cone connection is
//!
//! ```text
//! Γ^c_ab = D^c_ab            Γ^s_ab = −(2−λ) s g_M,ab
//! Γ^c_as = Γ^c_sa = (λ/s) δ^c_a    Γ^s_ss = (λ−1)/s
//! ```
//!
//! and the metric is `s² g_M + ds²`.

use std::sync::Arc;

use crate::expr::{EvalError, Expression};
use crate::geom::ops;
use crate::geom::{
    relative_diff, relative_size, sample_check, Chart, CheckReport, Connection, ConnectionField, ExprVectorField,
    Metric, MetricField, SamplePlan, ScalarField, ScaledVector, Vector,
};
use crate::jet::{self, Jet};

use super::{
    check_hessian_structure, check_radiant, check_statistical, estimate_constant_curvature, is_degenerate_lambda,
    level_set_statistical, HesstatError, LevelSet, QuadraticScalar, StatisticalStructure, SurfaceMap,
};

pub struct ConeConnection {
    base_conn: Connection,
    base_metric: Metric,
    lambda: f64,
}

impl ConeConnection {
    pub fn new(base_conn: Connection, base_metric: Metric, lambda: f64) -> Self {
        ConeConnection {
            base_conn,
            base_metric,
            lambda,
        }
    }
}

impl ConnectionField for ConeConnection {
    fn dim(&self) -> usize {
        self.base_metric.dim() + 1
    }

    fn eval(&self, x: &[Jet]) -> Result<Vec<Jet>, EvalError> {
        let n = self.base_metric.dim();
        let big = n + 1;
        let (m, s) = (&x[..n], &x[n]);
        let nv = s.nvars();
        let k = jet::point_order(x);
        let zero = Jet::constant(nv, k, 0.0);
        let d = if self.base_conn.is_flat_affine() {
            vec![zero.clone(); n * n * n]
        } else {
            self.base_conn.eval(m)?
        };
        let gm = self.base_metric.eval(m)?;
        let inv_s = s.recip();
        let l = self.lambda;
        let mut out = vec![zero; big * big * big];
        let idx = |c: usize, a: usize, b: usize| (c * big + a) * big + b;
        for c in 0..n {
            for a in 0..n {
                for b in 0..n {
                    out[idx(c, a, b)] = d[(c * n + a) * n + b].truncate(k);
                }
            }
            out[idx(c, c, n)] = inv_s.scale(l);
            out[idx(c, n, c)] = inv_s.scale(l);
        }
        for a in 0..n {
            for b in 0..n {
                out[idx(n, a, b)] = (s * &gm[a * n + b]).scale(-(2.0 - l));
            }
        }
        out[idx(n, n, n)] = inv_s.scale(l - 1.0);
        Ok(out)
    }
}

/// `s² g_M + ds²`.
pub struct ConeMetric {
    base_metric: Metric,
}

impl ConeMetric {
    pub fn new(base_metric: Metric) -> Self {
        ConeMetric { base_metric }
    }
}

impl MetricField for ConeMetric {
    fn dim(&self) -> usize {
        self.base_metric.dim() + 1
    }

    fn eval(&self, x: &[Jet]) -> Result<Vec<Jet>, EvalError> {
        let n = self.base_metric.dim();
        let big = n + 1;
        let s = &x[n];
        let k = jet::point_order(x);
        let gm = self.base_metric.eval(&x[..n])?;
        let s2 = s * s;
        let mut out = vec![Jet::constant(s.nvars(), k, 0.0); big * big];
        for a in 0..n {
            for b in 0..n {
                out[a * big + b] = &s2 * &gm[a * n + b];
            }
        }
        out[big * big - 1] = Jet::constant(s.nvars(), k, 1.0);
        Ok(out)
    }
}

/// `s² / (4 − 2λ)` on a cone chart of dimension `dim`.
pub struct ConePotential {
    dim: usize,
    lambda: f64,
}

impl ConePotential {
    pub fn new(dim: usize, lambda: f64) -> Self {
        ConePotential { dim, lambda }
    }
}

impl ScalarField for ConePotential {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[Jet]) -> Result<Jet, EvalError> {
        let s = &x[self.dim - 1];
        Ok((s * s).scale(1.0 / (4.0 - 2.0 * self.lambda)))
    }
}

#[derive(Clone)]
pub struct ConeStructure {
    pub chart: Chart,
    pub conn: Connection,
    pub metric: Metric,
    /// `s ∂/∂s`.
    pub radial: Vector,
    pub lambda: f64,
}

impl ConeStructure {
    /// Assembles the cone over `base` without checking anything.
    pub fn assemble(base: &StatisticalStructure, lambda: f64, s_range: (f64, f64)) -> Result<Self, HesstatError> {
        let n = base.dim() + 1;
        let chart = base
            .chart
            .extended(s_range.0, s_range.1, true)
            .map_err(|e| HesstatError::Dimension(e.to_string()))?;
        let mut comps = vec![Expression::zero(n); n];
        comps[n - 1] = Expression::parse("s", n).expect("valid literal");
        let radial = ExprVectorField::new(comps).expect("consistent dimensions");
        Ok(ConeStructure {
            chart,
            conn: Arc::new(ConeConnection::new(base.conn.clone(), base.metric.clone(), lambda)),
            metric: Arc::new(ConeMetric::new(base.metric.clone())),
            radial: Arc::new(radial),
            lambda,
        })
    }
}

/// `|g − Hess(g(ξ,ξ)/(4−2λ))|` with `ξ = s∂s`.
pub fn potential_identity_residual(cone: &ConeStructure, plan: &SamplePlan, tolerance: f64) -> CheckReport {
    if is_degenerate_lambda(cone.lambda) {
        return CheckReport::failure(
            "potential",
            tolerance,
            HesstatError::DegenerateLambda(cone.lambda).to_string(),
        );
    }
    let phi = QuadraticScalar::new(
        cone.metric.clone(),
        cone.radial.clone(),
        1.0 / (4.0 - 2.0 * cone.lambda),
    );
    sample_check(
        "potential",
        |p| {
            let h = ops::hessian(&phi, cone.conn.as_ref(), p)?;
            let g = ops::metric_at(cone.metric.as_ref(), p)?;
            Ok(relative_diff(&g, &h))
        },
        &cone.chart,
        plan,
        tolerance,
    )
}

/// Builds the cone over `base` for a root `λ` of `λ(2−λ) = c`, with the
/// radial coordinate ranging over `s_range`. On success the returned report
/// holds the verified postconditions: flatness, radiance, the potential
/// identity and the Hessian property.
pub fn build_cone_structure(
    base: &StatisticalStructure,
    lambda: f64,
    s_range: (f64, f64),
    plan: &SamplePlan,
    tolerance: f64,
) -> Result<(ConeStructure, CheckReport), HesstatError> {
    if is_degenerate_lambda(lambda) {
        return Err(HesstatError::DegenerateLambda(lambda));
    }
    let stat = check_statistical(base, plan, tolerance);
    if !stat.passed {
        return Err(HesstatError::Precondition {
            check: "statistical".into(),
            residual: stat.max_residual,
            tolerance,
        });
    }
    let est = estimate_constant_curvature(base, plan)?;
    if est.residual > tolerance {
        return Err(HesstatError::Precondition {
            check: "constant_curvature".into(),
            residual: est.residual,
            tolerance,
        });
    }
    let got = lambda * (2.0 - lambda);
    if (got - est.c).abs() > tolerance * (1.0 + est.c.abs()) {
        return Err(HesstatError::LambdaMismatch { lambda, got, c: est.c });
    }
    let cone = ConeStructure::assemble(base, lambda, s_range)?;
    let flat = sample_check(
        "flatness",
        |p| Ok(relative_size(&ops::curvature(cone.conn.as_ref(), p)?)),
        &cone.chart,
        plan,
        tolerance,
    );
    let mut radiant = check_radiant(&cone.chart, cone.conn.as_ref(), cone.radial.as_ref(), plan, tolerance);
    if let Some(l) = radiant.extra("lambda") {
        let err = (l - lambda).abs() / (1.0 + lambda.abs());
        radiant.set_extra("lambda_error", err);
        if err > radiant.max_residual {
            radiant.max_residual = err;
            radiant.passed = err <= tolerance;
        }
    }
    let potential = potential_identity_residual(&cone, plan, tolerance);
    let hessian = check_hessian_structure(&cone.chart, cone.conn.as_ref(), cone.metric.as_ref(), plan, tolerance);
    let mut report = CheckReport::combine("cone", tolerance, vec![flat, radiant, potential, hessian]);
    report.set_extra("lambda", lambda);
    report.set_extra("c", est.c);
    if report.passed {
        Ok((cone, report))
    } else {
        Err(HesstatError::Postcondition(Box::new(report)))
    }
}

/// Restricts the cone to `{s = 1}` along `E = s∂s / (2−λ)` with the potential
/// `s²/(4−2λ)`, and compares the induced structure with `base`: metric and
/// connection deviations per sample, and the fitted curvature against
/// `λ(2−λ)`.
pub fn fiber_recovery(
    cone: &ConeStructure,
    base: &StatisticalStructure,
    plan: &SamplePlan,
    tolerance: f64,
) -> Result<(LevelSet, CheckReport), HesstatError> {
    if is_degenerate_lambda(cone.lambda) {
        return Err(HesstatError::DegenerateLambda(cone.lambda));
    }
    let m = base.dim();
    let n = m + 1;
    if cone.chart.dim() != n {
        return Err(HesstatError::Dimension(format!(
            "cone has dimension {}, base {m}",
            cone.chart.dim()
        )));
    }
    let mut comps: Vec<Expression> = (0..m)
        .map(|i| Expression::parse(&format!("x{i}"), m).expect("valid literal"))
        .collect();
    comps.push(Expression::constant(1.0, m));
    let map = SurfaceMap::new(base.chart.clone(), comps)?;
    let transversal = Arc::new(ScaledVector::new(cone.radial.clone(), 1.0 / (2.0 - cone.lambda)));
    let phi = Arc::new(ConePotential::new(n, cone.lambda));
    let ls = level_set_statistical(cone.conn.clone(), phi, map, transversal, plan, tolerance)?;
    let metric = sample_check(
        "metric",
        |p| {
            Ok(relative_diff(
                &ops::metric_at(ls.structure.metric.as_ref(), p)?,
                &ops::metric_at(base.metric.as_ref(), p)?,
            ))
        },
        &base.chart,
        plan,
        tolerance,
    );
    let connection = sample_check(
        "connection",
        |p| {
            Ok(relative_diff(
                &ops::connection_at(ls.structure.conn.as_ref(), p)?,
                &ops::connection_at(base.conn.as_ref(), p)?,
            ))
        },
        &base.chart,
        plan,
        tolerance,
    );
    let expected = cone.lambda * (2.0 - cone.lambda);
    let mut curvature = match estimate_constant_curvature(&ls.structure, plan) {
        Ok(est) => {
            let err = (est.c - expected).abs();
            let mut r = CheckReport::from_residuals("curvature", tolerance, &[Ok(err.max(est.residual))]);
            r.samples = est.samples;
            r.warnings = est.warnings;
            r.set_extra("c", est.c);
            r
        }
        Err(e) => CheckReport::failure("curvature", tolerance, e.to_string()),
    };
    curvature.set_extra("expected", expected);
    let mut report = CheckReport::combine("fiber", tolerance, vec![metric, connection, curvature]);
    report.set_extra("lambda", cone.lambda);
    Ok((ls, report))
}
