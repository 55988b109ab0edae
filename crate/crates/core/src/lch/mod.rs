//! Locally conformally Hessian structures.

mod gauge;
mod probe;
mod rank;
mod torus;

use std::sync::Arc;

use thiserror::Error;

use crate::expr::EvalError;
use crate::geom::ops::{self, total_symmetry_residual};
use crate::geom::sample::{evaluate, sample_points};
use crate::geom::{
    at_chart_point, relative_diff, relative_size, sample_check, Chart, CheckReport, Connection, Metric, MetricField,
    OneForm, OneFormField, SamplePlan, Tensor, Vector, VectorField,
};
use crate::hesstat::{check_hessian_structure, check_radiant, positive_definite_check, HesstatError};
use crate::jet::{self, Jet};

pub use gauge::{local_hessian_gauge, GaugeFactor, GaugeReport, GaugeScalar};
pub use probe::{lee_perturbation_probe, PerturbationProbe, DEFAULT_EPS_HI};
pub use rank::{monodromy_rank, MonodromyCharacter};
pub use torus::{build_mapping_torus, pullback_residuals, MappingTorus, MappingTorusSpec, PullbackResiduals};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LchError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Hesstat(#[from] HesstatError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("∇θ − θ⊗θ scaled by 1/u is not positive definite at {point:?} (smallest eigenvalue {eigenvalue:e})")]
    NotPositiveDefinite { point: Vec<f64>, eigenvalue: f64 },
    #[error("u must be nonzero")]
    ZeroU,
    #[error("one-form is not closed: |dα| residual {0:e}")]
    NotClosed(f64),
    #[error("line integrals along two paths disagree: {0} vs {1}")]
    PathDependent(f64, f64),
    #[error("point {0:?} lies outside the chart")]
    OutsideChart(Vec<f64>),
    #[error("scale q = {0} must be positive and different from 1")]
    InvalidScale(f64),
    #[error("automorphism does not preserve the base structure: residual {0:e}")]
    Automorphism(f64),
    #[error("seam residual {0:e} exceeds tolerance")]
    Seam(f64),
}

/// Flat connection `∇`, metric `g` and Lee form `θ` on a chart.
#[derive(Clone)]
pub struct LCHStructure {
    pub chart: Chart,
    pub conn: Connection,
    pub metric: Metric,
    pub lee_form: OneForm,
}

impl LCHStructure {
    pub fn new(chart: Chart, conn: Connection, metric: Metric, lee_form: OneForm) -> Result<Self, LchError> {
        let n = chart.dim();
        if conn.dim() != n || metric.dim() != n || lee_form.dim() != n {
            return Err(LchError::Dimension(format!(
                "chart {n}, connection {}, metric {}, Lee form {}",
                conn.dim(),
                metric.dim(),
                lee_form.dim()
            )));
        }
        Ok(LCHStructure {
            chart,
            conn,
            metric,
            lee_form,
        })
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// `ξ = θ^♯`.
    pub fn lee_field(&self) -> Vector {
        Arc::new(LeeVector::new(self.metric.clone(), self.lee_form.clone()))
    }
}

/// `ξ^i = g^{ij} θ_j`.
pub struct LeeVector {
    metric: Metric,
    form: OneForm,
}

impl LeeVector {
    pub fn new(metric: Metric, form: OneForm) -> Self {
        LeeVector { metric, form }
    }
}

impl VectorField for LeeVector {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn eval(&self, x: &[Jet]) -> Result<Vec<Jet>, EvalError> {
        let n = self.dim();
        let g = self.metric.eval(x)?;
        let t = self.form.eval(x)?;
        jet::solve(&g, &t, n, 1).ok_or_else(|| EvalError::Singular("metric is not invertible".into()))
    }
}

pub fn lee_vector(g: &Metric, theta: &OneForm, p: &[f64]) -> Result<Tensor, EvalError> {
    ops::vector_at(&LeeVector::new(g.clone(), theta.clone()), p)
}

/// `(∇g − θ⊗g)_ijk = (∇g)_ijk − θ_i g_jk`.
pub fn lch_tensor(s: &LCHStructure, p: &[f64]) -> Result<Tensor, EvalError> {
    let n = s.dim();
    let ng = ops::covariant_derivative_metric(s.metric.as_ref(), s.conn.as_ref(), p)?;
    let g = ops::metric_at(s.metric.as_ref(), p)?;
    let t = ops::oneform_at(s.lee_form.as_ref(), p)?;
    let mut out = ng;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = out.get(&[i, j, k]) - t.data()[i] * g.get(&[j, k]);
                out.set(&[i, j, k], v);
            }
        }
    }
    Ok(out)
}

pub(crate) fn closedness_check(
    form: &dyn OneFormField,
    chart: &Chart,
    plan: &SamplePlan,
    tolerance: f64,
) -> CheckReport {
    sample_check(
        "closed",
        |p| Ok(relative_size(&ops::exterior_derivative_oneform(form, p)?)),
        chart,
        plan,
        tolerance,
    )
}

/// Flatness of `∇`, `dθ = 0`, total symmetry of `∇g − θ⊗g`, positivity of `g`.
pub fn check_lch(s: &LCHStructure, plan: &SamplePlan, tolerance: f64) -> CheckReport {
    let flat = if s.conn.is_flat_affine() {
        CheckReport::from_residuals("flatness", tolerance, &vec![Ok(0.0); plan.count()])
    } else {
        sample_check(
            "flatness",
            |p| Ok(relative_size(&ops::curvature(s.conn.as_ref(), p)?)),
            &s.chart,
            plan,
            tolerance,
        )
    };
    let closed = closedness_check(s.lee_form.as_ref(), &s.chart, plan, tolerance);
    let sym = sample_check(
        "symmetry",
        |p| Ok(total_symmetry_residual(&lch_tensor(s, p)?)),
        &s.chart,
        plan,
        tolerance,
    );
    let pd = positive_definite_check("positive_definite", s.metric.as_ref(), &s.chart, plan, tolerance);
    CheckReport::combine("lch", tolerance, vec![flat, closed, sym, pd])
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeeConstants {
    /// Mean of `g(ξ,ξ)`.
    pub a: f64,
    /// Fitted `∇ξ = μ Id`.
    pub mu: f64,
    /// `−μ − a`.
    pub u: f64,
    /// Largest `|L_ξ g| / (1 + |L_ξ g|)`.
    pub killing_residual: f64,
    /// Largest relative deviation of `∇ξ` from `μ Id`.
    pub radiant_residual: f64,
    /// Largest relative deviation of `g(ξ,ξ)` from `a`.
    pub a_residual: f64,
    /// Killing, radiant and constant-`a` residuals within tolerance and
    /// `μ ∉ {−a, 0}`.
    pub radiant_lch: bool,
    pub samples: usize,
}

impl LeeConstants {
    pub fn to_report(&self, tolerance: f64) -> CheckReport {
        let max = self.killing_residual.max(self.radiant_residual).max(self.a_residual);
        let mut r = CheckReport::from_residuals("lee_constants", tolerance, &[Ok(max)]);
        r.samples = self.samples;
        r.mean_residual = max;
        r.set_extra("a", self.a);
        r.set_extra("mu", self.mu);
        r.set_extra("u", self.u);
        r.set_extra("killing_residual", self.killing_residual);
        r.set_extra("radiant_residual", self.radiant_residual);
        r.set_extra("a_residual", self.a_residual);
        if !self.radiant_lch && r.passed {
            r.passed = false;
            r.diagnostics.push("μ ∈ {−a, 0}: not radiant".into());
        }
        r
    }
}

/// Estimates `a = g(ξ,ξ)`, `μ` with `∇ξ = μ Id` and `u = −μ − a` for the Lee
/// field, along with the Killing and radiant residuals.
pub fn lee_constants(s: &LCHStructure, plan: &SamplePlan, tolerance: f64) -> Result<LeeConstants, LchError> {
    let xi = s.lee_field();
    let points = sample_points(&s.chart, plan);
    let rows = evaluate(&points, |p| {
        let v = ops::vector_at(xi.as_ref(), p)?;
        let g = ops::metric_at(s.metric.as_ref(), p)?;
        let n = s.dim();
        let mut norm = 0.0;
        for i in 0..n {
            for j in 0..n {
                norm += g.get(&[i, j]) * v.data()[i] * v.data()[j];
            }
        }
        let l = ops::lie_derivative_metric(s.metric.as_ref(), xi.as_ref(), p)?;
        Ok((norm, relative_size(&l)))
    });
    let ok: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    if ok.is_empty() {
        let e = rows
            .into_iter()
            .find_map(Result::err)
            .unwrap_or(EvalError::Domain("no samples".into()));
        return Err(e.into());
    }
    let a = ok.iter().map(|r| r.0).sum::<f64>() / ok.len() as f64;
    let a_residual = ok.iter().map(|r| (r.0 - a).abs() / (1.0 + a.abs())).fold(0.0, f64::max);
    let killing_residual = ok.iter().map(|r| r.1).fold(0.0, f64::max);
    let radiant = check_radiant(&s.chart, s.conn.as_ref(), xi.as_ref(), plan, tolerance);
    let mu = radiant.extra("lambda").unwrap_or(f64::NAN);
    let u = -mu - a;
    let admissible = (mu + a).abs() > tolerance && mu.abs() > tolerance;
    Ok(LeeConstants {
        a,
        mu,
        u,
        killing_residual,
        radiant_residual: radiant.max_residual,
        a_residual,
        radiant_lch: killing_residual <= tolerance
            && radiant.max_residual <= tolerance
            && a_residual <= tolerance
            && admissible,
        samples: ok.len(),
    })
}

/// `g_θ = u⁻¹ (∇θ − θ⊗θ)`, symmetrized. With `quadratic = false` the
/// `θ⊗θ` term is dropped, giving `u⁻¹ ∇θ`.
pub struct LeeMetric {
    conn: Connection,
    form: OneForm,
    inv_u: f64,
    quadratic: bool,
}

impl LeeMetric {
    pub fn new(conn: Connection, form: OneForm, u: f64) -> Self {
        LeeMetric {
            conn,
            form,
            inv_u: 1.0 / u,
            quadratic: true,
        }
    }

    /// `∇θ` alone.
    pub fn koszul(conn: Connection, form: OneForm) -> Self {
        LeeMetric {
            conn,
            form,
            inv_u: 1.0,
            quadratic: false,
        }
    }
}

impl MetricField for LeeMetric {
    fn dim(&self) -> usize {
        self.form.dim()
    }

    fn eval(&self, x: &[Jet]) -> Result<Vec<Jet>, EvalError> {
        let n = self.dim();
        let k = jet::point_order(x);
        at_chart_point(x, 1, |id| {
            let t = self.form.eval(id)?;
            let low: Vec<Jet> = id.iter().map(|j| j.truncate(k)).collect();
            let tk: Vec<Jet> = t.iter().map(|j| j.truncate(k)).collect();
            let gamma = if self.conn.is_flat_affine() {
                None
            } else {
                Some(self.conn.eval(&low)?)
            };
            let mut out = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    let mut v = (&t[j].derivative(i) + &t[i].derivative(j)).scale(0.5);
                    if let Some(g) = &gamma {
                        for (m, tm) in tk.iter().enumerate() {
                            v = &v - &(&g[(m * n + i) * n + j] * tm);
                        }
                    }
                    if self.quadratic {
                        v = &v - &(&tk[i] * &tk[j]);
                    }
                    out.push(v.scale(self.inv_u));
                }
            }
            Ok(out)
        })
    }
}

/// `|u g − (∇θ − θ⊗θ)|` over samples.
pub fn lee_identity_residual(
    s: &LCHStructure,
    constants: &LeeConstants,
    plan: &SamplePlan,
    tolerance: f64,
) -> CheckReport {
    let rhs = LeeMetric::new(s.conn.clone(), s.lee_form.clone(), 1.0);
    let u = constants.u;
    let mut r = sample_check(
        "lee_identity",
        |p| {
            let g = ops::metric_at(s.metric.as_ref(), p)?.scaled(u);
            Ok(relative_diff(&g, &ops::metric_at(&rhs, p)?))
        },
        &s.chart,
        plan,
        tolerance,
    );
    r.set_extra("u", u);
    if !constants.radiant_lch {
        r.warnings
            .push("Lee field is not radiant and Killing within tolerance".into());
    }
    r
}

/// Builds `(∇, u⁻¹(∇θ − θ⊗θ), θ)`, rejecting it unless the candidate metric
/// is positive definite at every sample.
pub fn metric_from_lee(
    chart: &Chart,
    conn: Connection,
    theta: OneForm,
    u: f64,
    plan: &SamplePlan,
) -> Result<LCHStructure, LchError> {
    if u == 0.0 || !u.is_finite() {
        return Err(LchError::ZeroU);
    }
    let g = LeeMetric::new(conn.clone(), theta.clone(), u);
    let points = sample_points(chart, plan);
    let eig = evaluate(&points, |p| Ok(crate::geom::min_eigenvalue(&ops::metric_at(&g, p)?)));
    let mut worst: Option<(f64, usize)> = None;
    let mut first_err = None;
    for (i, e) in eig.iter().enumerate() {
        match e {
            Ok(v) => {
                if worst.is_none_or(|(w, _)| *v < w) {
                    worst = Some((*v, i));
                }
            }
            Err(e) => {
                first_err.get_or_insert_with(|| e.clone());
            }
        }
    }
    let Some((eigenvalue, i)) = worst else {
        return Err(first_err.unwrap_or(EvalError::Domain("no samples".into())).into());
    };
    if eigenvalue <= crate::geom::tensor::PD_THRESHOLD {
        return Err(LchError::NotPositiveDefinite {
            point: points[i].clone(),
            eigenvalue,
        });
    }
    LCHStructure::new(chart.clone(), conn, Arc::new(g), theta)
}

/// Closedness of `θ` and the Hessian property of `(∇, ∇θ)`.
pub fn koszul_check(chart: &Chart, conn: Connection, theta: OneForm, plan: &SamplePlan, tolerance: f64) -> CheckReport {
    let closed = closedness_check(theta.as_ref(), chart, plan, tolerance);
    let g = LeeMetric::koszul(conn.clone(), theta);
    let hess = check_hessian_structure(chart, conn.as_ref(), &g, plan, tolerance);
    CheckReport::combine("koszul", tolerance, vec![closed, hess])
}

/// Fits `ζ ≈ κ ξ` by least squares over the samples and returns `(κ, r)` with
/// `r` the largest relative deviation `|ζ − κξ| / (1 + |ζ|)`.
pub fn lee_proportionality(
    s: &LCHStructure,
    zeta: &dyn VectorField,
    plan: &SamplePlan,
) -> Result<(f64, f64), LchError> {
    let xi = s.lee_field();
    let points = sample_points(&s.chart, plan);
    let rows: Vec<(Tensor, Tensor)> = evaluate(&points, |p| {
        Ok((ops::vector_at(zeta, p)?, ops::vector_at(xi.as_ref(), p)?))
    })
    .into_iter()
    .collect::<Result<_, EvalError>>()?;
    let (mut num, mut den) = (0.0, 0.0);
    for (z, x) in &rows {
        for (a, b) in z.data().iter().zip(x.data()) {
            num += a * b;
            den += b * b;
        }
    }
    let kappa = if den > 0.0 { num / den } else { 0.0 };
    let r = rows
        .iter()
        .map(|(z, x)| z.sub(&x.scaled(kappa)).max_norm() / (1.0 + z.max_norm()))
        .fold(0.0, f64::max);
    Ok((kappa, r))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geom::{ExprConnection, ExprMetric, ExprOneForm, ExprVectorField};

    pub(crate) fn hopf() -> LCHStructure {
        let chart = Chart::boxed(&[0.5, -1.0], &[2.0, 1.0]).unwrap();
        let g = ExprMetric::parse(&[&["1/(x0^2+x1^2)", "0"], &["0", "1/(x0^2+x1^2)"]]).unwrap();
        let t = ExprOneForm::parse(&["-2*x0/(x0^2+x1^2)", "-2*x1/(x0^2+x1^2)"]).unwrap();
        LCHStructure::new(chart, Arc::new(ExprConnection::flat(2)), Arc::new(g), Arc::new(t)).unwrap()
    }

    fn plan() -> SamplePlan {
        SamplePlan::new(50, 42, 0.05).unwrap()
    }

    #[test]
    fn hopf_is_lch_with_constants() {
        let s = hopf();
        assert!(check_lch(&s, &plan(), 1e-10).passed);
        let c = lee_constants(&s, &plan(), 1e-8).unwrap();
        assert!((c.a - 4.0).abs() < 1e-12);
        assert!((c.mu + 2.0).abs() < 1e-12);
        assert!((c.u + 2.0).abs() < 1e-12);
        assert!(c.radiant_lch);
        assert!(lee_identity_residual(&s, &c, &plan(), 1e-12).passed);
    }

    #[test]
    fn wrong_u_fails_identity() {
        let s = hopf();
        let mut c = lee_constants(&s, &plan(), 1e-8).unwrap();
        c.u = 2.0;
        assert!(!lee_identity_residual(&s, &c, &plan(), 1e-6).passed);
    }

    #[test]
    fn indefinite_lee_metric_is_rejected() {
        let chart = Chart::boxed(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        let t: OneForm = Arc::new(ExprOneForm::parse(&["1", "0"]).unwrap());
        let err = metric_from_lee(&chart, Arc::new(ExprConnection::flat(2)), t, 1.0, &plan());
        assert!(matches!(err, Err(LchError::NotPositiveDefinite { .. })));
    }

    #[test]
    fn euler_field_is_proportional_to_hopf_lee_field() {
        let zeta = ExprVectorField::parse(&["x0", "x1"]).unwrap();
        let (k, r) = lee_proportionality(&hopf(), &zeta, &plan()).unwrap();
        assert!((k + 0.5).abs() < 1e-12);
        assert!(r < 1e-12);
    }
}
