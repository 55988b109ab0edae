//! Mapping torus of a statistical manifold of constant curvature, built on
//! the fundamental domain `M × [1, q)` with a seam test.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::One;

use crate::expr::{eval_jet, EvalError, Expression};
use crate::geom::ops;
use crate::geom::{
    relative_diff, sample_components, CheckReport, ConformalMetric, ConnectionField, ExprOneForm, MetricField,
    OneFormField, SamplePlan, Tensor,
};
use crate::hesstat::{build_cone_structure, ConeStructure, HesstatError, StatisticalStructure};

use super::{LCHStructure, LchError, MonodromyCharacter};

#[derive(Clone)]
pub struct MappingTorusSpec {
    pub base: StatisticalStructure,
    /// Base automorphism `φ`, one expression per base coordinate.
    pub automorphism: Vec<Expression>,
    pub q: f64,
    pub lambda: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PullbackResiduals {
    pub metric: f64,
    pub form: f64,
    pub connection: f64,
}

impl PullbackResiduals {
    pub fn max(&self) -> f64 {
        self.metric.max(self.form).max(self.connection)
    }
}

/// Relative differences between the pullbacks of the given fields under
/// the coordinate map `map` and the fields themselves, at `p`.
pub fn pullback_residuals(
    map: &[Expression],
    metric: Option<&dyn MetricField>,
    form: Option<&dyn OneFormField>,
    conn: Option<&dyn ConnectionField>,
    p: &[f64],
) -> Result<PullbackResiduals, EvalError> {
    let n = map.len();
    let phi = map.iter().map(|e| eval_jet(e, p, 2)).collect::<Result<Vec<_>, _>>()?;
    let q: Vec<f64> = phi.iter().map(|j| j.value()).collect();
    let jac = DMatrix::from_fn(n, n, |i, a| phi[i].grad(a));
    let mut out = PullbackResiduals::default();
    if let Some(g) = metric {
        let gq = ops::metric_at(g, &q)?.to_matrix();
        let pulled = jac.transpose() * gq * &jac;
        let gp = ops::metric_at(g, p)?;
        out.metric = relative_diff(&Tensor::from_vec(n, 2, pulled.transpose().as_slice().to_vec()), &gp);
    }
    if let Some(t) = form {
        let tq = ops::oneform_at(t, &q)?;
        let pulled: Vec<f64> = (0..n)
            .map(|a| (0..n).map(|i| jac[(i, a)] * tq.data()[i]).sum())
            .collect();
        out.form = relative_diff(&Tensor::from_vec(n, 1, pulled), &ops::oneform_at(t, p)?);
    }
    if let Some(c) = conn {
        let gq = ops::connection_at(c, &q)?;
        let inv = jac
            .clone()
            .try_inverse()
            .ok_or_else(|| EvalError::Singular("coordinate map is not invertible".into()))?;
        let mut pulled = Tensor::zeros(n, 3);
        for a in 0..n {
            for b in 0..n {
                let tmp: Vec<f64> = (0..n)
                    .map(|i| {
                        let mut v = phi[i].hess(a, b);
                        for j in 0..n {
                            for l in 0..n {
                                v += gq.get(&[i, j, l]) * jac[(j, a)] * jac[(l, b)];
                            }
                        }
                        v
                    })
                    .collect();
                for cc in 0..n {
                    let v: f64 = (0..n).map(|i| inv[(cc, i)] * tmp[i]).sum();
                    pulled.set(&[cc, a, b], v);
                }
            }
        }
        out.connection = relative_diff(&pulled, &ops::connection_at(c, p)?);
    }
    Ok(out)
}

pub struct MappingTorus {
    /// `(∇, g_M + ds²/s², −2ds/s)` on `M × (1, q)`.
    pub structure: LCHStructure,
    /// The radiant Hessian cone the structure is conformal to.
    pub cone: ConeStructure,
    pub cone_report: CheckReport,
    pub automorphism_report: CheckReport,
    pub seam_report: CheckReport,
    /// Deck generator acts by `q`, so the character is `{q^1}`.
    pub character: MonodromyCharacter,
}

pub fn build_mapping_torus(
    spec: &MappingTorusSpec,
    plan: &SamplePlan,
    tolerance: f64,
) -> Result<MappingTorus, LchError> {
    let q = spec.q;
    if !(q > 0.0) || q == 1.0 || !q.is_finite() {
        return Err(LchError::InvalidScale(q));
    }
    let n = spec.base.dim();
    if spec.automorphism.len() != n || spec.automorphism.iter().any(|e| e.dim() != n) {
        return Err(LchError::Dimension(format!(
            "automorphism must have {n} components in {n} variables"
        )));
    }
    if crate::hesstat::is_degenerate_lambda(spec.lambda) {
        return Err(HesstatError::DegenerateLambda(spec.lambda).into());
    }
    let base = &spec.base;
    let automorphism_report = sample_components(
        "automorphism",
        &["metric", "connection"],
        |p| {
            let r = pullback_residuals(
                &spec.automorphism,
                Some(base.metric.as_ref()),
                None,
                Some(base.conn.as_ref()),
                p,
            )?;
            Ok(vec![r.metric, r.connection])
        },
        &base.chart,
        plan,
        tolerance,
    );
    if !automorphism_report.passed {
        return Err(LchError::Automorphism(automorphism_report.max_residual));
    }
    let range = (q.min(1.0), q.max(1.0));
    let (cone, cone_report) = build_cone_structure(base, spec.lambda, range, plan, tolerance)?;
    let big = n + 1;
    let inv_s2 = Expression::parse("1/s^2", big).expect("valid literal");
    let metric = Arc::new(ConformalMetric::new(cone.metric.clone(), Arc::new(inv_s2)));
    let mut theta = vec![Expression::zero(big); big];
    theta[n] = Expression::parse("-2/s", big).expect("valid literal");
    let theta = Arc::new(ExprOneForm::new(theta).expect("consistent dimensions"));
    let structure = LCHStructure::new(cone.chart.clone(), cone.conn.clone(), metric, theta)?;

    let mut deck: Vec<Expression> = spec.automorphism.iter().map(|e| e.lift(big)).collect();
    deck.push(Expression::parse(&format!("{q:?}*s"), big).expect("valid literal"));
    let seam_report = sample_components(
        "seam",
        &["metric", "lee_form", "connection"],
        |p| {
            let r = pullback_residuals(
                &deck,
                Some(structure.metric.as_ref()),
                Some(structure.lee_form.as_ref()),
                Some(structure.conn.as_ref()),
                p,
            )?;
            Ok(vec![r.metric, r.form, r.connection])
        },
        &structure.chart,
        plan,
        tolerance,
    );
    if !seam_report.passed {
        return Err(LchError::Seam(seam_report.max_residual));
    }
    Ok(MappingTorus {
        structure,
        cone,
        cone_report,
        automorphism_report,
        seam_report,
        character: MonodromyCharacter::single_base(vec![BigRational::one()]),
    })
}
