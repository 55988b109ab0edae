//! Barrier metric `Hess ln ψ`, the characteristic hypersurface `ψ = 1` and
//! the conformally Hessian structure `(Hess ψ / ψ, −d ln ψ)`.

use std::sync::Arc;

use crate::expr::{eval_jet, Expression};
use crate::geom::{Chart, ConformalMetric, Differential, ExprConnection, ExprVectorField, SamplePlan, Tensor};
use crate::hesstat::{level_set_statistical, HessianMetric, LevelSet, SurfaceMap};
use crate::lch::LCHStructure;

use super::{characteristic_function, closed_form_expression, ConeError, ConeSpec, PsiMethod};

fn closed_form(cone: &ConeSpec) -> Result<Expression, ConeError> {
    closed_form_expression(cone).ok_or_else(|| ConeError::NoClosedForm(cone.kind().into()))
}

fn parse(src: &str, dim: usize) -> Expression {
    Expression::parse(src, dim).expect("generated expression parses")
}

/// `Hess ln ψ` at an interior point.
pub fn log_psi_metric(cone: &ConeSpec, x: &[f64]) -> Result<Tensor, ConeError> {
    let psi = closed_form(cone)?;
    cone.require_interior(x)?;
    let n = cone.dim();
    let j = eval_jet(&parse(&format!("log({psi})"), n), x, 2)?;
    Ok(Tensor::from_vec(n, 2, j.hessian()))
}

/// `t x` with `ψ(t x) = 1`, i.e. `t = ψ(x)^{1/n}` by homogeneity of degree `−n`.
pub fn project_to_characteristic_surface(cone: &ConeSpec, x: &[f64], method: PsiMethod) -> Result<Vec<f64>, ConeError> {
    let psi = characteristic_function(cone, x, method)?;
    let t = psi.value.powf(1.0 / cone.dim() as f64);
    Ok(x.iter().map(|v| t * v).collect())
}

/// Statistical structure on the level set `ψ = 1` parametrized by `map`,
/// split off along the Euler field `Σ x^i ∂_i` from the flat connection.
pub fn surface_statistical_structure(
    cone: &ConeSpec,
    map: SurfaceMap,
    plan: &SamplePlan,
    tolerance: f64,
) -> Result<LevelSet, ConeError> {
    let psi = closed_form(cone)?;
    let n = cone.dim();
    if map.ambient_dim() != n {
        return Err(ConeError::Dimension {
            got: map.ambient_dim(),
            want: n,
        });
    }
    let phi = Arc::new(parse(&format!("log({psi})"), n));
    let euler = (0..n).map(|i| parse(&format!("x{i}"), n)).collect();
    let euler = Arc::new(ExprVectorField::new(euler).expect("consistent dimensions"));
    Ok(level_set_statistical(
        Arc::new(ExprConnection::flat(n)),
        phi,
        map,
        euler,
        plan,
        tolerance,
    )?)
}

/// Exponential parametrization of `{ψ = 1}` on `[−1, 1]^{n−1}`:
/// `(e^{u0}, …, e^{u_{n−2}}, e^{−Σu})` for orthants and
/// `(√2 cosh u, √2 sinh u)` for `lorentz(2)`.
pub fn default_surface_map(cone: &ConeSpec) -> Result<SurfaceMap, ConeError> {
    let n = cone.dim();
    if n < 2 {
        return Err(ConeError::Invalid(
            "surface of a one-dimensional cone is a point".into(),
        ));
    }
    let m = n - 1;
    let comps: Vec<String> = match cone {
        ConeSpec::Orthant(_) => {
            let sum = (0..m).map(|i| format!("x{i}")).collect::<Vec<_>>().join("+");
            (0..m)
                .map(|i| format!("exp(x{i})"))
                .chain(std::iter::once(format!("exp(-({sum}))")))
                .collect()
        }
        ConeSpec::Lorentz(2) => vec![
            "sqrt(2)*(exp(x0)+exp(-x0))/2".into(),
            "sqrt(2)*(exp(x0)-exp(-x0))/2".into(),
        ],
        _ => return Err(ConeError::NoClosedForm(cone.kind().into())),
    };
    let chart = Chart::boxed(&vec![-1.0; m], &vec![1.0; m]).expect("valid box");
    let comps = comps.iter().map(|c| parse(c, m)).collect();
    Ok(SurfaceMap::new(chart, comps)?)
}

/// A box well inside the cone: `[0.5, 2]^n` for orthants,
/// `x0 ∈ [n, n+1]` and `[−1, 1]` elsewhere for Lorentz cones.
pub fn default_chart(cone: &ConeSpec) -> Result<Chart, ConeError> {
    let (lo, hi) = chart_bounds(cone)?;
    let chart = Chart::boxed(&lo, &hi).expect("valid box");
    Ok(chart)
}

fn chart_bounds(cone: &ConeSpec) -> Result<(Vec<f64>, Vec<f64>), ConeError> {
    match cone {
        ConeSpec::Orthant(n) => Ok((vec![0.5; *n], vec![2.0; *n])),
        ConeSpec::Lorentz(n) => {
            let mut lo = vec![-1.0; *n];
            let mut hi = vec![1.0; *n];
            lo[0] = *n as f64;
            hi[0] = *n as f64 + 1.0;
            Ok((lo, hi))
        }
        ConeSpec::Polyhedral(_) => Err(ConeError::NoClosedForm("polyhedral".into())),
        ConeSpec::Product(f) => {
            let mut lo = Vec::new();
            let mut hi = Vec::new();
            for c in f {
                let (l, h) = chart_bounds(c)?;
                lo.extend(l);
                hi.extend(h);
            }
            Ok((lo, hi))
        }
    }
}

/// `(flat, Hess ψ / ψ, −d ln ψ)` on a box whose corners lie in the cone.
pub fn cone_lch_structure(cone: &ConeSpec, chart: &Chart) -> Result<LCHStructure, ConeError> {
    let psi = closed_form(cone)?;
    let n = cone.dim();
    if chart.dim() != n {
        return Err(ConeError::Dimension {
            got: chart.dim(),
            want: n,
        });
    }
    for mask in 0..(1usize << n) {
        let corner: Vec<f64> = (0..n)
            .map(|i| {
                if mask >> i & 1 == 1 {
                    chart.hi()[i]
                } else {
                    chart.lo()[i]
                }
            })
            .collect();
        cone.require_interior(&corner)?;
    }
    let flat = Arc::new(ExprConnection::flat(n));
    let hess = Arc::new(HessianMetric::new(flat.clone(), Arc::new(psi.clone())));
    let g = Arc::new(ConformalMetric::new(hess, Arc::new(parse(&format!("1/({psi})"), n))));
    let theta = Arc::new(Differential::new(Arc::new(parse(&format!("-log({psi})"), n))));
    Ok(LCHStructure::new(chart.clone(), flat, g, theta)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hesstat::{check_statistical, estimate_constant_curvature};
    use crate::lch::check_lch;

    #[test]
    fn orthant_barrier_metric() {
        let o = ConeSpec::orthant(2).unwrap();
        let g = log_psi_metric(&o, &[1.0, 2.0]).unwrap();
        let want = [1.0, 0.0, 0.0, 0.25];
        for (a, b) in g.data().iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
        let l = log_psi_metric(&ConeSpec::lorentz(2).unwrap(), &[1.0, 0.0]).unwrap();
        for (a, b) in l.data().iter().zip([2.0, 0.0, 0.0, 2.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn projections() {
        let o = ConeSpec::orthant(2).unwrap();
        let p = project_to_characteristic_surface(&o, &[2.0, 3.0], PsiMethod::ClosedForm).unwrap();
        assert!((p[0] - 0.816_496_580_927_726).abs() < 1e-12);
        let l = ConeSpec::lorentz(2).unwrap();
        let p = project_to_characteristic_surface(&l, &[1.0, 0.0], PsiMethod::ClosedForm).unwrap();
        assert!((p[0] - 2f64.sqrt()).abs() < 1e-15 && p[1] == 0.0);
    }

    #[test]
    fn orthant3_surface_has_negative_curvature() {
        let plan = SamplePlan::new(40, 42, 0.05).unwrap();
        let o = ConeSpec::orthant(3).unwrap();
        let ls = surface_statistical_structure(&o, default_surface_map(&o).unwrap(), &plan, 1e-6).unwrap();
        assert!(check_statistical(&ls.structure, &plan, 1e-6).passed);
        let c = estimate_constant_curvature(&ls.structure, &plan).unwrap();
        assert!(c.c < 0.0 && c.residual < 1e-6, "{c:?}");
    }

    #[test]
    fn cone_lch_on_default_charts() {
        let plan = SamplePlan::new(40, 42, 0.05).unwrap();
        for cone in [
            ConeSpec::orthant(2).unwrap(),
            ConeSpec::orthant(3).unwrap(),
            ConeSpec::lorentz(2).unwrap(),
        ] {
            let s = cone_lch_structure(&cone, &default_chart(&cone).unwrap()).unwrap();
            let r = check_lch(&s, &plan, 1e-6);
            assert!(r.passed, "{cone:?}: {r:?}");
        }
        let bad = Chart::boxed(&[-1.0, 0.5], &[1.0, 1.0]).unwrap();
        assert!(matches!(
            cone_lch_structure(&ConeSpec::orthant(2).unwrap(), &bad),
            Err(ConeError::Outside(_))
        ));
    }
}
