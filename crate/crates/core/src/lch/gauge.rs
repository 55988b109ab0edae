//! Local potential `f` with `df = θ`, making `e^{−f} g` Hessian.

use std::sync::Arc;

use crate::expr::EvalError;
use crate::geom::{at_chart_point, Chart, CheckReport, ConformalMetric, OneForm, SamplePlan, ScalarField};
use crate::hesstat::check_hessian_structure;
use crate::jet::{self, Jet};

use super::{LCHStructure, LchError};

// 5-point Gauss-Legendre on [0, 1].
const NODES: [f64; 5] = [
    0.046_910_077_030_668,
    0.230_765_344_947_158_45,
    0.5,
    0.769_234_655_052_841_6,
    0.953_089_922_969_332,
];
const WEIGHTS: [f64; 5] = [
    0.118_463_442_528_094_5,
    0.239_314_335_249_683_23,
    0.284_444_444_444_444_45,
    0.239_314_335_249_683_23,
    0.118_463_442_528_094_5,
];
const PANELS: usize = 32;

fn theta_at(form: &dyn crate::geom::OneFormField, p: &[f64]) -> Result<Vec<f64>, EvalError> {
    Ok(jet::values(&form.eval(&Jet::identity_point(p, 0))?))
}

/// `∫ θ` along the straight segment from `a` to `b`.
fn segment_integral(form: &dyn crate::geom::OneFormField, a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    let n = a.len();
    let d: Vec<f64> = (0..n).map(|i| b[i] - a[i]).collect();
    if d.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let h = 1.0 / PANELS as f64;
    let mut total = 0.0;
    for panel in 0..PANELS {
        for (t0, w) in NODES.iter().zip(WEIGHTS) {
            let t = (panel as f64 + t0) * h;
            let p: Vec<f64> = (0..n).map(|i| a[i] + t * d[i]).collect();
            let th = theta_at(form, &p)?;
            total += w * h * th.iter().zip(&d).map(|(x, y)| x * y).sum::<f64>();
        }
    }
    Ok(total)
}

/// Integral along the axis-parallel path that moves one coordinate at a time.
fn staircase_integral(form: &dyn crate::geom::OneFormField, a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    let mut cur = a.to_vec();
    let mut total = 0.0;
    for i in 0..a.len() {
        let mut next = cur.clone();
        next[i] = b[i];
        total += segment_integral(form, &cur, &next)?;
        cur = next;
    }
    Ok(total)
}

/// `f(p) = ∫_{base}^{p} θ` along straight segments. Derivatives come from
/// `θ` itself: the jet of `f` at `p` is `f(p) + ∫₀¹ θ(p + t h)·h dt` in the
/// displacement `h`, integrated exactly by Gauss-Legendre since each jet
/// coefficient is a polynomial of degree at most two in `t`.
pub struct GaugeScalar {
    form: OneForm,
    base: Vec<f64>,
}

impl GaugeScalar {
    pub fn new(form: OneForm, base: Vec<f64>) -> Self {
        GaugeScalar { form, base }
    }

    pub fn value_at(&self, p: &[f64]) -> Result<f64, EvalError> {
        segment_integral(self.form.as_ref(), &self.base, p)
    }
}

impl ScalarField for GaugeScalar {
    fn dim(&self) -> usize {
        self.form.dim()
    }

    fn eval(&self, x: &[Jet]) -> Result<Jet, EvalError> {
        let n = self.dim();
        let k = jet::point_order(x);
        let out = at_chart_point(x, 0, |id| {
            let p = jet::values(id);
            let f0 = self.value_at(&p)?;
            let mut acc = Jet::constant(n, k, f0);
            if k == 0 {
                return Ok(vec![acc]);
            }
            let h: Vec<Jet> = id.iter().map(|j| j + (-j.value())).collect();
            // 3-point Gauss-Legendre on [0, 1]
            let gl3 = [
                (0.5 - 0.5 * (0.6f64).sqrt(), 5.0 / 18.0),
                (0.5, 8.0 / 18.0),
                (0.5 + 0.5 * (0.6f64).sqrt(), 5.0 / 18.0),
            ];
            for (t, w) in gl3 {
                let pt: Vec<Jet> = id.iter().zip(&h).map(|(x0, hi)| &(x0 - hi) + &hi.scale(t)).collect();
                let th = self.form.eval(&pt)?;
                for (ti, hi) in th.iter().zip(&h) {
                    acc += &(ti * hi).scale(w);
                }
            }
            Ok(vec![acc])
        })?;
        Ok(out.into_iter().next().expect("one component"))
    }
}

/// `e^{−f}` for a gauge `f`.
pub struct GaugeFactor(pub Arc<GaugeScalar>);

impl ScalarField for GaugeFactor {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, x: &[Jet]) -> Result<Jet, EvalError> {
        Ok((-self.0.eval(x)?).exp())
    }
}

#[derive(Clone, Debug)]
pub struct GaugeReport {
    /// `f(p)` with `f(base) = 0`.
    pub f: f64,
    /// Same integral along the axis-parallel path.
    pub f_staircase: f64,
    /// Hessian check of `e^{−f} g` on a box around the base point.
    pub hessian: CheckReport,
}

/// Integrates the Lee form from `base` to `p` and checks that `e^{−f} g` is
/// Hessian on the box of half-width `radius` around `base`.
pub fn local_hessian_gauge(
    s: &LCHStructure,
    base: &[f64],
    p: &[f64],
    radius: f64,
    plan: &SamplePlan,
    tolerance: f64,
) -> Result<GaugeReport, LchError> {
    let inside =
        |q: &[f64]| q.len() == s.dim() && (0..q.len()).all(|i| q[i] >= s.chart.lo()[i] && q[i] <= s.chart.hi()[i]);
    for q in [base, p] {
        if !inside(q) {
            return Err(LchError::OutsideChart(q.to_vec()));
        }
    }
    let gauge = Arc::new(GaugeScalar::new(s.lee_form.clone(), base.to_vec()));
    let f = gauge.value_at(p)?;
    let f_staircase = staircase_integral(s.lee_form.as_ref(), base, p)?;
    if (f - f_staircase).abs() > tolerance.max(1e-9) * (1.0 + f.abs()) {
        return Err(LchError::PathDependent(f, f_staircase));
    }
    let sub: Chart = s
        .chart
        .sub_box(base, radius)
        .map_err(|e| LchError::Dimension(e.to_string()))?;
    let g = ConformalMetric::new(s.metric.clone(), Arc::new(GaugeFactor(gauge)));
    let hessian = check_hessian_structure(&sub, s.conn.as_ref(), &g, plan, tolerance);
    Ok(GaugeReport {
        f,
        f_staircase,
        hessian,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::ExprOneForm;

    #[test]
    fn gauge_jet_matches_form() {
        let form: OneForm = Arc::new(ExprOneForm::parse(&["-2*x0/(x0^2+x1^2)", "-2*x1/(x0^2+x1^2)"]).unwrap());
        let g = GaugeScalar::new(form.clone(), vec![1.0, 0.0]);
        let p = [1.3, 0.4];
        let j = g.eval(&Jet::identity_point(&p, 2)).unwrap();
        let r2: f64 = p[0] * p[0] + p[1] * p[1];
        assert!((j.value() + r2.ln()).abs() < 1e-12);
        let th = form.eval(&Jet::identity_point(&p, 1)).unwrap();
        for i in 0..2 {
            assert!((j.grad(i) - th[i].value()).abs() < 1e-12);
            for k in 0..2 {
                assert!((j.hess(i, k) - th[i].grad(k)).abs() < 1e-12);
            }
        }
    }
}
