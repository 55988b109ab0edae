//! Induced structure on a level hypersurface of a potential.
//!
//! Along `x(u)` the ambient derivative splits as
//! `∇_a ∂_b x = D^c_ab ∂_c x + h_ab E`, which is solved pointwise for the
//! induced connection `D` and second fundamental form `h`. The surface metric
//! is the pullback of `Hess φ`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::expr::{EvalError, Expression};
use crate::geom::sample::{evaluate, sample_points};
use crate::geom::{
    at_chart_point, Chart, Connection, ConnectionField, Metric, MetricField, SamplePlan, Scalar, Vector,
};
use crate::jet::{self, Jet};

use super::{HessianMetric, HesstatError, StatisticalStructure};

/// Parametrization `u ↦ x(u)` of a hypersurface by expressions in `u`.
#[derive(Clone, Debug)]
pub struct SurfaceMap {
    pub chart: Chart,
    pub components: Vec<Expression>,
}

impl SurfaceMap {
    pub fn new(chart: Chart, components: Vec<Expression>) -> Result<Self, HesstatError> {
        if components.len() != chart.dim() + 1 {
            return Err(HesstatError::NotHypersurface);
        }
        if let Some(e) = components.iter().find(|e| e.dim() != chart.dim()) {
            return Err(HesstatError::Dimension(format!(
                "surface component has dimension {}, chart {}",
                e.dim(),
                chart.dim()
            )));
        }
        Ok(SurfaceMap { chart, components })
    }

    pub fn parse(chart: Chart, src: &[&str]) -> Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        let m = chart.dim();
        let comps = src
            .iter()
            .map(|s| Expression::parse(s, m))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(chart, comps)?)
    }

    pub fn ambient_dim(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, u: &[Jet]) -> Result<Vec<Jet>, EvalError> {
        self.components.iter().map(|e| e.eval_jets(u)).collect()
    }
}

struct Decomposition {
    conn: Connection,
    transversal: Vector,
    map: SurfaceMap,
}

impl Decomposition {
    /// `D^c_ab` (m³ entries) followed by `h_ab` (m² entries).
    fn eval(&self, u: &[Jet]) -> Result<Vec<Jet>, EvalError> {
        let m = self.map.chart.dim();
        let n = m + 1;
        let k = jet::point_order(u);
        at_chart_point(u, 2, |id| {
            let x = self.map.eval(id)?;
            let jac: Vec<Jet> = (0..n * m).map(|ia| x[ia / m].derivative(ia % m)).collect();
            let xk: Vec<Jet> = x.iter().map(|j| j.truncate(k)).collect();
            let gamma = if self.conn.is_flat_affine() {
                None
            } else {
                Some(self.conn.eval(&xk)?)
            };
            let e = self.transversal.eval(&xk)?;
            let mut a = Vec::with_capacity(n * n);
            for i in 0..n {
                for c in 0..m {
                    a.push(jac[i * m + c].truncate(k));
                }
                a.push(e[i].truncate(k));
            }
            let mut b = Vec::with_capacity(n * m * m);
            for i in 0..n {
                for p in 0..m {
                    for q in 0..m {
                        let mut v = jac[i * m + p].derivative(q);
                        if let Some(g) = &gamma {
                            for j in 0..n {
                                for l in 0..n {
                                    let t = &jac[j * m + p] * &jac[l * m + q];
                                    v = &v + &(&g[(i * n + j) * n + l] * &t);
                                }
                            }
                        }
                        b.push(v.truncate(k));
                    }
                }
            }
            jet::solve(&a, &b, n, m * m)
                .ok_or_else(|| EvalError::Singular("transversal field is tangent to the surface".into()))
        })
    }
}

struct InducedConnection(Arc<Decomposition>);

impl ConnectionField for InducedConnection {
    fn dim(&self) -> usize {
        self.0.map.chart.dim()
    }

    fn eval(&self, u: &[Jet]) -> Result<Vec<Jet>, EvalError> {
        let m = self.dim();
        let mut all = self.0.eval(u)?;
        all.truncate(m * m * m);
        Ok(all)
    }
}

struct SecondFundamentalForm(Arc<Decomposition>);

impl MetricField for SecondFundamentalForm {
    fn dim(&self) -> usize {
        self.0.map.chart.dim()
    }

    fn eval(&self, u: &[Jet]) -> Result<Vec<Jet>, EvalError> {
        let m = self.dim();
        Ok(self.0.eval(u)?.split_off(m * m * m))
    }
}

/// `Jᵀ g(x(u)) J`.
pub struct PullbackMetric {
    metric: Metric,
    map: SurfaceMap,
}

impl PullbackMetric {
    pub fn new(metric: Metric, map: SurfaceMap) -> Self {
        PullbackMetric { metric, map }
    }
}

impl MetricField for PullbackMetric {
    fn dim(&self) -> usize {
        self.map.chart.dim()
    }

    fn eval(&self, u: &[Jet]) -> Result<Vec<Jet>, EvalError> {
        let m = self.dim();
        let n = m + 1;
        let k = jet::point_order(u);
        at_chart_point(u, 1, |id| {
            let x = self.map.eval(id)?;
            let jac: Vec<Jet> = (0..n * m).map(|ia| x[ia / m].derivative(ia % m)).collect();
            let xk: Vec<Jet> = x.iter().map(|j| j.truncate(k)).collect();
            let g = self.metric.eval(&xk)?;
            let mut out = Vec::with_capacity(m * m);
            for a in 0..m {
                for b in 0..m {
                    let mut acc = Jet::constant(m, k, 0.0);
                    for i in 0..n {
                        for j in 0..n {
                            acc += &(&g[i * n + j] * &(&jac[i * m + a] * &jac[j * m + b]));
                        }
                    }
                    out.push(acc);
                }
            }
            Ok(out)
        })
    }
}

pub struct LevelSet {
    /// Induced connection with the pulled-back `Hess φ`.
    pub structure: StatisticalStructure,
    pub second_fundamental_form: Metric,
    /// Value of `φ` on the surface (mean over samples).
    pub level: f64,
}

/// Decomposes `conn` along the surface `map` inside a level set of `phi`,
/// using `transversal` as the normal direction.
pub fn level_set_statistical(
    conn: Connection,
    phi: Scalar,
    map: SurfaceMap,
    transversal: Vector,
    plan: &SamplePlan,
    tolerance: f64,
) -> Result<LevelSet, HesstatError> {
    let n = map.ambient_dim();
    for (what, d) in [
        ("connection", conn.dim()),
        ("potential", phi.dim()),
        ("transversal", transversal.dim()),
    ] {
        if d != n {
            return Err(HesstatError::Dimension(format!(
                "{what} has dimension {d}, surface lives in dimension {n}"
            )));
        }
    }
    let m = map.chart.dim();
    let points = sample_points(&map.chart, plan);
    let probes = evaluate(&points, |u| {
        let x = map.eval(&Jet::identity_point(u, 1))?;
        let xv = jet::values(&x);
        let level = phi.eval(&Jet::identity_point(&xv, 0))?.value();
        let e = crate::geom::ops::vector_at(transversal.as_ref(), &xv)?;
        let mut a = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for c in 0..m {
                a[(i, c)] = x[i].grad(c);
            }
            a[(i, m)] = e.data()[i];
        }
        for mut col in a.column_iter_mut() {
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
            }
        }
        let sv = a.singular_values().min();
        Ok((level, sv))
    });
    let ok: Vec<(usize, f64, f64)> = probes
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.as_ref().ok().map(|&(l, s)| (i, l, s)))
        .collect();
    if ok.is_empty() {
        let err = probes
            .into_iter()
            .find_map(Result::err)
            .unwrap_or(EvalError::Domain("no samples".into()));
        return Err(err.into());
    }
    let level = ok.iter().map(|t| t.1).sum::<f64>() / ok.len() as f64;
    let dev = ok
        .iter()
        .map(|t| (t.1 - level).abs() / (1.0 + level.abs()))
        .fold(0.0, f64::max);
    if dev > tolerance {
        return Err(HesstatError::LevelSet(dev));
    }
    if let Some(&(i, _, _)) = ok.iter().find(|t| t.2 < 1e-8) {
        return Err(HesstatError::Transversality(points[i].clone()));
    }
    let ambient_metric: Metric = Arc::new(HessianMetric::new(conn.clone(), phi));
    let dec = Arc::new(Decomposition {
        conn,
        transversal,
        map: map.clone(),
    });
    let structure = StatisticalStructure::new(
        map.chart.clone(),
        Arc::new(InducedConnection(dec.clone())),
        Arc::new(PullbackMetric::new(ambient_metric, map)),
    )?;
    Ok(LevelSet {
        structure,
        second_fundamental_form: Arc::new(SecondFundamentalForm(dec)),
        level,
    })
}
