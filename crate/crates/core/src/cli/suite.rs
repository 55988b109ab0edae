//! Runs the checks of a scene and assembles a report.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cones::{
    characteristic_function, closed_form_expression, cone_lch_structure, default_chart, default_surface_map,
    surface_statistical_structure, ConeSpec, PsiMethod, DEFAULT_MC_SAMPLES,
};
use crate::expr::Expression;
use crate::geom::sample::{sample_check, sample_components};
use crate::geom::{
    ops, relative_diff, Chart, CheckReport, Connection, ExprConnection, ExprVectorField, Metric, SamplePlan, Vector,
};
use crate::hesstat::{
    build_cone_structure, check_affine, check_hessian_structure, check_killing, check_potential_field, check_radiant,
    check_self_similar, check_statistical, estimate_constant_curvature, fiber_recovery, positive_definite_check,
    potential_identity_residual, ConeStructure, HessianMetric, StatisticalStructure,
};
use crate::lch::{
    build_mapping_torus, check_lch, koszul_check, lee_constants, lee_identity_residual, lee_perturbation_probe,
    local_hessian_gauge, metric_from_lee, monodromy_rank, pullback_residuals, LCHStructure, MappingTorus,
    MappingTorusSpec, MonodromyCharacter, DEFAULT_EPS_HI,
};

use super::scene::{CheckKind, CheckSpec, Expect, MethodName, Scene, Sign, StructureSpec};

pub use crate::geom::sample::DEFAULT_TOLERANCE;
/// Smallest `ε_max` a perturbation check accepts unless overridden.
pub const DEFAULT_MIN_EPS: f64 = 1e-3;
const DEFAULT_FACTORS: [f64; 3] = [0.5, 2.0, 7.0];
/// Allowed Monte Carlo deviation in reported standard errors.
const MC_SIGMAS: f64 = 3.0;

/// Command-line overrides. A tolerance given on an individual check wins
/// over `tolerance`, which wins over [`DEFAULT_TOLERANCE`].
#[derive(Clone, Debug)]
pub struct Overrides {
    pub tolerance: Option<f64>,
    pub plan: SamplePlan,
    pub mc_samples: usize,
}

impl Default for Overrides {
    fn default() -> Self {
        Overrides {
            tolerance: None,
            plan: SamplePlan::default(),
            mc_samples: DEFAULT_MC_SAMPLES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub label: String,
    pub check: String,
    pub expect: Expect,
    /// The underlying report agrees with `expect`.
    pub ok: bool,
    pub report: CheckReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scene: String,
    pub version: String,
    pub seed: u64,
    pub samples: usize,
    pub margin: f64,
    pub mc_samples: usize,
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Exit status: 0 when every check agrees with its expectation, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }

    /// One line per check.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.ok { "ok  " } else { "FAIL" };
            let expect = match c.expect {
                Expect::Pass => "",
                Expect::Fail => " (expected to fail)",
            };
            out.push_str(&format!(
                "{status} {:<28} max_residual={:e} tol={:e}{expect}\n",
                c.label, c.report.max_residual, c.report.tolerance
            ));
            for d in &c.report.diagnostics {
                out.push_str(&format!("       {d}\n"));
            }
        }
        out.push_str(&format!(
            "{}: {} of {} checks ok\n",
            self.scene,
            self.checks.iter().filter(|c| c.ok).count(),
            self.checks.len()
        ));
        out
    }
}

enum Built {
    Statistical(StatisticalStructure),
    Lch(LCHStructure),
    Cone {
        cone: ConeStructure,
        report: CheckReport,
        base: StatisticalStructure,
    },
    Torus {
        torus: Box<MappingTorus>,
        base: StatisticalStructure,
    },
}

impl Built {
    fn describe(&self) -> &'static str {
        match self {
            Built::Statistical(_) => "statistical",
            Built::Lch(_) => "lch",
            Built::Cone { .. } => "cone",
            Built::Torus { .. } => "mapping_torus",
        }
    }

    fn triple(&self) -> (&Chart, &Connection, &Metric) {
        match self {
            Built::Statistical(s) => (&s.chart, &s.conn, &s.metric),
            Built::Lch(s) => (&s.chart, &s.conn, &s.metric),
            Built::Cone { cone, .. } => (&cone.chart, &cone.conn, &cone.metric),
            Built::Torus { torus, .. } => (&torus.structure.chart, &torus.structure.conn, &torus.structure.metric),
        }
    }

    fn statistical(&self) -> StatisticalStructure {
        let (chart, conn, metric) = self.triple();
        StatisticalStructure {
            chart: chart.clone(),
            conn: conn.clone(),
            metric: metric.clone(),
        }
    }

    fn lch(&self) -> Option<&LCHStructure> {
        match self {
            Built::Lch(s) => Some(s),
            Built::Torus { torus, .. } => Some(&torus.structure),
            _ => None,
        }
    }

    fn cone(&self) -> Option<(&ConeStructure, &StatisticalStructure)> {
        match self {
            Built::Cone { cone, base, .. } => Some((cone, base)),
            Built::Torus { torus, base } => Some((&torus.cone, base)),
            _ => None,
        }
    }
}

struct Runner<'a> {
    scene: &'a Scene,
    overrides: &'a Overrides,
    built: BTreeMap<String, Result<Built, String>>,
}

pub fn run_suite(scene: &Scene, overrides: &Overrides) -> Report {
    let mut runner = Runner {
        scene,
        overrides,
        built: BTreeMap::new(),
    };
    for (name, spec) in &scene.structures {
        let b = runner.build(spec);
        runner.built.insert(name.clone(), b);
    }
    let checks: Vec<CheckOutcome> = scene.checks.iter().map(|c| runner.run(c)).collect();
    let plan = &overrides.plan;
    Report {
        scene: scene.name.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: plan.seed(),
        samples: plan.count(),
        margin: plan.margin(),
        mc_samples: overrides.mc_samples,
        passed: checks.iter().all(|c| c.ok),
        checks,
    }
}

fn sanitize(r: &mut CheckReport) {
    let fix = |v: &mut f64| {
        if !v.is_finite() {
            *v = f64::MAX;
        }
    };
    fix(&mut r.max_residual);
    fix(&mut r.mean_residual);
    fix(&mut r.tolerance);
    r.extra.retain(|_, v| v.is_finite());
}

fn euler(n: usize) -> Vector {
    let comps = (0..n)
        .map(|i| Expression::parse(&format!("x{i}"), n).expect("valid literal"))
        .collect();
    Arc::new(ExprVectorField::new(comps).expect("consistent dimensions"))
}

impl Runner<'_> {
    fn default_tolerance(&self) -> f64 {
        self.overrides.tolerance.unwrap_or(DEFAULT_TOLERANCE)
    }

    fn plan(&self) -> &SamplePlan {
        &self.overrides.plan
    }

    fn base(&self, name: &str) -> Result<StatisticalStructure, String> {
        match &self.built[name] {
            Ok(Built::Statistical(s)) => Ok(s.clone()),
            Ok(other) => Err(format!("base \"{name}\" is a {} structure", other.describe())),
            Err(e) => Err(format!("base \"{name}\" failed to build: {e}")),
        }
    }

    fn build(&self, spec: &StructureSpec) -> Result<Built, String> {
        let sc = self.scene;
        let chart = || sc.chart.clone().ok_or_else(|| "no chart declared".to_string());
        let plan = self.plan();
        let tol = |t: &Option<super::scene::Num>| t.map(|n| n.0).unwrap_or(self.default_tolerance());
        match spec {
            StructureSpec::Statistical { connection, metric } => {
                StatisticalStructure::new(chart()?, sc.connections[connection].clone(), sc.metrics[metric].clone())
                    .map(Built::Statistical)
                    .map_err(|e| e.to_string())
            }
            StructureSpec::Lch {
                connection,
                metric,
                lee_form,
            } => LCHStructure::new(
                chart()?,
                sc.connections[connection].clone(),
                sc.metrics[metric].clone(),
                sc.forms[lee_form].clone(),
            )
            .map(Built::Lch)
            .map_err(|e| e.to_string()),
            StructureSpec::LeeMetric {
                connection,
                lee_form,
                u,
            } => metric_from_lee(
                &chart()?,
                sc.connections[connection].clone(),
                sc.forms[lee_form].clone(),
                u.0,
                plan,
            )
            .map(Built::Lch)
            .map_err(|e| e.to_string()),
            StructureSpec::Cone {
                base,
                lambda,
                s_range,
                tolerance,
            } => {
                let base = self.base(base)?;
                let (cone, report) =
                    build_cone_structure(&base, lambda.0, (s_range[0].0, s_range[1].0), plan, tol(tolerance))
                        .map_err(|e| e.to_string())?;
                Ok(Built::Cone { cone, report, base })
            }
            StructureSpec::MappingTorus {
                base,
                automorphism,
                q,
                lambda,
                tolerance,
            } => {
                let base = self.base(base)?;
                let n = base.dim();
                let automorphism = automorphism
                    .iter()
                    .map(|s| Expression::parse(s, n).map_err(|e| e.to_string()))
                    .collect::<Result<Vec<_>, _>>()?;
                let spec = MappingTorusSpec {
                    base: base.clone(),
                    automorphism,
                    q: q.0,
                    lambda: lambda.0,
                };
                let torus = build_mapping_torus(&spec, plan, tol(tolerance)).map_err(|e| e.to_string())?;
                Ok(Built::Torus {
                    torus: Box::new(torus),
                    base,
                })
            }
            StructureSpec::ConeLch { cone } => {
                let c = &sc.cones[cone];
                let chart = default_chart(c).map_err(|e| e.to_string())?;
                cone_lch_structure(c, &chart).map(Built::Lch).map_err(|e| e.to_string())
            }
            StructureSpec::ConeSurface { cone, tolerance } => {
                let c = &sc.cones[cone];
                let map = default_surface_map(c).map_err(|e| e.to_string())?;
                surface_statistical_structure(c, map, plan, tol(tolerance))
                    .map(|ls| Built::Statistical(ls.structure))
                    .map_err(|e| e.to_string())
            }
        }
    }

    fn run(&self, spec: &CheckSpec) -> CheckOutcome {
        let tolerance = spec.tolerance.unwrap_or(self.default_tolerance());
        let kind = spec.kind.kind();
        let mut report = match self.evaluate(&spec.kind, tolerance) {
            Ok(r) => r,
            Err(e) => CheckReport::failure(kind, tolerance, e),
        };
        sanitize(&mut report);
        let label = spec.label.clone().unwrap_or_else(|| match spec.kind.target() {
            Some(t) => format!("{kind}:{t}"),
            None => kind.to_string(),
        });
        CheckOutcome {
            label,
            check: kind.into(),
            expect: spec.expect,
            ok: report.passed == (spec.expect == Expect::Pass),
            report,
        }
    }

    fn target(&self, name: &str) -> Result<&Built, String> {
        match &self.built[name] {
            Ok(b) => Ok(b),
            Err(e) => Err(format!("structure \"{name}\" failed to build: {e}")),
        }
    }

    fn field(&self, built: &Built, name: &str) -> Result<Vector, String> {
        match name {
            "lee" => built
                .lch()
                .map(LCHStructure::lee_field)
                .ok_or_else(|| format!("\"lee\" needs an LCH structure, got {}", built.describe())),
            "radial" => built
                .cone()
                .map(|(c, _)| c.radial.clone())
                .ok_or_else(|| format!("\"radial\" needs a cone structure, got {}", built.describe())),
            "euler" => Ok(euler(built.triple().0.dim())),
            other => Ok(self.scene.vectors[other].clone()),
        }
    }

    fn evaluate(&self, kind: &CheckKind, tol: f64) -> Result<CheckReport, String> {
        let plan = self.plan();
        let need_lch = |b: &'_ Built| -> Result<LCHStructure, String> {
            b.lch()
                .cloned()
                .ok_or_else(|| format!("check needs an LCH structure, got {}", b.describe()))
        };
        let need_cone = |b: &Built| -> Result<(ConeStructure, StatisticalStructure), String> {
            b.cone()
                .map(|(c, s)| (c.clone(), s.clone()))
                .ok_or_else(|| format!("check needs a cone structure, got {}", b.describe()))
        };
        Ok(match kind {
            CheckKind::Hessian { structure } => {
                let (chart, conn, metric) = self.target(structure)?.triple();
                check_hessian_structure(chart, conn.as_ref(), metric.as_ref(), plan, tol)
            }
            CheckKind::Statistical { structure } => {
                check_statistical(&self.target(structure)?.statistical(), plan, tol)
            }
            CheckKind::Curvature {
                structure,
                expected,
                sign,
            } => {
                let s = self.target(structure)?.statistical();
                let est = estimate_constant_curvature(&s, plan).map_err(|e| e.to_string())?;
                let mut r = est.to_report(tol);
                r.set_extra("c", est.c);
                if let Some(e) = expected {
                    let dev = (est.c - e.0).abs();
                    r.set_extra("expected", e.0);
                    r.set_extra("deviation", dev);
                    if dev > r.max_residual {
                        r.max_residual = dev;
                    }
                    if dev > tol {
                        r.passed = false;
                        r.diagnostics
                            .push(format!("c = {} differs from {} by {dev:e}", est.c, e.0));
                    }
                }
                let wrong = match sign {
                    Some(Sign::Negative) => est.c >= 0.0,
                    Some(Sign::Positive) => est.c <= 0.0,
                    None => false,
                };
                if wrong {
                    r.passed = false;
                    r.diagnostics.push(format!("c = {} has the wrong sign", est.c));
                }
                r
            }
            CheckKind::Radiant {
                structure,
                field,
                expected,
            } => {
                let b = self.target(structure)?;
                let xi = self.field(b, field)?;
                let (chart, conn, _) = b.triple();
                let mut r = check_radiant(chart, conn.as_ref(), xi.as_ref(), plan, tol);
                if let (Some(e), Some(l)) = (expected, r.extra("lambda")) {
                    let dev = (l - e.0).abs() / (1.0 + e.0.abs());
                    r.set_extra("lambda_error", dev);
                    if dev > r.max_residual {
                        r.max_residual = dev;
                        r.passed = dev <= tol && r.passed;
                    }
                }
                r
            }
            CheckKind::SelfSimilar { structure, field } => {
                let b = self.target(structure)?;
                let xi = self.field(b, field)?;
                let (chart, _, metric) = b.triple();
                check_self_similar(chart, metric.as_ref(), xi.as_ref(), plan, tol)
            }
            CheckKind::Potential { structure, field } => {
                let b = self.target(structure)?;
                let xi = self.field(b, field)?;
                let (chart, _, metric) = b.triple();
                check_potential_field(chart, metric.clone(), xi, plan, tol)
            }
            CheckKind::Killing { structure, field } => {
                let b = self.target(structure)?;
                let xi = self.field(b, field)?;
                let (chart, _, metric) = b.triple();
                check_killing(chart, metric.as_ref(), xi.as_ref(), plan, tol)
            }
            CheckKind::Affine { structure, field } => {
                let b = self.target(structure)?;
                let xi = self.field(b, field)?;
                let (chart, conn, _) = b.triple();
                check_affine(chart, conn.as_ref(), xi.as_ref(), plan, tol)
            }
            CheckKind::Lch { structure } => check_lch(&need_lch(self.target(structure)?)?, plan, tol),
            CheckKind::LeeConstants { structure, a, mu, u } => {
                let s = need_lch(self.target(structure)?)?;
                let c = lee_constants(&s, plan, tol).map_err(|e| e.to_string())?;
                let mut r = c.to_report(tol);
                for (key, got, want) in [("a", c.a, a), ("mu", c.mu, mu), ("u", c.u, u)] {
                    if let Some(w) = want {
                        let dev = (got - w.0).abs() / (1.0 + w.0.abs());
                        r.set_extra(format!("{key}_error"), dev);
                        r.max_residual = r.max_residual.max(dev);
                        if dev > tol {
                            r.passed = false;
                            r.diagnostics.push(format!("{key} = {got} but {} was expected", w.0));
                        }
                    }
                }
                r
            }
            CheckKind::LeeIdentity { structure } => {
                let s = need_lch(self.target(structure)?)?;
                let c = lee_constants(&s, plan, tol).map_err(|e| e.to_string())?;
                lee_identity_residual(&s, &c, plan, tol)
            }
            CheckKind::MetricFromLee { structure } => {
                let s = need_lch(self.target(structure)?)?;
                let c = lee_constants(&s, plan, tol).map_err(|e| e.to_string())?;
                let t = metric_from_lee(&s.chart, s.conn.clone(), s.lee_form.clone(), c.u, plan)
                    .map_err(|e| e.to_string())?;
                sample_check(
                    "metric_from_lee",
                    |p| {
                        Ok(relative_diff(
                            &ops::metric_at(t.metric.as_ref(), p)?,
                            &ops::metric_at(s.metric.as_ref(), p)?,
                        ))
                    },
                    &s.chart,
                    plan,
                    tol,
                )
                .with_extra("u", c.u)
            }
            CheckKind::Koszul { structure } => {
                let s = need_lch(self.target(structure)?)?;
                koszul_check(&s.chart, s.conn.clone(), s.lee_form.clone(), plan, tol)
            }
            CheckKind::Cone { structure } => match self.target(structure)? {
                Built::Cone { report, .. } => report.clone(),
                Built::Torus { torus, .. } => torus.cone_report.clone(),
                b => return Err(format!("check needs a cone structure, got {}", b.describe())),
            },
            CheckKind::PotentialIdentity { structure } => {
                let (cone, _) = need_cone(self.target(structure)?)?;
                potential_identity_residual(&cone, plan, tol)
            }
            CheckKind::Fiber { structure } => {
                let (cone, base) = need_cone(self.target(structure)?)?;
                fiber_recovery(&cone, &base, plan, tol).map_err(|e| e.to_string())?.1
            }
            CheckKind::Seam { structure } => match self.target(structure)? {
                Built::Torus { torus, .. } => torus.seam_report.clone(),
                b => return Err(format!("check needs a mapping torus, got {}", b.describe())),
            },
            CheckKind::Invariance { structure, map } => {
                let b = self.target(structure)?;
                let (chart, conn, metric) = b.triple();
                let n = chart.dim();
                let map = map
                    .iter()
                    .map(|s| Expression::parse(s, n).map_err(|e| e.to_string()))
                    .collect::<Result<Vec<_>, _>>()?;
                let form = b.lch().map(|s| s.lee_form.clone());
                sample_components(
                    "invariance",
                    &["metric", "lee_form", "connection"],
                    |p| {
                        let r =
                            pullback_residuals(&map, Some(metric.as_ref()), form.as_deref(), Some(conn.as_ref()), p)?;
                        Ok(vec![r.metric, r.form, r.connection])
                    },
                    chart,
                    plan,
                    tol,
                )
            }
            CheckKind::Gauge {
                structure,
                base,
                point,
                radius,
            } => {
                let s = need_lch(self.target(structure)?)?;
                let base: Vec<f64> = base.iter().map(|n| n.0).collect();
                let point: Vec<f64> = point.iter().map(|n| n.0).collect();
                let g = local_hessian_gauge(&s, &base, &point, radius.0, plan, tol).map_err(|e| e.to_string())?;
                let mut r = g.hessian;
                r.name = "gauge".into();
                r.set_extra("f", g.f);
                r.set_extra("f_staircase", g.f_staircase);
                r
            }
            CheckKind::Perturbation {
                structure,
                alpha,
                eps_hi,
                min_eps,
            } => {
                let s = need_lch(self.target(structure)?)?;
                let alpha = self.scene.forms[alpha].clone();
                let eps_hi = eps_hi.map_or(DEFAULT_EPS_HI, |n| n.0);
                let min_eps = min_eps.map_or(DEFAULT_MIN_EPS, |n| n.0);
                let p = lee_perturbation_probe(&s, alpha, eps_hi, plan, tol).map_err(|e| e.to_string())?;
                let half_ok = p.at_half.as_ref().is_some_and(|r| r.passed);
                let passed = p.eps_max >= min_eps && half_ok;
                let mut r = CheckReport::from_residuals("perturbation", tol, &[Ok(if passed { 0.0 } else { 1.0 })]);
                r.set_extra("eps_max", p.eps_max);
                r.set_extra("eps_hi", p.eps_hi);
                r.set_extra("min_eps", min_eps);
                r.set_extra("u_prime", p.u_prime);
                r.set_extra("iterations", p.iterations as f64);
                if let Some(h) = &p.at_half {
                    r.set_extra("at_half.max_residual", h.max_residual);
                }
                r.diagnostics.extend(p.diagnostics);
                if p.eps_max < min_eps {
                    r.diagnostics
                        .push(format!("eps_max = {:e} is below the required {min_eps:e}", p.eps_max));
                }
                if !half_ok {
                    r.diagnostics.push("no accepted perturbation at eps_max / 2".into());
                }
                r
            }
            CheckKind::Psi {
                cone,
                point,
                method,
                expected,
            } => {
                let c = &self.scene.cones[cone];
                let x: Vec<f64> = point.iter().map(|n| n.0).collect();
                let method = match method {
                    MethodName::ClosedForm => PsiMethod::ClosedForm,
                    MethodName::MonteCarlo => PsiMethod::MonteCarlo {
                        samples: self.overrides.mc_samples,
                        seed: plan.seed(),
                    },
                };
                let v = characteristic_function(c, &x, method).map_err(|e| e.to_string())?;
                psi_report(v.value, v.stderr, expected.map(|n| n.0), tol)
            }
            CheckKind::Homogeneity { cone, point, factors } => {
                let c = &self.scene.cones[cone];
                let x: Vec<f64> = point.iter().map(|n| n.0).collect();
                let factors: Vec<f64> = factors
                    .as_ref()
                    .map(|f| f.iter().map(|n| n.0).collect())
                    .unwrap_or_else(|| DEFAULT_FACTORS.to_vec());
                homogeneity_report(c, &x, &factors, tol)?
            }
            CheckKind::Barrier { cone } => {
                let c = &self.scene.cones[cone];
                let psi = closed_form_expression(c).ok_or_else(|| format!("no closed form for {}", c.kind()))?;
                let n = c.dim();
                let log_psi = Expression::parse(&format!("log({psi})"), n).map_err(|e| e.to_string())?;
                let chart = default_chart(c).map_err(|e| e.to_string())?;
                let g = HessianMetric::new(Arc::new(ExprConnection::flat(n)), Arc::new(log_psi));
                positive_definite_check("barrier", &g, &chart, plan, tol)
            }
            CheckKind::Rank { exponents, expected } => {
                let src: Vec<&str> = exponents.iter().map(String::as_str).collect();
                let chi = MonodromyCharacter::parse_single_base(&src).map_err(|e| e.to_string())?;
                let rank = monodromy_rank(&chi);
                let ok = expected.is_none_or(|e| e == rank);
                let mut r = CheckReport::from_residuals("rank", tol, &[Ok(if ok { 0.0 } else { 1.0 })]);
                r.set_extra("rank", rank as f64);
                if let Some(e) = expected {
                    r.set_extra("expected", *e as f64);
                }
                r
            }
        })
    }
}

/// Closed forms and exact estimates must match to the tolerance. Estimates
/// with a nonzero standard error are compared against the bound
/// `3σ + 1e-12|e|`, which replaces the tolerance in the report.
fn psi_report(value: f64, stderr: f64, expected: Option<f64>, tol: f64) -> CheckReport {
    let mut r = match expected {
        None => CheckReport::from_residuals("psi", tol, &[Ok(0.0)]),
        Some(e) => {
            let dev = (value - e).abs();
            let mut r = if stderr > 0.0 {
                let bound = MC_SIGMAS * stderr + 1e-12 * e.abs();
                let mut r = CheckReport::from_residuals("psi", bound, &[Ok(dev)]);
                r.set_extra("sigmas", dev / stderr);
                r
            } else {
                CheckReport::from_residuals("psi", tol, &[Ok(dev / (1.0 + e.abs()))])
            };
            r.set_extra("expected", e);
            r
        }
    };
    r.set_extra("value", value);
    r.set_extra("stderr", stderr);
    r
}

fn homogeneity_report(c: &ConeSpec, x: &[f64], factors: &[f64], tol: f64) -> Result<CheckReport, String> {
    let n = c.dim() as i32;
    let psi = |p: &[f64]| characteristic_function(c, p, PsiMethod::ClosedForm).map(|v| v.value);
    let base = psi(x).map_err(|e| e.to_string())?;
    let mut residuals = Vec::new();
    for &t in factors {
        let y: Vec<f64> = x.iter().map(|v| t * v).collect();
        let scaled = psi(&y).map_err(|e| e.to_string())? * t.powi(n);
        residuals.push(Ok((scaled - base).abs() / (1.0 + base.abs())));
    }
    let mut r = CheckReport::from_residuals("homogeneity", tol, &residuals);
    r.set_extra("psi", base);
    Ok(r)
}
