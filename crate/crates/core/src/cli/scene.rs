//! Scene files: declared fields, structures and checks, in JSON.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::cones::ConeSpec;
use crate::expr::Expression;
use crate::geom::{
    Chart, Connection, ExprConnection, ExprMetric, ExprOneForm, ExprVectorField, LeviCivita, Metric, OneForm, Scalar,
    Vector,
};
use crate::hesstat::dual_connection;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("undeclared {kind} \"{name}\"")]
    Undeclared { kind: &'static str, name: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// A real number given either literally or as a constant expression such
/// as `"1+sqrt(2)"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Num(pub f64);

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(Num(v)),
            Raw::Text(s) => {
                let e = Expression::parse(&s, 1).map_err(serde::de::Error::custom)?;
                if e.arity() > 0 {
                    return Err(serde::de::Error::custom(format!("\"{s}\" is not a constant")));
                }
                let v = e.eval(&[0.0]).map_err(serde::de::Error::custom)?;
                Ok(Num(v))
            }
        }
    }
}

fn nums(v: &[Num]) -> Vec<f64> {
    v.iter().map(|n| n.0).collect()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub lo: Vec<Num>,
    pub hi: Vec<Num>,
    #[serde(default)]
    pub positive: Vec<bool>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConnectionSpec {
    Flat,
    /// `symbols[k][i][j] = Γ^k_ij`.
    Christoffel {
        symbols: Vec<Vec<Vec<String>>>,
    },
    LeviCivita {
        metric: String,
    },
    Dual {
        connection: String,
        metric: String,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StructureSpec {
    Statistical {
        connection: String,
        metric: String,
    },
    Lch {
        connection: String,
        metric: String,
        lee_form: String,
    },
    /// `g = u⁻¹(∇θ − θ⊗θ)`.
    LeeMetric {
        connection: String,
        lee_form: String,
        u: Num,
    },
    Cone {
        base: String,
        lambda: Num,
        #[serde(default = "default_s_range")]
        s_range: [Num; 2],
        #[serde(default)]
        tolerance: Option<Num>,
    },
    MappingTorus {
        base: String,
        automorphism: Vec<String>,
        q: Num,
        lambda: Num,
        #[serde(default)]
        tolerance: Option<Num>,
    },
    ConeLch {
        cone: String,
    },
    ConeSurface {
        cone: String,
        #[serde(default)]
        tolerance: Option<Num>,
    },
}

fn default_s_range() -> [Num; 2] {
    [Num(0.5), Num(2.0)]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Negative,
    Positive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    ClosedForm,
    MonteCarlo,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckKind {
    Hessian {
        structure: String,
    },
    Statistical {
        structure: String,
    },
    Curvature {
        structure: String,
        #[serde(default)]
        expected: Option<Num>,
        #[serde(default)]
        sign: Option<Sign>,
    },
    Radiant {
        structure: String,
        field: String,
        #[serde(default)]
        expected: Option<Num>,
    },
    SelfSimilar {
        structure: String,
        field: String,
    },
    Potential {
        structure: String,
        field: String,
    },
    Killing {
        structure: String,
        field: String,
    },
    Affine {
        structure: String,
        field: String,
    },
    Lch {
        structure: String,
    },
    LeeConstants {
        structure: String,
        #[serde(default)]
        a: Option<Num>,
        #[serde(default)]
        mu: Option<Num>,
        #[serde(default)]
        u: Option<Num>,
    },
    LeeIdentity {
        structure: String,
    },
    MetricFromLee {
        structure: String,
    },
    Koszul {
        structure: String,
    },
    Cone {
        structure: String,
    },
    PotentialIdentity {
        structure: String,
    },
    Fiber {
        structure: String,
    },
    Seam {
        structure: String,
    },
    Invariance {
        structure: String,
        map: Vec<String>,
    },
    Gauge {
        structure: String,
        base: Vec<Num>,
        point: Vec<Num>,
        radius: Num,
    },
    Perturbation {
        structure: String,
        alpha: String,
        #[serde(default)]
        eps_hi: Option<Num>,
        #[serde(default)]
        min_eps: Option<Num>,
    },
    Psi {
        cone: String,
        point: Vec<Num>,
        method: MethodName,
        #[serde(default)]
        expected: Option<Num>,
    },
    Homogeneity {
        cone: String,
        point: Vec<Num>,
        #[serde(default)]
        factors: Option<Vec<Num>>,
    },
    Barrier {
        cone: String,
    },
    Rank {
        exponents: Vec<String>,
        #[serde(default)]
        expected: Option<usize>,
    },
}

impl CheckKind {
    pub fn kind(&self) -> &'static str {
        match self {
            CheckKind::Hessian { .. } => "hessian",
            CheckKind::Statistical { .. } => "statistical",
            CheckKind::Curvature { .. } => "curvature",
            CheckKind::Radiant { .. } => "radiant",
            CheckKind::SelfSimilar { .. } => "self_similar",
            CheckKind::Potential { .. } => "potential",
            CheckKind::Killing { .. } => "killing",
            CheckKind::Affine { .. } => "affine",
            CheckKind::Lch { .. } => "lch",
            CheckKind::LeeConstants { .. } => "lee_constants",
            CheckKind::LeeIdentity { .. } => "lee_identity",
            CheckKind::MetricFromLee { .. } => "metric_from_lee",
            CheckKind::Koszul { .. } => "koszul",
            CheckKind::Cone { .. } => "cone",
            CheckKind::PotentialIdentity { .. } => "potential_identity",
            CheckKind::Fiber { .. } => "fiber",
            CheckKind::Seam { .. } => "seam",
            CheckKind::Invariance { .. } => "invariance",
            CheckKind::Gauge { .. } => "gauge",
            CheckKind::Perturbation { .. } => "perturbation",
            CheckKind::Psi { .. } => "psi",
            CheckKind::Homogeneity { .. } => "homogeneity",
            CheckKind::Barrier { .. } => "barrier",
            CheckKind::Rank { .. } => "rank",
        }
    }

    /// Structure, cone, or nothing.
    pub fn target(&self) -> Option<&str> {
        match self {
            CheckKind::Hessian { structure }
            | CheckKind::Statistical { structure }
            | CheckKind::Curvature { structure, .. }
            | CheckKind::Radiant { structure, .. }
            | CheckKind::SelfSimilar { structure, .. }
            | CheckKind::Potential { structure, .. }
            | CheckKind::Killing { structure, .. }
            | CheckKind::Affine { structure, .. }
            | CheckKind::Lch { structure }
            | CheckKind::LeeConstants { structure, .. }
            | CheckKind::LeeIdentity { structure }
            | CheckKind::MetricFromLee { structure }
            | CheckKind::Koszul { structure }
            | CheckKind::Cone { structure }
            | CheckKind::PotentialIdentity { structure }
            | CheckKind::Fiber { structure }
            | CheckKind::Seam { structure }
            | CheckKind::Invariance { structure, .. }
            | CheckKind::Gauge { structure, .. }
            | CheckKind::Perturbation { structure, .. } => Some(structure),
            CheckKind::Psi { cone, .. } | CheckKind::Homogeneity { cone, .. } | CheckKind::Barrier { cone } => {
                Some(cone)
            }
            CheckKind::Rank { .. } => None,
        }
    }

    fn field(&self) -> Option<&str> {
        match self {
            CheckKind::Radiant { field, .. }
            | CheckKind::SelfSimilar { field, .. }
            | CheckKind::Potential { field, .. }
            | CheckKind::Killing { field, .. }
            | CheckKind::Affine { field, .. } => Some(field),
            _ => None,
        }
    }

    fn is_cone_check(&self) -> bool {
        matches!(
            self,
            CheckKind::Psi { .. } | CheckKind::Homogeneity { .. } | CheckKind::Barrier { .. }
        )
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    #[default]
    Pass,
    Fail,
}

/// One entry of the check list. `expect: "fail"` marks a negative control:
/// the entry succeeds when the underlying check fails.
#[derive(Clone, Debug, Deserialize)]
#[serde(try_from = "Map<String, Value>")]
pub struct CheckSpec {
    pub kind: CheckKind,
    pub label: Option<String>,
    pub tolerance: Option<f64>,
    pub expect: Expect,
}

impl TryFrom<Map<String, Value>> for CheckSpec {
    type Error = String;

    fn try_from(mut m: Map<String, Value>) -> Result<Self, String> {
        let label = m
            .remove("label")
            .map(serde_json::from_value::<String>)
            .transpose()
            .map_err(|e| format!("label: {e}"))?;
        let tolerance = m
            .remove("tolerance")
            .map(serde_json::from_value::<Num>)
            .transpose()
            .map_err(|e| format!("tolerance: {e}"))?
            .map(|n| n.0);
        let expect = m
            .remove("expect")
            .map(serde_json::from_value::<Expect>)
            .transpose()
            .map_err(|e| format!("expect: {e}"))?
            .unwrap_or_default();
        let kind = serde_json::from_value(Value::Object(m)).map_err(|e| e.to_string())?;
        Ok(CheckSpec {
            kind,
            label,
            tolerance,
            expect,
        })
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    chart: Option<ChartSpec>,
    #[serde(default)]
    scalars: BTreeMap<String, String>,
    #[serde(default)]
    metrics: BTreeMap<String, Vec<Vec<String>>>,
    #[serde(default)]
    forms: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    vectors: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    connections: BTreeMap<String, ConnectionSpec>,
    #[serde(default)]
    cones: BTreeMap<String, ConeSpec>,
    #[serde(default)]
    structures: BTreeMap<String, StructureSpec>,
    checks: Vec<CheckSpec>,
}

/// A validated scene with every expression parsed and every reference
/// resolved.
#[derive(Clone)]
pub struct Scene {
    pub name: String,
    pub description: String,
    pub chart: Option<Chart>,
    pub scalars: BTreeMap<String, Scalar>,
    pub metrics: BTreeMap<String, Metric>,
    pub forms: BTreeMap<String, OneForm>,
    pub vectors: BTreeMap<String, Vector>,
    pub connections: BTreeMap<String, Connection>,
    pub cones: BTreeMap<String, ConeSpec>,
    /// In dependency order.
    pub structures: Vec<(String, StructureSpec)>,
    pub checks: Vec<CheckSpec>,
}

/// Built-in vector fields usable in checks.
pub const BUILTIN_FIELDS: [&str; 3] = ["lee", "radial", "euler"];

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    let path = path.as_ref();
    let src = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scene(&src)
}

pub fn parse_scene(src: &str) -> Result<Scene, SceneError> {
    let file: SceneFile = serde_json::from_str(src).map_err(|e| SceneError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    compile(file)
}

fn parse_expr(what: &str, src: &str, dim: usize) -> Result<Expression, SceneError> {
    Expression::parse(src, dim).map_err(|e| SceneError::Invalid(format!("{what}: {e}")))
}

fn need_dim(chart: &Option<Chart>, what: &str) -> Result<usize, SceneError> {
    chart
        .as_ref()
        .map(Chart::dim)
        .ok_or_else(|| SceneError::Invalid(format!("{what} needs a chart")))
}

fn compile(file: SceneFile) -> Result<Scene, SceneError> {
    let chart = match &file.chart {
        None => None,
        Some(c) => {
            let n = c.lo.len();
            let positive = if c.positive.is_empty() {
                vec![false; n]
            } else {
                c.positive.clone()
            };
            Some(
                Chart::new(nums(&c.lo), nums(&c.hi), positive)
                    .map_err(|e| SceneError::Invalid(format!("chart: {e}")))?,
            )
        }
    };

    let mut scalars = BTreeMap::new();
    for (name, src) in &file.scalars {
        let n = need_dim(&chart, &format!("scalar \"{name}\""))?;
        let e: Scalar = Arc::new(parse_expr(&format!("scalar \"{name}\""), src, n)?);
        scalars.insert(name.clone(), e);
    }

    let mut metrics = BTreeMap::new();
    for (name, rows) in &file.metrics {
        let what = format!("metric \"{name}\"");
        let n = need_dim(&chart, &what)?;
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(SceneError::Dimension(format!("{what} must be {n}×{n}")));
        }
        let parsed = rows
            .iter()
            .map(|r| r.iter().map(|s| parse_expr(&what, s, n)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        let m: Metric = Arc::new(ExprMetric::new(parsed).map_err(|e| SceneError::Invalid(format!("{what}: {e}")))?);
        metrics.insert(name.clone(), m);
    }

    let components = |kind: &str, name: &str, src: &[String]| -> Result<Vec<Expression>, SceneError> {
        let what = format!("{kind} \"{name}\"");
        let n = need_dim(&chart, &what)?;
        if src.len() != n {
            return Err(SceneError::Dimension(format!(
                "{what} needs {n} components, got {}",
                src.len()
            )));
        }
        src.iter().map(|s| parse_expr(&what, s, n)).collect()
    };

    let mut forms = BTreeMap::new();
    for (name, src) in &file.forms {
        let f: OneForm = Arc::new(ExprOneForm::new(components("form", name, src)?).expect("consistent dimensions"));
        forms.insert(name.clone(), f);
    }

    let mut vectors = BTreeMap::new();
    for (name, src) in &file.vectors {
        if BUILTIN_FIELDS.contains(&name.as_str()) {
            return Err(SceneError::Invalid(format!("vector name \"{name}\" is reserved")));
        }
        let v: Vector =
            Arc::new(ExprVectorField::new(components("vector", name, src)?).expect("consistent dimensions"));
        vectors.insert(name.clone(), v);
    }

    let connections = compile_connections(&file.connections, &chart, &metrics)?;

    let structures = order_structures(&file, &metrics, &forms, &connections)?;
    let dims = structure_dims(&structures, &chart, &file.cones)?;

    for c in &file.checks {
        if let CheckKind::Rank { exponents, .. } = &c.kind {
            crate::lch::MonodromyCharacter::parse_single_base(
                &exponents.iter().map(String::as_str).collect::<Vec<_>>(),
            )
            .map_err(|e| SceneError::Invalid(format!("rank exponents: {e}")))?;
            continue;
        }
        let target = c.kind.target().expect("non-rank checks have a target");
        if c.kind.is_cone_check() {
            let cone = file.cones.get(target).ok_or_else(|| SceneError::Undeclared {
                kind: "cone",
                name: target.into(),
            })?;
            let point = match &c.kind {
                CheckKind::Psi { point, .. } | CheckKind::Homogeneity { point, .. } => Some(point),
                _ => None,
            };
            if let Some(p) = point {
                if p.len() != cone.dim() {
                    return Err(SceneError::Dimension(format!(
                        "point for cone \"{target}\" has {} coordinates, cone has dimension {}",
                        p.len(),
                        cone.dim()
                    )));
                }
            }
            continue;
        }
        let dim = *dims.get(target).ok_or_else(|| SceneError::Undeclared {
            kind: "structure",
            name: target.into(),
        })?;
        if let Some(field) = c.kind.field() {
            if !BUILTIN_FIELDS.contains(&field) {
                let v = vectors.get(field).ok_or_else(|| SceneError::Undeclared {
                    kind: "vector field",
                    name: field.into(),
                })?;
                if v.dim() != dim {
                    return Err(SceneError::Dimension(format!(
                        "vector field \"{field}\" has dimension {}, structure \"{target}\" {dim}",
                        v.dim()
                    )));
                }
            }
        }
        match &c.kind {
            CheckKind::Perturbation { alpha, .. } => {
                let f = forms.get(alpha).ok_or_else(|| SceneError::Undeclared {
                    kind: "form",
                    name: alpha.clone(),
                })?;
                if f.dim() != dim {
                    return Err(SceneError::Dimension(format!(
                        "form \"{alpha}\" does not match structure \"{target}\""
                    )));
                }
            }
            CheckKind::Invariance { map, .. } => {
                if map.len() != dim {
                    return Err(SceneError::Dimension(format!("invariance map needs {dim} components")));
                }
                for s in map {
                    parse_expr("invariance map", s, dim)?;
                }
            }
            CheckKind::Gauge { base, point, .. } => {
                if base.len() != dim || point.len() != dim {
                    return Err(SceneError::Dimension("gauge points must match the structure".into()));
                }
            }
            _ => {}
        }
    }

    Ok(Scene {
        name: file.name,
        description: file.description,
        chart,
        scalars,
        metrics,
        forms,
        vectors,
        connections,
        cones: file.cones,
        structures,
        checks: file.checks,
    })
}

fn compile_connections(
    specs: &BTreeMap<String, ConnectionSpec>,
    chart: &Option<Chart>,
    metrics: &BTreeMap<String, Metric>,
) -> Result<BTreeMap<String, Connection>, SceneError> {
    let metric = |name: &str| {
        metrics.get(name).cloned().ok_or_else(|| SceneError::Undeclared {
            kind: "metric",
            name: name.into(),
        })
    };
    let mut done: BTreeMap<String, Connection> = BTreeMap::new();
    let mut pending: Vec<(&String, &ConnectionSpec)> = specs.iter().collect();
    while !pending.is_empty() {
        let before = pending.len();
        let mut rest = Vec::new();
        for (name, spec) in pending {
            let what = format!("connection \"{name}\"");
            let built: Connection = match spec {
                ConnectionSpec::Flat => Arc::new(ExprConnection::flat(need_dim(chart, &what)?)),
                ConnectionSpec::Christoffel { symbols } => {
                    let n = need_dim(chart, &what)?;
                    if symbols.len() != n || symbols.iter().any(|a| a.len() != n || a.iter().any(|b| b.len() != n)) {
                        return Err(SceneError::Dimension(format!("{what} must be {n}×{n}×{n}")));
                    }
                    let parsed = symbols
                        .iter()
                        .map(|a| {
                            a.iter()
                                .map(|b| b.iter().map(|s| parse_expr(&what, s, n)).collect::<Result<Vec<_>, _>>())
                                .collect::<Result<Vec<_>, _>>()
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    Arc::new(
                        ExprConnection::new(parsed, false).map_err(|e| SceneError::Invalid(format!("{what}: {e}")))?,
                    )
                }
                ConnectionSpec::LeviCivita { metric: m } => Arc::new(LeviCivita::new(metric(m)?)),
                ConnectionSpec::Dual { connection, metric: m } => {
                    if !specs.contains_key(connection) {
                        return Err(SceneError::Undeclared {
                            kind: "connection",
                            name: connection.clone(),
                        });
                    }
                    let Some(base) = done.get(connection) else {
                        rest.push((name, spec));
                        continue;
                    };
                    Arc::new(
                        dual_connection(base.clone(), metric(m)?)
                            .map_err(|e| SceneError::Invalid(format!("{what}: {e}")))?,
                    )
                }
            };
            done.insert(name.clone(), built);
        }
        if rest.len() == before {
            return Err(SceneError::Invalid(
                "dual connections refer to each other in a cycle".into(),
            ));
        }
        pending = rest;
    }
    Ok(done)
}

fn structure_deps(spec: &StructureSpec) -> Vec<&str> {
    match spec {
        StructureSpec::Cone { base, .. } | StructureSpec::MappingTorus { base, .. } => vec![base],
        _ => vec![],
    }
}

fn order_structures(
    file: &SceneFile,
    metrics: &BTreeMap<String, Metric>,
    forms: &BTreeMap<String, OneForm>,
    connections: &BTreeMap<String, Connection>,
) -> Result<Vec<(String, StructureSpec)>, SceneError> {
    let undeclared = |kind: &'static str, name: &str| SceneError::Undeclared {
        kind,
        name: name.into(),
    };
    for spec in file.structures.values() {
        let (c, m, f, cone) = match spec {
            StructureSpec::Statistical { connection, metric } => (Some(connection), Some(metric), None, None),
            StructureSpec::Lch {
                connection,
                metric,
                lee_form,
            } => (Some(connection), Some(metric), Some(lee_form), None),
            StructureSpec::LeeMetric {
                connection, lee_form, ..
            } => (Some(connection), None, Some(lee_form), None),
            StructureSpec::ConeLch { cone } | StructureSpec::ConeSurface { cone, .. } => (None, None, None, Some(cone)),
            StructureSpec::Cone { .. } | StructureSpec::MappingTorus { .. } => (None, None, None, None),
        };
        if let Some(c) = c.filter(|c| !connections.contains_key(*c)) {
            return Err(undeclared("connection", c));
        }
        if let Some(m) = m.filter(|m| !metrics.contains_key(*m)) {
            return Err(undeclared("metric", m));
        }
        if let Some(f) = f.filter(|f| !forms.contains_key(*f)) {
            return Err(undeclared("form", f));
        }
        if let Some(v) = cone.filter(|v| !file.cones.contains_key(*v)) {
            return Err(undeclared("cone", v));
        }
        for d in structure_deps(spec) {
            match file.structures.get(d) {
                None => return Err(undeclared("structure", d)),
                Some(StructureSpec::Statistical { .. }) | Some(StructureSpec::ConeSurface { .. }) => {}
                Some(_) => {
                    return Err(SceneError::Invalid(format!(
                        "base \"{d}\" must be a statistical structure"
                    )))
                }
            }
        }
    }
    let mut out = Vec::new();
    let mut placed: BTreeSet<&str> = BTreeSet::new();
    while out.len() < file.structures.len() {
        let before = out.len();
        for (name, spec) in &file.structures {
            if !placed.contains(name.as_str()) && structure_deps(spec).iter().all(|d| placed.contains(d)) {
                placed.insert(name);
                out.push((name.clone(), spec.clone()));
            }
        }
        if out.len() == before {
            return Err(SceneError::Invalid("structures refer to each other in a cycle".into()));
        }
    }
    Ok(out)
}

fn structure_dims(
    structures: &[(String, StructureSpec)],
    chart: &Option<Chart>,
    cones: &BTreeMap<String, ConeSpec>,
) -> Result<BTreeMap<String, usize>, SceneError> {
    let mut dims = BTreeMap::new();
    for (name, spec) in structures {
        let what = format!("structure \"{name}\"");
        let d = match spec {
            StructureSpec::Statistical { .. } | StructureSpec::Lch { .. } | StructureSpec::LeeMetric { .. } => {
                need_dim(chart, &what)?
            }
            StructureSpec::Cone { base, .. } => dims[base] + 1,
            StructureSpec::MappingTorus { base, automorphism, .. } => {
                let n = dims[base];
                if automorphism.len() != n {
                    return Err(SceneError::Dimension(format!(
                        "{what}: automorphism needs {n} components"
                    )));
                }
                for s in automorphism {
                    parse_expr(&what, s, n)?;
                }
                n + 1
            }
            StructureSpec::ConeLch { cone } => cones[cone].dim(),
            StructureSpec::ConeSurface { cone, .. } => {
                let d = cones[cone].dim();
                if d < 2 {
                    return Err(SceneError::Dimension(format!("{what}: cone must have dimension ≥ 2")));
                }
                d - 1
            }
        };
        dims.insert(name.clone(), d);
    }
    Ok(dims)
}
