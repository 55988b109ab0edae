//! Convex cones and their characteristic functions
//! `ψ(x) = ∫_{V*} e^{−⟨x,y⟩} dy`.

mod barrier;
mod psi;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::EvalError;
use crate::hesstat::HesstatError;
use crate::lch::LchError;

pub use barrier::{
    cone_lch_structure, default_chart, default_surface_map, log_psi_metric, project_to_characteristic_surface,
    surface_statistical_structure,
};
pub use psi::{characteristic_function, closed_form_expression, PsiMethod, PsiValue, DEFAULT_MC_SAMPLES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConeError {
    #[error("invalid cone: {0}")]
    Invalid(String),
    #[error("cone contains a full line")]
    NotPointed,
    #[error("point {0:?} is not strictly inside the cone")]
    Outside(Vec<f64>),
    #[error("point has {got} coordinates, cone lives in dimension {want}")]
    Dimension { got: usize, want: usize },
    #[error("no closed form for ψ on a {0} cone")]
    NoClosedForm(String),
    #[error("Monte Carlo estimate diverged: value {value:e}, standard error {stderr:e}")]
    Divergence { value: f64, stderr: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Hesstat(#[from] HesstatError),
    #[error(transparent)]
    Lch(#[from] LchError),
}

/// Cone generated by finitely many vectors, with its facet normals.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyhedralCone {
    generators: Vec<Vec<f64>>,
    facets: Vec<Vec<f64>>,
}

impl PolyhedralCone {
    pub fn new(generators: Vec<Vec<f64>>) -> Result<Self, ConeError> {
        let d = generators.first().map(Vec::len).unwrap_or(0);
        if d == 0 {
            return Err(ConeError::Invalid("no generators".into()));
        }
        if generators.iter().any(|g| g.len() != d) {
            return Err(ConeError::Invalid("generators have different lengths".into()));
        }
        if generators.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ConeError::Invalid("non-finite generator entry".into()));
        }
        if generators.iter().any(|g| g.iter().all(|&v| v == 0.0)) {
            return Err(ConeError::Invalid("zero generator".into()));
        }
        let m = DMatrix::from_fn(d, generators.len(), |i, j| generators[j][i]);
        if m.rank(1e-10 * m.norm()) < d {
            return Err(ConeError::Invalid("generators do not span the ambient space".into()));
        }
        let facets = facet_normals(&generators);
        if facets.len() < d {
            return Err(ConeError::NotPointed);
        }
        let f = DMatrix::from_fn(d, facets.len(), |i, j| facets[j][i]);
        if f.rank(1e-10) < d {
            return Err(ConeError::NotPointed);
        }
        Ok(PolyhedralCone { generators, facets })
    }

    pub fn dim(&self) -> usize {
        self.generators[0].len()
    }

    pub fn generators(&self) -> &[Vec<f64>] {
        &self.generators
    }

    /// Inward unit normals of the facets.
    pub fn facets(&self) -> &[Vec<f64>] {
        &self.facets
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Normal to `d − 1` vectors in `ℝ^d` by cofactor expansion.
fn cross(rows: &[&Vec<f64>], d: usize) -> Vec<f64> {
    (0..d)
        .map(|j| {
            let minor = DMatrix::from_fn(d - 1, d - 1, |r, c| rows[r][if c < j { c } else { c + 1 }]);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * if d == 1 { 1.0 } else { minor.determinant() }
        })
        .collect()
}

fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, k, &mut Vec::new(), &mut out);
    out
}

fn facet_normals(generators: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = generators[0].len();
    let scale = generators.iter().map(|g| norm(g)).fold(0.0, f64::max);
    let mut out: Vec<Vec<f64>> = Vec::new();
    for subset in combinations(generators.len(), d - 1) {
        let rows: Vec<&Vec<f64>> = subset.iter().map(|&i| &generators[i]).collect();
        let n = cross(&rows, d);
        let len = norm(&n);
        if len <= 1e-12 * scale.powi(d as i32 - 1).max(1.0) {
            continue;
        }
        let n: Vec<f64> = n.iter().map(|v| v / len).collect();
        let eps = 1e-12 * scale;
        let side: Vec<f64> = generators.iter().map(|g| dot(&n, g)).collect();
        let n = if side.iter().all(|&v| v >= -eps) {
            n
        } else if side.iter().all(|&v| v <= eps) {
            n.iter().map(|v| -v).collect()
        } else {
            continue;
        };
        if !out.iter().any(|f| f.iter().zip(&n).all(|(a, b)| (a - b).abs() < 1e-9)) {
            out.push(n);
        }
    }
    out
}

/// A pointed convex cone with nonempty interior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCone", into = "RawCone")]
pub enum ConeSpec {
    /// `{x : x_i > 0}` in `ℝ^n`.
    Orthant(usize),
    /// `{x : x0 > |(x1, …, x_{n−1})|}` in `ℝ^n`, `n ≥ 2`.
    Lorentz(usize),
    Polyhedral(PolyhedralCone),
    Product(Vec<ConeSpec>),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum RawCone {
    Orthant { dim: usize },
    Lorentz { dim: usize },
    Polyhedral { generators: Vec<Vec<f64>> },
    Product { factors: Vec<RawCone> },
}

impl TryFrom<RawCone> for ConeSpec {
    type Error = ConeError;

    fn try_from(raw: RawCone) -> Result<Self, ConeError> {
        match raw {
            RawCone::Orthant { dim } => ConeSpec::orthant(dim),
            RawCone::Lorentz { dim } => ConeSpec::lorentz(dim),
            RawCone::Polyhedral { generators } => Ok(ConeSpec::Polyhedral(PolyhedralCone::new(generators)?)),
            RawCone::Product { factors } => ConeSpec::product(
                factors
                    .into_iter()
                    .map(ConeSpec::try_from)
                    .collect::<Result<Vec<_>, _>>()?,
            ),
        }
    }
}

impl From<ConeSpec> for RawCone {
    fn from(c: ConeSpec) -> Self {
        match c {
            ConeSpec::Orthant(dim) => RawCone::Orthant { dim },
            ConeSpec::Lorentz(dim) => RawCone::Lorentz { dim },
            ConeSpec::Polyhedral(p) => RawCone::Polyhedral {
                generators: p.generators,
            },
            ConeSpec::Product(f) => RawCone::Product {
                factors: f.into_iter().map(RawCone::from).collect(),
            },
        }
    }
}

impl ConeSpec {
    pub fn orthant(dim: usize) -> Result<Self, ConeError> {
        if dim == 0 {
            return Err(ConeError::Invalid("orthant dimension must be positive".into()));
        }
        Ok(ConeSpec::Orthant(dim))
    }

    pub fn lorentz(dim: usize) -> Result<Self, ConeError> {
        if dim < 2 {
            return Err(ConeError::Invalid("Lorentz cone needs dimension at least 2".into()));
        }
        Ok(ConeSpec::Lorentz(dim))
    }

    pub fn polyhedral(generators: Vec<Vec<f64>>) -> Result<Self, ConeError> {
        Ok(ConeSpec::Polyhedral(PolyhedralCone::new(generators)?))
    }

    pub fn product(factors: Vec<ConeSpec>) -> Result<Self, ConeError> {
        if factors.is_empty() {
            return Err(ConeError::Invalid("product of no factors".into()));
        }
        Ok(ConeSpec::Product(factors))
    }

    pub fn dim(&self) -> usize {
        match self {
            ConeSpec::Orthant(n) | ConeSpec::Lorentz(n) => *n,
            ConeSpec::Polyhedral(p) => p.dim(),
            ConeSpec::Product(f) => f.iter().map(ConeSpec::dim).sum(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ConeSpec::Orthant(_) => "orthant",
            ConeSpec::Lorentz(_) => "lorentz",
            ConeSpec::Polyhedral(_) => "polyhedral",
            ConeSpec::Product(_) => "product",
        }
    }

    /// Strict membership in the open cone.
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            ConeSpec::Orthant(_) => x.iter().all(|&v| v > 0.0),
            ConeSpec::Lorentz(_) => x[0] > norm(&x[1..]),
            ConeSpec::Polyhedral(p) => p.facets.iter().all(|f| dot(f, x) > 0.0),
            ConeSpec::Product(f) => split(f, x).all(|(c, part)| c.contains(part)),
        }
    }

    /// Strict membership in the open dual cone `{y : ⟨x, y⟩ > 0 on V∖0}`.
    pub fn dual_contains(&self, y: &[f64]) -> bool {
        if y.len() != self.dim() || y.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            ConeSpec::Orthant(_) | ConeSpec::Lorentz(_) => self.contains(y),
            ConeSpec::Polyhedral(p) => p.generators.iter().all(|g| dot(g, y) > 0.0),
            ConeSpec::Product(f) => split(f, y).all(|(c, part)| c.dual_contains(part)),
        }
    }

    pub(crate) fn require_interior(&self, x: &[f64]) -> Result<(), ConeError> {
        if x.len() != self.dim() {
            return Err(ConeError::Dimension {
                got: x.len(),
                want: self.dim(),
            });
        }
        if !self.contains(x) {
            return Err(ConeError::Outside(x.to_vec()));
        }
        Ok(())
    }
}

fn split<'a>(factors: &'a [ConeSpec], x: &'a [f64]) -> impl Iterator<Item = (&'a ConeSpec, &'a [f64])> {
    let mut offset = 0;
    factors.iter().map(move |c| {
        let part = &x[offset..offset + c.dim()];
        offset += c.dim();
        (c, part)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_conventions() {
        let o = ConeSpec::orthant(2).unwrap();
        assert!(o.contains(&[1.0, 1.0]));
        assert!(!o.contains(&[1.0, -1.0]));
        assert!(ConeSpec::lorentz(2).unwrap().dual_contains(&[1.0, 0.0]));
        let p = ConeSpec::polyhedral(vec![vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert!(!p.dual_contains(&[0.0, 1.0]));
        assert!(p.dual_contains(&[0.1, 1.0]));
        assert!(p.contains(&[2.0, 1.0]));
        assert!(!p.contains(&[1.0, 0.0]));
    }

    #[test]
    fn square_pyramid_facets() {
        let p = PolyhedralCone::new(vec![
            vec![1.0, 1.0, 1.0],
            vec![1.0, -1.0, 1.0],
            vec![1.0, 1.0, -1.0],
            vec![1.0, -1.0, -1.0],
        ])
        .unwrap();
        assert_eq!(p.facets().len(), 4);
    }

    #[test]
    fn half_plane_is_not_pointed() {
        let err = ConeSpec::polyhedral(vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(err, Err(ConeError::NotPointed));
        let err = ConeSpec::polyhedral(vec![vec![1.0, 0.0], vec![2.0, 0.0]]);
        assert!(matches!(err, Err(ConeError::Invalid(_))));
    }

    #[test]
    fn serde_round_trip() {
        let src = r#"{"kind":"product","factors":[{"kind":"orthant","dim":1},{"kind":"lorentz","dim":3}]}"#;
        let c: ConeSpec = serde_json::from_str(src).unwrap();
        assert_eq!(c.dim(), 4);
        assert_eq!(serde_json::to_string(&c).unwrap(), src);
        assert!(serde_json::from_str::<ConeSpec>(r#"{"kind":"lorentz","dim":1}"#).is_err());
    }
}
