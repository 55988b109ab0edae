//! Closed forms and a Monte Carlo estimator for the characteristic function.
//!
//! The estimator picks a simplicial cone `cone(A) ⊇ V*` adapted to `x`. With
//! `y = Az` the integral becomes
//! `|det A| ∫_{z>0} 1[Az ∈ V*] e^{−⟨Aᵀx, z⟩} dz`, so drawing `z_i ~ Exp(b_i)`
//! with `b = Aᵀx` gives the unbiased weight `|det A| 1[Az ∈ V*] / Π b_i`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::expr::Expression;

use super::{combinations, dot, norm, ConeError, ConeSpec, PolyhedralCone};

pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;
const CHUNK: usize = 4096;
const DIVERGENCE_RATIO: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsiMethod {
    ClosedForm,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiValue {
    pub value: f64,
    /// Zero for closed forms.
    pub stderr: f64,
    pub method: PsiMethod,
}

fn product_of_vars(offset: usize, n: usize) -> String {
    (offset..offset + n)
        .map(|i| format!("x{i}"))
        .collect::<Vec<_>>()
        .join("*")
}

fn closed_form_source(cone: &ConeSpec, offset: usize) -> Option<String> {
    match cone {
        ConeSpec::Orthant(n) => Some(format!("1/({})", product_of_vars(offset, *n))),
        ConeSpec::Lorentz(2) => Some(format!("2/(x{}^2-x{}^2)", offset, offset + 1)),
        ConeSpec::Lorentz(_) | ConeSpec::Polyhedral(_) => None,
        ConeSpec::Product(factors) => {
            let mut parts = Vec::new();
            let mut o = offset;
            for f in factors {
                parts.push(format!("({})", closed_form_source(f, o)?));
                o += f.dim();
            }
            Some(parts.join("*"))
        }
    }
}

/// `ψ` as an expression in `x0 … x{n−1}`, for orthants, `lorentz(2)` and
/// products of those.
pub fn closed_form_expression(cone: &ConeSpec) -> Option<Expression> {
    let src = closed_form_source(cone, 0)?;
    Some(Expression::parse(&src, cone.dim()).expect("generated expression parses"))
}

pub fn characteristic_function(cone: &ConeSpec, x: &[f64], method: PsiMethod) -> Result<PsiValue, ConeError> {
    cone.require_interior(x)?;
    match method {
        PsiMethod::ClosedForm => {
            let e = closed_form_expression(cone).ok_or_else(|| ConeError::NoClosedForm(cone.kind().into()))?;
            Ok(PsiValue {
                value: e.eval(x)?,
                stderr: 0.0,
                method,
            })
        }
        PsiMethod::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(ConeError::Invalid("Monte Carlo needs at least two samples".into()));
            }
            let (value, stderr) = monte_carlo(cone, x, samples, seed)?;
            if value <= 0.0 || !(stderr / value <= DIVERGENCE_RATIO) {
                return Err(ConeError::Divergence { value, stderr });
            }
            Ok(PsiValue { value, stderr, method })
        }
    }
}

/// `A`, `b = Aᵀx` and `|det A|` for one factor.
struct Proposal {
    a: DMatrix<f64>,
    b: DVector<f64>,
    det: f64,
}

/// `m + 1` unit vectors in `ℝ^m` summing to zero.
fn simplex_directions(m: usize) -> Vec<DVector<f64>> {
    if m == 0 {
        return vec![DVector::zeros(0)];
    }
    let c = DVector::from_element(m + 1, 1.0 / ((m + 1) as f64).sqrt());
    let basis = complement(&c);
    (0..=m)
        .map(|k| {
            let mut e = DVector::from_element(m + 1, -1.0 / (m + 1) as f64);
            e[k] += 1.0;
            let v = basis.transpose() * e;
            let l = v.norm();
            v / l
        })
        .collect()
}

/// Orthonormal basis of `u⊥` (as columns) for a unit vector `u`, from the
/// Householder reflection taking `e0` to `±u`.
fn complement(u: &DVector<f64>) -> DMatrix<f64> {
    let n = u.len();
    let mut w = u.clone();
    if u[0] > 0.0 {
        w[0] -= 1.0;
    } else {
        w[0] += 1.0;
    }
    let h = if w.norm() < 1e-14 {
        DMatrix::identity(n, n)
    } else {
        DMatrix::identity(n, n) - (&w * w.transpose()) * (2.0 / w.norm_squared())
    };
    h.columns(1, n - 1).into_owned()
}

fn proposal_from_columns(a: DMatrix<f64>, x: &[f64]) -> Option<Proposal> {
    let b = a.transpose() * DVector::from_column_slice(x);
    if b.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let det = a.determinant().abs();
    Some(Proposal { a, b, det })
}

fn lorentz_proposal(x: &[f64]) -> Proposal {
    let d = x.len();
    // ψ is invariant under the boosts preserving V, so evaluate on the axis.
    let t = (x[0] * x[0] - dot(&x[1..], &x[1..])).sqrt();
    let mut axis = vec![0.0; d];
    axis[0] = t;
    // The simplex of circumradius d−1 has inradius 1, so it surrounds the
    // unit-ball cross-section of V*.
    let dirs = simplex_directions(d - 1);
    let a = DMatrix::from_fn(d, d, |i, k| if i == 0 { 1.0 } else { (d - 1) as f64 * dirs[k][i - 1] });
    proposal_from_columns(a, &axis).expect("axis point lies in every column's dual")
}

fn polyhedral_proposal(p: &PolyhedralCone, x: &[f64]) -> Proposal {
    let d = p.dim();
    let scale = norm(x);
    // Simplicial subcones cone(G_S) ⊆ V give V* ⊆ cone(G_S^{−T}).
    let mut best: Option<(f64, DMatrix<f64>)> = None;
    for subset in combinations(p.generators().len(), d) {
        let g = DMatrix::from_fn(d, d, |i, j| p.generators()[subset[j]][i]);
        let Some(inv) = g.clone().try_inverse() else {
            continue;
        };
        let c = &inv * DVector::from_column_slice(x);
        let worst = (0..d)
            .map(|j| c[j] * norm(p.generators()[subset[j]].as_slice()) / scale)
            .fold(f64::INFINITY, f64::min);
        if best.as_ref().is_none_or(|(w, _)| worst > *w) {
            best = Some((worst, inv.transpose()));
        }
    }
    if let Some((w, a)) = best {
        if w > 1e-3 {
            if let Some(prop) = proposal_from_columns(a, x) {
                return prop;
            }
        }
    }
    // x sits on an internal wall of every simplicial subcone: surround it by
    // a small simplicial cone W ⊂ V instead.
    let u = DVector::from_column_slice(x) / scale;
    let frame = complement(&u);
    let dirs = simplex_directions(d - 1);
    let build = |r: f64| {
        DMatrix::from_fn(d, d, |i, k| {
            let off: f64 = (0..d - 1).map(|j| frame[(i, j)] * dirs[k][j]).sum();
            x[i] + r * scale * off
        })
    };
    let inside = |w: &DMatrix<f64>| {
        (0..d).all(|k| {
            let col: Vec<f64> = w.column(k).iter().copied().collect();
            p.facets().iter().all(|f| dot(f, &col) > 0.0)
        })
    };
    let mut r = 1.0;
    while !inside(&build(r)) {
        r *= 0.5;
    }
    let w = build(r);
    let a = w.try_inverse().expect("simplex around x is nondegenerate").transpose();
    proposal_from_columns(a, x).expect("x is the barycenter of W")
}

fn proposals(cone: &ConeSpec, x: &[f64], out: &mut Vec<(ConeSpec, Proposal)>) {
    match cone {
        ConeSpec::Orthant(n) => {
            let a = DMatrix::identity(*n, *n);
            out.push((cone.clone(), proposal_from_columns(a, x).expect("interior point")));
        }
        ConeSpec::Lorentz(_) => out.push((cone.clone(), lorentz_proposal(x))),
        ConeSpec::Polyhedral(p) => out.push((cone.clone(), polyhedral_proposal(p, x))),
        ConeSpec::Product(factors) => {
            let mut offset = 0;
            for f in factors {
                proposals(f, &x[offset..offset + f.dim()], out);
                offset += f.dim();
            }
        }
    }
}

#[derive(Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64,
        }
    }
}

/// Chunk `k` draws from stream `k` of the seeded generator and chunks are
/// merged in order, so the result does not depend on the thread count.
fn monte_carlo(cone: &ConeSpec, x: &[f64], samples: usize, seed: u64) -> Result<(f64, f64), ConeError> {
    let mut blocks = Vec::new();
    proposals(cone, x, &mut blocks);
    let scale: f64 = blocks
        .iter()
        .map(|(_, p)| p.det / p.b.iter().product::<f64>())
        .product();
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let len = CHUNK.min(samples - k * CHUNK);
            let mut m = Moments::default();
            for _ in 0..len {
                let mut hit = true;
                for (c, p) in &blocks {
                    let z = DVector::from_iterator(
                        p.b.len(),
                        p.b.iter().map(|bi| {
                            let e: f64 = Exp1.sample(&mut rng);
                            e / bi
                        }),
                    );
                    let y = &p.a * z;
                    hit &= c.dual_contains(y.as_slice());
                }
                m.push(if hit { scale } else { 0.0 });
            }
            m
        })
        .collect();
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    let var = if total.n > 1 {
        total.m2 / (total.n - 1) as f64
    } else {
        0.0
    };
    Ok((total.mean, (var / total.n as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let o = ConeSpec::orthant(2).unwrap();
        let v = characteristic_function(&o, &[2.0, 3.0], PsiMethod::ClosedForm).unwrap();
        assert_eq!(v.value, 1.0 / 6.0);
        let l = ConeSpec::lorentz(2).unwrap();
        let v = characteristic_function(&l, &[1.0, 0.0], PsiMethod::ClosedForm).unwrap();
        assert_eq!(v.value, 2.0);
        assert!(matches!(
            characteristic_function(&ConeSpec::lorentz(3).unwrap(), &[2.0, 0.0, 0.0], PsiMethod::ClosedForm),
            Err(ConeError::NoClosedForm(_))
        ));
        assert!(matches!(
            characteristic_function(&o, &[1.0, 0.0], PsiMethod::ClosedForm),
            Err(ConeError::Outside(_))
        ));
    }

    #[test]
    fn simplex_directions_are_balanced() {
        for m in 1..5 {
            let d = simplex_directions(m);
            assert_eq!(d.len(), m + 1);
            let sum = d.iter().fold(DVector::zeros(m), |a, v| a + v);
            assert!(sum.norm() < 1e-12);
            for v in &d {
                assert!((v.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lorentz3_matches_polar_integral() {
        // ∫_{y0>|ȳ|} e^{−t y0} dy = ∫ π y0² e^{−t y0} dy0 = 2π / t³
        let l = ConeSpec::lorentz(3).unwrap();
        let x = [2.0, 0.6, -0.8];
        let t2: f64 = 4.0 - 0.36 - 0.64;
        let exact = 2.0 * std::f64::consts::PI / t2.powf(1.5);
        let v = characteristic_function(
            &l,
            &x,
            PsiMethod::MonteCarlo {
                samples: 200_000,
                seed: 7,
            },
        )
        .unwrap();
        assert!((v.value - exact).abs() < 4.0 * v.stderr, "{v:?} vs {exact}");
        assert!(v.stderr > 0.0);
    }

    #[test]
    fn pyramid_axis_uses_the_fallback_proposal() {
        // square pyramid: V* is cut out by four generators, ψ on the axis is
        // Σ over the two triangles of the dual fan
        let p = ConeSpec::polyhedral(vec![
            vec![1.0, 1.0, 1.0],
            vec![1.0, -1.0, 1.0],
            vec![1.0, 1.0, -1.0],
            vec![1.0, -1.0, -1.0],
        ])
        .unwrap();
        let v = characteristic_function(
            &p,
            &[1.0, 0.0, 0.0],
            PsiMethod::MonteCarlo {
                samples: 100_000,
                seed: 3,
            },
        )
        .unwrap();
        assert!(v.value > 0.0 && v.stderr > 0.0);
    }
}
