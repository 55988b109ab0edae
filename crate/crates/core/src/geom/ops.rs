//! Pointwise tensor operators built from a connection and its first jet.
//!
//! `∇ξ` is returned as the matrix `(∇_j ξ)^i` at index `(i, j)`, curvature as
//! `R^l_ijk` at `(l, i, j, k)`.

use crate::expr::EvalError;
use crate::jet::Jet;

use super::fields::{ConnectionField, MetricField, OneFormField, ScalarField, VectorField};
use super::tensor::{relative_diff, Tensor};

fn point(p: &[f64], order: usize) -> Vec<Jet> {
    Jet::identity_point(p, order)
}

fn finite(jets: &[Jet], what: &str) -> Result<(), EvalError> {
    if jets.iter().all(Jet::is_finite) {
        Ok(())
    } else {
        Err(EvalError::Domain(format!("{what} is not finite")))
    }
}

fn values(jets: &[Jet]) -> Vec<f64> {
    jets.iter().map(Jet::value).collect()
}

/// Connection symbols and their first derivatives,
/// `d[((m * n + k) * n + i) * n + j] = ∂_m Γ^k_ij`.
struct ConnectionJet {
    n: usize,
    gamma: Vec<f64>,
    d: Vec<f64>,
}

impl ConnectionJet {
    fn at(conn: &dyn ConnectionField, p: &[f64], order: usize) -> Result<Self, EvalError> {
        let n = conn.dim();
        if conn.is_flat_affine() {
            return Ok(ConnectionJet {
                n,
                gamma: vec![0.0; n * n * n],
                d: vec![0.0; n * n * n * n],
            });
        }
        let jets = conn.eval(&point(p, order))?;
        finite(&jets, "connection")?;
        let gamma = values(&jets);
        let mut d = Vec::new();
        if order >= 1 {
            d = vec![0.0; n * n * n * n];
            for m in 0..n {
                for kij in 0..n * n * n {
                    d[m * n * n * n + kij] = jets[kij].grad(m);
                }
            }
        }
        Ok(ConnectionJet { n, gamma, d })
    }

    fn g(&self, k: usize, i: usize, j: usize) -> f64 {
        self.gamma[(k * self.n + i) * self.n + j]
    }

    fn dg(&self, m: usize, k: usize, i: usize, j: usize) -> f64 {
        self.d[((m * self.n + k) * self.n + i) * self.n + j]
    }
}

pub fn metric_at(g: &dyn MetricField, p: &[f64]) -> Result<Tensor, EvalError> {
    let n = g.dim();
    let jets = g.eval(&point(p, 0))?;
    finite(&jets, "metric")?;
    Ok(Tensor::from_vec(n, 2, values(&jets)))
}

pub fn oneform_at(t: &dyn OneFormField, p: &[f64]) -> Result<Tensor, EvalError> {
    let jets = t.eval(&point(p, 0))?;
    finite(&jets, "one-form")?;
    Ok(Tensor::from_vec(t.dim(), 1, values(&jets)))
}

pub fn vector_at(v: &dyn VectorField, p: &[f64]) -> Result<Tensor, EvalError> {
    let jets = v.eval(&point(p, 0))?;
    finite(&jets, "vector field")?;
    Ok(Tensor::from_vec(v.dim(), 1, values(&jets)))
}

pub fn connection_at(conn: &dyn ConnectionField, p: &[f64]) -> Result<Tensor, EvalError> {
    let c = ConnectionJet::at(conn, p, 0)?;
    Ok(Tensor::from_vec(c.n, 3, c.gamma))
}

/// `(∇g)_ijk = ∂_i g_jk - Γ^l_ij g_lk - Γ^l_ik g_jl`.
pub fn covariant_derivative_metric(
    g: &dyn MetricField,
    conn: &dyn ConnectionField,
    p: &[f64],
) -> Result<Tensor, EvalError> {
    let n = g.dim();
    let gj = g.eval(&point(p, 1))?;
    finite(&gj, "metric")?;
    let c = ConnectionJet::at(conn, p, 0)?;
    let mut out = Tensor::zeros(n, 3);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut v = gj[j * n + k].grad(i);
                for l in 0..n {
                    v -= c.g(l, i, j) * gj[l * n + k].value() + c.g(l, i, k) * gj[j * n + l].value();
                }
                out.set(&[i, j, k], v);
            }
        }
    }
    Ok(out)
}

/// `(∇θ)_ij = ∂_i θ_j - Γ^k_ij θ_k`.
pub fn covariant_derivative_oneform(
    theta: &dyn OneFormField,
    conn: &dyn ConnectionField,
    p: &[f64],
) -> Result<Tensor, EvalError> {
    let n = theta.dim();
    let t = theta.eval(&point(p, 1))?;
    finite(&t, "one-form")?;
    let c = ConnectionJet::at(conn, p, 0)?;
    let mut out = Tensor::zeros(n, 2);
    for i in 0..n {
        for j in 0..n {
            let mut v = t[j].grad(i);
            for k in 0..n {
                v -= c.g(k, i, j) * t[k].value();
            }
            out.set(&[i, j], v);
        }
    }
    Ok(out)
}

/// `(∇_j ξ)^i = ∂_j ξ^i + Γ^i_jk ξ^k`, stored at `(i, j)`.
pub fn covariant_derivative_vector(
    xi: &dyn VectorField,
    conn: &dyn ConnectionField,
    p: &[f64],
) -> Result<Tensor, EvalError> {
    let n = xi.dim();
    let v = xi.eval(&point(p, 1))?;
    finite(&v, "vector field")?;
    let c = ConnectionJet::at(conn, p, 0)?;
    let mut out = Tensor::zeros(n, 2);
    for i in 0..n {
        for j in 0..n {
            let mut s = v[i].grad(j);
            for k in 0..n {
                s += c.g(i, j, k) * v[k].value();
            }
            out.set(&[i, j], s);
        }
    }
    Ok(out)
}

/// `(L_ξ g)_ij = ξ^k ∂_k g_ij + g_kj ∂_i ξ^k + g_ik ∂_j ξ^k`.
pub fn lie_derivative_metric(g: &dyn MetricField, xi: &dyn VectorField, p: &[f64]) -> Result<Tensor, EvalError> {
    let n = g.dim();
    let gj = g.eval(&point(p, 1))?;
    finite(&gj, "metric")?;
    let v = xi.eval(&point(p, 1))?;
    finite(&v, "vector field")?;
    let mut out = Tensor::zeros(n, 2);
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += v[k].value() * gj[i * n + j].grad(k)
                    + gj[k * n + j].value() * v[k].grad(i)
                    + gj[i * n + k].value() * v[k].grad(j);
            }
            out.set(&[i, j], s);
        }
    }
    Ok(out)
}

/// `(L_ξ ∇)^k_ij = ∂_i∂_j ξ^k + ξ^l ∂_l Γ^k_ij + Γ^k_lj ∂_i ξ^l + Γ^k_il ∂_j ξ^l
/// − Γ^l_ij ∂_l ξ^k`, at `(k, i, j)`. Vanishes iff `ξ` is affine.
pub fn lie_derivative_connection(
    conn: &dyn ConnectionField,
    xi: &dyn VectorField,
    p: &[f64],
) -> Result<Tensor, EvalError> {
    let n = conn.dim();
    let c = ConnectionJet::at(conn, p, 1)?;
    let v = xi.eval(&point(p, 2))?;
    finite(&v, "vector field")?;
    let mut out = Tensor::zeros(n, 3);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = v[k].hess(i, j);
                for l in 0..n {
                    s += v[l].value() * c.dg(l, k, i, j) + c.g(k, l, j) * v[l].grad(i) + c.g(k, i, l) * v[l].grad(j)
                        - c.g(l, i, j) * v[k].grad(l);
                }
                out.set(&[k, i, j], s);
            }
        }
    }
    Ok(out)
}

/// `dθ_ij = ∂_i θ_j - ∂_j θ_i`.
pub fn exterior_derivative_oneform(theta: &dyn OneFormField, p: &[f64]) -> Result<Tensor, EvalError> {
    let n = theta.dim();
    let t = theta.eval(&point(p, 1))?;
    finite(&t, "one-form")?;
    let mut out = Tensor::zeros(n, 2);
    for i in 0..n {
        for j in 0..n {
            out.set(&[i, j], t[j].grad(i) - t[i].grad(j));
        }
    }
    Ok(out)
}

/// `R^l_ijk = ∂_i Γ^l_jk - ∂_j Γ^l_ik + Γ^l_im Γ^m_jk - Γ^l_jm Γ^m_ik`.
pub fn curvature(conn: &dyn ConnectionField, p: &[f64]) -> Result<Tensor, EvalError> {
    let n = conn.dim();
    let c = ConnectionJet::at(conn, p, 1)?;
    let mut out = Tensor::zeros(n, 4);
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut v = c.dg(i, l, j, k) - c.dg(j, l, i, k);
                    for m in 0..n {
                        v += c.g(l, i, m) * c.g(m, j, k) - c.g(l, j, m) * c.g(m, i, k);
                    }
                    out.set(&[l, i, j, k], v);
                }
            }
        }
    }
    Ok(out)
}

/// `c (g_jk δ^l_i - g_ik δ^l_j)` with `c = 1`.
pub fn constant_curvature_model(g: &Tensor) -> Tensor {
    let n = g.n();
    let mut out = Tensor::zeros(n, 4);
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let a = if l == i { g.get(&[j, k]) } else { 0.0 };
                    let b = if l == j { g.get(&[i, k]) } else { 0.0 };
                    out.set(&[l, i, j, k], a - b);
                }
            }
        }
    }
    out
}

/// `(Hess φ)_ij = ∂_i ∂_j φ - Γ^k_ij ∂_k φ`.
pub fn hessian(phi: &dyn ScalarField, conn: &dyn ConnectionField, p: &[f64]) -> Result<Tensor, EvalError> {
    let n = phi.dim();
    let f = phi.eval(&point(p, 2))?;
    if !f.is_finite() {
        return Err(EvalError::Domain("potential is not finite".into()));
    }
    let c = ConnectionJet::at(conn, p, 0)?;
    let mut out = Tensor::zeros(n, 2);
    for i in 0..n {
        for j in 0..n {
            let mut v = f.hess(i, j);
            for k in 0..n {
                v -= c.g(k, i, j) * f.grad(k);
            }
            out.set(&[i, j], v);
        }
    }
    Ok(out)
}

/// Largest relative change of a rank-3 tensor under any index permutation.
pub fn total_symmetry_residual(t: &Tensor) -> f64 {
    const PERMS: [[usize; 3]; 5] = [[0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    PERMS
        .iter()
        .map(|p| relative_diff(t, &t.permuted(p)))
        .fold(0.0, f64::max)
}

/// Relative size of `Γ^k_ij - Γ^k_ji`.
pub fn torsion_residual(conn: &dyn ConnectionField, p: &[f64]) -> Result<f64, EvalError> {
    let g = connection_at(conn, p)?;
    Ok(relative_diff(&g, &g.permuted(&[0, 2, 1])))
}
