//! Finite-difference oracles shared by the integration tests. Metrics are
//! plain closures so the oracles never touch the expression engine.

#![allow(dead_code)]

pub type MetricFn = fn(&[f64]) -> Vec<Vec<f64>>;

pub const STEP: f64 = 1e-4;

fn shifted(p: &[f64], i: usize, h: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    q[i] += h;
    q
}

/// Central difference `∂_i f`.
pub fn partial(f: &dyn Fn(&[f64]) -> f64, p: &[f64], i: usize, h: f64) -> f64 {
    (f(&shifted(p, i, h)) - f(&shifted(p, i, -h))) / (2.0 * h)
}

/// Central second difference `∂_i ∂_j f`.
pub fn second_partial(f: &dyn Fn(&[f64]) -> f64, p: &[f64], i: usize, j: usize, h: f64) -> f64 {
    let g = |q: &[f64]| partial(f, q, j, h);
    partial(&g, p, i, h)
}

pub fn fd_hessian(f: &dyn Fn(&[f64]) -> f64, p: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = p.len();
    (0..n)
        .map(|i| (0..n).map(|j| second_partial(f, p, i, j, h)).collect())
        .collect()
}

/// Jacobian `J[i][j] = ∂_j v^i` of a vector-valued closure.
pub fn fd_jacobian(v: &dyn Fn(&[f64]) -> Vec<f64>, p: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = p.len();
    let plus: Vec<Vec<f64>> = (0..n).map(|j| v(&shifted(p, j, h))).collect();
    let minus: Vec<Vec<f64>> = (0..n).map(|j| v(&shifted(p, j, -h))).collect();
    let m = v(p).len();
    (0..m)
        .map(|i| (0..n).map(|j| (plus[j][i] - minus[j][i]) / (2.0 * h)).collect())
        .collect()
}

pub fn inverse2(g: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    vec![vec![g[1][1] / det, -g[0][1] / det], vec![-g[1][0] / det, g[0][0] / det]]
}

/// Levi-Civita symbols `Γ[k][i][j]` of a 2D metric from central differences.
pub fn fd_christoffel2(g: MetricFn, p: &[f64], h: f64) -> Vec<Vec<Vec<f64>>> {
    let n = 2;
    let dg: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|m| {
            let gp = g(&shifted(p, m, h));
            let gm = g(&shifted(p, m, -h));
            (0..n)
                .map(|a| (0..n).map(|b| (gp[a][b] - gm[a][b]) / (2.0 * h)).collect())
                .collect()
        })
        .collect();
    let inv = inverse2(&g(p));
    (0..n)
        .map(|k| {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            (0..n)
                                .map(|l| 0.5 * inv[k][l] * (dg[i][l][j] + dg[j][l][i] - dg[l][i][j]))
                                .sum()
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// `R^l_ijk = ∂_i Γ^l_jk − ∂_j Γ^l_ik + Γ^l_im Γ^m_jk − Γ^l_jm Γ^m_ik`,
/// differentiating finite-difference Christoffels once more.
pub fn fd_curvature2(g: MetricFn, p: &[f64], h: f64) -> Vec<f64> {
    let n = 2;
    let gam = fd_christoffel2(g, p, h);
    let dgam: Vec<Vec<Vec<Vec<f64>>>> = (0..n)
        .map(|m| {
            let a = fd_christoffel2(g, &shifted(p, m, h), h);
            let b = fd_christoffel2(g, &shifted(p, m, -h), h);
            (0..n)
                .map(|k| {
                    (0..n)
                        .map(|i| (0..n).map(|j| (a[k][i][j] - b[k][i][j]) / (2.0 * h)).collect())
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut out = vec![0.0; n * n * n * n];
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut v = dgam[i][l][j][k] - dgam[j][l][i][k];
                    for m in 0..n {
                        v += gam[l][i][m] * gam[m][j][k] - gam[l][j][m] * gam[m][i][k];
                    }
                    out[((l * n + i) * n + j) * n + k] = v;
                }
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn flatten(m: &[Vec<f64>]) -> Vec<f64> {
    m.iter().flatten().copied().collect()
}

pub fn half_plane(p: &[f64]) -> Vec<Vec<f64>> {
    let w = 1.0 / (p[1] * p[1]);
    vec![vec![w, 0.0], vec![0.0, w]]
}

pub fn round_sphere(p: &[f64]) -> Vec<Vec<f64>> {
    let w = 4.0 / (1.0 + p[0] * p[0] + p[1] * p[1]).powi(2);
    vec![vec![w, 0.0], vec![0.0, w]]
}

pub fn hopf(p: &[f64]) -> Vec<Vec<f64>> {
    let w = 1.0 / (p[0] * p[0] + p[1] * p[1]);
    vec![vec![w, 0.0], vec![0.0, w]]
}

fn e67_denominator(p: &[f64]) -> f64 {
    (1.0 + (p[0] / 2.0).exp()).powi(2) + (1.0 + (p[1] / 2.0).exp()).powi(2)
}

pub fn e67(p: &[f64]) -> Vec<Vec<f64>> {
    let d = e67_denominator(p);
    vec![vec![p[0].exp() / d, 0.0], vec![0.0, p[1].exp() / d]]
}

/// `θ = −d ln D` for the e67 metric, by differencing `ln D`.
pub fn e67_lee_form(p: &[f64]) -> Vec<f64> {
    let f = |q: &[f64]| -e67_denominator(q).ln();
    (0..2).map(|i| partial(&f, p, i, 1e-5)).collect()
}

/// `g^{-1}θ`.
pub fn raise2(g: &[Vec<f64>], theta: &[f64]) -> Vec<f64> {
    let inv = inverse2(g);
    (0..2).map(|i| inv[i][0] * theta[0] + inv[i][1] * theta[1]).collect()
}

/// `(L_ξ g)_ij = ξ^k ∂_k g_ij + g_kj ∂_i ξ^k + g_ik ∂_j ξ^k`.
pub fn fd_lie_metric2(g: MetricFn, xi: &dyn Fn(&[f64]) -> Vec<f64>, p: &[f64], h: f64) -> Vec<f64> {
    let n = 2;
    let x = xi(p);
    let dxi = fd_jacobian(xi, p, h);
    let gp = g(p);
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut v = 0.0;
            for k in 0..n {
                let gij = |q: &[f64]| g(q)[i][j];
                v += x[k] * partial(&gij, p, k, h);
                v += gp[k][j] * dxi[k][i] + gp[i][k] * dxi[k][j];
            }
            out[i * n + j] = v;
        }
    }
    out
}
