//! Jet-based operators against independent finite-difference oracles.

mod common;

use std::sync::Arc;

use common::*;
use lchlab::cones::{log_psi_metric, project_to_characteristic_surface, ConeSpec, PsiMethod};
use lchlab::expr::{eval_jet, Expression};
use lchlab::geom::ops::{self, constant_curvature_model, total_symmetry_residual};
use lchlab::geom::{
    relative_diff, Chart, Connection, ExprConnection, ExprMetric, ExprOneForm, ExprVectorField, LeviCivita, Metric,
    OneForm, SamplePlan, Tensor,
};
use lchlab::hesstat::{
    build_cone_structure, check_hessian_structure, check_potential_field, check_self_similar, dual_connection,
    duality_residual, ConePotential, HessianMetric, StatisticalStructure,
};
use lchlab::lch::{local_hessian_gauge, LCHStructure};

const POINTS: [[f64; 2]; 4] = [[0.7, 1.3], [-0.4, 0.9], [0.1, 1.8], [0.9, 0.6]];

fn flat(n: usize) -> Connection {
    Arc::new(ExprConnection::flat(n))
}

fn metric(rows: &[&[&str]]) -> Metric {
    Arc::new(ExprMetric::parse(rows).unwrap())
}

fn e67_structure() -> LCHStructure {
    let d = "((1+exp(x0/2))^2+(1+exp(x1/2))^2)";
    let g = metric(&[&[&format!("exp(x0)/{d}"), "0"], &["0", &format!("exp(x1)/{d}")]]);
    let theta: OneForm = Arc::new(
        ExprOneForm::parse(&[
            &format!("-(exp(x0/2)+exp(x0))/{d}"),
            &format!("-(exp(x1/2)+exp(x1))/{d}"),
        ])
        .unwrap(),
    );
    let chart = Chart::boxed(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
    LCHStructure::new(chart, flat(2), g, theta).unwrap()
}

#[test]
fn log_product_hessian_matches_finite_differences() {
    let e = Expression::parse("log(x0*x1)", 2).unwrap();
    let p = [2.0, 3.0];
    let jet = eval_jet(&e, &p, 2).unwrap().hessian();
    let fd = flatten(&fd_hessian(&|q: &[f64]| (q[0] * q[1]).ln(), &p, STEP));
    assert!(max_abs_diff(&jet, &fd) <= 1e-6);
    assert!(max_abs_diff(&jet, &[-0.25, 0.0, 0.0, -1.0 / 9.0]) < 1e-15);
}

#[test]
fn quartic_potential_metric_derivative() {
    let g = HessianMetric::new(flat(1), Arc::new(Expression::parse("x0^4", 1).unwrap()));
    let t = ops::covariant_derivative_metric(&g, flat(1).as_ref(), &[1.0]).unwrap();
    let fd = partial(&|q: &[f64]| 12.0 * q[0] * q[0], &[1.0], 0, STEP);
    assert!((t.get(&[0, 0, 0]) - fd).abs() < 1e-6);
    assert!((t.get(&[0, 0, 0]) - 24.0).abs() < 1e-12);
}

#[test]
fn hopf_lee_form_derivative() {
    let theta = ExprOneForm::parse(&["-2*x0/(x0^2+x1^2)", "-2*x1/(x0^2+x1^2)"]).unwrap();
    let closure = |q: &[f64]| {
        let r2 = q[0] * q[0] + q[1] * q[1];
        vec![-2.0 * q[0] / r2, -2.0 * q[1] / r2]
    };
    for p in [[1.0, 0.0], [0.6, -0.8], [1.5, 0.5]] {
        let t = ops::covariant_derivative_oneform(&theta, flat(2).as_ref(), &p).unwrap();
        let fd = flatten(&fd_jacobian(&closure, &p, STEP));
        assert!(max_abs_diff(t.data(), &fd) < 1e-6, "{p:?}");
    }
    let t = ops::covariant_derivative_oneform(&theta, flat(2).as_ref(), &[1.0, 0.0]).unwrap();
    assert!(max_abs_diff(t.data(), &[2.0, 0.0, 0.0, -2.0]) < 1e-14);
}

#[test]
fn e67_lee_field_derivative_is_not_a_multiple_of_identity() {
    let s = e67_structure();
    let xi = s.lee_field();
    let oracle = |q: &[f64]| raise2(&e67(q), &e67_lee_form(q));
    let mut diagonals = Vec::new();
    for p in [[0.0, 0.0], [0.7, -0.5], [-0.6, 0.4]] {
        let m = ops::covariant_derivative_vector(xi.as_ref(), flat(2).as_ref(), &p).unwrap();
        let fd = flatten(&fd_jacobian(&oracle, &p, STEP));
        assert!(max_abs_diff(m.data(), &fd) < 1e-5, "{p:?}");
        // ξ = −(1 + e^{−x/2})∂x − (1 + e^{−y/2})∂y
        let want = [0.5 * (-p[0] / 2.0).exp(), 0.0, 0.0, 0.5 * (-p[1] / 2.0).exp()];
        assert!(max_abs_diff(m.data(), &want) < 1e-12, "{p:?}");
        diagonals.push((m.get(&[0, 0]), m.get(&[1, 1])));
    }
    // ∇ξ = ½ Id at the origin but not elsewhere, so no single μ fits.
    assert!((diagonals[0].0 - 0.5).abs() < 1e-12 && (diagonals[0].1 - 0.5).abs() < 1e-12);
    let (a, b) = diagonals[1];
    assert!((a - b).abs() > 0.1);
}

#[test]
fn lie_derivatives_match_finite_differences() {
    let g = metric(&[&["1/x1^2", "0"], &["0", "1/x1^2"]]);
    let dilation = ExprVectorField::parse(&["x0", "x1"]).unwrap();
    for p in POINTS {
        let l = ops::lie_derivative_metric(g.as_ref(), &dilation, &p).unwrap();
        let fd = fd_lie_metric2(half_plane, &|q: &[f64]| q.to_vec(), &p, STEP);
        assert!(l.max_norm() < 1e-12);
        assert!(max_abs_diff(l.data(), &fd) < 1e-6);
    }
    let delta = metric(&[&["1", "0"], &["0", "1"]]);
    let l = ops::lie_derivative_metric(delta.as_ref(), &dilation, &[0.3, -0.2]).unwrap();
    assert_eq!(l.data(), &[2.0, 0.0, 0.0, 2.0]);
}

#[test]
fn e67_lee_field_is_killing() {
    let s = e67_structure();
    let xi = s.lee_field();
    let oracle = |q: &[f64]| raise2(&e67(q), &e67_lee_form(q));
    for p in [[0.0, 0.0], [0.7, -0.5], [-0.9, 0.9], [0.3, 0.8]] {
        let l = ops::lie_derivative_metric(s.metric.as_ref(), xi.as_ref(), &p).unwrap();
        assert!(l.max_norm() < 1e-12, "{p:?}");
        let fd = fd_lie_metric2(e67, &oracle, &p, STEP);
        assert!(max_abs_diff(&fd, &[0.0; 4]) < 1e-6, "{p:?}: {fd:?}");
    }
}

#[test]
fn levi_civita_curvature_matches_finite_differences() {
    let cases: [(MetricFn, &[&[&str]], f64); 2] = [
        (half_plane, &[&["1/x1^2", "0"], &["0", "1/x1^2"]], -1.0),
        (
            round_sphere,
            &[&["4/(1+x0^2+x1^2)^2", "0"], &["0", "4/(1+x0^2+x1^2)^2"]],
            1.0,
        ),
    ];
    for (oracle, rows, c) in cases {
        let g = metric(rows);
        let lc = LeviCivita::new(g.clone());
        for p in POINTS {
            let r = ops::curvature(&lc, &p).unwrap();
            let fd = fd_curvature2(oracle, &p, 2e-4);
            // Two nested central differences: truncation error ~h² times fourth derivatives of g.
            assert!(max_abs_diff(r.data(), &fd) < 1e-5 * (1.0 + r.max_norm()), "{p:?}");
            let model = constant_curvature_model(&ops::metric_at(g.as_ref(), &p).unwrap()).scaled(c);
            assert!(relative_diff(&r, &model) < 1e-12);
        }
    }
}

#[test]
fn total_symmetry_of_a_skewed_tensor() {
    assert_eq!(total_symmetry_residual(&Tensor::zeros(2, 3)), 0.0);
    // T_ijk = x_i δ_jk at (1, 0): only T_000 and T_011 are nonzero.
    let mut t = Tensor::zeros(2, 3);
    t.set(&[0, 0, 0], 1.0);
    t.set(&[0, 1, 1], 1.0);
    assert_eq!(total_symmetry_residual(&t), 0.5);
}

#[test]
fn hopf_metric_alone_fails_the_hessian_test() {
    let g = metric(&[&["1/(x0^2+x1^2)", "0"], &["0", "1/(x0^2+x1^2)"]]);
    for p in [[1.0, 0.0], [0.7, 0.4]] {
        let t = ops::covariant_derivative_metric(g.as_ref(), flat(2).as_ref(), &p).unwrap();
        let mut fd = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let gjk = |q: &[f64]| hopf(q)[j][k];
                    fd.push(partial(&gjk, &p, i, STEP));
                }
            }
        }
        assert!(max_abs_diff(t.data(), &fd) < 1e-6);
        assert!(total_symmetry_residual(&t) > 1e-2);
    }
    let chart = Chart::boxed(&[0.5, -1.0], &[2.0, 1.0]).unwrap();
    let r = check_hessian_structure(&chart, flat(2).as_ref(), g.as_ref(), &SamplePlan::default(), 1e-6);
    assert!(!r.passed && r.max_residual > 1e-2);
}

#[test]
fn dual_of_flat_connection_uses_third_derivatives() {
    let phi = "exp(x0)+exp(x1)+x0*x1";
    let g: Metric = Arc::new(HessianMetric::new(
        flat(2),
        Arc::new(Expression::parse(phi, 2).unwrap()),
    ));
    let dual = dual_connection(flat(2), g.clone()).unwrap();
    let f = |q: &[f64]| q[0].exp() + q[1].exp() + q[0] * q[1];
    for p in [[0.6, 0.8], [0.9, 0.5]] {
        let gamma = ops::connection_at(&dual, &p).unwrap();
        let h = fd_hessian(&f, &p, STEP);
        let inv = inverse2(&h);
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut want = 0.0;
                    for l in 0..2 {
                        let hij = |q: &[f64]| fd_hessian(&f, q, 1e-3)[i][j];
                        want += inv[k][l] * partial(&hij, &p, l, 1e-3);
                    }
                    assert!((gamma.get(&[k, i, j]) - want).abs() < 1e-5, "{k}{i}{j}");
                }
            }
        }
        assert!(duality_residual(flat(2).as_ref(), &dual, g.as_ref(), &p).unwrap() < 1e-12);
    }
}

#[test]
fn cone_potential_hessian_is_the_cone_metric() {
    let g = metric(&[&["1/x1^2", "0"], &["0", "1/x1^2"]]);
    let chart = Chart::new(vec![-1.0, 0.5], vec![1.0, 2.0], vec![false, true]).unwrap();
    let base = StatisticalStructure::new(chart, Arc::new(LeviCivita::new(g.clone())), g).unwrap();
    let lambda = 1.0 + 2f64.sqrt();
    let plan = SamplePlan::new(30, 42, 0.05).unwrap();
    let (cone, _) = build_cone_structure(&base, lambda, (0.5, 2.0), &plan, 1e-6).unwrap();
    let phi = ConePotential::new(3, lambda);
    for p in [[0.2, 1.1, 0.7], [-0.5, 1.7, 1.9]] {
        let h = ops::hessian(&phi, cone.conn.as_ref(), &p).unwrap();
        let s2 = p[2] * p[2];
        let gm = half_plane(&p[..2]);
        let want = [
            s2 * gm[0][0],
            s2 * gm[0][1],
            0.0,
            s2 * gm[1][0],
            s2 * gm[1][1],
            0.0,
            0.0,
            0.0,
            1.0,
        ];
        assert!(max_abs_diff(h.data(), &want) < 1e-12, "{p:?}");
    }
}

#[test]
fn self_similar_but_not_potential() {
    // s²dφ² + s ds·dφ + ds² in coordinates (φ, s).
    let g = metric(&[&["s^2", "s/2"], &["s/2", "1"]]);
    let xi = Arc::new(ExprVectorField::parse(&["0", "x1"]).unwrap());
    let chart = Chart::new(vec![-1.0, 0.5], vec![1.0, 2.0], vec![false, true]).unwrap();
    let plan = SamplePlan::new(50, 42, 0.05).unwrap();
    assert!(check_self_similar(&chart, g.as_ref(), xi.as_ref(), &plan, 1e-6).passed);
    assert!(!check_potential_field(&chart, g, xi, &plan, 1e-6).passed);

    let delta = metric(&[&["1", "0"], &["0", "1"]]);
    let linear = Arc::new(ExprVectorField::parse(&["x0", "2*x1"]).unwrap());
    let r = check_potential_field(&chart, delta, linear, &plan, 1e-6);
    assert!(r.passed, "{r:?}");
}

#[test]
fn barrier_metrics_match_finite_differences() {
    let o = ConeSpec::orthant(2).unwrap();
    let p = [1.0, 2.0];
    let fd = flatten(&fd_hessian(&|q: &[f64]| -(q[0] * q[1]).ln(), &p, STEP));
    assert!(max_abs_diff(log_psi_metric(&o, &p).unwrap().data(), &fd) < 1e-6);

    let l = ConeSpec::lorentz(2).unwrap();
    let p = [1.0, 0.0];
    let fd = flatten(&fd_hessian(
        &|q: &[f64]| (2.0 / (q[0] * q[0] - q[1] * q[1])).ln(),
        &p,
        STEP,
    ));
    let g = log_psi_metric(&l, &p).unwrap();
    assert!(max_abs_diff(g.data(), &fd) < 1e-6);
    assert!(max_abs_diff(g.data(), &[2.0, 0.0, 0.0, 2.0]) < 1e-14);
}

#[test]
fn projections_land_on_the_characteristic_surface() {
    let o = ConeSpec::orthant(2).unwrap();
    let y = project_to_characteristic_surface(&o, &[2.0, 3.0], PsiMethod::ClosedForm).unwrap();
    assert!((y[0] * y[1] - 1.0).abs() < 1e-15);
    assert!((y[1] - 1.224_744_871_391_589).abs() < 1e-12);
    let y = project_to_characteristic_surface(&o, &[1.0, 1.0], PsiMethod::ClosedForm).unwrap();
    assert_eq!(y, vec![1.0, 1.0]);
}

#[test]
fn lee_form_gauges() {
    let plan = SamplePlan::new(50, 42, 0.05).unwrap();
    let g = metric(&[&["1/(x0^2+x1^2)", "0"], &["0", "1/(x0^2+x1^2)"]]);
    let theta: OneForm = Arc::new(ExprOneForm::parse(&["-2*x0/(x0^2+x1^2)", "-2*x1/(x0^2+x1^2)"]).unwrap());
    let chart = Chart::boxed(&[0.5, -1.0], &[2.0, 1.0]).unwrap();
    let hopf_s = LCHStructure::new(chart, flat(2), g, theta).unwrap();
    let r = local_hessian_gauge(&hopf_s, &[1.0, 0.0], &[1.5, 0.5], 0.4, &plan, 1e-6).unwrap();
    // f = −2 ln r, so e^{−f} g = δ.
    assert!((r.f + 2.5f64.ln()).abs() < 1e-8);
    assert!(r.hessian.passed);

    let e = e67_structure();
    let p = [0.4, -0.3];
    let r = local_hessian_gauge(&e, &[0.0, 0.0], &p, 0.5, &plan, 1e-6).unwrap();
    let d = |q: &[f64]| (1.0 + (q[0] / 2.0).exp()).powi(2) + (1.0 + (q[1] / 2.0).exp()).powi(2);
    assert!((r.f - (d(&[0.0, 0.0]) / d(&p)).ln()).abs() < 1e-8);
    assert!(r.hessian.passed);
}
