//! Characteristic-function estimates against exact integrals.

use std::f64::consts::PI;

use lchlab::cones::{characteristic_function, closed_form_expression, ConeError, ConeSpec, PsiMethod};

const SIGMAS: f64 = 3.0;

fn mc(samples: usize, seed: u64) -> PsiMethod {
    PsiMethod::MonteCarlo { samples, seed }
}

fn det3(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exact ψ for a 3-dimensional polyhedral cone: fan-triangulate the dual
/// cone spanned by the facet normals and add the simplicial integrals
/// `|det F| / Π ⟨f_i, x⟩`.
fn triangulated_psi(cone: &ConeSpec, x: &[f64]) -> f64 {
    let ConeSpec::Polyhedral(p) = cone else {
        panic!("polyhedral cone expected")
    };
    let rays = p.facets();
    let centre: Vec<f64> = (0..3).map(|i| rays.iter().map(|r| r[i]).sum::<f64>()).collect();
    // Two directions spanning the plane orthogonal to the centre.
    let seed = if centre[0].abs() < 0.9 * centre.iter().map(|v| v.abs()).fold(0.0, f64::max) {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let c = {
        let n = dot(&centre, &centre).sqrt();
        centre.iter().map(|v| v / n).collect::<Vec<_>>()
    };
    let proj = dot(&seed, &c);
    let mut u: Vec<f64> = (0..3).map(|i| seed[i] - proj * c[i]).collect();
    let nu = dot(&u, &u).sqrt();
    u.iter_mut().for_each(|v| *v /= nu);
    let w = [
        c[1] * u[2] - c[2] * u[1],
        c[2] * u[0] - c[0] * u[2],
        c[0] * u[1] - c[1] * u[0],
    ];
    let mut order: Vec<&Vec<f64>> = rays.iter().collect();
    order.sort_by(|a, b| {
        let ta = dot(a, &w).atan2(dot(a, &u));
        let tb = dot(b, &w).atan2(dot(b, &u));
        ta.total_cmp(&tb)
    });
    (1..order.len() - 1)
        .map(|k| {
            let (a, b, c) = (order[0], order[k], order[k + 1]);
            det3(a, b, c).abs() / (dot(a, x) * dot(b, x) * dot(c, x))
        })
        .sum()
}

fn within_sigmas(value: f64, stderr: f64, exact: f64) -> bool {
    (value - exact).abs() <= SIGMAS * stderr + 1e-12 * exact.abs()
}

fn square_pyramid() -> ConeSpec {
    ConeSpec::polyhedral(vec![
        vec![1.0, 0.0, 1.0],
        vec![0.0, 1.0, 1.0],
        vec![-1.0, 0.0, 1.0],
        vec![0.0, -1.0, 1.0],
    ])
    .unwrap()
}

fn regular_polygon_cone(sides: usize, tilt: f64) -> ConeSpec {
    ConeSpec::polyhedral(
        (0..sides)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / sides as f64 + tilt;
                vec![t.cos(), t.sin(), 1.0]
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn triangulation_oracle_matches_the_orthant() {
    // Generators e_i give facet normals e_i, a single simplicial cone.
    let cone = ConeSpec::polyhedral(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
    let x = [0.5, 2.0, 3.0];
    assert!((triangulated_psi(&cone, &x) - 1.0 / 3.0).abs() < 1e-14);
}

#[test]
fn simplicial_polyhedral_estimate_is_exact() {
    let cone = ConeSpec::polyhedral(vec![vec![1.0, 0.2, 0.1], vec![0.0, 1.0, 0.3], vec![0.4, -0.2, 1.0]]).unwrap();
    let x = [1.4, 1.0, 1.3];
    assert!(cone.contains(&x));
    let v = characteristic_function(&cone, &x, mc(1000, 5)).unwrap();
    let exact = triangulated_psi(&cone, &x);
    assert!((v.value - exact).abs() <= 1e-12 * exact, "{} vs {exact}", v.value);
    assert_eq!(v.stderr, 0.0);
}

#[test]
fn polyhedral_estimates_agree_with_the_triangulation() {
    let cases = [
        (square_pyramid(), vec![0.0, 0.0, 1.0]),
        (square_pyramid(), vec![0.3, -0.2, 1.0]),
        (square_pyramid(), vec![0.49, 0.49, 1.0]),
        (regular_polygon_cone(5, 0.3), vec![0.1, 0.2, 1.0]),
        (regular_polygon_cone(7, 0.0), vec![-0.3, 0.1, 2.0]),
    ];
    for (i, (cone, x)) in cases.iter().enumerate() {
        let exact = triangulated_psi(cone, x);
        let v = characteristic_function(cone, x, mc(200_000, 42 + i as u64)).unwrap();
        assert!(
            within_sigmas(v.value, v.stderr, exact),
            "case {i}: {} ± {} vs {exact}",
            v.value,
            v.stderr
        );
        assert!(v.stderr < 0.05 * exact, "case {i}: stderr {}", v.stderr);
    }
}

#[test]
fn lorentz_estimates_match_the_ball_volume_formula() {
    // ψ = vol(B^{n−1}) (n−1)! / t^n with t² = x0² − |x̄|².
    let cases: [(usize, Vec<f64>, f64); 3] = [
        (3, vec![2.0, 0.6, -0.8], 2.0 * PI),
        (3, vec![1.5, 0.0, 1.2], 2.0 * PI),
        (4, vec![2.0, 0.5, 0.5, -0.5], 4.0 * PI / 3.0 * 6.0),
    ];
    for (n, x, c) in cases {
        let cone = ConeSpec::lorentz(n).unwrap();
        let t = (x[0] * x[0] - x[1..].iter().map(|v| v * v).sum::<f64>()).sqrt();
        let exact = c / t.powi(n as i32);
        let v = characteristic_function(&cone, &x, mc(400_000, 11)).unwrap();
        assert!(
            within_sigmas(v.value, v.stderr, exact),
            "n={n}: {} ± {} vs {exact}",
            v.value,
            v.stderr
        );
    }
}

#[test]
fn product_estimate_factors() {
    let cone = ConeSpec::product(vec![ConeSpec::orthant(1).unwrap(), ConeSpec::lorentz(3).unwrap()]).unwrap();
    let x = [0.5, 2.0, 0.6, -0.8];
    let exact = 2.0 * (2.0 * PI / 3.0f64.powf(1.5));
    let v = characteristic_function(&cone, &x, mc(400_000, 3)).unwrap();
    assert!(
        within_sigmas(v.value, v.stderr, exact),
        "{} ± {} vs {exact}",
        v.value,
        v.stderr
    );
}

#[test]
fn closed_forms_cover_orthants_and_the_plane_lorentz_cone() {
    let o = ConeSpec::orthant(2).unwrap();
    let v = characteristic_function(&o, &[2.0, 3.0], PsiMethod::ClosedForm).unwrap();
    assert!((v.value - 1.0 / 6.0).abs() < 1e-15);
    let l = ConeSpec::lorentz(2).unwrap();
    let v = characteristic_function(&l, &[2.0, 1.0], PsiMethod::ClosedForm).unwrap();
    assert!((v.value - 2.0 / 3.0).abs() < 1e-15);
    assert!(closed_form_expression(&ConeSpec::lorentz(3).unwrap()).is_none());
    assert!(matches!(
        characteristic_function(&square_pyramid(), &[0.0, 0.0, 1.0], PsiMethod::ClosedForm),
        Err(ConeError::NoClosedForm(_))
    ));
}

#[test]
fn estimates_are_deterministic_per_seed() {
    let cone = regular_polygon_cone(6, 0.1);
    let x = [0.2, 0.1, 1.0];
    let a = characteristic_function(&cone, &x, mc(50_000, 9)).unwrap();
    let b = characteristic_function(&cone, &x, mc(50_000, 9)).unwrap();
    assert_eq!(a, b);
    let c = characteristic_function(&cone, &x, mc(50_000, 10)).unwrap();
    assert_ne!(a.value, c.value);
}

#[test]
fn tiny_sample_counts_report_divergence() {
    // Two or three draws often all miss the dual cone; every estimate that is
    // returned must still have a relative standard error of at most one half.
    let cone = regular_polygon_cone(12, 0.0);
    let x = [0.6, 0.0, 1.0];
    let mut diverged = 0;
    for seed in 0..200 {
        for samples in [2, 3] {
            match characteristic_function(&cone, &x, mc(samples, seed)) {
                Ok(v) => assert!(v.value > 0.0 && v.stderr <= 0.5 * v.value),
                Err(ConeError::Divergence { value, stderr }) => {
                    assert!(value <= 0.0 || stderr > 0.5 * value);
                    diverged += 1;
                }
                Err(e) => panic!("unexpected error {e}"),
            }
        }
    }
    assert!(diverged > 0);
}

#[test]
fn invalid_cones_and_points_are_rejected() {
    assert!(matches!(ConeSpec::orthant(0), Err(ConeError::Invalid(_))));
    assert!(matches!(ConeSpec::lorentz(1), Err(ConeError::Invalid(_))));
    assert!(matches!(ConeSpec::product(vec![]), Err(ConeError::Invalid(_))));
    assert!(ConeSpec::polyhedral(vec![vec![1.0, 0.0], vec![0.0, 0.0]]).is_err());
    assert!(ConeSpec::polyhedral(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).is_err());
    // A half-plane is not pointed.
    assert!(matches!(
        ConeSpec::polyhedral(vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]]),
        Err(ConeError::NotPointed)
    ));
    let o = ConeSpec::orthant(2).unwrap();
    assert!(matches!(
        characteristic_function(&o, &[1.0, -1.0], PsiMethod::ClosedForm),
        Err(ConeError::Outside(_))
    ));
    assert!(matches!(
        characteristic_function(&o, &[1.0], PsiMethod::ClosedForm),
        Err(ConeError::Dimension { got: 1, want: 2 })
    ));
    assert!(matches!(
        characteristic_function(&o, &[1.0, 1.0], mc(1, 0)),
        Err(ConeError::Invalid(_))
    ));
}

#[test]
fn cone_specs_round_trip_through_json() {
    let cone = ConeSpec::product(vec![square_pyramid(), ConeSpec::lorentz(3).unwrap()]).unwrap();
    let text = serde_json::to_string(&cone).unwrap();
    let back: ConeSpec = serde_json::from_str(&text).unwrap();
    assert_eq!(back, cone);
    assert!(serde_json::from_str::<ConeSpec>(r#"{"kind":"orthant","dim":0}"#).is_err());
}
