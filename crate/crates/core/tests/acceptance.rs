//! Acceptance criteria 1–11. Prints one line per criterion and exits
//! non-zero if any of them fails.

use std::sync::Arc;
use std::time::{Duration, Instant};

use lchlab::cli::{list_examples, run_example, Overrides};
use lchlab::cones::{
    characteristic_function, default_surface_map, surface_statistical_structure, ConeSpec, PsiMethod,
    DEFAULT_MC_SAMPLES,
};
use lchlab::expr::Expression;
use lchlab::geom::{
    ops, relative_diff, relative_size, sample_check, sample_points, Chart, ExprConnection, ExprMetric, ExprOneForm,
    LeviCivita, Metric, OneForm, SamplePlan,
};
use lchlab::hesstat::{
    build_cone_structure, check_affine, check_hessian_structure, check_killing, check_radiant, check_statistical,
    estimate_constant_curvature, fiber_recovery, HessianMetric, StatisticalStructure,
};
use lchlab::lch::{
    build_mapping_torus, check_lch, koszul_check, lee_constants, lee_identity_residual, lee_perturbation_probe,
    metric_from_lee, monodromy_rank, LCHStructure, MappingTorusSpec, MonodromyCharacter, DEFAULT_EPS_HI,
};

const TOL: f64 = 1e-6;
const BUDGET: Duration = Duration::from_secs(60);

type Outcome = Result<(bool, String), String>;

fn plan() -> SamplePlan {
    SamplePlan::default()
}

fn flat(n: usize) -> Arc<ExprConnection> {
    Arc::new(ExprConnection::flat(n))
}

fn metric(rows: &[&[&str]]) -> Metric {
    Arc::new(ExprMetric::parse(rows).unwrap())
}

fn form(src: &[&str]) -> OneForm {
    Arc::new(ExprOneForm::parse(src).unwrap())
}

fn half_plane() -> StatisticalStructure {
    let g = metric(&[&["1/x1^2", "0"], &["0", "1/x1^2"]]);
    let chart = Chart::new(vec![-1.0, 0.5], vec![1.0, 2.0], vec![false, true]).unwrap();
    StatisticalStructure::new(chart, Arc::new(LeviCivita::new(g.clone())), g).unwrap()
}

fn round_sphere() -> StatisticalStructure {
    let g = metric(&[&["4/(1+x0^2+x1^2)^2", "0"], &["0", "4/(1+x0^2+x1^2)^2"]]);
    let chart = Chart::boxed(&[-0.8, -0.8], &[0.8, 0.8]).unwrap();
    StatisticalStructure::new(chart, Arc::new(LeviCivita::new(g.clone())), g).unwrap()
}

fn hopf() -> LCHStructure {
    let g = metric(&[&["1/(x0^2+x1^2)", "0"], &["0", "1/(x0^2+x1^2)"]]);
    let theta = form(&["-2*x0/(x0^2+x1^2)", "-2*x1/(x0^2+x1^2)"]);
    let chart = Chart::boxed(&[0.5, -1.0], &[2.0, 1.0]).unwrap();
    LCHStructure::new(chart, flat(2), g, theta).unwrap()
}

const E67_D: &str = "((1+exp(x0/2))^2+(1+exp(x1/2))^2)";

fn e67() -> LCHStructure {
    let g00 = format!("exp(x0)/{E67_D}");
    let g11 = format!("exp(x1)/{E67_D}");
    let t0 = format!("-(exp(x0/2)+exp(x0))/{E67_D}");
    let t1 = format!("-(exp(x1/2)+exp(x1))/{E67_D}");
    let chart = Chart::boxed(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
    LCHStructure::new(chart, flat(2), metric(&[&[&g00, "0"], &["0", &g11]]), form(&[&t0, &t1])).unwrap()
}

fn poincare() -> LCHStructure {
    let g = metric(&[&["1/x0^2", "0", "0"], &["0", "1/x0^2", "0"], &["0", "0", "1/x0^2"]]);
    let chart = Chart::new(vec![0.5, -1.0, -1.0], vec![2.0, 1.0, 1.0], vec![true, false, false]).unwrap();
    LCHStructure::new(chart, flat(3), g, form(&["-2/x0", "0", "0"])).unwrap()
}

fn torus_quotient() -> LCHStructure {
    let g = metric(&[&["1/x0^2", "0"], &["0", "1/x0^2"]]);
    let chart = Chart::new(vec![0.5, -1.0], vec![2.0, 1.0], vec![true, false]).unwrap();
    LCHStructure::new(chart, flat(2), g, form(&["-2/x0", "0"])).unwrap()
}

fn within(x: f64, expected: f64, tol: f64) -> bool {
    (x - expected).abs() <= tol
}

fn hessian_gate() -> Outcome {
    let p = plan();
    let chart = Chart::boxed(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
    let phi = Arc::new(Expression::parse("exp(x0)+exp(x1)", 2).map_err(|e| e.to_string())?);
    let g = HessianMetric::new(flat(2), phi);
    let good = check_hessian_structure(&chart, flat(2).as_ref(), &g, &p, TOL);
    let h = hopf();
    let bad = check_hessian_structure(&h.chart, h.conn.as_ref(), h.metric.as_ref(), &p, TOL);
    Ok((
        good.passed && !bad.passed && bad.max_residual > 1e-2,
        format!(
            "Hess(e^x0+e^x1) residual {:.3e}; Hopf metric residual {:.3e} (> 1e-2)",
            good.max_residual, bad.max_residual
        ),
    ))
}

fn curvature_oracle() -> Outcome {
    let p = plan();
    let h = estimate_constant_curvature(&half_plane(), &p).map_err(|e| e.to_string())?;
    let s = estimate_constant_curvature(&round_sphere(), &p).map_err(|e| e.to_string())?;
    Ok((
        within(h.c, -1.0, 1e-5) && within(s.c, 1.0, 1e-5),
        format!("half-plane c = {:.9}, sphere c = {:.9} (± 1e-5)", h.c, s.c),
    ))
}

fn cone_round_trip() -> Outcome {
    let p = plan();
    let tol = 1e-5;
    let lambda = 1.0 + 2f64.sqrt();
    let base = half_plane();
    let (cone, report) = build_cone_structure(&base, lambda, (0.5, 2.0), &p, tol).map_err(|e| e.to_string())?;
    let (_, fiber) = fiber_recovery(&cone, &base, &p, tol).map_err(|e| e.to_string())?;
    let part = |key: &str| report.extra(&format!("{key}.max_residual")).unwrap_or(f64::INFINITY);
    let (flat_r, radiant_r, potential_r, metric_form_r) =
        (part("flatness"), part("radiant"), part("potential"), part("hessian"));
    let fiber_metric = fiber.extra("metric.max_residual").unwrap_or(f64::INFINITY);
    let c = fiber.extra("curvature.c").unwrap_or(f64::NAN);
    let ok = [flat_r, radiant_r, potential_r, metric_form_r]
        .iter()
        .all(|r| *r <= tol)
        && fiber_metric <= tol
        && within(c, -1.0, 1e-4);
    Ok((
        ok,
        format!(
            "flatness {flat_r:.2e}, radiance {radiant_r:.2e}, metric form {metric_form_r:.2e}, potential {potential_r:.2e}; fiber metric {fiber_metric:.2e}, c = {c:.9}"
        ),
    ))
}

fn sphere_cone() -> Outcome {
    let p = plan();
    let (cone, _) = build_cone_structure(&round_sphere(), 1.0, (0.5, 2.0), &p, TOL).map_err(|e| e.to_string())?;
    let r = sample_check(
        "flat",
        |x| Ok(relative_size(&ops::curvature(cone.conn.as_ref(), x)?)),
        &cone.chart,
        &p,
        TOL,
    );
    Ok((
        r.passed,
        format!("curvature residual against zero {:.3e} (≤ 1e-6)", r.max_residual),
    ))
}

fn characteristic_function_checks() -> Outcome {
    let o2 = ConeSpec::orthant(2).map_err(|e| e.to_string())?;
    let x = [2.0, 3.0];
    let exact = 1.0 / 6.0;
    let closed = characteristic_function(&o2, &x, PsiMethod::ClosedForm).map_err(|e| e.to_string())?;
    let mc = characteristic_function(
        &o2,
        &x,
        PsiMethod::MonteCarlo {
            samples: DEFAULT_MC_SAMPLES,
            seed: 42,
        },
    )
    .map_err(|e| e.to_string())?;
    let mc_dev = (mc.value - exact).abs();
    let mut homogeneity: f64 = 0.0;
    for t in [0.5, 2.0, 7.0] {
        let y = [t * x[0], t * x[1]];
        let v = characteristic_function(&o2, &y, PsiMethod::ClosedForm).map_err(|e| e.to_string())?;
        homogeneity = homogeneity.max((v.value * t * t - closed.value).abs() / closed.value);
    }
    let ok = closed.value == exact && mc_dev <= 3.0 * mc.stderr && homogeneity <= 1e-9;
    Ok((
        ok,
        format!(
            "closed form {:?}; Monte Carlo {:?} ± {:.2e} (deviation {mc_dev:.2e}); homogeneity {homogeneity:.2e}",
            closed.value, mc.value, mc.stderr
        ),
    ))
}

fn surface_statistics() -> Outcome {
    let p = plan();
    let o3 = ConeSpec::orthant(3).map_err(|e| e.to_string())?;
    let map = default_surface_map(&o3).map_err(|e| e.to_string())?;
    let ls = surface_statistical_structure(&o3, map, &p, TOL).map_err(|e| e.to_string())?;
    let stat = check_statistical(&ls.structure, &p, TOL);
    let est = estimate_constant_curvature(&ls.structure, &p).map_err(|e| e.to_string())?;
    Ok((
        stat.passed && est.residual <= 1e-4 && est.c < 0.0,
        format!(
            "statistical residual {:.2e}; c = {:.9}, curvature residual {:.2e}",
            stat.max_residual, est.c, est.residual
        ),
    ))
}

fn lee_identity() -> Outcome {
    let p = plan();
    let s = hopf();
    let c = lee_constants(&s, &p, 1e-8).map_err(|e| e.to_string())?;
    let id = lee_identity_residual(&s, &c, &p, 1e-8);
    let back = metric_from_lee(&s.chart, s.conn.clone(), s.lee_form.clone(), c.u, &p).map_err(|e| e.to_string())?;
    let mut round_trip: f64 = 0.0;
    for x in sample_points(&s.chart, &p) {
        let a = ops::metric_at(back.metric.as_ref(), &x).map_err(|e| e.to_string())?;
        let b = ops::metric_at(s.metric.as_ref(), &x).map_err(|e| e.to_string())?;
        round_trip = round_trip.max(relative_diff(&a, &b));
    }
    let ok = within(c.a, 4.0, 1e-8)
        && within(c.mu, -2.0, 1e-8)
        && within(c.u, -2.0, 1e-8)
        && id.max_residual <= 1e-8
        && round_trip <= 1e-6;
    Ok((
        ok,
        format!(
            "a = {:.12}, mu = {:.12}, u = {:.12}; identity residual {:.2e}; round trip {round_trip:.2e}",
            c.a, c.mu, c.u, id.max_residual
        ),
    ))
}

fn mapping_torus() -> Outcome {
    let p = plan();
    let lambda = 1.0 + 2f64.sqrt();
    let base = half_plane();
    let automorphism = ["x0", "x1"]
        .iter()
        .map(|s| Expression::parse(s, 2))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let spec = MappingTorusSpec {
        base: base.clone(),
        automorphism,
        q: 2.0,
        lambda,
    };
    let torus = build_mapping_torus(&spec, &p, TOL).map_err(|e| e.to_string())?;
    let s = &torus.structure;
    let lch = check_lch(s, &p, TOL);
    let c = lee_constants(s, &p, TOL).map_err(|e| e.to_string())?;
    let koszul = koszul_check(&s.chart, s.conn.clone(), s.lee_form.clone(), &p, TOL);
    let (_, fiber) = fiber_recovery(&torus.cone, &base, &p, TOL).map_err(|e| e.to_string())?;
    let fiber_c = fiber.extra("curvature.c").unwrap_or(f64::NAN);
    let chi = MonodromyCharacter::parse_single_base(&["1"]).map_err(|e| e.to_string())?;
    let rank = monodromy_rank(&chi);
    let seam = torus.seam_report.max_residual;
    let ok = lch.passed
        && within(c.mu, -2.0 * lambda, 1e-6)
        && within(c.a, 4.0, 1e-6)
        && seam <= 1e-6
        && koszul.passed
        && c.u > 0.0
        && within(c.u, 2.0 * lambda - 4.0, 1e-6)
        && within(fiber_c, -1.0, 1e-4)
        && rank == 1;
    Ok((
        ok,
        format!(
            "lch {:.2e}; a = {:.9}, mu = {:.9} (−2λ = {:.9}), u = {:.9}; seam {seam:.2e}; koszul {:.2e}; fiber c = {fiber_c:.9}; rank {rank}",
            lch.max_residual,
            c.a,
            c.mu,
            -2.0 * lambda,
            c.u,
            koszul.max_residual
        ),
    ))
}

fn killing_not_affine() -> Outcome {
    let p = plan();
    let e = e67();
    let xi = e.lee_field();
    let killing = check_killing(&e.chart, e.metric.as_ref(), xi.as_ref(), &p, TOL);
    let radiant = check_radiant(&e.chart, e.conn.as_ref(), xi.as_ref(), &p, TOL);
    let h = poincare();
    let eta = h.lee_field();
    let affine = check_affine(&h.chart, h.conn.as_ref(), eta.as_ref(), &p, 1e-10);
    let h_killing = check_killing(&h.chart, h.metric.as_ref(), eta.as_ref(), &p, TOL);
    let ok = killing.max_residual <= 1e-6
        && radiant.max_residual >= 1e-2
        && affine.max_residual <= 1e-10
        && h_killing.max_residual >= 1e-2;
    Ok((
        ok,
        format!(
            "e67 Killing {:.2e}, radiant {:.2e}; half-space affine {:.2e}, Killing {:.2e}",
            killing.max_residual, radiant.max_residual, affine.max_residual, h_killing.max_residual
        ),
    ))
}

fn openness_probe() -> Outcome {
    let p = plan();
    let s = torus_quotient();
    let probe = lee_perturbation_probe(&s, form(&["0", "1"]), DEFAULT_EPS_HI, &p, TOL).map_err(|e| e.to_string())?;
    let half = probe.at_half.as_ref().map(|r| r.passed);
    let ok = probe.eps_max >= 1e-3 && half == Some(true);
    let mut detail = format!(
        "eps_max = {:e} (≥ 1e-3), check_lch at eps_max/2: {}",
        probe.eps_max,
        match half {
            Some(true) => "passed",
            Some(false) => "failed",
            None => "not run",
        }
    );
    if let Some(d) = probe.diagnostics.first() {
        detail.push_str(&format!("; {d}"));
    }
    Ok((ok, detail))
}

fn determinism() -> Outcome {
    let o = Overrides::default();
    let mut differing = Vec::new();
    let names = list_examples();
    for name in &names {
        let a = run_example(name, &o).map_err(|e| e.to_string())?.to_json();
        let b = run_example(name, &o).map_err(|e| e.to_string())?.to_json();
        if a != b {
            differing.push(*name);
        }
    }
    Ok((
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} examples, reports byte-identical", names.len())
        } else {
            format!("reports differ for {}", differing.join(", "))
        },
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("Hessian gate", hessian_gate),
        ("curvature oracle", curvature_oracle),
        ("cone round trip", cone_round_trip),
        ("sphere cone is flat", sphere_cone),
        ("characteristic function", characteristic_function_checks),
        ("surface statistics", surface_statistics),
        ("Lee identity", lee_identity),
        ("mapping torus", mapping_torus),
        ("Killing-not-affine separation", killing_not_affine),
        ("openness probe", openness_probe),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok((ok, d)) => (ok && elapsed <= BUDGET, d),
            Err(e) => (false, format!("error: {e}")),
        };
        println!(
            "criterion {}: {} {name}: {detail} [{:.2} s]",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        if !ok {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", criteria.len());
    } else {
        println!(
            "acceptance: {} of {} criteria failed: {:?}",
            failed.len(),
            criteria.len(),
            failed
        );
        std::process::exit(1);
    }
}
