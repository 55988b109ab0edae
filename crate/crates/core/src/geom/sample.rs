//! Seeded sampling of pointwise residuals over a chart.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::EvalError;

use super::chart::Chart;

pub const DEFAULT_SAMPLES: usize = 200;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_MARGIN: f64 = 0.05;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Residual recorded for a point whose residual is not finite.
const UNBOUNDED: f64 = f64::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("sample count must be positive")]
    NoSamples,
    #[error("margin {0} outside [0, 0.5)")]
    Margin(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    count: usize,
    seed: u64,
    margin: f64,
}

impl SamplePlan {
    pub fn new(count: usize, seed: u64, margin: f64) -> Result<Self, PlanError> {
        if count == 0 {
            return Err(PlanError::NoSamples);
        }
        if !(0.0..0.5).contains(&margin) {
            return Err(PlanError::Margin(margin));
        }
        Ok(SamplePlan { count, seed, margin })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn with_count(self, count: usize) -> Result<Self, PlanError> {
        Self::new(count, self.seed, self.margin)
    }
}

impl Default for SamplePlan {
    fn default() -> Self {
        SamplePlan {
            count: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            margin: DEFAULT_MARGIN,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub samples: usize,
    #[serde(default)]
    pub skipped: usize,
    #[serde(default)]
    pub extra: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl CheckReport {
    /// Report over per-point residuals in sample order.
    pub fn from_residuals(name: impl Into<String>, tolerance: f64, residuals: &[Result<f64, EvalError>]) -> Self {
        let mut max: f64 = 0.0;
        let mut sum = 0.0;
        let mut ok = 0usize;
        let mut first_error = None;
        for r in residuals {
            match r {
                Ok(v) => {
                    let v = if v.is_finite() { v.abs() } else { UNBOUNDED };
                    max = max.max(v);
                    sum += v;
                    ok += 1;
                }
                Err(e) => {
                    if first_error.is_none() {
                        first_error = Some(e.to_string());
                    }
                }
            }
        }
        let mut report = CheckReport {
            name: name.into(),
            max_residual: max,
            mean_residual: if ok > 0 { (sum / ok as f64).min(UNBOUNDED) } else { 0.0 },
            tolerance,
            passed: max <= tolerance,
            samples: ok,
            skipped: residuals.len() - ok,
            extra: BTreeMap::new(),
            warnings: Vec::new(),
            diagnostics: Vec::new(),
        };
        if ok == 0 {
            report.fail(format!(
                "every sampled point failed to evaluate (first error: {})",
                first_error.unwrap_or_else(|| "no points".into())
            ));
        } else if let Some(e) = first_error {
            report.warnings.push(format!(
                "{} of {} points skipped (first error: {e})",
                report.skipped,
                residuals.len()
            ));
        }
        report
    }

    /// Passing report for a check that is vacuous on this chart.
    pub fn trivial(name: impl Into<String>, tolerance: f64, warning: impl Into<String>) -> Self {
        CheckReport {
            name: name.into(),
            max_residual: 0.0,
            mean_residual: 0.0,
            tolerance,
            passed: true,
            samples: 0,
            skipped: 0,
            extra: BTreeMap::new(),
            warnings: vec![warning.into()],
            diagnostics: Vec::new(),
        }
    }

    /// Failing report that never evaluated a residual.
    pub fn failure(name: impl Into<String>, tolerance: f64, diagnostic: impl Into<String>) -> Self {
        let mut r = CheckReport::trivial(name, tolerance, "");
        r.warnings.clear();
        r.fail(diagnostic);
        r
    }

    /// Marks the report failed and sets the residual to the unbounded sentinel.
    pub fn fail(&mut self, diagnostic: impl Into<String>) {
        self.max_residual = UNBOUNDED;
        self.passed = false;
        self.diagnostics.push(diagnostic.into());
    }

    /// Records an estimated constant. Non-finite values become diagnostics.
    pub fn set_extra(&mut self, key: impl Into<String>, value: f64) {
        let key = key.into();
        if value.is_finite() {
            self.extra.insert(key, value);
        } else {
            self.diagnostics.push(format!("{key} is not finite"));
        }
    }

    pub fn with_extra(mut self, key: impl Into<String>, value: f64) -> Self {
        self.set_extra(key, value);
        self
    }

    pub fn extra(&self, key: &str) -> Option<f64> {
        self.extra.get(key).copied()
    }

    /// Aggregate: passes iff every part passes. Part statistics are kept in
    /// `extra` under `<part>.max_residual` and `<part>.<key>`.
    pub fn combine(name: impl Into<String>, tolerance: f64, parts: Vec<CheckReport>) -> Self {
        let mut out = CheckReport {
            name: name.into(),
            max_residual: 0.0,
            mean_residual: 0.0,
            tolerance,
            passed: true,
            samples: 0,
            skipped: 0,
            extra: BTreeMap::new(),
            warnings: Vec::new(),
            diagnostics: Vec::new(),
        };
        if parts.is_empty() {
            return out;
        }
        let mut mean_sum = 0.0;
        for p in &parts {
            out.max_residual = out.max_residual.max(p.max_residual);
            mean_sum += p.mean_residual;
            out.samples = out.samples.max(p.samples);
            out.skipped = out.skipped.max(p.skipped);
            out.passed &= p.passed;
            out.extra.insert(format!("{}.max_residual", p.name), p.max_residual);
            for (k, v) in &p.extra {
                out.extra.insert(format!("{}.{k}", p.name), *v);
            }
            out.warnings
                .extend(p.warnings.iter().map(|w| format!("{}: {w}", p.name)));
            out.diagnostics
                .extend(p.diagnostics.iter().map(|d| format!("{}: {d}", p.name)));
        }
        out.mean_residual = mean_sum / parts.len() as f64;
        out
    }
}

/// Draws `plan.count` points uniformly from the margin-shrunk chart box.
pub fn sample_points(chart: &Chart, plan: &SamplePlan) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let m = plan.margin;
    (0..plan.count)
        .map(|_| {
            (0..chart.dim())
                .map(|i| {
                    let (lo, hi) = (chart.lo()[i], chart.hi()[i]);
                    let u: f64 = rng.random();
                    lo + (hi - lo) * (m + (1.0 - 2.0 * m) * u)
                })
                .collect()
        })
        .collect()
}

/// Evaluates `f` at every point, possibly in parallel, preserving order.
pub fn evaluate<T, F>(points: &[Vec<f64>], f: F) -> Vec<Result<T, EvalError>>
where
    T: Send,
    F: Fn(&[f64]) -> Result<T, EvalError> + Sync,
{
    points.par_iter().map(|p| f(p)).collect()
}

/// Samples a scalar residual and reports its statistics.
pub fn sample_check<F>(name: &str, property: F, chart: &Chart, plan: &SamplePlan, tolerance: f64) -> CheckReport
where
    F: Fn(&[f64]) -> Result<f64, EvalError> + Sync,
{
    let points = sample_points(chart, plan);
    let residuals = evaluate(&points, property);
    CheckReport::from_residuals(name, tolerance, &residuals)
}

/// Samples several named residuals at once. The report residual is the
/// pointwise maximum; each component's own maximum lands in `extra`.
pub fn sample_components<F>(
    name: &str,
    components: &[&str],
    property: F,
    chart: &Chart,
    plan: &SamplePlan,
    tolerance: f64,
) -> CheckReport
where
    F: Fn(&[f64]) -> Result<Vec<f64>, EvalError> + Sync,
{
    let points = sample_points(chart, plan);
    let rows = evaluate(&points, property);
    let mut comp_max = vec![0.0f64; components.len()];
    let combined: Vec<Result<f64, EvalError>> = rows
        .iter()
        .map(|r| match r {
            Ok(v) => {
                let mut m: f64 = 0.0;
                for (slot, x) in comp_max.iter_mut().zip(v) {
                    let x = if x.is_finite() { x.abs() } else { UNBOUNDED };
                    *slot = slot.max(x);
                    m = m.max(x);
                }
                Ok(m)
            }
            Err(e) => Err(e.clone()),
        })
        .collect();
    let mut report = CheckReport::from_residuals(name, tolerance, &combined);
    if report.samples > 0 {
        for (c, m) in components.iter().zip(comp_max) {
            report.set_extra(format!("{c}.max_residual"), m);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Chart {
        Chart::boxed(&[0.0, 0.0], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn plan_validation() {
        assert_eq!(SamplePlan::new(0, 1, 0.1), Err(PlanError::NoSamples));
        assert_eq!(SamplePlan::new(5, 1, 0.5), Err(PlanError::Margin(0.5)));
        assert!(SamplePlan::new(5, 1, 0.0).is_ok());
    }

    #[test]
    fn zero_and_unit_residuals() {
        let plan = SamplePlan::default();
        let r = sample_check("zero", |_| Ok(0.0), &unit_square(), &plan, 1e-6);
        assert!(r.passed);
        assert_eq!(r.max_residual, 0.0);
        assert_eq!(r.samples, 200);
        let r = sample_check("one", |_| Ok(1.0), &unit_square(), &plan, 0.5);
        assert!(!r.passed);
    }

    #[test]
    fn points_respect_margin() {
        let plan = SamplePlan::new(500, 7, 0.2).unwrap();
        for p in sample_points(&unit_square(), &plan) {
            assert!(p.iter().all(|&x| (0.2..=0.8).contains(&x)));
        }
    }

    #[test]
    fn all_domain_errors_fail() {
        let plan = SamplePlan::new(10, 1, 0.0).unwrap();
        let r = sample_check(
            "bad",
            |_| Err(EvalError::Domain("log".into())),
            &unit_square(),
            &plan,
            1.0,
        );
        assert!(!r.passed);
        assert_eq!(r.skipped, 10);
        assert!(!r.diagnostics.is_empty());
    }

    #[test]
    fn partial_errors_are_skipped() {
        let plan = SamplePlan::new(100, 3, 0.0).unwrap();
        let r = sample_check(
            "half",
            |p| {
                if p[0] < 0.5 {
                    Err(EvalError::Domain("left".into()))
                } else {
                    Ok(0.0)
                }
            },
            &unit_square(),
            &plan,
            1e-6,
        );
        assert!(r.passed);
        assert_eq!(r.samples + r.skipped, 100);
        assert!(r.skipped > 0 && r.samples > 0);
    }
}
