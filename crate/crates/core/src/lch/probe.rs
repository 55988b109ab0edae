//! Largest perturbation `θ + εα` of a Lee form whose induced metric
//! `u'⁻¹(∇θ_ε − θ_ε⊗θ_ε)` still gives an LCH structure.

use std::sync::Arc;

use crate::geom::{CheckReport, OneForm, SamplePlan};

use super::{check_lch, closedness_check, lee_constants, metric_from_lee, LCHStructure, LchError};

pub const DEFAULT_EPS_HI: f64 = 10.0;
const BISECTIONS: usize = 40;

#[derive(Clone, Debug)]
pub struct PerturbationProbe {
    /// Largest accepted `ε` in `[0, eps_hi]`; `0` when even `ε = 0` fails.
    pub eps_max: f64,
    pub eps_hi: f64,
    /// Scale used for the induced metric.
    pub u_prime: f64,
    /// Whether the unperturbed Lee field was radiant and Killing.
    pub radiant_lee: bool,
    pub iterations: usize,
    /// `check_lch` at `eps_max / 2`, when `eps_max > 0`.
    pub at_half: Option<CheckReport>,
    pub diagnostics: Vec<String>,
}

/// Bisects for the largest `ε` at which `u'⁻¹(∇θ_ε − θ_ε⊗θ_ε)` is positive
/// definite and passes `check_lch`. `u'` is the constant `u` of the
/// unperturbed structure when its Lee field is radiant, otherwise `1`.
pub fn lee_perturbation_probe(
    s: &LCHStructure,
    alpha: OneForm,
    eps_hi: f64,
    plan: &SamplePlan,
    tolerance: f64,
) -> Result<PerturbationProbe, LchError> {
    if alpha.dim() != s.dim() {
        return Err(LchError::Dimension(format!(
            "perturbation has dimension {}, structure {}",
            alpha.dim(),
            s.dim()
        )));
    }
    let closed = closedness_check(alpha.as_ref(), &s.chart, plan, tolerance);
    if !closed.passed {
        return Err(LchError::NotClosed(closed.max_residual));
    }
    let mut diagnostics = Vec::new();
    let (u_prime, radiant_lee) = match lee_constants(s, plan, tolerance) {
        Ok(c) if c.radiant_lch => (c.u, true),
        Ok(_) => {
            diagnostics.push("Lee field not radiant; using u' = 1".into());
            (1.0, false)
        }
        Err(e) => {
            diagnostics.push(format!("Lee constants unavailable ({e}); using u' = 1"));
            (1.0, false)
        }
    };
    let attempt = |eps: f64| -> Result<CheckReport, String> {
        let theta: OneForm = Arc::new(crate::geom::OneFormSum::new(s.lee_form.clone(), alpha.clone(), eps));
        let t = metric_from_lee(&s.chart, s.conn.clone(), theta, u_prime, plan).map_err(|e| e.to_string())?;
        Ok(check_lch(&t, plan, tolerance))
    };
    let accepted = |eps: f64, notes: &mut Vec<String>| match attempt(eps) {
        Ok(r) if r.passed => true,
        Ok(r) => {
            notes.push(format!("ε = {eps}: LCH check failed (residual {:e})", r.max_residual));
            false
        }
        Err(e) => {
            notes.push(format!("ε = {eps}: {e}"));
            false
        }
    };
    let mut iterations = 0;
    let eps_max = if accepted(eps_hi, &mut Vec::new()) {
        eps_hi
    } else if !accepted(0.0, &mut diagnostics) {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0, eps_hi);
        while iterations < BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if accepted(mid, &mut Vec::new()) {
                lo = mid;
            } else {
                hi = mid;
            }
            iterations += 1;
        }
        lo
    };
    let at_half = if eps_max > 0.0 {
        attempt(eps_max / 2.0).ok()
    } else {
        None
    };
    Ok(PerturbationProbe {
        eps_max,
        eps_hi,
        u_prime,
        radiant_lee,
        iterations,
        at_half,
        diagnostics,
    })
}
