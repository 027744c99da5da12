//! Decaying two-time-scale step sizes and the parameter-condition
//! validators.
//!
//! Both step sizes share the decay 1/(1+h+k): the tracker step
//! `alpha_k = C_α/(1+h+k)` and the iterate step `beta_k = C_β/(1+h+k)`
//! with `C_β ≤ C_α`. The validators evaluate every inequality the
//! convergence guarantees impose and report both sides of each; a
//! violation is data, not an error, so the simulator can run any
//! basic-valid schedule and still record regime compliance.

use crate::error::{Error, Result};
use crate::objectives::CurvatureConstants;

/// Relative tolerance for the exact `C_β` equality checks.
const C_BETA_EQ_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Sc,
    Pl,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::Sc => write!(f, "sc"),
            Regime::Pl => write!(f, "pl"),
        }
    }
}

/// Which family of conditions a report covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Basic,
    Theorem(Regime),
    FilterCondition,
}

#[derive(Debug, Clone)]
pub struct ScheduleParams {
    pub c_alpha: f64,
    pub c_beta: f64,
    pub h: f64,
}

impl ScheduleParams {
    pub fn new(c_alpha: f64, c_beta: f64, h: f64) -> Result<Self> {
        if !(c_alpha.is_finite() && c_alpha > 0.0) {
            return Err(Error::config("c_alpha must be finite and > 0"));
        }
        if !(c_beta.is_finite() && c_beta > 0.0) {
            return Err(Error::config("c_beta must be finite and > 0"));
        }
        if !(h.is_finite() && h >= 0.0) {
            return Err(Error::config("h must be finite and >= 0"));
        }
        Ok(ScheduleParams { c_alpha, c_beta, h })
    }

    /// Tracker step size at round k.
    pub fn alpha(&self, k: u64) -> f64 {
        self.c_alpha / (1.0 + self.h + k as f64)
    }

    /// Iterate step size at round k.
    pub fn beta(&self, k: u64) -> f64 {
        self.c_beta / (1.0 + self.h + k as f64)
    }
}

/// One named inequality with both sides evaluated. `satisfied` means
/// `lhs ≤ rhs` (or equality within tolerance for the equality checks).
#[derive(Debug, Clone)]
pub struct NamedCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

impl NamedCheck {
    fn le(name: &str, lhs: f64, rhs: f64) -> Self {
        NamedCheck {
            name: name.to_string(),
            lhs,
            rhs,
            satisfied: lhs <= rhs,
        }
    }

    fn eq_rel(name: &str, lhs: f64, rhs: f64, rtol: f64) -> Self {
        let satisfied = (lhs - rhs).abs() <= rtol * rhs.abs();
        NamedCheck {
            name: name.to_string(),
            lhs,
            rhs,
            satisfied,
        }
    }
}

/// Outcome of one validator: every check it ran, with `satisfied` true iff
/// no check failed.
#[derive(Debug, Clone)]
pub struct RegimeReport {
    pub kind: ReportKind,
    pub checks: Vec<NamedCheck>,
    pub satisfied: bool,
}

impl RegimeReport {
    fn from_checks(kind: ReportKind, checks: Vec<NamedCheck>) -> Self {
        let satisfied = checks.iter().all(|c| c.satisfied);
        RegimeReport {
            kind,
            checks,
            satisfied,
        }
    }

    pub fn violations(&self) -> Vec<&NamedCheck> {
        self.checks.iter().filter(|c| !c.satisfied).collect()
    }
}

/// The three structural conditions every schedule must meet: ordering of
/// the constants, `alpha_0 ≤ 1`, and `L·T·beta_0 ≤ 1`.
pub fn validate_basic(
    params: &ScheduleParams,
    curvature: &CurvatureConstants,
    t_local: usize,
) -> RegimeReport {
    let checks = vec![
        NamedCheck::le("C_beta <= C_alpha", params.c_beta, params.c_alpha),
        NamedCheck::le("alpha_0 <= 1", params.alpha(0), 1.0),
        NamedCheck::le(
            "L T beta_0 <= 1",
            curvature.lipschitz * t_local as f64 * params.beta(0),
            1.0,
        ),
    ];
    RegimeReport::from_checks(ReportKind::Basic, checks)
}

/// Strongly convex regime conditions. Decaying quantities are evaluated at
/// k = 0, their binding point under the common 1/(1+h+k) decay.
pub fn validate_theorem_sc(
    params: &ScheduleParams,
    curvature: &CurvatureConstants,
    t_local: usize,
) -> RegimeReport {
    let mu = curvature.mu;
    let l = curvature.lipschitz;
    let t = t_local as f64;
    let lp1_4 = (l + 1.0).powi(4);
    let checks = vec![
        NamedCheck::le(
            "alpha_0 <= mu/(8^4 (L+1)^4 T)",
            params.alpha(0),
            mu / (8f64.powi(4) * lp1_4 * t),
        ),
        NamedCheck::le(
            "beta_0 <= mu/(12^4 L^2 T)",
            params.beta(0),
            mu / (12f64.powi(4) * l * l * t),
        ),
        NamedCheck::le(
            "beta_0/alpha_0 <= mu/(14^4 (L+1)^4 T)",
            params.beta(0) / params.alpha(0),
            mu / (14f64.powi(4) * lp1_4 * t),
        ),
        NamedCheck::le(
            "C_alpha >= 84^4 (L+1)^4/(6 mu^2)",
            84f64.powi(4) * lp1_4 / (6.0 * mu * mu),
            params.c_alpha,
        ),
        NamedCheck::eq_rel(
            "C_beta = 72/(mu T)",
            params.c_beta,
            72.0 / (mu * t),
            C_BETA_EQ_RTOL,
        ),
        NamedCheck::le(
            "h >= max{8^4 (L+1)^4 T C_alpha/mu, 72^4 L^2/(18 mu^2)}",
            (8f64.powi(4) * lp1_4 * t * params.c_alpha / mu)
                .max(72f64.powi(4) * l * l / (18.0 * mu * mu)),
            params.h,
        ),
    ];
    RegimeReport::from_checks(ReportKind::Theorem(Regime::Sc), checks)
}

/// Gradient-dominated regime conditions, same structure as the strongly
/// convex validator with its own constants.
pub fn validate_theorem_pl(
    params: &ScheduleParams,
    curvature: &CurvatureConstants,
    t_local: usize,
) -> RegimeReport {
    let mu = curvature.mu;
    let l = curvature.lipschitz;
    let t = t_local as f64;
    let mu2 = mu * mu;
    let lp1 = l + 1.0;
    let checks = vec![
        NamedCheck::le(
            "alpha_0 <= mu^2/(6^4 (L+1)^3 T)",
            params.alpha(0),
            mu2 / (6f64.powi(4) * lp1.powi(3) * t),
        ),
        NamedCheck::le(
            "beta_0 <= mu^2/(12^4 L^3 T)",
            params.beta(0),
            mu2 / (12f64.powi(4) * l.powi(3) * t),
        ),
        NamedCheck::le(
            "beta_0/alpha_0 <= mu^2/(12^4 (L+1)^4 T^2)",
            params.beta(0) / params.alpha(0),
            mu2 / (12f64.powi(4) * lp1.powi(4) * t * t),
        ),
        NamedCheck::le(
            "C_alpha >= 12^5 (L+1)^4 T/mu^3",
            12f64.powi(5) * lp1.powi(4) * t / (mu2 * mu),
            params.c_alpha,
        ),
        NamedCheck::eq_rel(
            "C_beta = 12/(mu T)",
            params.c_beta,
            12.0 / (mu * t),
            C_BETA_EQ_RTOL,
        ),
        NamedCheck::le(
            "h >= max{6^4 (L+1)^3 T C_alpha/mu^2, 12^5 L^3/mu^3}",
            (6f64.powi(4) * lp1.powi(3) * t * params.c_alpha / mu2)
                .max(12f64.powi(5) * l.powi(3) / (mu2 * mu)),
            params.h,
        ),
    ];
    RegimeReport::from_checks(ReportKind::Theorem(Regime::Pl), checks)
}

/// The contamination-ratio condition `f/(N−f) ≤ μ/(3L)` that keeps the
/// per-round contraction strict.
pub fn validate_filter_condition(
    f: usize,
    n: usize,
    curvature: &CurvatureConstants,
) -> Result<RegimeReport> {
    if f >= n {
        return Err(Error::config(format!(
            "filter condition requires f < N, got f={f}, N={n}"
        )));
    }
    let check = NamedCheck::le(
        "f/(N-f) <= mu/(3L)",
        f as f64 / (n - f) as f64,
        curvature.mu / (3.0 * curvature.lipschitz),
    );
    Ok(RegimeReport::from_checks(
        ReportKind::FilterCondition,
        vec![check],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_curvature() -> CurvatureConstants {
        CurvatureConstants {
            mu: 1.0,
            lipschitz: 1.0,
            sigma_sq: 0.0,
        }
    }

    #[test]
    fn alpha_formula() {
        let p = ScheduleParams::new(1.0, 1.0, 0.0).unwrap();
        assert_eq!(p.alpha(0), 1.0);
        assert_eq!(p.alpha(3), 0.25);
        let p = ScheduleParams::new(24.0, 24.0, 100.0).unwrap();
        assert_relative_eq!(p.alpha(0), 24.0 / 101.0);
    }

    #[test]
    fn beta_formula_reference_constants() {
        // 72/(mu T) with mu = 1, T = 3 gives C_beta = 24.
        let p = ScheduleParams::new(24.0, 24.0, 100.0).unwrap();
        assert_relative_eq!(p.beta(0), 24.0 / 101.0);
        // 12/(mu T) with mu = 1, T = 3 gives C_beta = 4.
        let p = ScheduleParams::new(4.0, 4.0, 100.0).unwrap();
        assert_relative_eq!(p.beta(0), 4.0 / 101.0);
        let p = ScheduleParams::new(4.0, 4.0, 0.0).unwrap();
        assert_eq!(p.beta(3), 1.0);
    }

    #[test]
    fn monotone_decreasing_positive() {
        let p = ScheduleParams::new(5.0, 0.8, 4.0).unwrap();
        let ks = [0u64, 1, 2, 10, 1_000, 1_000_000];
        for w in ks.windows(2) {
            assert!(p.alpha(w[0]) > p.alpha(w[1]));
            assert!(p.beta(w[0]) > p.beta(w[1]));
            assert!(p.alpha(w[1]) > 0.0 && p.beta(w[1]) > 0.0);
        }
    }

    #[test]
    fn ratio_is_constant_in_k() {
        let p = ScheduleParams::new(7.0, 2.5, 11.0).unwrap();
        for k in [0u64, 1, 10, 1_000, 1_000_000] {
            assert_relative_eq!(p.beta(k) / p.alpha(k), 2.5 / 7.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn basic_ordering_violation() {
        let p = ScheduleParams::new(1.0, 2.0, 0.0).unwrap();
        let report = validate_basic(&p, &unit_curvature(), 3);
        assert!(!report.satisfied);
        assert!(report
            .violations()
            .iter()
            .any(|c| c.name == "C_beta <= C_alpha"));
    }

    #[test]
    fn basic_step_bound_arithmetic() {
        // L T beta_0 = 3·24/101 < 1: satisfied.
        let p = ScheduleParams::new(24.0, 24.0, 100.0).unwrap();
        assert!(validate_basic(&p, &unit_curvature(), 3).satisfied);
        // L T beta_0 = 72/11 > 1: violated.
        let p = ScheduleParams::new(24.0, 24.0, 10.0).unwrap();
        let report = validate_basic(&p, &unit_curvature(), 3);
        assert!(!report.satisfied);
        assert!(report
            .violations()
            .iter()
            .any(|c| c.name == "L T beta_0 <= 1"));
    }

    /// Theorem-valid parameters for mu = L = 1 at a given T.
    fn theorem_sc_params(t: usize) -> ScheduleParams {
        let t = t as f64;
        let c_alpha = 84f64.powi(4) * 16.0 / 6.0;
        let c_beta = 72.0 / t;
        let h = (8f64.powi(4) * 16.0 * t * c_alpha).max(72f64.powi(4) / 18.0);
        ScheduleParams::new(c_alpha, c_beta, h).unwrap()
    }

    #[test]
    fn theorem_sc_requirements() {
        let curv = unit_curvature();
        let p = theorem_sc_params(3);
        let report = validate_theorem_sc(&p, &curv, 3);
        assert!(report.satisfied, "violations: {:?}", report.violations());
        // Required C_beta is 24 exactly and C_alpha >= 84^4·2^4/6.
        let cb = report
            .checks
            .iter()
            .find(|c| c.name == "C_beta = 72/(mu T)")
            .unwrap();
        assert_eq!(cb.rhs, 24.0);
        let ca = report
            .checks
            .iter()
            .find(|c| c.name.starts_with("C_alpha >="))
            .unwrap();
        assert_relative_eq!(ca.lhs, 84f64.powi(4) * 16.0 / 6.0);
    }

    #[test]
    fn theorem_sc_c_beta_mismatch_named() {
        let mut p = theorem_sc_params(3);
        p.c_beta = 23.9;
        let report = validate_theorem_sc(&p, &unit_curvature(), 3);
        assert!(!report.satisfied);
        assert!(report
            .violations()
            .iter()
            .any(|c| c.name == "C_beta = 72/(mu T)"));
    }

    #[test]
    fn theorem_sc_decay_preserves_bounds() {
        // If the k = 0 bounds pass, the decaying quantities keep passing.
        let curv = unit_curvature();
        let p = theorem_sc_params(3);
        assert!(validate_theorem_sc(&p, &curv, 3).satisfied);
        let a_bound = 1.0 / (8f64.powi(4) * 16.0 * 3.0);
        let b_bound = 1.0 / (12f64.powi(4) * 3.0);
        let r_bound = 1.0 / (14f64.powi(4) * 16.0 * 3.0);
        for k in [1u64, 10, 1_000, 1_000_000] {
            assert!(p.alpha(k) <= a_bound);
            assert!(p.beta(k) <= b_bound);
            assert!(p.beta(k) / p.alpha(k) <= r_bound);
        }
    }

    #[test]
    fn theorem_pl_requirements() {
        let curv = unit_curvature();
        let t = 3.0;
        // Twice the lower bound: the minimal C_alpha makes the ratio check
        // exactly tight, where rounding could flip it.
        let c_alpha = 2.0 * 12f64.powi(5) * 16.0 * t;
        let c_beta = 12.0 / t;
        let h = (6f64.powi(4) * 8.0 * t * c_alpha).max(12f64.powi(5));
        let p = ScheduleParams::new(c_alpha, c_beta, h).unwrap();
        let report = validate_theorem_pl(&p, &curv, 3);
        assert!(report.satisfied, "violations: {:?}", report.violations());
        let cb = report
            .checks
            .iter()
            .find(|c| c.name == "C_beta = 12/(mu T)")
            .unwrap();
        assert_eq!(cb.rhs, 4.0);
        let ca = report
            .checks
            .iter()
            .find(|c| c.name.starts_with("C_alpha >="))
            .unwrap();
        // The required lower bound itself is 12^5·(L+1)^4·T.
        assert_relative_eq!(ca.lhs, 12f64.powi(5) * 16.0 * 3.0);
    }

    #[test]
    fn theorem_pl_ratio_violation() {
        // C_alpha = C_beta = 4 makes the ratio 1, far above the bound.
        let p = ScheduleParams::new(4.0, 4.0, 1e12).unwrap();
        let report = validate_theorem_pl(&p, &unit_curvature(), 3);
        let ratio = report
            .checks
            .iter()
            .find(|c| c.name.starts_with("beta_0/alpha_0"))
            .unwrap();
        assert_eq!(ratio.lhs, 1.0);
        assert_relative_eq!(ratio.rhs, 1.0 / (12f64.powi(4) * 16.0 * 9.0));
        assert!(!ratio.satisfied);
    }

    #[test]
    fn reports_are_total() {
        // Every named condition appears exactly once per report.
        let p = ScheduleParams::new(5.0, 0.8, 4.0).unwrap();
        let curv = unit_curvature();
        for report in [
            validate_theorem_sc(&p, &curv, 3),
            validate_theorem_pl(&p, &curv, 3),
        ] {
            assert_eq!(report.checks.len(), 6);
            let mut names: Vec<&str> = report.checks.iter().map(|c| c.name.as_str()).collect();
            names.sort_unstable();
            names.dedup();
            assert_eq!(names.len(), 6);
        }
        assert_eq!(validate_basic(&p, &curv, 3).checks.len(), 3);
    }

    #[test]
    fn filter_condition_cases() {
        let curv = unit_curvature();
        // 10/40 = 0.25 <= 1/3.
        assert!(validate_filter_condition(10, 50, &curv).unwrap().satisfied);
        // f = 0 is always satisfied.
        assert!(validate_filter_condition(0, 7, &curv).unwrap().satisfied);
        // 17/33 > 1/3.
        assert!(!validate_filter_condition(17, 50, &curv).unwrap().satisfied);
        // f >= N is a configuration error.
        assert!(validate_filter_condition(50, 50, &curv).is_err());
    }
}
