//! Pathwise audits of the per-round inequalities behind the convergence
//! analysis.
//!
//! Each check re-evaluates both sides of one inequality numerically on the
//! recorded traces and reports the slack (rhs − lhs). The tracker-step,
//! tracker-sum, and round-step checks hold pathwise only when the gradient
//! oracle is exact, so they run only for noise-free configurations; the
//! local-drift and correction-norm checks are pathwise in all settings.
//! All checks assume the idealized (population) data model, where every
//! honest gradient vanishes at the common minimizer.

use crate::agents::LocalTrace;
use crate::error::{Error, Result};
use crate::objectives::CurvatureConstants;
use crate::point::Point;

/// Failures are slacks below −1e−9.
pub const SLACK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AuditCheck {
    /// Per local step: ‖e_{t+1}‖² ≤ (1−α)‖e_t‖² + αL²‖x_t − x̄‖².
    TrackerStepDecay,
    /// Per local step: ‖x_{t+1} − x̄‖² ≤ 2L²(t+1)²β²‖x̄ − x*‖²
    /// + 2(t+1)β²·Σ_{l≤t}‖e_l‖².
    LocalDriftBound,
    /// Per round: the honest average of Σ_t‖e_t‖² is at most
    /// 2T·W + 4L⁴T³β²‖x̄ − x*‖²; needs α ≤ 1/(2LT).
    TrackerSumBound,
    /// Per round: ‖x̄⁺ − x̄‖² ≤ 100L²T²β²‖x̄ − x*‖² + 40T²β²·W.
    RoundStepBound,
    /// Per round: ‖E_x‖ ≤ (2LTβ|B|/(μ|H|))‖∇q_H(x̄)‖ + (2β/|H|)ΣᵢΣₜ‖eᵢₜ‖.
    CorrectionNormBound,
}

impl AuditCheck {
    pub fn name(self) -> &'static str {
        match self {
            AuditCheck::TrackerStepDecay => "tracker_step_decay",
            AuditCheck::LocalDriftBound => "local_drift_bound",
            AuditCheck::TrackerSumBound => "tracker_sum_bound",
            AuditCheck::RoundStepBound => "round_step_bound",
            AuditCheck::CorrectionNormBound => "correction_norm_bound",
        }
    }

    pub fn all() -> [AuditCheck; 5] {
        [
            AuditCheck::TrackerStepDecay,
            AuditCheck::LocalDriftBound,
            AuditCheck::TrackerSumBound,
            AuditCheck::RoundStepBound,
            AuditCheck::CorrectionNormBound,
        ]
    }

    /// Whether the check is a pathwise statement under stochastic
    /// gradients, or only once the noise is switched off.
    pub fn pathwise_with_noise(self) -> bool {
        matches!(
            self,
            AuditCheck::LocalDriftBound | AuditCheck::CorrectionNormBound
        )
    }
}

/// Everything the audit needs about one completed round.
#[derive(Debug, Clone)]
pub struct RoundAuditRecord {
    pub k: u64,
    pub alpha: f64,
    pub beta: f64,
    /// ‖x̄_k − x*‖².
    pub dist_sq: f64,
    /// ‖∇q_H(x̄_k)‖.
    pub grad_norm: f64,
    pub w: f64,
    /// Per honest agent, the (x, y, e) step trace for t = 0..T.
    pub traces: Vec<LocalTrace>,
    /// The filter's effective perturbation of the honest average.
    pub e_x: Point,
    /// ‖x̄_{k+1} − x̄_k‖.
    pub x_bar_step: f64,
    pub byz_survivors: usize,
}

/// Worst observed slack of one check at one round, with the location of the
/// minimum.
#[derive(Debug, Clone, Copy)]
pub struct SlackEntry {
    pub check: AuditCheck,
    pub k: u64,
    pub agent: Option<usize>,
    pub step: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
}

impl SlackEntry {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Debug, Clone, Default)]
pub struct AuditReport {
    pub entries: Vec<SlackEntry>,
}

impl AuditReport {
    pub fn worst_slack(&self) -> f64 {
        self.entries
            .iter()
            .map(SlackEntry::slack)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn failures(&self) -> Vec<&SlackEntry> {
        self.entries
            .iter()
            .filter(|e| e.slack() < -SLACK_TOLERANCE)
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }
}

struct RoundMin {
    entry: Option<SlackEntry>,
}

impl RoundMin {
    fn new() -> Self {
        RoundMin { entry: None }
    }

    fn observe(&mut self, candidate: SlackEntry) {
        let replace = match &self.entry {
            None => true,
            Some(current) => candidate.slack() < current.slack(),
        };
        if replace {
            self.entry = Some(candidate);
        }
    }
}

/// Audit one trajectory's recorded rounds.
///
/// `noise_free` marks configurations with an exact gradient oracle; the
/// three checks that are pathwise only in that case are skipped otherwise.
/// The tracker-sum and round-step checks additionally require
/// `alpha_k ≤ 1/(2LT)`; the caller validates that before running.
pub fn audit_trajectory(
    records: &[RoundAuditRecord],
    curv: &CurvatureConstants,
    t_local: usize,
    n_honest: usize,
    noise_free: bool,
) -> Result<AuditReport> {
    let l = curv.lipschitz;
    let mu = curv.mu;
    let t_count = t_local;
    let mut report = AuditReport::default();

    for record in records {
        if record.traces.len() != n_honest {
            return Err(Error::config(
                "audit requires per-step traces for every honest agent",
            ));
        }
        let beta_sq = record.beta * record.beta;

        let mut step_decay = RoundMin::new();
        let mut drift = RoundMin::new();
        let mut sum_norm_sq = 0.0;
        let mut sum_norm = 0.0;

        for (idx, trace) in record.traces.iter().enumerate() {
            let x_bar = &trace.x[0];
            let mut e_sq_prefix = 0.0;
            for t in 0..t_count {
                let e_t_sq = trace.e[t].norm_sq();
                e_sq_prefix += e_t_sq;
                sum_norm_sq += e_t_sq;
                sum_norm += e_t_sq.sqrt();

                if noise_free {
                    let drift_t_sq = trace.x[t].sub(x_bar).norm_sq();
                    step_decay.observe(SlackEntry {
                        check: AuditCheck::TrackerStepDecay,
                        k: record.k,
                        agent: Some(idx),
                        step: Some(t),
                        lhs: trace.e[t + 1].norm_sq(),
                        rhs: (1.0 - record.alpha) * e_t_sq
                            + record.alpha * l * l * drift_t_sq,
                    });
                }

                let steps = (t + 1) as f64;
                drift.observe(SlackEntry {
                    check: AuditCheck::LocalDriftBound,
                    k: record.k,
                    agent: Some(idx),
                    step: Some(t),
                    lhs: trace.x[t + 1].sub(x_bar).norm_sq(),
                    rhs: 2.0 * l * l * steps * steps * beta_sq * record.dist_sq
                        + 2.0 * steps * beta_sq * e_sq_prefix,
                });
            }
        }

        if let Some(entry) = drift.entry {
            report.entries.push(entry);
        }
        if noise_free {
            if let Some(entry) = step_decay.entry {
                report.entries.push(entry);
            }
            let t = t_count as f64;
            report.entries.push(SlackEntry {
                check: AuditCheck::TrackerSumBound,
                k: record.k,
                agent: None,
                step: None,
                lhs: sum_norm_sq / n_honest as f64,
                rhs: 2.0 * t * record.w + 4.0 * l.powi(4) * t.powi(3) * beta_sq * record.dist_sq,
            });
            report.entries.push(SlackEntry {
                check: AuditCheck::RoundStepBound,
                k: record.k,
                agent: None,
                step: None,
                lhs: record.x_bar_step * record.x_bar_step,
                rhs: 100.0 * l * l * t * t * beta_sq * record.dist_sq
                    + 40.0 * t * t * beta_sq * record.w,
            });
        }

        let t = t_count as f64;
        report.entries.push(SlackEntry {
            check: AuditCheck::CorrectionNormBound,
            k: record.k,
            agent: None,
            step: None,
            lhs: record.e_x.norm(),
            rhs: 2.0 * l * t * record.beta * record.byz_survivors as f64 * record.grad_norm
                / (mu * n_honest as f64)
                + 2.0 * record.beta * sum_norm / n_honest as f64,
        });
    }

    Ok(report)
}
