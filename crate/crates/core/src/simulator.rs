//! Round orchestration, Monte Carlo replication, and the per-round metric
//! series (optimality error, tracker error W, Lyapunov value V, theorem
//! bound, contraction coefficient).

use rayon::prelude::*;

use crate::agents::{
    honest_local_round, ByzantineAgent, ByzantineAttack, HonestAgentState, YInit,
};
use crate::audit::RoundAuditRecord;
use crate::error::{Error, Result};
use crate::objectives::{
    curvature, honest_population_gradient, population_suboptimality, AgentData,
    CurvatureConstants, DataModel, ObjectiveKind,
};
use crate::point::Point;
use crate::ratefit::{fit_loglog_tail, RateFit};
use crate::rng::{derive_stream, standard_normal_vec, tag, Stream};
use crate::schedule::{
    validate_basic, validate_filter_condition, validate_theorem_pl, validate_theorem_sc, Regime,
    RegimeReport, ScheduleParams,
};
use crate::server::{aggregate, byzantine_correction_term, ce_filter};

/// Distance of the initial global iterate from the honest minimizer.
pub const INITIAL_OFFSET: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub n_agents: usize,
    pub n_byzantine: usize,
    pub dim: usize,
    pub t_local: usize,
    pub n_rounds: u64,
    pub replications: usize,
    pub master_seed: u64,
    pub objective: ObjectiveKind,
    pub data: DataModel,
    pub attack: ByzantineAttack,
    pub schedule: ScheduleParams,
    pub regime: Regime,
    pub audit: bool,
    pub y_init: YInit,
}

impl SimulationConfig {
    /// Agents 0..f are Byzantine; the honest set is f..N−1.
    pub fn is_byzantine(&self, agent_id: usize) -> bool {
        agent_id < self.n_byzantine
    }

    pub fn honest_count(&self) -> usize {
        self.n_agents - self.n_byzantine
    }

    pub fn curvature(&self) -> CurvatureConstants {
        curvature(self.objective, self.data.noise_std, self.dim)
    }

    /// x̄₀ = x* + 10·u with u a unit vector derived from the master seed;
    /// shared by all replications so V₀ is reproducible.
    pub fn initial_x_bar(&self) -> Point {
        let mut rng = derive_stream(self.master_seed, &[tag::INIT]);
        let mut u = Point::from_vec(standard_normal_vec(&mut rng, self.dim));
        let n = u.norm();
        if n == 0.0 {
            u = Point::axis(self.dim, 0, 1.0);
        } else {
            u = u.scale(1.0 / n);
        }
        let mut x0 = self.data.truth.clone();
        x0.add_scaled(INITIAL_OFFSET, &u);
        x0
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::config("n_agents must be >= 1"));
        }
        if self.n_byzantine >= self.n_agents {
            return Err(Error::config(format!(
                "f < N violated: f={}, N={}",
                self.n_byzantine, self.n_agents
            )));
        }
        if self.t_local < 1 {
            return Err(Error::config("t_local must be >= 1"));
        }
        if self.replications < 1 {
            return Err(Error::config("replications must be >= 1"));
        }
        if self.dim < 1 {
            return Err(Error::config("dim must be >= 1"));
        }
        if self.data.truth.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: self.data.truth.dim(),
            });
        }
        if !self.data.noise_std.is_finite() || self.data.noise_std < 0.0 {
            return Err(Error::config("noise_std must be finite and >= 0"));
        }
        if self.audit && !matches!(self.data.mode, crate::objectives::DataMode::Population) {
            // The audited error traces are defined against the idealized
            // gradient, which frozen sample sets do not minimize.
            return Err(Error::config(
                "audit traces require data_mode=population",
            ));
        }
        let basic = validate_basic(&self.schedule, &self.curvature(), self.t_local);
        if !basic.satisfied {
            let names: Vec<String> = basic
                .violations()
                .iter()
                .map(|c| format!("{} (lhs={}, rhs={})", c.name, c.lhs, c.rhs))
                .collect();
            return Err(Error::config(format!(
                "schedule fails basic validation: {}",
                names.join("; ")
            )));
        }
        Ok(())
    }

    /// Validator reports in manifest order: basic, both theorem regimes,
    /// filter condition.
    pub fn regime_reports(&self) -> Result<Vec<RegimeReport>> {
        let curv = self.curvature();
        Ok(vec![
            validate_basic(&self.schedule, &curv, self.t_local),
            validate_theorem_sc(&self.schedule, &curv, self.t_local),
            validate_theorem_pl(&self.schedule, &curv, self.t_local),
            validate_filter_condition(self.n_byzantine, self.n_agents, &curv)?,
        ])
    }

    fn theorem_report(&self) -> RegimeReport {
        let curv = self.curvature();
        match self.regime {
            Regime::Sc => validate_theorem_sc(&self.schedule, &curv, self.t_local),
            Regime::Pl => validate_theorem_pl(&self.schedule, &curv, self.t_local),
        }
    }
}

/// One per-round metric record.
#[derive(Debug, Clone, Copy)]
pub struct MetricsRow {
    pub k: u64,
    pub alpha: f64,
    pub beta: f64,
    /// ‖x̄−x*‖² in the strongly convex regime, q_H(x̄)−q* in the
    /// gradient-dominated regime.
    pub opt_error: f64,
    pub w: f64,
    pub v: f64,
    /// Theorem bound applicable to V at this round (V₀ itself at k = 0).
    pub bound: f64,
    pub contraction: f64,
    pub byz_survivors: usize,
}

#[derive(Debug, Clone)]
pub struct TrajectoryMetrics {
    pub replication: usize,
    pub rows: Vec<MetricsRow>,
}

/// Average squared tracker error `(1/|H|)·Σ‖yᵢ − ∇q(x̄)‖²` at round start.
pub fn compute_w(
    honest_trackers: &[&Point],
    x_bar: &Point,
    kind: ObjectiveKind,
    x_star: &Point,
) -> Result<f64> {
    if honest_trackers.is_empty() {
        return Err(Error::config("compute_w requires at least one honest agent"));
    }
    let g = honest_population_gradient(kind, x_bar, x_star)?;
    let sum: f64 = honest_trackers.iter().map(|y| y.sub(&g).norm_sq()).sum();
    Ok(sum / honest_trackers.len() as f64)
}

/// The Lyapunov value: optimality error plus tracker error.
pub fn lyapunov(_regime: Regime, opt_error: f64, w: f64) -> f64 {
    opt_error + w
}

/// Theorem rate bound evaluated at round index k.
#[allow(clippy::too_many_arguments)]
pub fn theoretical_bound(
    regime: Regime,
    params: &ScheduleParams,
    curv: &CurvatureConstants,
    t_local: usize,
    n_byzantine: usize,
    n_honest: usize,
    v0: f64,
    k: u64,
) -> f64 {
    let t = t_local as f64;
    let denom = 1.0 + params.h + k as f64;
    let ca_sq = params.c_alpha * params.c_alpha;
    let l = curv.lipschitz;
    let f = n_byzantine as f64;
    let h_count = n_honest as f64;
    let lead = params.h * params.h * v0 / (denom * denom);
    match regime {
        Regime::Sc => {
            lead + 150.0 * (l + 1.0).powi(3) * t * t * curv.sigma_sq * ca_sq / (curv.mu * denom)
                + 128.0 * (l + 1.0).powi(2) * t * t * curv.sigma_sq * f * ca_sq / (denom * h_count)
        }
        Regime::Pl => {
            lead + 150.0 * t * curv.sigma_sq * ca_sq / denom
                + 112.0 * t * t * curv.sigma_sq * f * ca_sq / (denom * h_count)
        }
    }
}

/// Per-round contraction coefficient of the Lyapunov recursion, using the
/// observed number of Byzantine survivors.
pub fn contraction_diagnostic(
    regime: Regime,
    params: &ScheduleParams,
    k: u64,
    curv: &CurvatureConstants,
    t_local: usize,
    byz_survivors: usize,
    n_honest: usize,
) -> f64 {
    let beta = params.beta(k);
    contraction_with_beta(regime, beta, curv, t_local, byz_survivors, n_honest)
}

pub fn contraction_with_beta(
    regime: Regime,
    beta_k: f64,
    curv: &CurvatureConstants,
    t_local: usize,
    byz_survivors: usize,
    n_honest: usize,
) -> f64 {
    let t = t_local as f64;
    let b = byz_survivors as f64;
    let h = n_honest as f64;
    match regime {
        Regime::Sc => {
            1.0 - 23.0 * curv.mu * t * beta_k / 12.0
                + 17.0 * curv.lipschitz * t * beta_k * b / (3.0 * h)
        }
        Regime::Pl => {
            1.0 - 9.0 * curv.mu * t * beta_k / 6.0 + 4.0 * curv.lipschitz * t * beta_k * b / h
        }
    }
}

struct HonestUnit {
    state: HonestAgentState,
    data: AgentData,
    rng: Stream,
}

struct ByzUnit {
    agent: ByzantineAgent,
    rng: Stream,
}

/// One replication's world state.
pub struct Trajectory<'a> {
    config: &'a SimulationConfig,
    replication: usize,
    curv: CurvatureConstants,
    x_bar: Point,
    round: u64,
    v0: Option<f64>,
    honest: Vec<HonestUnit>,
    byzantine: Vec<ByzUnit>,
}

impl<'a> Trajectory<'a> {
    pub fn new(config: &'a SimulationConfig, replication: usize) -> Result<Self> {
        let seed = config.master_seed;
        let rep = replication as u64;
        let x_bar = config.initial_x_bar();

        let mut byzantine = Vec::with_capacity(config.n_byzantine);
        for id in 0..config.n_byzantine {
            let mut data_rng = derive_stream(seed, &[tag::DATA, rep, id as u64]);
            let agent = ByzantineAgent::new(config.attack, id, &config.data, &mut data_rng)?;
            let rng = derive_stream(seed, &[tag::AGENT, rep, id as u64]);
            byzantine.push(ByzUnit { agent, rng });
        }

        let mut honest = Vec::with_capacity(config.honest_count());
        for id in config.n_byzantine..config.n_agents {
            let mut data_rng = derive_stream(seed, &[tag::DATA, rep, id as u64]);
            let data = config
                .data
                .build_agent_data(config.data.truth.clone(), &mut data_rng)?;
            let state = HonestAgentState::new(id, config.dim);
            let rng = derive_stream(seed, &[tag::AGENT, rep, id as u64]);
            honest.push(HonestUnit { state, data, rng });
        }

        let mut traj = Trajectory {
            config,
            replication,
            curv: config.curvature(),
            x_bar,
            round: 0,
            v0: None,
            honest,
            byzantine,
        };
        traj.init_trackers()?;
        Ok(traj)
    }

    fn init_trackers(&mut self) -> Result<()> {
        let x0 = self.x_bar.clone();
        for unit in &mut self.honest {
            unit.state.init_tracker(
                self.config.y_init,
                self.config.objective,
                &unit.data,
                &x0,
                &mut unit.rng,
            )?;
        }
        for unit in &mut self.byzantine {
            unit.agent
                .init_tracker(self.config.y_init, self.config.objective, &x0, &mut unit.rng)?;
        }
        Ok(())
    }

    pub fn x_bar(&self) -> &Point {
        &self.x_bar
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn replication(&self) -> usize {
        self.replication
    }

    /// Run the next round with the configured schedule.
    pub fn run_round(&mut self) -> Result<(MetricsRow, Option<RoundAuditRecord>)> {
        let k = self.round;
        let alpha = self.config.schedule.alpha(k);
        let beta = self.config.schedule.beta(k);
        self.run_round_with_steps(alpha, beta)
    }

    /// Run the next round with explicit step sizes (used by the reduction
    /// checks, which pin alpha = 1).
    pub fn run_round_with_steps(
        &mut self,
        alpha: f64,
        beta: f64,
    ) -> Result<(MetricsRow, Option<RoundAuditRecord>)> {
        let cfg = self.config;
        let k = self.round;
        let x_bar = self.x_bar.clone();
        let truth = &cfg.data.truth;

        // Metrics are taken at the broadcast point before any update.
        let grad_ref = honest_population_gradient(cfg.objective, &x_bar, truth)?;
        let trackers: Vec<&Point> = self.honest.iter().map(|u| &u.state.y).collect();
        let w = compute_w(&trackers, &x_bar, cfg.objective, truth)?;
        let dist_sq = x_bar.sub(truth).norm_sq();
        let opt_error = match cfg.regime {
            Regime::Sc => dist_sq,
            Regime::Pl => population_suboptimality(cfg.objective, &x_bar, truth)?,
        };
        let v = lyapunov(cfg.regime, opt_error, w);
        if k == 0 {
            self.v0 = Some(v);
        }
        let v0 = self.v0.expect("rounds run in order from k = 0");

        let mut messages: Vec<(usize, Point)> = Vec::with_capacity(cfg.n_agents);
        let mut traces = Vec::new();
        for unit in &mut self.byzantine {
            let m = unit.agent.message(
                &x_bar,
                alpha,
                beta,
                cfg.t_local,
                cfg.objective,
                &mut unit.rng,
                k,
            )?;
            messages.push((unit.agent.state.agent_id, m));
        }
        for unit in &mut self.honest {
            let (m, trace) = honest_local_round(
                &mut unit.state,
                &x_bar,
                alpha,
                beta,
                cfg.t_local,
                cfg.objective,
                &unit.data,
                &mut unit.rng,
                k,
                cfg.audit.then_some(&grad_ref),
            )?;
            messages.push((unit.state.agent_id, m));
            if let Some(trace) = trace {
                traces.push(trace);
            }
        }
        messages.sort_unstable_by_key(|(id, _)| *id);

        let mut outcome = ce_filter(&messages, &x_bar, cfg.n_byzantine)?;
        outcome.attach_labels(&|id| cfg.is_byzantine(id));
        if outcome.nonfinite_survivor {
            let agent = *outcome
                .survivors
                .iter()
                .find(|&&id| !messages[id].1.is_finite())
                .expect("flag implies a non-finite survivor");
            return Err(Error::Divergence {
                agent,
                round: k,
                step: cfg.t_local,
            });
        }

        let survivor_messages: Vec<&Point> = outcome
            .survivors
            .iter()
            .map(|&id| &messages[id].1)
            .collect();
        let x_bar_next = aggregate(&survivor_messages)?;

        let bound = if k == 0 {
            v0
        } else {
            theoretical_bound(
                cfg.regime,
                &cfg.schedule,
                &self.curv,
                cfg.t_local,
                cfg.n_byzantine,
                cfg.honest_count(),
                v0,
                k - 1,
            )
        };
        let contraction = contraction_with_beta(
            cfg.regime,
            beta,
            &self.curv,
            cfg.t_local,
            outcome.byz_survivors,
            cfg.honest_count(),
        );

        let row = MetricsRow {
            k,
            alpha,
            beta,
            opt_error,
            w,
            v,
            bound,
            contraction,
            byz_survivors: outcome.byz_survivors,
        };

        let audit_record = if cfg.audit {
            let e_x = byzantine_correction_term(
                &outcome.survivors,
                &messages,
                &|id| cfg.is_byzantine(id),
                &x_bar,
            )?;
            Some(RoundAuditRecord {
                k,
                alpha,
                beta,
                dist_sq,
                grad_norm: grad_ref.norm(),
                w,
                traces,
                e_x,
                x_bar_step: x_bar_next.sub(&x_bar).norm(),
                byz_survivors: outcome.byz_survivors,
            })
        } else {
            None
        };

        self.x_bar = x_bar_next;
        self.round += 1;
        Ok((row, audit_record))
    }
}

/// Output of one replication.
pub struct TrajectoryRun {
    pub metrics: TrajectoryMetrics,
    pub audit_records: Vec<RoundAuditRecord>,
}

/// Run one full replication with the configured schedule.
pub fn run_trajectory(config: &SimulationConfig, replication: usize) -> Result<TrajectoryRun> {
    let mut traj = Trajectory::new(config, replication)?;
    let mut rows = Vec::with_capacity(config.n_rounds as usize);
    let mut audit_records = Vec::new();
    for _ in 0..config.n_rounds {
        let (row, audit) = traj.run_round()?;
        rows.push(row);
        if let Some(a) = audit {
            audit_records.push(a);
        }
    }
    Ok(TrajectoryRun {
        metrics: TrajectoryMetrics {
            replication,
            rows,
        },
        audit_records,
    })
}

/// Per-round aggregate over replications.
#[derive(Debug, Clone, Copy)]
pub struct SummaryRow {
    pub k: u64,
    pub alpha: f64,
    pub beta: f64,
    pub opt_error_mean: f64,
    pub opt_error_std: f64,
    pub w_mean: f64,
    pub w_std: f64,
    pub v_mean: f64,
    pub v_std: f64,
    pub bound: f64,
    pub contraction_mean: f64,
    pub byz_survivors_mean: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub rows: Vec<SummaryRow>,
    pub rate_fit: Option<RateFit>,
    /// Whether mean V stayed below the theorem bound at every round.
    pub bound_dominates: bool,
    /// Whether the configured regime's theorem validator passed, which is
    /// when `bound_dominates` is a guarantee rather than an observation.
    pub theorem_valid: bool,
}

pub struct ExperimentOutput {
    pub summary: ExperimentSummary,
    pub trajectories: Vec<TrajectoryMetrics>,
    pub audit_records: Vec<Vec<RoundAuditRecord>>,
}

/// Sample mean and standard deviation (two-pass; ddof = 1, zero for a
/// single replication). Summation order is fixed by replication index.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Run all replications (in parallel; results are indexed by replication so
/// the output is independent of worker count) and aggregate.
pub fn run_experiment(config: &SimulationConfig) -> Result<ExperimentOutput> {
    config.validate()?;

    let results: Vec<Result<TrajectoryRun>> = (0..config.replications)
        .into_par_iter()
        .map(|rep| {
            run_trajectory(config, rep).map_err(|e| Error::ReplicationFailed {
                replication: rep,
                source: Box::new(e),
            })
        })
        .collect();

    let mut runs = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (rep, res) in results.into_iter().enumerate() {
        match res {
            Ok(run) => runs.push(run),
            Err(e) => failures.push((rep, e.to_string())),
        }
    }
    if !failures.is_empty() {
        let details: Vec<String> = failures.iter().map(|(_, msg)| msg.clone()).collect();
        return Err(Error::DivergenceReport {
            failed: failures.len(),
            total: config.replications,
            details: details.join("; "),
        });
    }

    let trajectories: Vec<TrajectoryMetrics> = runs.iter().map(|r| r.metrics.clone()).collect();
    let audit_records: Vec<Vec<RoundAuditRecord>> =
        runs.into_iter().map(|r| r.audit_records).collect();
    let summary = summarize(config, &trajectories)?;

    Ok(ExperimentOutput {
        summary,
        trajectories,
        audit_records,
    })
}

/// Aggregate per-round statistics across replications.
pub fn summarize(
    config: &SimulationConfig,
    trajectories: &[TrajectoryMetrics],
) -> Result<ExperimentSummary> {
    let n_rounds = config.n_rounds as usize;
    if trajectories.is_empty() || trajectories.iter().any(|t| t.rows.len() != n_rounds) {
        return Err(Error::config("summarize requires complete trajectories"));
    }
    let curv = config.curvature();
    let v0_mean = mean_std(
        &trajectories
            .iter()
            .map(|t| t.rows[0].v)
            .collect::<Vec<_>>(),
    )
    .0;

    let mut rows = Vec::with_capacity(n_rounds);
    for k in 0..n_rounds {
        let collect = |f: &dyn Fn(&MetricsRow) -> f64| -> Vec<f64> {
            trajectories.iter().map(|t| f(&t.rows[k])).collect()
        };
        let (opt_mean, opt_std) = mean_std(&collect(&|r| r.opt_error));
        let (w_mean, w_std) = mean_std(&collect(&|r| r.w));
        let (v_mean, v_std) = mean_std(&collect(&|r| r.v));
        let (contraction_mean, _) = mean_std(&collect(&|r| r.contraction));
        let (byz_mean, _) = mean_std(&collect(&|r| r.byz_survivors as f64));
        let bound = if k == 0 {
            v0_mean
        } else {
            theoretical_bound(
                config.regime,
                &config.schedule,
                &curv,
                config.t_local,
                config.n_byzantine,
                config.honest_count(),
                v0_mean,
                k as u64 - 1,
            )
        };
        rows.push(SummaryRow {
            k: k as u64,
            alpha: trajectories[0].rows[k].alpha,
            beta: trajectories[0].rows[k].beta,
            opt_error_mean: opt_mean,
            opt_error_std: opt_std,
            w_mean,
            w_std,
            v_mean,
            v_std,
            bound,
            contraction_mean,
            byz_survivors_mean: byz_mean,
        });
    }

    let series: Vec<(u64, f64)> = rows.iter().map(|r| (r.k, r.v_mean)).collect();
    let rate_fit = fit_loglog_tail(&series);
    let bound_dominates = rows.iter().all(|r| r.v_mean <= r.bound * (1.0 + 1e-12));
    let theorem_valid = config.theorem_report().satisfied
        && validate_filter_condition(config.n_byzantine, config.n_agents, &curv)?.satisfied;

    Ok(ExperimentSummary {
        rows,
        rate_fit,
        bound_dominates,
        theorem_valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::DataMode;
    use approx::assert_relative_eq;

    fn base_config() -> SimulationConfig {
        SimulationConfig {
            n_agents: 4,
            n_byzantine: 0,
            dim: 2,
            t_local: 2,
            n_rounds: 5,
            replications: 1,
            master_seed: 11,
            objective: ObjectiveKind::ScQuadratic,
            data: DataModel {
                mode: DataMode::Population,
                truth: Point::from_vec(vec![1.0, -1.0]),
                noise_std: 0.0,
            },
            attack: ByzantineAttack::ShiftedMean { factor: 2.0 },
            schedule: ScheduleParams::new(5.0, 0.8, 4.0).unwrap(),
            regime: Regime::Sc,
            audit: false,
            y_init: YInit::Zero,
        }
    }

    #[test]
    fn beta_zero_keeps_global_iterate() {
        let mut config = base_config();
        config.schedule = ScheduleParams::new(1.0, 1e-300, 0.0).unwrap();
        let mut traj = Trajectory::new(&config, 0).unwrap();
        let x0 = traj.x_bar().clone();
        traj.run_round_with_steps(0.5, 0.0).unwrap();
        assert_eq!(traj.x_bar(), &x0);
    }

    #[test]
    fn single_agent_first_round_contraction() {
        // N=1, T=1, alpha=1, no noise: with a first-sample tracker the
        // first round contracts exactly by (1 − beta).
        let mut config = base_config();
        config.n_agents = 1;
        config.t_local = 1;
        config.y_init = YInit::FirstSample;
        let mut traj = Trajectory::new(&config, 0).unwrap();
        let x0 = traj.x_bar().clone();
        let beta = 0.3;
        traj.run_round_with_steps(1.0, beta).unwrap();
        let expected = {
            let mut e = x0.clone();
            e.add_scaled(-beta, &x0.sub(&config.data.truth));
            e
        };
        assert!(traj.x_bar().sub(&expected).norm() <= 1e-15);
    }

    #[test]
    fn byzantine_survivor_count_recorded() {
        let mut config = base_config();
        config.n_agents = 10;
        config.n_byzantine = 3;
        config.n_rounds = 3;
        let run = run_trajectory(&config, 0).unwrap();
        for row in &run.metrics.rows {
            assert!(row.byz_survivors <= 3);
        }
    }

    #[test]
    fn compute_w_known_values() {
        let x_bar = Point::zeros(2);
        let x_star = Point::zeros(2);
        // Gradient at x̄ = x* is zero, so W is the mean squared tracker norm.
        let y1 = Point::from_vec(vec![1.0, 0.0]);
        let y2 = Point::from_vec(vec![0.0, 3.0]);
        let w = compute_w(&[&y1, &y2], &x_bar, ObjectiveKind::ScQuadratic, &x_star).unwrap();
        assert_eq!(w, 5.0);
        let g = honest_population_gradient(
            ObjectiveKind::ScQuadratic,
            &Point::from_vec(vec![2.0, 2.0]),
            &x_star,
        )
        .unwrap();
        let w = compute_w(
            &[&g],
            &Point::from_vec(vec![2.0, 2.0]),
            ObjectiveKind::ScQuadratic,
            &x_star,
        )
        .unwrap();
        assert_eq!(w, 0.0);
    }

    #[test]
    fn compute_w_matches_resummation_oracle() {
        let mut rng = derive_stream(3, &[]);
        let x_star = Point::from_vec(standard_normal_vec(&mut rng, 4));
        let x_bar = Point::from_vec(standard_normal_vec(&mut rng, 4));
        let ys: Vec<Point> = (0..7)
            .map(|_| Point::from_vec(standard_normal_vec(&mut rng, 4)))
            .collect();
        let refs: Vec<&Point> = ys.iter().collect();
        let w = compute_w(&refs, &x_bar, ObjectiveKind::PlSine, &x_star).unwrap();

        let g = honest_population_gradient(ObjectiveKind::PlSine, &x_bar, &x_star).unwrap();
        let mut acc = 0.0;
        for y in &ys {
            let mut s = 0.0;
            for j in 0..4 {
                let d = y[j] - g[j];
                s += d * d;
            }
            acc += s;
        }
        assert!((w - acc / 7.0).abs() <= 1e-12 * acc.max(1.0));
    }

    #[test]
    fn lyapunov_is_additive() {
        assert_eq!(lyapunov(Regime::Sc, 0.0, 0.0), 0.0);
        assert_eq!(lyapunov(Regime::Pl, 2.0, 3.0), 5.0);
    }

    #[test]
    fn bound_reduces_to_leading_term_without_noise() {
        let params = ScheduleParams::new(10.0, 1.0, 100.0).unwrap();
        let curv = CurvatureConstants {
            mu: 1.0,
            lipschitz: 1.0,
            sigma_sq: 0.0,
        };
        for regime in [Regime::Sc, Regime::Pl] {
            for k in [0u64, 5, 50] {
                let b = theoretical_bound(regime, &params, &curv, 3, 2, 10, 7.0, k);
                let denom = 1.0 + 100.0 + k as f64;
                assert_relative_eq!(b, 100.0 * 100.0 * 7.0 / (denom * denom));
            }
        }
    }

    #[test]
    fn bound_decreases_and_drops_byzantine_term() {
        let params = ScheduleParams::new(10.0, 1.0, 100.0).unwrap();
        let curv = CurvatureConstants {
            mu: 1.0,
            lipschitz: 1.0,
            sigma_sq: 2.0,
        };
        let mut prev = f64::INFINITY;
        for k in 0..200u64 {
            let b = theoretical_bound(Regime::Sc, &params, &curv, 3, 2, 10, 7.0, k);
            assert!(b < prev);
            prev = b;
        }
        let with_f = theoretical_bound(Regime::Sc, &params, &curv, 3, 2, 10, 7.0, 3);
        let without_f = theoretical_bound(Regime::Sc, &params, &curv, 3, 0, 10, 7.0, 3);
        assert!(without_f < with_f);
        let t = 3.0f64;
        let denom = 104.0;
        let expected_without = 100.0 * 100.0 * 7.0 / (denom * denom)
            + 150.0 * 8.0 * t * t * 2.0 * 100.0 / denom;
        assert_relative_eq!(without_f, expected_without);
    }

    #[test]
    fn contraction_diagnostic_values() {
        let curv = CurvatureConstants {
            mu: 1.0,
            lipschitz: 1.0,
            sigma_sq: 0.0,
        };
        // beta = 0 gives exactly 1.
        assert_eq!(contraction_with_beta(Regime::Sc, 0.0, &curv, 3, 2, 10), 1.0);
        // Solving 1 − 23·beta/12 = 0 at mu = T = 1.
        let beta = 12.0 / 23.0;
        assert_relative_eq!(
            contraction_with_beta(Regime::Sc, beta, &curv, 1, 0, 10),
            0.0,
            epsilon = 1e-15
        );
        // Under the contamination condition the coefficient stays below 1.
        let (f, n) = (10usize, 50usize);
        let gamma = contraction_with_beta(Regime::Sc, 0.1, &curv, 3, f, n - f);
        assert!(gamma < 1.0);
        let gamma_pl = contraction_with_beta(Regime::Pl, 0.1, &curv, 3, f, n - f);
        assert!(gamma_pl < 1.0);
    }

    #[test]
    fn single_replication_summary_is_the_trajectory() {
        let config = base_config();
        let out = run_experiment(&config).unwrap();
        assert_eq!(out.trajectories.len(), 1);
        for (row, srow) in out.trajectories[0].rows.iter().zip(&out.summary.rows) {
            assert_eq!(row.v, srow.v_mean);
            assert_eq!(srow.v_std, 0.0);
        }
    }

    #[test]
    fn identical_config_and_seed_reproduce_bitwise() {
        let mut config = base_config();
        config.n_agents = 6;
        config.n_byzantine = 1;
        config.data.noise_std = 1.0;
        config.replications = 3;
        let a = run_experiment(&config).unwrap();
        let b = run_experiment(&config).unwrap();
        for (ra, rb) in a.summary.rows.iter().zip(&b.summary.rows) {
            assert_eq!(ra.v_mean.to_bits(), rb.v_mean.to_bits());
            assert_eq!(ra.opt_error_mean.to_bits(), rb.opt_error_mean.to_bits());
        }
    }

    #[test]
    fn replication_order_does_not_change_summary() {
        let mut config = base_config();
        config.replications = 4;
        config.data.noise_std = 0.5;
        let parallel = run_experiment(&config).unwrap();
        // Reversed manual execution order, same aggregation.
        let mut runs: Vec<TrajectoryMetrics> = (0..config.replications)
            .rev()
            .map(|rep| run_trajectory(&config, rep).unwrap().metrics)
            .collect();
        runs.sort_by_key(|t| t.replication);
        let summary = summarize(&config, &runs).unwrap();
        for (ra, rb) in parallel.summary.rows.iter().zip(&summary.rows) {
            assert_eq!(ra.v_mean.to_bits(), rb.v_mean.to_bits());
            assert_eq!(ra.v_std.to_bits(), rb.v_std.to_bits());
        }
    }

    #[test]
    fn rows_satisfy_lyapunov_additivity() {
        let mut config = base_config();
        config.n_agents = 8;
        config.n_byzantine = 2;
        config.data.noise_std = 1.0;
        let run = run_trajectory(&config, 0).unwrap();
        for row in &run.metrics.rows {
            assert_eq!(row.v, row.opt_error + row.w);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut config = base_config();
        config.n_byzantine = 4;
        assert!(matches!(config.validate(), Err(Error::Config(_))));
        let mut config = base_config();
        config.t_local = 0;
        assert!(config.validate().is_err());
        let mut config = base_config();
        config.schedule = ScheduleParams::new(2.0, 2.0, 0.0).unwrap();
        // alpha_0 = 2 > 1 fails basic validation.
        assert!(config.validate().is_err());
        // Audit traces are tied to the idealized data model.
        let mut config = base_config();
        config.audit = true;
        config.data.mode = DataMode::FiniteSample {
            samples_per_agent: 10,
        };
        assert!(config.validate().is_err());
    }
}
