//! Agent-side dynamics: the T-step two-time-scale local loop with tracker
//! carryover across rounds, and the Byzantine attack models.
//!
//! Within a round every agent resets its iterate to the broadcast point and
//! runs, for t = 0..T−1 with simultaneous updates,
//!
//! ```text
//! x_{t+1} = x_t − beta_k · y_t
//! y_{t+1} = (1 − alpha_k) · y_t + alpha_k · g(x_t)
//! ```
//!
//! where `g` is the stochastic gradient oracle. The tracker `y` is never
//! reset after initialization: the value leaving round k enters round k+1
//! unchanged.

use crate::error::{Error, Result};
use crate::objectives::{
    honest_population_gradient, stochastic_gradient, AgentData, DataModel, ObjectiveKind,
};
use crate::point::Point;
use crate::rng::{standard_normal_vec, Stream};

/// Iterates with norm above this abort the trajectory.
pub const DIVERGENCE_NORM: f64 = 1e12;

/// Tracker initialization at the very first round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YInit {
    /// y_{0,0} = 0 (default).
    Zero,
    /// y_{0,0} = one stochastic gradient at the initial broadcast point.
    FirstSample,
}

#[derive(Debug, Clone)]
pub struct HonestAgentState {
    pub agent_id: usize,
    /// Local iterate; reset to the broadcast at the start of every round.
    pub x: Point,
    /// Gradient tracker; persists across rounds.
    pub y: Point,
}

impl HonestAgentState {
    pub fn new(agent_id: usize, dim: usize) -> Self {
        HonestAgentState {
            agent_id,
            x: Point::zeros(dim),
            y: Point::zeros(dim),
        }
    }

    /// Apply the configured tracker initialization; consumes one draw from
    /// the agent's stream in the first-sample case.
    pub fn init_tracker(
        &mut self,
        init: YInit,
        kind: ObjectiveKind,
        data: &AgentData,
        x_bar0: &Point,
        rng: &mut Stream,
    ) -> Result<()> {
        match init {
            YInit::Zero => {}
            YInit::FirstSample => {
                self.y = stochastic_gradient(kind, x_bar0, data, rng)?;
            }
        }
        Ok(())
    }
}

/// Per-step record of (x, y, e) for t = 0..T, kept only when auditing.
/// `e_t = y_t − ∇q(x̄_k)` with the gradient taken at the broadcast point.
#[derive(Debug, Clone)]
pub struct LocalTrace {
    pub x: Vec<Point>,
    pub y: Vec<Point>,
    pub e: Vec<Point>,
}

/// Run one T-step local round from the broadcast `x_bar`.
///
/// Draws exactly `t_local` stochastic gradients in step order from `rng`.
/// Returns the outgoing message `x_{k,T}`; `state.y` holds `y_{k,T}` for
/// the next round. When `grad_at_broadcast` is supplied a full (x, y, e)
/// trace is recorded.
#[allow(clippy::too_many_arguments)]
pub fn honest_local_round(
    state: &mut HonestAgentState,
    x_bar: &Point,
    alpha_k: f64,
    beta_k: f64,
    t_local: usize,
    kind: ObjectiveKind,
    data: &AgentData,
    rng: &mut Stream,
    round: u64,
    grad_at_broadcast: Option<&Point>,
) -> Result<(Point, Option<LocalTrace>)> {
    x_bar.check_dim(state.y.dim())?;
    if !(alpha_k > 0.0 && alpha_k <= 1.0) {
        return Err(Error::config(format!(
            "alpha_k must be in (0, 1], got {alpha_k}"
        )));
    }
    if !(beta_k >= 0.0 && beta_k <= alpha_k) {
        return Err(Error::config(format!(
            "beta_k must be in [0, alpha_k], got beta={beta_k}, alpha={alpha_k}"
        )));
    }

    state.x = x_bar.clone();
    let mut trace = grad_at_broadcast.map(|g| {
        let e0 = state.y.sub(g);
        LocalTrace {
            x: vec![state.x.clone()],
            y: vec![state.y.clone()],
            e: vec![e0],
        }
    });

    for t in 0..t_local {
        // Simultaneous update: the gradient is taken at x_t before the
        // iterate moves.
        let grad = stochastic_gradient(kind, &state.x, data, rng)?;
        state.x.add_scaled(-beta_k, &state.y);
        for (yj, gj) in state.y.as_mut_slice().iter_mut().zip(grad.as_slice()) {
            *yj = (1.0 - alpha_k) * *yj + alpha_k * gj;
        }

        if !state.x.is_finite() || !state.y.is_finite() || state.x.norm() > DIVERGENCE_NORM {
            return Err(Error::Divergence {
                agent: state.agent_id,
                round,
                step: t,
            });
        }

        if let (Some(tr), Some(g)) = (trace.as_mut(), grad_at_broadcast) {
            tr.x.push(state.x.clone());
            tr.y.push(state.y.clone());
            tr.e.push(state.y.sub(g));
        }
    }

    Ok((state.x.clone(), trace))
}

/// Byzantine behaviors. The shifted-mean attack with factor 2 mimics an
/// honest agent whose data is centered at 2·x*; the other two variants are
/// simpler adversaries for robustness experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ByzantineAttack {
    ShiftedMean { factor: f64 },
    SignFlip,
    LargeNoise { scale: f64 },
}

/// A Byzantine participant. Shifted-mean and sign-flip attackers keep a
/// persistent tracker and data set exactly like honest agents; the
/// large-noise attacker is stateless.
#[derive(Debug, Clone)]
pub struct ByzantineAgent {
    pub attack: ByzantineAttack,
    pub state: HonestAgentState,
    pub data: Option<AgentData>,
}

impl ByzantineAgent {
    /// Build the attacker's data set: shifted-mean centers at
    /// `factor · truth`, sign-flip runs on honest-centered data, and
    /// large-noise needs none.
    pub fn new(
        attack: ByzantineAttack,
        agent_id: usize,
        model: &DataModel,
        data_rng: &mut Stream,
    ) -> Result<Self> {
        let dim = model.truth.dim();
        let data = match attack {
            ByzantineAttack::ShiftedMean { factor } => {
                Some(model.build_agent_data(model.truth.scale(factor), data_rng)?)
            }
            ByzantineAttack::SignFlip => Some(model.build_agent_data(model.truth.clone(), data_rng)?),
            ByzantineAttack::LargeNoise { .. } => None,
        };
        Ok(ByzantineAgent {
            attack,
            state: HonestAgentState::new(agent_id, dim),
            data,
        })
    }

    /// Mirror the honest tracker initialization.
    pub fn init_tracker(
        &mut self,
        init: YInit,
        kind: ObjectiveKind,
        x_bar0: &Point,
        rng: &mut Stream,
    ) -> Result<()> {
        if let Some(data) = &self.data {
            self.state.init_tracker(init, kind, data, x_bar0, rng)?;
        }
        Ok(())
    }

    /// Produce this round's message.
    #[allow(clippy::too_many_arguments)]
    pub fn message(
        &mut self,
        x_bar: &Point,
        alpha_k: f64,
        beta_k: f64,
        t_local: usize,
        kind: ObjectiveKind,
        rng: &mut Stream,
        round: u64,
    ) -> Result<Point> {
        match self.attack {
            ByzantineAttack::ShiftedMean { .. } => {
                let data = self.data.as_ref().expect("shifted-mean attacker has data");
                let (m, _) = honest_local_round(
                    &mut self.state,
                    x_bar,
                    alpha_k,
                    beta_k,
                    t_local,
                    kind,
                    data,
                    rng,
                    round,
                    None,
                )?;
                Ok(m)
            }
            ByzantineAttack::SignFlip => {
                let data = self.data.as_ref().expect("sign-flip attacker has data");
                let (m, _) = honest_local_round(
                    &mut self.state,
                    x_bar,
                    alpha_k,
                    beta_k,
                    t_local,
                    kind,
                    data,
                    rng,
                    round,
                    None,
                )?;
                // Reflect the honest message through the broadcast point.
                Ok(x_bar.sub(&m.sub(x_bar)))
            }
            ByzantineAttack::LargeNoise { scale } => {
                let mut m = x_bar.clone();
                let z = standard_normal_vec(rng, x_bar.dim());
                for (mj, zj) in m.as_mut_slice().iter_mut().zip(&z) {
                    *mj += scale * zj;
                }
                Ok(m)
            }
        }
    }
}

/// Tracker deviation `y − ∇q(x̄)` against the idealized honest gradient at
/// the broadcast point.
pub fn gradient_error(
    y: &Point,
    x_bar: &Point,
    kind: ObjectiveKind,
    x_star: &Point,
) -> Result<Point> {
    x_bar.check_dim(y.dim())?;
    let g = honest_population_gradient(kind, x_bar, x_star)?;
    Ok(y.sub(&g))
}
