//! Experiment objective families and their gradient oracles.
//!
//! Two families are supported: a strongly convex quadratic
//! `q(x; X) = ½‖x − X‖²` and a sine-augmented variant
//! `q(x; X) = ½‖x − X‖² + ½ sin²(‖x − X‖)` which is non-convex but
//! gradient-dominated. Both vanish at their own sample center.
//!
//! Data can be served in two modes: a frozen finite sample set per agent
//! (uniform resampling), or a population mode that draws a fresh Gaussian
//! sample per call. Population mode with zero noise degenerates to the
//! exact gradient and is what all theory audits run on.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::Rng;

use crate::error::{Error, Result};
use crate::point::Point;
use crate::rng::{standard_normal_vec, Stream};

/// Fixed seed for the one-off Monte Carlo noise-variance estimate of the
/// sine-augmented objective. Recorded here so the estimate is reproducible.
pub const PL_SIGMA_MC_SEED: u64 = 0x5157_9c1e_baf0_3d21;
/// Draw count for the Monte Carlo noise-variance estimate.
pub const PL_SIGMA_MC_DRAWS: usize = 100_000;

/// Below this radius the radial factor sin(2r)/(2r) is evaluated at its
/// limit 1 to avoid 0/0; the gradient is then 2(x − sample).
const RADIAL_SINGULARITY: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// ½‖x − X‖²: strongly convex, μ = L = 1.
    ScQuadratic,
    /// ½‖x − X‖² + ½ sin²(‖x − X‖): gradient-dominated, L = 2.
    PlSine,
}

/// How each agent's samples are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataMode {
    /// Exactly `samples_per_agent` draws `Xⱼ = center + Zⱼ` frozen at
    /// construction; the oracle resamples indices uniformly.
    FiniteSample { samples_per_agent: usize },
    /// A fresh Gaussian sample per stochastic-gradient call.
    Population,
}

/// Shared data-generation settings for a run.
#[derive(Debug, Clone)]
pub struct DataModel {
    pub mode: DataMode,
    /// The common minimizer x* of the honest agents.
    pub truth: Point,
    /// Per-coordinate standard deviation of the sample noise Z.
    pub noise_std: f64,
}

impl DataModel {
    /// Materialize one agent's data set around `center`. Finite-sample mode
    /// draws and freezes the samples here; population mode stores only the
    /// center.
    pub fn build_agent_data(&self, center: Point, rng: &mut Stream) -> Result<AgentData> {
        let dim = center.dim();
        let frozen = match self.mode {
            DataMode::FiniteSample { samples_per_agent } => {
                if samples_per_agent == 0 {
                    return Err(Error::config("samples_per_agent must be >= 1"));
                }
                let mut samples = Vec::with_capacity(samples_per_agent);
                for _ in 0..samples_per_agent {
                    let mut s = center.clone();
                    let z = standard_normal_vec(rng, dim);
                    for (si, zi) in s.as_mut_slice().iter_mut().zip(&z) {
                        *si += self.noise_std * zi;
                    }
                    samples.push(s);
                }
                Some(samples)
            }
            DataMode::Population => None,
        };
        Ok(AgentData {
            center,
            noise_std: self.noise_std,
            frozen,
        })
    }
}

/// One agent's view of the data model.
#[derive(Debug, Clone)]
pub struct AgentData {
    pub center: Point,
    pub noise_std: f64,
    /// Present only in finite-sample mode.
    pub frozen: Option<Vec<Point>>,
}

/// Smoothness and curvature constants consumed by the validators and the
/// theorem bound.
#[derive(Debug, Clone, Copy)]
pub struct CurvatureConstants {
    pub mu: f64,
    pub lipschitz: f64,
    pub sigma_sq: f64,
}

/// Scalar objective value; the finite-difference oracles in the tests
/// differentiate this.
pub fn objective_value(kind: ObjectiveKind, x: &Point, sample: &Point) -> Result<f64> {
    sample.check_dim(x.dim())?;
    let r_sq = x.sub(sample).norm_sq();
    Ok(match kind {
        ObjectiveKind::ScQuadratic => 0.5 * r_sq,
        ObjectiveKind::PlSine => {
            let r = r_sq.sqrt();
            0.5 * r_sq + 0.5 * r.sin().powi(2)
        }
    })
}

/// Gradient of `q(·; sample)` at `x`.
///
/// For the sine-augmented family the gradient is
/// `(x − sample)·(1 + sin(2r)/(2r))` with `r = ‖x − sample‖`; the radial
/// factor is evaluated at its limit for r below `RADIAL_SINGULARITY`.
pub fn sample_gradient(kind: ObjectiveKind, x: &Point, sample: &Point) -> Result<Point> {
    sample.check_dim(x.dim())?;
    let diff = x.sub(sample);
    Ok(match kind {
        ObjectiveKind::ScQuadratic => diff,
        ObjectiveKind::PlSine => {
            let r = diff.norm();
            let radial = if r < RADIAL_SINGULARITY {
                1.0
            } else {
                (2.0 * r).sin() / (2.0 * r)
            };
            diff.scale(1.0 + radial)
        }
    })
}

/// One stochastic gradient draw from the agent's data.
///
/// Finite-sample mode picks an index uniformly from the frozen set;
/// population mode draws a fresh Gaussian sample. Deterministic given the
/// stream state.
pub fn stochastic_gradient(
    kind: ObjectiveKind,
    x: &Point,
    data: &AgentData,
    rng: &mut Stream,
) -> Result<Point> {
    data.center.check_dim(x.dim())?;
    match &data.frozen {
        Some(samples) => {
            if samples.is_empty() {
                return Err(Error::config("finite-sample data set is empty"));
            }
            let idx = rng.random_range(0..samples.len());
            sample_gradient(kind, x, &samples[idx])
        }
        None => {
            if data.noise_std == 0.0 {
                return sample_gradient(kind, x, &data.center);
            }
            let mut sample = data.center.clone();
            let z = standard_normal_vec(rng, x.dim());
            for (si, zi) in sample.as_mut_slice().iter_mut().zip(&z) {
                *si += data.noise_std * zi;
            }
            sample_gradient(kind, x, &sample)
        }
    }
}

/// Exact gradient of the idealized honest objective (sample = x*). This is
/// the reference for gradient-error diagnostics and the audits.
pub fn honest_population_gradient(kind: ObjectiveKind, x: &Point, x_star: &Point) -> Result<Point> {
    sample_gradient(kind, x, x_star)
}

/// `q_H(x) − q_H(x*)` for the idealized honest objective; nonnegative, zero
/// at x*.
pub fn population_suboptimality(kind: ObjectiveKind, x: &Point, x_star: &Point) -> Result<f64> {
    objective_value(kind, x, x_star)
}

/// Curvature constants for each objective family.
///
/// The quadratic has μ = L = 1 and σ² = d·noise_std² exactly. The
/// sine-augmented family has L = 2; its gradient-domination constant is
/// certified numerically on a radial grid, and its noise variance has no
/// closed form so it is estimated once by Monte Carlo and cached.
pub fn curvature(kind: ObjectiveKind, noise_std: f64, dim: usize) -> CurvatureConstants {
    match kind {
        ObjectiveKind::ScQuadratic => CurvatureConstants {
            mu: 1.0,
            lipschitz: 1.0,
            sigma_sq: dim as f64 * noise_std * noise_std,
        },
        ObjectiveKind::PlSine => CurvatureConstants {
            mu: certified_pl_constant(),
            lipschitz: 2.0,
            sigma_sq: pl_sigma_sq_estimate(noise_std, dim),
        },
    }
}

/// Radial derivative q'(r) = r + ½ sin(2r) of the sine-augmented profile.
pub fn pl_radial_derivative(r: f64) -> f64 {
    r + 0.5 * (2.0 * r).sin()
}

/// Radial profile q(r) = ½r² + ½ sin²(r).
pub fn pl_radial_value(r: f64) -> f64 {
    0.5 * r * r + 0.5 * r.sin().powi(2)
}

/// Grid used to certify the gradient-domination constant: r ∈ (0, 20] at
/// step 1e−3.
pub fn pl_certification_grid() -> impl Iterator<Item = f64> {
    (1..=20_000).map(|i| i as f64 * 1e-3)
}

/// Largest μ with ½q'(r)² ≥ μ·q(r) on the certification grid, rounded down
/// to 3 significant digits. Cached after the first call.
pub fn certified_pl_constant() -> f64 {
    static CELL: OnceLock<f64> = OnceLock::new();
    *CELL.get_or_init(|| {
        let min_ratio = pl_certification_grid()
            .map(|r| 0.5 * pl_radial_derivative(r).powi(2) / pl_radial_value(r))
            .fold(f64::INFINITY, f64::min);
        round_down_3_significant(min_ratio)
    })
}

fn round_down_3_significant(v: f64) -> f64 {
    assert!(v.is_finite() && v > 0.0);
    let exp = v.log10().floor();
    let scale = 10f64.powf(exp - 2.0);
    (v / scale).floor() * scale
}

/// Monte Carlo estimate of the gradient-noise second moment for the
/// sine-augmented family, measured at x = x* + e₁ against the idealized
/// gradient. Cached per (noise_std, dim); the seed is recorded in
/// [`PL_SIGMA_MC_SEED`].
pub fn pl_sigma_sq_estimate(noise_std: f64, dim: usize) -> f64 {
    if noise_std == 0.0 {
        return 0.0;
    }
    static CACHE: OnceLock<Mutex<HashMap<(u64, usize), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (noise_std.to_bits(), dim);
    if let Some(&v) = cache.lock().unwrap().get(&key) {
        return v;
    }
    let v = mc_sigma_sq(noise_std, dim, PL_SIGMA_MC_SEED, PL_SIGMA_MC_DRAWS);
    cache.lock().unwrap().insert(key, v);
    v
}

/// The raw Monte Carlo estimator behind [`pl_sigma_sq_estimate`]; exposed so
/// tests can rerun it with an independent seed.
pub fn mc_sigma_sq(noise_std: f64, dim: usize, seed: u64, draws: usize) -> f64 {
    let x_star = Point::zeros(dim);
    let x_eval = Point::axis(dim, 0, 1.0);
    let reference = honest_population_gradient(ObjectiveKind::PlSine, &x_eval, &x_star)
        .expect("dimensions agree");
    let data = AgentData {
        center: x_star,
        noise_std,
        frozen: None,
    };
    let mut rng = crate::rng::derive_stream(seed, &[]);
    let mut acc = 0.0;
    for _ in 0..draws {
        let g = stochastic_gradient(ObjectiveKind::PlSine, &x_eval, &data, &mut rng)
            .expect("dimensions agree");
        acc += g.sub(&reference).norm_sq();
    }
    acc / draws as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(v: &[f64]) -> Point {
        Point::from_vec(v.to_vec())
    }

    #[test]
    fn quadratic_gradient_at_center_is_zero() {
        let x = p(&[1.0, -2.0, 0.5]);
        let g = sample_gradient(ObjectiveKind::ScQuadratic, &x, &x).unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn sine_gradient_at_center_is_zero() {
        let x = p(&[1.0, -2.0, 0.5]);
        let g = sample_gradient(ObjectiveKind::PlSine, &x, &x).unwrap();
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn values_vanish_at_center() {
        let x = p(&[0.3, 0.7]);
        assert_eq!(objective_value(ObjectiveKind::ScQuadratic, &x, &x).unwrap(), 0.0);
        assert_eq!(objective_value(ObjectiveKind::PlSine, &x, &x).unwrap(), 0.0);
    }

    #[test]
    fn sine_gradient_matches_finite_difference_1d() {
        // d/dr [½r² + ½sin²r] at r = 1, central difference with step 1e−5.
        let h = 1e-5;
        let fd = (pl_radial_value(1.0 + h) - pl_radial_value(1.0 - h)) / (2.0 * h);
        let g = sample_gradient(ObjectiveKind::PlSine, &p(&[1.0]), &p(&[0.0])).unwrap();
        assert_relative_eq!(g[0], fd, epsilon = 1e-6);
    }

    #[test]
    fn gradient_dimension_mismatch_is_structured() {
        let err = sample_gradient(ObjectiveKind::ScQuadratic, &p(&[1.0, 2.0]), &p(&[1.0]))
            .unwrap_err();
        match err {
            crate::error::Error::DimensionMismatch { expected, got } => {
                assert_eq!((expected, got), (2, 1));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn population_gradient_identity_displacement() {
        let x_star = p(&[2.0, -1.0]);
        let u = p(&[0.25, 1.5]);
        let g = honest_population_gradient(ObjectiveKind::ScQuadratic, &x_star.add(&u), &x_star)
            .unwrap();
        assert_eq!(g, u);
        let g0 = honest_population_gradient(ObjectiveKind::ScQuadratic, &x_star, &x_star).unwrap();
        assert_eq!(g0.norm(), 0.0);
    }

    #[test]
    fn population_gradient_sine_at_radius_pi() {
        // factor 1 + sin(2π)/(2π) = 1, so the gradient is e₁·π.
        let d = 4;
        let x_star = Point::zeros(d);
        let x = Point::axis(d, 0, std::f64::consts::PI);
        let g = honest_population_gradient(ObjectiveKind::PlSine, &x, &x_star).unwrap();
        assert_relative_eq!(g[0], std::f64::consts::PI, epsilon = 1e-12);
        assert!(g.as_slice()[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn suboptimality_values() {
        let x_star = Point::zeros(3);
        assert_eq!(
            population_suboptimality(ObjectiveKind::PlSine, &x_star, &x_star).unwrap(),
            0.0
        );
        let x = Point::axis(3, 1, 2.0);
        assert_relative_eq!(
            population_suboptimality(ObjectiveKind::ScQuadratic, &x, &x_star).unwrap(),
            2.0
        );
        let xpi = Point::axis(3, 2, std::f64::consts::PI);
        assert_relative_eq!(
            population_suboptimality(ObjectiveKind::PlSine, &xpi, &x_star).unwrap(),
            std::f64::consts::PI.powi(2) / 2.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn quadratic_curvature_constants() {
        let c = curvature(ObjectiveKind::ScQuadratic, 1.0, 10);
        assert_eq!((c.mu, c.lipschitz, c.sigma_sq), (1.0, 1.0, 10.0));
        let c0 = curvature(ObjectiveKind::ScQuadratic, 0.0, 10);
        assert_eq!((c0.mu, c0.lipschitz, c0.sigma_sq), (1.0, 1.0, 0.0));
    }

    #[test]
    fn sine_lipschitz_certified_on_grid() {
        // Radial second derivative 1 + cos 2r and tangential factor
        // 1 + sin(2r)/(2r), both bounded by 2 on r ∈ (0, 50] at step 1e−3.
        let mut max_seen: f64 = 0.0;
        for i in 1..=50_000 {
            let r = i as f64 * 1e-3;
            let radial = 1.0 + (2.0 * r).cos();
            let tangential = 1.0 + (2.0 * r).sin() / (2.0 * r);
            max_seen = max_seen.max(radial.abs()).max(tangential.abs());
        }
        let c = curvature(ObjectiveKind::PlSine, 0.0, 10);
        assert!(max_seen <= c.lipschitz + 1e-9);
        // The bound is attained in the r → 0 limit.
        assert!(max_seen > c.lipschitz - 1e-2);
    }

    #[test]
    fn certified_pl_constant_is_grid_minimum_rounded_down() {
        let min_ratio = pl_certification_grid()
            .map(|r| 0.5 * pl_radial_derivative(r).powi(2) / pl_radial_value(r))
            .fold(f64::INFINITY, f64::min);
        let mu = certified_pl_constant();
        assert!(mu <= min_ratio);
        assert!(mu > 0.9 * min_ratio);
        let c = curvature(ObjectiveKind::PlSine, 0.0, 10);
        assert_eq!(c.mu, mu);
        assert!(c.mu <= c.lipschitz);
    }

    #[test]
    fn population_zero_noise_is_exact_gradient() {
        let x_star = p(&[1.0, 2.0]);
        let data = AgentData {
            center: x_star.clone(),
            noise_std: 0.0,
            frozen: None,
        };
        let x = p(&[4.0, 0.0]);
        let mut rng = crate::rng::derive_stream(1, &[]);
        let g = stochastic_gradient(ObjectiveKind::ScQuadratic, &x, &data, &mut rng).unwrap();
        assert_eq!(g, x.sub(&x_star));
    }

    #[test]
    fn finite_sample_average_over_all_indices() {
        // Averaging the quadratic oracle over every frozen index equals
        // x − mean(Xⁱ); enumeration is the oracle.
        let dm = DataModel {
            mode: DataMode::FiniteSample {
                samples_per_agent: 100,
            },
            truth: p(&[0.5, -0.5, 2.0]),
            noise_std: 1.0,
        };
        let mut rng = crate::rng::derive_stream(42, &[crate::rng::tag::DATA]);
        let data = dm.build_agent_data(dm.truth.clone(), &mut rng).unwrap();
        let samples = data.frozen.as_ref().unwrap();
        assert_eq!(samples.len(), 100);

        let x = p(&[1.0, 1.0, 1.0]);
        let mut grad_mean = Point::zeros(3);
        for s in samples {
            grad_mean.add_scaled(1.0 / 100.0, &sample_gradient(ObjectiveKind::ScQuadratic, &x, s).unwrap());
        }
        let mut sample_mean = Point::zeros(3);
        for s in samples {
            sample_mean.add_scaled(1.0 / 100.0, s);
        }
        let expected = x.sub(&sample_mean);
        assert!(grad_mean.sub(&expected).norm() <= 1e-13);
    }

    #[test]
    fn empty_finite_sample_is_config_error() {
        let data = AgentData {
            center: p(&[0.0]),
            noise_std: 1.0,
            frozen: Some(vec![]),
        };
        let mut rng = crate::rng::derive_stream(1, &[]);
        let err =
            stochastic_gradient(ObjectiveKind::ScQuadratic, &p(&[1.0]), &data, &mut rng)
                .unwrap_err();
        assert!(matches!(err, crate::error::Error::Config(_)));
    }

    #[test]
    fn sigma_estimate_zero_noise_is_zero() {
        assert_eq!(pl_sigma_sq_estimate(0.0, 10), 0.0);
    }
}
