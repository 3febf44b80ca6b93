//! Gaussian query sampling and zeroth-order pseudo-gradient estimates.
//!
//! Given the joint state `μ` and a radius `σ`, every player draws
//! `ξ^i ~ N(μ^i, σ^2 I_d)` and the game reveals `J_i(ξ)` to player `i`.
//!
//! - one-point: `m^i = J_i(ξ) (ξ^i - μ^i) / σ^2`
//! - two-point: `m^i = (J_i(ξ) - J_i(μ)) (ξ^i - μ^i) / σ^2`
//!
//! Both have conditional mean equal to the Gaussian-smoothed pseudo-gradient
//! at `μ`. The one-point residual has second moment `O(d / σ^2)`, the
//! two-point residual stays bounded as `σ → 0`.
//!
//! `σ` is never floored here. For tiny `σ` the difference `J_i(ξ) - J_i(μ)`
//! loses relative precision in double arithmetic; the learner warns about it.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::game::{Game, JointPoint};
use crate::stats::parallel_moments;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeedbackMode {
    OnePoint,
    TwoPoint,
}

impl FeedbackMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackMode::OnePoint => "one-point",
            FeedbackMode::TwoPoint => "two-point",
        }
    }
}

impl fmt::Display for FeedbackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeedbackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "one-point" | "onepoint" | "one_point" | "1" => Ok(FeedbackMode::OnePoint),
            "two-point" | "twopoint" | "two_point" | "2" => Ok(FeedbackMode::TwoPoint),
            other => Err(invalid(format!(
                "unknown feedback mode {other:?} (expected one-point or two-point)"
            ))),
        }
    }
}

/// Deterministic random stream addressed by `(seed, run, iteration, player)`.
///
/// The four words form the 256-bit ChaCha key, so distinct addresses never
/// collide and the same address always replays the same numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub run: u64,
    pub iteration: u64,
    pub player: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            run: 0,
            iteration: 0,
            player: 0,
        }
    }

    pub fn with_run(self, run: u64) -> Self {
        Self { run, ..self }
    }

    pub fn with_iteration(self, iteration: u64) -> Self {
        Self { iteration, ..self }
    }

    pub fn with_player(self, player: u64) -> Self {
        Self { player, ..self }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        for (chunk, word) in key
            .chunks_exact_mut(8)
            .zip([self.seed, self.run, self.iteration, self.player])
        {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }

    /// Fills `out` with independent standard normal draws.
    pub fn fill_standard_normal(&self, out: &mut [f64]) {
        let mut rng = self.rng();
        for v in out {
            *v = StandardNormal.sample(&mut rng);
        }
    }
}

/// One estimate `m_j(t)` with the inputs it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub per_player: JointPoint,
    pub mode: FeedbackMode,
    pub sigma: f64,
    pub query: JointPoint,
    pub state: JointPoint,
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("exploration radius must be positive, got {sigma}")))
    }
}

/// Writes `μ + σ z` into `query`, where player `i` draws its block `z^i`
/// from `stream.with_player(i)`.
pub(crate) fn sample_query_into(
    state: &JointPoint,
    sigma: f64,
    stream: &RngStream,
    query: &mut [f64],
) {
    let d = state.dim();
    for i in 0..state.num_players() {
        let block = &mut query[i * d..(i + 1) * d];
        stream.with_player(i as u64).fill_standard_normal(block);
        for (q, m) in block.iter_mut().zip(state.block(i)) {
            *q = m + sigma * *q;
        }
    }
}

/// Draws the joint query `ξ ~ N(μ, σ^2 I)`.
pub fn sample_query(state: &JointPoint, sigma: f64, stream: &RngStream) -> Result<JointPoint> {
    check_sigma(sigma)?;
    let mut query = state.clone();
    sample_query_into(state, sigma, stream, query.as_mut_slice());
    Ok(query)
}

fn checked_cost(game: &Game, i: usize, a: &[f64]) -> Result<f64> {
    let value = game.cost(i, a);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Evaluation { player: i, value })
    }
}

/// Core estimator over raw slices; `out` receives the stacked `m^i`.
pub(crate) fn estimate_into(
    game: &Game,
    mode: FeedbackMode,
    state: &[f64],
    query: &[f64],
    sigma: f64,
    out: &mut [f64],
) -> Result<()> {
    let d = game.dim();
    let inv_var = 1.0 / (sigma * sigma);
    for i in 0..game.num_players() {
        let mut observed = checked_cost(game, i, query)?;
        if mode == FeedbackMode::TwoPoint {
            observed -= checked_cost(game, i, state)?;
        }
        let scale = observed * inv_var;
        let range = i * d..(i + 1) * d;
        for ((o, q), m) in out[range.clone()]
            .iter_mut()
            .zip(&query[range.clone()])
            .zip(&state[range])
        {
            *o = scale * (q - m);
        }
    }
    Ok(())
}

/// Dispatches on `mode` to the one- or two-point estimator.
pub fn estimate(
    game: &Game,
    mode: FeedbackMode,
    state: &JointPoint,
    query: &JointPoint,
    sigma: f64,
) -> Result<GradientEstimate> {
    check_sigma(sigma)?;
    game.check_layout(state)?;
    game.check_layout(query)?;
    let mut per_player = JointPoint::zeros(game.num_players(), game.dim());
    estimate_into(
        game,
        mode,
        state.as_slice(),
        query.as_slice(),
        sigma,
        per_player.as_mut_slice(),
    )?;
    Ok(GradientEstimate {
        per_player,
        mode,
        sigma,
        query: query.clone(),
        state: state.clone(),
    })
}

/// One-point estimate `J_i(ξ) (ξ^i - μ^i) / σ^2` for every player.
pub fn estimate_one_point(
    game: &Game,
    state: &JointPoint,
    query: &JointPoint,
    sigma: f64,
) -> Result<GradientEstimate> {
    estimate(game, FeedbackMode::OnePoint, state, query, sigma)
}

/// Two-point estimate `(J_i(ξ) - J_i(μ)) (ξ^i - μ^i) / σ^2` for every player.
pub fn estimate_two_point(
    game: &Game,
    state: &JointPoint,
    query: &JointPoint,
    sigma: f64,
) -> Result<GradientEstimate> {
    estimate(game, FeedbackMode::TwoPoint, state, query, sigma)
}

/// Monte-Carlo summary of the estimator at a fixed state.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorMoments {
    /// Empirical mean, an estimate of the smoothed pseudo-gradient.
    pub mean: JointPoint,
    /// Standard error of each coordinate of `mean`.
    pub std_error: JointPoint,
    /// `E||R||^2` pooled over players, residuals taken against `mean`.
    pub residual_second_moment: f64,
    pub num_samples: usize,
}

impl EstimatorMoments {
    /// `sqrt(sum_k se_k^2)`: scale of the Euclidean error of `mean`.
    pub fn joint_std_error(&self) -> f64 {
        self.std_error.norm_sq().sqrt()
    }
}

/// Draws `n` estimates at `state`; sample `s` uses `stream.with_iteration(s)`.
pub fn estimator_moments(
    game: &Game,
    state: &JointPoint,
    sigma: f64,
    mode: FeedbackMode,
    n: usize,
    stream: &RngStream,
) -> Result<EstimatorMoments> {
    check_sigma(sigma)?;
    game.check_layout(state)?;
    if n < 2 {
        return Err(invalid(format!("need at least 2 samples, got {n}")));
    }
    let dim = game.joint_dim();
    let moments = parallel_moments(
        n,
        dim,
        || vec![0.0; dim],
        |s, query: &mut Vec<f64>, out| {
            sample_query_into(state, sigma, &stream.with_iteration(s as u64), query);
            estimate_into(game, mode, state.as_slice(), query, sigma, out)
        },
    )?;
    Ok(EstimatorMoments {
        mean: JointPoint::new(moments.mean().to_vec(), game.dim())?,
        std_error: JointPoint::new(moments.std_error(), game.dim())?,
        residual_second_moment: moments.total_variance(),
        num_samples: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::game::BoxSet;

    fn square_game() -> Game {
        Game::new(vec![BoxSet::interval(-1.0, 1.0).unwrap()], |_, a| a[0] * a[0]).unwrap()
    }

    fn pt(v: &[f64], d: usize) -> JointPoint {
        JointPoint::new(v.to_vec(), d).unwrap()
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("two-point".parse::<FeedbackMode>().unwrap(), FeedbackMode::TwoPoint);
        assert_eq!("One-Point".parse::<FeedbackMode>().unwrap(), FeedbackMode::OnePoint);
        assert!("three-point".parse::<FeedbackMode>().is_err());
    }

    #[test]
    fn hand_evaluated_single_player() {
        // J(x) = x^2, μ = 0, ξ = σ: (σ^2 - 0) σ / σ^2 = σ for both modes.
        let game = square_game();
        let sigma = 0.3;
        let mu = pt(&[0.0], 1);
        let xi = pt(&[sigma], 1);
        let one = estimate_one_point(&game, &mu, &xi, sigma).unwrap();
        let two = estimate_two_point(&game, &mu, &xi, sigma).unwrap();
        assert!((one.per_player.get(0, 0) - sigma).abs() < 1e-15);
        assert!((two.per_player.get(0, 0) - sigma).abs() < 1e-15);
    }

    #[test]
    fn query_at_state_gives_zero() {
        let game = catalog::example1_wide().game;
        let mu = pt(&[0.4, -0.2, 1.1], 1);
        for mode in [FeedbackMode::OnePoint, FeedbackMode::TwoPoint] {
            let e = estimate(&game, mode, &mu, &mu, 0.2).unwrap();
            assert!(e.per_player.as_slice().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn constant_cost_two_point_is_zero() {
        let game = Game::new(vec![BoxSet::cube(2, -1.0, 1.0).unwrap(); 2], |_, _| 5.0).unwrap();
        let mu = pt(&[0.1, 0.2, 0.3, 0.4], 2);
        let xi = sample_query(&mu, 0.5, &RngStream::new(3)).unwrap();
        let two = estimate_two_point(&game, &mu, &xi, 0.5).unwrap();
        assert!(two.per_player.as_slice().iter().all(|v| *v == 0.0));
        let one = estimate_one_point(&game, &mu, &xi, 0.5).unwrap();
        assert!(one.per_player.as_slice().iter().any(|v| *v != 0.0));
    }

    #[test]
    fn non_finite_cost_names_player() {
        let game = Game::new(vec![BoxSet::interval(-1.0, 1.0).unwrap(); 2], |i, _| {
            if i == 1 {
                f64::NAN
            } else {
                1.0
            }
        })
        .unwrap();
        let mu = pt(&[0.0, 0.0], 1);
        let xi = pt(&[0.1, 0.1], 1);
        let err = estimate_one_point(&game, &mu, &xi, 0.1).unwrap_err();
        assert!(matches!(err, Error::Evaluation { player: 1, .. }));
    }

    #[test]
    fn sigma_must_be_positive() {
        let mu = pt(&[0.0], 1);
        assert!(sample_query(&mu, 0.0, &RngStream::new(1)).is_err());
        assert!(sample_query(&mu, -1.0, &RngStream::new(1)).is_err());
        let game = square_game();
        assert!(estimate_two_point(&game, &mu, &mu, 0.0).is_err());
    }

    #[test]
    fn tiny_sigma_concentrates() {
        let mu = pt(&[0.3, -0.7, 1.2], 1);
        let xi = sample_query(&mu, 1e-12, &RngStream::new(11).with_iteration(5)).unwrap();
        assert!(xi.dist_sq(&mu).sqrt() <= 1e-9);
    }

    #[test]
    fn stream_replays_bitwise() {
        let mu = pt(&[0.3, -0.7, 1.2, 0.0], 2);
        let s = RngStream::new(42).with_run(3).with_iteration(17);
        let a = sample_query(&mu, 0.25, &s).unwrap();
        let b = sample_query(&mu, 0.25, &s).unwrap();
        assert_eq!(a, b);
        let c = sample_query(&mu, 0.25, &s.with_iteration(18)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn players_draw_from_distinct_streams() {
        let mu = JointPoint::zeros(2, 1);
        let xi = sample_query(&mu, 1.0, &RngStream::new(9)).unwrap();
        assert_ne!(xi.get(0, 0), xi.get(1, 0));
    }

    #[test]
    fn standard_normal_law_of_large_numbers() {
        // Coordinates are N(0, 1): mean within 4/sqrt(n), variance within 1%.
        let n = 1_000_000usize;
        let mu = JointPoint::zeros(1, 2);
        let moments = crate::stats::parallel_moments(
            n,
            2,
            || (),
            |s, _, out| -> Result<()> {
                let xi = sample_query(&mu, 1.0, &RngStream::new(5).with_iteration(s as u64))?;
                out.copy_from_slice(xi.as_slice());
                Ok(())
            },
        )
        .unwrap();
        let bound = 4.0 / (n as f64).sqrt();
        for k in 0..2 {
            assert!(moments.mean()[k].abs() < bound, "mean {}", moments.mean()[k]);
            assert!((moments.variance()[k] - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn one_point_unbiased_at_example1_equilibrium() {
        // Smoothed pseudo-gradient at the origin is zero (products of
        // independent centered Gaussians average out).
        let game = catalog::example1_wide().game;
        let mu = JointPoint::zeros(3, 1);
        let m = estimator_moments(&game, &mu, 0.1, FeedbackMode::OnePoint, 1_000_000, &RngStream::new(1))
            .unwrap();
        for k in 0..3 {
            assert!(m.mean.as_slice()[k].abs() <= 3.0 * m.std_error.as_slice()[k]);
        }
    }

    #[test]
    fn quadratic_mean_matches_linear_pseudo_gradient() {
        // Linear M: the smoothed pseudo-gradient is exactly 2(μ - b).
        let entry = catalog::quadratic();
        let game = &entry.game;
        let b = game.equilibrium().unwrap();
        let mu = pt(&[0.5, -0.5, 1.0, 0.0, -0.75, 0.25], 2);
        for (mode, sigma) in [(FeedbackMode::OnePoint, 0.3), (FeedbackMode::TwoPoint, 0.05)] {
            let m = estimator_moments(game, &mu, sigma, mode, 1_000_000, &RngStream::new(2)).unwrap();
            for k in 0..mu.len() {
                let exact = 2.0 * (mu.as_slice()[k] - b.as_slice()[k]);
                let err = (m.mean.as_slice()[k] - exact).abs();
                assert!(err <= 3.0 * m.std_error.as_slice()[k] + 1e-12, "{mode} coord {k}: {err}");
            }
        }
    }

    #[test]
    fn modes_agree_in_expectation() {
        let game = catalog::example1_wide().game;
        let mu = pt(&[0.5, 0.5, 0.5], 1);
        let n = 400_000;
        let one = estimator_moments(&game, &mu, 0.2, FeedbackMode::OnePoint, n, &RngStream::new(7)).unwrap();
        let two =
            estimator_moments(&game, &mu, 0.2, FeedbackMode::TwoPoint, n, &RngStream::new(8)).unwrap();
        let diff = one.mean.dist_sq(&two.mean).sqrt();
        let se = (one.joint_std_error().powi(2) + two.joint_std_error().powi(2)).sqrt();
        assert!(diff <= 3.0 * se, "{diff} vs {se}");
    }

    #[test]
    fn residual_orders_at_example1_equilibrium() {
        // At the origin J_i and ∇J_i vanish, so both estimators reduce to
        // σ^2 z1 z2 z3 z_i + σ z_i^3, with E||m||^2 = 45 σ^2 + 9 σ^4 for
        // either mode. The residual therefore shrinks like σ^2 here.
        let game = catalog::example1_wide().game;
        let mu = JointPoint::zeros(3, 1);
        for mode in [FeedbackMode::OnePoint, FeedbackMode::TwoPoint] {
            for sigma in [0.1, 0.05] {
                let m = estimator_moments(&game, &mu, sigma, mode, 1_000_000, &RngStream::new(3)).unwrap();
                let exact = 45.0 * sigma * sigma + 9.0 * sigma.powi(4);
                let rel = (m.residual_second_moment - exact).abs() / exact;
                assert!(rel < 0.03, "{mode} σ={sigma}: {} vs {exact}", m.residual_second_moment);
            }
        }
    }

    #[test]
    fn residual_orders_away_from_stationary_point() {
        // At μ = (0.5, 0.5, 0.5) both J_i(μ) and ∇J_i(μ) are nonzero:
        // one-point residual grows like σ^-2, two-point stays bounded.
        let game = catalog::example1_wide().game;
        let mu = pt(&[0.5, 0.5, 0.5], 1);
        let n = 1_000_000;
        let second = |mode, sigma| {
            estimator_moments(&game, &mu, sigma, mode, n, &RngStream::new(4))
                .unwrap()
                .residual_second_moment
        };
        let ratio_one = second(FeedbackMode::OnePoint, 0.05) / second(FeedbackMode::OnePoint, 0.1);
        assert!((2.5..=6.0).contains(&ratio_one), "one-point ratio {ratio_one}");
        let ratio_two = second(FeedbackMode::TwoPoint, 0.05) / second(FeedbackMode::TwoPoint, 0.1);
        assert!((0.5..=2.0).contains(&ratio_two), "two-point ratio {ratio_two}");
    }

    #[test]
    fn moments_are_deterministic() {
        let game = catalog::example1_wide().game;
        let mu = pt(&[0.1, 0.2, 0.3], 1);
        let a = estimator_moments(&game, &mu, 0.2, FeedbackMode::OnePoint, 50_000, &RngStream::new(5)).unwrap();
        let b = estimator_moments(&game, &mu, 0.2, FeedbackMode::OnePoint, 50_000, &RngStream::new(5)).unwrap();
        assert_eq!(a, b);
        assert!(estimator_moments(&game, &mu, 0.2, FeedbackMode::OnePoint, 1, &RngStream::new(5)).is_err());
    }
}
