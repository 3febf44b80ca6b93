//! Gaussian-smoothed (mixed-strategy) costs and pseudo-gradients.
//!
//! With every player mixing `x^i ~ N(μ^i, σ^2 I)`:
//!
//! ```text
//! J̃_i(μ, σ) = E J_i(x)
//! M̃_i(μ, σ) = ∇_{μ^i} J̃_i(μ, σ) = E M_i(x)
//! ```
//!
//! `M̃` is the conditional mean of both zeroth-order estimators, and it keeps
//! the SVS inequality of `M` up to an `O(N d σ^2)` remainder. Everything here
//! is Monte-Carlo with standard errors. Sample `s` of any routine uses
//! `stream.with_iteration(s)`, so two routines called with the same stream
//! see the same query points (common random numbers).
//!
//! [`quadrature`] gives a deterministic tensor Gauss-Hermite alternative for
//! games with `N d <= 4`, used as an independent oracle in tests.

use crate::error::{invalid, Result};
use crate::estimator::{estimator_moments, sample_query_into, FeedbackMode, RngStream};
use crate::game::{dot, Game, JointPoint};
use crate::stats::parallel_moments;

/// Monte-Carlo estimate of a vector (or scalar, length 1) quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedEvaluation {
    pub value: Vec<f64>,
    pub std_error: Vec<f64>,
    pub sigma: f64,
    pub num_samples: usize,
}

impl SmoothedEvaluation {
    /// `sqrt(sum_k se_k^2)`.
    pub fn joint_std_error(&self) -> f64 {
        self.std_error.iter().map(|s| s * s).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarEstimate {
    pub value: f64,
    pub std_error: f64,
}

fn check_inputs(game: &Game, state: &JointPoint, sigma: f64, n: usize) -> Result<()> {
    game.check_layout(state)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("exploration radius must be positive, got {sigma}")));
    }
    if n < 2 {
        return Err(invalid(format!("need at least 2 samples, got {n}")));
    }
    Ok(())
}

fn checked(player: usize, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(crate::Error::Evaluation { player, value })
    }
}

/// `J̃_i(μ, σ)` by Monte Carlo.
pub fn smoothed_cost(
    game: &Game,
    player: usize,
    state: &JointPoint,
    sigma: f64,
    n: usize,
    stream: &RngStream,
) -> Result<SmoothedEvaluation> {
    check_inputs(game, state, sigma, n)?;
    if player >= game.num_players() {
        return Err(invalid(format!("player {player} out of range")));
    }
    let moments = parallel_moments(
        n,
        1,
        || vec![0.0; game.joint_dim()],
        |s, query: &mut Vec<f64>, out| {
            sample_query_into(state, sigma, &stream.with_iteration(s as u64), query);
            out[0] = checked(player, game.cost(player, query))?;
            Ok(())
        },
    )?;
    Ok(SmoothedEvaluation {
        value: moments.mean().to_vec(),
        std_error: moments.std_error(),
        sigma,
        num_samples: n,
    })
}

/// `M̃(μ, σ) = E M(x)` by Monte Carlo, per coordinate with standard errors.
pub fn smoothed_pseudo_gradient(
    game: &Game,
    state: &JointPoint,
    sigma: f64,
    n: usize,
    stream: &RngStream,
) -> Result<SmoothedEvaluation> {
    let oracle = game.pseudo_gradient_oracle()?;
    check_inputs(game, state, sigma, n)?;
    let dim = game.joint_dim();
    let moments = parallel_moments(
        n,
        dim,
        || vec![0.0; dim],
        |s, query: &mut Vec<f64>, out| {
            sample_query_into(state, sigma, &stream.with_iteration(s as u64), query);
            oracle(query, out);
            match out.iter().position(|v| !v.is_finite()) {
                Some(k) => Err(crate::Error::Evaluation {
                    player: k / game.dim(),
                    value: out[k],
                }),
                None => Ok(()),
            }
        },
    )?;
    Ok(SmoothedEvaluation {
        value: moments.mean().to_vec(),
        std_error: moments.std_error(),
        sigma,
        num_samples: n,
    })
}

/// `(M̃(μ, σ), μ - a*) - ν ||μ - a*||^2`.
///
/// The inner product is averaged per sample, so the standard error accounts
/// for the correlation between coordinates.
pub fn almost_svs_margin(
    game: &Game,
    state: &JointPoint,
    sigma: f64,
    n: usize,
    stream: &RngStream,
) -> Result<ScalarEstimate> {
    let (eq, nu) = game.svs_metadata()?;
    let oracle = game.pseudo_gradient_oracle()?;
    check_inputs(game, state, sigma, n)?;
    let dim = game.joint_dim();
    let offset: Vec<f64> = state
        .as_slice()
        .iter()
        .zip(eq.as_slice())
        .map(|(m, e)| m - e)
        .collect();
    let penalty = nu * dot(&offset, &offset);
    let moments = parallel_moments(
        n,
        1,
        || (vec![0.0; dim], vec![0.0; dim]),
        |s, (query, grad): &mut (Vec<f64>, Vec<f64>), out| {
            sample_query_into(state, sigma, &stream.with_iteration(s as u64), query);
            oracle(query, grad);
            out[0] = checked(0, dot(grad, &offset))?;
            Ok(())
        },
    )?;
    Ok(ScalarEstimate {
        value: moments.mean()[0] - penalty,
        std_error: moments.std_error()[0],
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma1Check {
    /// `||mean estimate - M̃ estimate||`.
    pub distance: f64,
    /// `sqrt(sum_k (se_est_k^2 + se_smooth_k^2))`.
    pub joint_std_error: f64,
}

impl Lemma1Check {
    /// Distance measured in joint standard errors (0 when both are 0).
    pub fn z_score(&self) -> f64 {
        if self.distance == 0.0 {
            0.0
        } else {
            self.distance / self.joint_std_error
        }
    }

    pub fn within(&self, k: f64) -> bool {
        self.distance <= k * self.joint_std_error
    }
}

/// Compares the estimator's empirical mean with an independent Monte-Carlo
/// estimate of `M̃` (the two sides use disjoint streams).
pub fn lemma1_consistency(
    game: &Game,
    state: &JointPoint,
    sigma: f64,
    mode: FeedbackMode,
    n: usize,
    stream: &RngStream,
) -> Result<Lemma1Check> {
    game.pseudo_gradient_oracle()?;
    let est = estimator_moments(game, state, sigma, mode, n, stream)?;
    let smooth_stream = stream.with_run(stream.run ^ (1 << 63));
    let smooth = smoothed_pseudo_gradient(game, state, sigma, n, &smooth_stream)?;
    let distance = est
        .mean
        .as_slice()
        .iter()
        .zip(&smooth.value)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let joint = (est.joint_std_error().powi(2) + smooth.joint_std_error().powi(2)).sqrt();
    Ok(Lemma1Check {
        distance,
        joint_std_error: joint,
    })
}

pub mod quadrature {
    //! Tensor-product Gauss-Hermite rules for Gaussian expectations.

    use nalgebra::{DMatrix, SymmetricEigen};

    use crate::error::{invalid, Result};
    use crate::game::{Game, JointPoint};

    pub const DEFAULT_NODES: usize = 20;
    pub const MAX_JOINT_DIM: usize = 4;

    /// Nodes and weights for `E f(Z)`, `Z ~ N(0, 1)`, via Golub-Welsch.
    /// Weights sum to 1.
    pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
        assert!(n >= 1);
        let mut jacobi = DMatrix::zeros(n, n);
        for k in 1..n {
            let b = (k as f64 / 2.0).sqrt();
            jacobi[(k, k - 1)] = b;
            jacobi[(k - 1, k)] = b;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let v0 = eig.eigenvectors[(0, k)];
                (eig.eigenvalues[k] * std::f64::consts::SQRT_2, v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        pairs.into_iter().unzip()
    }

    /// `E f(μ + σ Z)` for `Z ~ N(0, I)`; `f` writes `out_len` values.
    pub fn gaussian_expectation<F>(
        mean: &[f64],
        sigma: f64,
        nodes_per_dim: usize,
        out_len: usize,
        mut f: F,
    ) -> Vec<f64>
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let dim = mean.len();
        let (nodes, weights) = gauss_hermite(nodes_per_dim);
        let mut idx = vec![0usize; dim];
        let mut x = vec![0.0; dim];
        let mut val = vec![0.0; out_len];
        let mut acc = vec![0.0; out_len];
        loop {
            let mut w = 1.0;
            for k in 0..dim {
                x[k] = mean[k] + sigma * nodes[idx[k]];
                w *= weights[idx[k]];
            }
            f(&x, &mut val);
            for (a, v) in acc.iter_mut().zip(&val) {
                *a += w * v;
            }
            let mut k = 0;
            loop {
                if k == dim {
                    return acc;
                }
                idx[k] += 1;
                if idx[k] < nodes_per_dim {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    fn check(game: &Game, state: &JointPoint, sigma: f64) -> Result<()> {
        game.check_layout(state)?;
        if game.joint_dim() > MAX_JOINT_DIM {
            return Err(invalid(format!(
                "quadrature supports N*d <= {MAX_JOINT_DIM}, game has {}",
                game.joint_dim()
            )));
        }
        if sigma.is_nan() || sigma <= 0.0 {
            return Err(invalid("exploration radius must be positive"));
        }
        Ok(())
    }

    /// `J̃_i(μ, σ)` by quadrature.
    pub fn smoothed_cost(game: &Game, player: usize, state: &JointPoint, sigma: f64) -> Result<f64> {
        check(game, state, sigma)?;
        Ok(gaussian_expectation(state.as_slice(), sigma, DEFAULT_NODES, 1, |x, out| {
            out[0] = game.cost(player, x)
        })[0])
    }

    /// `M̃(μ, σ)` by quadrature.
    pub fn smoothed_pseudo_gradient(game: &Game, state: &JointPoint, sigma: f64) -> Result<JointPoint> {
        let oracle = game.pseudo_gradient_oracle()?;
        check(game, state, sigma)?;
        let v = gaussian_expectation(state.as_slice(), sigma, DEFAULT_NODES, game.joint_dim(), |x, out| {
            oracle(x, out)
        });
        JointPoint::new(v, game.dim())
    }

    /// `(M̃(μ, σ), μ - a*) - ν ||μ - a*||^2` by quadrature.
    pub fn almost_svs_margin(game: &Game, state: &JointPoint, sigma: f64) -> Result<f64> {
        let (eq, nu) = game.svs_metadata()?;
        let m = smoothed_pseudo_gradient(game, state, sigma)?;
        let mut inner = 0.0;
        let mut dist = 0.0;
        for ((mk, sk), ek) in m.as_slice().iter().zip(state.as_slice()).zip(eq.as_slice()) {
            inner += mk * (sk - ek);
            dist += (sk - ek) * (sk - ek);
        }
        Ok(inner - nu * dist)
    }
}
