//! Convex games over box action sets.
//!
//! A [`Game`] has `N` players, each choosing an action in `R^d` from an
//! axis-aligned box. Joint vectors (actions, states, query points) are stored
//! player-major in a [`JointPoint`]: player `i` owns `[i*d, (i+1)*d)`.
//!
//! Cost oracles must be defined on all of `R^{Nd}` since Gaussian query
//! points routinely leave the action sets. Growth at infinity is not checked;
//! the built-in games are polynomial.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, unsupported, Result};

/// Default step for finite-difference gradients and Jacobians.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Closed axis-aligned box `[lower, upper]` in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(invalid(format!(
                "box bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower.is_empty() {
            return Err(invalid("box must have at least one coordinate"));
        }
        for (k, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(invalid(format!("box bound {k} is not finite")));
            }
            if lo > hi {
                return Err(invalid(format!("box coordinate {k}: lower {lo} > upper {hi}")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// One-dimensional interval `[lo, hi]`.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    /// Cube `[lo, hi]^d`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| *lo <= *x && *x <= *hi)
    }

    /// True if `point` is in the box and touches at least one face.
    pub fn on_boundary(&self, point: &[f64]) -> bool {
        self.contains(point)
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .any(|(x, (lo, hi))| x == lo || x == hi)
    }

    /// Euclidean projection (coordinatewise clamp).
    pub fn project(&self, point: &[f64]) -> Result<Vec<f64>> {
        if point.len() != self.dim() {
            return Err(invalid(format!(
                "point has length {}, box has dimension {}",
                point.len(),
                self.dim()
            )));
        }
        let mut out = point.to_vec();
        self.project_in_place(&mut out);
        Ok(out)
    }

    pub(crate) fn project_in_place(&self, point: &mut [f64]) {
        for ((x, lo), hi) in point.iter_mut().zip(&self.lower).zip(&self.upper) {
            // NaN stays NaN so the learner can report it.
            if *x < *lo {
                *x = *lo;
            } else if *x > *hi {
                *x = *hi;
            }
        }
    }
}

/// Free-function form of [`BoxSet::project`].
pub fn project(set: &BoxSet, point: &[f64]) -> Result<Vec<f64>> {
    set.project(point)
}

/// A joint vector in `R^{N*d}` with player-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPoint {
    values: Vec<f64>,
    dim: usize,
}

impl JointPoint {
    pub fn new(values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || values.is_empty() || !values.len().is_multiple_of(dim) {
            return Err(invalid(format!(
                "joint point of length {} is not a whole number of {dim}-dimensional blocks",
                values.len()
            )));
        }
        Ok(Self { values, dim })
    }

    pub fn zeros(num_players: usize, dim: usize) -> Self {
        Self {
            values: vec![0.0; num_players * dim],
            dim,
        }
    }

    pub fn num_players(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Player `i`'s block.
    pub fn block(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Entry `k` of player `i`'s block.
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.dim + k]
    }

    pub fn dot(&self, other: &JointPoint) -> f64 {
        dot(&self.values, &other.values)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.values, &self.values)
    }

    pub fn dist_sq(&self, other: &JointPoint) -> f64 {
        dist_sq(&self.values, &other.values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl fmt::Display for JointPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, v) in self.values.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `J_i(a)`: player index and joint action (player-major, length `N*d`).
pub type CostFn = dyn Fn(usize, &[f64]) -> f64 + Send + Sync;

/// `M(a)`: writes the stacked partial gradients into the output slice.
pub type PseudoGradientFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Projection onto player `i`'s action set, in place. Overrides the box
/// clamp for action sets that are not boxes; the box must still enclose the
/// set (it is used for sampling and containment checks).
pub type ProjectionFn = dyn Fn(usize, &mut [f64]) + Send + Sync;

/// A convex game `Γ(N, {A_i}, {J_i})` plus optional structural metadata.
///
/// Immutable after construction; clones share the oracles.
#[derive(Clone)]
pub struct Game {
    num_players: usize,
    dim: usize,
    action_sets: Vec<BoxSet>,
    cost: Arc<CostFn>,
    pseudo_gradient: Option<Arc<PseudoGradientFn>>,
    projection: Option<Arc<ProjectionFn>>,
    equilibrium: Option<JointPoint>,
    svs_constant: Option<f64>,
}

impl fmt::Debug for Game {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Game")
            .field("num_players", &self.num_players)
            .field("dim", &self.dim)
            .field("action_sets", &self.action_sets)
            .field("has_pseudo_gradient", &self.pseudo_gradient.is_some())
            .field("equilibrium", &self.equilibrium)
            .field("svs_constant", &self.svs_constant)
            .finish()
    }
}

impl Game {
    pub fn new<F>(action_sets: Vec<BoxSet>, cost: F) -> Result<Self>
    where
        F: Fn(usize, &[f64]) -> f64 + Send + Sync + 'static,
    {
        let Some(first) = action_sets.first() else {
            return Err(invalid("a game needs at least one player"));
        };
        let dim = first.dim();
        if let Some(i) = action_sets.iter().position(|s| s.dim() != dim) {
            return Err(invalid(format!(
                "player {i} has a {}-dimensional action set, expected {dim}",
                action_sets[i].dim()
            )));
        }
        Ok(Self {
            num_players: action_sets.len(),
            dim,
            action_sets,
            cost: Arc::new(cost),
            pseudo_gradient: None,
            projection: None,
            equilibrium: None,
            svs_constant: None,
        })
    }

    pub fn with_pseudo_gradient<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.pseudo_gradient = Some(Arc::new(f));
        self
    }

    pub fn with_projection<F>(mut self, f: F) -> Self
    where
        F: Fn(usize, &mut [f64]) + Send + Sync + 'static,
    {
        self.projection = Some(Arc::new(f));
        self
    }

    /// Attaches the equilibrium; it must lie in every action set.
    pub fn with_equilibrium(mut self, a: JointPoint) -> Result<Self> {
        self.check_layout(&a)?;
        if !self.contains(&a) {
            return Err(invalid(format!("equilibrium {a} lies outside the action sets")));
        }
        self.equilibrium = Some(a);
        Ok(self)
    }

    pub fn with_svs_constant(mut self, nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(invalid(format!("SVS constant must be positive, got {nu}")));
        }
        self.svs_constant = Some(nu);
        Ok(self)
    }

    pub fn num_players(&self) -> usize {
        self.num_players
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `N * d`.
    pub fn joint_dim(&self) -> usize {
        self.num_players * self.dim
    }

    pub fn action_sets(&self) -> &[BoxSet] {
        &self.action_sets
    }

    pub fn action_set(&self, i: usize) -> &BoxSet {
        &self.action_sets[i]
    }

    pub fn equilibrium(&self) -> Option<&JointPoint> {
        self.equilibrium.as_ref()
    }

    pub fn svs_constant(&self) -> Option<f64> {
        self.svs_constant
    }

    pub fn has_pseudo_gradient(&self) -> bool {
        self.pseudo_gradient.is_some()
    }

    pub fn check_layout(&self, a: &JointPoint) -> Result<()> {
        if a.dim() != self.dim || a.len() != self.joint_dim() {
            return Err(invalid(format!(
                "joint point has {} players x {} dims, game has {} x {}",
                a.num_players(),
                a.dim(),
                self.num_players,
                self.dim
            )));
        }
        Ok(())
    }

    /// `J_i(a)` on a raw player-major slice.
    pub fn cost(&self, i: usize, a: &[f64]) -> f64 {
        (self.cost)(i, a)
    }

    pub fn contains(&self, a: &JointPoint) -> bool {
        a.len() == self.joint_dim()
            && (0..self.num_players).all(|i| self.action_sets[i].contains(a.block(i)))
    }

    /// Projects player `i`'s block onto `A_i` in place.
    pub fn project_player(&self, i: usize, block: &mut [f64]) {
        match &self.projection {
            Some(p) => p(i, block),
            None => self.action_sets[i].project_in_place(block),
        }
    }

    /// Projects every block onto its action set.
    pub fn project(&self, a: &JointPoint) -> Result<JointPoint> {
        self.check_layout(a)?;
        let mut out = a.clone();
        for i in 0..self.num_players {
            self.project_player(i, out.block_mut(i));
        }
        Ok(out)
    }

    pub(crate) fn pseudo_gradient_oracle(&self) -> Result<&PseudoGradientFn> {
        self.pseudo_gradient
            .as_deref()
            .ok_or_else(|| unsupported("game has no analytic pseudo-gradient"))
    }

    /// `M(a)`, the stacked partial gradients `∇_{a^i} J_i(a)`.
    pub fn pseudo_gradient(&self, a: &JointPoint) -> Result<JointPoint> {
        let oracle = self.pseudo_gradient_oracle()?;
        self.check_layout(a)?;
        let mut out = JointPoint::zeros(self.num_players, self.dim);
        oracle(a.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    /// `(M(a), a - a*) - ν ||a - a*||^2`; nonnegative wherever the SVS
    /// inequality holds.
    pub fn svs_gap(&self, a: &JointPoint) -> Result<f64> {
        let (eq, nu) = self.svs_metadata()?;
        let m = self.pseudo_gradient(a)?;
        let mut inner = 0.0;
        let mut dist = 0.0;
        for ((mk, ak), ek) in m.as_slice().iter().zip(a.as_slice()).zip(eq.as_slice()) {
            let diff = ak - ek;
            inner += mk * diff;
            dist += diff * diff;
        }
        Ok(inner - nu * dist)
    }

    pub(crate) fn svs_metadata(&self) -> Result<(&JointPoint, f64)> {
        let eq = self
            .equilibrium
            .as_ref()
            .ok_or_else(|| unsupported("game has no equilibrium metadata"))?;
        let nu = self
            .svs_constant
            .ok_or_else(|| unsupported("game has no SVS constant"))?;
        Ok((eq, nu))
    }

    /// Central-difference approximation of `M(a)` from the cost oracles.
    pub fn finite_difference_pseudo_gradient(&self, a: &JointPoint, h: f64) -> Result<JointPoint> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid(format!("finite-difference step must be positive, got {h}")));
        }
        self.check_layout(a)?;
        let mut out = JointPoint::zeros(self.num_players, self.dim);
        let mut x = a.as_slice().to_vec();
        for i in 0..self.num_players {
            for k in 0..self.dim {
                let idx = i * self.dim + k;
                let orig = x[idx];
                x[idx] = orig + h;
                let plus = self.cost(i, &x);
                x[idx] = orig - h;
                let minus = self.cost(i, &x);
                x[idx] = orig;
                out.as_mut_slice()[idx] = (plus - minus) / (2.0 * h);
            }
        }
        Ok(out)
    }

    /// Central-difference Jacobian of the analytic pseudo-gradient, row `r`
    /// holding `∂M_r / ∂a`.
    pub fn jacobian(&self, a: &JointPoint, h: f64) -> Result<DMatrix<f64>> {
        let oracle = self.pseudo_gradient_oracle()?;
        self.check_layout(a)?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid(format!("finite-difference step must be positive, got {h}")));
        }
        let n = self.joint_dim();
        let mut jac = DMatrix::zeros(n, n);
        let mut x = a.as_slice().to_vec();
        let mut plus = vec![0.0; n];
        let mut minus = vec![0.0; n];
        for col in 0..n {
            let orig = x[col];
            x[col] = orig + h;
            oracle(&x, &mut plus);
            x[col] = orig - h;
            oracle(&x, &mut minus);
            x[col] = orig;
            for row in 0..n {
                jac[(row, col)] = (plus[row] - minus[row]) / (2.0 * h);
            }
        }
        Ok(jac)
    }

    /// Smallest eigenvalue of the symmetrized Jacobian of `M` at `a`. A
    /// negative value certifies that `M` is not monotone.
    pub fn jacobian_min_eigenvalue(&self, a: &JointPoint) -> Result<f64> {
        let jac = self.jacobian(a, DEFAULT_FD_STEP)?;
        let sym = (&jac + jac.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
    }
}
