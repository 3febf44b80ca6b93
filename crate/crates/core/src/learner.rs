//! Projected zeroth-order gradient play.
//!
//! Each iteration `t = 1, 2, ..., T`:
//!
//! 1. every player samples `ξ^i(t) ~ N(μ^i, σ_t^2 I)`;
//! 2. the game reveals `J_i(ξ(t))` (and `J_i(μ)` under two-point feedback);
//! 3. every player forms its estimate `m^i(t)` and updates
//!    `μ^i ← Proj_{A_i}[μ^i - γ_t m^i(t)]`, all players simultaneously.
//!
//! Schedules: `γ_t = c / t`, `σ_t = a / t^{1/4}` (one-point) or `a / t^s`
//! (two-point). Indexing starts at `t = 1` so that both are defined on the
//! first update. Checkpoint `t` holds the state after `t` updates, which is
//! always feasible whatever the initial state.

use log::warn;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::estimator::{estimate_into, sample_query_into, FeedbackMode, RngStream};
use crate::game::{Game, JointPoint};

/// Below this exploration radius two-point differences lose most of their
/// significant digits.
pub const SMALL_SIGMA_WARNING: f64 = 1e-7;

/// Default cap on geometric checkpoints.
pub const DEFAULT_MAX_CHECKPOINTS: usize = 1000;

const CHECKPOINTS_PER_DECADE: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedules {
    pub mode: FeedbackMode,
    /// Step scale: `γ_t = c / t`.
    pub c: f64,
    /// Exploration scale.
    pub a: f64,
    /// Two-point exponent: `σ_t = a / t^s`.
    pub s: f64,
}

impl Schedules {
    pub fn new(mode: FeedbackMode, c: f64, a: f64, s: f64) -> Result<Self> {
        let sched = Self { mode, c, a, s };
        sched.validate()?;
        Ok(sched)
    }

    /// `c = a = s = 1`.
    pub fn unit(mode: FeedbackMode) -> Self {
        Self {
            mode,
            c: 1.0,
            a: 1.0,
            s: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(invalid(format!("step scale c must be positive, got {}", self.c)));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(invalid(format!("exploration scale a must be positive, got {}", self.a)));
        }
        if self.mode == FeedbackMode::TwoPoint && !(self.s >= 1.0 && self.s.is_finite()) {
            return Err(invalid(format!("two-point exponent s must be >= 1, got {}", self.s)));
        }
        Ok(())
    }

    pub fn step_size(&self, t: u64) -> Result<f64> {
        if t == 0 {
            return Err(invalid("schedules start at t = 1"));
        }
        Ok(self.c / t as f64)
    }

    pub fn exploration_radius(&self, t: u64) -> Result<f64> {
        if t == 0 {
            return Err(invalid("schedules start at t = 1"));
        }
        let t = t as f64;
        Ok(match self.mode {
            FeedbackMode::OnePoint => self.a / t.powf(0.25),
            FeedbackMode::TwoPoint => self.a / t.powf(self.s),
        })
    }
}

/// `γ_t = c / t`.
pub fn step_size(schedules: &Schedules, t: u64) -> Result<f64> {
    schedules.step_size(t)
}

/// `σ_t`: `a / t^{1/4}` for one-point, `a / t^s` for two-point feedback.
pub fn exploration_radius(schedules: &Schedules, t: u64) -> Result<f64> {
    schedules.exploration_radius(t)
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Any finite joint vector; it need not be feasible.
    Fixed(JointPoint),
    /// Standard normal per coordinate, drawn from the run's stream at
    /// iteration 0.
    StandardNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recording {
    /// `t = 1`, every multiple of the stride, and `t = T`.
    Stride(u64),
    /// Log-spaced grid, about 100 points per decade, capped at `max_points`.
    Geometric { max_points: usize },
}

impl Default for Recording {
    fn default() -> Self {
        Recording::Geometric {
            max_points: DEFAULT_MAX_CHECKPOINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub schedules: Schedules,
    pub iterations: u64,
    pub initial_state: InitialState,
    pub seed: u64,
    pub recording: Recording,
    /// Also store `ξ(t)` at checkpoints.
    pub record_queries: bool,
    /// Substitute the analytic `M(μ)` for the zeroth-order estimate. Only
    /// meant as a sanity hook (the `σ → 0` limit of two-point feedback).
    pub exact_gradient: bool,
}

impl LearnerConfig {
    pub fn new(schedules: Schedules, iterations: u64, initial_state: InitialState, seed: u64) -> Self {
        Self {
            schedules,
            iterations,
            initial_state,
            seed,
            recording: Recording::default(),
            record_queries: false,
            exact_gradient: false,
        }
    }

    pub fn with_recording(mut self, recording: Recording) -> Self {
        self.recording = recording;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.schedules.validate()?;
        if self.iterations == 0 {
            return Err(invalid("iterations must be positive"));
        }
        match self.recording {
            Recording::Stride(0) => return Err(invalid("record stride must be positive")),
            Recording::Stride(s) if s > self.iterations => {
                return Err(invalid(format!(
                    "record stride {s} exceeds iterations {}",
                    self.iterations
                )))
            }
            Recording::Geometric { max_points } if max_points < 2 => {
                return Err(invalid("geometric grid needs at least 2 checkpoints"))
            }
            _ => {}
        }
        if let InitialState::Fixed(p) = &self.initial_state {
            if !p.is_finite() {
                return Err(invalid("initial state must be finite"));
            }
        }
        Ok(())
    }

    /// Checkpoint iterations, strictly increasing, always containing 1 and T.
    pub fn checkpoint_grid(&self) -> Vec<u64> {
        checkpoint_grid(self.iterations, self.recording)
    }
}

pub fn checkpoint_grid(iterations: u64, recording: Recording) -> Vec<u64> {
    let last = iterations.max(1);
    let mut grid = match recording {
        Recording::Stride(stride) => {
            let stride = stride.max(1);
            let mut g = vec![1];
            g.extend((1..=last / stride).map(|k| k * stride));
            g
        }
        Recording::Geometric { max_points } => {
            let decades = (last as f64).log10();
            let wanted = (CHECKPOINTS_PER_DECADE * decades).ceil() as usize + 1;
            let points = wanted.clamp(2, max_points.max(2));
            (0..points)
                .map(|k| {
                    let frac = k as f64 / (points - 1) as f64;
                    (10f64.powf(decades * frac).round() as u64).clamp(1, last)
                })
                .collect()
        }
    };
    grid.push(last);
    grid.sort_unstable();
    grid.dedup();
    grid
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub t: u64,
    pub state: JointPoint,
    pub query: Option<JointPoint>,
    /// `||μ(t) - a*||^2`, present when the game knows its equilibrium.
    pub dist_sq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub run: u64,
    pub checkpoints: Vec<Checkpoint>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&Checkpoint> {
        self.checkpoints.last()
    }

    pub fn final_state(&self) -> Option<&JointPoint> {
        self.last().map(|c| &c.state)
    }

    pub fn times(&self) -> impl Iterator<Item = u64> + '_ {
        self.checkpoints.iter().map(|c| c.t)
    }
}

fn initial_state(game: &Game, config: &LearnerConfig, run: u64) -> Result<JointPoint> {
    match &config.initial_state {
        InitialState::Fixed(p) => {
            game.check_layout(p)?;
            Ok(p.clone())
        }
        InitialState::StandardNormal => {
            let mut p = JointPoint::zeros(game.num_players(), game.dim());
            let stream = RngStream::new(config.seed).with_run(run).with_iteration(0);
            for i in 0..game.num_players() {
                stream.with_player(i as u64).fill_standard_normal(p.block_mut(i));
            }
            Ok(p)
        }
    }
}

/// Runs the learner once with run index 0.
pub fn run(game: &Game, config: &LearnerConfig) -> Result<Trajectory> {
    run_indexed(game, config, 0)
}

/// Runs the learner with the random streams of run `run`.
pub fn run_indexed(game: &Game, config: &LearnerConfig, run: u64) -> Result<Trajectory> {
    config.validate()?;
    if config.exact_gradient {
        game.pseudo_gradient_oracle()?;
    }
    let mut state = initial_state(game, config, run)?;
    let equilibrium = game.equilibrium();
    let d = game.dim();
    let grid = config.checkpoint_grid();
    let mut next = grid.iter().copied().peekable();
    let mut checkpoints = Vec::with_capacity(grid.len());
    let mut query = vec![0.0; game.joint_dim()];
    let mut grad = vec![0.0; game.joint_dim()];
    let mut warned = false;
    let base = RngStream::new(config.seed).with_run(run);

    for t in 1..=config.iterations {
        let sigma = config.schedules.exploration_radius(t)?;
        let gamma = config.schedules.step_size(t)?;
        if sigma < SMALL_SIGMA_WARNING && !warned && config.schedules.mode == FeedbackMode::TwoPoint {
            warn!("exploration radius {sigma:e} at t = {t} is below {SMALL_SIGMA_WARNING:e}; two-point differences lose precision");
            warned = true;
        }
        sample_query_into(&state, sigma, &base.with_iteration(t), &mut query);
        if config.exact_gradient {
            (game.pseudo_gradient_oracle()?)(state.as_slice(), &mut grad);
        } else {
            estimate_into(
                game,
                config.schedules.mode,
                state.as_slice(),
                &query,
                sigma,
                &mut grad,
            )
            .map_err(|e| Error::Numeric {
                t,
                detail: e.to_string(),
            })?;
        }
        for (x, g) in state.as_mut_slice().iter_mut().zip(&grad) {
            *x -= gamma * g;
        }
        for i in 0..game.num_players() {
            game.project_player(i, &mut state.as_mut_slice()[i * d..(i + 1) * d]);
        }
        if !state.is_finite() {
            return Err(Error::Numeric {
                t,
                detail: "state is not finite after the update".to_string(),
            });
        }
        if next.peek() == Some(&t) {
            next.next();
            checkpoints.push(Checkpoint {
                t,
                dist_sq: equilibrium.map(|eq| state.dist_sq(eq)),
                query: config
                    .record_queries
                    .then(|| JointPoint::new(query.clone(), d))
                    .transpose()?,
                state: state.clone(),
            });
        }
    }
    Ok(Trajectory { run, checkpoints })
}

/// Independent runs `0..num_runs`, executed on the rayon pool and returned
/// in run order.
pub fn run_ensemble(game: &Game, config: &LearnerConfig, num_runs: usize) -> Result<Vec<Trajectory>> {
    if num_runs == 0 {
        return Err(invalid("num_runs must be at least 1"));
    }
    config.validate()?;
    let results: Vec<Result<Trajectory>> = (0..num_runs as u64)
        .into_par_iter()
        .map(|r| run_indexed(game, config, r))
        .collect();
    results
        .into_iter()
        .enumerate()
        .map(|(r, res)| {
            res.map_err(|e| Error::Run {
                run: r as u64,
                source: Box::new(e),
            })
        })
        .collect()
}
