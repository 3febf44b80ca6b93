//! Payoff-based learning of Nash equilibria in convex games.
//!
//! Players only observe their own cost at randomized query points. Each
//! player perturbs its state with Gaussian noise, estimates its local
//! gradient from one or two cost observations, and takes a projected
//! gradient step. Under strong variational stability of the equilibrium the
//! mean squared distance decays as `O(Nd / sqrt(t))` with one-point feedback
//! and `O(N^2 d^2 / t)` with two-point feedback.
//!
//! Modules:
//!
//! - [`game`]: games, joint points, box projections and pseudo-gradients.
//! - [`estimator`]: Gaussian query sampling and one-/two-point estimators.
//! - [`learner`]: the projected zeroth-order gradient-play iteration.
//! - [`smoothed`]: Gaussian-smoothed costs and pseudo-gradients.
//! - [`analysis`]: ensemble curves, rate fits and Chung's recursion.
//! - [`catalog`]: built-in games referenced by name.
//! - [`experiment`]: experiment configs and the CSV/metadata formats.
//! - [`verify`]: property suites run by `nashzero verify`.

pub mod analysis;
pub mod catalog;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod game;
pub mod learner;
pub mod smoothed;
pub mod stats;
pub mod verify;

pub use analysis::{
    chung_simulate, compare_modes, fit_rate, mean_distance_curve, ChungOutcome, ChungParams,
    CurvePoint, ModeComparison, RateFit,
};
pub use catalog::{CatalogEntry, Tag};
pub use error::{Error, Result};
pub use estimator::{FeedbackMode, GradientEstimate, RngStream};
pub use game::{BoxSet, Game, JointPoint};
pub use learner::{
    Checkpoint, InitialState, LearnerConfig, Recording, Schedules, Trajectory,
};
pub use smoothed::{ScalarEstimate, SmoothedEvaluation};
